"""Exact increment sampling for drifted Brownian motion on a random clock.

Both models share the form ``X_t = b t + sigma * W(Z_t)``; they differ only in
the law of the clock increment ``Z_t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Subordinator(enum.Enum):
    GAMMA = "gamma"
    INVERSE_GAMMA = "inverse_gamma"


@dataclass(frozen=True)
class LevyParams:
    """Parameters of a subordinated Brownian motion.

    ``alpha`` and ``beta`` set the clock law. For the Gamma clock
    ``Z_t ~ Gamma(shape=alpha*t, scale=beta)``; for the Inverse-Gamma clock
    ``Z_t ~ InvGamma(shape=alpha, scale=beta*t)``.
    """

    b: float
    sigma: float
    alpha: float = 1.5
    beta: float = 2.0
    kind: Subordinator = Subordinator.GAMMA

    def __post_init__(self):
        for name in ("sigma", "alpha", "beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not np.isfinite(self.b):
            raise ValueError(f"b must be finite, got {self.b!r}")
        if not isinstance(self.kind, Subordinator):
            object.__setattr__(self, "kind", Subordinator(self.kind))

    def clock_mean(self, t: float = 1.0) -> float:
        """E[Z_t]; infinite for the Inverse-Gamma clock when ``alpha <= 1``."""
        if self.kind is Subordinator.GAMMA:
            return self.alpha * t * self.beta
        if self.alpha <= 1:
            return np.inf
        return self.beta * t / (self.alpha - 1)


def sample_clock(params: LevyParams, t, rng: np.random.Generator, size=None):
    """Draw clock increments ``Z_t``. ``t`` may be an array of horizons >= 0."""
    t = np.asarray(t, dtype=float)
    if params.kind is Subordinator.GAMMA:
        return rng.gamma(params.alpha * t, params.beta, size=size)
    g = rng.gamma(params.alpha, 1.0, size=size if size is not None else t.shape)
    return params.beta * t / g


def _increments(params: LevyParams, t, rng, size=None):
    """Vectorised draw of ``X_t`` for horizons ``t >= 0`` (no argument checks)."""
    z = sample_clock(params, t, rng, size=size)
    g = rng.standard_normal(np.shape(z))
    return params.b * t + params.sigma * np.sqrt(z) * g


def sample_increment(params: LevyParams, t, rng: np.random.Generator, size=None):
    """Exact draw(s) from the law of ``X_t``.

    Parameters
    ----------
    params : LevyParams
    t : float or ndarray
        Horizon(s), strictly positive.
    rng : numpy.random.Generator
    size : int or tuple, optional
        Number of i.i.d. draws for a scalar ``t``.

    Returns
    -------
    float or ndarray
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(t_arr > 0):
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    x = _increments(params, t_arr, rng, size=size)
    if not np.all(np.isfinite(x)):
        name = "alpha" if params.kind is Subordinator.INVERSE_GAMMA else "sigma"
        raise ValueError(
            f"non-finite increment drawn for {params.kind.value} clock; "
            f"check {name}={getattr(params, name)!r} and t"
        )
    if np.ndim(x) == 0:
        return float(x)
    return x
