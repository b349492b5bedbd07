"""Bootstrap and delta particle filters with trajectory selection.

Because the latent dynamics are translation invariant, the stick-breaking
triples for all ``T x N`` particle moves are drawn up front; the sequential
sweep then only shifts them onto the resampled ancestors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .model import Theta, gauss_logpdf, log_ratios_from, obs_array
from .stick import DrawCounter, sb_sample_batch, sb_sample_coupled_batch


class FilterDegeneracy(RuntimeError):
    """All particle weights vanished at time index ``step`` (1-based)."""

    def __init__(self, step: int):
        super().__init__(f"all particle weights are zero at step {step}")
        self.step = step


@dataclass(frozen=True)
class ResamplePolicy:
    kind: str = "ess"
    threshold: float = 0.5
    scheme: str = "multinomial"

    def __post_init__(self):
        if self.kind not in ("always", "ess", "never"):
            raise ValueError(f"unknown resampling policy {self.kind!r}")
        if self.scheme not in ("multinomial", "systematic"):
            raise ValueError(f"unknown resampling scheme {self.scheme!r}")

    def triggers(self, weights: np.ndarray) -> bool:
        if self.kind == "always":
            return True
        if self.kind == "never":
            return False
        return 1.0 / np.dot(weights, weights) < self.threshold * len(weights)

    def ancestors(self, weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        n = len(weights)
        if self.scheme == "multinomial":
            u = rng.random(n)
        else:
            u = (rng.random() + np.arange(n)) / n
        cdf = np.cumsum(weights)
        return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), n - 1)


def as_policy(policy) -> ResamplePolicy:
    if isinstance(policy, ResamplePolicy):
        return policy
    return ResamplePolicy(kind=policy)


@dataclass
class ParticleSystem:
    """Filter state after weighting at time index ``n``.

    ``particles`` has shape ``(C, N, 2)``: one latent pair per particle for
    each of the ``C`` chains (1 for the bootstrap filter, 2 for the delta
    filter, fine first). ``log_weights`` are normalised.
    """

    particles: np.ndarray
    log_weights: np.ndarray
    log_ml: float = 0.0
    n: int = 0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def ess(self) -> float:
        w = self.weights
        return 1.0 / np.dot(w, w)

    def reweight(self, log_potential: np.ndarray) -> None:
        lw = self.log_weights + log_potential
        top = lw.max()
        if not np.isfinite(top):
            raise FilterDegeneracy(self.n)
        log_norm = top + np.log(np.exp(lw - top).sum())
        self.log_ml += log_norm
        self.log_weights = lw - log_norm


def _pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))


def _sweep(z, moves, x0, potential, policy: ResamplePolicy, rng):
    """Shared sequential loop; ``moves`` is ``(C, T, N, 2)``.

    Returns the selected trajectory ``(C, T, 2)`` and the log-likelihood estimate.
    """
    n_chains, T, N, _ = moves.shape
    paths = np.empty_like(moves)
    ancestry = np.empty((T, N), dtype=np.intp)
    origin = np.full((n_chains, N, 1), float(x0))
    system = ParticleSystem(particles=paths[:, 0], log_weights=np.full(N, -np.log(N)))
    for k in range(T):
        paths[:, k] = origin + moves[:, k]
        system.particles = paths[:, k]
        system.n = k + 1
        system.reweight(potential(z[k], system.particles))
        if k == T - 1:
            break
        if policy.triggers(system.weights):
            a = policy.ancestors(system.weights, rng)
            system.log_weights = np.full(N, -np.log(N))
        else:
            a = np.arange(N)
        ancestry[k] = a
        origin = system.particles[:, a, :1]
    j = _pick(system.weights, rng)
    chosen = np.empty((n_chains, T, 2))
    for k in range(T - 1, -1, -1):
        chosen[:, k] = paths[:, k, j]
        if k:
            j = ancestry[k - 1, j]
    return chosen, system.log_ml


def _density(theta: Theta, loglik):
    if loglik is None:
        return partial(gauss_logpdf, chol=theta.chol)
    return partial(loglik, theta)


def _check(N: int, T: int, m: int, m_min: int):
    if N < 1:
        raise ValueError(f"need at least one particle, got N={N}")
    if m < m_min:
        raise ValueError(f"stick count must be >= {m_min}, got {m}")


def run_pf(theta: Theta, data, m: int, N: int, x0: float | None = None,
           resample_policy="ess", rng: np.random.Generator | None = None, *,
           sampler=sb_sample_batch, loglik=None, counter: DrawCounter | None = None):
    """Bootstrap particle filter on the ``m``-stick model.

    Parameters
    ----------
    theta : Theta
    data : Dataset, sequence of Observation or (T, 2) array
    m : int
        Sticks per unit-time transition.
    N : int
        Particle count.
    x0 : float, optional
        Known starting point; defaults to ``data.x0`` or 0.
    resample_policy : {"ess", "always", "never"} or ResamplePolicy
    rng : numpy.random.Generator
    sampler : callable
        ``sampler(levy, t, m, size, rng, counter=...)`` returning triples;
        replaceable for testing.
    loglik : callable, optional
        ``loglik(theta, z, u)`` replacing the Gaussian measurement density.

    Returns
    -------
    trajectory : ndarray, shape (T, 2)
        Selected ``(x_n, xbar_n)`` path.
    log_ml : float
        Log of the unbiased marginal-likelihood estimate.

    Raises
    ------
    FilterDegeneracy
        If every particle has zero weight at some step.
    """
    z = obs_array(data)
    T = len(z)
    _check(N, T, m, 0)
    rng = rng if rng is not None else np.random.default_rng()
    x0 = getattr(data, "x0", 0.0) if x0 is None else x0
    moves = sampler(theta.levy, 1.0, m, (T, N), rng, counter=counter)[None, ..., :2]
    density = _density(theta, loglik)
    chosen, log_ml = _sweep(z, moves, x0, lambda zk, u: density(zk, u[0]),
                            as_policy(resample_policy), rng)
    return chosen[0], log_ml


def run_delta_pf(theta: Theta, data, m: int, N: int, x0: float | None = None,
                 resample_policy="ess", rng: np.random.Generator | None = None, *,
                 m_fine: int | None = None, sampler=sb_sample_coupled_batch,
                 loglik=None, counter: DrawCounter | None = None):
    """Particle filter on coupled ``(m_fine, m)`` paths weighted by ``max(g, g)``.

    Returns ``((u, ubar), log_ml_bar)`` where ``u`` is the fine path (started
    from ``x``) and ``ubar`` the coarse one (started from ``v``), both ``(T, 2)``.
    """
    z = obs_array(data)
    T = len(z)
    _check(N, T, m, 1)
    rng = rng if rng is not None else np.random.default_rng()
    x0 = getattr(data, "x0", 0.0) if x0 is None else x0
    coarse, fine = sampler(theta.levy, 1.0, m, (T, N), rng, m_fine=m_fine, counter=counter)
    moves = np.stack([fine[..., :2], coarse[..., :2]])
    density = _density(theta, loglik)

    def potential(zk, u):
        return np.maximum(density(zk, u[0]), density(zk, u[1]))

    chosen, log_ml = _sweep(z, moves, x0, potential, as_policy(resample_policy), rng)
    return (chosen[0], chosen[1]), log_ml


def coupled_log_ratios(theta: Theta, data, u, ubar, loglik=None) -> tuple[float, float]:
    """``(log R1, log R2)`` for a coupled trajectory."""
    z = obs_array(data)
    density = _density(theta, loglik)
    return log_ratios_from(density(z, u), density(z, ubar))
