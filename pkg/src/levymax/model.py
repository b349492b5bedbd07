"""Observation density, priors and the parameter container.

Observations are ``z_n = (y_n, ybar_n)``, a bivariate normal perturbation of
the latent pair ``u_n = (x_n, xbar_n)`` with covariance ``obs_cov``. Every
density here is returned on the log scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, multigammaln

from .levy import LevyParams

LOG_2PI = np.log(2.0 * np.pi)
FREE_NAMES = ("b", "sigma", "obs_cov")


class NotPositiveDefinite(ValueError):
    pass


class Observation(NamedTuple):
    y: float
    ybar: float


@dataclass(frozen=True, eq=False)
class Theta:
    levy: LevyParams
    obs_cov: np.ndarray = field(default_factory=lambda: np.eye(2))

    def __post_init__(self):
        cov = np.array(self.obs_cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError(f"obs_cov must be 2x2, got shape {cov.shape}")
        cov.setflags(write=False)
        object.__setattr__(self, "obs_cov", cov)

    def __eq__(self, other):
        if not isinstance(other, Theta):
            return NotImplemented
        return self.levy == other.levy and np.array_equal(self.obs_cov, other.obs_cov)

    __hash__ = None

    @property
    def chol(self) -> np.ndarray:
        return cholesky(self.obs_cov)

    def with_levy(self, **changes) -> "Theta":
        return replace(self, levy=replace(self.levy, **changes))

    def with_cov(self, cov) -> "Theta":
        return replace(self, obs_cov=cov)


def cholesky(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise NotPositiveDefinite("covariance is not symmetric")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"covariance is not positive definite: {cov.tolist()}") from exc


def gauss_logpdf(z, u, chol: np.ndarray) -> np.ndarray:
    """Bivariate normal log density of ``z`` with mean ``u`` and factor ``chol``.

    ``z`` and ``u`` broadcast over leading dimensions; the last axis has size 2.
    """
    d = np.asarray(z, dtype=float) - np.asarray(u, dtype=float)
    l11, l21, l22 = chol[0, 0], chol[1, 0], chol[1, 1]
    w1 = d[..., 0] / l11
    w2 = (d[..., 1] - l21 * w1) / l22
    return -LOG_2PI - np.log(l11 * l22) - 0.5 * (w1 * w1 + w2 * w2)


def log_g(theta: Theta, z, u):
    """Log measurement density of ``z`` given latent pair(s) ``u``."""
    out = gauss_logpdf(z, u, theta.chol)
    return float(out) if np.ndim(out) == 0 else out


def log_G_bar(theta: Theta, z, u, ubar):
    """Log of the dominating potential ``max(g(z|u), g(z|ubar))``."""
    chol = theta.chol
    out = np.maximum(gauss_logpdf(z, u, chol), gauss_logpdf(z, ubar, chol))
    return float(out) if np.ndim(out) == 0 else out


def obs_array(data) -> np.ndarray:
    """``(T, 2)`` float array from a Dataset, a sequence of Observations or an array."""
    obs = getattr(data, "observations", data)
    z = np.asarray(obs, dtype=float)
    if z.ndim != 2 or z.shape[1] != 2 or len(z) == 0:
        raise ValueError(f"observations must form a nonempty (T, 2) array, got shape {z.shape}")
    return z


def _paths(z_path, u_path, ubar_path):
    z, u, ub = (np.asarray(a, dtype=float) for a in (z_path, u_path, ubar_path))
    if not (z.shape == u.shape == ub.shape) or z.ndim != 2 or z.shape[1] != 2:
        raise ValueError(
            f"paths must share shape (T, 2); got {z.shape}, {u.shape}, {ub.shape}")
    return z, u, ub


def log_ratios_from(lg_u: np.ndarray, lg_ubar: np.ndarray) -> tuple[float, float]:
    """``(log R1, log R2)`` from per-step log densities along both paths."""
    top = np.maximum(lg_u, lg_ubar)
    return float(np.sum(lg_u - top)), float(np.sum(lg_ubar - top))


def log_R1(theta: Theta, z_path, u_path, ubar_path) -> float:
    z, u, ub = _paths(z_path, u_path, ubar_path)
    chol = theta.chol
    return log_ratios_from(gauss_logpdf(z, u, chol), gauss_logpdf(z, ub, chol))[0]


def log_R2(theta: Theta, z_path, u_path, ubar_path) -> float:
    z, u, ub = _paths(z_path, u_path, ubar_path)
    chol = theta.chol
    return log_ratios_from(gauss_logpdf(z, u, chol), gauss_logpdf(z, ub, chol))[1]


# priors ---------------------------------------------------------------------

@dataclass(frozen=True)
class GammaPrior:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"Gamma prior needs shape, scale > 0, got {self}")

    def logpdf(self, x: float) -> float:
        if not x > 0:
            return -np.inf
        k, s = self.shape, self.scale
        return float((k - 1) * np.log(x) - x / s - gammaln(k) - k * np.log(s))

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.gamma(self.shape, self.scale))


@dataclass(frozen=True)
class InverseWishartPrior:
    psi: np.ndarray = field(default_factory=lambda: np.eye(2))
    nu: float = 3.0

    def __post_init__(self):
        psi = np.array(self.psi, dtype=float)
        cholesky(psi)
        p = psi.shape[0]
        if not self.nu > p - 1:
            raise ValueError(f"inverse Wishart needs nu > p - 1, got nu={self.nu}, p={p}")
        object.__setattr__(self, "psi", psi)

    def logpdf(self, cov) -> float:
        cov = np.asarray(cov, dtype=float)
        try:
            chol = cholesky(cov)
        except NotPositiveDefinite:
            return -np.inf
        p, nu = cov.shape[0], self.nu
        logdet_cov = 2.0 * np.log(np.diag(chol)).sum()
        _, logdet_psi = np.linalg.slogdet(self.psi)
        cinv = np.linalg.solve(chol, np.eye(p))
        trace = np.trace(cinv.T @ cinv @ self.psi)
        return float(0.5 * nu * logdet_psi - 0.5 * nu * p * np.log(2.0)
                     - multigammaln(0.5 * nu, p)
                     - 0.5 * (nu + p + 1) * logdet_cov - 0.5 * trace)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        # Sigma = (W)^-1 with W ~ Wishart(nu, psi^-1), via the Bartlett decomposition
        p = self.psi.shape[0]
        lower = np.linalg.cholesky(np.linalg.inv(self.psi))
        a = np.zeros((p, p))
        for i in range(p):
            a[i, i] = np.sqrt(rng.chisquare(self.nu - i))
            a[i, :i] = rng.standard_normal(i)
        la = lower @ a
        cov = np.linalg.inv(la @ la.T)
        return 0.5 * (cov + cov.T)


@dataclass(frozen=True)
class PriorSpec:
    """Priors over the free subset of ``{b, sigma, obs_cov}``.

    Parameters outside ``which_free`` are held at the values of the base
    ``Theta`` handed to the samplers and contribute nothing to the prior.
    """

    b_prior: GammaPrior = GammaPrior(1.0, 1.0)
    sigma_prior: GammaPrior = GammaPrior(1.0, 0.5)
    cov_prior: InverseWishartPrior = field(default_factory=InverseWishartPrior)
    which_free: frozenset = frozenset({"b", "sigma"})

    def __post_init__(self):
        free = frozenset(self.which_free)
        unknown = free - set(FREE_NAMES)
        if unknown:
            raise ValueError(f"unknown free parameters: {sorted(unknown)}")
        object.__setattr__(self, "which_free", free)

    @property
    def free(self) -> tuple[str, ...]:
        return tuple(n for n in FREE_NAMES if n in self.which_free)

    def sample(self, base: Theta, rng: np.random.Generator) -> Theta:
        theta = base
        if "b" in self.which_free:
            theta = theta.with_levy(b=self.b_prior.sample(rng))
        if "sigma" in self.which_free:
            theta = theta.with_levy(sigma=self.sigma_prior.sample(rng))
        if "obs_cov" in self.which_free:
            theta = theta.with_cov(self.cov_prior.sample(rng))
        return theta


def log_prior(theta: Theta, spec: PriorSpec) -> float:
    """Sum of log prior densities over the free parameters; ``-inf`` off support."""
    total = 0.0
    if "b" in spec.which_free:
        total += spec.b_prior.logpdf(theta.levy.b)
    if "sigma" in spec.which_free:
        total += spec.sigma_prior.logpdf(theta.levy.sigma)
    if "obs_cov" in spec.which_free:
        total += spec.cov_prior.logpdf(theta.obs_cov)
    return float(total)
