"""Particle marginal Metropolis-Hastings on the single-level and coupled targets.

Free parameters are moved on an unconstrained scale: ``log b``, ``log sigma``
and the log-Cholesky coordinates ``(log L11, L21, log L22)`` of ``obs_cov``.
The Jacobian of that map enters the acceptance ratio, so the chain targets the
posterior in the original parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .filters import FilterDegeneracy, coupled_log_ratios, run_delta_pf, run_pf
from .model import PriorSpec, Theta, log_prior, obs_array
from .stick import DrawCounter, sb_sample_batch, sb_sample_coupled_batch

COORDS = {"b": 1, "sigma": 1, "obs_cov": 3}
THETA_FIELDS = ("b", "sigma", "cov11", "cov12", "cov22")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChainRecord:
    """One state of the chain.

    ``trajectory`` is a ``(T, 2)`` array for single-level chains and a pair
    ``(u, ubar)`` of such arrays for coupled chains, which also carry the
    log importance ratios ``log_r1`` and ``log_r2``.
    """

    theta: Theta
    trajectory: object
    log_ml: float
    accepted: bool
    log_r1: float | None = None
    log_r2: float | None = None


@dataclass
class Chain:
    records: list
    burn_in: int
    draws_total: int = 0
    draws_kept: int = 0
    wall_time: float = 0.0

    @property
    def kept(self) -> list:
        return self.records[self.burn_in:]

    @property
    def acceptance_rate(self) -> float:
        flags = [r.accepted for r in self.records[1:]]
        return float(np.mean(flags)) if flags else float("nan")

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __iter__(self):
        return iter(self.records)


@dataclass(frozen=True)
class ProposalSpec:
    """Gaussian random walk on the unconstrained scale, or an independent
    draw from the prior (``kind="prior"``)."""

    step_sizes: dict = field(default_factory=lambda: {"b": 0.1, "sigma": 0.1, "obs_cov": 0.1})
    kind: str = "random_walk"

    def __post_init__(self):
        if self.kind not in ("random_walk", "prior"):
            raise ValueError(f"unknown proposal kind {self.kind!r}")
        for name, step in self.step_sizes.items():
            if not np.all(np.asarray(step) > 0):
                raise ValueError(f"step size for {name} must be > 0, got {step!r}")

    def steps(self, free) -> np.ndarray:
        out = []
        for name in free:
            step = np.broadcast_to(np.asarray(self.step_sizes.get(name, 0.1), float),
                                   (COORDS[name],))
            out.extend(step)
        return np.array(out)


# parameter transforms -------------------------------------------------------

def to_unconstrained(theta: Theta, free) -> np.ndarray:
    eta = []
    for name in free:
        if name == "b":
            eta.append(np.log(theta.levy.b))
        elif name == "sigma":
            eta.append(np.log(theta.levy.sigma))
        else:
            L = np.linalg.cholesky(theta.obs_cov)
            eta.extend([np.log(L[0, 0]), L[1, 0], np.log(L[1, 1])])
    return np.array(eta, dtype=float)


def from_unconstrained(eta, base: Theta, free) -> Theta:
    theta, i, levy = base, 0, {}
    for name in free:
        if name in ("b", "sigma"):
            levy[name] = float(np.exp(eta[i]))
            i += 1
        else:
            L = np.array([[np.exp(eta[i]), 0.0], [eta[i + 1], np.exp(eta[i + 2])]])
            theta = theta.with_cov(L @ L.T)
            i += 3
    return theta.with_levy(**levy) if levy else theta


def log_jacobian(eta, free) -> float:
    """``log |d theta / d eta|`` for the map used by :func:`from_unconstrained`."""
    total, i = 0.0, 0
    for name in free:
        if name in ("b", "sigma"):
            total += eta[i]
            i += 1
        else:
            # (S11, S12, S22) from (a, c, d): triangular, det = 2e^{2a} * e^a * 2e^{2d}
            total += np.log(4.0) + 3.0 * eta[i] + 2.0 * eta[i + 2]
            i += 3
    return float(total)


def theta_values(theta: Theta) -> dict:
    c = theta.obs_cov
    return {"b": theta.levy.b, "sigma": theta.levy.sigma,
            "cov11": c[0, 0], "cov12": c[0, 1], "cov22": c[1, 1]}


# samplers -------------------------------------------------------------------

def _run_chain(target, spec: PriorSpec, proposal: ProposalSpec, base: Theta, S: int,
               burn_in: int, rng, theta0, counter: DrawCounter, max_init: int = 100) -> Chain:
    if S < 1:
        raise ValueError(f"chain length S must be >= 1, got {S}")
    if not 0 <= burn_in < S:
        raise ValueError(f"burn_in must lie in [0, S), got {burn_in} with S={S}")
    start = time.perf_counter()
    free = spec.free
    random_walk = proposal.kind == "random_walk"
    steps = proposal.steps(free)

    def log_density(theta, eta):
        lp = log_prior(theta, spec)
        return lp + log_jacobian(eta, free) if random_walk else 0.0

    for _ in range(max_init):
        theta = theta0 if theta0 is not None else spec.sample(base, rng)
        if not np.isfinite(log_prior(theta, spec)):
            if theta0 is not None:
                raise ConfigError("initial theta lies outside the prior support")
            continue
        try:
            traj, ll, ratios = target(theta)
            break
        except FilterDegeneracy:
            if theta0 is not None:
                raise ConfigError("particle filter degenerate at the initial theta")
    else:
        raise ConfigError(f"no valid initial state from the prior in {max_init} draws")

    eta = to_unconstrained(theta, free)
    current = log_density(theta, eta)
    record = ChainRecord(theta, traj, ll, True, *ratios)
    records = [record]
    draws_at_burn_in = 0
    for k in range(1, S + 1):
        if k == burn_in:
            draws_at_burn_in = counter.draws
        if random_walk:
            eta_new = eta + steps * rng.standard_normal(len(eta))
            try:
                theta_new = from_unconstrained(eta_new, base, free)
                proposed = log_density(theta_new, eta_new)
            except ValueError:
                proposed = -np.inf
        else:
            theta_new = spec.sample(base, rng)
            eta_new = to_unconstrained(theta_new, free)
            proposed = 0.0
        accepted = False
        if np.isfinite(proposed):
            try:
                traj_new, ll_new, ratios_new = target(theta_new)
            except FilterDegeneracy:
                pass
            else:
                log_a = ll_new + proposed - record.log_ml - current
                if np.log(rng.random()) < log_a:
                    accepted = True
                    eta, current = eta_new, proposed
                    record = ChainRecord(theta_new, traj_new, ll_new, True, *ratios_new)
        if not accepted:
            record = ChainRecord(record.theta, record.trajectory, record.log_ml, False,
                                 record.log_r1, record.log_r2)
        records.append(record)
    return Chain(records=records, burn_in=burn_in, draws_total=counter.draws,
                 draws_kept=counter.draws - draws_at_burn_in,
                 wall_time=time.perf_counter() - start)


def run_pmmh(spec: PriorSpec, proposal: ProposalSpec, data, m: int, N: int, S: int,
             burn_in: int, x0: float | None = None, rng: np.random.Generator | None = None, *,
             base: Theta, theta0: Theta | None = None, resample_policy="ess",
             sampler=sb_sample_batch, loglik=None, counter: DrawCounter | None = None) -> Chain:
    """PMMH targeting the ``m``-stick posterior.

    Parameters
    ----------
    spec, proposal : PriorSpec, ProposalSpec
    data : Dataset, sequence of Observation or (T, 2) array
    m, N : int
        Sticks per transition and particles per filter.
    S : int
        Number of MH iterations; ``S + 1`` records are returned.
    burn_in : int
        Leading records excluded from :attr:`Chain.kept`.
    base : Theta
        Supplies every parameter not listed in ``spec.which_free``.
    theta0 : Theta, optional
        Fixed starting point; drawn from the prior when omitted.

    Returns
    -------
    Chain
    """
    z = obs_array(data)
    x0 = getattr(data, "x0", 0.0) if x0 is None else x0
    rng = rng if rng is not None else np.random.default_rng()
    counter = counter if counter is not None else DrawCounter()

    def target(theta):
        traj, ll = run_pf(theta, z, m, N, x0, resample_policy, rng,
                          sampler=sampler, loglik=loglik, counter=counter)
        return traj, ll, ()

    return _run_chain(target, spec, proposal, base, S, burn_in, rng, theta0, counter)


def run_coupled_pmmh(spec: PriorSpec, proposal: ProposalSpec, data, m: int, N: int, S: int,
                     burn_in: int, x0: float | None = None,
                     rng: np.random.Generator | None = None, *, base: Theta,
                     m_fine: int | None = None, theta0: Theta | None = None,
                     resample_policy="ess", sampler=sb_sample_coupled_batch, loglik=None,
                     counter: DrawCounter | None = None) -> Chain:
    """PMMH on the coupled ``(m_fine, m)`` target driven by the delta filter.

    Records carry ``(u, ubar)`` trajectories and their ``log_r1``/``log_r2``.
    """
    z = obs_array(data)
    x0 = getattr(data, "x0", 0.0) if x0 is None else x0
    rng = rng if rng is not None else np.random.default_rng()
    counter = counter if counter is not None else DrawCounter()

    def target(theta):
        (u, ubar), ll = run_delta_pf(theta, z, m, N, x0, resample_policy, rng, m_fine=m_fine,
                                     sampler=sampler, loglik=loglik, counter=counter)
        return (u, ubar), ll, coupled_log_ratios(theta, z, u, ubar, loglik)

    return _run_chain(target, spec, proposal, base, S, burn_in, rng, theta0, counter)


# diagnostics ----------------------------------------------------------------

def trace(records, name: str) -> np.ndarray:
    """Series of one parameter (``b``, ``sigma``, ``cov11``, ``cov12``, ``cov22``)."""
    if name not in THETA_FIELDS:
        raise KeyError(f"unknown parameter {name!r}; expected one of {THETA_FIELDS}")
    return np.array([theta_values(r.theta)[name] for r in records])


def acf(x, max_lag: int | None = None) -> np.ndarray:
    """Sample autocorrelation at lags ``0..max_lag``.

    A constant series has no defined correlation; lags >= 1 are then 0.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    max_lag = min(n - 1, 200 if max_lag is None else max_lag)
    d = x - x.mean()
    var = np.dot(d, d)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if var == 0:
        return out
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    cov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    out[1:] = cov[1:] / var
    return out


def integrated_autocorr_time(x, c: float = 5.0) -> float:
    """Sokal's self-consistent window estimate of the integrated autocorrelation time."""
    x = np.asarray(x, dtype=float)
    rho = acf(x, len(x) - 1)
    taus = 2.0 * np.cumsum(rho) - 1.0
    window = np.arange(len(taus)) >= c * taus
    k = int(np.argmax(window)) if window.any() else len(taus) - 1
    return float(max(taus[k], 1.0))


def effective_sample_size(x) -> float:
    return len(x) / integrated_autocorr_time(x)


def batch_means_se(x, n_batches: int | None = None) -> float:
    """Monte Carlo standard error of the mean of a correlated series."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n_batches is None:
        n_batches = max(2, int(np.sqrt(n)))
    size = n // n_batches
    if size < 1:
        raise ValueError(f"series of length {n} is too short for {n_batches} batches")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))
