"""Multilevel estimation of posterior expectations across stick counts.

The finest-level expectation is written as the coarsest single-level one plus
a sum of consecutive-level differences. Each difference comes from one
coupled chain, reweighted by the self-normalised ratios ``R1`` (fine) and
``R2`` (coarse).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import PriorSpec, Theta
from .pmmh import (Chain, ProposalSpec, batch_means_se, run_coupled_pmmh, run_pmmh,
                   theta_values)
from .stick import DrawCounter, sb_sample_batch, sb_sample_coupled_batch

DEFAULT_LEVELS = (5, 10, 15, 20, 30)


class DegenerateWeights(ArithmeticError):
    pass


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Independent reproducible generator for a ``(seed, *keys)`` address."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


def parameter(name: str):
    """Test function returning one parameter of theta, ignoring the path."""
    def phi(theta, u):
        return theta_values(theta)[name]
    phi.__name__ = name
    return phi


@dataclass(frozen=True)
class LevelPlan:
    levels: tuple = DEFAULT_LEVELS
    samples: tuple = (1000,) * 5
    particles: tuple = (50,) * 5

    def __post_init__(self):
        levels = tuple(int(m) for m in self.levels)
        n = len(levels)
        samples = _per_level(self.samples, n, "samples")
        particles = _per_level(self.particles, n, "particles")
        if n == 0 or any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be nonempty and strictly increasing, got {levels}")
        if levels[0] < 0 or (n > 1 and levels[0] < 1):
            raise ValueError(f"stick counts must be >= 1 when coupled, got {levels}")
        if min(samples) < 1 or min(particles) < 1:
            raise ValueError("samples and particles must be >= 1 per level")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "particles", particles)

    def __len__(self):
        return len(self.levels)


def _per_level(value, n, name):
    if np.isscalar(value):
        return (int(value),) * n
    value = tuple(int(v) for v in value)
    if len(value) != n:
        raise ValueError(f"{name} has {len(value)} entries for {n} levels")
    return value


@dataclass(frozen=True)
class LevelEstimate:
    """Estimate from one chain.

    ``cost`` counts Lévy increment draws spent on the retained samples;
    ``std_error`` is a batch-means Monte Carlo standard error.
    """

    level: int
    value: float
    variance_proxy: float
    std_error: float
    n_samples: int
    cost: float
    wall_time: float = 0.0
    coarse_level: int | None = None
    particles: int | None = None

    @property
    def effective_variance(self) -> float:
        """Per-sample variance including autocorrelation, ``n * se^2``."""
        return self.n_samples * self.std_error ** 2

    @property
    def cost_per_sample(self) -> float:
        return self.cost / self.n_samples


def _records(chain):
    if isinstance(chain, Chain):
        return chain.kept, chain.draws_kept, chain.wall_time
    return list(chain), 0, 0.0


def _se(contrib: np.ndarray) -> float:
    n = len(contrib)
    if n < 4:
        return float(np.sqrt(contrib.var() / n)) if n > 1 else 0.0
    return batch_means_se(contrib)


def estimate_single_level(chain, phi, level: int | None = None) -> LevelEstimate:
    """Average of ``phi(theta, u)`` over a chain's retained records."""
    records, cost, wall = _records(chain)
    if not records:
        raise ValueError("cannot estimate from an empty chain")
    values = np.array([phi(r.theta, r.trajectory) for r in records], dtype=float)
    var = float(values.var(ddof=1)) if len(values) > 1 else 0.0
    return LevelEstimate(level=-1 if level is None else level, value=float(values.mean()),
                         variance_proxy=var, std_error=_se(values), n_samples=len(values),
                         cost=float(cost), wall_time=wall)


def estimate_increment(coupled_chain, phi, level: int | None = None,
                       coarse_level: int | None = None) -> LevelEstimate:
    """Fine-minus-coarse difference from a coupled chain.

    Returns ``sum(phi(u) R1)/sum(R1) - sum(phi(ubar) R2)/sum(R2)``; the
    variance proxy is that of the linearised per-record contributions.
    """
    records, cost, wall = _records(coupled_chain)
    if not records:
        raise ValueError("cannot estimate from an empty chain")
    name = f"level {level}" if level is not None else "coupled chain"
    r1 = np.exp([r.log_r1 for r in records])
    r2 = np.exp([r.log_r2 for r in records])
    for tag, r in (("R1", r1), ("R2", r2)):
        if not r.sum() > 0:
            raise DegenerateWeights(f"all {tag} weights underflow at {name}")
    f1 = np.array([phi(r.theta, r.trajectory[0]) for r in records], dtype=float)
    f2 = np.array([phi(r.theta, r.trajectory[1]) for r in records], dtype=float)
    a1 = np.dot(f1, r1) / r1.sum()
    a2 = np.dot(f2, r2) / r2.sum()
    contrib = r1 * (f1 - a1) / r1.mean() - r2 * (f2 - a2) / r2.mean()
    var = float(contrib.var(ddof=1)) if len(contrib) > 1 else 0.0
    return LevelEstimate(level=-1 if level is None else level, value=float(a1 - a2),
                         variance_proxy=var, std_error=_se(contrib),
                         n_samples=len(records), cost=float(cost), wall_time=wall,
                         coarse_level=coarse_level)


def run_levels(plan: LevelPlan, spec: PriorSpec, proposal: ProposalSpec, data, *,
               base: Theta, burn_in: int, seed: int, x0: float | None = None,
               theta0: Theta | None = None, resample_policy="ess",
               sampler=sb_sample_batch, coupled_sampler=sb_sample_coupled_batch,
               loglik=None, keys: tuple = ()) -> list:
    """One chain per plan level: single-level at the coarsest, coupled above.

    Level ``i`` runs on ``stream(seed, *keys, i)`` so results do not depend on
    the order in which levels are executed. Each chain keeps
    ``plan.samples[i]`` records after ``burn_in``.
    """
    chains = []
    for i, m in enumerate(plan.levels):
        rng = stream(seed, *keys, i)
        S = burn_in + plan.samples[i] - 1
        common = dict(base=base, theta0=theta0, resample_policy=resample_policy,
                      loglik=loglik, counter=DrawCounter())
        if i == 0:
            chain = run_pmmh(spec, proposal, data, m, plan.particles[i], max(S, 1), burn_in,
                             x0, rng, sampler=sampler, **common)
        else:
            chain = run_coupled_pmmh(spec, proposal, data, plan.levels[i - 1],
                                     plan.particles[i], max(S, 1), burn_in, x0, rng,
                                     m_fine=m, sampler=coupled_sampler, **common)
        chains.append(chain)
    return chains


def combine_levels(plan: LevelPlan, chains, phi):
    """Telescoping sum of per-level estimates; returns ``(value, report)``."""
    report = []
    for i, (m, chain) in enumerate(zip(plan.levels, chains)):
        if i == 0:
            est = estimate_single_level(chain, phi, level=m)
        else:
            est = estimate_increment(chain, phi, level=m, coarse_level=plan.levels[i - 1])
        report.append(replace(est, particles=plan.particles[i]))
    return float(sum(e.value for e in report)), report


def estimate_multilevel(plan: LevelPlan, phi, spec: PriorSpec, proposal: ProposalSpec, data,
                        **kwargs):
    """Coarse single-level estimate plus one increment per consecutive level pair.

    Keyword arguments are those of :func:`run_levels`.

    Returns
    -------
    value : float
    report : list of LevelEstimate
    """
    return combine_levels(plan, run_levels(plan, spec, proposal, data, **kwargs), phi)


def optimal_samples(variances, costs, epsilon: float) -> np.ndarray:
    """Real-valued sample sizes minimising cost subject to ``sum V/S = eps^2 / 2``."""
    v, c = np.asarray(variances, float), np.asarray(costs, float)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if np.any(v <= 0) or np.any(c <= 0):
        raise ValueError("pilot variances and costs must be > 0")
    return 2.0 / epsilon ** 2 * np.sqrt(v / c) * np.sum(np.sqrt(v * c))


def allocate_samples(pilot_reports, epsilon: float, n_levels: int | None = None,
                     min_samples: int = 100) -> LevelPlan:
    """Turn pilot estimates into a level plan for target RMSE ``epsilon``.

    Without ``n_levels`` the plan stops at the first level whose increment
    magnitude is at most ``epsilon / sqrt(2)``, the bias budget.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    reports = list(pilot_reports)
    if n_levels is None:
        n_levels = len(reports)
        for i in range(1, len(reports)):
            if abs(reports[i].value) <= epsilon / math.sqrt(2.0):
                n_levels = i + 1
                break
    reports = reports[:n_levels]
    s = optimal_samples([r.effective_variance for r in reports],
                        [r.cost_per_sample for r in reports], epsilon)
    samples = tuple(max(min_samples, int(math.ceil(x))) for x in s)
    return LevelPlan(levels=tuple(r.level for r in reports), samples=samples,
                     particles=tuple(r.particles or 1 for r in reports))
