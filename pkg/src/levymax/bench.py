"""Experiment orchestration: repeat loops, cost-vs-MSE curves, rate fits and
diagnostics export.

Every tabular output is CSV with 17 significant digits. Wall-clock timings are
kept out of the CSV files and only reported in the JSON manifest, so reruns
with the same configuration and seed produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .data import Dataset, generate_synthetic, ingest_csv, write_csv
from .filters import FilterDegeneracy
from .levy import LevyParams, Subordinator
from .mlmc import (DEFAULT_LEVELS, DegenerateWeights, LevelPlan, allocate_samples,
                   combine_levels, estimate_single_level, parameter, run_levels, stream)
from .model import GammaPrior, InverseWishartPrior, NotPositiveDefinite, PriorSpec, Theta
from .pmmh import (THETA_FIELDS, Chain, ConfigError, ProposalSpec, acf,
                   integrated_autocorr_time, run_pmmh, theta_values)
from .stick import DrawCounter

OUTPUT_ENV = "LEVYMAX_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_FAILURES = 0, 2, 3
FAILURE_LIMIT = 0.10
MODELS = {"BMG": Subordinator.GAMMA, "BMIG": Subordinator.INVERSE_GAMMA}
DEFAULT_FREE = {"BMG": ("b", "sigma"), "BMIG": ("obs_cov",)}

# stream addresses under the master seed
DATA_KEY, REFERENCE_KEY, REPEAT_KEY, PILOT_KEY, RATES_KEY = range(5)


class RunFailure(RuntimeError):
    """Too many repeats failed; the bundle is still written."""


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# configuration ----------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Everything needed to rerun an experiment from scratch.

    Tuple-valued fields accept comma-separated strings. ``obs_cov`` and
    ``iw_psi`` are ``(S11, S12, S22)``. An empty ``which_free`` selects the
    model default (``b, sigma`` for BMG and ``obs_cov`` for BMIG); an empty
    ``dataset`` means synthetic data from the configured parameters.
    """

    model: str = "BMG"
    b: float = 1.0
    sigma: float = 0.5
    alpha: float = 1.5
    beta: float = 2.0
    obs_cov: tuple = (1.0, 0.0, 1.0)
    which_free: tuple = ()
    b_prior: tuple = (1.0, 1.0)
    sigma_prior: tuple = (1.0, 0.5)
    iw_psi: tuple = (1.0, 0.0, 1.0)
    iw_nu: float = 3.0
    proposal: str = "random_walk"
    step_b: float = 0.15
    step_sigma: float = 0.15
    step_cov: float = 0.1
    estimator: str = "single"
    level: int = 30
    levels: tuple = DEFAULT_LEVELS
    samples: tuple = (1000,)
    T: int = 50
    N: int = 50
    repeats: int = 20
    burn_in: int = 1000
    seed: int = 0
    dataset: str = ""
    dataset_mode: str = "pairs_given"
    m_truth: int = 100
    x0: float = 0.0
    params: tuple = ("b", "sigma")
    start: str = "truth"
    resample: str = "ess"
    reference: str = "long"
    reference_factor: int = 10
    epsilon0: float = 0.0
    pilot_samples: int = 2000
    min_samples: int = 100
    output: str = ""

    def __post_init__(self):
        for f in dataclasses.fields(self):
            setattr(self, f.name, _coerce(f, getattr(self, f.name)))
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.model in MODELS, f"model must be one of {sorted(MODELS)}, got {self.model!r}")
        need(self.estimator in ("single", "multilevel"),
             f"estimator must be 'single' or 'multilevel', got {self.estimator!r}")
        need(self.repeats >= 1, f"repeats must be >= 1, got {self.repeats}")
        need(self.T >= 1 and self.N >= 1, "T and N must be >= 1")
        need(self.burn_in >= 0, f"burn_in must be >= 0, got {self.burn_in}")
        need(self.level >= 0, f"level must be >= 0, got {self.level}")
        need(min(self.samples) >= 1, "samples must be >= 1")
        need(len(self.obs_cov) == 3 and len(self.iw_psi) == 3,
             "obs_cov and iw_psi take three entries (S11, S12, S22)")
        need(self.start in ("truth", "prior"), f"start must be 'truth' or 'prior'")
        need(self.reference_factor >= 1, "reference_factor must be >= 1")
        need(self.min_samples >= 1 and self.pilot_samples >= 2, "sample floors must be positive")
        unknown = set(self.params) - set(THETA_FIELDS)
        need(not unknown, f"unknown params {sorted(unknown)}; choose from {THETA_FIELDS}")
        if self.dataset:
            need(Path(self.dataset).is_file(), f"dataset {self.dataset!r} does not exist")
        try:
            self.plan()
            self.theta()
            self.prior_spec()
            self.proposal_spec()
            self.reference_values()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    # derived objects
    def theta(self) -> Theta:
        s11, s12, s22 = self.obs_cov
        levy = LevyParams(self.b, self.sigma, self.alpha, self.beta, MODELS[self.model])
        theta = Theta(levy, [[s11, s12], [s12, s22]])
        theta.chol  # validates positive definiteness
        return theta

    def prior_spec(self) -> PriorSpec:
        p11, p12, p22 = self.iw_psi
        return PriorSpec(b_prior=GammaPrior(*self.b_prior),
                         sigma_prior=GammaPrior(*self.sigma_prior),
                         cov_prior=InverseWishartPrior([[p11, p12], [p12, p22]], self.iw_nu),
                         which_free=frozenset(self.which_free or DEFAULT_FREE[self.model]))

    def proposal_spec(self) -> ProposalSpec:
        return ProposalSpec({"b": self.step_b, "sigma": self.step_sigma,
                             "obs_cov": self.step_cov}, kind=self.proposal)

    def plan(self, samples=None) -> LevelPlan:
        samples = self.samples if samples is None else samples
        if self.estimator == "single":
            return LevelPlan((self.level,), samples[:1], (self.N,))
        return LevelPlan(self.levels, samples if len(samples) > 1 else samples[0], self.N)

    def reference_values(self) -> dict | None:
        """Explicit ``name=value`` references, or None for ``long``/``truth``."""
        if self.reference in ("long", "truth"):
            return None
        out = {}
        for item in self.reference.split(","):
            name, _, value = item.partition("=")
            if name.strip() not in THETA_FIELDS or not value:
                raise ConfigError(f"reference must be 'long', 'truth' or 'name=value,...', "
                                  f"got {self.reference!r}")
            out[name.strip()] = float(value)
        return out

    def output_dir(self) -> Path:
        return Path(self.output or os.environ.get(OUTPUT_ENV, "levymax-output"))

    def echo(self) -> dict:
        return {f.name: _jsonable(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls(**{**load_config_file(path), **overrides})

    @classmethod
    def full_scale(cls, **overrides) -> "ExperimentConfig":
        """Full-size simulation settings: T=200, burn-in 10000, 50 repeats."""
        return cls(**{**dict(T=200, burn_in=10000, repeats=50), **overrides})


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _coerce(f: dataclasses.Field, value):
    default = f.default
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [v for v in (s.strip() for s in value.split(",")) if v]
            value = list(np.atleast_1d(value)) if not isinstance(value, (list, tuple)) else value
            if f.name in ("which_free", "params"):
                return tuple(str(v) for v in value)
            if f.name in ("levels", "samples"):
                return tuple(int(v) for v in value)
            return tuple(float(v) for v in value)
        if isinstance(default, bool):
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {f.name}: {value!r} ({exc})") from None


def load_config_file(path) -> dict:
    """Read a TOML key-value file; keys may use dashes or underscores."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    names = {f.name for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in names:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        out[name] = value
    return out


# shared pieces ------------------------------------------------------------------

def load_data(config: ExperimentConfig) -> tuple[Dataset, np.ndarray | None]:
    if config.dataset:
        return ingest_csv(config.dataset, mode=config.dataset_mode, x0=config.x0), None
    return generate_synthetic(config.theta(), config.T, config.m_truth, config.x0,
                              stream(config.seed, DATA_KEY))


def _start(config: ExperimentConfig):
    return config.theta() if config.start == "truth" else None


def _chain_kwargs(config: ExperimentConfig) -> dict:
    return dict(base=config.theta(), theta0=_start(config), resample_policy=config.resample)


def reference_chain(config: ExperimentConfig, data, samples: int) -> Chain:
    """Long single-level chain at the finest configured level."""
    finest = config.levels[-1] if config.estimator == "multilevel" else config.level
    S = config.burn_in + samples - 1
    return run_pmmh(config.prior_spec(), config.proposal_spec(), data, finest, config.N,
                    max(S, 1), config.burn_in, rng=stream(config.seed, REFERENCE_KEY),
                    **_chain_kwargs(config))


def compute_reference(config: ExperimentConfig, data, samples: int):
    """Reference values per parameter plus the chain used (if any)."""
    explicit = config.reference_values()
    if explicit is not None:
        missing = set(config.params) - set(explicit)
        if missing:
            raise ConfigError(f"no reference value given for {sorted(missing)}")
        return explicit, None
    if config.reference == "truth":
        values = theta_values(config.theta())
        return {p: float(values[p]) for p in config.params}, None
    chain = reference_chain(config, data, config.reference_factor * samples)
    return {p: estimate_single_level(chain, parameter(p)).value for p in config.params}, chain


RUN_ERRORS = (FilterDegeneracy, DegenerateWeights, ConfigError, NotPositiveDefinite,
              FloatingPointError, ValueError)


def run_estimator(config: ExperimentConfig, data, plan: LevelPlan, keys: tuple):
    """Run the plan once; returns ``({param: value}, {param: report}, chains)``."""
    chains = run_levels(plan, config.prior_spec(), config.proposal_spec(), data,
                        burn_in=config.burn_in, seed=config.seed, keys=keys,
                        **_chain_kwargs(config))
    values, reports = {}, {}
    for p in config.params:
        values[p], reports[p] = combine_levels(plan, chains, parameter(p))
    return values, reports, chains


def _manifest(config: ExperimentConfig, kind: str, **extra) -> dict:
    return {"kind": kind, "config": config.echo(), "master_seed": config.seed,
            "streams": {"data": [config.seed, DATA_KEY],
                        "reference": [config.seed, REFERENCE_KEY],
                        "repeat": [config.seed, REPEAT_KEY, "<repeat>", "<level>"],
                        "pilot": [config.seed, PILOT_KEY, "<level>"],
                        "rates": [config.seed, RATES_KEY, "<epsilon>", "<repeat>", "<method>"]},
            "versions": {"levymax": __version__, "numpy": np.__version__,
                         "python": platform.python_version()},
            **extra}


def write_manifest(outdir: Path, manifest: dict) -> Path:
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return path


# run_experiment ---------------------------------------------------------------

@dataclass
class ExperimentResult:
    outdir: Path
    rows: list
    aggregate: list
    failures: int
    manifest: dict = field(repr=False, default_factory=dict)

    @property
    def exit_code(self) -> int:
        n = len({r[0] for r in self.rows})
        return EXIT_FAILURES if self.failures > FAILURE_LIMIT * n else EXIT_OK


def run_experiment(config: ExperimentConfig, outdir=None, raise_on_failure: bool = False
                   ) -> ExperimentResult:
    """Repeat the configured estimator and score it against a reference.

    Writes ``dataset.csv``, ``results.csv`` (one row per repeat and
    parameter), ``levels.csv`` (per-level reports), ``aggregate.csv`` (cost
    and MSE per parameter), ``chain.csv`` (the first repeat's coarsest
    chain) and ``manifest.json``. A failed repeat is recorded with status
    ``failed:<error>``; with more than 10% failures the result carries exit
    code 3 (or :class:`RunFailure` is raised when ``raise_on_failure``).
    """
    outdir = Path(outdir) if outdir is not None else config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    data, _ = load_data(config)
    write_csv(data, outdir / "dataset.csv")
    plan = config.plan()
    t0 = time.perf_counter()
    reference, ref_chain = compute_reference(config, data, max(plan.samples))
    ref_time = time.perf_counter() - t0

    rows, level_rows, walls, failures = [], [], [], 0
    for r in range(config.repeats):
        t0 = time.perf_counter()
        try:
            values, reports, chains = run_estimator(config, data, plan, (REPEAT_KEY, r))
        except RUN_ERRORS as exc:
            failures += 1
            walls.append(time.perf_counter() - t0)
            for p in config.params:
                rows.append((r, p, math.nan, reference[p], math.nan, math.nan, math.nan,
                             f"failed:{type(exc).__name__}"))
            continue
        walls.append(time.perf_counter() - t0)
        cost = sum(c.draws_kept for c in chains)
        total = sum(c.draws_total for c in chains)
        for p in config.params:
            err = values[p] - reference[p]
            rows.append((r, p, values[p], reference[p], err * err, cost, total, "ok"))
            for e in reports[p]:
                level_rows.append((r, p, e.level, -1 if e.coarse_level is None else e.coarse_level,
                                   e.n_samples, e.particles, e.value, e.variance_proxy,
                                   e.std_error, e.cost))
        if r == 0:
            write_chain_csv(chains[0], outdir / "chain.csv")

    aggregate = []
    for p in config.params:
        ok = [row for row in rows if row[1] == p and row[7] == "ok"]
        mse = float(np.mean([row[4] for row in ok])) if ok else math.nan
        cost = float(np.mean([row[5] for row in ok])) if ok else math.nan
        aggregate.append((config.estimator, p, len(ok), mse, cost))

    write_table(outdir / "results.csv", ["repeat", "param", "estimate", "reference",
                                         "sq_error", "cost", "draws_total", "status"], rows)
    write_table(outdir / "levels.csv", ["repeat", "param", "level", "coarse_level", "samples",
                                        "particles", "value", "variance_proxy", "std_error",
                                        "cost"], level_rows)
    write_table(outdir / "aggregate.csv", ["estimator", "param", "repeats_ok", "mse", "cost"],
                aggregate)
    result = ExperimentResult(outdir, rows, aggregate, failures)
    result.manifest = _manifest(
        config, "experiment", reference=reference,
        reference_draws=ref_chain.draws_kept if ref_chain else 0,
        failures=failures, exit_code=result.exit_code,
        timing={"total_seconds": time.perf_counter() - started,
                "reference_seconds": ref_time, "repeat_seconds": walls})
    write_manifest(outdir, result.manifest)
    if raise_on_failure and result.exit_code == EXIT_FAILURES:
        raise RunFailure(f"{failures} of {config.repeats} repeats failed")
    return result


# chain files and diagnostics ---------------------------------------------------

CHAIN_HEADER = ["iteration", *THETA_FIELDS, "log_ml", "accepted", "log_r1", "log_r2"]


def write_chain_csv(chain, path) -> Path:
    """One row per iteration: index, theta components, log_ml, accepted and, for
    coupled chains, the log importance ratios (empty otherwise)."""
    rows = []
    for k, r in enumerate(chain):
        v = theta_values(r.theta)
        rows.append((k, *(v[n] for n in THETA_FIELDS), r.log_ml, r.accepted,
                     "" if r.log_r1 is None else r.log_r1,
                     "" if r.log_r2 is None else r.log_r2))
    return write_table(path, CHAIN_HEADER, rows)


def read_chain_csv(path) -> dict:
    """Columns of a chain file as float arrays keyed by header name."""
    rows = read_table(path)
    if not rows:
        raise ConfigError(f"chain file {path} has no rows")
    return {name: np.array([float(r[name]) if r[name] != "" else math.nan for r in rows])
            for name in CHAIN_HEADER}


def _series(source, name) -> np.ndarray:
    if isinstance(source, dict):
        return np.asarray(source[name], dtype=float)
    return np.array([theta_values(r.theta)[name] for r in source], dtype=float)


def export_diagnostics(source, outdir, params=("b", "sigma"), bins: int = 50,
                       max_lag: int = 100, burn_in: int = 0) -> dict:
    """Write trace, histogram and autocorrelation files for each parameter.

    ``source`` is a sequence of chain records or a mapping of name to series
    (as returned by :func:`read_chain_csv`). Files are ``trace_<p>.csv``
    (iteration, value), ``hist_<p>.csv`` (left, right, count) and
    ``acf_<p>.csv`` (lag, acf); ``diagnostics.json`` summarises each series
    and flags zero-variance ones, whose ACF beyond lag 0 is written as 0.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for p in params:
        x = _series(source, p)[burn_in:]
        if len(x) == 0:
            raise ValueError("cannot export diagnostics of an empty chain")
        write_table(outdir / f"trace_{p}.csv", ["iteration", "value"],
                    zip(range(burn_in, burn_in + len(x)), x))
        degenerate = bool(np.ptp(x) == 0)
        if degenerate:
            edges = np.array([x[0] - 0.5, x[0] + 0.5])
            counts = np.array([len(x)])
        else:
            counts, edges = np.histogram(x, bins=bins)
        write_table(outdir / f"hist_{p}.csv", ["left", "right", "count"],
                    zip(edges[:-1], edges[1:], counts))
        rho = acf(x, max_lag)
        write_table(outdir / f"acf_{p}.csv", ["lag", "acf"], enumerate(rho))
        summary[p] = {"n": len(x), "mean": float(x.mean()), "sd": float(x.std(ddof=1))
                      if len(x) > 1 else 0.0,
                      "q025": float(np.quantile(x, 0.025)), "q975": float(np.quantile(x, 0.975)),
                      "iact": float(integrated_autocorr_time(x)) if len(x) > 1 else 1.0,
                      "degenerate_variance": degenerate}
    (outdir / "diagnostics.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# rates ------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    response: str = "mse"


def fit_rate(points, response: str = "mse") -> RateFit:
    """Least-squares line through ``(log cost, log mse)`` points.

    ``response="mse"`` regresses log MSE on log cost; ``response="cost"``
    regresses log cost on log MSE, the orientation of published rate tables
    where -1 is the optimal Monte Carlo rate and slower methods are steeper.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError(f"need at least 3 (cost, mse) points, got {len(pts)}")
    if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
        raise ValueError("cost and mse must be positive and finite")
    log_cost, log_mse = np.log(pts[:, 0]), np.log(pts[:, 1])
    if response == "mse":
        x, y = log_cost, log_mse
    elif response == "cost":
        x, y = log_mse, log_cost
    else:
        raise ValueError(f"response must be 'mse' or 'cost', got {response!r}")
    spread = x - x.mean()
    if np.dot(spread, spread) <= 1e-24 * max(1.0, np.dot(x, x)):
        raise ValueError("regressor has no spread; the rate is undefined")
    slope = np.dot(spread, y - y.mean()) / np.dot(spread, spread)
    return RateFit(float(slope), float(y.mean() - slope * x.mean()), response)


@dataclass
class RatesResult:
    outdir: Path
    points: list
    fits: dict
    epsilons: list
    failures: int = 0
    runs: int = 0
    manifest: dict = field(repr=False, default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_FAILURES if self.failures > FAILURE_LIMIT * self.runs else EXIT_OK


@dataclass
class RatesPlan:
    """Pilot estimates and the per-target sample plans derived from them."""

    pilot: list
    pilot_chains: list
    epsilons: list
    plans: dict
    seconds: float = 0.0

    def predicted_seconds(self, config: ExperimentConfig, methods=("single", "multilevel")
                          ) -> dict:
        """Wall time per method extrapolated from the pilot's time per iteration.

        Above the coarsest level the coupled pilot chain's timing stands in
        for a single-level chain at the finer level; ``reference`` is the
        long finest-level chain.
        """
        per_iter = [c.wall_time / len(c) for c in self.pilot_chains]
        out = {}
        for method in methods:
            total = 0.0
            for j in range(len(self.epsilons)):
                plan = self.plans[method, j]
                offset = j if method == "single" else 0
                for i, s in enumerate(plan.samples):
                    total += (s + config.burn_in) * per_iter[i + offset]
            out[method] = total * config.repeats
        finest = max(self.plans[m, len(self.epsilons) - 1].samples[0] for m in methods)
        out["reference"] = (config.reference_factor * finest + config.burn_in) * per_iter[-1]
        return out


def plan_rates(config: ExperimentConfig, data, target: str | None = None) -> RatesPlan:
    """Pilot every level and size the single-level and multilevel runs.

    Accuracy targets are ``eps_j = eps_0 / 2^j`` for ``j < len(levels)``.
    Target ``j`` pairs the single-level estimator at ``levels[j]`` with the
    multilevel one over ``levels[:j + 1]``; sample sizes make the variance
    ``eps_j^2 / 2``. ``eps_0`` defaults to the value giving the coarse
    single-level run ``samples[0]`` draws.
    """
    target = target or config.params[0]
    levels = config.levels
    t0 = time.perf_counter()
    pilot_plan = LevelPlan(levels, config.pilot_samples, config.N)
    chains = run_levels(pilot_plan, config.prior_spec(), config.proposal_spec(), data,
                        burn_in=config.burn_in, seed=config.seed, keys=(PILOT_KEY,),
                        **_chain_kwargs(config))
    _, pilot = combine_levels(pilot_plan, chains, parameter(target))
    v_single = pilot[0].effective_variance
    eps0 = config.epsilon0 or math.sqrt(2.0 * v_single / config.samples[0])
    epsilons = [eps0 / 2 ** j for j in range(len(levels))]
    plans = {}
    for j, eps in enumerate(epsilons):
        plans["single", j] = LevelPlan((levels[j],),
                                       max(config.min_samples,
                                           math.ceil(2.0 * v_single / eps ** 2)), config.N)
        plans["multilevel", j] = allocate_samples(pilot, eps, n_levels=j + 1,
                                                  min_samples=config.min_samples)
    return RatesPlan(pilot, chains, epsilons, plans, time.perf_counter() - t0)


def run_rates(config: ExperimentConfig, outdir=None, target: str | None = None,
              methods=("single", "multilevel")) -> RatesResult:
    """Cost-versus-MSE curves for single-level and multilevel estimation.

    A pilot run (``pilot_samples`` per level) gives each level's effective
    variance and cost per sample for the ``target`` parameter (default the
    first of ``params``); see :func:`plan_rates` for the accuracy targets.
    Costs count Lévy increment draws after burn-in.
    """
    outdir = Path(outdir) if outdir is not None else config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    target = target or config.params[0]
    data, _ = load_data(config)
    write_csv(data, outdir / "dataset.csv")
    levels = config.levels
    ml_config = dataclasses.replace(config, estimator="multilevel")
    sizing = plan_rates(config, data, target)
    pilot, epsilons, plans = sizing.pilot, sizing.epsilons, sizing.plans
    cost_single = [config.N * len(data) * (m + 1) for m in levels]

    t0 = time.perf_counter()
    finest = max(plans["single", len(levels) - 1].samples[0],
                 plans["multilevel", len(levels) - 1].samples[0])
    reference, ref_chain = compute_reference(ml_config, data, finest)
    ref_time = time.perf_counter() - t0

    rows, points, walls = [], [], {}
    for j, eps in enumerate(epsilons):
        for mi, method in enumerate(methods):
            plan = plans[method, j]
            errs, costs, times, failed = {p: [] for p in config.params}, [], [], 0
            for r in range(config.repeats):
                t0 = time.perf_counter()
                try:
                    values, _, chains = run_estimator(config, data, plan, (RATES_KEY, j, r, mi))
                except RUN_ERRORS as exc:
                    failed += 1
                    rows.append((method, j, eps, r, "", math.nan, math.nan,
                                 f"failed:{type(exc).__name__}"))
                    continue
                times.append(time.perf_counter() - t0)
                cost = sum(c.draws_kept for c in chains)
                costs.append(cost)
                for p in config.params:
                    errs[p].append((values[p] - reference[p]) ** 2)
                    rows.append((method, j, eps, r, p, values[p], cost, "ok"))
            walls[method, j] = times
            for p in config.params:
                if errs[p]:
                    points.append((method, j, eps, p, len(errs[p]), float(np.mean(costs)),
                                   float(np.mean(errs[p])), float(np.mean(times)),
                                   "+".join(map(str, plan.levels)),
                                   "+".join(map(str, plan.samples))))

    fits, wall_fits = {}, {}
    for method in methods:
        for p in config.params:
            pts = [(pt[5], pt[6]) for pt in points if pt[0] == method and pt[3] == p]
            wpts = [(pt[7], pt[6]) for pt in points if pt[0] == method and pt[3] == p]
            try:
                fits[method, p] = fit_rate(pts, response="cost")
                wall_fits[method, p] = fit_rate(wpts, response="cost")
            except ValueError:
                fits[method, p] = wall_fits[method, p] = RateFit(math.nan, math.nan, "cost")

    write_table(outdir / "pilot.csv", ["level", "coarse_level", "samples", "value",
                                       "effective_variance", "cost_per_sample"],
                [(e.level, -1 if e.coarse_level is None else e.coarse_level, e.n_samples,
                  e.value, e.effective_variance, e.cost_per_sample) for e in pilot])
    write_table(outdir / "repeats.csv", ["method", "index", "epsilon", "repeat", "param",
                                         "estimate", "cost", "status"], rows)
    write_table(outdir / "points.csv", ["method", "index", "epsilon", "param", "repeats_ok",
                                        "cost", "mse", "levels", "samples"],
                [pt[:7] + pt[8:] for pt in points])
    write_table(outdir / "rates.csv", ["method", "param", "slope", "intercept"],
                [(m, p, f.slope, f.intercept) for (m, p), f in fits.items()])
    n_failed = sum(1 for row in rows if row[7] != "ok")
    manifest = _manifest(
        config, "rates", target=target, reference=reference, epsilons=epsilons,
        single_cost_per_sample=cost_single, failures=n_failed,
        timing={"total_seconds": time.perf_counter() - started, "pilot_seconds": sizing.seconds,
                "reference_seconds": ref_time,
                "repeat_seconds": {f"{m}:{j}": t for (m, j), t in walls.items()},
                "wall_time_slopes": {f"{m}:{p}": f.slope for (m, p), f in wall_fits.items()}})
    write_manifest(outdir, manifest)
    runs = len(epsilons) * len(methods) * config.repeats
    return RatesResult(outdir, points, fits, epsilons, n_failed, runs, manifest)
