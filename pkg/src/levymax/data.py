"""Synthetic datasets and CSV ingestion of (return, maximum) pairs."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Observation, Theta, cholesky
from .stick import sb_sample_batch


class IngestionError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


@dataclass
class Dataset:
    observations: list
    x0: float = 0.0
    meta: dict = field(default_factory=dict)
    index: list | None = None

    def __post_init__(self):
        if not self.observations:
            raise ValueError("a dataset needs at least one observation")
        self.observations = [Observation(float(y), float(yb)) for y, yb in self.observations]
        if self.index is not None:
            if len(self.index) != len(self.observations):
                raise ValueError("index and observations differ in length")
            if any(b <= a for a, b in zip(self.index, self.index[1:])):
                raise ValueError("dataset index must be strictly increasing")

    def __len__(self):
        return len(self.observations)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.observations, dtype=float)


def generate_synthetic(theta: Theta, T: int, m_truth: int = 100, x0: float = 0.0,
                       rng: np.random.Generator | None = None):
    """Simulate ``T`` unit-time observations from the model.

    The latent chain is rolled with a fine stick-breaking approximation
    (``m_truth`` sticks per step) and each pair is perturbed by
    ``N(0, obs_cov)``.

    Returns
    -------
    Dataset
    latent : ndarray, shape (T, 2)
        The true ``(x_n, xbar_n)`` pairs.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    rng = rng if rng is not None else np.random.default_rng()
    steps = sb_sample_batch(theta.levy, 1.0, m_truth, T, rng)
    # seed the running sum with x0 so each x_n is exactly x_{n-1} + step
    path = np.cumsum(np.concatenate([[x0], steps[:, 0]]))
    x, start = path[1:], path[:-1]
    latent = np.column_stack([x, start + steps[:, 1]])
    noise = rng.standard_normal((T, 2)) @ cholesky(theta.obs_cov).T
    obs = latent + noise
    c = theta.obs_cov
    meta = {"source": "synthetic", "T": T, "m_truth": m_truth, "x0": x0,
            "b": theta.levy.b, "sigma": theta.levy.sigma, "alpha": theta.levy.alpha,
            "beta": theta.levy.beta, "kind": theta.levy.kind.value,
            "obs_cov": [[c[0, 0], c[0, 1]], [c[1, 0], c[1, 1]]]}
    return Dataset(observations=[tuple(o) for o in obs], x0=x0, meta=meta,
                   index=list(range(1, T + 1))), latent


def _number(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except (TypeError, ValueError):
        raise IngestionError(f"non-numeric {column} value {cell!r}", row) from None
    if not math.isfinite(value):
        raise IngestionError(f"non-finite {column} value {cell!r}", row)
    return value


def _key(cell: str, row: int, column: str):
    if column == "n":
        try:
            return int(cell)
        except ValueError:
            raise IngestionError(f"non-integer index {cell!r}", row) from None
    try:
        return dt.date.fromisoformat(cell.strip())
    except (AttributeError, ValueError):
        raise IngestionError(f"date {cell!r} is not ISO-8601", row) from None


def _read_rows(path, needed):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in needed if c not in header]
        if missing:
            raise IngestionError(f"missing column(s) {missing} in header {header}", 1)
        # data rows start at line 2
        return [(i, row) for i, row in enumerate(reader, start=2)]


def _increasing(keys, rows):
    for k in range(1, len(keys)):
        if keys[k] <= keys[k - 1]:
            raise IngestionError(f"index {keys[k]} does not increase after {keys[k - 1]}",
                                 rows[k][0])


def ingest_csv(path, schema: dict | None = None, mode: str = "pairs_given",
               x0: float = 0.0) -> Dataset:
    """Read observations from CSV.

    Parameters
    ----------
    path : path-like
    schema : dict, optional
        Maps roles to column names. Roles are ``index``, ``y``, ``ybar`` for
        ``pairs_given`` and ``date``, ``price`` for ``build_from_prices``.
        The pairs index column may be ``date`` (ISO-8601) or ``n`` (integer).
    mode : {"pairs_given", "build_from_prices"}
        ``build_from_prices`` turns dated prices into weekly pairs: ``y`` is the
        cumulative log-return since the first price at the last quote of the
        ISO week and ``ybar`` its maximum over that week's quotes.
    """
    path = Path(path)
    if mode == "pairs_given":
        cols = {"y": "y", "ybar": "ybar", **(schema or {})}
        if "index" not in cols:
            with open(path, newline="") as fh:
                header = next(csv.reader(fh), [])
            cols["index"] = "n" if "n" in header and "date" not in header else "date"
        rows = _read_rows(path, [cols["index"], cols["y"], cols["ybar"]])
        if not rows:
            raise IngestionError("file has no data rows")
        kind = "n" if cols["index"] == "n" else "date"
        keys = [_key(r[cols["index"]], i, kind) for i, r in rows]
        _increasing(keys, rows)
        obs = [(_number(r[cols["y"]], i, "y"), _number(r[cols["ybar"]], i, "ybar"))
               for i, r in rows]
        meta = {"source": str(path), "mode": mode,
                "first": str(keys[0]), "last": str(keys[-1]),
                "ybar_below_y": sum(yb < y for y, yb in obs)}
        return Dataset(observations=obs, x0=x0, meta=meta, index=keys)
    if mode == "build_from_prices":
        cols = {"date": "date", "price": "price", **(schema or {})}
        rows = _read_rows(path, [cols["date"], cols["price"]])
        if not rows:
            raise IngestionError("file has no data rows")
        dates = [_key(r[cols["date"]], i, "date") for i, r in rows]
        _increasing(dates, rows)
        prices = [_number(r[cols["price"]], i, "price") for i, r in rows]
        for (i, _), p in zip(rows, prices):
            if p <= 0:
                raise IngestionError(f"price must be positive, got {p}", i)
        return weekly_pairs(dates, prices, x0=x0, source=str(path))
    raise ValueError(f"unknown ingestion mode {mode!r}")


def weekly_pairs(dates, prices, x0: float = 0.0, source: str = "") -> Dataset:
    """Aggregate dated prices into weekly (close, running max) log-return pairs."""
    log_p = np.log(np.asarray(prices, dtype=float))
    cum = log_p - log_p[0]
    weeks, obs = [], []
    for d, c in zip(dates, cum):
        week = tuple(d.isocalendar())[:2]
        if weeks and weeks[-1] == week:
            y, yb = obs[-1]
            obs[-1] = (c, max(yb, c))
        else:
            weeks.append(week)
            obs.append((c, c))
    meta = {"source": source, "mode": "build_from_prices", "first": str(dates[0]),
            "last": str(dates[-1]), "ybar_below_y": 0}
    return Dataset(observations=obs, x0=x0, meta=meta,
                   index=[f"{y}-W{w:02d}" for y, w in weeks])


def write_csv(dataset: Dataset, path) -> Path:
    """Write ``n,y,ybar`` rows with 17 significant digits."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "y", "ybar"])
        for n, (y, yb) in enumerate(dataset.observations, start=1):
            w.writerow([n, f"{y:.17g}", f"{yb:.17g}"])
    return path
