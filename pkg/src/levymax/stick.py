"""Stick-breaking samplers for (increment, running maximum, argmax time).

The horizon ``[0, t]`` is broken by ``L_0 = t, L_k = U_k L_{k-1}`` into sticks
``l_k = L_{k-1} - L_k`` and a remainder ``L_m``. Increments over the pieces are
independent draws of the Lévy law, so the triple is accumulated piecewise:
``(sum xi, sum max(xi, 0), sum l * 1{xi >= 0})``.

The batch functions are the workhorses; :func:`sb_sample` and
:func:`sb_sample_coupled` are single-draw conveniences over them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .levy import LevyParams, _increments


class ChiTriple(NamedTuple):
    x: float
    xbar: float
    tau: float


@dataclass(frozen=True)
class StickPartition:
    lengths: np.ndarray
    remainder: float

    @property
    def horizon(self) -> float:
        return float(self.lengths.sum() + self.remainder)


@dataclass
class DrawCounter:
    """Counts increment draws from the Lévy law, the unit of simulation cost."""

    draws: int = 0

    def add(self, n: int) -> None:
        self.draws += int(n)


def _shape(size) -> tuple:
    if size is None:
        return ()
    if np.isscalar(size):
        return (int(size),)
    return tuple(size)


def _break(t: float, m: int, shape: tuple, rng: np.random.Generator):
    """Stick lengths ``(*shape, m)`` and the running remainders ``L_1..L_m``."""
    u = rng.random((*shape, m))
    L = t * np.cumprod(u, axis=-1)
    prev = np.concatenate([np.full((*shape, 1), float(t)), L[..., :-1]], axis=-1)
    return prev - L, L


def _remainder(t: float, L: np.ndarray, k: int) -> np.ndarray:
    return L[..., k - 1] if k > 0 else np.full(L.shape[:-1], float(t))


def stick_partition(t: float, m: int, rng: np.random.Generator) -> StickPartition:
    if t <= 0:
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    lengths, L = _break(t, m, (), rng)
    return StickPartition(lengths=lengths, remainder=float(_remainder(t, L, m)))


def _accumulate(pieces: np.ndarray, xi: np.ndarray) -> np.ndarray:
    out = np.empty((*xi.shape[:-1], 3))
    out[..., 0] = xi.sum(axis=-1)
    out[..., 1] = np.maximum(xi, 0.0).sum(axis=-1)
    out[..., 2] = np.where(xi >= 0, pieces, 0.0).sum(axis=-1)
    return out


def sb_pieces(levy: LevyParams, t: float, m: int, size, rng: np.random.Generator):
    """Stick lengths with the remainder appended, and the increment over each.

    Returns two arrays of shape ``(*size, m + 1)``; the last column is the
    remainder piece.
    """
    shape = _shape(size)
    lengths, L = _break(t, m, shape, rng)
    pieces = np.concatenate([lengths, _remainder(t, L, m)[..., None]], axis=-1)
    return pieces, _increments(levy, pieces, rng)


def sb_sample_batch(levy: LevyParams, t: float, m: int, size, rng: np.random.Generator,
                    counter: DrawCounter | None = None) -> np.ndarray:
    """I.i.d. stick-breaking triples with ``m`` sticks, shape ``(*size, 3)``.

    Columns are ``(x, xbar, tau)``. ``m = 0`` draws the whole horizon at once.
    """
    if t <= 0:
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    if m < 0:
        raise ValueError(f"stick count must be >= 0, got {m}")
    pieces, xi = sb_pieces(levy, t, m, size, rng)
    if counter is not None:
        counter.add(xi.size)
    return _accumulate(pieces, xi)


def sb_sample_coupled_batch(levy: LevyParams, t: float, m: int, size,
                            rng: np.random.Generator, m_fine: int | None = None,
                            counter: DrawCounter | None = None):
    """Coupled triples at ``m`` and ``m_fine`` sticks (default ``m + 1``).

    Both components share the sticks and the increments over sticks
    ``1..m``; the fine one also uses sticks ``m+1..m_fine``. The two remainder
    increments are independent. Returns ``(coarse, fine)``, each ``(*size, 3)``.
    """
    if m_fine is None:
        m_fine = m + 1
    if t <= 0:
        raise ValueError(f"horizon t must be > 0, got {t!r}")
    if m < 1:
        raise ValueError(f"coupling needs m >= 1, got {m}")
    if m_fine <= m:
        raise ValueError(f"m_fine must exceed m, got m={m}, m_fine={m_fine}")
    shape = _shape(size)
    lengths, L = _break(t, m_fine, shape, rng)
    pieces = np.concatenate([lengths, L[..., m - 1:m], L[..., -1:]], axis=-1)
    xi = _increments(levy, pieces, rng)
    if counter is not None:
        counter.add(xi.size)
    coarse_pieces = np.concatenate([pieces[..., :m], pieces[..., m_fine:m_fine + 1]], axis=-1)
    coarse_xi = np.concatenate([xi[..., :m], xi[..., m_fine:m_fine + 1]], axis=-1)
    fine_pieces = np.concatenate([pieces[..., :m_fine], pieces[..., m_fine + 1:]], axis=-1)
    fine_xi = np.concatenate([xi[..., :m_fine], xi[..., m_fine + 1:]], axis=-1)
    return _accumulate(coarse_pieces, coarse_xi), _accumulate(fine_pieces, fine_xi)


def sb_sample(levy: LevyParams, t: float, m: int, rng: np.random.Generator) -> ChiTriple:
    """One stick-breaking draw of ``(X_t, sup X, argmax)`` with ``m`` sticks."""
    return ChiTriple(*map(float, sb_sample_batch(levy, t, m, None, rng)))


def sb_sample_coupled(levy: LevyParams, t: float, m: int, rng: np.random.Generator,
                      m_fine: int | None = None) -> tuple[ChiTriple, ChiTriple]:
    coarse, fine = sb_sample_coupled_batch(levy, t, m, None, rng, m_fine=m_fine)
    return ChiTriple(*map(float, coarse)), ChiTriple(*map(float, fine))


def shift(triple, origin: float) -> tuple[float, float]:
    """Place a triple started at 0 onto a path currently at ``origin``."""
    return origin + triple[0], origin + triple[1]
