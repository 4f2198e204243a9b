"""Integer-valued measures observed on a bounded time window.

A :class:`PointMeasure` is one realization; a :class:`PointEnsemble` stores many
realizations in flat arrays so estimators can work on them without Python
loops.  Windows are half open, ``(lo, hi]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class WindowError(ValueError):
    """Raised when a request reaches outside the observed window."""


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype).ravel()
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PointMeasure:
    """Atoms ``(t, k)`` with strictly increasing times inside ``(lo, hi]``."""

    window: tuple[float, float]
    times: np.ndarray
    mults: np.ndarray

    def __init__(self, window, times=(), mults=None):
        lo, hi = float(window[0]), float(window[1])
        if not lo < hi:
            raise ValueError(f"window_lo must be < window_hi, got ({lo}, {hi}]")
        t = _frozen(times, float)
        k = _frozen(np.ones(t.size, dtype=np.int64) if mults is None else mults, np.int64)
        if k.size != t.size:
            raise ValueError("times and mults differ in length")
        if t.size:
            if np.any(np.diff(t) <= 0):
                raise ValueError("atom times must be strictly increasing")
            if np.any(k < 1):
                raise ValueError("multiplicities must be >= 1")
            if t[0] <= lo or t[-1] > hi:
                raise ValueError("atom outside window")
        object.__setattr__(self, "window", (lo, hi))
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "mults", k)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, int]], window) -> PointMeasure:
        atoms = list(atoms)
        return cls(window, [a[0] for a in atoms], [a[1] for a in atoms])

    @property
    def atoms(self) -> list[tuple[float, int]]:
        return [(float(t), int(k)) for t, k in zip(self.times, self.mults)]

    @property
    def is_simple(self) -> bool:
        return bool(np.all(self.mults == 1))

    @property
    def total(self) -> int:
        return int(self.mults.sum())

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return (
            self.window == other.window
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.mults, other.mults)
        )

    def __repr__(self) -> str:
        lo, hi = self.window
        return f"PointMeasure(({lo}, {hi}], {self.atoms})"

    def to_json(self) -> dict:
        lo, hi = self.window
        return {"window": [lo, hi], "atoms": [[t, k] for t, k in self.atoms]}

    @classmethod
    def from_json(cls, obj) -> PointMeasure:
        if isinstance(obj, str):
            obj = json.loads(obj)
        lo, hi = (float(v) for v in obj["window"])
        return cls((lo, hi), [float(a[0]) for a in obj["atoms"]], [int(a[1]) for a in obj["atoms"]])


def count(zeta: PointMeasure, a: float, b: float) -> int:
    """Total multiplicity of atoms in ``(a, b]``."""
    lo, hi = zeta.window
    if a < lo or b > hi or a > b:
        raise WindowError(f"window exceeded: ({a}, {b}] not inside ({lo}, {hi}]")
    i = np.searchsorted(zeta.times, a, side="right")
    j = np.searchsorted(zeta.times, b, side="right")
    return int(zeta.mults[i:j].sum())


def tau(zeta: PointMeasure, j: int) -> float | None:
    """The ``j``-th atom with ``tau_0 <= 0 < tau_1``; ``None`` when censored.

    An atom of multiplicity ``k`` occupies ``k`` consecutive indices.
    """
    cum = np.cumsum(zeta.mults)
    first_pos = int(np.searchsorted(zeta.times, 0.0, side="right"))
    base = int(cum[first_pos - 1]) if first_pos > 0 else 0
    target = base + j - 1
    if target < 0 or cum.size == 0 or target >= cum[-1]:
        return None
    return float(zeta.times[np.searchsorted(cum, target, side="right")])


def shift(zeta: PointMeasure, u: float) -> PointMeasure:
    """``theta^u``: move every atom and the window by ``-u``."""
    lo, hi = zeta.window
    t = zeta.times - u
    if t.size > 1 and np.any(np.diff(t) == 0):
        # rounding can fuse neighbouring atoms; fused atoms add up
        t, inv = np.unique(t, return_inverse=True)
        return PointMeasure((lo - u, hi - u), t, np.bincount(inv, weights=zeta.mults).astype(np.int64))
    return PointMeasure((lo - u, hi - u), t, zeta.mults)


def restrict_positive(zeta: PointMeasure) -> PointMeasure:
    lo, hi = zeta.window
    if hi <= 0:
        raise WindowError("empty window")
    keep = zeta.times > 0
    return PointMeasure((max(lo, 0.0), hi), zeta.times[keep], zeta.mults[keep])


def _run_starts(times: np.ndarray, eps: float, group_start: np.ndarray | None = None) -> np.ndarray:
    start = np.ones(times.size, dtype=bool)
    if times.size > 1:
        start[1:] = np.diff(times) > eps
    if group_start is not None:
        start |= group_start
    return start


def simplify(zeta: PointMeasure, eps: float = 0.0) -> PointMeasure:
    """Star process: merge runs with successive gaps ``<= eps`` into one simple atom.

    Each run is represented at its smallest time.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    start = _run_starts(zeta.times, eps)
    t = zeta.times[start]
    return PointMeasure(zeta.window, t, np.ones(t.size, dtype=np.int64))


class PointEnsemble:
    """Many point measures in CSR layout: ``times[offsets[i]:offsets[i+1]]``.

    Every member has its own window ``(lo[i], hi[i]]``; ``weights`` carries
    optional importance weights for the member realizations.
    """

    def __init__(self, lo, hi, offsets, times, mults=None, weights=None, validate=True):
        self.offsets = np.asarray(offsets, dtype=np.int64)
        n = self.offsets.size - 1
        self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        self.times = np.asarray(times, dtype=float)
        self.mults = (
            np.ones(self.times.size, dtype=np.int64) if mults is None else np.asarray(mults, dtype=np.int64)
        )
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        if validate:
            self._validate()

    def _validate(self):
        if self.offsets[0] != 0 or self.offsets[-1] != self.times.size or np.any(np.diff(self.offsets) < 0):
            raise ValueError("malformed offsets")
        if np.any(self.lo >= self.hi):
            raise ValueError("window_lo must be < window_hi")
        g = self.group
        if self.times.size:
            if np.any(self.times <= self.lo[g]) or np.any(self.times > self.hi[g]):
                raise ValueError("atom outside window")
            inner = np.diff(self.times) <= 0
            inner &= g[1:] == g[:-1]
            if inner.any():
                raise ValueError("atom times must be strictly increasing")
            if np.any(self.mults < 1):
                raise ValueError("multiplicities must be >= 1")

    # -- construction -------------------------------------------------------
    @classmethod
    def empty(cls, n: int, lo, hi) -> PointEnsemble:
        return cls(lo, hi, np.zeros(n + 1, dtype=np.int64), np.empty(0))

    @classmethod
    def from_groups(cls, group, times, n, lo, hi, mults=None, weights=None, validate=True) -> PointEnsemble:
        """Build from per-atom group ids; atoms are sorted by (group, time)."""
        group = np.asarray(group, dtype=np.int64)
        times = np.asarray(times, dtype=float)
        order = np.lexsort((times, group))
        counts = np.bincount(group, minlength=n)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        m = None if mults is None else np.asarray(mults)[order]
        return cls(lo, hi, offsets, times[order], m, weights, validate=validate)

    @classmethod
    def from_measures(cls, measures: Sequence[PointMeasure]) -> PointEnsemble:
        lens = [len(m) for m in measures]
        offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        times = np.concatenate([m.times for m in measures]) if measures else np.empty(0)
        mults = np.concatenate([m.mults for m in measures]) if measures else np.empty(0, np.int64)
        lo = [m.window[0] for m in measures]
        hi = [m.window[1] for m in measures]
        return cls(lo, hi, offsets, times, mults)

    @classmethod
    def concat(cls, parts: Sequence[PointEnsemble]) -> PointEnsemble:
        parts = list(parts)
        if not parts:
            return cls.empty(0, [], [])
        offs = [np.zeros(1, dtype=np.int64)]
        base = 0
        for p in parts:
            offs.append(p.offsets[1:] + base)
            base += p.times.size
        if any(p.weights is not None for p in parts):
            weights = np.concatenate([p.weights if p.weights is not None else np.ones(len(p)) for p in parts])
        else:
            weights = None
        return cls(
            np.concatenate([p.lo for p in parts]),
            np.concatenate([p.hi for p in parts]),
            np.concatenate(offs),
            np.concatenate([p.times for p in parts]),
            np.concatenate([p.mults for p in parts]),
            weights,
            validate=False,
        )

    # -- access ---------------------------------------------------------------
    def __len__(self) -> int:
        return self.offsets.size - 1

    def __getitem__(self, i) -> PointMeasure:
        i = int(i)
        a, b = self.offsets[i], self.offsets[i + 1]
        return PointMeasure((self.lo[i], self.hi[i]), self.times[a:b], self.mults[a:b])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def group(self) -> np.ndarray:
        return np.repeat(np.arange(len(self)), self.lengths)

    def take(self, idx) -> PointEnsemble:
        idx = np.asarray(idx, dtype=np.int64)
        lens = self.lengths[idx]
        starts = self.offsets[idx]
        offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        flat = np.repeat(starts - offsets[:-1], lens) + np.arange(offsets[-1])
        w = None if self.weights is None else self.weights[idx]
        return PointEnsemble(self.lo[idx], self.hi[idx], offsets, self.times[flat], self.mults[flat], w, validate=False)

    # -- vectorized operations -------------------------------------------------
    def counts(self, a: float, b: float) -> np.ndarray:
        """Per-member ``count(zeta_i, a, b)``."""
        if np.any(a < self.lo) or np.any(b > self.hi) or a > b:
            raise WindowError(f"window exceeded: ({a}, {b}] not inside every member window")
        inside = (self.times > a) & (self.times <= b)
        return np.bincount(self.group[inside], weights=self.mults[inside], minlength=len(self)).astype(np.int64)

    def totals(self) -> np.ndarray:
        return np.bincount(self.group, weights=self.mults, minlength=len(self)).astype(np.int64)

    def nonempty(self) -> np.ndarray:
        return self.lengths > 0

    def tau(self, j: int) -> np.ndarray:
        """Per-member ``tau(zeta_i, j)``; NaN marks a censored index."""
        n = len(self)
        out = np.full(n, np.nan)
        if self.times.size == 0:
            return out
        g = self.group
        cum = np.cumsum(self.mults)
        start_exp = np.concatenate([[0], cum])[self.offsets[:-1]]
        end_exp = np.concatenate([[0], cum])[self.offsets[1:]]
        npos_mult = np.bincount(g, weights=self.mults * (self.times <= 0), minlength=n).astype(np.int64)
        target = start_exp + npos_mult + j - 1
        ok = (target >= start_exp) & (target < end_exp)
        atom = np.searchsorted(cum, target[ok], side="right")
        out[ok] = self.times[atom]
        return out

    def shift(self, u) -> PointEnsemble:
        """Shift member ``i`` by ``u`` (scalar or per-member array)."""
        u = np.broadcast_to(np.asarray(u, dtype=float), (len(self),))
        return PointEnsemble(
            self.lo - u, self.hi - u, self.offsets, self.times - u[self.group], self.mults, self.weights, validate=False
        )

    def scale(self, c: float) -> PointEnsemble:
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return PointEnsemble(self.lo * c, self.hi * c, self.offsets, self.times * c, self.mults, self.weights, validate=False)

    def restrict(self, lo=None, hi=None) -> PointEnsemble:
        """Intersect every member window with ``(lo, hi]``."""
        new_lo = self.lo if lo is None else np.maximum(self.lo, lo)
        new_hi = self.hi if hi is None else np.minimum(self.hi, hi)
        if np.any(new_lo >= new_hi):
            raise WindowError("empty window")
        g = self.group
        keep = (self.times > new_lo[g]) & (self.times <= new_hi[g])
        lens = np.bincount(g[keep], minlength=len(self))
        offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        return PointEnsemble(new_lo, new_hi, offsets, self.times[keep], self.mults[keep], self.weights, validate=False)

    def restrict_positive(self) -> PointEnsemble:
        if np.any(self.hi <= 0):
            raise WindowError("empty window")
        return self.restrict(lo=0.0)

    def simplify(self, eps: float = 0.0) -> PointEnsemble:
        if eps < 0:
            raise ValueError("eps must be >= 0")
        gstart = np.zeros(self.times.size, dtype=bool)
        nz = self.offsets[:-1][self.lengths > 0]
        gstart[nz] = True
        start = _run_starts(self.times, eps, gstart)
        g = self.group[start]
        lens = np.bincount(g, minlength=len(self))
        offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        return PointEnsemble(
            self.lo, self.hi, offsets, self.times[start], np.ones(int(start.sum()), dtype=np.int64), self.weights,
            validate=False,
        )

    # -- serialization --------------------------------------------------------
    def to_ndjson(self, fh) -> None:
        for zeta in self:
            fh.write(json.dumps(zeta.to_json()) + "\n")

    @classmethod
    def from_ndjson(cls, fh) -> PointEnsemble:
        return cls.from_measures([PointMeasure.from_json(line) for line in fh if line.strip()])


def default_eps(window) -> float:
    lo, hi = window
    return 1e-9 * (hi - lo) if math.isfinite(hi - lo) else 0.0
