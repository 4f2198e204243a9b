"""Built-in base systems, direct point-process generators and exact oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from .point_measure import PointEnsemble, PointMeasure
from .suspension import BaseSystem, TargetSet

DEFAULT_ALPHA = math.sqrt(2.0) - 1.0

# --------------------------------------------------------------------------
# circle rotation
# --------------------------------------------------------------------------


class Rotation(BaseSystem):
    """``y -> y + alpha mod 1`` with roof ``c * (1 + amp * cos(2 pi y))``."""

    name = "rotation"

    def __init__(self, alpha: float = DEFAULT_ALPHA, roof_const: float = 1.0, roof_amp: float = 0.0):
        if roof_const <= 0 or not 0 <= abs(roof_amp) < 1:
            raise ValueError("roof must be bounded below by a positive constant")
        self.alpha = float(alpha) % 1.0
        self.roof_const = float(roof_const)
        self.roof_amp = float(roof_amp)
        self.inf_roof = self.roof_const * (1 - abs(self.roof_amp))
        self.sup_roof = self.roof_const * (1 + abs(self.roof_amp))
        self.mean_roof = self.roof_const

    def sample_mu(self, rng, n):
        return rng.random(n)

    def step(self, ys):
        return np.mod(ys + self.alpha, 1.0)

    def roof_values(self, ys):
        ys = np.asarray(ys, dtype=float)
        if self.roof_amp == 0.0:
            return np.full(ys.shape, self.roof_const)
        return self.roof_const * (1.0 + self.roof_amp * np.cos(2 * np.pi * ys))

    def params(self):
        return {"alpha": self.alpha, "roof_const": self.roof_const, "roof_amp": self.roof_amp}


class IntervalTarget(TargetSet):
    """``[lo, hi)`` inside the circle ``[0, 1)``."""

    def __init__(self, lo: float, hi: float):
        if not 0 <= lo < hi <= 1:
            raise ValueError("interval must satisfy 0 <= lo < hi <= 1")
        self.lo, self.hi = float(lo), float(hi)
        self.measure = self.hi - self.lo
        self.name = f"interval[{lo},{hi})"

    def member(self, ys):
        ys = np.asarray(ys)
        return (ys >= self.lo) & (ys < self.hi)

    def sample_conditional(self, rng, n):
        return self.lo + (self.hi - self.lo) * rng.random(n)


# --------------------------------------------------------------------------
# Bernoulli shift on lazily generated fair bits
# --------------------------------------------------------------------------


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_ALL = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _low_mask(k) -> np.ndarray:
    """``2^k - 1`` for ``0 <= k <= 64``, elementwise."""
    k = np.asarray(k, dtype=np.int64)
    safe = np.minimum(k, 63).astype(np.uint64)
    return np.where(k >= 64, _ALL, (np.uint64(1) << safe) - np.uint64(1))


def _word(sid: np.ndarray, w: np.ndarray) -> np.ndarray:
    """64 fair bits number ``w`` of stream ``sid`` (counter-based, stateless)."""
    return _mix(sid + (w.astype(np.uint64) + np.uint64(1)) * _GOLDEN)


def _pack(bits) -> tuple[int, int]:
    bits = [int(b) for b in bits]
    if len(bits) > 64 or any(b not in (0, 1) for b in bits):
        raise ValueError("prefix must be at most 64 symbols in {0, 1}")
    return sum(b << i for i, b in enumerate(bits)), len(bits)


class TapeStates:
    """Batch of Bernoulli-shift points.

    State ``i`` reads symbol ``offsets[i] + p`` of an infinite fair-bit
    stream keyed by ``sids[i]``.  Bits are a pure function of ``(sid,
    position)``, so copies of a state always see the same future.  An optional
    fixed prefix (``pword``, ``plen``) overrides the first ``plen`` symbols.
    """

    def __init__(self, sids, offsets, pwords=None, plens=None):
        self.sids = np.asarray(sids, dtype=np.uint64)
        n = self.sids.size
        self.offsets = np.broadcast_to(np.asarray(offsets, dtype=np.int64), (n,)).copy()
        self.pwords = np.zeros(n, np.uint64) if pwords is None else np.broadcast_to(np.asarray(pwords, np.uint64), (n,)).copy()
        self.plens = np.zeros(n, np.int64) if plens is None else np.broadcast_to(np.asarray(plens, np.int64), (n,)).copy()

    def __len__(self):
        return self.sids.size

    def __getitem__(self, idx):
        if np.ndim(idx) == 0:
            i = int(idx)
            return BernoulliPoint(int(self.sids[i]), int(self.offsets[i]), int(self.pwords[i]), int(self.plens[i]))
        return TapeStates(self.sids[idx], self.offsets[idx], self.pwords[idx], self.plens[idx])

    def shifted(self, k: int = 1) -> TapeStates:
        return TapeStates(self.sids, self.offsets + k, self.pwords, self.plens)

    def _bits(self, start: np.ndarray, k: int) -> np.ndarray:
        """Symbols ``start .. start+k-1`` (``k <= 64``) packed little-endian into uint64."""
        w0 = start >> 6
        sh = (start & 63).astype(np.uint64)
        lo = _word(self.sids, w0) >> sh
        hi = _word(self.sids, w0 + 1) << (np.uint64(64) - np.maximum(sh, np.uint64(1)))
        val = np.where(sh == 0, lo, lo | hi)
        inpre = start < self.plens
        if inpre.any():
            n_pre = np.clip(self.plens - start, 0, 64)
            pre = self.pwords >> np.minimum(start, 63).astype(np.uint64)
            pm = _low_mask(n_pre)
            val = np.where(inpre, (val & ~pm) | (pre & pm), val)
        return val & _low_mask(np.full(val.size, k))

    def word(self, k: int) -> np.ndarray:
        """The next ``k <= 64`` symbols of every state, packed little-endian."""
        if not 0 < k <= 64:
            raise ValueError("word length must be in 1..64")
        return self._bits(self.offsets, k)

    def window(self, k: int) -> np.ndarray:
        """The next ``k`` symbols of every state, shape ``(n, k)``."""
        out = np.empty((len(self), k), dtype=np.uint8)
        for c in range(0, k, 64):
            m = min(64, k - c)
            v = self._bits(self.offsets + c, m)
            out[:, c : c + m] = ((v[:, None] >> np.arange(m, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
        return out


@dataclass(frozen=True)
class BernoulliPoint:
    sid: int
    offset: int
    pword: int = 0
    plen: int = 0

    def states(self) -> TapeStates:
        return TapeStates([self.sid], [self.offset], [self.pword], [self.plen])

    def symbols(self, k: int) -> np.ndarray:
        return self.states().window(k)[0]


def _fresh_sids(rng, n) -> np.ndarray:
    return rng.integers(0, 2**64, size=n, dtype=np.uint64, endpoint=False)


class BernoulliShift(BaseSystem):
    """Left shift on one-sided fair coin sequences (the doubling map), roof 1."""

    name = "bernoulli"
    inf_roof = 1.0
    sup_roof = 1.0
    mean_roof = 1.0

    def sample_mu(self, rng, n):
        return TapeStates(_fresh_sids(rng, n), 0)

    def point(self, prefix, rng=None) -> BernoulliPoint:
        """A single point with the given leading symbols and fresh bits after them."""
        rng = np.random.default_rng() if rng is None else rng
        pw, pl = _pack(prefix)
        return BernoulliPoint(int(_fresh_sids(rng, 1)[0]), 0, pw, pl)

    def step(self, ys):
        return ys.shifted(1)

    def roof_values(self, ys):
        return np.ones(len(ys))

    def batch(self, states):
        return TapeStates(
            [p.sid for p in states], [p.offset for p in states], [p.pword for p in states], [p.plen for p in states]
        )

    def item(self, ys, i):
        return ys[int(i)]

    def concat(self, batches):
        return TapeStates(
            np.concatenate([b.sids for b in batches]),
            np.concatenate([b.offsets for b in batches]),
            np.concatenate([b.pwords for b in batches]),
            np.concatenate([b.plens for b in batches]),
        )

    def observables(self, ys, k: int = 16):
        w = ys.window(k).astype(float)
        return (w @ (0.5 ** np.arange(1, k + 1)))[:, None]


class CylinderTarget(TargetSet):
    """Sequences whose next symbols equal ``word``; measure ``2^-len(word)``."""

    def __init__(self, word):
        if isinstance(word, str):
            word = [int(c) for c in word]
        self.word = np.asarray(word, dtype=np.uint8)
        if self.word.size == 0 or np.any(self.word > 1):
            raise ValueError("cylinder word must be a nonempty 0/1 sequence")
        self.measure = 2.0 ** (-self.word.size)
        self.name = "cylinder:" + "".join(str(int(b)) for b in self.word)
        self._packed = _pack(self.word)[0] if self.word.size <= 64 else None

    def member(self, ys):
        if self._packed is not None:
            return ys.word(self.word.size) == np.uint64(self._packed)
        return np.all(ys.window(self.word.size) == self.word, axis=1)

    def sample_conditional(self, rng, n):
        if self._packed is None:
            return None
        return TapeStates(_fresh_sids(rng, n), 0, self._packed, self.word.size)


# --------------------------------------------------------------------------
# torus shear (non-ergodic)
# --------------------------------------------------------------------------


class TorusShear(BaseSystem):
    """``(x1, x2) -> (x1 + x2, x2)`` on the unit 2-torus, roof 1."""

    name = "shear"
    inf_roof = 1.0
    sup_roof = 1.0
    mean_roof = 1.0

    def sample_mu(self, rng, n):
        return rng.random((n, 2))

    def step(self, ys):
        out = ys.copy()
        out[:, 0] = np.mod(ys[:, 0] + ys[:, 1], 1.0)
        return out

    def roof_values(self, ys):
        return np.ones(len(ys))

    def batch(self, states):
        return np.asarray(states, dtype=float).reshape(-1, 2)

    def observables(self, ys):
        return np.asarray(ys, dtype=float)


class BoxTarget(TargetSet):
    """``[a1, b1) x [a2, b2)`` on the torus; strips are boxes with a full side."""

    def __init__(self, x1=(0.0, 1.0), x2=(0.0, 1.0)):
        (a1, b1), (a2, b2) = x1, x2
        if not (0 <= a1 < b1 <= 1 and 0 <= a2 < b2 <= 1):
            raise ValueError("box sides must be subintervals of [0, 1]")
        self.x1 = (float(a1), float(b1))
        self.x2 = (float(a2), float(b2))
        self.measure = (b1 - a1) * (b2 - a2)
        self.name = f"box[{a1},{b1})x[{a2},{b2})"

    @property
    def invariant(self) -> bool:
        return self.x1 == (0.0, 1.0)

    def member(self, ys):
        ys = np.asarray(ys)
        return (
            (ys[:, 0] >= self.x1[0]) & (ys[:, 0] < self.x1[1]) & (ys[:, 1] >= self.x2[0]) & (ys[:, 1] < self.x2[1])
        )

    def sample_conditional(self, rng, n):
        u = rng.random((n, 2))
        u[:, 0] = self.x1[0] + (self.x1[1] - self.x1[0]) * u[:, 0]
        u[:, 1] = self.x2[0] + (self.x2[1] - self.x2[0]) * u[:, 1]
        return u


def horizontal_strip(lo: float, hi: float) -> BoxTarget:
    """``T x [lo, hi)``; invariant under the shear."""
    return BoxTarget((0.0, 1.0), (lo, hi))


def vertical_strip(lo: float, hi: float) -> BoxTarget:
    """``[lo, hi) x T``; its forward orbit covers almost every point."""
    return BoxTarget((lo, hi), (0.0, 1.0))


# --------------------------------------------------------------------------
# two disjoint circles
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoCircleParams:
    q1: float = 0.5
    ell0: float = 1.0
    ell1: float = 2.0

    def __post_init__(self):
        if not 0 <= self.q1 <= 1:
            raise ValueError("q1 must lie in [0, 1]")
        if self.ell0 <= 0 or self.ell1 <= 0:
            raise ValueError("circle lengths must be positive")

    @property
    def q0(self) -> float:
        return 1.0 - self.q1


class TwoCircle(BaseSystem):
    """``Y = {0, 1}``, ``T`` the identity, ``mu{i} = q_i`` and roof ``ell_i``."""

    name = "two_circle"

    def __init__(self, p: TwoCircleParams = TwoCircleParams()):
        self.p = p
        self.inf_roof = min(p.ell0, p.ell1)
        self.sup_roof = max(p.ell0, p.ell1)
        self.mean_roof = p.q0 * p.ell0 + p.q1 * p.ell1

    def sample_mu(self, rng, n):
        return (rng.random(n) < self.p.q1).astype(np.int64)

    def step(self, ys):
        return ys.copy()

    def roof_values(self, ys):
        return np.where(np.asarray(ys) == 1, self.p.ell1, self.p.ell0).astype(float)

    def batch(self, states):
        return np.asarray(states, dtype=np.int64)

    def params(self):
        return {"q1": self.p.q1, "ell0": self.p.ell0, "ell1": self.p.ell1}


class CircleTarget(TargetSet):
    """The base point ``{i}`` of one circle."""

    def __init__(self, i: int, q: float):
        self.i = int(i)
        self.measure = float(q)
        self.name = f"circle:{i}"

    def member(self, ys):
        return np.asarray(ys) == self.i

    def sample_conditional(self, rng, n):
        if self.measure == 0:
            raise ValueError("zero-measure target")
        return np.full(n, self.i, dtype=np.int64)


class WholeSpace(TargetSet):
    name = "all"
    measure = 1.0

    def member(self, ys):
        return np.ones(len(ys), dtype=bool)


# --------------------------------------------------------------------------
# exact oracles
# --------------------------------------------------------------------------


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass
class OracleReport:
    """Exact quantities; ``laws`` map atom values to probabilities."""

    name: str
    quantities: dict[str, Fraction]
    laws: dict[str, dict[Fraction, Fraction]] = field(default_factory=dict)

    def __post_init__(self):
        for key, law in self.laws.items():
            if any(not 0 <= p <= 1 for p in law.values()) or sum(law.values()) != 1:
                raise ValueError(f"law {key} is not a probability law")

    def __getitem__(self, key):
        return self.quantities[key]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "quantities": {k: str(v) for k, v in self.quantities.items()},
            "laws": {k: {str(a): str(p) for a, p in law.items()} for k, law in self.laws.items()},
        }


def two_circle_oracle(p: TwoCircleParams, target: str = "1") -> OracleReport:
    """Closed forms for the two-circle suspension, target ``{1}`` or all of ``Y``."""
    q1, l0, l1 = _exact(p.q1), _exact(p.ell0), _exact(p.ell1)
    q0 = 1 - q1
    rbar = q0 * l0 + q1 * l1
    p1 = q1 * l1 / rbar
    p0 = 1 - p1
    if target in ("1", 1, "circle:1"):
        if q1 == 0:
            raise ValueError("zero-measure target")
        intensity = q1 / rbar
        return OracleReport(
            "two_circle{1}",
            {"p1": p1, "mean_roof": rbar, "intensity": intensity, "p_nonzero": p1, "mean_return": l1},
            {"tau1_eta": {l1: Fraction(1)}},
        )
    if target in ("Y", "all"):
        intensity = 1 / rbar
        law: dict[Fraction, Fraction] = {}
        for pi, li in ((p0, l0), (p1, l1)):
            if pi:
                law[li] = law.get(li, Fraction(0)) + pi / (li * intensity)
        mean = sum(v * w for v, w in law.items())
        return OracleReport(
            "two_circle{Y}",
            {"p1": p1, "mean_roof": rbar, "intensity": intensity, "p_nonzero": Fraction(1), "mean_return": mean},
            {"tau1_eta": law},
        )
    raise ValueError(f"unknown two-circle target {target!r}")


# --------------------------------------------------------------------------
# lattice-cluster processes (direct point processes, not suspensions)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeClusterParams:
    n: int
    a: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.a is None:
            object.__setattr__(self, "a", 1.0 / (self.n + 1))
        if not 0 < self.a < 1:
            raise ValueError("a_n must lie in (0, 1)")

    @property
    def period(self) -> int:
        return 2 * self.n + 1


def _cluster_atoms(p: LatticeClusterParams, base: np.ndarray, lo, hi, offsets_k: np.ndarray, chunk_cells: int = 4_000_000):
    """Atoms ``period * m + base_i + a * k`` inside ``(lo, hi]`` for every row ``i``."""
    P = p.period
    spread = p.n * p.a + 1.0
    m_lo = np.floor((lo - spread - base) / P).astype(np.int64)
    m_hi = np.ceil((hi + spread - base) / P).astype(np.int64)
    M = int((m_hi - m_lo).max()) + 1 if base.size else 1
    step = max(1, chunk_cells // (M * offsets_k.size))
    rows_out, t_out = [], []
    for c in range(0, base.size, step):
        sl = slice(c, c + step)
        ms = m_lo[sl, None] + np.arange(M)[None, :]
        valid_m = ms <= m_hi[sl, None]
        centers = P * ms + base[sl, None]
        t = centers[:, :, None] + p.a * offsets_k[None, None, :]
        rows = np.broadcast_to(np.arange(c, c + ms.shape[0])[:, None, None], t.shape)
        keep = (t > lo) & (t <= hi) & valid_m[:, :, None]
        rows_out.append(rows[keep])
        t_out.append(t[keep])
    if not rows_out:
        return np.empty(0, np.int64), np.empty(0)
    return np.concatenate(rows_out), np.concatenate(t_out)


def lattice_cluster_ensemble(p: LatticeClusterParams, rng, count: int, lo: float, hi: float) -> PointEnsemble:
    """``count`` realizations of the stationary cluster process on ``(lo, hi]``."""
    s = rng.random(count)
    k = np.arange(-p.n, p.n + 1, dtype=float)
    rows, t = _cluster_atoms(p, p.period * s, lo, hi, k)
    return PointEnsemble.from_groups(rows, t, count, lo, hi, validate=False)


def lattice_palm_ensemble(p: LatticeClusterParams, rng, count: int, lo: float, hi: float) -> PointEnsemble:
    """Palm realizations: the lattice pattern re-anchored at a uniform cluster member."""
    l = rng.integers(-p.n, p.n + 1, size=count)
    k = np.arange(-p.n, p.n + 1, dtype=float)
    # shifting the cluster index by -l is the same as moving the base point
    rows, t = _cluster_atoms(p, -p.a * l.astype(float), lo, hi, k)
    return PointEnsemble.from_groups(rows, t, count, lo, hi, validate=False)


def make_lattice_cluster(p: LatticeClusterParams, rng, W: float | None = None) -> PointMeasure:
    W = 2 * p.period if W is None else W
    if W < 2 * p.period:
        raise ValueError(f"window shorter than required: need W >= 2(2n+1) = {2 * p.period}")
    return lattice_cluster_ensemble(p, rng, 1, -W, W)[0]


def lattice_cluster_palm(p: LatticeClusterParams, rng, W: float | None = None) -> PointMeasure:
    W = 2 * p.period if W is None else W
    if W < 2 * p.period:
        raise ValueError(f"window shorter than required: need W >= 2(2n+1) = {2 * p.period}")
    return lattice_palm_ensemble(p, rng, 1, -W, W)[0]


def lattice_tau1_law(p: LatticeClusterParams) -> dict[float, Fraction]:
    """Exact two-atom law of the first positive Palm atom."""
    n = p.n
    big = p.period - 2 * n * p.a
    law = {p.a: Fraction(2 * n, 2 * n + 1)}
    law[big] = law.get(big, Fraction(0)) + Fraction(1, 2 * n + 1)
    return law


def lattice_mean_tau1(p: LatticeClusterParams) -> float:
    a = _exact(p.a)
    n = p.n
    return float(Fraction(2 * n, 2 * n + 1) * a + Fraction(1, 2 * n + 1) * (2 * n + 1 - 2 * n * a))


# --------------------------------------------------------------------------
# homogeneous Poisson process
# --------------------------------------------------------------------------


def poisson_ensemble(lam: float, rng, count: int, lo: float, hi: float) -> PointEnsemble:
    """Homogeneous Poisson realizations on ``(lo, hi]`` built from exponential gaps."""
    if not lam > 0:
        raise ValueError("Poisson intensity must be positive")
    L = hi - lo
    mean = lam * L
    width = int(mean + 6 * math.sqrt(mean) + 16)
    gaps = rng.exponential(1.0 / lam, size=(count, width))
    t = lo + np.cumsum(gaps, axis=1)
    short = np.flatnonzero(t[:, -1] <= hi)
    rows_extra, t_extra = [], []
    for i in short:
        last = t[i, -1]
        while last <= hi:
            g = rng.exponential(1.0 / lam, size=width)
            more = last + np.cumsum(g)
            rows_extra.append(np.full(width, i))
            t_extra.append(more)
            last = more[-1]
    rows = np.broadcast_to(np.arange(count)[:, None], t.shape).ravel()
    t = t.ravel()
    if rows_extra:
        rows = np.concatenate([rows, *rows_extra])
        t = np.concatenate([t, *t_extra])
    keep = t <= hi
    return PointEnsemble.from_groups(rows[keep], t[keep], count, lo, hi, validate=False)


def make_poisson(lam: float, rng, window=(0.0, 10.0)) -> PointMeasure:
    return poisson_ensemble(lam, rng, 1, float(window[0]), float(window[1]))[0]


# --------------------------------------------------------------------------
# catalog and string-addressed construction
# --------------------------------------------------------------------------

CATALOG: dict[str, dict[str, Any]] = {
    "rotation": {
        "kind": "suspension",
        "doc": "circle rotation y -> y + alpha mod 1, mu = Lebesgue",
        "params": {
            "alpha": ("float", DEFAULT_ALPHA, "rotation number"),
            "roof_const": ("float", 1.0, "roof scale c"),
            "roof_amp": ("float", 0.0, "roof c*(1 + amp*cos(2 pi y)), |amp| < 1"),
        },
        "targets": {"interval:LO,HI": "[LO, HI) in [0, 1)"},
    },
    "bernoulli": {
        "kind": "suspension",
        "doc": "one-sided fair Bernoulli shift (doubling map) on lazily drawn bits, roof 1",
        "params": {},
        "targets": {"cylinder:WORD": "sequences starting with WORD, e.g. cylinder:000", "depth:K": "cylinder 0^K"},
    },
    "shear": {
        "kind": "suspension",
        "doc": "torus shear (x1, x2) -> (x1 + x2, x2), non-ergodic, roof 1",
        "params": {},
        "targets": {
            "hstrip:LO,HI": "T x [LO, HI), invariant",
            "vstrip:LO,HI": "[LO, HI) x T",
            "box:A1,B1,A2,B2": "[A1, B1) x [A2, B2)",
        },
    },
    "two_circle": {
        "kind": "suspension",
        "doc": "two disjoint circles of lengths ell0, ell1 with weights q0, q1",
        "params": {
            "q1": ("float", 0.5, "weight of circle 1"),
            "ell0": ("float", 1.0, "length of circle 0"),
            "ell1": ("float", 2.0, "length of circle 1"),
        },
        "targets": {"circle:1": "the point {1}", "circle:0": "the point {0}", "all": "the whole base Y"},
    },
    "lattice_cluster": {
        "kind": "process",
        "doc": "periodic clusters of 2n+1 atoms spaced a_n apart, period 2n+1 (unit intensity)",
        "params": {
            "n": ("int", 5, "cluster half-width"),
            "a": ("float", None, "cluster spacing a_n in (0, 1); default 1/(n+1)"),
        },
        "targets": {},
    },
    "poisson": {
        "kind": "process",
        "doc": "homogeneous Poisson process",
        "params": {"lam": ("float", 1.0, "intensity (> 0)")},
        "targets": {},
    },
}


def _resolve(system_id: str, params: dict | None) -> dict:
    if system_id not in CATALOG:
        raise ValueError(f"unknown system {system_id!r}; choose from {sorted(CATALOG)}")
    schema = CATALOG[system_id]["params"]
    params = dict(params or {})
    extra = set(params) - set(schema)
    if extra:
        raise ValueError(f"unknown parameter(s) for {system_id}: {sorted(extra)}")
    out = {}
    for key, (typ, default, _doc) in schema.items():
        v = params.get(key, default)
        if v is not None:
            v = int(v) if typ == "int" else float(v)
        out[key] = v
    return out


def make_system(system_id: str, params: dict | None = None) -> BaseSystem:
    """Construct a suspension base system from its catalog id."""
    p = _resolve(system_id, params)
    if CATALOG[system_id]["kind"] != "suspension":
        raise ValueError(f"{system_id} is a direct point process, not a suspension")
    if system_id == "rotation":
        return Rotation(**p)
    if system_id == "bernoulli":
        return BernoulliShift()
    if system_id == "shear":
        return TorusShear()
    return TwoCircle(TwoCircleParams(**p))


def resolve_params(system_id: str, params: dict | None = None) -> dict:
    return _resolve(system_id, params)


def make_target(system: BaseSystem, spec: str) -> TargetSet:
    """Parse a target spec such as ``interval:0,0.05`` for the given system."""
    kind, _, arg = spec.partition(":")
    nums = [float(v) for v in arg.split(",")] if arg and kind not in ("cylinder",) else []
    if isinstance(system, Rotation) and kind == "interval":
        return IntervalTarget(*nums)
    if isinstance(system, BernoulliShift):
        if kind == "cylinder":
            return CylinderTarget(arg)
        if kind == "depth":
            return CylinderTarget([0] * int(nums[0]))
    if isinstance(system, TorusShear):
        if kind == "hstrip":
            return horizontal_strip(*nums)
        if kind == "vstrip":
            return vertical_strip(*nums)
        if kind == "box":
            return BoxTarget(tuple(nums[:2]), tuple(nums[2:]))
    if isinstance(system, TwoCircle):
        if kind == "circle":
            i = int(nums[0])
            return CircleTarget(i, system.p.q1 if i == 1 else system.p.q0)
        if kind in ("all", "Y"):
            return WholeSpace()
    raise ValueError(f"target {spec!r} not understood for system {system.name}")
