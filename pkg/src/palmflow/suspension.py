"""Suspension semi-flows over measure-preserving maps and their hit processes.

Base states are opaque to this module.  Systems work on *batches* of states:
any object supporting ``len`` and integer-array indexing (numpy arrays for most
systems).  Scalar helpers wrap a batch of one.

Hits of the section ``D x {0}`` happen exactly at ``t = S_n(y) - s`` with
``T^n y`` in ``D``, so extraction iterates the base map and never discretizes
time.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .point_measure import PointEnsemble, PointMeasure
from .stats import Estimate, mean_se


class RoofViolation(RuntimeError):
    """The roof function returned a value below the declared lower bound."""


class NotInTarget(ValueError):
    pass


class BaseSystem(ABC):
    """A measure-preserving map ``T`` with invariant law ``mu`` and roof ``r``.

    ``mean_roof`` is ``None`` when ``mu r`` has to be estimated; ``sup_roof``
    enables exact rejection sampling of the suspension measure.
    """

    name = "base"
    inf_roof: float = 1.0
    mean_roof: float | None = None
    sup_roof: float | None = None

    @abstractmethod
    def sample_mu(self, rng: np.random.Generator, n: int) -> Any: ...

    @abstractmethod
    def step(self, ys) -> Any: ...

    @abstractmethod
    def roof_values(self, ys) -> np.ndarray: ...

    def roof(self, ys) -> np.ndarray:
        r = np.asarray(self.roof_values(ys), dtype=float)
        bad = ~(r >= self.inf_roof * (1.0 - 1e-12)) | ~(r > 0)
        if bad.any():
            raise RoofViolation(f"roof violation: r(y) = {r[bad][0]!r} below inf_roof = {self.inf_roof}")
        return r

    def batch(self, states) -> Any:
        """Lift a list of scalar states into a batch."""
        return np.asarray(states, dtype=float)

    def item(self, ys, i: int):
        return ys[i]

    def concat(self, batches) -> Any:
        return np.concatenate(batches)

    def observables(self, ys) -> np.ndarray:
        """Real-valued coordinates of states, shape (n, d), for distribution tests."""
        return np.asarray(ys, dtype=float).reshape(len(ys), -1)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class SuspensionState:
    y: Any
    s: float


class TargetSet(ABC):
    """A measurable target ``D`` inside the base space."""

    name = "target"
    measure: float | None = None

    @abstractmethod
    def member(self, ys) -> np.ndarray: ...

    def sample_conditional(self, rng: np.random.Generator, n: int):
        """Draw from ``mu`` restricted to ``D``; ``None`` means not available."""
        return None


class PredicateTarget(TargetSet):
    """Target given by an arbitrary vectorized predicate."""

    def __init__(self, member: Callable, measure: float | None = None, name: str = "predicate"):
        self._member = member
        self.measure = measure
        self.name = name

    def member(self, ys) -> np.ndarray:
        return np.asarray(self._member(ys), dtype=bool)


# --------------------------------------------------------------------------
# scalar operations
# --------------------------------------------------------------------------


def birkhoff_sum(sys: BaseSystem, y, n: int) -> float:
    """``S_n(y) = r(y) + r(Ty) + ... + r(T^{n-1} y)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    ys = sys.batch([y])
    terms = []
    for _ in range(n):
        terms.append(float(sys.roof(ys)[0]))
        ys = sys.step(ys)
    return math.fsum(terms)


def _check_state(sys: BaseSystem, ys, ss) -> None:
    r = sys.roof(ys)
    ss = np.asarray(ss, dtype=float)
    if np.any(ss < 0) or np.any(ss >= r):
        raise ValueError("suspension state needs 0 <= s < r(y)")


def flow_batch(sys: BaseSystem, ys, ss, t: float):
    """``phi^t`` applied to every state of a batch; returns ``(ys, ss)``."""
    if t < 0:
        raise ValueError("the suspension is a semi-flow: t must be >= 0")
    ss = np.asarray(ss, dtype=float) + t
    n = len(ss)
    idx = np.arange(n)
    done_idx, done_y, done_s = [], [], []
    while idx.size:
        r = sys.roof(ys)
        wrap = ss >= r
        if not wrap.all():
            keep = ~wrap
            done_idx.append(idx[keep])
            done_y.append(ys[keep])
            done_s.append(ss[keep])
            idx, ys, ss, r = idx[wrap], ys[wrap], ss[wrap], r[wrap]
        if idx.size == 0:
            break
        ss = ss - r
        ys = sys.step(ys)
    order = np.argsort(np.concatenate(done_idx), kind="stable")
    return sys.concat(done_y)[order], np.concatenate(done_s)[order]


def flow(sys: BaseSystem, x: SuspensionState, t: float) -> SuspensionState:
    ys, ss = flow_batch(sys, sys.batch([x.y]), [x.s], t)
    return SuspensionState(sys.item(ys, 0), float(ss[0]))


@dataclass
class NuSample:
    """Batch of suspension states; ``weights`` is set only on the weighted path."""

    ys: Any
    ss: np.ndarray
    weights: np.ndarray | None = None
    draws: int = 0


def sample_nu_batch(sys: BaseSystem, rng: np.random.Generator, n: int) -> NuSample:
    """Sample the invariant measure ``nu``: ``y`` with density ``r/mean_r`` then ``s ~ U[0, r)``.

    Rejection against ``sup_roof`` is exact and preferred; without it the
    states come from ``mu`` with importance weights ``r(y)/mean_r``.
    """
    if sys.sup_roof is not None:
        got, draws = [], 0
        need = n
        while need > 0:
            m = max(int(need * 1.2) + 16, 64)
            ys = sys.sample_mu(rng, m)
            draws += m
            r = sys.roof(ys)
            acc = rng.random(m) * sys.sup_roof < r
            ys = ys[np.flatnonzero(acc)[:need]]
            got.append(ys)
            need -= len(ys)
        ys = sys.concat(got)
        ss = rng.random(n) * sys.roof(ys)
        return NuSample(ys, ss, None, draws)
    if sys.mean_roof is None:
        raise ValueError("cannot sample nu: neither sup_roof nor mean_roof is available")
    ys = sys.sample_mu(rng, n)
    r = sys.roof(ys)
    return NuSample(ys, rng.random(n) * r, r / sys.mean_roof, n)


def sample_nu(sys: BaseSystem, rng: np.random.Generator) -> SuspensionState:
    b = sample_nu_batch(sys, rng, 1)
    return SuspensionState(sys.item(b.ys, 0), float(b.ss[0]))


def entry_ensemble(
    sys: BaseSystem,
    target: TargetSet,
    ys,
    ss,
    horizon: float,
    max_atoms: int | None = None,
    weights=None,
) -> PointEnsemble:
    """Entry times of many states into ``D x {0}`` on the window ``(0, horizon]``.

    With ``max_atoms`` a member stops at its ``max_atoms``-th hit and its
    window is cut there, so later indices read as censored.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    ss = np.asarray(ss, dtype=float)
    n = len(ss)
    _check_state(sys, ys, ss)
    hi = np.full(n, float(horizon))
    idx = np.arange(n)
    t = -ss
    nhits = np.zeros(n, dtype=np.int64)
    g_parts, t_parts = [], []
    while idx.size:
        t = t + sys.roof(ys)
        ys = sys.step(ys)
        alive = t <= horizon
        if not alive.all():
            idx, t, ys = idx[alive], t[alive], ys[alive]
            if idx.size == 0:
                break
        hit = target.member(ys)
        if hit.any():
            g_parts.append(idx[hit])
            t_parts.append(t[hit])
            if max_atoms is not None:
                nhits[idx[hit]] += 1
                done = nhits[idx] >= max_atoms
                if done.any():
                    hi[idx[done]] = t[done]
                    keep = ~done
                    idx, t, ys = idx[keep], t[keep], ys[keep]
    group = np.concatenate(g_parts) if g_parts else np.empty(0, np.int64)
    times = np.concatenate(t_parts) if t_parts else np.empty(0)
    return PointEnsemble.from_groups(group, times, n, 0.0, hi, weights=weights, validate=False)


def entry_times(sys: BaseSystem, target: TargetSet, x: SuspensionState, horizon: float) -> PointMeasure:
    """The hit set ``H(x, D)`` on ``(0, horizon]`` as a simple point measure."""
    return entry_ensemble(sys, target, sys.batch([x.y]), [x.s], horizon)[0]


def return_ensemble(sys: BaseSystem, target: TargetSet, ys, horizon: float, max_atoms: int | None = None) -> PointEnsemble:
    if not np.all(target.member(ys)):
        raise NotInTarget("not in target")
    return entry_ensemble(sys, target, ys, np.zeros(len(ys)), horizon, max_atoms)


def return_process(sys: BaseSystem, target: TargetSet, y, horizon: float) -> PointMeasure:
    """Return times ``P(y, 0)`` of a point ``y`` in the target."""
    return return_ensemble(sys, target, sys.batch([y]), horizon)[0]


def intensity_scale(sys: BaseSystem, target: TargetSet) -> float:
    """``mu(D) / mean_r``, the factor that makes the entry process unit-intensity."""
    if target.measure is None or sys.mean_roof is None:
        raise ValueError("rescaling needs declared (or estimated) mu(D) and mean roof")
    return target.measure / sys.mean_roof


def rescaled_entry(sys: BaseSystem, target: TargetSet, x: SuspensionState, horizon: float) -> PointMeasure:
    """Entry times multiplied by the intensity; ``horizon`` is in rescaled units."""
    c = intensity_scale(sys, target)
    raw = entry_times(sys, target, x, horizon / c)
    return PointMeasure((0.0, horizon), raw.times * c, raw.mults)


def sample_target(sys: BaseSystem, target: TargetSet, rng: np.random.Generator, n: int, max_draws: int = 10**9):
    """Draw ``n`` states from ``mu`` conditioned on ``D``; returns ``(ys, draws)``.

    Falls back to accept-reject on ``sample_mu`` (expected cost ``1/mu(D)``
    draws per accepted state).
    """
    ys = target.sample_conditional(rng, n)
    if ys is not None:
        return ys, n
    got, draws, need = [], 0, n
    while need > 0:
        m = max(64, int(need / max(target.measure or 0.01, 1e-6) * 1.2))
        cand = sys.sample_mu(rng, m)
        draws += m
        hit = np.flatnonzero(target.member(cand))[:need]
        if hit.size:
            got.append(cand[hit])
            need -= hit.size
        if draws > max_draws:
            raise ValueError("no way to sample the target: acceptance too rare")
    return sys.concat(got), draws


def estimate_measure(sys: BaseSystem, target: TargetSet, rng: np.random.Generator, n: int) -> Estimate:
    """Hit frequency of ``D`` under ``mu``."""
    return mean_se(target.member(sys.sample_mu(rng, n)).astype(float))


def estimate_mean_roof(sys: BaseSystem, rng: np.random.Generator, n: int) -> Estimate:
    return mean_se(sys.roof(sys.sample_mu(rng, n)))


def strip_occupation(sys: BaseSystem, target: TargetSet, x: SuspensionState, horizon: float, eps: float) -> float:
    """``(1/eps) * Leb{t in [0, R] : phi^t x in D x [0, eps]}`` in closed form.

    The orbit sits in ``D x [0, eps]`` on ``[t_n, t_n + eps)`` for every visit
    ``t_n = S_n(y) - s`` (``n >= 0``) with ``T^n y`` in ``D``.
    """
    if not 0 < eps < sys.inf_roof:
        raise ValueError("eps must lie in (0, inf_roof)")
    ys = sys.batch([x.y])
    t = -x.s
    total = []
    while t <= horizon:
        if target.member(ys)[0]:
            total.append(max(0.0, min(horizon, t + eps) - max(0.0, t)))
        t += float(sys.roof(ys)[0])
        ys = sys.step(ys)
    return math.fsum(total) / eps
