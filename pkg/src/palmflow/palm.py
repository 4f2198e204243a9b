"""Intensity, hit-set, and Palm estimators plus identity checks.

Two independent Palm estimators are provided: one straight from the
definition (anchor a stationary ensemble at its atoms in a guarded window
``B``) and one from return processes of points sampled on the target.  The
checks compare a quantity computed from stationary (entry) ensembles with the
same quantity computed from Palm (return) ensembles drawn on independent
streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from . import parallel
from .point_measure import PointEnsemble, PointMeasure, WindowError, count, tau
from .stats import (
    EmpiricalDistribution,
    Estimate,
    binomial_se,
    combined_se,
    dkw_epsilon,
    fsum_mean,
    mean_se,
    ratio_se,
)
from .suspension import (
    BaseSystem,
    TargetSet,
    entry_ensemble,
    return_ensemble,
    sample_nu_batch,
    sample_target,
)
from .zoo import LatticeClusterParams, lattice_cluster_ensemble, lattice_palm_ensemble, poisson_ensemble

CENSOR_WARN = 0.01


@dataclass
class IdentityReport:
    name: str
    lhs: Estimate
    rhs: Estimate
    discrepancy: float
    threshold: float
    passed: bool
    sample_sizes: dict[str, int] = field(default_factory=dict)
    censoring: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lhs.se < 0 or self.rhs.se < 0:
            raise ValueError("standard errors must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs_estimate": self.lhs.to_dict(),
            "rhs_estimate": self.rhs.to_dict(),
            "discrepancy": self.discrepancy,
            "threshold": self.threshold,
            "pass": self.passed,
            "sample_sizes": self.sample_sizes,
            "censoring_counts": self.censoring,
            "warnings": self.warnings,
            "details": self.details,
        }

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"{flag} {self.name}: lhs={self.lhs.value:.6g}±{self.lhs.se:.2g} "
            f"rhs={self.rhs.value:.6g}±{self.rhs.se:.2g} |d|={self.discrepancy:.3g} <= {self.threshold:.3g}"
        )


def make_report(
    name: str,
    lhs: Estimate,
    rhs: Estimate,
    *,
    k_sigma: float = 3.0,
    bias: float = 0.0,
    tolerance: float | None = None,
    extra_ok: bool = True,
    **kw,
) -> IdentityReport:
    """Pass iff ``|lhs - rhs| <= threshold``; the threshold defaults to
    ``k_sigma`` combined standard errors plus a deterministic bias allowance."""
    d = abs(lhs.value - rhs.value)
    thr = tolerance if tolerance is not None else k_sigma * combined_se(lhs.se, rhs.se) + bias
    return IdentityReport(name, lhs, rhs, d, thr, bool(d <= thr and extra_ok), **kw)


@dataclass(frozen=True)
class CensoredEstimate(Estimate):
    censored: int = 0
    samples: int = 0


@dataclass(frozen=True)
class HitEstimate(Estimate):
    """Fraction of orbits hitting the target within ``n_max_steps``; a lower bound."""

    n_max_steps: int = 0
    lower_bound: bool = True


# --------------------------------------------------------------------------
# functionals on point measures
# --------------------------------------------------------------------------


class Functional:
    """A test function on point measures.

    ``back``/``fwd`` bound the times it reads; ``batch`` returns NaN when the
    observation window censors the value.
    """

    name = "f"
    back = 0.0
    fwd = 0.0

    def __call__(self, zeta: PointMeasure) -> float:
        raise NotImplementedError

    def batch(self, ens: PointEnsemble) -> np.ndarray:
        return np.array([self(z) for z in ens], dtype=float)


class Tau(Functional):
    """``tau_j``, read up to ``fwd``."""

    def __init__(self, j: int = 1, fwd: float = math.inf):
        self.j, self.fwd = j, fwd
        self.name = f"tau{j}"

    def __call__(self, zeta):
        v = tau(zeta, self.j)
        return math.nan if v is None else v

    def batch(self, ens):
        return ens.tau(self.j)


class MinTau(Functional):
    """``min(tau_1, R)``; never censored when the window reaches ``R``."""

    def __init__(self, R: float):
        self.R = self.fwd = float(R)
        self.name = f"min(tau1,{R:g})"

    def __call__(self, zeta):
        v = tau(zeta, 1)
        if v is None:
            return self.R if zeta.window[1] >= self.R else math.nan
        return min(v, self.R)

    def batch(self, ens):
        t = ens.tau(1)
        out = np.minimum(t, self.R)
        miss = np.isnan(t)
        out[miss & (ens.hi >= self.R)] = self.R
        return out


class Void(Functional):
    """``1{count(zeta, 0, t) = 0}``."""

    def __init__(self, t: float):
        self.t = self.fwd = float(t)
        self.name = f"void(0,{t:g}]"

    def __call__(self, zeta):
        return float(count(zeta, 0.0, self.t) == 0)

    def batch(self, ens):
        return (ens.counts(0.0, self.t) == 0).astype(float)


class Survival(Functional):
    """``1{tau_j > R}``, i.e. fewer than ``j`` atoms in ``(0, R]``."""

    def __init__(self, j: int, R: float):
        self.j, self.R = j, float(R)
        self.fwd = self.R
        self.name = f"1{{tau{j}>{R:g}}}"

    def __call__(self, zeta):
        return float(count(zeta, 0.0, self.R) < self.j)

    def batch(self, ens):
        return (ens.counts(0.0, self.R) < self.j).astype(float)


class Constant(Functional):
    def __init__(self, c: float = 1.0):
        self.c = float(c)
        self.name = f"const{c:g}"

    def __call__(self, zeta):
        return self.c

    def batch(self, ens):
        return np.full(len(ens), self.c)


class FromCallable(Functional):
    def __init__(self, f: Callable[[PointMeasure], float], back: float = 0.0, fwd: float = 0.0, name: str = "f"):
        self.f, self.back, self.fwd, self.name = f, back, fwd, name

    def __call__(self, zeta):
        return float(self.f(zeta))


# --------------------------------------------------------------------------
# intensity and hit sets
# --------------------------------------------------------------------------


def estimate_intensity(ens: PointEnsemble) -> Estimate:
    """Mean of ``count(zeta, 0, R) / R`` over an ensemble with common window ``(0, R]``."""
    if len(ens) < 2:
        raise ValueError("need at least two samples")
    if np.any(ens.lo != ens.lo[0]) or np.any(ens.hi != ens.hi[0]):
        raise ValueError("mismatched windows")
    R = float(ens.hi[0] - ens.lo[0])
    return mean_se(ens.totals() / R, ens.weights)


def hit_steps(sys: BaseSystem, target: TargetSet, ys, n_max_steps: int, m_hits: int = 1) -> np.ndarray:
    """Step index of the ``m_hits``-th visit ``T^j y in D`` (``j >= 1``); ``n_max_steps + 1`` if none."""
    n = len(ys)
    out = np.full(n, n_max_steps + 1, dtype=np.int64)
    idx = np.arange(n)
    hits = np.zeros(n, dtype=np.int64)
    for j in range(1, n_max_steps + 1):
        ys = sys.step(ys)
        h = target.member(ys)
        hits[h] += 1
        done = hits >= m_hits
        if done.any():
            out[idx[done]] = j
            keep = ~done
            idx, ys, hits = idx[keep], ys[keep], hits[keep]
            if idx.size == 0:
                break
    return out


def _hit_fraction(steps: np.ndarray, n_max: int) -> HitEstimate:
    p = fsum_mean(steps <= n_max)
    return HitEstimate(p, binomial_se(p, steps.size), n_max_steps=n_max)


def _hit_replica(sys, target, n_max, m_hits, rng, count):
    return hit_steps(sys, target, sys.sample_mu(rng, count), n_max, m_hits)


def estimate_hit_probability(
    sys: BaseSystem, target: TargetSet, n_samples: int, n_max_steps: int, seed: int = 0, jobs: int = 1
) -> HitEstimate:
    """Lower bound for ``mu(Z1_D)``: orbits visiting ``D`` within ``n_max_steps`` steps."""
    if n_max_steps < 1:
        raise ValueError("n_max_steps must be >= 1")
    fn = partial(_hit_replica, sys, target, n_max_steps, 1)
    steps = np.concatenate(parallel.run_replicas(fn, n_samples, seed, "hit", target.name, jobs))
    return _hit_fraction(steps, n_max_steps)


def estimate_infinite_hit_probability(
    sys: BaseSystem, target: TargetSet, n_samples: int, n_max_steps: int, m_hits: int, seed: int = 0, jobs: int = 1
) -> HitEstimate:
    """Orbits visiting ``D`` at least ``m_hits`` times within ``n_max_steps`` (proxy for ``Z_inf``)."""
    if m_hits < 2:
        raise ValueError("m_hits must be >= 2")
    fn = partial(_hit_replica, sys, target, n_max_steps, m_hits)
    steps = np.concatenate(parallel.run_replicas(fn, n_samples, seed, "hit_inf", target.name, jobs))
    return _hit_fraction(steps, n_max_steps)


# --------------------------------------------------------------------------
# Palm distribution: definition-based estimator
# --------------------------------------------------------------------------


@dataclass
class AnchoredSample:
    """Copies ``theta^{tau_j} xi`` for every atom ``tau_j`` in ``B``."""

    ensemble: PointEnsemble
    realization: np.ndarray
    mult: np.ndarray
    n_realizations: int
    B: tuple[float, float]
    weights: np.ndarray | None = None


def _rank(g, t, qg, qv) -> np.ndarray:
    """Global index of the first atom of group ``qg`` with time ``> qv``."""
    G = np.concatenate([g, qg])
    V = np.concatenate([t, qv])
    typ = np.concatenate([np.zeros(g.size, np.int8), np.ones(qg.size, np.int8)])
    order = np.lexsort((typ, V, G))
    is_atom = typ[order] == 0
    before = np.cumsum(is_atom)
    out = np.empty(qg.size, dtype=np.int64)
    qpos = ~is_atom
    out[order[qpos] - g.size] = before[qpos]
    return out


def anchor(ens: PointEnsemble, B: tuple[float, float], back: float = 0.0, fwd: float = 0.0) -> AnchoredSample:
    """Shift each realization to every one of its atoms inside ``B = (b_lo, b_hi]``.

    The copy anchored at ``tau`` keeps the atoms in ``(tau - back, tau + fwd]``
    on the window ``(-back, fwd]``.
    """
    b_lo, b_hi = B
    if not b_lo < b_hi:
        raise ValueError("B must be a nonempty interval")
    if np.any(b_lo - back < ens.lo) or np.any(b_hi + fwd > ens.hi):
        raise WindowError("read radius exceeds window")
    g, t = ens.group, ens.times
    sel = (t > b_lo) & (t <= b_hi)
    ag, at = g[sel], t[sel]
    left = _rank(g, t, ag, at - back)
    right = _rank(g, t, ag, at + fwd)
    lens = right - left
    offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    flat = np.repeat(left - offsets[:-1], lens) + np.arange(offsets[-1])
    times = t[flat] - np.repeat(at, lens)
    lo = -back if back > 0 else 0.0
    shifted = PointEnsemble(lo, fwd, offsets, times, ens.mults[flat], validate=False)
    w = None if ens.weights is None else ens.weights
    return AnchoredSample(shifted, ag, ens.mults[sel], len(ens), (b_lo, b_hi), w)


def palm_from_definition(
    ens: PointEnsemble,
    f: Functional,
    B: tuple[float, float],
    intensity: float,
) -> CensoredEstimate:
    """``E sum_{tau_j in B} f(theta^{tau_j} xi) / (I |B|)`` averaged over realizations."""
    if not isinstance(f, Functional):
        raise TypeError("f must be a Functional (wrap callables with FromCallable)")
    a = anchor(ens, B, f.back, f.fwd)
    vals = f.batch(a.ensemble) * a.mult
    bad = np.isnan(vals)
    per = np.bincount(a.realization[~bad], weights=vals[~bad], minlength=a.n_realizations)
    per = per / (intensity * (B[1] - B[0]))
    est = mean_se(per, a.weights)
    return CensoredEstimate(est.value, est.se, censored=int(bad.sum()), samples=int(vals.size))


def palm_tau_law(a: AnchoredSample, j: int = 1) -> tuple[EmpiricalDistribution, int]:
    """Ratio-form empirical law of ``tau_j`` under the Palm measure; returns the censored count."""
    t = a.ensemble.tau(j)
    bad = np.isnan(t)
    w = a.mult.astype(float) if a.weights is None else a.mult * a.weights[a.realization]
    return EmpiricalDistribution(t[~bad], w[~bad]), int(bad.sum())


# --------------------------------------------------------------------------
# Palm distribution: return-based estimator
# --------------------------------------------------------------------------


def _return_replica(sys, target, horizon, max_atoms, rng, n):
    ys, _ = sample_target(sys, target, rng, n)
    return return_ensemble(sys, target, ys, horizon, max_atoms)


def _returns(sys, target, n_samples, horizon, seed, jobs, max_atoms=None, experiment="returns"):
    fn = partial(_return_replica, sys, target, horizon, max_atoms)
    return PointEnsemble.concat(parallel.run_replicas(fn, n_samples, seed, experiment, target.name, jobs))


def palm_from_returns(
    sys: BaseSystem,
    target: TargetSet,
    f: Functional,
    n_samples: int,
    horizon: float,
    seed: int = 0,
    jobs: int = 1,
) -> CensoredEstimate:
    """Average of ``f(P(y, 0))`` over ``y ~ mu`` conditioned on ``D``; ``f`` reads positive times only."""
    if f.back > 0:
        raise ValueError("return processes only observe positive times")
    if math.isfinite(f.fwd) and f.fwd > horizon:
        raise WindowError("read radius exceeds window")
    ens = _returns(sys, target, n_samples, horizon, seed, jobs)
    vals = f.batch(ens)
    bad = np.isnan(vals)
    est = mean_se(vals[~bad])
    return CensoredEstimate(est.value, est.se, censored=int(bad.sum()), samples=int(vals.size))


# --------------------------------------------------------------------------
# sources of (stationary, Palm) ensemble pairs
# --------------------------------------------------------------------------


class ProcessSource:
    """Generates stationary and Palm ensembles on ``(0, horizon]``."""

    name = "source"
    horizon = 1.0
    palm_method = "unknown"

    def intensity(self) -> Estimate:
        raise NotImplementedError

    def entry_ensemble(self, rng, n) -> PointEnsemble:
        raise NotImplementedError

    def palm_ensemble(self, rng, n) -> PointEnsemble:
        raise NotImplementedError


class SuspensionSource(ProcessSource):
    """Entry times from ``x ~ nu``; Palm samples are return processes."""

    palm_method = "returns"

    def __init__(self, system: BaseSystem, target: TargetSet, horizon: float, max_atoms: int | None = None):
        self.system, self.target = system, target
        self.horizon = float(horizon)
        self.max_atoms = max_atoms
        self.name = f"{system.name}/{target.name}"

    def intensity(self) -> Estimate:
        if self.target.measure is None or self.system.mean_roof is None:
            raise ValueError("intensity needs declared mu(D) and mean roof")
        return Estimate(self.target.measure / self.system.mean_roof, 0.0)

    def entry_ensemble(self, rng, n):
        nu = sample_nu_batch(self.system, rng, n)
        return entry_ensemble(self.system, self.target, nu.ys, nu.ss, self.horizon, self.max_atoms, nu.weights)

    def palm_ensemble(self, rng, n):
        ys, _ = sample_target(self.system, self.target, rng, n)
        return return_ensemble(self.system, self.target, ys, self.horizon, self.max_atoms)


class PoissonSource(ProcessSource):
    """Homogeneous Poisson process; Palm samples come from the definition.

    Each Palm replica anchors independent realizations on ``(0, horizon + 1/lam]``
    at their atoms in ``B = (0, 1/lam]``, so about one Palm sample per realization.
    """

    palm_method = "definition"

    def __init__(self, lam: float, horizon: float):
        if not lam > 0:
            raise ValueError("Poisson intensity must be positive")
        self.lam, self.horizon = float(lam), float(horizon)
        self.name = f"poisson({lam:g})"

    def intensity(self):
        return Estimate(self.lam, 0.0)

    def entry_ensemble(self, rng, n):
        return poisson_ensemble(self.lam, rng, n, 0.0, self.horizon)

    def palm_ensemble(self, rng, n):
        b = 1.0 / self.lam
        ens = poisson_ensemble(self.lam, rng, n, 0.0, self.horizon + b)
        return anchor(ens, (0.0, b), 0.0, self.horizon).ensemble


class LatticeSource(ProcessSource):
    """Stationary lattice-cluster process with its analytic Palm generator."""

    palm_method = "analytic"

    def __init__(self, p: LatticeClusterParams, horizon: float):
        self.p, self.horizon = p, float(horizon)
        self.name = f"lattice_cluster(n={p.n},a={p.a:g})"

    def intensity(self):
        return Estimate(1.0, 0.0)

    def entry_ensemble(self, rng, n):
        return lattice_cluster_ensemble(self.p, rng, n, 0.0, self.horizon)

    def palm_ensemble(self, rng, n):
        return lattice_palm_ensemble(self.p, rng, n, 0.0, self.horizon)


def _gen(source: ProcessSource, which: str, rng, n):
    return getattr(source, which)(rng, n)


def generate(source: ProcessSource, which: str, n: int, seed: int = 0, jobs: int = 1) -> PointEnsemble:
    """Concatenated replicas of ``source.entry_ensemble`` or ``source.palm_ensemble``."""
    parts = parallel.run_replicas(partial(_gen, source, which), n, seed, source.name, which, jobs)
    return PointEnsemble.concat(parts)


# --------------------------------------------------------------------------
# identity checks
# --------------------------------------------------------------------------


def _palm_tau(palm: PointEnsemble, j: int):
    """``tau_j`` of Palm samples with censored values pushed to the window end."""
    if j == 0:
        return np.zeros(len(palm)), 0
    t = palm.tau(j)
    bad = np.isnan(t)
    t[bad] = palm.hi[bad]
    return t, int(bad.sum())


def _censor_warnings(counts: dict[str, int], sizes: dict[str, int]) -> list[str]:
    out = []
    for key, c in counts.items():
        n = sizes.get(key.split(":")[0], 0)
        if n and c / n > CENSOR_WARN:
            out.append(f"censoring above 1%: {key} {c}/{n}")
    return out


def _survival_lhs(entry: PointEnsemble, j: int, R: float) -> Estimate:
    """``P(tau_j(xi) > R | xi != 0)`` from an entry ensemble."""
    nz = entry.nonempty()
    tj = entry.tau(j)
    ind = (np.isnan(tj) | (tj > R))[nz].astype(float)
    w = None if entry.weights is None else entry.weights[nz]
    return mean_se(ind, w)


def higher_order_check(
    source: ProcessSource,
    j: int,
    R_grid: Sequence[float],
    n_samples: int,
    seed: int = 0,
    jobs: int = 1,
    k_sigma: float = 3.0,
    tolerance: float | None = None,
    entry: PointEnsemble | None = None,
    palm: PointEnsemble | None = None,
) -> list[IdentityReport]:
    """``P(tau_j(xi) > R | xi != 0)`` against
    ``(1/E tau_1(eta)) int_R^inf [P(tau_j(eta) > u) - P(tau_{j-1}(eta) > u)] du``.

    Survival integrals are exact for the empirical step functions:
    ``int_R^inf P(X > u) du = E (X - R)^+``.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    entry = generate(source, "entry_ensemble", n_samples, seed, jobs) if entry is None else entry
    palm = generate(source, "palm_ensemble", n_samples, seed, jobs) if palm is None else palm
    t1, c1 = _palm_tau(palm, 1)
    tj, cj = _palm_tau(palm, j)
    tjm, _ = _palm_tau(palm, j - 1)
    mean1 = fsum_mean(t1)
    if not mean1 > 0:
        raise ValueError("E tau_1(eta) estimate must be positive")
    nz = int(entry.nonempty().sum())
    sizes = {"entry": len(entry), "entry_nonzero": nz, "palm": len(palm)}
    censoring = {"palm:tau1": c1, f"palm:tau{j}": cj, "entry:empty": len(entry) - nz}
    label = "palm_khinchin" if j == 1 else f"higher_order_j{j}"
    warns = _censor_warnings({k: v for k, v in censoring.items() if k.startswith("palm")}, sizes)
    reports = []
    for R in R_grid:
        lhs = _survival_lhs(entry, j, R)
        num = np.maximum(tj - R, 0.0) - np.maximum(tjm - R, 0.0)
        rhs = ratio_se(num, t1)
        reports.append(
            make_report(
                f"{label}[R={R:g}]",
                lhs,
                rhs,
                k_sigma=k_sigma,
                tolerance=tolerance,
                sample_sizes=sizes,
                censoring=censoring,
                warnings=warns,
                details={"R": float(R), "mean_tau1_eta": mean1, "source": source.name},
            )
        )
    return reports


def palm_khinchin_check(source: ProcessSource, R_grid, n_samples, seed=0, jobs=1, **kw) -> list[IdentityReport]:
    """``P(tau_1(xi) > R | xi != 0) = (1/E tau_1(eta)) int_R^inf P(tau_1(eta) > u) du``."""
    return higher_order_check(source, 1, R_grid, n_samples, seed, jobs, **kw)


def inversion_check(
    source: ProcessSource,
    R_grid: Sequence[float],
    n_samples: int,
    seed: int = 0,
    jobs: int = 1,
    k_sigma: float = 3.0,
    tolerance: float | None = None,
    entry: PointEnsemble | None = None,
    palm: PointEnsemble | None = None,
) -> list[IdentityReport]:
    """``E[f(xi) 1{xi != 0}] = I E int_0^{tau_1(eta)} f(theta^u eta) du``.

    Checked for ``f = 1`` and for ``f = 1{tau_1 > R}``; for the latter the
    inner integral is ``(tau_1(eta) - R)^+`` exactly.
    """
    entry = generate(source, "entry_ensemble", n_samples, seed, jobs) if entry is None else entry
    palm = generate(source, "palm_ensemble", n_samples, seed, jobs) if palm is None else palm
    I = source.intensity()
    t1, c1 = _palm_tau(palm, 1)
    nz = entry.nonempty()
    e1 = entry.tau(1)
    sizes = {"entry": len(entry), "palm": len(palm)}
    censoring = {"palm:tau1": c1}
    warns = _censor_warnings(censoring, sizes)

    def rhs_of(vals):
        m = mean_se(vals)
        return Estimate(I.value * m.value, combined_se(I.value * m.se, m.value * I.se))

    reports = [
        make_report(
            "inversion[f=1]",
            mean_se(nz.astype(float), entry.weights),
            rhs_of(t1),
            k_sigma=k_sigma,
            tolerance=tolerance,
            sample_sizes=sizes,
            censoring=censoring,
            warnings=warns,
            details={"intensity": I.value, "source": source.name},
        )
    ]
    for R in R_grid:
        lhs_vals = (nz & (e1 > R)).astype(float)
        reports.append(
            make_report(
                f"inversion[R={R:g}]",
                mean_se(lhs_vals, entry.weights),
                rhs_of(np.maximum(t1 - R, 0.0)),
                k_sigma=k_sigma,
                tolerance=tolerance,
                sample_sizes=sizes,
                censoring=censoring,
                warnings=warns,
                details={"R": float(R), "intensity": I.value, "source": source.name},
            )
        )
    return reports


def _kac_replica(sys, target, n_max, rng, count):
    ys = sys.sample_mu(rng, count)
    r = sys.roof(ys)
    return hit_steps(sys, target, ys, n_max, 1), r


def kac_check(
    sys: BaseSystem,
    target: TargetSet,
    n_samples: int,
    n_max_steps: int,
    horizon: float,
    seed: int = 0,
    jobs: int = 1,
    k_sigma: float = 3.0,
    tolerance: float | None = None,
) -> IdentityReport:
    """Mean return time against ``P(xi != 0) / I = mu(r 1_{Z1_D}) / mu(D)``.

    For a constant roof the right side is ``mean_r * mu(Z1_D) / mu(D)``.  The
    orbit cutoff makes it a lower bound; the report requires stabilization
    between ``n_max_steps`` and ``2 n_max_steps`` (relative change below 1e-3)
    and adds the observed increment as a bias allowance.
    """
    if target.measure is None:
        raise ValueError("kac_check needs a declared mu(D)")
    if sys.mean_roof is None:
        raise ValueError("kac_check needs a declared mean roof")
    ret = _returns(sys, target, n_samples, horizon, seed, jobs, max_atoms=1, experiment="kac")
    t1 = ret.tau(1)
    bad = np.isnan(t1)
    lhs = mean_se(t1[~bad])
    fn = partial(_kac_replica, sys, target, 2 * n_max_steps)
    parts = parallel.run_replicas(fn, n_samples, seed, "kac_z1", target.name, jobs)
    steps = np.concatenate([p[0] for p in parts])
    r = np.concatenate([p[1] for p in parts])
    z1 = _hit_fraction(steps, n_max_steps)
    z2 = _hit_fraction(steps, 2 * n_max_steps)
    rel = (z2.value - z1.value) / z2.value if z2.value > 0 else math.inf
    rz1 = mean_se(r * (steps <= n_max_steps))
    rz2 = fsum_mean(r * (steps <= 2 * n_max_steps))
    rhs = Estimate(rz1.value / target.measure, rz1.se / target.measure)
    bias = (rz2 - rz1.value) / target.measure
    stable = rel < 1e-3
    sizes = {"returns": len(ret), "z1": int(steps.size)}
    censoring = {"returns": int(bad.sum())}
    warns = _censor_warnings(censoring, sizes)
    if not stable:
        warns.append(f"mu(Z1) not stabilized: relative change {rel:.3g}")
    return make_report(
        "kac",
        lhs,
        rhs,
        k_sigma=k_sigma,
        bias=bias,
        tolerance=tolerance,
        extra_ok=stable,
        sample_sizes=sizes,
        censoring=censoring,
        warnings=warns,
        details={
            "mu_Z1": z1.value,
            "mu_Z1_se": z1.se,
            "mu_Z1_2n": z2.value,
            "mu_Z1_lower_bound": True,
            "mu_D": target.measure,
            "mean_roof": sys.mean_roof,
            "constant_roof_rhs": sys.mean_roof * z1.value / target.measure,
            "n_max_steps": n_max_steps,
            "stabilized": stable,
        },
    )


def palm_compare(
    sys: BaseSystem,
    target: TargetSet,
    functionals: Sequence[Functional],
    n_samples: int,
    seed: int = 0,
    jobs: int = 1,
    k_sigma: float = 3.0,
    B_len: float | None = None,
) -> list[IdentityReport]:
    """Definition-based Palm expectations against return-based ones, per functional.

    The stationary ensemble lives on ``(0, |B| + fwd]`` with ``B = (0, |B|]``,
    sized so it yields about ``n_samples`` anchors.  Values censored by the
    read radius count as 0 on both sides.
    """
    fwd = max(f.fwd for f in functionals)
    if not math.isfinite(fwd):
        raise ValueError("functionals need a finite read radius")
    if target.measure is None or sys.mean_roof is None:
        raise ValueError("palm_compare needs the declared intensity")
    I = target.measure / sys.mean_roof
    B_len = fwd if B_len is None else B_len
    n_real = max(2, int(math.ceil(n_samples / (I * B_len))))
    entry_src = SuspensionSource(sys, target, B_len + fwd)
    entry = generate(entry_src, "entry_ensemble", n_real, seed, jobs)
    ret = _returns(sys, target, n_samples, fwd, seed, jobs, experiment="palm_compare")
    reports = []
    for f in functionals:
        d = palm_from_definition(entry, f, (0.0, B_len), I)
        vals = f.batch(ret)
        bad = np.isnan(vals)
        # censored values count as 0 on both sides, so each estimates Q[f; observed]
        r = mean_se(np.where(bad, 0.0, vals))
        reports.append(
            make_report(
                f"palm_compare[{sys.name}/{target.name}:{f.name}]",
                d,
                r,
                k_sigma=k_sigma,
                sample_sizes={"definition_realizations": len(entry), "definition_anchors": d.samples,
                              "returns": len(ret)},
                censoring={"definition": d.censored, "returns": int(bad.sum())},
                details={"read_radius": fwd, "B": [0.0, B_len], "intensity": I},
            )
        )
    return reports


def slivnyak_check(
    lam: float, n_samples: int, horizon: float = 50.0, seed: int = 0, jobs: int = 1, confidence: float = 0.999
) -> IdentityReport:
    """Palm law of a homogeneous Poisson process estimated from the definition.

    Realizations on ``(0, horizon]`` are anchored at atoms in
    ``B = (0.1 H, 0.5 H]`` (read span ``(-0.1 H, 0.5 H]``).  Passes when the
    empirical CDF of ``tau_1(eta)`` lies in the DKW band around
    ``1 - exp(-lam u)`` and ``eta{0} = 1`` for every sample.
    """
    H = float(horizon)
    back, fwd = 0.1 * H, 0.5 * H
    B = (back, H - fwd)
    n_real = max(2, int(math.ceil(n_samples / (lam * (B[1] - B[0])))))
    src = PoissonSource(lam, H)
    ens = generate(src, "entry_ensemble", n_real, seed, jobs)
    a = anchor(ens, B, back, fwd)
    law, censored = palm_tau_law(a, 1)
    ks = law.sup_distance(lambda u: 1.0 - np.exp(-lam * np.asarray(u)))
    eps = dkw_epsilon(len(law), confidence)
    at0 = a.ensemble.counts(-1e-300, 0.0) if len(a.ensemble) else np.zeros(0)
    zero_ok = bool(np.all(at0 == 1))
    c1 = a.ensemble.counts(0.0, 1.0 / lam)
    return make_report(
        "slivnyak",
        Estimate(ks, 0.0),
        Estimate(0.0, 0.0),
        tolerance=eps,
        extra_ok=zero_ok and censored == 0,
        sample_sizes={"realizations": len(ens), "palm_samples": len(law)},
        censoring={"tau1": censored},
        details={
            "dkw_epsilon": eps,
            "confidence": confidence,
            "eta_zero_all_one": zero_ok,
            "mean_tau1": law.mean(),
            "median_tau1": law.quantile(0.5),
            "mean_count_0_1/lam": fsum_mean(c1),
            "expected_mean_tau1": 1.0 / lam,
            "expected_median_tau1": math.log(2.0) / lam,
        },
    )
