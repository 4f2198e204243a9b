"""Shrinking-target families and the entry/return convergence checks.

Convergence in distribution of point processes is tested through a proxy:
count laws on a fixed, finite family of windows.  Stationary samples are kept
on ``(-5, H]`` (one-sided entry processes are shifted, which leaves their law
unchanged); Palm samples are two-sided only when the family has an analytic
Palm generator.
"""

from __future__ import annotations

import csv
import io
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Sequence

import numpy as np

from . import parallel
from .palm import IdentityReport, make_report
from .point_measure import PointEnsemble
from .stats import EmpiricalDistribution, Estimate, binomial_se, combined_se, fsum_mean, mean_se, ratio_se
from .suspension import (
    BaseSystem,
    TargetSet,
    entry_ensemble,
    intensity_scale,
    return_ensemble,
    sample_nu_batch,
    sample_target,
)
from .zoo import (
    BernoulliShift,
    CircleTarget,
    CylinderTarget,
    LatticeClusterParams,
    TwoCircle,
    TwoCircleParams,
    lattice_cluster_ensemble,
    lattice_palm_ensemble,
    lattice_mean_tau1,
    lattice_tau1_law,
    poisson_ensemble,
)

PROXY_WINDOWS = ((-1.0, 0.0), (0.0, 1.0), (0.0, 5.0), (-5.0, 5.0))
EXTRA_XI_WINDOWS = ((0.0, 2.0),)
ETA_MASS_WINDOW = (-1.0, 1.0)
LEAD = 5.0

CAVEAT = (
    "count laws on finitely many windows are a necessary proxy for convergence "
    "in distribution, not a proof"
)


def _wkey(w) -> str:
    return f"({w[0]:g},{w[1]:g}]"


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------


class Member(ABC):
    """Index ``n`` of a family: stationary and Palm generators in rescaled time."""

    n: int
    exact_intensity: float | None = None
    exact_tau1_law: dict | None = None
    exact_mean_tau1: float | None = None
    min_horizon: float = 0.0
    eta_lo: float = 0.0

    @abstractmethod
    def xi(self, rng, count: int, H: float) -> PointEnsemble:
        """Stationary samples on ``(-LEAD, hi]`` with ``hi >= H``."""

    @abstractmethod
    def eta(self, rng, count: int, H: float) -> PointEnsemble:
        """Palm samples on ``(eta_lo, hi]`` with ``hi >= H``."""


class Family(ABC):
    name = "family"
    palm_source = "unknown"
    rescaled = True
    replica_size = parallel.REPLICA_SIZE

    @abstractmethod
    def member(self, n: int) -> Member: ...

    def describe(self) -> dict:
        return {"name": self.name, "palm_source": self.palm_source, "rescaled": self.rescaled}


class SuspensionMember(Member):
    """Entry times from ``nu`` and return times from ``mu|D``, both scaled by the intensity."""

    def __init__(self, n: int, system: BaseSystem, target: TargetSet, rescale: bool = True):
        if target.measure is not None and target.measure <= 0:
            raise ValueError("zero-measure target")
        self.n, self.system, self.target = n, system, target
        self.c = intensity_scale(system, target) if rescale else 1.0
        self.exact_intensity = 1.0 if rescale else intensity_scale(system, target)

    def xi(self, rng, count, H):
        nu = sample_nu_batch(self.system, rng, count)
        raw = entry_ensemble(self.system, self.target, nu.ys, nu.ss, (H + LEAD) / self.c, None, nu.weights)
        return raw.scale(self.c).shift(LEAD)

    def eta(self, rng, count, H):
        ys, _ = sample_target(self.system, self.target, rng, count)
        return return_ensemble(self.system, self.target, ys, H / self.c).scale(self.c)


class SuspensionFamily(Family):
    palm_source = "return process"

    def __init__(self, name: str, make, rescale: bool = True):
        """``make(n) -> (system, target)``."""
        self.name, self._make, self.rescaled = name, make, rescale

    def member(self, n):
        sys, target = self._make(n)
        return SuspensionMember(n, sys, target, self.rescaled)


def _generic_word(n: int) -> str:
    bits = np.random.default_rng(20_240_601).integers(0, 2, size=max(n, 1))
    return "".join(str(int(b)) for b in bits[:n])


def bernoulli_family(word: str = "generic") -> SuspensionFamily:
    """Depth-``n`` cylinders: ``word = "zeros"`` (periodic point) or ``"generic"``."""
    if word not in ("generic", "zeros"):
        raise ValueError("word must be 'generic' or 'zeros'")
    sys = BernoulliShift()

    def make(n):
        w = "0" * n if word == "zeros" else _generic_word(n)
        return sys, CylinderTarget(w)

    return SuspensionFamily(f"bernoulli[{word}]", make)


def two_circle_family(p: TwoCircleParams = TwoCircleParams()) -> SuspensionFamily:
    """Constant family: the same two-circle system and ``D = {1}`` for every ``n``."""
    sys = TwoCircle(p)
    return SuspensionFamily("two_circle[constant]", lambda n: (sys, CircleTarget(1, p.q1)))


class LatticeMember(Member):
    def __init__(self, n: int, a: float | None):
        self.n = n
        self.p = LatticeClusterParams(n, a)
        self.exact_intensity = 1.0
        self.exact_tau1_law = lattice_tau1_law(self.p)
        self.exact_mean_tau1 = lattice_mean_tau1(self.p)
        self.min_horizon = float(self.p.period)
        self.eta_lo = -LEAD

    def _hi(self, H):
        P = self.p.period
        return P * math.ceil((max(H, P) + LEAD) / P) - LEAD

    def xi(self, rng, count, H):
        return lattice_cluster_ensemble(self.p, rng, count, -LEAD, self._hi(H))

    def eta(self, rng, count, H):
        return lattice_palm_ensemble(self.p, rng, count, -LEAD, self._hi(H))


class LatticeFamily(Family):
    """Clusters of ``2n+1`` atoms spaced ``a_n`` on a lattice of period ``2n+1``."""

    name = "lattice_cluster"
    palm_source = "analytic Palm generator"
    rescaled = False
    replica_size = 1000

    def __init__(self, a: float | None = None):
        self.a = a

    def member(self, n):
        return LatticeMember(n, self.a)

    def mass_bound(self, n: int) -> int:
        a = LatticeClusterParams(n, self.a).a
        return min(int(math.floor(1.0 / a)), n)


class PoissonMember(Member):
    def __init__(self, n: int, lam: float):
        self.n, self.lam = n, lam
        self.exact_intensity = lam
        self.eta_lo = -LEAD

    def xi(self, rng, count, H):
        return poisson_ensemble(self.lam, rng, count, -LEAD, H)

    def eta(self, rng, count, H):
        # Palm version of a Poisson process: the process itself plus an atom at 0
        base = poisson_ensemble(self.lam, rng, count, -LEAD, H)
        times = np.concatenate([base.times, np.zeros(count)])
        group = np.concatenate([base.group, np.arange(count)])
        return PointEnsemble.from_groups(group, times, count, -LEAD, H, validate=False)


class PoissonFamily(Family):
    name = "poisson[constant]"
    palm_source = "analytic Palm generator (Poisson plus an atom at 0)"
    rescaled = False

    def __init__(self, lam: float = 1.0):
        if not lam > 0:
            raise ValueError("Poisson intensity must be positive")
        self.lam = float(lam)

    def member(self, n):
        return PoissonMember(n, self.lam)


FAMILIES = {
    "lattice_cluster": lambda **kw: LatticeFamily(kw.get("a")),
    "bernoulli": lambda **kw: bernoulli_family(kw.get("word", "generic")),
    "poisson": lambda **kw: PoissonFamily(kw.get("lam", 1.0)),
    "two_circle": lambda **kw: two_circle_family(
        TwoCircleParams(kw.get("q1", 0.5), kw.get("ell0", 1.0), kw.get("ell1", 2.0))
    ),
}


def make_family(kind: str, **params) -> Family:
    if kind not in FAMILIES:
        raise ValueError(f"unknown family {kind!r}; choose from {sorted(FAMILIES)}")
    return FAMILIES[kind](**params)


# --------------------------------------------------------------------------
# running a family
# --------------------------------------------------------------------------


def _xi_summary(member: Member, H, windows, rng, count):
    ens = member.xi(rng, count, H)
    return {
        "tau1": ens.tau(1),
        "nonzero": ens.counts(0.0, float(ens.hi.min())) > 0,
        "rate": ens.totals() / (ens.hi - ens.lo),
        "weights": ens.weights,
        "counts": {_wkey(w): ens.counts(*w) for w in windows},
        "hi": float(ens.hi.min()),
    }


def _eta_summary(member: Member, H, windows, rng, count):
    ens = member.eta(rng, count, H)
    t = ens.tau(1)
    t[np.isnan(t)] = np.inf
    return {
        "tau1": t,
        "counts": {_wkey(w): ens.counts(*w) for w in windows},
        "hi": float(ens.hi.min()),
    }


def _histogram(values: np.ndarray, weights=None) -> list[float]:
    if values.size == 0:
        return [1.0]
    h = np.bincount(values.astype(np.int64), weights=weights)
    return list(h / h.sum())


@dataclass
class IndexResult:
    """Everything recorded for one index ``n`` of a family."""

    n: int
    intensity: Estimate
    p_nonzero: Estimate
    tau1_xi: EmpiricalDistribution
    tau1_eta: EmpiricalDistribution
    mean_tau1_eta: Estimate
    tau1_eta_raw: np.ndarray = field(repr=False)
    xi_counts: dict[str, list[float]]
    eta_counts: dict[str, list[float]]
    eta_count_min: dict[str, int]
    n_xi: int
    n_eta: int
    censored_eta: int
    horizon: float
    exact_tau1_law: dict | None = None
    weights_nonzero: np.ndarray | None = field(default=None, repr=False)

    @property
    def censor_frac(self) -> float:
        return self.censored_eta / self.n_eta if self.n_eta else 0.0

    def mean_min_tau1_eta(self, R: float) -> Estimate:
        """``E min(tau_1(eta_n), R)``; exact when the law is known."""
        if self.exact_tau1_law is not None:
            return Estimate(math.fsum(float(p) * min(v, R) for v, p in self.exact_tau1_law.items()), 0.0)
        if R > self.horizon:
            raise ValueError("R exceeds the observed horizon")
        return mean_se(np.minimum(self.tau1_eta_raw, R))

    def p_tau1_xi_le(self, R: float) -> Estimate:
        """``P(tau_1(xi_n) <= R | xi_n != 0)``."""
        n = len(self.tau1_xi)
        if n == 0:
            return Estimate(0.0, 0.0)
        p = float(self.tau1_xi.cdf(R))
        return Estimate(p, binomial_se(p, n))

    def to_dict(self) -> dict:
        qs = (0.1, 0.25, 0.5, 0.75, 0.9)

        def summary(d: EmpiricalDistribution):
            if len(d) == 0:
                return {"n": 0}
            return {"n": len(d), "mean": d.mean(), "quantiles": {str(q): d.quantile(q) for q in qs}}

        out = {
            "n": self.n,
            "intensity": self.intensity.to_dict(),
            "p_nonzero": self.p_nonzero.to_dict(),
            "mean_tau1_eta": self.mean_tau1_eta.to_dict(),
            "tau1_xi_given_nonzero": summary(self.tau1_xi),
            "tau1_eta": summary(self.tau1_eta),
            "xi_count_laws": self.xi_counts,
            "eta_count_laws": self.eta_counts,
            "eta_count_min": self.eta_count_min,
            "samples": {"xi": self.n_xi, "eta": self.n_eta},
            "censoring": {"eta_tau1": self.censored_eta, "censor_frac": self.censor_frac},
            "horizon": self.horizon,
        }
        if self.exact_tau1_law is not None:
            out["exact_tau1_eta_law"] = [[v, str(p)] for v, p in sorted(self.exact_tau1_law.items())]
        return out


@dataclass
class FamilyResult:
    family: dict
    results: list[IndexResult]
    xi_windows: list[tuple[float, float]]
    eta_windows: list[tuple[float, float]]

    @property
    def n_list(self) -> list[int]:
        return [r.n for r in self.results]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "xi_windows": [list(w) for w in self.xi_windows],
            "eta_windows": [list(w) for w in self.eta_windows],
            "per_n": [r.to_dict() for r in self.results],
        }

    CSV_COLUMNS = ("n", "intensity", "intensity_se", "p_nonzero", "mean_tau1_eta", "mean_tau1_eta_se", "censor_frac")

    def csv_rows(self) -> list[list]:
        return [
            [r.n, r.intensity.value, r.intensity.se, r.p_nonzero.value, r.mean_tau1_eta.value, r.mean_tau1_eta.se,
             r.censor_frac]
            for r in self.results
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for row in self.csv_rows():
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
        return buf.getvalue()


def run_family(
    family: Family,
    n_list: Sequence[int],
    samples: int,
    horizon: float = 10.0,
    seed: int = 0,
    jobs: int = 1,
) -> FamilyResult:
    """Simulate stationary and Palm ensembles for every ``n`` and record the laws."""
    if not horizon > LEAD:
        raise ValueError(f"horizon must exceed {LEAD}")
    xi_windows = list(PROXY_WINDOWS) + list(EXTRA_XI_WINDOWS)
    results = []
    eta_windows = None
    for n in n_list:
        member = family.member(n)
        H = max(float(horizon), member.min_horizon)
        ew = [w for w in PROXY_WINDOWS if w[0] >= member.eta_lo]
        if member.eta_lo < ETA_MASS_WINDOW[0]:
            ew.append(ETA_MASS_WINDOW)
        eta_windows = ew if eta_windows is None else [w for w in eta_windows if w in ew]
        exp = f"converge/{family.name}/{n}"
        xs = parallel.run_replicas(
            partial(_xi_summary, member, H, xi_windows), samples, seed, exp, "xi", jobs, family.replica_size
        )
        es = parallel.run_replicas(
            partial(_eta_summary, member, H, ew), samples, seed, exp, "eta", jobs, family.replica_size
        )
        tau_xi = np.concatenate([x["tau1"] for x in xs])
        nonzero = np.concatenate([x["nonzero"] for x in xs])
        rate = np.concatenate([x["rate"] for x in xs])
        w = None if xs[0]["weights"] is None else np.concatenate([x["weights"] for x in xs])
        tau_eta = np.concatenate([e["tau1"] for e in es])
        fin = np.isfinite(tau_eta)
        if member.exact_intensity is not None and member.exact_intensity == 0:
            raise ValueError("zero-measure target")
        intensity = mean_se(rate, w)
        p_nz = mean_se(nonzero.astype(float), w)
        if member.exact_mean_tau1 is not None:
            mean_eta = Estimate(member.exact_mean_tau1, 0.0)
        elif member.exact_tau1_law is not None:
            mean_eta = Estimate(math.fsum(float(p) * v for v, p in member.exact_tau1_law.items()), 0.0)
        else:
            mean_eta = mean_se(np.where(fin, tau_eta, H))
        wnz = None if w is None else w[nonzero]
        results.append(
            IndexResult(
                n=n,
                intensity=intensity,
                p_nonzero=p_nz,
                tau1_xi=EmpiricalDistribution(tau_xi[nonzero], wnz),
                tau1_eta=EmpiricalDistribution(tau_eta[fin]),
                mean_tau1_eta=mean_eta,
                tau1_eta_raw=tau_eta,
                xi_counts={
                    _wkey(win): _histogram(np.concatenate([x["counts"][_wkey(win)] for x in xs]), w)
                    for win in xi_windows
                },
                eta_counts={
                    _wkey(win): _histogram(np.concatenate([e["counts"][_wkey(win)] for e in es])) for win in ew
                },
                eta_count_min={_wkey(win): int(min(e["counts"][_wkey(win)].min() for e in es)) for win in ew},
                n_xi=int(tau_xi.size),
                n_eta=int(tau_eta.size),
                censored_eta=int((~fin).sum()),
                horizon=H,
                exact_tau1_law=member.exact_tau1_law,
                weights_nonzero=wnz,
            )
        )
    desc = family.describe()
    if isinstance(family, LatticeFamily):
        desc["a"] = "1/(n+1)" if family.a is None else family.a
    return FamilyResult(desc, results, xi_windows, eta_windows or [])


# --------------------------------------------------------------------------
# candidate limit laws rho on [0, inf)
# --------------------------------------------------------------------------


class LimitLaw(ABC):
    name = "rho"

    @abstractmethod
    def integral_min(self, R: float) -> float:
        """``int min(u, R) rho(du) = int_0^R F(u) du``."""

    @abstractmethod
    def survival(self, R: float) -> float:
        """``F(R) = rho((R, inf))``."""


class DiracLaw(LimitLaw):
    def __init__(self, x: float = 0.0):
        if not x >= 0:
            raise ValueError("rho must be a probability law on [0, inf)")
        self.x = float(x)
        self.name = f"dirac({x:g})"

    def integral_min(self, R):
        return min(self.x, R)

    def survival(self, R):
        return float(self.x > R)


class ExponentialLaw(LimitLaw):
    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("rho must be a probability law on [0, inf)")
        self.rate = float(rate)
        self.name = f"exp({rate:g})"

    def integral_min(self, R):
        return -math.expm1(-self.rate * R) / self.rate

    def survival(self, R):
        return math.exp(-self.rate * R)


class DiscreteLaw(LimitLaw):
    def __init__(self, values: Sequence[float], probs: Sequence[float]):
        v = np.asarray(values, dtype=float)
        p = np.asarray(probs, dtype=float)
        if v.shape != p.shape or np.any(v < 0) or np.any(p < 0) or abs(math.fsum(p) - 1.0) > 1e-9:
            raise ValueError("rho must be a probability law on [0, inf)")
        self.values, self.probs = v, p
        self.name = "discrete"

    def integral_min(self, R):
        return math.fsum(self.probs * np.minimum(self.values, R))

    def survival(self, R):
        return math.fsum(self.probs[self.values > R])


def parse_limit_law(spec: str) -> LimitLaw:
    """``dirac:X``, ``exp:RATE`` or ``discrete:v1@p1,v2@p2``."""
    kind, _, arg = spec.partition(":")
    if kind == "dirac":
        return DiracLaw(float(arg or 0.0))
    if kind == "exp":
        return ExponentialLaw(float(arg or 1.0))
    if kind == "discrete":
        pairs = [s.split("@") for s in arg.split(",") if s]
        return DiscreteLaw([float(a) for a, _ in pairs], [float(Fraction(b)) for _, b in pairs])
    raise ValueError(f"unknown limit law {spec!r}")


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------


def _trend_ok(ds: list[float], ses: list[float], k: float = 3.0) -> bool:
    """Discrepancies nonincreasing along ``n`` up to ``k`` standard errors."""
    return all(ds[i + 1] <= ds[i] + k * combined_se(ses[i], ses[i + 1]) for i in range(len(ds) - 1))


def check_equivalence(
    fr: FamilyResult, rho: LimitLaw, R_grid: Sequence[float], tolerance: float = 0.05, k_sigma: float = 3.0
) -> list[IdentityReport]:
    """Both limit statements against ``rho``, per ``R``.

    Side (i) is ``E tau_1(eta_n) P(tau_1(xi_n) <= R | xi_n != 0)`` and side (ii)
    ``E min(tau_1(eta_n), R)``; both should approach ``int_0^R F``.
    A report passes when the last discrepancy is within ``tolerance`` and the
    discrepancies do not increase along ``n`` beyond ``k_sigma`` standard errors.
    """
    if not isinstance(rho, LimitLaw):
        raise ValueError("rho must be a probability law on [0, inf)")
    reports = []
    for R in R_grid:
        if R < 0:
            raise ValueError("R must be nonnegative")
        target = rho.integral_min(R)
        sides = {"i": [], "ii": []}
        for r in fr.results:
            m, p = r.mean_tau1_eta, r.p_tau1_xi_le(R)
            sides["i"].append(Estimate(m.value * p.value, combined_se(m.value * p.se, p.value * m.se)))
            sides["ii"].append(r.mean_min_tau1_eta(R))
        for side, ests in sides.items():
            ds = [abs(e.value - target) for e in ests]
            ses = [e.se for e in ests]
            trend = _trend_ok(ds, ses, k_sigma)
            reports.append(
                make_report(
                    f"equivalence_{side}[R={R:g}]",
                    ests[-1],
                    Estimate(target, 0.0),
                    tolerance=tolerance,
                    extra_ok=trend,
                    sample_sizes={"n_list": len(fr.results)},
                    censoring={f"eta@n={r.n}": r.censored_eta for r in fr.results},
                    details={
                        "rho": rho.name,
                        "R": float(R),
                        "per_n": [
                            {"n": r.n, "value": e.value, "se": e.se, "discrepancy": d}
                            for r, e, d in zip(fr.results, ests, ds)
                        ],
                        "trend_nonincreasing": trend,
                    },
                )
            )
    return reports


class CountLimit(ABC):
    """Count laws of a candidate limit process on windows ``(a, b]``."""

    name = "limit"
    intensity: float = 0.0

    @abstractmethod
    def pmf(self, window, kmax: int) -> np.ndarray: ...


class ZeroProcess(CountLimit):
    name = "zero"
    intensity = 0.0

    def pmf(self, window, kmax):
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out


class PoissonLimit(CountLimit):
    def __init__(self, lam: float = 1.0, palm: bool = False):
        self.lam, self.palm = float(lam), palm
        self.intensity = self.lam
        self.name = ("palm_poisson" if palm else "poisson") + f"({lam:g})"

    def pmf(self, window, kmax):
        a, b = window
        mu = self.lam * (b - a)
        k = np.arange(kmax + 1)
        logp = k * math.log(mu) - mu - np.array([math.lgamma(i + 1) for i in k]) if mu > 0 else None
        base = np.exp(logp) if logp is not None else (k == 0).astype(float)
        if self.palm and a < 0 <= b:
            base = np.concatenate([[0.0], base[:-1]])
        return base


def parse_count_limit(spec: str | None) -> CountLimit | None:
    if spec in (None, "", "none"):
        return None
    kind, _, arg = spec.partition(":")
    if kind == "zero":
        return ZeroProcess()
    if kind == "poisson":
        return PoissonLimit(float(arg or 1.0))
    if kind == "palm_poisson":
        return PoissonLimit(float(arg or 1.0), palm=True)
    raise ValueError(f"unknown limit process {spec!r}")


def _tv_and_threshold(p: list[float], q: np.ndarray, n_p: int, q_n: int | None, k: float) -> tuple[float, float]:
    """Total variation between an empirical pmf and a reference, with a ``k``-sd noise allowance."""
    L = max(len(p), len(q))
    pp = np.zeros(L)
    pp[: len(p)] = p
    qq = np.zeros(L)
    qq[: min(L, len(q))] = q[:L]
    tv = 0.5 * float(np.abs(pp - qq).sum())
    var = pp * (1 - pp) / n_p
    if q_n:
        var = var + qq * (1 - qq) / q_n
    return tv, 0.5 * k * float(np.sqrt(var).sum())


def two_of_three_report(
    fr: FamilyResult,
    intensity_limit: float | None = None,
    xi_limit: CountLimit | None = None,
    eta_limit: CountLimit | None = None,
    tv_tol: float = 0.02,
    intensity_tol: float = 0.02,
    k_sigma: float = 3.0,
    mass_bound=None,
) -> dict:
    """Three flags: (i) intensities, (ii) stationary count laws, (iii) Palm count laws.

    With a declared limit each flag compares the last ``n`` against it; with no
    limit it checks that the last two indices agree (a Cauchy-type proxy).
    """
    res = fr.results
    last = res[-1]
    prev = res[-2] if len(res) > 1 else None

    if intensity_limit is None and xi_limit is not None:
        intensity_limit = xi_limit.intensity
    if intensity_limit is not None:
        d_int = abs(last.intensity.value - intensity_limit)
        thr = k_sigma * last.intensity.se + intensity_tol
    elif prev is not None:
        d_int = abs(last.intensity.value - prev.intensity.value)
        thr = k_sigma * combined_se(last.intensity.se, prev.intensity.se) + intensity_tol
    else:
        d_int, thr = 0.0, 0.0
    flag_i = d_int <= thr

    def laws_flag(which: str, limit: CountLimit | None, windows):
        rows, ok = [], True
        for w in windows:
            key = _wkey(w)
            p = getattr(last, which)[key]
            n_last = last.n_xi if which == "xi_counts" else last.n_eta
            if limit is not None:
                q = limit.pmf(w, max(len(p) + 20, 40))
                tv, noise = _tv_and_threshold(p, q, n_last, None, k_sigma)
            elif prev is not None:
                q = np.asarray(getattr(prev, which)[key])
                n_prev = prev.n_xi if which == "xi_counts" else prev.n_eta
                tv, noise = _tv_and_threshold(p, q, n_last, n_prev, k_sigma)
            else:
                tv, noise = 0.0, 0.0
            good = tv <= noise + tv_tol
            ok &= good
            per_n = []
            if limit is not None:
                for r in res:
                    pr = getattr(r, which)[key]
                    per_n.append({"n": r.n, "tv": _tv_and_threshold(pr, limit.pmf(w, max(len(pr) + 20, 40)), 1, None, 0)[0]})
            rows.append({"window": list(w), "tv": tv, "threshold": noise + tv_tol, "holds": good, "per_n": per_n})
        return ok, rows

    flag_ii, rows_ii = laws_flag("xi_counts", xi_limit, PROXY_WINDOWS)
    eta_w = [w for w in fr.eta_windows if w in PROXY_WINDOWS or w == ETA_MASS_WINDOW]
    flag_iii, rows_iii = laws_flag("eta_counts", eta_limit, eta_w)

    mass = []
    key = _wkey(ETA_MASS_WINDOW)
    for r in res:
        if key in r.eta_count_min:
            row = {"n": r.n, "min_eta_count": r.eta_count_min[key]}
            if mass_bound is not None:
                row["bound"] = mass_bound(r.n)
                row["bound_holds"] = r.eta_count_min[key] >= row["bound"]
            mass.append(row)

    return {
        "name": "two_of_three",
        "family": fr.family,
        "flags": {"i": bool(flag_i), "ii": bool(flag_ii), "iii": bool(flag_iii)},
        "intensity": {
            "limit": intensity_limit,
            "last": last.intensity.to_dict(),
            "discrepancy": d_int,
            "threshold": thr,
            "per_n": [{"n": r.n, **r.intensity.to_dict()} for r in res],
        },
        "xi_laws": {"limit": None if xi_limit is None else xi_limit.name, "windows": rows_ii},
        "eta_laws": {"limit": None if eta_limit is None else eta_limit.name, "windows": rows_iii},
        "eta_mass_window": {"window": list(ETA_MASS_WINDOW), "per_n": mass},
        "caveat": CAVEAT,
    }


def tightness_diagnostic(
    fr: FamilyResult, windows: Sequence[tuple[float, float]] = ((0.0, 2.0),), K_grid: Sequence[int] = (5, 10, 20),
    k_sigma: float = 3.0,
) -> list[dict]:
    """``sup_n P(xi_n B >= K)`` against the Markov bound ``sup_n I_n |B| / K``."""
    sup_I = max(r.intensity.value for r in fr.results)
    rows = []
    for w in windows:
        key = _wkey(w)
        if key not in fr.results[0].xi_counts:
            raise ValueError(f"window {key} was not recorded")
        for K in K_grid:
            if K <= 0:
                raise ValueError("K must be positive")
            best, best_se, best_n = 0.0, 0.0, fr.results[0].n
            for r in fr.results:
                pmf = np.asarray(r.xi_counts[key])
                p = float(pmf[K:].sum()) if K < pmf.size else 0.0
                if p >= best:
                    best, best_se, best_n = p, binomial_se(p, r.n_xi), r.n
            bound = sup_I * (w[1] - w[0]) / K
            rows.append({
                "window": list(w), "K": int(K), "sup_empirical": best, "se": best_se, "at_n": best_n,
                "markov_bound": bound, "violation": bool(best > bound + k_sigma * max(best_se, 1.0 / max(fr.results[0].n_xi, 1))),
            })
    return rows


# --------------------------------------------------------------------------
# multiplicities and the star process
# --------------------------------------------------------------------------


def multiplicity_stats(
    ens: PointEnsemble,
    eps: float,
    palm: PointEnsemble | None = None,
    R_grid: Sequence[float] = (),
    k_sigma: float = 3.0,
    tolerance: float | None = None,
) -> dict:
    """Mean multiplicity ``m = I_xi / I_xi*`` with ``xi* = simplify(xi, eps)``.

    With a Palm ensemble it also checks the star Palm-Khinchin relation
    ``P(tau_1(xi) > R | xi != 0) = E (tau* - R)^+ / (m E tau_1)``, where
    ``tau_1`` is the raw first positive Palm atom (its law approximates
    ``rho``) and ``tau*`` the first atom past the cluster containing 0, plus
    the decomposition check ``rho{0} = (m - 1)/m`` with ``rho{0}`` read off as
    the fraction of raw first gaps ``<= eps``.
    """
    star = ens.simplify(eps)
    raw_tot = ens.totals().astype(float)
    star_tot = star.totals().astype(float)
    if math.fsum(star_tot) == 0:
        raise ValueError("star intensity estimate is 0")
    m = ratio_se(raw_tot, star_tot)
    out: dict = {"m_est": m, "eps": eps, "samples": len(ens), "reports": []}
    if palm is None:
        return out
    if np.any(palm.lo >= 0):
        # the run through the anchor must be seen from its start
        raise ValueError("Palm samples must observe negative times")
    t_raw = palm.tau(1)
    t_star = palm.simplify(eps).tau(1)
    ok = ~(np.isnan(t_raw) | np.isnan(t_star))
    t_raw, t_star = t_raw[ok], t_star[ok]
    mean_raw = mean_se(t_raw)
    zero = fsum_mean(t_raw <= eps)
    zero_se = binomial_se(zero, t_raw.size)
    # (m - 1)/m with a delta-method standard error
    mm = Estimate((m.value - 1) / m.value, m.se / m.value**2)
    out["zero_atom"] = make_report(
        "rho_zero_atom", Estimate(zero, zero_se), mm, k_sigma=k_sigma, tolerance=tolerance,
        sample_sizes={"palm": int(t_raw.size)}, censoring={"palm": int((~ok).sum())},
        details={"eps": eps},
    )
    nz = ens.nonempty()
    e1 = ens.tau(1)[nz]
    for R in R_grid:
        lhs = mean_se((e1 > R).astype(float))
        num = np.maximum(t_star - R, 0.0)
        v = fsum_mean(num) / (m.value * mean_raw.value)
        rel = combined_se(
            mean_se(num).se / max(fsum_mean(num), 1e-300), m.se / m.value, mean_raw.se / mean_raw.value
        )
        out["reports"].append(
            make_report(
                f"star_palm_khinchin[R={R:g}]", lhs, Estimate(v, abs(v) * rel), k_sigma=k_sigma,
                tolerance=tolerance, sample_sizes={"xi": len(ens), "palm": int(t_raw.size)},
                censoring={"palm": int((~ok).sum())},
                details={"R": float(R), "m_est": m.value, "mean_raw_tau1": mean_raw.value},
            )
        )
    return out
