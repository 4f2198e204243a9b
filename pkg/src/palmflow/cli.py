"""Command-line experiment runner.

``palmflow run CONFIG [--set key=value ...] [--seed N] [--jobs N] [--out DIR]``
executes one experiment and writes ``report.json`` plus CSV tables.  Config
files are flat ``key = value`` lines; ``[section]`` headers prefix the keys
that follow with ``section.``.  Command-line values win over file values.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, convergence as cv, palm, parallel
from .stats import Estimate, binomial_se, fsum_mean, ks_two_sample_threshold, mean_se
from .suspension import BaseSystem, TargetSet, sample_nu_batch, sample_target
from .zoo import (
    CATALOG,
    LatticeClusterParams,
    TwoCircleParams,
    lattice_cluster_ensemble,
    lattice_palm_ensemble,
    lattice_tau1_law,
    make_system,
    make_target,
    poisson_ensemble,
    resolve_params,
    two_circle_oracle,
)

SCHEMA_VERSION = 1

KINDS = ("intensity", "kac", "khinchin", "higher_order:J", "inversion", "palm_compare", "slivnyak", "converge",
         "zoo_selftest", "recurrence")

DEFAULTS: dict[str, Any] = {
    "experiment": None,
    "system": None,
    "target": None,
    "samples": 100_000,
    "horizon": 50.0,
    "seed": 0,
    "jobs": None,
    "r_grid": "0:3:20",
    "n_list": "",
    "out": "palmflow_out",
    "tolerance.k_sigma": 3.0,
    "tolerance.abs": None,
    "kac.n_max_steps": 1000,
    "recurrence.n_max_steps": 1000,
    "recurrence.m_hits": 10,
    "slivnyak.lam": 1.0,
    "slivnyak.confidence": 0.999,
    "palm_compare.functionals": "tau1,min:1,void:1",
    "converge.family": None,
    "converge.rho": None,
    "converge.xi_limit": None,
    "converge.eta_limit": None,
    "converge.intensity_limit": None,
    "converge.tolerance": 0.05,
    "converge.tv_tol": 0.02,
    "converge.tightness_windows": "0,2",
    "converge.k_grid": "5,10,20",
}

INT_KEYS = {"samples", "seed", "jobs", "kac.n_max_steps", "recurrence.n_max_steps", "recurrence.m_hits"}
FLOAT_KEYS = {"horizon", "tolerance.k_sigma", "tolerance.abs", "slivnyak.lam", "slivnyak.confidence",
              "converge.tolerance", "converge.tv_tol", "converge.intensity_limit"}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def read_config_text(text: str) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[__root__]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"cannot parse config: {e}") from None
    out = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            full = key if section == "__root__" else f"{section}.{key}"
            out[full] = value.strip()
    return out


def parse_sets(items) -> dict[str, str]:
    out = {}
    for item in items or []:
        key, eq, value = item.partition("=")
        if not eq or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def parse_grid(spec: str) -> list[float]:
    """``lo:hi:count`` (inclusive linspace) or a comma list."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            lo, hi, cnt = spec.split(":")
            grid = [float(x) for x in np.linspace(float(lo), float(hi), int(cnt))]
        else:
            grid = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad R grid {spec!r}") from None
    if not grid or any(g < 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("R_grid must be strictly increasing and nonnegative")
    return grid


def parse_int_list(spec: str, what: str) -> list[int]:
    try:
        return [int(x) for x in str(spec).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} {spec!r}") from None


def resolve_config(raw: dict[str, str]) -> dict[str, Any]:
    """Merge with defaults, convert types and validate."""
    cfg: dict[str, Any] = dict(DEFAULTS)
    cfg.update(raw)
    for key in INT_KEYS:
        if cfg.get(key) not in (None, ""):
            try:
                cfg[key] = int(float(cfg[key])) if float(cfg[key]).is_integer() else None
            except ValueError:
                raise ConfigError(f"{key} must be an integer") from None
            if cfg[key] is None:
                raise ConfigError(f"{key} must be an integer")
    for key in FLOAT_KEYS:
        if cfg.get(key) not in (None, ""):
            try:
                cfg[key] = float(cfg[key])
            except ValueError:
                raise ConfigError(f"{key} must be a number") from None
        elif cfg.get(key) == "":
            cfg[key] = None
    if cfg["jobs"] is None:
        cfg["jobs"] = parallel.default_jobs()
    kind = cfg["experiment"]
    if not kind:
        raise ConfigError("experiment is required")
    base = kind.split(":")[0]
    if base not in {k.split(":")[0] for k in KINDS}:
        raise ConfigError(f"unknown experiment {kind!r}; choose from {list(KINDS)}")
    if base == "higher_order":
        j = kind.partition(":")[2]
        if not j.isdigit() or int(j) < 1:
            raise ConfigError("higher_order needs an integer order, e.g. higher_order:2")
    if cfg["samples"] is None or cfg["samples"] < 1:
        raise ConfigError("samples must be positive")
    if not cfg["horizon"] > 0:
        raise ConfigError("horizon must be positive")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    cfg["r_grid"] = parse_grid(cfg["r_grid"])
    cfg["n_list"] = parse_int_list(cfg["n_list"], "n_list")
    sysid = cfg.get("system")
    if sysid:
        params = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("system.")}
        try:
            cfg["system.params"] = resolve_params(sysid, params)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        for k in [k for k in cfg if k.startswith("system.") and k != "system.params"]:
            del cfg[k]
    return cfg


# --------------------------------------------------------------------------
# experiment helpers
# --------------------------------------------------------------------------


def _system(cfg) -> tuple[str, dict]:
    sysid = cfg.get("system")
    if not sysid:
        raise ConfigError("system is required for this experiment")
    return sysid, cfg["system.params"]


def _suspension(cfg) -> tuple[BaseSystem, TargetSet]:
    sysid, params = _system(cfg)
    if CATALOG[sysid]["kind"] != "suspension":
        raise ConfigError(f"{sysid} is not a suspension system")
    sys_ = make_system(sysid, params)
    if not cfg.get("target"):
        raise ConfigError("target is required for suspension systems")
    try:
        target = make_target(sys_, cfg["target"])
    except (ValueError, TypeError, IndexError) as e:
        raise ConfigError(str(e)) from None
    return sys_, target


def _source(cfg) -> palm.ProcessSource:
    sysid, params = _system(cfg)
    H = cfg["horizon"]
    if sysid == "poisson":
        return palm.PoissonSource(params["lam"], H)
    if sysid == "lattice_cluster":
        return palm.LatticeSource(LatticeClusterParams(params["n"], params["a"]), H)
    sys_, target = _suspension(cfg)
    return palm.SuspensionSource(sys_, target, H)


def _k(cfg) -> dict:
    return {"k_sigma": cfg["tolerance.k_sigma"], "tolerance": cfg["tolerance.abs"]}


def _pair(cfg, source):
    n, seed, jobs = cfg["samples"], cfg["seed"], cfg["jobs"]
    entry = palm.generate(source, "entry_ensemble", n, seed, jobs)
    pal = palm.generate(source, "palm_ensemble", n, seed, jobs)
    return {"entry": entry, "palm": pal}


def _functionals(spec: str) -> list[palm.Functional]:
    out = []
    for item in spec.split(","):
        name, _, arg = item.strip().partition(":")
        if name == "tau1":
            out.append(palm.Tau(1, float(arg) if arg else 5.0))
        elif name == "min":
            out.append(palm.MinTau(float(arg or 1.0)))
        elif name == "void":
            out.append(palm.Void(float(arg or 1.0)))
        elif name == "const":
            out.append(palm.Constant(float(arg or 1.0)))
        else:
            raise ConfigError(f"unknown functional {item!r}")
    return out


def _exact_intensity(cfg):
    sysid, params = _system(cfg)
    if sysid == "poisson":
        return params["lam"]
    if sysid == "lattice_cluster":
        return 1.0
    sys_, target = _suspension(cfg)
    return target.measure / sys_.mean_roof


# --------------------------------------------------------------------------
# experiments: each returns (reports, tables, ensembles, extra)
# --------------------------------------------------------------------------


def exp_intensity(cfg):
    sysid, params = _system(cfg)
    n, seed, jobs, H = cfg["samples"], cfg["seed"], cfg["jobs"], cfg["horizon"]
    if sysid == "lattice_cluster":
        p = LatticeClusterParams(params["n"], params["a"])
        H = p.period * max(1, math.ceil(H / p.period))
    src = _source(dict(cfg, horizon=H))
    ens = palm.generate(src, "entry_ensemble", n, seed, jobs)
    est = palm.estimate_intensity(ens)
    rep = palm.make_report("intensity", est, Estimate(_exact_intensity(cfg), 0.0), **_k(cfg),
                           sample_sizes={"samples": len(ens)}, details={"window": [0.0, H]})
    return [rep], {}, {"entry": ens}, {}


def exp_kac(cfg):
    sys_, target = _suspension(cfg)
    rep = palm.kac_check(sys_, target, cfg["samples"], cfg["kac.n_max_steps"], cfg["horizon"],
                         cfg["seed"], cfg["jobs"], **_k(cfg))
    return [rep], {}, {}, {}


def exp_khinchin(cfg, j: int = 1):
    src = _source(cfg)
    ens = _pair(cfg, src)
    reps = palm.higher_order_check(src, j, cfg["r_grid"], cfg["samples"], cfg["seed"], cfg["jobs"], **_k(cfg),
                                   entry=ens["entry"], palm=ens["palm"])
    return reps, {}, ens, {"max_discrepancy": max(r.discrepancy for r in reps)}


def exp_inversion(cfg):
    src = _source(cfg)
    ens = _pair(cfg, src)
    reps = palm.inversion_check(src, cfg["r_grid"], cfg["samples"], cfg["seed"], cfg["jobs"], **_k(cfg),
                                entry=ens["entry"], palm=ens["palm"])
    return reps, {}, ens, {}


def exp_palm_compare(cfg):
    sys_, target = _suspension(cfg)
    reps = palm.palm_compare(sys_, target, _functionals(cfg["palm_compare.functionals"]), cfg["samples"],
                             cfg["seed"], cfg["jobs"], cfg["tolerance.k_sigma"])
    return reps, {}, {}, {}


def exp_slivnyak(cfg):
    lam = cfg["slivnyak.lam"]
    if cfg.get("system") == "poisson":
        lam = cfg["system.params"]["lam"]
    rep = palm.slivnyak_check(lam, cfg["samples"], cfg["horizon"], cfg["seed"], cfg["jobs"],
                              cfg["slivnyak.confidence"])
    return [rep], {}, {}, {}


def exp_recurrence(cfg):
    sys_, target = _suspension(cfg)
    n, nmax, m = cfg["samples"], cfg["recurrence.n_max_steps"], cfg["recurrence.m_hits"]
    z1 = palm.estimate_hit_probability(sys_, target, n, nmax, cfg["seed"], cfg["jobs"])
    zi = palm.estimate_infinite_hit_probability(sys_, target, n, nmax, m, cfg["seed"], cfg["jobs"])
    rep = palm.make_report("recurrence[Z1=Zinf]", z1, zi, **_k(cfg), sample_sizes={"samples": n},
                           details={"n_max_steps": nmax, "m_hits": m, "lower_bound": True})
    return [rep], {}, {}, {"mu_Z1": z1.value, "mu_Zinf": zi.value}


def exp_converge(cfg):
    fam_kind = cfg.get("converge.family") or cfg.get("system")
    if not fam_kind:
        raise ConfigError("converge needs converge.family (or system)")
    fam_params = {}
    for key in ("a", "word", "lam", "q1", "ell0", "ell1"):
        v = cfg.get(f"converge.{key}")
        if v not in (None, ""):
            fam_params[key] = v if key == "word" else float(v)
    try:
        family = cv.make_family(fam_kind, **fam_params)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    n_list = cfg["n_list"] or [1]
    fr = cv.run_family(family, n_list, cfg["samples"], cfg["horizon"], cfg["seed"], cfg["jobs"])
    reports = []
    if cfg.get("converge.rho"):
        rho = cv.parse_limit_law(cfg["converge.rho"])
        reports = cv.check_equivalence(fr, rho, cfg["r_grid"], cfg["converge.tolerance"], cfg["tolerance.k_sigma"])
    tot = cv.two_of_three_report(
        fr,
        intensity_limit=cfg.get("converge.intensity_limit"),
        xi_limit=cv.parse_count_limit(cfg.get("converge.xi_limit")),
        eta_limit=cv.parse_count_limit(cfg.get("converge.eta_limit")),
        tv_tol=cfg["converge.tv_tol"],
        k_sigma=cfg["tolerance.k_sigma"],
        mass_bound=getattr(family, "mass_bound", None),
    )
    tw = [float(x) for x in cfg["converge.tightness_windows"].split(",")]
    windows = [tuple(tw[i : i + 2]) for i in range(0, len(tw) - 1, 2)]
    tight = cv.tightness_diagnostic(fr, windows, parse_int_list(cfg["converge.k_grid"], "k_grid"))
    tables = {
        "family": [list(fr.CSV_COLUMNS)] + fr.csv_rows(),
        "tightness": [["window_lo", "window_hi", "K", "sup_empirical", "se", "markov_bound", "violation"]]
        + [[t["window"][0], t["window"][1], t["K"], t["sup_empirical"], t["se"], t["markov_bound"], t["violation"]]
           for t in tight],
    }
    ok = not any(t["violation"] for t in tight)
    extra = {"family_result": fr.to_dict(), "two_of_three": tot, "tightness": tight, "tightness_ok": ok}
    return reports, tables, {}, extra


def _consistency(name, est: Estimate, declared: float, k: float = 4.0):
    return palm.make_report(name, est, Estimate(declared, 0.0), k_sigma=k)


def _preservation(name, sys_: BaseSystem, rng, n: int, confidence=0.999):
    a = sys_.observables(sys_.sample_mu(rng, n))
    b = sys_.observables(sys_.step(sys_.sample_mu(rng, n)))
    from .stats import EmpiricalDistribution

    d = max(EmpiricalDistribution(a[:, c]).sup_distance(EmpiricalDistribution(b[:, c])) for c in range(a.shape[1]))
    return palm.make_report(name, Estimate(d, 0.0), Estimate(0.0, 0.0),
                            tolerance=ks_two_sample_threshold(n, n, confidence), sample_sizes={"samples": n})


def exp_zoo_selftest(cfg):
    """Self-consistency gate: declared constants, measure preservation and the exact oracles."""
    n, seed = min(cfg["samples"], 200_000), cfg["seed"]
    reps = []
    specs = [
        ("rotation", {}, "interval:0,0.1"),
        ("rotation", {"roof_amp": 0.5}, "interval:0.2,0.45"),
        ("bernoulli", {}, "depth:3"),
        ("shear", {}, "box:0,0.25,0.25,0.75"),
        ("two_circle", {}, "circle:1"),
    ]
    for i, (sid, params, tspec) in enumerate(specs):
        sys_ = make_system(sid, params)
        target = make_target(sys_, tspec)
        tag = f"{sid}{params or ''}"
        rng = parallel.stream(seed, "zoo_selftest", tag, 0)
        ys = sys_.sample_mu(rng, n)
        reps.append(_consistency(f"mean_roof[{tag}]", mean_se(sys_.roof(ys)), sys_.mean_roof))
        reps.append(_consistency(f"measure[{tag}/{target.name}]", mean_se(target.member(ys).astype(float)),
                                 target.measure))
        reps.append(_preservation(f"preservation[{tag}]", sys_, rng, n))
        cond, _ = sample_target(sys_, target, rng, 1000)
        reps.append(palm.make_report(f"conditional_in_target[{tag}]", Estimate(fsum_mean(target.member(cond)), 0.0),
                                     Estimate(1.0, 0.0), tolerance=0.0))
    # two-circle oracle against nu sampling
    oracle = two_circle_oracle(TwoCircleParams(), "1")
    tc = make_system("two_circle", {})
    nu = sample_nu_batch(tc, parallel.stream(seed, "zoo_selftest", "nu", 0), n)
    p1 = fsum_mean(nu.ys == 1)
    reps.append(palm.make_report("two_circle.p1", Estimate(p1, binomial_se(p1, n)),
                                 Estimate(float(oracle["p1"]), 0.0), k_sigma=cfg["tolerance.k_sigma"]))
    # lattice cluster: exact period counts and the two-atom Palm law
    p = LatticeClusterParams(5, 1.0 / 6.0)
    rng = parallel.stream(seed, "zoo_selftest", "lattice", 0)
    ens = lattice_cluster_ensemble(p, rng, 1000, -2 * p.period, 2 * p.period)
    per = ens.counts(0.0, float(p.period))
    reps.append(palm.make_report("lattice.period_count", Estimate(float(per.min()), 0.0),
                                 Estimate(float(per.max()), 0.0), tolerance=0.0,
                                 extra_ok=bool(per.min() == 2 * p.n + 1)))
    pe = lattice_palm_ensemble(p, rng, n, 0.0, 2 * p.period)
    t1 = pe.tau(1)
    law = lattice_tau1_law(p)
    small = min(law)
    ph = fsum_mean(np.isclose(t1, small))
    reps.append(palm.make_report("lattice.palm_small_gap", Estimate(ph, binomial_se(ph, n)),
                                 Estimate(float(law[small]), 0.0), k_sigma=cfg["tolerance.k_sigma"]))
    pois = poisson_ensemble(1.0, rng, n // 10 or 1, 0.0, 10.0)
    reps.append(_consistency("poisson.mean_count", mean_se(pois.totals().astype(float)), 10.0))
    return reps, {}, {}, {}


EXPERIMENTS = {
    "intensity": exp_intensity,
    "kac": exp_kac,
    "khinchin": exp_khinchin,
    "inversion": exp_inversion,
    "palm_compare": exp_palm_compare,
    "slivnyak": exp_slivnyak,
    "converge": exp_converge,
    "zoo_selftest": exp_zoo_selftest,
    "recurrence": exp_recurrence,
}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _identity_table(reports) -> list[list]:
    rows = [["name", "R", "lhs", "lhs_se", "rhs", "rhs_se", "discrepancy", "threshold", "pass"]]
    for r in reports:
        rows.append([r.name, r.details.get("R", ""), r.lhs.value, r.lhs.se, r.rhs.value, r.rhs.se, r.discrepancy,
                     r.threshold, r.passed])
    return rows


def _write_csv(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Estimate):
        return obj.to_dict()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def run(cfg: dict, keep_ensembles: bool = False, log=None) -> int:
    """Execute a resolved config; returns the exit status."""
    log = sys.stderr if log is None else log
    out = Path(cfg["out"])
    kind = cfg["experiment"]
    base, _, arg = kind.partition(":")
    if base == "higher_order":
        reports, tables, ensembles, extra = exp_khinchin(cfg, int(arg))
    else:
        reports, tables, ensembles, extra = EXPERIMENTS[base](cfg)
    passed = all(r.passed for r in reports) and extra.get("tightness_ok", True)
    warnings = sorted({w for r in reports for w in r.warnings})
    out.mkdir(parents=True, exist_ok=True)
    (out / "tables").mkdir(exist_ok=True)
    if reports:
        tables = {"reports": _identity_table(reports), **tables}
    for name, rows in tables.items():
        _write_csv(out / "tables" / f"{name}.csv", rows)
    if keep_ensembles and ensembles:
        (out / "ensembles").mkdir(exist_ok=True)
        for name, ens in ensembles.items():
            with (out / "ensembles" / f"{name}.ndjson").open("w") as fh:
                ens.to_ndjson(fh)
    doc = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        # jobs and out never change a number, and leaving them out keeps reports
        # byte-identical across worker counts
        "config": {k: v for k, v in cfg.items() if k not in ("out", "jobs")},
        "experiment": kind,
        "pass": bool(passed),
        "warnings": warnings,
        "reports": [r.to_dict() for r in reports],
        **extra,
    }
    (out / "report.json").write_text(json.dumps(_jsonable(doc), indent=1, allow_nan=False) + "\n")
    for r in reports:
        print(r.line(), file=log)
    print(f"{'PASS' if passed else 'FAIL'} {kind}: {len(reports)} report(s) -> {out / 'report.json'}", file=log)
    return 0 if passed else 1


REPORT_SCHEMA = {
    "schema": SCHEMA_VERSION,
    "report.json": {
        "schema": "integer schema version",
        "version": "package version string",
        "timestamp": "UTC ISO-8601 time of the run (the only non-deterministic field)",
        "config": "fully resolved configuration",
        "experiment": "experiment kind",
        "pass": "true iff every report passes",
        "warnings": "list of warning strings (do not affect pass)",
        "reports": [
            {
                "name": "label",
                "lhs_estimate": {"value": "real", "se": "real >= 0"},
                "rhs_estimate": {"value": "real", "se": "real >= 0"},
                "discrepancy": "|lhs - rhs|",
                "threshold": "pass iff discrepancy <= threshold (and any extra condition in details)",
                "pass": "boolean",
                "sample_sizes": "object of integers",
                "censoring_counts": "object of integers",
                "warnings": "list",
                "details": "object",
            }
        ],
    },
    "tables/reports.csv": ["name", "R", "lhs", "lhs_se", "rhs", "rhs_se", "discrepancy", "threshold", "pass"],
    "tables/family.csv": list(cv.FamilyResult.CSV_COLUMNS),
    "ensembles/*.ndjson": 'one {"window":[lo,hi],"atoms":[[t,k],...]} object per line',
    "error": {"error": {"type": "string", "message": "string"}},
}


def _zoo_text() -> str:
    lines = []
    for sid, entry in CATALOG.items():
        lines.append(f"{sid} ({entry['kind']}): {entry['doc']}")
        for key, (typ, default, doc) in entry["params"].items():
            lines.append(f"    {key} : {typ} = {default!r}  {doc}")
        for spec, doc in entry["targets"].items():
            lines.append(f"    target {spec}  {doc}")
    return "\n".join(lines)


def _zoo_json() -> dict:
    return {
        sid: {
            "kind": e["kind"],
            "doc": e["doc"],
            "params": {k: {"type": t, "default": d, "doc": doc} for k, (t, d, doc) in e["params"].items()},
            "targets": e["targets"],
        }
        for sid, e in CATALOG.items()
    }


def _error(kind: str, message: str, code: int = 2) -> int:
    print(json.dumps({"error": {"type": kind, "message": message}}), file=sys.stdout)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="palmflow", description="Suspension-flow point processes and Palm identities.",
                                 epilog="Systems:\n" + _zoo_text(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config", help="config file ('-' for none)")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    r.add_argument("--seed", type=str)
    r.add_argument("--jobs", type=str, help="worker processes (default $PALMFLOW_JOBS or 1)")
    r.add_argument("--out", type=str)
    r.add_argument("--keep-ensembles", action="store_true")
    z = sub.add_parser("zoo", help="list built-in systems and parameters")
    z.add_argument("--json", action="store_true")
    sub.add_parser("schema", help="print the output schema")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "zoo":
        print(json.dumps(_zoo_json(), indent=1) if args.json else _zoo_text())
        return 0
    if args.cmd == "schema":
        print(json.dumps(REPORT_SCHEMA, indent=1))
        return 0
    try:
        raw = {}
        if args.config != "-":
            try:
                raw = read_config_text(Path(args.config).read_text())
            except OSError as e:
                raise ConfigError(f"cannot read config: {e}") from None
        raw.update(parse_sets(args.set))
        for key in ("seed", "jobs", "out"):
            if getattr(args, key) is not None:
                raw[key] = getattr(args, key)
        cfg = resolve_config(raw)
    except ConfigError as e:
        return _error("config", str(e))
    try:
        return run(cfg, keep_ensembles=args.keep_ensembles)
    except ConfigError as e:
        return _error("config", str(e))
    except (ValueError, ZeroDivisionError) as e:
        return _error("experiment", str(e))


if __name__ == "__main__":
    sys.exit(main())
