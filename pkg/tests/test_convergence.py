import math

import numpy as np
import pytest

from palmflow.convergence import (
    DiracLaw,
    DiscreteLaw,
    ExponentialLaw,
    LatticeFamily,
    PoissonLimit,
    ZeroProcess,
    bernoulli_family,
    check_equivalence,
    make_family,
    multiplicity_stats,
    parse_count_limit,
    parse_limit_law,
    run_family,
    tightness_diagnostic,
    two_circle_family,
    two_of_three_report,
)
from palmflow.stats import combined_se
from palmflow.zoo import LatticeClusterParams, lattice_cluster_ensemble, lattice_palm_ensemble, poisson_ensemble


@pytest.fixture(scope="module")
def lattice_fr():
    return run_family(LatticeFamily(), [5, 20, 80], 3000, horizon=10.0, seed=1)


@pytest.fixture(scope="module")
def poisson_fr():
    return run_family(make_family("poisson"), [1, 2, 3], 10000, horizon=10.0, seed=2)


def test_limit_laws():
    assert parse_limit_law("dirac:0").integral_min(3) == 0
    e = parse_limit_law("exp:1")
    assert e.integral_min(2) == pytest.approx(1 - math.exp(-2)) and e.survival(1) == pytest.approx(math.exp(-1))
    d = parse_limit_law("discrete:1@1/2,2@1/2")
    assert d.integral_min(1.5) == pytest.approx(1.25) and d.survival(1) == 0.5
    for bad in (lambda: DiracLaw(-1), lambda: ExponentialLaw(0), lambda: DiscreteLaw([1], [0.5])):
        with pytest.raises(ValueError, match="probability law"):
            bad()
    with pytest.raises(ValueError):
        parse_limit_law("gamma:2")


def test_count_limits():
    assert list(ZeroProcess().pmf((0, 1), 3)) == [1, 0, 0, 0]
    p = PoissonLimit(1.0).pmf((0, 1), 60)
    assert p.sum() == pytest.approx(1) and p[0] == pytest.approx(math.exp(-1))
    q = PoissonLimit(1.0, palm=True).pmf((-1, 1), 60)
    assert q[0] == 0 and q[1] == pytest.approx(math.exp(-2))
    assert parse_count_limit(None) is None and isinstance(parse_count_limit("zero"), ZeroProcess)
    with pytest.raises(ValueError):
        parse_count_limit("cox")


def test_lattice_family_exact_means(lattice_fr):
    for r in lattice_fr.results:
        assert r.mean_tau1_eta.value == 1.0 and r.mean_tau1_eta.se == 0.0
        assert r.intensity.value == pytest.approx(1.0, abs=1e-12)
        assert r.p_nonzero.value == 1.0
    assert lattice_fr.family["palm_source"].startswith("analytic")


def test_lattice_equivalence_to_dirac(lattice_fr):
    reps = check_equivalence(lattice_fr, DiracLaw(0.0), [0.5, 1.0, 2.0], tolerance=0.2)
    for r in reps:
        ds = [p["discrepancy"] for p in r.details["per_n"]]
        assert ds[-1] < ds[0]
        assert r.details["trend_nonincreasing"]
    r0 = check_equivalence(lattice_fr, DiracLaw(0.0), [0.0])
    assert all(r.lhs.value == 0 and r.rhs.value == 0 for r in r0)
    with pytest.raises(ValueError):
        check_equivalence(lattice_fr, "dirac", [1.0])


def test_lattice_two_of_three(lattice_fr):
    fam = LatticeFamily()
    rep = two_of_three_report(lattice_fr, 0.0, ZeroProcess(), None, mass_bound=fam.mass_bound)
    assert rep["flags"]["i"] is False
    for row in rep["eta_mass_window"]["per_n"]:
        assert row["bound_holds"]
    mins = [row["min_eta_count"] for row in rep["eta_mass_window"]["per_n"]]
    assert mins == sorted(mins) and mins[-1] > mins[0]
    assert "proxy" in rep["caveat"]


def test_constant_poisson_family(poisson_fr):
    for r in poisson_fr.results:
        assert abs(r.intensity.value - 1.0) < 3 * r.intensity.se
        assert abs(r.mean_tau1_eta.value - r.p_nonzero.value) < 3 * combined_se(r.mean_tau1_eta.se, r.p_nonzero.se)
    reps = check_equivalence(poisson_fr, ExponentialLaw(1.0), [0.5, 1.0, 2.0])
    assert all(r.passed for r in reps), [r.line() for r in reps]
    rep = two_of_three_report(poisson_fr, 1.0, PoissonLimit(1.0), PoissonLimit(1.0, palm=True))
    assert rep["flags"] == {"i": True, "ii": True, "iii": True}
    cauchy = two_of_three_report(poisson_fr)
    assert cauchy["flags"] == {"i": True, "ii": True, "iii": True}


def test_two_circle_constant_family():
    fr = run_family(two_circle_family(), [1, 2], 5000, horizon=8.0, seed=3)
    a, b = fr.results
    assert a.intensity.value == pytest.approx(1.0, abs=4 * a.intensity.se)
    # rescaled returns are deterministic: 2 * (1/3)
    assert np.allclose(a.tau1_eta.samples, 2 / 3)
    assert two_of_three_report(fr)["flags"] == {"i": True, "ii": True, "iii": True}


def test_bernoulli_family_unit_intensity():
    fr = run_family(bernoulli_family(), [2, 4, 6], 5000, horizon=8.0, seed=4)
    for r in fr.results:
        assert abs(r.intensity.value - 1.0) < 3 * r.intensity.se
        assert abs(r.mean_tau1_eta.value - r.p_nonzero.value) < 3 * combined_se(r.mean_tau1_eta.se, r.p_nonzero.se) + 0.01
    with pytest.raises(ValueError):
        bernoulli_family("ones")


def test_family_result_serialization(lattice_fr):
    csv = lattice_fr.to_csv().splitlines()
    assert csv[0] == "n,intensity,intensity_se,p_nonzero,mean_tau1_eta,mean_tau1_eta_se,censor_frac"
    assert csv[1].startswith("5,") and len(csv) == 4
    d = lattice_fr.to_dict()
    assert [p["n"] for p in d["per_n"]] == [5, 20, 80]
    for p in d["per_n"]:
        for law in p["xi_count_laws"].values():
            assert abs(sum(law) - 1) < 1e-9 and all(0 <= x <= 1 for x in law)


def test_run_family_errors():
    with pytest.raises(ValueError):
        run_family(LatticeFamily(), [5], 100, horizon=4.0)
    with pytest.raises(ValueError, match="unknown family"):
        make_family("rotation")


def test_tightness(lattice_fr, poisson_fr):
    rows = tightness_diagnostic(poisson_fr, [(0.0, 2.0)], [1, 5, 20, 100])
    assert all(not r["violation"] for r in rows)
    big = [r for r in rows if r["K"] == 20][0]
    sup_I = max(r.intensity.value for r in poisson_fr.results)
    assert big["markov_bound"] == pytest.approx(sup_I * 2 / 20) and big["sup_empirical"] <= 0.1
    assert [r for r in rows if r["K"] == 100][0]["sup_empirical"] == 0.0
    assert all(not r["violation"] for r in tightness_diagnostic(lattice_fr, [(0.0, 2.0)], [1, 2, 5]))
    with pytest.raises(ValueError):
        tightness_diagnostic(lattice_fr, [(0.0, 3.0)], [1])


def test_tightness_empty_family():
    fr = run_family(two_circle_family(), [1], 200, horizon=6.0, seed=0)
    for r in fr.results:
        r.xi_counts["(0,2]"] = [1.0]
    rows = tightness_diagnostic(fr, [(0.0, 2.0)], [1, 5])
    assert all(r["sup_empirical"] == 0.0 for r in rows)


def test_multiplicity_poisson():
    ens = poisson_ensemble(1.0, np.random.default_rng(0), 5000, 0.0, 20.0)
    out = multiplicity_stats(ens, 1e-9)
    assert abs(out["m_est"].value - 1.0) <= 3 * out["m_est"].se + 1e-12


def test_multiplicity_collapsed_clusters():
    p = LatticeClusterParams(5, 1e-6)
    rng = np.random.default_rng(7)
    ens = lattice_cluster_ensemble(p, rng, 4000, 0.0, 44.0)
    # two-sided so the cluster holding the anchor is seen whole
    palm = lattice_palm_ensemble(p, rng, 4000, -5.0, 44.0)
    out = multiplicity_stats(ens, 1e-4, palm, R_grid=[0.5, 2.0, 6.0])
    assert out["m_est"].value == pytest.approx(11, abs=3 * out["m_est"].se + 0.01)
    assert out["zero_atom"].passed
    assert all(r.passed for r in out["reports"]), [r.line() for r in out["reports"]]
    with pytest.raises(ValueError, match="negative times"):
        multiplicity_stats(ens, 1e-4, lattice_palm_ensemble(p, rng, 10, 0.0, 44.0))
    plain = multiplicity_stats(ens, 0.0)
    assert plain["m_est"].value == 1.0
    assert plain["m_est"].value >= 1 - plain["m_est"].se


def test_multiplicity_empty_star():
    from palmflow.point_measure import PointEnsemble

    with pytest.raises(ValueError, match="star intensity estimate is 0"):
        multiplicity_stats(PointEnsemble.empty(3, 0.0, 1.0), 0.1)
