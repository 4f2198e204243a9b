import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from palmflow.point_measure import shift
from palmflow.stats import EmpiricalDistribution, ks_two_sample_threshold
from palmflow.suspension import (
    NotInTarget,
    PredicateTarget,
    SuspensionState,
    birkhoff_sum,
    entry_ensemble,
    entry_times,
    flow,
    flow_batch,
    rescaled_entry,
    return_process,
    sample_nu_batch,
    strip_occupation,
)
from palmflow.zoo import (
    BernoulliShift,
    CircleTarget,
    CylinderTarget,
    IntervalTarget,
    Rotation,
    TorusShear,
    TwoCircle,
    horizontal_strip,
    make_system,
    make_target,
)

import oracles

TC = TwoCircle()
D1 = CircleTarget(1, 0.5)


def test_birkhoff_examples():
    assert birkhoff_sum(TC, 1, 0) == 0
    assert birkhoff_sum(TC, 1, 3) == 6
    assert birkhoff_sum(Rotation(0.3), 0.2, 7) == 7
    with pytest.raises(ValueError):
        birkhoff_sum(TC, 1, -1)


def test_flow_examples():
    x = SuspensionState(1, 0.5)
    assert flow(TC, x, 0.0) == x
    assert flow(TC, x, 3.0) == SuspensionState(1, 1.5)
    y = flow(Rotation(0.25), SuspensionState(0.1, 0.3), 1.9)
    assert y.y == pytest.approx(0.6) and y.s == pytest.approx(0.2)
    # circle 0 has period 1
    assert flow(TC, SuspensionState(0, 0.25), 1.0) == SuspensionState(0, 0.25)
    with pytest.raises(ValueError):
        flow(TC, x, -1.0)


def test_flow_matches_oracle():
    sys = Rotation(0.3, 1.0, 0.5)
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = rng.random()
        s = rng.random() * float(sys.roof(np.array([y]))[0])
        t = rng.random() * 9
        got = flow(sys, SuspensionState(y, s), t)
        ey, es = oracles.flow(sys.step, lambda v: float(sys.roof(np.array([v]))[0]), y, s, t)
        assert got.y == pytest.approx(ey, abs=1e-12) and got.s == pytest.approx(es, abs=1e-9)


def test_entry_examples():
    assert entry_times(TC, D1, SuspensionState(1, 0.5), 5).atoms == [(1.5, 1), (3.5, 1)]
    assert entry_times(TC, D1, SuspensionState(0, 0.2), 5).atoms == []
    sh, strip = TorusShear(), horizontal_strip(0, 0.5)
    assert entry_times(sh, strip, SuspensionState(np.array([0.3, 0.2]), 0.0), 3).atoms == [(1.0, 1), (2.0, 1), (3.0, 1)]
    with pytest.raises(ValueError):
        entry_times(TC, D1, SuspensionState(1, 0.5), 0)


def test_return_examples():
    assert return_process(TC, D1, 1, 7).atoms == [(2.0, 1), (4.0, 1), (6.0, 1)]
    with pytest.raises(NotInTarget, match="not in target"):
        return_process(TC, D1, 0, 7)
    sh, strip = TorusShear(), horizontal_strip(0, 0.5)
    assert return_process(sh, strip, np.array([0.7, 0.4]), 2).atoms == [(1.0, 1), (2.0, 1)]
    b = BernoulliShift()
    cyl = CylinderTarget("000")
    z = return_process(b, cyl, b.point([0, 0, 0], np.random.default_rng(1)), 100)
    assert z.times.size == 0 or z.times[0] >= 1
    rot = Rotation(0.25)
    assert return_process(rot, IntervalTarget(0, 0.25), 0.1, 9).atoms == [(4.0, 1), (8.0, 1)]


def test_rescaled_examples():
    assert rescaled_entry(TC, D1, SuspensionState(1, 0.0), 1.0).atoms == [(pytest.approx(2 / 3), 1)]
    b = BernoulliShift()
    cyl = CylinderTarget("000")
    # a point whose 8th image starts with 000 and nothing before: prefix 1111111 then 000 then 1
    pt = b.point([1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 1], np.random.default_rng(0))
    z = rescaled_entry(b, cyl, SuspensionState(pt, 0.0), 1.0)
    assert z.atoms[0] == (1.0, 1)
    assert rescaled_entry(TC, D1, SuspensionState(0, 0.0), 3.0).atoms == []


def test_entry_matches_oracle():
    sys = Rotation(0.37, 1.0, 0.6)
    target = IntervalTarget(0.1, 0.3)
    rng = np.random.default_rng(5)
    nu = sample_nu_batch(sys, rng, 50)
    ens = entry_ensemble(sys, target, nu.ys, nu.ss, 30.0)
    r = lambda v: float(sys.roof(np.array([v]))[0])
    for i in range(50):
        exp = oracles.entry_times(sys.step, r, lambda v: bool(target.member(np.array([v]))[0]), nu.ys[i], nu.ss[i], 30.0)
        np.testing.assert_allclose(ens[i].times, exp, rtol=0, atol=1e-9)


def test_max_atoms_cuts_window():
    ens = entry_ensemble(TC, D1, np.array([1]), [0.5], 100.0, max_atoms=2)
    assert ens[0].atoms == [(1.5, 1), (3.5, 1)] and ens[0].window == (0.0, 3.5)


def test_cannot_sample_nu():
    class Bare(Rotation):
        sup_roof = None
        mean_roof = None

    sys = Bare()
    sys.sup_roof = None
    sys.mean_roof = None
    with pytest.raises(ValueError, match="cannot sample nu"):
        sample_nu_batch(sys, np.random.default_rng(0), 3)


def test_weighted_nu_path():
    sys = Rotation(0.3, 2.0, 0.5)
    sys.sup_roof = None
    nu = sample_nu_batch(sys, np.random.default_rng(0), 20000)
    assert nu.weights is not None
    # weighted mean of cos(2 pi y) under nu = amp / 2
    w = nu.weights
    assert np.sum(w * np.cos(2 * np.pi * nu.ys)) / np.sum(w) == pytest.approx(0.25, abs=0.02)


def test_nu_two_circle():
    nu = sample_nu_batch(TC, np.random.default_rng(11), 100_000)
    p = np.mean(nu.ys == 1)
    assert abs(p - 2 / 3) < 3 * math.sqrt(2 / 9 / 1e5)
    s1 = nu.ss[nu.ys == 1]
    assert abs(s1.mean() - 1.0) < 3 * (2 / math.sqrt(12)) / math.sqrt(s1.size)
    sys = Rotation(0.3, 1.5)
    nu = sample_nu_batch(sys, np.random.default_rng(1), 1000)
    assert np.all((nu.ss >= 0) & (nu.ss < 1.5))


def test_strip_occupation_example():
    # two-circle, base point 1 at height 0.5: visits at -0.5, 1.5, 3.5
    x = SuspensionState(1, 0.5)
    assert strip_occupation(TC, D1, x, 5.0, 0.25) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        strip_occupation(TC, D1, x, 5.0, 2.0)


# -- properties ---------------------------------------------------------------


SYSTEMS = {
    "rotation": (Rotation(math.sqrt(2) - 1, 1.0, 0.5), IntervalTarget(0.2, 0.35)),
    "bernoulli": (BernoulliShift(), CylinderTarget("01")),
    "shear": (TorusShear(), make_target(TorusShear(), "box:0,0.3,0,0.6")),
    "two_circle": (TC, D1),
}


def _obs(sys, ys):
    if isinstance(sys, TwoCircle):
        return np.asarray(ys, dtype=float)[:, None]
    o = sys.observables(ys)
    return np.asarray(o, dtype=float).reshape(len(ys), -1)


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True), st.floats(0, 20), st.floats(0, 20))
def test_semigroup(y, frac, t, u):
    sys = Rotation(math.sqrt(2) - 1, 1.3, 0.4)
    s = frac * float(sys.roof(np.array([y]))[0])
    a = flow(sys, flow(sys, SuspensionState(y, s), t), u)
    b = flow(sys, SuspensionState(y, s), t + u)
    dy = abs(a.y - b.y)
    assert min(dy, 1 - dy) <= 1e-9 * max(1.0, t + u)
    assert a.s == pytest.approx(b.s, rel=1e-9, abs=1e-9 * (1 + t + u))


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_gap_property(name):
    sys, target = SYSTEMS[name]
    nu = sample_nu_batch(sys, np.random.default_rng(2), 2000)
    ens = entry_ensemble(sys, target, nu.ys, nu.ss, 60.0)
    g = np.diff(ens.times)
    same = ens.group[1:] == ens.group[:-1]
    assert np.all(g[same] >= sys.inf_roof - 1e-12)


@settings(max_examples=30)
@given(st.integers(0, 1), st.integers(0, 1023))
def test_entry_shift_consistency(i, k):
    # t_j(y, s) + s = t_j(y, 0): shifting the entry process by its first atom gives the returns of the hit point
    s = k / 1024 * (2.0 if i == 1 else 1.0)
    z = entry_times(TC, D1, SuspensionState(i, s), 20.0)
    if i == 0:
        assert z.atoms == []
        return
    t1 = z.times[0]
    shifted = shift(z, t1)
    ret = return_process(TC, D1, 1, 20.0 - t1)
    np.testing.assert_array_equal(shifted.times[shifted.times > 0], ret.times)


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_strip_occupation_within_one(name):
    sys, target = SYSTEMS[name]
    rng = np.random.default_rng(9)
    nu = sample_nu_batch(sys, rng, 60)
    R = 25.0
    ens = entry_ensemble(sys, target, nu.ys, nu.ss, R)
    counts = ens.counts(0, R)
    for i in range(60):
        x = SuspensionState(sys.item(nu.ys, i), float(nu.ss[i]))
        e = strip_occupation(sys, target, x, R, 0.3 * sys.inf_roof)
        assert abs(e - counts[i]) <= 1 + 1e-9


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_measure_preservation(name):
    sys, _ = SYSTEMS[name]
    n = 20000
    a = sys.step(sys.sample_mu(np.random.default_rng(21), n))
    b = sys.sample_mu(np.random.default_rng(22), n)
    oa, ob = _obs(sys, a), _obs(sys, b)
    thr = ks_two_sample_threshold(n, n)
    for c in range(oa.shape[1]):
        assert EmpiricalDistribution(oa[:, c]).sup_distance(EmpiricalDistribution(ob[:, c])) < thr


@pytest.mark.parametrize("name", sorted(SYSTEMS))
@pytest.mark.parametrize("t", [0.3, 1.7])
def test_nu_invariance(name, t):
    sys, _ = SYSTEMS[name]
    n = 20000
    x = sample_nu_batch(sys, np.random.default_rng(31), n)
    ys, ss = flow_batch(sys, x.ys, x.ss, t)
    ref = sample_nu_batch(sys, np.random.default_rng(32), n)
    thr = ks_two_sample_threshold(n, n)
    cols_a = np.column_stack([_obs(sys, ys), ss])
    cols_b = np.column_stack([_obs(sys, ref.ys), ref.ss])
    for c in range(cols_a.shape[1]):
        assert EmpiricalDistribution(cols_a[:, c]).sup_distance(EmpiricalDistribution(cols_b[:, c])) < thr


def test_predicate_target():
    rot = make_system("rotation", {"alpha": 0.25})
    tgt = PredicateTarget(lambda ys: np.asarray(ys) < 0.25, 0.25)
    assert return_process(rot, tgt, 0.1, 9).atoms == [(4.0, 1), (8.0, 1)]
