import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import eff_params, temps
from spincorr import analysis as an
from spincorr.correlations import Branch, correlations
from spincorr.model import Couplings, EffectiveParams, gibbs_state

MIXED_COUPLINGS = dict(jx=-1.0, jy=-1.5, dz=1.8, gz=0.3)


def t_curve(p, lo=0.01, hi=None, steps=500):
    hi = hi or an.default_t_range(p)[1]
    return an.sweep(an.SweepSpec(p, "T", (lo, hi, steps)))


# ---- sweep -----------------------------------------------------------------------


def test_sweep_spec_validation():
    p = EffectiveParams(1, 1, 1)
    for bad in [
        dict(vary="x", range=(0.1, 1, 10)),
        dict(vary="T", range=(1, 0.1, 10)),
        dict(vary="T", range=(0, 1, 10)),
        dict(vary="T", range=(0.1, 1, 1)),
        dict(vary="r1", range=(0, 1, 10)),  # no temperature
        dict(vary="r1", range=(-1, 1, 10), t=1.0),
        dict(vary="T", range=(0.1, 1, 10), measures=("Q", "X")),
    ]:
        with pytest.raises(an.SpecError):
            an.SweepSpec(p, **bad)


def test_sweep_two_points_match_direct_calls():
    p = EffectiveParams(0.4, 1.2, 0.3)
    tab = an.sweep(an.SweepSpec(p, "T", (0.5, 0.5000001, 2)))
    for i, t in enumerate(tab.x):
        r = correlations(gibbs_state(p, float(t)))
        assert tab.values["Q"][i] == r.q.value
        assert tab.values["U"][i] == r.u.value
        assert tab.values["F"][i] == r.f.value
        assert tab.active["F"][i] is r.f.active


def test_sweep_ordered_and_axis_values():
    tab = an.sweep(an.SweepSpec(EffectiveParams(1, 0, 0.4), "r1", (0, 4, 41), t=1.5))
    assert np.all(np.diff(tab.x) > 0)
    assert tab.x[0] == 0 and tab.x[-1] == 4
    assert [p.r1 for p in tab.params] == list(tab.x)
    assert all(p.r2 == 0.4 and p.jz == 1 for p in tab.params)


def test_sweep_measure_subset():
    tab = an.sweep(an.SweepSpec(EffectiveParams(1, 1, 1), "T", (0.1, 1, 5), measures=("U",)))
    assert set(tab.values) == {"U"}


def test_default_t_range():
    assert an.default_t_range(EffectiveParams(-3, 1, 2)) == (1e-2, 30.0, 500)
    assert an.default_t_range(EffectiveParams(0.1, 0.2, 0.3)) == (1e-2, 10.0, 500)


def test_sweep_deterministic_under_parallelism(monkeypatch):
    spec = an.SweepSpec(EffectiveParams(0.5, 1.5, 0.2), "T", (0.01, 5, 300))
    monkeypatch.setenv("SPINCORR_THREADS", "1")
    a = an.sweep(spec)
    monkeypatch.setenv("SPINCORR_THREADS", "3")
    b = an.parallel_map(an._point, [(spec.fixed, float(t)) for t in spec.grid()], min_rows=1)
    assert [r[1].value for r in b] == list(a.values["U"])


def test_thread_count(monkeypatch):
    monkeypatch.setenv("SPINCORR_THREADS", "2")
    assert an.thread_count() == 2
    monkeypatch.setenv("SPINCORR_THREADS", "0")
    assert an.thread_count() >= 1
    monkeypatch.delenv("SPINCORR_THREADS")
    assert an.thread_count() >= 1


@settings(max_examples=20)
@given(eff_params(), st.floats(0.05, 5))
def test_mirror_symmetry_row_by_row(p, t):
    lo, hi = 0.02, 20.0
    a = an.sweep(an.SweepSpec(p, "T", (lo, hi, 60)))
    b = an.sweep(an.SweepSpec(p.mirrored(), "T", (lo, hi, 60)))
    for m in an.MEASURES:
        assert np.max(np.abs(a.values[m] - b.values[m])) <= 1e-12


def test_region():
    assert an.region(EffectiveParams(1, 0.5, 0.5)) == "Omega0"
    assert an.region(EffectiveParams(1, 1.6, 0.4)) == "boundary"
    assert an.region(EffectiveParams(0, 0.5, 0.0)) == "Omega1"


@settings(max_examples=10)
@given(st.floats(0.2, 3), st.floats(0.05, 5))
def test_region_branch_agreement_on_grid(jz, t):
    for r1 in np.linspace(0, 5, 11):
        for r2 in np.linspace(0, 5, 11):
            p = EffectiveParams(jz, float(r1), float(r2))
            reg = an.region(p, tol=1e-6)
            r = correlations(gibbs_state(p, t))
            want = {"Omega0": Branch.ZERO, "Omega1": Branch.ONE}.get(reg)
            if want is None:
                continue
            for bp in (r.q, r.u, r.f):
                assert bp.active in (want, Branch.TIE)


# ---- behavior types ------------------------------------------------------------------------


def test_monotone_decrease_type_i():
    tab = t_curve(Couplings(jz=2.0, **MIXED_COUPLINGS), hi=10)
    for m in an.MEASURES:
        assert np.all(np.diff(tab.values[m]) <= 1e-15)
    cl = an.classify_table(tab)
    assert cl.consensus == "I" and cl.agree


def test_local_rise_type_ii():
    cl = an.classify_table(t_curve(Couplings(jz=-2.0, **MIXED_COUPLINGS), hi=10))
    assert cl.consensus == "II"
    for m in an.MEASURES:
        b = cl.per_measure[m]
        assert b.first("min").t < b.first("max").t
    # minimum inside the readable window for every measure
    for m in an.MEASURES:
        assert 0.3 <= cl.per_measure[m].first("min").t <= 0.9
    # frozen turning points (closed-form sweep, 500 log-spaced points on [0.01, 10])
    assert cl.per_measure["Q"].first("max").t == pytest.approx(2.035, abs=0.02)
    assert cl.per_measure["F"].first("max").t == pytest.approx(2.305, abs=0.02)
    assert cl.per_measure["U"].first("max").t == pytest.approx(1.748, abs=0.02)


@pytest.mark.parametrize("r1,kind", [(1.0, "III"), (2.0, "IV"), (3.0, "I")])
def test_types_along_r2_zero(r1, kind):
    cl = an.classify_table(t_curve(EffectiveParams(1, r1, 0)))
    assert cl.consensus == kind


def test_type_i_inside_omega0():
    assert an.classify_table(t_curve(EffectiveParams(1, 0.5, 0.5))).consensus == "I"


def test_type_iii_on_sudden_death_line():
    assert an.classify_table(t_curve(EffectiveParams(1, 2.1, 0.1))).consensus == "III"


def test_classification_errors():
    t = np.geomspace(0.01, 10, 40)
    with pytest.raises(an.ClassificationError):
        an.classify_behavior(t, np.ones_like(t))
    t = np.geomspace(0.1, 10, 100)
    with pytest.raises(an.ClassificationError):
        an.classify_behavior(t, np.ones_like(t))
    t = np.geomspace(0.01, 10, 100)
    with pytest.raises(an.ClassificationError):
        an.classify_behavior(t, np.full_like(t, 0.6))
    with pytest.raises(an.ClassificationError):
        an.classify_behavior(t, np.zeros_like(t))


def test_noise_floor_suppresses_wiggles():
    t = np.geomspace(0.01, 10, 200)
    v = np.exp(-t) + 1e-8 * np.sin(50 * t)
    b = an.classify_behavior(t, v)
    assert b.kind == "I" and b.extrema == ()


def test_classification_disagreement_reported():
    tab = t_curve(EffectiveParams(1, 0.5, 0.5))
    tab.values["U"] = np.full_like(tab.values["U"], 0.6)
    cl = an.classify_table(tab)
    assert cl.consensus is None and not cl.agree
    assert isinstance(cl.per_measure["U"], an.ClassificationError)


@pytest.mark.parametrize("p", [
    Couplings(jz=2.0, **MIXED_COUPLINGS), Couplings(jz=-2.0, **MIXED_COUPLINGS),
    EffectiveParams(1, 1, 0), EffectiveParams(1, 2, 0), EffectiveParams(1, 3, 0),
    EffectiveParams(1, 0.5, 0.5), EffectiveParams(1, 2.1, 0.1),
])
def test_classification_stable_under_refinement(p):
    hi = an.default_t_range(p)[1]
    a = an.classify_table(t_curve(p, hi=hi, steps=500))
    b = an.classify_table(t_curve(p, hi=hi, steps=1000))
    assert a.consensus == b.consensus is not None


# ---- sudden changes ------------------------------------------------------------------------


def test_sudden_change_along_r1():
    ev = an.detect_sudden_changes(an.SweepSpec(EffectiveParams(1, 0, 0.4), "r1", (0, 4, 4001), t=1.5))
    assert sorted(e.measure for e in ev) == ["F", "Q", "U"]
    for e in ev:
        assert e.axis_value == pytest.approx(1.6, abs=1e-3)
        assert e.boundary == pytest.approx(1.6)
        # sharp maxima: slope goes from rising to falling
        assert e.kind == "cusp" and e.jump < 0


def test_sudden_changes_along_jz():
    ev = an.detect_sudden_changes(an.SweepSpec(EffectiveParams(0, 0.4, 2.6), "jz", (-3, 3, 6001), t=1.0))
    for m in an.MEASURES:
        mine = sorted((e for e in ev if e.measure == m), key=lambda e: e.axis_value)
        assert [round(e.axis_value, 3) for e in mine] == [-1.5, 1.5]
        assert abs(mine[0].jump) > abs(mine[1].jump)
        assert mine[0].kind == "cusp"


def test_no_sudden_change_without_crossing():
    assert an.detect_sudden_changes(an.SweepSpec(EffectiveParams(0, 0, 0), "r1", (0, 4, 401), t=1.0)) == []


def test_sudden_change_rejects_t_axis():
    with pytest.raises(an.SpecError):
        an.detect_sudden_changes(an.SweepSpec(EffectiveParams(1, 1, 1), "T", (0.1, 1, 10)))


def test_boundary_crossings():
    spec = an.SweepSpec(EffectiveParams(0, 0.4, 2.6), "jz", (-3, 3, 11), t=1.0)
    assert an.boundary_crossings(spec) == [-1.5, 1.5]
    spec = an.SweepSpec(EffectiveParams(1, 0, 0.4), "r2", (0, 4, 11), t=1.0)
    assert an.boundary_crossings(spec) == [2.0]


def test_sudden_change_consistency_error(monkeypatch):
    monkeypatch.setattr(an, "boundary_crossings", lambda spec: [3.5])
    with pytest.raises(an.ConsistencyError):
        an.detect_sudden_changes(an.SweepSpec(EffectiveParams(1, 0, 0.4), "r1", (0, 4, 401), t=1.5))


# ---- zero temperature -----------------------------------------------------------------------


@pytest.mark.parametrize("p,val", [
    ((1, 1, 0), 0.0), ((1, 2, 0), 1 / 3), ((1, 3, 0), 1.0), ((1, 2.1, 0.1), 0.0),
    ((1, 0, 0), 0.0), ((0, 0, 0), 0.0), ((-1, 0, 2), 1 / 3), ((1, 0.5, 0.5), 1.0),
])
def test_zero_t_limit_values(p, val):
    assert an.zero_t_limit(EffectiveParams(*p)) == pytest.approx(val, abs=1e-15)


def test_zero_t_limit_classical_sets():
    # 0 on {r2 = 0, r1 < 2} and {r2 = r1 - 2, r1 > 2} at jz = 1, 1 elsewhere except (2, 0)
    for r1 in np.linspace(0, 1.9, 20):
        assert an.zero_t_limit(EffectiveParams(1, float(r1), 0.0), verify=False) == 0
    for r1 in (2.5, 3.0, 4.0, 5.0):
        assert an.zero_t_limit(EffectiveParams(1, r1, r1 - 2), verify=False) == pytest.approx(0, abs=1e-15)
    for r1, r2 in ((0.5, 0.5), (1.0, 2.0), (3.0, 0.5), (4.0, 1.0), (0.0, 3.0)):
        assert an.zero_t_limit(EffectiveParams(1, r1, r2)) == pytest.approx(1, abs=1e-12)


@given(st.floats(-3, 3), st.floats(0, 5), st.floats(0, 5))
def test_zero_t_limit_is_one_of_three_values(jz, r1, r2):
    v = an.zero_t_limit(EffectiveParams(jz, r1, r2), verify=False)
    assert min(abs(v), abs(v - 1 / 3), abs(v - 1)) <= 1e-12


def test_zero_t_numerical_cross_check_runs():
    # separation 4 between ground and excited levels, so both probes are in the limit
    assert an.zero_t_measures(EffectiveParams(1, 2, 0), verify=True) == pytest.approx((1 / 3,) * 3, abs=1e-12)


def test_zero_t_consistency_error(monkeypatch):
    monkeypatch.setattr(an, "ZERO_T_PROBES", (1.0,))
    with pytest.raises(an.ConsistencyError):
        an.zero_t_limit(EffectiveParams(1, 3, 0))


# ---- classical states ------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.1, 0.7, 1.0, 10.0])
def test_classical_line(t):
    assert an.classical_state_check(EffectiveParams(0, 1, 1), t)


def test_not_classical():
    assert not an.classical_state_check(EffectiveParams(1, 1, 1), 1.0)


@given(st.floats(-5, 5), temps)
def test_no_transverse_couplings_is_classical(jz, t):
    assert an.classical_state_check(EffectiveParams(jz, 0, 0), t)


def test_sudden_death_line_at_zero_t():
    assert an.classical_state_check(EffectiveParams(1, 2.1, 0.1), 0)
    assert not an.classical_state_check(EffectiveParams(1, 2.1, 0.1), 1.0)


# ---- high temperature -------------------------------------------------------------------------


def test_asymptote_reference_point():
    rep = an.asymptote_check(EffectiveParams(1, 1, 2), [50, 100, 200])
    assert rep.c2_ok and rep.c3_ok
    assert all(r.err_c2 < 1e-4 for r in rep.rows)


def test_asymptote_classical_line_flags_zero_coefficient():
    rep = an.asymptote_check(EffectiveParams(0, 1.5, 1.5), [50, 100, 200])
    assert rep.row("U1").active and rep.row("U1").c2 == 0
    assert rep.row("U0").c2 == pytest.approx(1.125)
    assert any("U1" in n for n in rep.notes)
    assert rep.c2_ok


def test_asymptote_odd_coefficient_zero_at_jz0():
    rep = an.asymptote_check(EffectiveParams(0, 2, 0), [50, 100, 200])
    assert all(r.c3 == 0 and abs(r.fit_c3) < 1e-3 for r in rep.rows)
    assert rep.c2_ok


def test_asymptote_precondition():
    with pytest.raises(an.PreconditionError):
        an.asymptote_check(EffectiveParams(1, 1, 2), [5, 100, 200])
    with pytest.raises(an.PreconditionError):
        an.asymptote_check(EffectiveParams(1, 1, 2), [50, 50, 100])


@given(eff_params(jz=st.floats(-5, 5)))
def test_inverse_square_scaling(p):
    # m(2T)/m(T) -> 1/4
    r = correlations(gibbs_state(p, 4000.0))
    r2 = correlations(gibbs_state(p, 8000.0))
    for a, b in ((r.q, r2.q), (r.u, r2.u), (r.f, r2.f)):
        if a.value > 1e-8:  # below this the ratio is rounding noise
            assert b.value / a.value == pytest.approx(0.25, abs=2e-3)


def test_fit_high_t_exact_on_synthetic_data():
    t = np.array([50.0, 100.0, 200.0])
    y = 1.3 / t**2 - 0.7 / t**3 + 4.0 / t**4
    c2, c3 = an.fit_high_t(t, y)
    assert c2 == pytest.approx(1.3, rel=1e-10)
    assert c3 == pytest.approx(-0.7, rel=1e-8)
