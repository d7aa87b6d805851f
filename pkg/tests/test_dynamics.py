import math

import numpy as np
import pytest

from riskbif import (
    ContinuationBroken,
    DomainError,
    NoCrossing,
    SectionSpec,
    disease_free_equilibrium,
    endemic_closed_form,
    find_limit_cycle,
    homoclinic_proximity,
    integrate,
    limit_cycle,
    section_crossings,
)
from riskbif.dynamics import DormandPrince
from riskbif.model import full_field, reduced_field


def rotation(x):
    return np.array([-x[1], x[0], -x[2]])


def hopf_normal_form(x):
    r2 = x[0] ** 2 + x[1] ** 2
    return np.array([x[0] * (1 - r2) - x[1], x[1] * (1 - r2) + x[0], -x[2]])


def linear_focus(x):
    return np.array([-0.1 * x[0] - x[1], x[0] - 0.1 * x[1], -x[2]])


# -- integrator --------------------------------------------------------------------


@pytest.mark.parametrize("rtol", [1e-6, 1e-8, 1e-10])
def test_exponential_decay(rtol):
    tr = integrate(lambda x: -x, [1.0], (0.0, 1.0), rtol, 1e-14)
    assert tr.final[0] == pytest.approx(math.exp(-1), abs=10 * rtol)
    assert tr.times[-1] == 1.0
    assert np.all(np.diff(tr.times) > 0)


def test_order_of_accuracy():
    errs = [abs(integrate(lambda x: -x, [1.0], (0, 1), r, 1e-16).final[0] - math.exp(-1)) for r in (1e-5, 1e-6)]
    assert errs[0] / errs[1] >= 4  # a fifth-order method gains well over a factor per decade


def test_dense_output_harmonic():
    tr = integrate(rotation, [1.0, 0.0, 0.0], (0, 10), 1e-10, 1e-12, dense=True)
    for t in np.linspace(0, 10, 37):
        np.testing.assert_allclose(tr(t)[:2], [math.cos(t), math.sin(t)], atol=1e-8)


def test_zero_length_span():
    tr = integrate(rotation, [1.0, 2.0, 3.0], (5.0, 5.0))
    assert len(tr.times) == 1
    np.testing.assert_array_equal(tr.final, [1.0, 2.0, 3.0])


def test_domain_error_propagates(base):
    f = reduced_field(base)
    with pytest.raises(DomainError):
        integrate(lambda x: np.array([-1e3, -1e3, -1e3]) if x.sum() > 0 else f(x), [1.0, 1.0, 1.0], (0, 1))


def test_conservation_full_system(base):
    T = base.T_total
    x0 = [20.0, 60.0, 15.0, 5.0]  # P, S, I, U
    tr = integrate(full_field(base), x0, (0, 100), 1e-10, 1e-12 * T)
    assert np.max(np.abs(tr.states.sum(axis=1) - T)) <= 1e-8 * T


def test_invariant_plane_and_convergence(base):
    T = base.T_total
    tr = integrate(reduced_field(base), [30.0, 0.0, 20.0], (0, 200), 1e-10, 1e-12 * T)
    assert np.max(np.abs(tr.states[:, 1])) <= 1e-10
    np.testing.assert_allclose(tr.final, disease_free_equilibrium(base).x, atol=1e-8)


def test_octant_invariance(base):
    T = base.T_total
    atol = 1e-12 * T
    rng = np.random.default_rng(5)
    for _ in range(5):
        x0 = rng.uniform(0.5, 30.0, 3)
        tr = integrate(reduced_field(base), x0, (0, 200), 1e-10, atol, floor=-100 * atol)
        assert tr.states.min() >= -10 * atol - 100 * atol
        assert tr.states.sum(axis=1).max() <= T * (1 + 1e-12)


def test_floor_guard_rejects():
    # x' = -1 crosses zero at t = 1; the guard keeps the state above the floor
    st = DormandPrince(lambda x: np.array([-1.0 - 0.0 * x[0]]), [1.0], 0.0, 0.999, floor=-1e-10)
    last = None
    for step in st.steps():
        last = step
    assert last.y1[0] >= -1e-10


# -- sections -------------------------------------------------------------------------


def test_rotation_crossings():
    sec = SectionSpec(normal=(0, 1, 0), anchor=(0, 0, 0), direction="+")
    cs = section_crossings(rotation, [1.0, -1e-3, 0.0], sec, 40.0)
    times = np.array([c.t for c in cs])
    np.testing.assert_allclose(np.diff(times), 2 * math.pi, atol=1e-8)
    for c in cs:
        assert abs(sec.value(c.state)) <= 1e-9


def test_section_direction_filter():
    up = SectionSpec((0, 1, 0), (0, 0, 0), "+")
    both = SectionSpec((0, 1, 0), (0, 0, 0), "both")
    n_up = len(section_crossings(rotation, [1.0, -1e-3, 0.0], up, 20.0))
    n_both = len(section_crossings(rotation, [1.0, -1e-3, 0.0], both, 20.0))
    # upward near 0, 2pi, 4pi, 6pi; downward at pi, 3pi, 5pi
    assert (n_up, n_both) == (4, 7)


def test_section_normalised_and_basis():
    s = SectionSpec((0, 3, 4), (1, 2, 3))
    assert np.linalg.norm(s.n) == pytest.approx(1.0)
    B = s.basis()
    np.testing.assert_allclose(B @ B.T, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(B @ s.n, 0, atol=1e-14)
    x = s.from_coords([0.3, -0.7])
    assert abs(s.value(x)) < 1e-14
    np.testing.assert_allclose(s.to_coords(x), [0.3, -0.7], atol=1e-14)


def test_no_crossing_for_stable_node():
    sec = SectionSpec((0, 1, 0), (0, 0.5, 0), "+")
    with pytest.raises(NoCrossing):
        section_crossings(lambda x: -x, [1.0, 1.0, 1.0], sec, 50.0)


def test_model_section_crossings_recur(base):
    e1 = endemic_closed_form(base)
    sec = SectionSpec((0, 1, 0), tuple(e1.x), "+")
    cs = section_crossings(reduced_field(base), e1.x + [1.0, 0, 0], sec, 200.0, atol=1e-10)
    assert len(cs) >= 5
    gaps = np.diff([c.t for c in cs])
    # later returns settle on the cycle period
    assert gaps[-1] == pytest.approx(20.4416454582, rel=1e-5)


# -- cycles ----------------------------------------------------------------------------


def test_benchmark_cycle():
    sec = SectionSpec((0, 1, 0), (0, 0, 0), "+")
    res = limit_cycle(hopf_normal_form, sec, [0.5, 0.0, 0.2], equilibrium=np.zeros(3), reference=np.zeros(3))
    assert res.found
    assert res.period == pytest.approx(2 * math.pi, abs=1e-6)
    np.testing.assert_allclose(res.fixed_point, [1, 0, 0], atol=1e-8)
    assert res.amplitude == pytest.approx(2.0, abs=1e-6)  # I-like coordinate spans [-1, 1]
    assert res.min_distance == pytest.approx(1.0, abs=1e-6)
    assert res.closure <= 1e-6


def test_linear_focus_has_no_cycle():
    sec = SectionSpec((0, 1, 0), (0, 0, 0), "+")
    res = limit_cycle(linear_focus, sec, [0.5, 0.0, 0.0], equilibrium=np.zeros(3))
    assert not res.found
    assert res.reason == "converges-to-equilibrium"


def test_model_cycle_fixture(base):
    res = find_limit_cycle(base)
    assert res.found
    assert res.period == pytest.approx(20.4416454582, rel=1e-8)
    assert res.min_distance == pytest.approx(5.80051603, rel=1e-6)
    assert res.amplitude == pytest.approx(13.759209, rel=1e-6)
    np.testing.assert_allclose(res.fixed_point, [63.7945994, 1.42930026, 0.00197665], rtol=1e-6)
    assert res.closure <= 1e-6 * base.T_total


def test_no_cycle_without_endemic(base):
    res = find_limit_cycle(base.replace(beta=0.4))
    assert not res.found and res.reason == "no-endemic-equilibrium"


def test_ramp_single_value_equals_cycle(base):
    tab = homoclinic_proximity(base, "a1", [8.0])
    res = find_limit_cycle(base)
    assert tab.rows == [(8.0, res.period, res.min_distance, res.amplitude)]


@pytest.mark.slow
def test_homoclinic_approach_in_a1(base):
    tab = homoclinic_proximity(base, "a1", [8, 10, 12, 14, 16])
    periods = [r[1] for r in tab.rows]
    dists = [r[2] for r in tab.rows]
    assert len(tab.rows) == 5 and not tab.violations
    assert periods == sorted(periods)
    assert dists == sorted(dists, reverse=True)
    assert dists[-1] < 0.05 and periods[-1] > 45


def test_ramp_into_disease_free_region(base):
    tab = homoclinic_proximity(base, "beta", [1.0, 0.4])
    assert tab.stop_value == 0.4
    assert tab.stop_reason == "no-endemic-equilibrium"
    assert len(tab.rows) == 1


def test_ramp_needs_cycle_at_start(base):
    with pytest.raises(ContinuationBroken):
        homoclinic_proximity(base, "beta", [0.4, 1.0])
