import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference, lp_wp
from wcoresets.measures import EmpiricalSampler, StreamSampler, SyntheticSampler, SyntheticSpec
from wcoresets.semidiscrete import (
    DualSolveInterrupted,
    DualState,
    SiteSet,
    assign,
    dual_gradient_v,
    dual_objective,
    estimate_wp,
    gauge_fix,
    solve_dual,
    step_scale,
    stochastic_wp,
)

TWO_SITES = np.array([[0.0, 0.0], [2.0, 0.0]])


def random_instance(seed, m=40, n=5, d=2):
    r = np.random.default_rng(seed)
    return r.normal(size=(m, d)), r.normal(size=(n, d)), r.normal(size=n)


# --- SiteSet -------------------------------------------------------------------


def test_siteset_requires_distinct_finite_sites():
    assert SiteSet([[0, 0], [1, 1]]).n == 2
    with pytest.raises(ValueError):
        SiteSet([[0, 0], [0, 0]])
    with pytest.raises(ValueError):
        SiteSet([[0, np.nan]])


# --- assign --------------------------------------------------------------------


def test_assign_plain_voronoi():
    # power distances 0.81 vs 1.21
    assert assign([[0.9, 0.0]], TWO_SITES, [0.0, 0.0]).indices[0] == 0


def test_assign_weights_shift_cells():
    # 0.81 vs 1.21 - 1 = 0.21
    assert assign([[0.9, 0.0]], TWO_SITES, [0.0, 1.0]).indices[0] == 1


def test_assign_tie_goes_to_lowest_index():
    for p in (1, 2):
        assert assign([[1.0, 0.0]], TWO_SITES, p=p).indices[0] == 0


def test_assign_counts(rng):
    y, x, v = random_instance(1)
    a = assign(y, x, v)
    assert a.counts.sum() == y.shape[0]
    assert a.indices.min() >= 0 and a.indices.max() < x.shape[0]
    np.testing.assert_array_equal(a.counts, np.bincount(a.indices, minlength=x.shape[0]))


@pytest.mark.parametrize("p", [1, 2])
def test_assign_matches_brute_force(p):
    y, x, v = random_instance(7, m=200)
    d = np.sqrt(((y[:, None] - x[None]) ** 2).sum(-1)) ** p - v
    np.testing.assert_array_equal(assign(y, x, v, p).indices, d.argmin(1))


def test_assign_errors():
    with pytest.raises(ValueError):
        assign(np.zeros((3, 3)), TWO_SITES)
    with pytest.raises(ValueError):
        assign(np.zeros((3, 2)), TWO_SITES, v=[0.0])
    with pytest.raises(ValueError):
        assign(np.zeros((3, 2)), TWO_SITES, p=3)


# --- dual objective ----------------------------------------------------------


def test_single_site_objective_ignores_v():
    y = np.array([[1.0, 0.0], [0.0, 2.0]])
    for v in (0.0, 3.0, -7.5):
        assert dual_objective(y, [[0.0, 0.0]], [v]) == pytest.approx(2.5, abs=1e-15)
    assert dual_objective(y, [[0.0, 0.0]], [0.0], p=1) == pytest.approx(1.5)


def test_points_on_sites_give_zero():
    assert dual_objective([[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]], [0.0, 0.0]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(-100, 100), st.sampled_from([1, 2]))
def test_shift_invariance(seed, c, p):
    y, x, v = random_instance(seed)
    assert dual_objective(y, x, v + c, p) == pytest.approx(dual_objective(y, x, v, p), abs=1e-12, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1, 2]))
def test_concave_in_v(seed, p):
    y, x, va = random_instance(seed)
    vb = np.random.default_rng(seed + 1).normal(size=x.shape[0])
    mid = dual_objective(y, x, 0.5 * (va + vb), p)
    assert mid >= 0.5 * (dual_objective(y, x, va, p) + dual_objective(y, x, vb, p)) - 1e-12


def test_unbiased_over_disjoint_batches():
    y, x, v = random_instance(3, m=60)
    parts = np.split(y, 3)
    assert np.mean([dual_objective(b, x, v) for b in parts]) == pytest.approx(dual_objective(y, x, v), abs=1e-12)


def test_empty_minibatch():
    with pytest.raises(ValueError):
        dual_objective(np.zeros((0, 2)), TWO_SITES)


def test_dual_bounded_by_transport_cost():
    # weak duality: every v gives a lower bound on the empirical W_p^p
    y, x, v = random_instance(5, m=12, n=4)
    for p in (1, 2):
        assert dual_objective(y, x, v, p) <= lp_wp(y, x, p) + 1e-9


# --- dual gradient -----------------------------------------------------------


def test_balanced_cells_have_zero_gradient():
    g = dual_gradient_v([[-1.0, 0.0], [3.0, 0.0]], TWO_SITES)
    np.testing.assert_array_equal(g, [0.0, 0.0])


def test_all_in_first_cell():
    g = dual_gradient_v([[0.1, 0.0], [-0.5, 0.2]], TWO_SITES)
    np.testing.assert_allclose(g, [-0.5, 0.5])


def test_gradient_reuses_assignment():
    y, x, v = random_instance(2)
    a = assign(y, x, v)
    np.testing.assert_array_equal(dual_gradient_v(y, x, v, assignment=a), 1 / x.shape[0] - a.fractions)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("p", [1, 2])
def test_gradient_matches_central_differences(seed, p):
    y, x, v = random_instance(seed, m=30, n=4)
    g = dual_gradient_v(y, x, v, p)
    fd = central_difference(lambda w: dual_objective(y, x, w, p), v, 1e-7)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)


# --- DualState -----------------------------------------------------------------


def test_dual_state_json_round_trip():
    s = DualState(np.array([0.5, -0.5]), np.array([0.25, -0.25]), 7)
    t = DualState.from_json(s.to_json())
    np.testing.assert_array_equal(t.v, s.v)
    np.testing.assert_array_equal(t.v_avg, s.v_avg)
    assert t.step_count == 7


def test_gauge_fix_zero_mean():
    assert gauge_fix(np.array([1.0, 2.0, 6.0])).mean() == pytest.approx(0.0, abs=1e-15)


# --- solve_dual ----------------------------------------------------------------


def test_single_site_dual_is_zero():
    s = EmpiricalSampler(np.random.default_rng(0).normal(size=(50, 2)), 1)
    np.testing.assert_array_equal(solve_dual(s, [[0.3, 0.1]], T_v=20).v_avg, [0.0])


def test_symmetric_sites_keep_equal_weights():
    # both cells always hold exactly the mass they should, so v never moves
    s = EmpiricalSampler([[-1.0, 0.0], [1.0, 0.0]], 3)
    state = solve_dual(s, [[-1.0, 0.0], [1.0, 0.0]], m=1000, T_v=10_000)
    assert np.abs(state.v_avg).max() <= 1e-2


def test_symmetric_sites_with_noise_stay_near_zero():
    spec = SyntheticSpec.mixture([([-1.0, 0.0], 0.01 * np.eye(2)), ([1.0, 0.0], 0.01 * np.eye(2))])
    state = solve_dual(SyntheticSampler(spec, 0), [[-1.0, 0.0], [1.0, 0.0]], m=1000, T_v=2000, alpha=0.01)
    assert np.abs(state.v_avg).max() <= 1e-2


def test_v_avg_is_mean_of_iterates():
    data = np.random.default_rng(1).normal(size=(40, 2))
    sites = np.array([[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5]])
    a = solve_dual(data, sites, T_v=5, scale=1.0)
    # replay the five deterministic full-batch steps by hand
    v, total = np.zeros(3), np.zeros(3)
    for k in range(1, 6):
        v = v + dual_gradient_v(data, sites, v) / np.sqrt(k)
        total += v
    np.testing.assert_allclose(a.v_avg, gauge_fix(total / 5), atol=1e-12)
    assert a.step_count == 5 and len(a.objective_trace) == 5


def test_solve_balances_occupancy():
    data = np.random.default_rng(2).normal(size=(2000, 2))
    sites = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 2.0], [-0.5, -0.5]])
    before = np.abs(assign(data, sites).fractions - 0.25).max()
    state = solve_dual(data, sites, T_v=2000)
    after = np.abs(assign(data, sites, state.v_avg).fractions - 0.25).max()
    assert after < before
    assert after <= 0.02


def test_warm_start_and_errors():
    data = np.random.default_rng(3).normal(size=(100, 2))
    sites = np.array([[0.0, 0.0], [1.0, 0.0]])
    first = solve_dual(data, sites, T_v=50)
    second = solve_dual(data, sites, T_v=50, warm_start=first)
    assert second.step_count == 50
    with pytest.raises(ValueError):
        solve_dual(data, sites, T_v=0)
    with pytest.raises(ValueError):
        solve_dual(data, sites, warm_start=DualState.zeros(3))


def test_stream_exhaustion_reports_progress():
    s = StreamSampler([f"{i % 3},0\n" for i in range(25)])
    with pytest.raises(DualSolveInterrupted) as info:
        solve_dual(s, [[0.0, 0.0], [2.0, 0.0]], m=10, T_v=5)
    assert info.value.completed == 2


def test_step_scale():
    C = np.array([[1.0, 4.0], [2.0, 0.5]])
    assert step_scale(C, 2) == 2 * 0.75
    # every query on a site and every cell occupied: nothing to scale by
    assert step_scale(np.array([[0.0, 4.0], [1.0, 0.0]]), 2) == 0.0
    # all queries on site 0 and the other cell empty: fall back to the mean cost
    assert step_scale(np.array([[0.0, 4.0], [0.0, 4.0]]), 2) == 2 * 2.0


# --- estimate_wp -----------------------------------------------------------------


def test_estimate_zero_on_sites():
    sites = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    est = estimate_wp(EmpiricalSampler(sites, 0), sites, DualState.zeros(3), M=1000)
    assert est.value <= 1e-9


def test_estimate_dirac():
    est = estimate_wp(EmpiricalSampler([[3.0, 4.0]], 0), [[0.0, 0.0]], None, p=2, M=100)
    assert est.value == pytest.approx(5.0, abs=1e-12)
    assert est.objective == pytest.approx(25.0, abs=1e-12)


def test_estimate_at_zero_v_is_a_lower_bound():
    data = np.random.default_rng(4).normal(size=(12, 2))
    sites = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 1.0], [0.5, -1.0]])
    for p in (1, 2):
        est = estimate_wp(EmpiricalSampler(data, 1), sites, DualState.zeros(4), p=p, M=20_000)
        assert est.objective <= lp_wp(data, sites, p) + 3 * est.objective_stderr


def test_estimate_rejects_tiny_m():
    with pytest.raises(ValueError):
        estimate_wp(EmpiricalSampler([[0.0]], 0), [[0.0]], M=29)


def test_stochastic_wp_close_to_exact():
    data = np.random.default_rng(5).normal(size=(30, 2))
    sites = data[:3] + 0.1
    exact = lp_wp(data, sites, 2, None, None) ** 0.5
    est = stochastic_wp(EmpiricalSampler(data, 2), sites, M=50_000, T_v=2000)
    assert abs(est.value - exact) <= 0.02 * exact + 3 * est.stderr
