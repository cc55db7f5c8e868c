import numpy as np
import pytest
import scipy.sparse as sp

from efgfom import dgf, scext, solver


def matching_pennies_problem(kind=scext.KIND_DGE):
    cx = scext.build_chain([2], [])
    cy = scext.build_chain([2], [])
    payoff = [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 1.0)]
    return solver.problem_from_chains(cx, cy, payoff, kind)


def kuhn_problem(kuhn, kind=dgf.KIND_DGE):
    return solver.problem_from_game(kuhn, kind)


def test_problem_shape_mismatch():
    cx = scext.build_chain([2], [])
    dx = solver.ChainDomain(cx, scext.KIND_DGE)
    with pytest.raises(ValueError):
        solver.SaddlePointProblem(dx, dx, sp.csr_matrix((3, 2)))


def test_opnorm_is_max_abs_entry(kuhn):
    p = kuhn_problem(kuhn)
    assert p.opnorm == pytest.approx(float(np.max(np.abs(kuhn.values))))


def test_gradient_computation_counter(kuhn):
    p = kuhn_problem(kuhn)
    y = p.domain_y.uniform()
    p.ay(y)
    p.atx(p.domain_x.uniform())
    assert p.gradient_computations == 2
    p.ay(y, count=False)
    assert p.gradient_computations == 2


def test_saddle_gap_nonnegative_and_uncounted(kuhn):
    p = kuhn_problem(kuhn)
    gap = solver.saddle_gap(p, p.domain_x.uniform(), p.domain_y.uniform())
    assert gap >= 0.0
    assert p.gradient_computations == 0


def test_matching_pennies_gap_zero_at_equilibrium():
    p = matching_pennies_problem()
    half = np.array([0.5, 0.5])
    assert solver.saddle_gap(p, half, half) == pytest.approx(0.0, abs=1e-12)


def test_theoretical_bound_values():
    assert solver.theoretical_bound("egt", 1, 2.0, 9.0, 4.0) == pytest.approx(
        4.0 * 2.0 * 6.0 / 2.0)
    assert solver.theoretical_bound("mp", 10, 2.0, 9.0, 4.0) == pytest.approx(
        2.0 * 13.0 / 20.0)
    with pytest.raises(ValueError):
        solver.theoretical_bound("egt", 0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        solver.theoretical_bound("nope", 1, 1.0, 1.0, 1.0)


def test_egt_initialize_costs_two_products(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.egt_initialize(p)
    assert p.gradient_computations == 2
    assert p.domain_x.is_feasible(s.x) and p.domain_y.is_feasible(s.y)
    assert s.mu_x == s.mu_y == p.opnorm


def test_egt_invariant_holds_at_init_and_iterates(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.egt_initialize(p)
    f, g = solver.excessive_gap_values(p, s.x, s.y, s.mu_x, s.mu_y)
    assert f <= g + 1e-12
    for _ in range(20):
        s = solver.egt_iterate(s)
        f, g = solver.excessive_gap_values(p, s.x, s.y, s.mu_x, s.mu_y)
        assert f <= g + 1e-9 * (1.0 + abs(f) + abs(g))


def test_egt_iteration_costs_five_products(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.egt_initialize(p)
    base = p.gradient_computations
    s = solver.egt_iterate(s)
    # 3 products in the shrink step, 2 in the invariant check
    assert p.gradient_computations - base == 5


def test_egt_alternates_mu_shrinks(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.egt_initialize(p)
    s1 = solver.egt_iterate(s)    # t=1 is odd: y shrinks
    assert s1.mu_y < s.mu_y and s1.mu_x == s.mu_x
    s2 = solver.egt_iterate(s1)   # t=2 is even: x shrinks
    assert s2.mu_x < s1.mu_x and s2.mu_y == s1.mu_y


def test_mp_iteration_costs_four_products(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.mp_initialize(p)
    assert p.gradient_computations == 0
    s = solver.mp_iterate(s)
    assert p.gradient_computations == 4
    assert p.domain_x.is_feasible(s.x) and p.domain_y.is_feasible(s.y)


def test_mp_matching_pennies_converges():
    p = matching_pennies_problem()
    rows, s = solver.run_mp(p, 300)
    assert solver.saddle_gap(p, s.x, s.y) <= 1e-2
    np.testing.assert_allclose(s.x, [0.5, 0.5], atol=1e-2)


def test_run_egt_gap_below_bound(kuhn):
    p = kuhn_problem(kuhn)
    rows, _ = solver.run_egt(p, 60)
    assert all(r.gap <= r.bound * (1.0 + 1e-9) + 1e-12 for r in rows)
    assert rows[-1].iteration == 60
    assert [r.iteration for r in rows] == list(range(1, 61))


def test_run_mp_gap_below_bound(kuhn):
    p = kuhn_problem(kuhn)
    rows, _ = solver.run_mp(p, 60)
    assert all(r.gap <= r.bound * (1.0 + 1e-9) + 1e-12 for r in rows)


def test_runs_are_deterministic(kuhn):
    rows1, _ = solver.run_egt(kuhn_problem(kuhn), 30)
    rows2, _ = solver.run_egt(kuhn_problem(kuhn), 30)
    assert solver.log_to_csv(rows1, include_timing=False) == \
        solver.log_to_csv(rows2, include_timing=False)


def test_should_log_cadence():
    assert all(solver.should_log(t, 2000) for t in range(1, 513))
    assert solver.should_log(1024, 2000)
    assert not solver.should_log(1000, 2000)
    assert solver.should_log(2000, 2000)      # final iteration
    assert solver.should_log(30, 100, every=10)
    assert not solver.should_log(35, 100, every=10)
    assert solver.should_log(99, 99, every=10)


def test_log_to_csv_format():
    rows = [solver.LogRow(1, 7, 0.5, 1.0, 2.0, None, 3.0, 12.5)]
    out = solver.log_to_csv(rows)
    lines = out.strip().split("\n")
    assert lines[0] == solver.CSV_HEADER
    assert lines[1] == "1,7,0.5,1.0,2.0,,3.0,12.5"
    out = solver.log_to_csv(rows, include_timing=False)
    assert out.strip().split("\n")[1] == "1,7,0.5,1.0,2.0,,3.0,"


def test_fit_initial_mu_margin(kuhn):
    p = kuhn_problem(kuhn)
    s = solver.fit_initial_mu(p)
    f, g = solver.excessive_gap_values(p, s.x, s.y, s.mu_x, s.mu_y)
    assert g - f > 0.1
    assert s.mu_x < p.opnorm


def test_egt_as_respects_budget(kuhn):
    p = kuhn_problem(kuhn)
    rows, s = solver.egt_as_run(p, budget=400, log_every=1)
    assert p.gradient_computations <= 400
    assert rows
    assert rows[-1].gradient_computations <= 400
    assert p.domain_x.is_feasible(s.x) and p.domain_y.is_feasible(s.y)


def test_egt_as_beats_plain_egt(kuhn):
    budget = 1000
    p1 = kuhn_problem(kuhn)
    _, s1 = solver.egt_as_run(p1, budget=budget, log_every=1)
    gap_as = solver.saddle_gap(p1, s1.x, s1.y)
    p2 = kuhn_problem(kuhn)
    # plain EGT: init 2 products, 5 per iteration
    _, s2 = solver.run_egt(p2, (budget - 2) // 5)
    gap_plain = solver.saddle_gap(p2, s2.x, s2.y)
    assert gap_as < gap_plain
