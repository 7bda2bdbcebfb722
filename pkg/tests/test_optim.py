"""Internal simplex vs scipy cross-checks; Nelder-Mead behavior."""

import numpy as np
import pytest

from reachconf.optim import LinearProgram, NlpProblem, solve_lp, solve_nlp


def test_lp_hand_instance_both_engines():
    # min -x - 2y  s.t. x + y <= 4, x <= 3, y <= 2, x,y >= 0 -> (2, 2), obj -6
    lp = LinearProgram(c=[-1.0, -2.0],
                       a_ub=[[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
                       b_ub=[4.0, 3.0, 2.0])
    for engine in ("internal", "scipy"):
        sol = solve_lp(lp, engine=engine)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(-6.0, abs=1e-9)
        np.testing.assert_allclose(sol.x, [2.0, 2.0], atol=1e-9)


def test_lp_equality_and_free_variable():
    # min |x| style: x free via split handled by bounds (None, None)
    lp = LinearProgram(c=[0.0, 1.0],
                       a_eq=[[1.0, 0.0]], b_eq=[-3.0],
                       a_ub=[[1.0, -1.0], [-1.0, -1.0]], b_ub=[0.0, 0.0],
                       bounds=[(None, None), (0.0, None)])
    for engine in ("internal", "scipy"):
        sol = solve_lp(lp, engine=engine)
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(-3.0, abs=1e-9)
        assert sol.objective == pytest.approx(3.0, abs=1e-9)


def test_lp_infeasible_detected():
    lp = LinearProgram(c=[1.0], a_ub=[[1.0], [-1.0]], b_ub=[1.0, -3.0])
    for engine in ("internal", "scipy"):
        assert solve_lp(lp, engine=engine).status == "infeasible"


def test_lp_unbounded_detected():
    lp = LinearProgram(c=[-1.0], bounds=[(0.0, None)])
    for engine in ("internal", "scipy"):
        assert solve_lp(lp, engine=engine).status == "unbounded"


def test_lp_random_cross_check():
    rng = np.random.default_rng(12)
    for _ in range(30):
        n, m = int(rng.integers(2, 6)), int(rng.integers(2, 8))
        a = rng.normal(size=(m, n))
        x_feas = rng.uniform(0.2, 1.0, n)
        b = a @ x_feas + rng.uniform(0.1, 1.0, m)  # strictly feasible
        c = rng.normal(size=n)
        lp = LinearProgram(c=c, a_ub=a, b_ub=b,
                           bounds=[(0.0, 10.0)] * n)  # box keeps it bounded
        s_int = solve_lp(lp, engine="internal")
        s_sp = solve_lp(lp, engine="scipy")
        assert s_int.status == "optimal" and s_sp.status == "optimal"
        assert s_int.objective == pytest.approx(s_sp.objective, abs=1e-7)


def test_lp_degenerate_cycling_guard():
    # classic Beale instance; naive pivoting cycles, Bland's rule must not
    lp = LinearProgram(
        c=[-0.75, 150.0, -0.02, 6.0],
        a_ub=[[0.25, -60.0, -0.04, 9.0],
              [0.5, -90.0, -0.02, 3.0],
              [0.0, 0.0, 1.0, 0.0]],
        b_ub=[0.0, 0.0, 1.0])
    sol = solve_lp(lp, engine="internal")
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)


def test_lp_validation_errors():
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0], a_ub=[[1.0, 2.0]], b_ub=[1.0])
    with pytest.raises(ValueError):
        LinearProgram(c=[1.0], a_ub=[[1.0]], b_ub=None)
    with pytest.raises(ValueError):
        solve_lp(LinearProgram(c=[1.0]), engine="cplex")


def test_nlp_quadratic_bowl():
    prob = NlpProblem(fun=lambda x: float((x[0] - 2.0) ** 2 + (x[1] + 1.0) ** 2),
                      x0=np.zeros(2))
    sol = solve_nlp(prob, seed=0)
    assert sol.status == "converged"
    np.testing.assert_allclose(sol.x, [2.0, -1.0], atol=1e-4)


def test_nlp_respects_bounds():
    prob = NlpProblem(fun=lambda x: float(x[0]), x0=np.array([0.5]),
                      bounds=[(0.0, 1.0)])
    sol = solve_nlp(prob, seed=1)
    assert 0.0 <= sol.x[0] <= 1.0
    assert sol.fun == pytest.approx(0.0, abs=1e-6)


def test_nlp_budget_and_determinism():
    calls = []

    def noisy(x):
        calls.append(1)
        return float(np.sum(x**2)) + 0.1 * np.sin(40.0 * x[0])

    prob = NlpProblem(fun=noisy, x0=np.array([3.0, -2.0]))
    s1 = solve_nlp(prob, seed=42, max_evals=150, restarts=2)
    n1 = len(calls)
    assert n1 <= 150
    calls.clear()
    s2 = solve_nlp(prob, seed=42, max_evals=150, restarts=2)
    assert len(calls) == n1
    np.testing.assert_array_equal(s1.x, s2.x)
    assert s1.fun == s2.fun


def test_nlp_restart_escapes_poor_start():
    # flat-ish valley with a far minimum; restarts should still find it
    prob = NlpProblem(fun=lambda x: float(abs(x[0] - 5.0) + 0.01 * x[0] ** 2),
                      x0=np.array([0.0]))
    sol = solve_nlp(prob, seed=3, max_evals=800, restarts=3)
    assert sol.x[0] == pytest.approx(5.0, abs=0.2)
