import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq, minimize, minimize_scalar

from paoi_relay.allocation import (Branch, PhaseProblem, _f, energy_for_time, phase_problem, root_find_f,
                                   solve_min_time, solve_p2, solve_phase, solve_phase_dual,
                                   times_given_lambda)
from paoi_relay.errors import BranchError, DomainError, InfeasibleError
from paoi_relay.model import LN2, Phase, check_feasible, min_energy, peak_aoi, throughput

THETA_REF = 1600 / 19 / 50


def test_energy_for_time():
    assert energy_for_time(1.0, 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert energy_for_time(0.5, 2.0, 1.0) == pytest.approx(0.25 * 3.0, rel=1e-15)
    with pytest.raises(DomainError):
        energy_for_time(0.0, 1.0, 1.0)


def test_root_of_f_at_one():
    # 2^x (ln2 x - 1) = 0 at x = 1/ln2
    assert root_find_f(1.0) == pytest.approx(1.0 / LN2, rel=1e-12)


def test_root_find_f_rejects_non_positive():
    with pytest.raises(DomainError):
        root_find_f(0.0)
    with pytest.raises(DomainError):
        root_find_f(-1.0)


@given(st.floats(min_value=1e-8, max_value=1e6))
def test_root_find_f_inverts_f(psi):
    x = root_find_f(psi)
    assert x > 0
    assert abs(_f(x) - psi) <= 1e-12 * max(1.0, psi)


@given(st.floats(min_value=1e-6, max_value=1e4), st.floats(min_value=1.01, max_value=100.0))
def test_root_find_f_is_monotone(psi, factor):
    assert root_find_f(psi) < root_find_f(psi * factor)


def test_small_argument_series_matches_closed_form():
    for x in (1e-3, 1e-4):
        u = x * LN2
        closed = math.exp(u) * (u - 1.0) + 1.0
        assert _f(x) == pytest.approx(closed, rel=1e-8)


def test_dual_two_symmetric_packets():
    p = PhaseProblem(thetas=[0.0, 0.0], gammas=[1.0, 1.0], s_bar=1.0, budget=2.0)
    sol = solve_phase_dual(p)
    assert sol.branch is Branch.DUAL
    assert sol.d == pytest.approx([1.0, 1.0], abs=1e-6)
    assert sol.e == pytest.approx([1.0, 1.0], abs=1e-6)
    assert sol.e.sum() <= 2.0 * (1 + 1e-8)
    assert sol.lam_opt == pytest.approx(1.0 / (2 * LN2 - 1), rel=1e-5)


def test_dual_below_energy_floor_is_infeasible():
    # the asymptotic minimum for two packets is 2 ln2 > 1
    p = PhaseProblem(thetas=[0.0, 0.0], gammas=[1.0, 1.0], s_bar=1.0, budget=1.0)
    with pytest.raises(InfeasibleError):
        solve_phase_dual(p)
    with pytest.raises(InfeasibleError):
        solve_phase_dual(PhaseProblem([0.0, 0.0], [1.0, 1.0], 1.0, 0.0))


def test_min_time_branch_is_closed_form():
    p = PhaseProblem(thetas=[1.0, 1.0], gammas=[1.0, 1.0], s_bar=1.0, budget=2.5)
    sol = solve_phase(p)
    assert sol.branch is Branch.MIN_TIME
    assert list(sol.d) == [1.0, 1.0]
    assert sol.e == pytest.approx([1.0, 1.0], rel=1e-15)
    with pytest.raises(BranchError):
        solve_min_time(PhaseProblem([1.0, 1.0], [1.0, 1.0], 1.0, 1.9))
    with pytest.raises(BranchError):
        solve_min_time(PhaseProblem([1.0, 0.0], [1.0, 1.0], 1.0, 100.0))
    assert solve_phase(PhaseProblem([1.0, 1.0], [1.0, 1.0], 1.0, 1.9)).branch is Branch.DUAL


def test_dual_agrees_with_closed_form_just_above_e_min():
    thetas = np.array([0.8, 1.2, 0.5])
    gammas = np.array([2.0, 1.0, 3.0])
    e_min = min_energy(thetas, gammas, 1.0)
    p = PhaseProblem(thetas, gammas, 1.0, e_min * (1 + 1e-6))
    closed = solve_min_time(p)
    dual = solve_phase_dual(p)
    assert p.objective(dual.d) == pytest.approx(p.objective(closed.d), rel=1e-4)


def _oracle_two(p):
    """brute force for N = 2: grid over d_1 plus bounded refinement, d_2 from the budget."""
    g1, g2 = p.gammas
    th1, th2 = p.thetas
    floor2 = energy_for_time(1e7, g2, p.s_bar)

    def d2_of(d1):
        rest = p.budget - energy_for_time(d1, g1, p.s_bar)
        if rest <= floor2:
            return math.inf
        d2 = brentq(lambda d: energy_for_time(d, g2, p.s_bar) - rest, 1e-3, 1e7, xtol=1e-14, rtol=1e-15)
        return max(th2, d2)

    def objective(d1):
        return d1 + d2_of(d1)

    grid = np.geomspace(max(th1, 1e-2), 1e3, 4000)
    values = np.array([objective(d) for d in grid])
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    best = minimize_scalar(objective, bounds=(lo, hi), method='bounded', options={'xatol': 1e-12})
    return min(best.fun, values[k])


def test_dual_matches_brute_force_on_random_pairs():
    rng = np.random.default_rng(3)
    for _ in range(50):
        gammas = rng.uniform(0.5, 2.0, 2)
        thetas = rng.uniform(0.0, 1.5, 2)
        floor = float(np.sum(LN2 / gammas))
        p = PhaseProblem(thetas, gammas, 1.0, floor * (1 + rng.uniform(0.2, 3.0)))
        sol = solve_phase(p)
        assert p.objective(sol.d) == pytest.approx(_oracle_two(p), rel=1e-4)
        assert sol.e.sum() <= p.budget * (1 + 1e-8)
        assert np.all(sol.d >= p.thetas)


def test_dual_kkt_residual_on_random_triples():
    rng = np.random.default_rng(5)
    for _ in range(50):
        gammas = rng.uniform(0.5, 2.0, 3)
        thetas = np.zeros(3)
        floor = float(np.sum(LN2 / gammas))
        p = PhaseProblem(thetas, gammas, 1.0, floor * (1 + rng.uniform(0.2, 3.0)))
        sol = solve_phase_dual(p)
        psi = p.weights * p.gammas / (sol.lam_opt * (p.n - 1))
        residual = np.array([_f(p.s_bar / d) for d in sol.d]) - psi
        assert np.all(np.abs(residual) <= 1e-6 * psi)
        assert abs(sol.e.sum() - p.budget) <= 1e-8 * p.budget


def test_times_given_lambda_clamps_at_theta():
    p = PhaseProblem(thetas=[5.0, 0.0], gammas=[1.0, 1.0], s_bar=1.0, budget=10.0)
    d = times_given_lambda(p, 1.0)
    assert d[0] == 5.0
    assert d[1] == pytest.approx(LN2, rel=1e-12)
    with pytest.raises(DomainError):
        times_given_lambda(p, 0.0)


def test_more_budget_never_hurts():
    gammas = np.array([1.0, 0.7, 1.5, 2.0])
    thetas = np.array([0.3, 0.6, 0.2, 0.0])
    floor = float(np.sum(LN2 / gammas))
    objectives = [PhaseProblem(thetas, gammas, 1.0, floor * k).objective(
        solve_phase(PhaseProblem(thetas, gammas, 1.0, floor * k)).d) for k in (1.1, 1.5, 3.0, 10.0, 100.0)]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(objectives, objectives[1:]))


def test_phase_problem_rejects_bad_input():
    with pytest.raises(DomainError):
        PhaseProblem([1.0], [1.0], 1.0, 1.0)
    with pytest.raises(DomainError):
        PhaseProblem([1.0, 1.0], [1.0, 0.0], 1.0, 1.0)
    with pytest.raises(DomainError):
        PhaseProblem([1.0, -1.0], [1.0, 1.0], 1.0, 1.0)


def test_reference_straight_baseline_allocation(scenario, straight):
    alloc = solve_p2(scenario, straight)
    assert check_feasible(scenario, straight, alloc).ok
    assert math.isfinite(peak_aoi(alloc))
    # the last downlink has no flight segment after it, so the UAV budget always binds
    assert alloc.e_down.sum() == pytest.approx(scenario.e_uav_j, rel=1e-7)


def test_large_budget_branches(scenario, straight):
    rich = scenario.replace(e_source_j=100.0, e_uav_j=100.0)
    up = solve_phase(phase_problem(rich, straight, Phase.UP))
    down = solve_phase(phase_problem(rich, straight, Phase.DOWN))
    assert up.branch is Branch.MIN_TIME
    assert up.d == pytest.approx(np.full(10, THETA_REF), rel=1e-12)
    assert down.branch is Branch.DUAL


def test_infeasible_phase_is_named(scenario, straight):
    with pytest.raises(InfeasibleError) as info:
        solve_p2(scenario.replace(e_source_j=0.1), straight)
    assert info.value.phase == 'up'


def test_energy_for_time_inverts_throughput():
    rng = np.random.default_rng(13)
    d = rng.uniform(0.2, 20.0, 500)
    g = rng.uniform(0.1, 10.0, 500)
    e = energy_for_time(d, g, 1.0)
    assert throughput(d, e, g) == pytest.approx(np.ones(500), rel=1e-12)


def test_energy_for_time_tends_to_the_floor():
    # d / gamma (2^(S/d) - 1) -> S ln2 / gamma as d grows
    for gamma in (0.5, 1.0, 4.0):
        assert energy_for_time(1e9, gamma, 1.0) == pytest.approx(LN2 / gamma, rel=1e-8)


def test_root_find_f_recovers_known_roots():
    assert root_find_f(_f(1.0)) == pytest.approx(1.0, rel=1e-10)
    assert root_find_f(_f(5.0)) == pytest.approx(5.0, rel=1e-10)


def _random_triple(rng):
    gammas = rng.uniform(0.5, 2.0, 3)
    thetas = rng.uniform(0.0, 1.5, 3)
    floor = float(np.sum(LN2 / gammas))
    return PhaseProblem(thetas, gammas, 1.0, floor * (1 + rng.uniform(0.2, 3.0)))


def _oracle_slsqp(p):
    """generic constrained minimizer over d with the energy budget as an inequality."""
    lower = np.maximum(p.thetas, 0.05)
    result = minimize(p.objective, np.maximum(lower, 50.0), method='SLSQP',
                      bounds=[(lo, 1e3) for lo in lower],
                      constraints=[{'type': 'ineq',
                                    'fun': lambda d: p.budget - np.sum(energy_for_time(d, p.gammas, p.s_bar))}],
                      options={'ftol': 1e-12, 'maxiter': 1000})
    assert np.sum(energy_for_time(result.x, p.gammas, p.s_bar)) <= p.budget * (1 + 1e-8)
    return result.fun


def test_dual_matches_generic_solver_on_random_triples():
    rng = np.random.default_rng(17)
    for _ in range(30):
        p = _random_triple(rng)
        sol = solve_phase(p)
        ours = p.objective(sol.d)
        oracle = _oracle_slsqp(p)
        assert ours <= oracle * (1 + 1e-6)
        assert ours == pytest.approx(oracle, rel=1e-4)
        assert sol.e.sum() <= p.budget * (1 + 1e-8)


def test_energy_use_does_not_grow_with_lambda():
    rng = np.random.default_rng(19)
    for _ in range(5):
        p = _random_triple(rng)
        used = [float(np.sum(energy_for_time(times_given_lambda(p, lam), p.gammas, p.s_bar)))
                for lam in np.geomspace(1e-3, 1e3, 50)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(used, used[1:]))


def test_service_times_grow_with_lambda():
    p = PhaseProblem(thetas=[0.0, 0.0, 0.0, 0.0], gammas=[1.5, 0.7, 2.0, 1.0], s_bar=1.0, budget=5.0)
    times = np.array([times_given_lambda(p, lam) for lam in np.geomspace(1e-2, 1e2, 50)])
    assert np.all(np.diff(times, axis=0) > 0)
    clamped = PhaseProblem([2.0, 0.0], [1.0, 1.0], 1.0, 5.0)
    times = np.array([times_given_lambda(clamped, lam) for lam in np.geomspace(1e-2, 1e2, 50)])
    assert np.all(np.diff(times, axis=0) >= 0)


def test_scaling_gamma_and_budget_keeps_service_times():
    rng = np.random.default_rng(23)
    for _ in range(10):
        p = _random_triple(rng)
        k = rng.uniform(0.1, 10.0)
        scaled = PhaseProblem(p.thetas, p.gammas * k, p.s_bar, p.budget / k)
        assert solve_phase(scaled).d == pytest.approx(solve_phase(p).d, rel=1e-6)


def test_better_channel_gets_shorter_service():
    pair = solve_phase_dual(PhaseProblem([0.0, 0.0], [2.0, 1.0], 1.0, 2.0))
    assert pair.d[0] < pair.d[1]
    # the two middle packets share the same weight
    four = solve_phase_dual(PhaseProblem([0.0] * 4, [1.0, 3.0, 0.8, 1.0], 1.0, 4.0))
    assert four.d[1] < four.d[2]
