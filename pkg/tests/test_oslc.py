"""
Property-based tests for the optimal supply and load control dispatch.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gridfreq.exceptions import ConfigurationError, InfeasibleDispatchError
from gridfreq.oslc import (
    OslcProblem,
    QuadraticCost,
    UserCost,
    marginal_cost,
    oslc_blocks,
    solve_oslc,
    synthesize_controller_maps,
    verify_kkt,
)


def test_two_generators_share_by_marginal_cost() -> None:
    """Test kappa = (1, 2) with a total step of 3."""
    problem = OslcProblem(disturbance=(3.0, 0.0), supply_costs=(QuadraticCost(1.0), QuadraticCost(2.0)))
    solution = solve_oslc(problem)
    assert solution.supply == pytest.approx([2.0, 1.0])
    assert solution.price == pytest.approx(2.0)
    assert solution.total_cost(problem) == pytest.approx(0.5 * 4.0 + 0.5 * 2.0 * 1.0)


def test_disturbance_location_does_not_change_allocation() -> None:
    """Test that only the total step matters for the allocation."""
    costs = (QuadraticCost(1.0), QuadraticCost(2.0))
    here = solve_oslc(OslcProblem(disturbance=(3.0, 0.0), supply_costs=costs))
    there = solve_oslc(OslcProblem(disturbance=(1.5, 1.5), supply_costs=costs))
    assert here.supply == pytest.approx(there.supply)


def test_saturated_generator_gets_positive_multiplier() -> None:
    """Test an upper bound that binds at the optimum."""
    problem = OslcProblem(
        disturbance=(3.0, 0.0),
        supply_costs=(QuadraticCost(1.0, upper=1.0), QuadraticCost(1.0)),
    )
    solution = solve_oslc(problem)
    assert solution.supply == pytest.approx([1.0, 2.0])
    assert solution.price == pytest.approx(2.0)
    assert solution.lambda_upper[0] == pytest.approx(1.0)
    assert solution.lambda_upper[1] == pytest.approx(0.0)
    assert verify_kkt(problem, solution).ok


def test_generator_and_controllable_load_split_the_step() -> None:
    """Test one generator and one load with equal unit costs."""
    problem = OslcProblem(
        disturbance=(0.0, 1.0),
        supply_costs=(QuadraticCost(1.0), None),
        demand_costs=(None, QuadraticCost(1.0)),
    )
    solution = solve_oslc(problem)
    assert solution.price == pytest.approx(0.5)
    assert solution.supply == pytest.approx([0.5, 0.0])
    assert solution.demand == pytest.approx([0.0, -0.5])


def test_infeasible_step_raises() -> None:
    """Test that a step beyond every upper bound is rejected."""
    problem = OslcProblem(disturbance=(3.0,), supply_costs=(QuadraticCost(1.0, 0.0, 1.0),))
    with pytest.raises(InfeasibleDispatchError) as info:
        solve_oslc(problem)
    assert info.value.upper == pytest.approx(1.0)


def test_user_cost_dispatch() -> None:
    """Test a non-quadratic cost with C' = sinh."""
    cost = UserCost(np.sinh, np.arcsinh)
    solution = solve_oslc(OslcProblem(disturbance=(1.0,), supply_costs=(cost,)))
    assert solution.supply == pytest.approx([1.0])
    assert solution.price == pytest.approx(np.sinh(1.0))


def test_kkt_accepts_solver_output() -> None:
    """Test that the solver's own solution passes the KKT check."""
    problem = OslcProblem(
        disturbance=(1.0, 0.5, 0.0),
        supply_costs=(QuadraticCost(1.0), None, QuadraticCost(3.0, -1.0, 0.2)),
        demand_costs=(None, QuadraticCost(2.0), None),
    )
    report = verify_kkt(problem, solve_oslc(problem))
    assert report.ok
    assert set(report.residuals) == {"stationarity", "balance", "bounds", "dual_feasibility", "complementarity"}


def test_kkt_flags_unbalanced_candidate() -> None:
    """Test that moving one allocation breaks the balance condition."""
    problem = OslcProblem(disturbance=(3.0, 0.0), supply_costs=(QuadraticCost(1.0), QuadraticCost(2.0)))
    solution = solve_oslc(problem)
    perturbed = solution.model_copy(update={"supply": [solution.supply[0] + 0.1, solution.supply[1]]})
    report = verify_kkt(problem, perturbed)
    assert "balance" in report.violations


def test_kkt_flags_negative_multiplier() -> None:
    """Test the dual feasibility condition."""
    problem = OslcProblem(disturbance=(1.0,), supply_costs=(QuadraticCost(1.0),))
    solution = solve_oslc(problem)
    flipped = solution.model_copy(update={"lambda_lower": [-0.5]})
    assert "dual_feasibility" in verify_kkt(problem, flipped).violations


def test_controller_maps() -> None:
    """Test k_pM and k_dc with unit costs and with a bounded supply."""
    k_pM, k_dc = synthesize_controller_maps(QuadraticCost(1.0), QuadraticCost(1.0))
    assert k_pM([0.0, 2.0]) == pytest.approx(2.0)
    assert k_dc([0.0, 2.0]) == pytest.approx(-2.0)
    bounded, none = synthesize_controller_maps(QuadraticCost(1.0, 0.0, 1.0), None)
    assert bounded([0.0, 2.0]) == pytest.approx(1.0)
    assert none is None


def test_controller_maps_reject_other_price_functions() -> None:
    """Test that only p_c - omega is accepted."""
    with pytest.raises(ConfigurationError):
        synthesize_controller_maps(QuadraticCost(1.0), None, f="p_c")


def test_non_monotone_marginal_cost_is_rejected() -> None:
    """Test that a concave cost fails the strict convexity check."""
    concave = UserCost(lambda p: -p, lambda c: -c)
    with pytest.raises(ConfigurationError):
        synthesize_controller_maps(concave, None)


def test_oslc_blocks_reproduce_maps() -> None:
    """Test that the synthesized blocks settle to the map values."""
    supply, demand = oslc_blocks(QuadraticCost(2.0), QuadraticCost(4.0), demand_tau=1.5)
    assert demand.n_states == 1
    _, p = supply.equilibrium(np.array([-0.1, 0.5]))
    _, d = demand.equilibrium(np.array([-0.1, 0.5]))
    assert p == pytest.approx(0.4 / 2.0)
    assert d == pytest.approx(-0.4 / 4.0)


def test_oslc_blocks_hold_the_synthesized_maps() -> None:
    """Test that oslc_blocks wires the synthesized maps into its blocks."""
    supply, demand = oslc_blocks(QuadraticCost(2.0, -0.3, 0.3), QuadraticCost(4.0), demand_tau=1.5)
    assert supply.k.sign == 1.0 and demand.k.sign == -1.0
    assert supply.cost.upper == pytest.approx(0.3)


def test_map_of_wrong_sign_is_rejected() -> None:
    """Test that a k_dc map cannot drive a supply block."""
    from gridfreq.devices.blocks import StaticSupply

    _, k_dc = synthesize_controller_maps(None, QuadraticCost(1.0))
    with pytest.raises(ValueError):
        StaticSupply.from_map(k_dc)


# Feature: oslc-dispatch, Property 3: Static OSLC blocks output the synthesized maps
@given(
    kappa_s=st.floats(min_value=0.2, max_value=5.0),
    kappa_d=st.floats(min_value=0.2, max_value=5.0),
    bound=st.one_of(st.none(), st.floats(min_value=0.05, max_value=1.0)),
    omega=st.floats(min_value=-2.0, max_value=2.0),
    pc=st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=100)
def test_static_blocks_output_synthesized_maps(kappa_s, kappa_d, bound, omega, pc) -> None:
    """
    Property 3: Static OSLC blocks output the synthesized maps

    For any costs, saturated or not, and any zeta, the static supply and demand
    outputs equal k_pM(zeta) and k_dc(zeta).
    """
    lower, upper = (-np.inf, np.inf) if bound is None else (-bound, bound)
    supply_cost = QuadraticCost(kappa_s, lower, upper)
    demand_cost = QuadraticCost(kappa_d, lower, upper)
    k_pM, k_dc = synthesize_controller_maps(supply_cost, demand_cost)
    supply, demand = oslc_blocks(supply_cost, demand_cost)
    zeta = np.array([-omega, pc])
    assert supply.output(np.zeros(0), zeta) == pytest.approx(k_pM(zeta))
    assert demand.output(np.zeros(0), zeta) == pytest.approx(k_dc(zeta))
    if bound is not None:
        assert abs(supply.output(np.zeros(0), zeta)) <= bound + 1e-12


# Feature: oslc-dispatch, Property 4: Dynamic OSLC demand settles to k_dc
@given(
    kappa=st.floats(min_value=0.2, max_value=5.0),
    tau=st.floats(min_value=0.1, max_value=5.0),
    bound=st.one_of(st.none(), st.floats(min_value=0.05, max_value=1.0)),
    omega=st.floats(min_value=-2.0, max_value=2.0),
    pc=st.floats(min_value=-2.0, max_value=2.0),
)
@settings(max_examples=100)
def test_dynamic_demand_settles_to_synthesized_map(kappa, tau, bound, omega, pc) -> None:
    """
    Property 4: Dynamic OSLC demand settles to k_dc

    The derivative vanishes exactly when the state equals k_dc(zeta).
    """
    lower, upper = (-np.inf, np.inf) if bound is None else (-bound, bound)
    cost = QuadraticCost(kappa, lower, upper)
    _, k_dc = synthesize_controller_maps(None, cost)
    _, demand = oslc_blocks(None, cost, demand_tau=tau)
    zeta = np.array([-omega, pc])
    target = k_dc(zeta)
    assert demand.derivative(np.array([target]), zeta)[0] == pytest.approx(0.0, abs=1e-12)
    assert demand.derivative(np.array([target + 1.0]), zeta)[0] == pytest.approx(-1.0 / tau)


def test_marginal_cost_examples() -> None:
    """Test C'(p) at a few points."""
    assert marginal_cost(QuadraticCost(2.0), 1.0) == pytest.approx(2.0)
    assert marginal_cost(QuadraticCost(1.0), 0.0) == pytest.approx(0.0)
    assert marginal_cost(QuadraticCost(20.0), 0.1) == pytest.approx(2.0)


# Feature: oslc-dispatch, Property 1: Solver output satisfies KKT
@given(
    data=st.lists(
        st.tuples(
            st.floats(min_value=-1.0, max_value=1.0),
            st.one_of(st.none(), st.floats(min_value=0.2, max_value=5.0)),
            st.one_of(st.none(), st.floats(min_value=0.2, max_value=5.0)),
        ),
        min_size=1,
        max_size=5,
    )
)
@settings(max_examples=100, deadline=None)
def test_solution_satisfies_kkt(data) -> None:
    """
    Property 1: Solver output satisfies KKT
    For any problem with at least one participant, the solution balances the
    step and satisfies every KKT condition.
    """
    assume(any(s is not None or d is not None for _, s, d in data))
    problem = OslcProblem(
        disturbance=tuple(p for p, _, _ in data),
        supply_costs=tuple(None if s is None else QuadraticCost(s) for _, s, _ in data),
        demand_costs=tuple(None if d is None else QuadraticCost(d) for _, _, d in data),
    )
    solution = solve_oslc(problem)
    report = verify_kkt(problem, solution)
    assert report.ok, report.residuals
    assert np.sum(solution.supply) - np.sum(solution.demand) == pytest.approx(problem.total_disturbance, abs=1e-8)


# Feature: oslc-dispatch, Property 2: Solver matches a brute-force search
@given(
    kappa=st.tuples(st.floats(min_value=0.5, max_value=5.0), st.floats(min_value=0.5, max_value=5.0)),
    upper=st.tuples(st.floats(min_value=0.5, max_value=3.0), st.floats(min_value=0.5, max_value=3.0)),
    share=st.floats(min_value=0.0, max_value=0.999),
)
@settings(max_examples=50, deadline=None)
def test_matches_grid_search(kappa, upper, share) -> None:
    """
    Property 2: Solver matches a brute-force search
    On two bounded generators the optimum agrees with a 1e-3 grid search along
    the balance line.
    """
    total = share * (upper[0] + upper[1])
    problem = OslcProblem(
        disturbance=(total, 0.0),
        supply_costs=(QuadraticCost(kappa[0], 0.0, upper[0]), QuadraticCost(kappa[1], 0.0, upper[1])),
    )
    lo, hi = max(0.0, total - upper[1]), min(upper[0], total)
    assume(hi >= lo)
    grid = np.linspace(lo, hi, max(2, int(np.ceil((hi - lo) / 1e-3)) + 1))
    costs = 0.5 * kappa[0] * grid ** 2 + 0.5 * kappa[1] * (total - grid) ** 2
    best = grid[int(np.argmin(costs))]

    solution = solve_oslc(problem)
    assert solution.supply[0] == pytest.approx(best, abs=1e-2)
    assert solution.supply[1] == pytest.approx(total - best, abs=1e-2)
