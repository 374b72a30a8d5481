"""
Tests for the closed-loop equilibrium, its optimality and the Lyapunov
function along trajectories.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfreq.network import NetworkModel
from gridfreq.simulation import (
    angles_from_eta,
    check_monotone,
    dispatch_problem,
    find_equilibrium,
    integrate,
    lyapunov_breakdown,
    lyapunov_series,
    potential_energy,
)
from gridfreq.simulation.state import LyapunovBreakdown
from tests.helpers import bundled, chain, generator, load, single_generator_scenario

BUNDLED = ["tutorial_4bus", "mixed_10bus", "observer_4bus"]


def test_single_generator_equilibrium() -> None:
    """Test p_c* = 1 and p_M = 1 for a unit step on one unit-cost generator."""
    snapshot, report = find_equilibrium(single_generator_scenario())
    assert snapshot.pc == pytest.approx([1.0], abs=1e-8)
    assert snapshot.p_M == pytest.approx([1.0], abs=1e-8)
    assert snapshot.omega == pytest.approx([0.0], abs=1e-8)
    assert report.ok
    assert report.path == "newton"


def test_tutorial_equilibrium_is_optimal() -> None:
    """Test the tutorial steady state against the dispatch optimum."""
    scenario = bundled("tutorial_4bus")
    snapshot, report = find_equilibrium(scenario)
    # total supply sensitivity 1 + 1/2 + 1/2 + 1/4
    assert report.dispatch.price == pytest.approx(1.0 / 2.25)
    assert report.ok
    assert report.kkt.ok
    assert report.dispatch_gap < 1e-6
    assert snapshot.pc == pytest.approx([1.0 / 2.25] * 4, abs=1e-7)
    assert report.security_ok
    assert report.frequency < 1e-7


def test_dispatch_problem_from_network() -> None:
    """Test that bus devices become per-bus costs."""
    network = chain([generator("G1", cost=2.0), load("L2", cost=3.0), load("L3")])
    problem = dispatch_problem(network, np.array([0.0, 1.0, 0.0]))
    assert problem.supply_costs[0].coefficient == pytest.approx(2.0)
    assert problem.supply_costs[1] is None
    assert problem.demand_costs[1].coefficient == pytest.approx(3.0)
    assert problem.demand_costs[2] is None


def test_angles_reproduce_line_differences() -> None:
    """Test that tree angles give back eta = theta_tail - theta_head."""
    network = chain([generator("a"), generator("b"), generator("c")])
    eta = np.array([0.2, -0.1])
    theta = angles_from_eta(network, eta)
    assert theta[0] == 0.0
    assert theta[0] - theta[1] == pytest.approx(0.2)
    assert theta[1] - theta[2] == pytest.approx(-0.1)


def test_observer_equilibrium_estimates_the_load() -> None:
    """Test chi = p_L at generator buses in observer mode."""
    scenario = bundled("observer_4bus")
    snapshot, report = find_equilibrium(scenario)
    gen = scenario.network.generator_indices
    assert snapshot.chi[gen] == pytest.approx(snapshot.p_L[gen], abs=1e-6)
    assert report.balance.ok
    assert report.ok


def test_lyapunov_vanishes_at_equilibrium() -> None:
    """Test V = 0 when the snapshot is the equilibrium itself."""
    scenario = bundled("tutorial_4bus")
    snapshot, _ = find_equilibrium(scenario)
    breakdown = lyapunov_breakdown(snapshot, scenario, snapshot)
    assert breakdown.total == pytest.approx(0.0, abs=1e-12)
    assert breakdown.storage_complete


def test_lyapunov_breakdown_total() -> None:
    """Test that the total sums every component."""
    breakdown = LyapunovBreakdown(V_F=1.0, V_P=2.0, V_C=3.0, V_psi=4.0, V_D=5.0, V_b=6.0)
    assert breakdown.total == pytest.approx(21.0)


# Feature: lyapunov, Property 1: Potential energy is locally quadratic
@given(
    eta_star=st.floats(min_value=-1.2, max_value=1.2),
    delta=st.floats(min_value=-1e-3, max_value=1e-3),
    susceptance=st.floats(min_value=0.5, max_value=20.0),
)
@settings(max_examples=100)
def test_potential_energy_is_locally_quadratic(eta_star: float, delta: float, susceptance: float) -> None:
    """
    Property 1: Potential energy is locally quadratic
    Near eta* the line term is B cos(eta*) delta^2 / 2 up to third order.
    """
    value = potential_energy(np.array([eta_star + delta]), np.array([eta_star]), np.array([susceptance]))
    expected = 0.5 * susceptance * np.cos(eta_star) * delta ** 2
    assert value == pytest.approx(expected, abs=susceptance * abs(delta) ** 3 + 1e-13)
    assert value >= -1e-13


def test_lyapunov_decreases_after_the_step() -> None:
    """Test that V never increases once the disturbance has been applied."""
    scenario = bundled("tutorial_4bus", t_end_s=40.0)
    equilibrium, _ = find_equilibrium(scenario)
    trajectory = integrate(scenario)
    series = lyapunov_series(trajectory, scenario, equilibrium)
    assert trajectory.lyapunov is series
    start = int(np.argmax(trajectory.t > 1.0 + 1e-9))
    report = check_monotone(series, start=start)
    assert report.checked
    assert report.non_increasing, report.relative_increase
    assert report.final_ratio < 1.0


@pytest.mark.slow
@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_runs_decay_over_full_horizon(name) -> None:
    """Test both Lyapunov bounds along every bundled run over its own horizon."""
    scenario = bundled(name)
    equilibrium, _ = find_equilibrium(scenario)
    trajectory = integrate(scenario, equilibrium=equilibrium)
    last_event = max(scenario.event_times(), default=0.0)
    start = int(np.searchsorted(trajectory.t, last_event, side="left"))
    report = check_monotone(trajectory.lyapunov, start=start)
    if not report.checked:
        pytest.skip(report.reason)
    assert trajectory.t[-1] == pytest.approx(scenario.sim.t_end_s)
    assert report.relative_increase <= 1e-6
    assert report.final_ratio is None or report.final_ratio <= 1e-3
    assert report.ok


def test_integrate_samples_lyapunov_with_equilibrium() -> None:
    """Test that integrate fills the V series when given the equilibrium."""
    scenario = single_generator_scenario(t_end_s=5.0)
    equilibrium, _ = find_equilibrium(scenario)
    plain = integrate(scenario)
    assert not plain.lyapunov
    sampled = integrate(scenario, equilibrium=equilibrium)
    assert len(sampled.lyapunov) == len(sampled)
    afterwards = lyapunov_series(plain, scenario, equilibrium)
    assert [v.total for v in sampled.lyapunov] == pytest.approx([v.total for v in afterwards], rel=1e-9, abs=1e-12)


def test_breakdown_dump_carries_total() -> None:
    """Test that the total V is part of the dumped breakdown."""
    dumped = LyapunovBreakdown(V_F=1.0, V_P=0.5, V_D=0.25).model_dump()
    assert dumped["total"] == pytest.approx(1.75)


def test_monotone_check_flags_increase() -> None:
    """Test that a rising series fails the check."""
    series = [LyapunovBreakdown(V_F=v) for v in (1.0, 0.5, 0.8)]
    report = check_monotone(series)
    assert not report.ok
    assert not report.non_increasing
    assert report.max_increase == pytest.approx(0.3)


def test_monotone_check_requires_decay() -> None:
    """Test that a falling series that stops short of final_tol fails."""
    slow = check_monotone([LyapunovBreakdown(V_F=v) for v in (1.0, 0.8, 0.5)])
    assert slow.non_increasing
    assert not slow.decayed
    assert not slow.ok
    assert slow.model_dump()["ok"] is False
    fast = check_monotone([LyapunovBreakdown(V_F=v) for v in (1.0, 0.1, 5e-4)])
    assert fast.ok
    assert check_monotone([LyapunovBreakdown(V_F=v) for v in (1.0, 0.8, 0.5)], final_tol=0.6).ok


def test_monotone_check_skipped_without_storage() -> None:
    """Test that incomplete storage disables the assertion."""
    series = [LyapunovBreakdown(V_F=v, storage_complete=False) for v in (1.0, 2.0)]
    report = check_monotone(series)
    assert not report.checked
    assert report.ok
    assert report.reason is not None


def test_equilibrium_without_lines() -> None:
    """Test an isolated generator network with a load step of -0.5."""
    network = NetworkModel(buses=(generator("G1", cost=2.0),))
    scenario = single_generator_scenario(step=-0.5).model_copy(update={"network": network})
    snapshot, report = find_equilibrium(scenario)
    assert snapshot.p_M == pytest.approx([-0.5], abs=1e-8)
    assert report.dispatch.price == pytest.approx(-1.0)
