"""
Property-based tests for the distributed power-command and observer dynamics.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfreq.consensus import (
    ObserverState,
    PowerCommandState,
    consensus_layer,
    equilibrium_balance_check,
    observer_rhs,
    pc_rhs,
)
from gridfreq.network import NetworkModel
from gridfreq.simulation.state import SimulationState
from tests.helpers import chain, generator


def _snapshot(**overrides) -> SimulationState:
    values = dict(
        t=0.0, x=np.zeros(0), eta=np.zeros(0), omega=np.zeros(1), pc=np.array([1.0]), psi=np.zeros(0),
        flows=np.zeros(0), p_M=np.array([1.0]), d_c=np.zeros(1), d_u=np.zeros(1), p_L=np.array([1.0]),
    )
    values.update(overrides)
    return SimulationState(**values)


def test_link_integral_follows_command_difference() -> None:
    """Test dpsi = -(E' p_c) / gamma on one link."""
    network = chain([generator("a"), generator("b")])
    out = pc_rhs(PowerCommandState(pc=[1.0, 0.0], psi=[0.0]), s=[0.0, 0.0], p_L=[0.0, 0.0], network=network)
    assert out.psi == pytest.approx([1.0])
    assert out.pc == pytest.approx([0.0, 0.0])


def test_single_bus_command_integrates_imbalance() -> None:
    """Test dp_c = -(s - p_L) / gamma on an isolated bus."""
    network = NetworkModel(buses=(generator("a"),))
    out = pc_rhs(PowerCommandState(pc=[0.0], psi=[]), s=[0.5], p_L=[1.0], network=network)
    assert out.pc == pytest.approx([0.5])
    assert out.psi.shape == (0,)


def test_gamma_scales_the_command_rate() -> None:
    """Test that a larger gamma slows the command."""
    network = NetworkModel(buses=(generator("a", gamma=4.0),))
    out = pc_rhs(PowerCommandState(pc=[0.0], psi=[]), s=[0.0], p_L=[1.0], network=network)
    assert out.pc == pytest.approx([0.25])


# Feature: consensus-layer, Property 1: Agreement with balance is an equilibrium
@given(
    price=st.floats(min_value=-3.0, max_value=3.0),
    loads=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=3, max_size=3),
)
@settings(max_examples=100)
def test_agreement_is_equilibrium(price: float, loads) -> None:
    """
    Property 1: Agreement with balance is an equilibrium
    Equal power commands, local supply matching local load and zero link
    integrals give zero derivatives.
    """
    network = chain([generator("a"), generator("b"), generator("c")])
    state = PowerCommandState(pc=[price] * 3, psi=[0.0, 0.0])
    out = pc_rhs(state, s=loads, p_L=loads, network=network)
    assert np.allclose(out.pc, 0.0)
    assert np.allclose(out.psi, 0.0)


# Feature: consensus-layer, Property 2: The command total moves with the total imbalance
@given(
    pc=st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=3, max_size=3),
    psi=st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=2, max_size=2),
    s=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=3, max_size=3),
)
@settings(max_examples=100)
def test_links_do_not_change_command_total(pc, psi, s) -> None:
    """
    Property 2: The command total moves with the total imbalance
    With unit gammas the link terms cancel in the sum, so sum dp_c = -sum(s - p_L).
    """
    network = chain([generator("a"), generator("b"), generator("c")])
    out = pc_rhs(PowerCommandState(pc=pc, psi=psi), s=s, p_L=[0.0, 0.0, 0.0], network=network)
    assert np.sum(out.pc) == pytest.approx(-np.sum(s), abs=1e-9)


def test_observer_equilibrium() -> None:
    """Test chi = p_L, b = omega + p_c + chi with balanced supply."""
    network = NetworkModel(buses=(generator("a", inertia=2.0),))
    commands = PowerCommandState(pc=[0.3], psi=[])
    observer = ObserverState(b=[1.3], chi=[1.0], tau_chi=[1.0])
    out = observer_rhs(commands, observer, s=[1.0], d_u=[0.0], flows=[], omega=[0.0], network=network)
    assert out.pc == pytest.approx([0.0])
    assert out.b == pytest.approx([0.0])
    assert out.chi == pytest.approx([0.0])
    assert out.chi_all == pytest.approx([1.0])


def test_observer_at_rest() -> None:
    """Test that all-zero observer states stay at rest."""
    network = chain([generator("a"), generator("b")])
    commands = PowerCommandState(pc=[0.0, 0.0], psi=[0.0])
    observer = ObserverState(b=[0.0, 0.0], chi=[0.0, 0.0], tau_chi=[1.0, 1.0])
    out = observer_rhs(commands, observer, s=[0.0, 0.0], d_u=[0.0, 0.0], flows=[0.0], omega=[0.0, 0.0],
                       network=network)
    for part in (out.pc, out.psi, out.b, out.chi):
        assert np.allclose(part, 0.0)


def test_observer_rejects_nonpositive_time_constant() -> None:
    """Test the tau_chi validation."""
    with pytest.raises(ValueError):
        ObserverState(b=[0.0], chi=[0.0], tau_chi=[0.0])


def test_balance_check_accepts_balanced_snapshot() -> None:
    """Test a snapshot whose supply covers the load."""
    report = equilibrium_balance_check(_snapshot())
    assert report.ok


def test_balance_check_flags_biased_supply() -> None:
    """Test that a supply surplus is reported."""
    report = equilibrium_balance_check(_snapshot(p_M=np.array([1.1])))
    assert "supply_balance" in report.violations
    assert report.residuals["supply_balance"] == pytest.approx(0.1)


def test_balance_check_flags_observer_bias() -> None:
    """Test the chi = p_L condition in observer mode."""
    report = equilibrium_balance_check(_snapshot(chi=np.array([0.5]), b=np.array([0.0])))
    assert "observer" in report.violations
    assert equilibrium_balance_check(_snapshot(chi=np.array([0.5]), b=np.array([0.0])), observer=False).ok


def test_layer_is_reused_for_the_same_network() -> None:
    """Test that repeated calls on one network share the precomputed layer."""
    network = chain([generator("G1"), generator("G2")])
    layer = consensus_layer(network)
    assert consensus_layer(network) is layer
    assert consensus_layer(network, du_scale=0.5) is not layer
    assert consensus_layer(network, du_scale=0.5).du_scale == 0.5
    other = chain([generator("G1"), generator("G2")])
    assert consensus_layer(other).network is other


def test_repeated_pc_rhs_matches_fresh_layer() -> None:
    """Test that the cached layer gives the same derivatives as a new one."""
    network = chain([generator("G1"), generator("G2")])
    state = PowerCommandState(pc=[0.2, -0.1], psi=[0.3])
    s = np.array([0.5, 0.0])
    p_L = np.array([0.0, 1.0])
    first = pc_rhs(state, s, p_L, network)
    second = pc_rhs(state, s, p_L, network)
    assert np.allclose(first[0], second[0]) and np.allclose(first[1], second[1])
    assert np.allclose(first[0], [(-0.5 - 0.3) / 1.0, (1.0 + 0.3) / 1.0])
