"""
Property-based tests for device blocks, equilibria and realizations.
"""
import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfreq.devices import device_equilibrium, device_eval, linearize
from gridfreq.devices.base import Role
from gridfreq.devices.blocks import (
    CallableBlock,
    CubicDamping,
    DynamicDemand,
    FifthOrderTurbine,
    FirstOrderSupply,
    LagDamping,
    LinearDamping,
    PrefilteredBlock,
    SecondOrderTurbine,
    StaticDemand,
    StaticSupply,
)
from gridfreq.devices.params import FifthOrderTurbineParams, SecondOrderTurbineParams
from gridfreq.devices.realization import (
    assemble_bus_realization,
    governor_transfer_function,
    second_order_turbine_realization,
    tf_to_state_space,
)
from gridfreq.exceptions import DimensionError
from gridfreq.oslc import QuadraticCost


def test_first_order_supply_moves_toward_price() -> None:
    """Test dx = -mu (C'(x) - (p_c - omega)) at x = 0."""
    block = FirstOrderSupply(1.0, QuadraticCost(1.0))
    dx, y = device_eval(block, [0.0], [0.0, 2.0])
    assert dx == pytest.approx([2.0])
    assert y == pytest.approx(0.0)


def test_second_order_turbine_at_rest() -> None:
    """Test that the turbine is at rest with zero state and zero input."""
    block = SecondOrderTurbine(K=1.0, tau_a=1.0, tau_b=1.0, lambda_pc=0.5)
    dx, y = device_eval(block, [0.0, 0.0], [0.0, 0.0])
    assert np.allclose(dx, 0.0)
    assert y == pytest.approx(0.0)


def test_linear_damping_output() -> None:
    """Test d^u = lambda * omega with lambda = 2 and omega = 0.5."""
    _, y = device_eval(LinearDamping(2.0), [], [-0.5, 0.0])
    assert y == pytest.approx(1.0)


def test_wrong_state_length_raises() -> None:
    """Test that evaluation rejects a state of the wrong length."""
    with pytest.raises(DimensionError):
        device_eval(FirstOrderSupply(1.0, QuadraticCost(1.0)), [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(DimensionError):
        device_eval(LinearDamping(1.0), [], [0.0])


def test_turbine_equilibrium_combines_gain_and_static_path() -> None:
    """Test s - d^u = K p_c + lambda_pc p_c at omega = 0."""
    params = SecondOrderTurbineParams(K=1.0, tau_a=1.0, tau_b=1.0, damping=1.0, lambda_pc=0.5)
    assert params.supply_damping_share == 0.0
    x_bar, y_bar = device_equilibrium(SecondOrderTurbine.from_params(params), [0.0, 1.0])
    assert x_bar == pytest.approx([1.0, 1.0])
    assert y_bar == pytest.approx(1.5)


def test_static_supply_equilibrium() -> None:
    """Test a bounded static supply inside its bounds."""
    block = StaticSupply(QuadraticCost(1.0, -10.0, 10.0))
    x_bar, y_bar = device_equilibrium(block, [0.0, 2.0])
    assert x_bar.shape == (0,)
    assert y_bar == pytest.approx(2.0)


def test_static_supply_saturates() -> None:
    """Test that a price above the bound is clipped."""
    block = StaticSupply(QuadraticCost(1.0, -1.0, 1.0))
    _, y = device_eval(block, [], [0.0, 5.0])
    assert y == pytest.approx(1.0)


# Feature: device-blocks, Property 1: Equilibria are fixed points
@given(
    omega=st.floats(min_value=-1.0, max_value=1.0),
    pc=st.floats(min_value=-2.0, max_value=2.0),
    tau=st.floats(min_value=0.1, max_value=10.0),
    kappa=st.floats(min_value=0.2, max_value=5.0),
)
@settings(max_examples=50, deadline=None)
def test_equilibrium_is_fixed_point(omega: float, pc: float, tau: float, kappa: float) -> None:
    """
    Property 1: Equilibria are fixed points
    The derivative vanishes at the computed equilibrium and the output matches
    the static map of the block's cost.
    """
    zeta = [-omega, pc]
    for block, expected in (
        (FirstOrderSupply(1.0 / tau, QuadraticCost(kappa)), (pc - omega) / kappa),
        (DynamicDemand(tau, QuadraticCost(kappa)), (omega - pc) / kappa),
        (LagDamping(kappa, tau), kappa * omega),
    ):
        x_bar, y_bar = device_equilibrium(block, zeta)
        dx, y = device_eval(block, x_bar, zeta)
        assert np.max(np.abs(dx)) <= 1e-9
        assert y == pytest.approx(y_bar)
        assert y_bar == pytest.approx(expected, abs=1e-9)


def test_linearize_returns_exact_matrices_for_linear_blocks() -> None:
    """Test the first-order supply realization against its analytic form."""
    block = FirstOrderSupply(2.0, QuadraticCost(0.5))
    real = linearize(block, ([0.0], [0.0, 0.0]))
    assert np.allclose(real.A, [[-1.0]])
    assert np.allclose(real.B, [[2.0, 2.0]])
    assert np.allclose(real.C, [[1.0]])
    assert np.allclose(real.D, [[0.0, 0.0]])


def test_finite_differences_agree_with_exact_realization() -> None:
    """Test the central-difference Jacobian on a bounded (nonlinear) block."""
    bounded = FirstOrderSupply(1.0, QuadraticCost(1.0, -10.0, 10.0))
    assert not bounded.linear
    approx = linearize(bounded, ([0.0], [0.0, 0.0]))
    exact = FirstOrderSupply(1.0, QuadraticCost(1.0)).exact_realization()
    for name in ("A", "B", "C", "D"):
        assert np.allclose(getattr(approx, name), getattr(exact, name), atol=1e-6)


def test_cubic_damping_linearization() -> None:
    """Test that cubic damping linearizes to lambda + 3 c omega^2."""
    block = CubicDamping(1.0, 2.0)
    real = linearize(block, ([], [-0.5, 0.0]))
    # output d^u in terms of -omega
    assert real.D[0, 0] == pytest.approx(-(1.0 + 3 * 2.0 * 0.25), rel=1e-6)


def test_fifth_order_dc_gain() -> None:
    """Test that the governor transfer function has DC gain K."""
    params = FifthOrderTurbineParams(K=2.0, T_s=0.1, T_3=1.0, T_c=2.0, T_4=0.2, T_5=0.4, damping=1.0, lambda_pc=0.5)
    G, cancelled = governor_transfer_function(params)
    assert cancelled == []
    assert float(np.real(G.dcgain())) == pytest.approx(2.0)
    real = tf_to_state_space(params)
    assert real.transfer(0.0)[0, 1].real == pytest.approx(2.0 + 0.5)


def test_fifth_order_cancellation_reduces_order() -> None:
    """Test that T3 = Tc and T4 = T5 leave a single lag."""
    params = FifthOrderTurbineParams(K=1.0, T_s=0.5, T_3=2.0, T_c=2.0, T_4=0.3, T_5=0.3, damping=1.0, lambda_pc=0.5)
    real = tf_to_state_space(params)
    assert real.n_states == 1
    assert len(real.notes) == 2
    assert FifthOrderTurbine(params).n_states == 1


def test_fifth_order_transfer_matches_factored_form() -> None:
    """Test the realization against the factored G(s) at s = j."""
    params = FifthOrderTurbineParams(K=1.0, T_s=0.1, T_3=1.0, T_c=2.0, T_4=0.2, T_5=0.4, damping=1.0, lambda_pc=0.3)
    real = tf_to_state_space(params)
    s = 1j
    factored = 1.0 / (1 + 0.1 * s) * (1 + 1.0 * s) / (1 + 2.0 * s) * (1 + 0.2 * s) / (1 + 0.4 * s)
    assert real.n_states == 3
    assert abs(real.transfer(s)[0, 1] - params.lambda_pc - factored) <= 1e-10
    assert abs(real.transfer(s)[0, 0] - factored) <= 1e-10


def test_fifth_order_block_matches_its_realization() -> None:
    """Test that the simulated block and the bus realization agree at steady state."""
    params = FifthOrderTurbineParams(K=1.5, T_s=0.1, T_3=1.0, T_c=2.0, T_4=0.2, T_5=0.4, damping=1.0, lambda_pc=0.3)
    block = FifthOrderTurbine(params)
    _, y = device_equilibrium(block, [0.0, 1.0])
    assert y == pytest.approx(1.5 + 0.3)


def test_second_order_turbine_realization_matches_block() -> None:
    """Test the bus realization of the turbine against the block's own matrices."""
    params = SecondOrderTurbineParams(K=2.0, tau_a=0.5, tau_b=2.0, damping=1.0, lambda_pc=1.0)
    block = SecondOrderTurbine.from_params(params)
    bus = assemble_bus_realization([
        ("supply_pM", block.exact_realization()),
        ("damping_du", LinearDamping(params.damping).exact_realization()),
    ])
    reference = second_order_turbine_realization(params)
    for w in (0.0, 0.3, 3.0):
        assert np.allclose(bus.transfer(1j * w), reference.transfer(1j * w))


def test_prefilter_keeps_steady_state() -> None:
    """Test that the unity-DC-gain prefilter leaves the equilibrium output unchanged."""
    inner = DynamicDemand(2.0, QuadraticCost(3.0))
    wrapped = PrefilteredBlock(inner, t_lead=0.5, t_lag=2.0)
    assert wrapped.role is Role.DEMAND
    assert wrapped.n_states == 2
    _, y_inner = device_equilibrium(inner, [0.1, 0.7])
    _, y_wrapped = device_equilibrium(wrapped, [0.1, 0.7])
    assert y_wrapped == pytest.approx(y_inner)


def test_prefilter_realization_matches_linearization() -> None:
    """Test the analytic prefilter realization against finite differences."""
    exact = PrefilteredBlock(FirstOrderSupply(1.0, QuadraticCost(2.0)), t_lead=0.4, t_lag=1.0).exact_realization()
    bounded = PrefilteredBlock(FirstOrderSupply(1.0, QuadraticCost(2.0, -10.0, 10.0)), t_lead=0.4, t_lag=1.0)
    assert not bounded.linear
    x_bar, _ = device_equilibrium(bounded, [0.0, 0.0])
    numeric = linearize(bounded, (x_bar, [0.0, 0.0]))
    assert np.allclose(exact.transfer(0.7j), numeric.transfer(0.7j), atol=1e-6)


def test_prefilter_rejects_damping() -> None:
    """Test that damping blocks cannot be prefiltered."""
    with pytest.raises(ValueError):
        PrefilteredBlock(LinearDamping(1.0), 0.1, 1.0)


def test_callable_block() -> None:
    """Test a user-supplied block with a first-order lag."""
    block = CallableBlock(
        Role.SUPPLY,
        1,
        derivative=lambda x, zeta: [-(x[0] - (zeta[0] + zeta[1]))],
        output=lambda x, zeta: x[0],
        storage=[[0.5]],
        cost=QuadraticCost(1.0),
    )
    x_bar, y_bar = device_equilibrium(block, [0.0, 0.4])
    assert y_bar == pytest.approx(0.4)
    assert block.storage_matrix().shape == (1, 1)


def test_stacked_blocks_evaluate_like_individual_blocks() -> None:
    """Test that a stacked bank returns one output per member block."""
    blocks = [StaticDemand(QuadraticCost(2.0)), StaticDemand(QuadraticCost(4.0))]
    assert StaticDemand.can_stack(blocks)
    stacked = StaticDemand.stack(blocks)
    omega = np.array([0.1, -0.2])
    pc = np.array([0.5, 0.5])
    y = stacked.output(np.zeros((0, 2)), (-omega, pc))
    expected = [b.output(np.zeros(0), (-w, p)) for b, w, p in zip(blocks, omega, pc)]
    assert np.allclose(y, expected)


def test_mixed_block_types_do_not_stack() -> None:
    """Test that different block classes stay in separate banks."""
    assert not StaticDemand.can_stack([StaticDemand(QuadraticCost(1.0)), DynamicDemand(1.0, QuadraticCost(1.0))])
