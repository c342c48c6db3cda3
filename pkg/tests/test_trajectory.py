import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csprop.parser import parse_hamiltonian
from csprop.symbols import (
    OperatorPoly,
    ScaleParams,
    SymbolPoly,
    effective_symbol,
    q_symbol,
    symbol_eval,
)
from csprop.trajectory import (
    BoundaryData,
    CausticError,
    IntegrationError,
    action_second_derivative_fd,
    default_guess_grid,
    find_trajectories,
    hamilton_rhs,
    integrate_trajectory,
    prefactor,
    riccati_X,
    shoot,
    write_trajectory_csv,
)

SCALES = ScaleParams()
UV = SymbolPoly({(1, 1): 1.0}, SCALES)  # Weyl symbol of the oscillator
UV_HALF = SymbolPoly({(1, 1): 1.0, (0, 0): 0.5}, SCALES)  # its Q symbol


def quartic_mixed_symbol(scales=SCALES):
    op = parse_hamiltonian("0.5*p^2 + 0.5*q^2 + q^4", scales)
    return effective_symbol(op)


# -- Hamilton right-hand side ------------------------------------------------


def test_hamilton_rhs_oscillator():
    du, dv = hamilton_rhs(UV, 2.0 + 0.0j, 0.5j)
    assert du == pytest.approx(-1j * 2.0)
    assert dv == pytest.approx(1j * 0.5j)


def test_hamilton_rhs_constant():
    const = SymbolPoly({(0, 0): 3.0}, SCALES)
    assert hamilton_rhs(const, 1.0, 2.0) == (0.0, 0.0)


def test_oscillator_flow_closed_form():
    res = integrate_trajectory(UV, 1.0, -1.0j, math.pi / 2)
    assert abs(res.u_final - (-1.0j)) <= 1e-9
    assert abs(res.v_final - 1.0) <= 1e-9
    assert abs(res.S - (-1.0)) <= 1e-9
    assert abs(res.delta_v_final - 1.0j) <= 1e-9
    assert res.branch_phase == pytest.approx(math.pi / 2, abs=1e-9)


def test_time_zero_trajectory_is_boundary_term_only():
    H = quartic_mixed_symbol()
    res = integrate_trajectory(H, 0.7 + 0.1j, -0.2j, 0.0)
    assert res.S == pytest.approx(-1j * (0.7 + 0.1j) * (-0.2j))
    assert res.I == 0.0
    assert res.delta_v_final == 1.0
    assert res.branch_phase == 0.0


def test_q_symbol_oscillator_action_shift():
    # same flow as the Weyl symbol; S shifts by -hbar*omega*T/2, I = hbar*omega*T/2
    T = 1.3
    res_w = integrate_trajectory(UV, 1.0, -1.0j, T)
    res_q = integrate_trajectory(UV_HALF, 1.0, -1.0j, T)
    assert abs(res_q.u_final - res_w.u_final) <= 1e-9
    assert abs(res_q.S - (res_w.S - 0.5 * T)) <= 1e-9
    assert abs(res_q.I - 0.5 * T) <= 1e-12
    assert abs(res_w.I - 0.5 * T) <= 1e-12


def test_extra_integrands_are_integrated():
    # integrate a constant and u(t) = e^{-it} along the oscillator flow
    one = SymbolPoly({(0, 0): 1.0}, SCALES)
    u_mono = SymbolPoly({(0, 1): 1.0}, SCALES)
    T = 0.9
    res = integrate_trajectory(UV, 1.0, 0.5, T, extra_integrands=(one, u_mono))
    assert res.extras[0] == pytest.approx(T)
    expected = (1.0 - np.exp(-1j * T)) / 1j
    assert abs(res.extras[1] - expected) <= 1e-9


def test_energy_conservation_along_quartic_trajectory():
    H = quartic_mixed_symbol()
    res = integrate_trajectory(H, 0.6, 0.8, 1.5)
    values = [symbol_eval(H, u, v) for u, v in zip(res.u_samples, res.v_samples)]
    E0 = values[0]
    drift = max(abs(E - E0) for E in values)
    assert drift <= 10 * 1e-10 * (1.0 + abs(E0))


def test_integration_failure_reports():
    # inverted quartic blows up for large complex data
    op = parse_hamiltonian("0.5*p^2 - 2*q^4", SCALES)
    H = q_symbol(op)
    with pytest.raises(IntegrationError):
        integrate_trajectory(H, 4.0 + 4.0j, 4.0 - 4.0j, 50.0)


# -- shooting -----------------------------------------------------------------


def test_shoot_oscillator_closed_form_root():
    bd = BoundaryData(u_initial=1.0, v_final=1.0, T=math.pi / 2)
    res = shoot(UV, bd, v0_guess=0.3 + 0.2j)
    assert res.converged
    assert abs(res.v_initial - (-1.0j)) <= 1e-9
    assert abs(res.residual) <= 1e-10 * 2


def test_shoot_linear_problem_single_newton_step():
    # affine boundary map: exactly one undamped update from any guess
    for H in (UV, UV_HALF, SymbolPoly({(1, 1): 1.0, (0, 0): -0.5}, SCALES)):
        for guess in (0.0, 5.0 + 3.0j, -2.0j):
            res = shoot(H, BoundaryData(1.0, 1.0, 1.1), v0_guess=guess)
            assert res.converged
            assert res.iterations == 1


def test_shoot_time_zero_immediate():
    bd = BoundaryData(u_initial=0.3, v_final=0.9 - 0.4j, T=0.0)
    res = shoot(quartic_mixed_symbol(), bd, v0_guess=0.9 - 0.4j)
    assert res.converged
    assert res.iterations == 0
    assert res.v_initial == 0.9 - 0.4j


def test_shoot_quartic_regression():
    bd = BoundaryData(u_initial=0.5, v_final=0.5, T=0.5)
    res = shoot(quartic_mixed_symbol(), bd, v0_guess=0.5)
    assert res.converged
    assert res.iterations <= 15
    assert abs(res.residual) <= 1e-10 * (1 + abs(bd.v_final))
    # damped Newton: residual history decreases monotonically
    hist = res.residual_history
    assert all(b < a for a, b in zip(hist, hist[1:]))


def test_shoot_residual_decrease_on_longer_quartic():
    bd = BoundaryData(u_initial=1.0, v_final=1.0, T=2.0)
    res = shoot(quartic_mixed_symbol(), bd, v0_guess=1.0)
    if res.converged:
        hist = res.residual_history
        assert all(b < a for a, b in zip(hist, hist[1:]))


def test_tangent_flow_matches_finite_difference():
    H = quartic_mixed_symbol()
    u0, v0, T = 0.4, 0.7, 1.0
    eps = 1e-6
    base = integrate_trajectory(H, u0, v0, T)
    pert = integrate_trajectory(H, u0, v0 + eps, T)
    fd_du = (pert.u_final - base.u_final) / eps
    fd_dv = (pert.v_final - base.v_final) / eps
    # du(T), dv(T) differentiate the flow with respect to v(0)
    assert abs(base.du_samples[-1] - fd_du) <= 1e-4 * (1 + abs(fd_du))
    assert abs(base.dv_samples[-1] - fd_dv) <= 1e-4 * (1 + abs(fd_dv))


# -- multi-start --------------------------------------------------------------


def test_find_trajectories_oscillator_unique_root():
    bd = BoundaryData(1.0, 1.0, math.pi / 2)
    grid = default_guess_grid(1.0, 1.0, size=5)
    assert len(grid) == 25
    roots = find_trajectories(UV, bd, grid)
    assert len(roots) == 1
    assert abs(roots[0].v_initial - (-1.0j)) <= 1e-8


def test_find_trajectories_time_zero():
    bd = BoundaryData(0.5, 1.0 - 0.5j, 0.0)
    roots = find_trajectories(quartic_mixed_symbol(), bd, [1.0 - 0.5j])
    assert len(roots) == 1
    assert roots[0].v_initial == 1.0 - 0.5j


def test_find_trajectories_quartic_multistart_regression():
    bd = BoundaryData(1.0, 1.0, 3.0)
    grid = default_guess_grid(1.0, 1.0, size=5)
    roots = find_trajectories(quartic_mixed_symbol(), bd, grid, max_iter=20)
    assert len(roots) >= 1
    # sorted by |Im S| ascending
    ims = [abs(r.S.imag) for r in roots]
    assert ims == sorted(ims)


def test_find_trajectories_requires_grid():
    with pytest.raises(ValueError):
        find_trajectories(UV, BoundaryData(0, 0, 1.0), [])


# -- Riccati and prefactor -----------------------------------------------------


def test_riccati_oscillator_identically_zero():
    bd = BoundaryData(1.0, 1.0, 1.0)
    traj = shoot(UV, bd, 1.0)
    ricc = riccati_X(UV, traj)
    assert np.max(np.abs(ricc.X)) <= 1e-12


def test_riccati_tangent_identity_quartic():
    H = quartic_mixed_symbol()
    bd = BoundaryData(0.5, 0.5, 1.0)
    traj = shoot(H, bd, 0.5)
    ricc = riccati_X(H, traj)
    mask = np.abs(ricc.dv_samples) > 1e-8
    dev = np.abs(ricc.X[mask] - ricc.du_samples[mask] / (2.0 * ricc.dv_samples[mask]))
    assert np.max(dev) <= 1e-6
    assert ricc.X[0] == 0.0


def test_prefactor_oscillator_quarter_period():
    traj = shoot(UV, BoundaryData(1.0, 1.0, math.pi / 2), 1.0)
    assert abs(prefactor(traj) - np.exp(-0.25j * math.pi)) <= 1e-9


def test_prefactor_time_zero_is_one():
    traj = shoot(quartic_mixed_symbol(), BoundaryData(0.5, 0.5, 0.0), 0.5)
    assert prefactor(traj) == pytest.approx(1.0)


def test_prefactor_defining_identity():
    H = quartic_mixed_symbol()
    for T in (0.4, 1.0, 1.7):
        traj = shoot(H, BoundaryData(0.5, 0.4 - 0.2j, T), 0.4 - 0.2j)
        assert traj.converged
        pf = prefactor(traj)
        assert abs(pf * pf * traj.delta_v_final - 1.0) <= 1e-10


def test_prefactor_full_period_branch():
    # dv(T) returns to 1 after a full period but the tracked phase is 2*pi,
    # so the square root lands on the second branch
    traj = shoot(UV, BoundaryData(1.0, 1.0, 2 * math.pi), 1.0)
    assert abs(traj.delta_v_final - 1.0) <= 1e-8
    assert traj.branch_phase == pytest.approx(2 * math.pi, abs=1e-8)
    assert abs(prefactor(traj) - (-1.0)) <= 1e-8


def test_prefactor_caustic_rejected():
    import dataclasses

    traj = shoot(UV, BoundaryData(1.0, 1.0, 1.0), 1.0)
    broken = dataclasses.replace(traj, delta_v_final=1e-13 + 0j)
    with pytest.raises(CausticError):
        prefactor(broken)


# -- action second derivative ---------------------------------------------------


def test_action_second_derivative_oscillator():
    T = 0.8
    bd = BoundaryData(1.0, 1.0, T)
    base = shoot(UV, bd, 1.0)
    est = action_second_derivative_fd(UV, bd, base)
    analytic = -1j * np.exp(-1j * T)
    assert abs(est - analytic) <= 1e-6
    assert abs(1j * est - 1.0 / base.delta_v_final) <= 1e-6


def test_action_second_derivative_time_zero():
    bd = BoundaryData(0.3, 0.4, 0.0)
    base = shoot(quartic_mixed_symbol(), bd, 0.4)
    est = action_second_derivative_fd(quartic_mixed_symbol(), bd, base)
    assert abs(1j * est - 1.0) <= 1e-6


def test_action_second_derivative_quartic_dual_route():
    H = quartic_mixed_symbol()
    bd = BoundaryData(0.5, 0.5, 0.5)
    base = shoot(H, bd, 0.5)
    est = action_second_derivative_fd(H, bd, base)
    ref = 1.0 / base.delta_v_final
    assert abs(1j * est - ref) <= 1e-4 * abs(ref)


# -- dump ----------------------------------------------------------------------


def test_write_trajectory_csv(tmp_path):
    H = quartic_mixed_symbol()
    traj = shoot(H, BoundaryData(0.5, 0.5, 0.7), 0.5)
    ricc = riccati_X(H, traj)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, ricc)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,re_u,im_u,re_v,im_v,re_X,im_X"
    assert len(lines) == len(ricc.t_samples) + 1
    first = [float(x) for x in lines[1].split(",")]
    assert first[0] == 0.0
    assert first[1] == pytest.approx(0.5)


# -- property tests -------------------------------------------------------------


@given(
    st.floats(min_value=-1.2, max_value=1.2, allow_nan=False),
    st.floats(min_value=-1.2, max_value=1.2, allow_nan=False),
    st.floats(min_value=0.1, max_value=2.5, allow_nan=False),
)
@settings(max_examples=15, deadline=None)
def test_oscillator_flow_matches_exponential(x, y, T):
    u0 = complex(x, y)
    v0 = complex(y, -x) + 0.3
    res = integrate_trajectory(UV, u0, v0, T)
    assert abs(res.u_final - u0 * np.exp(-1j * T)) <= 1e-8 * (1 + abs(u0))
    assert abs(res.v_final - v0 * np.exp(1j * T)) <= 1e-8 * (1 + abs(v0))


@given(
    st.floats(min_value=-0.8, max_value=0.8, allow_nan=False),
    st.floats(min_value=-0.8, max_value=0.8, allow_nan=False),
    st.floats(min_value=0.1, max_value=1.2, allow_nan=False),
)
@settings(max_examples=12, deadline=None)
def test_riccati_identity_random_boundaries(x, y, T):
    H = quartic_mixed_symbol()
    bd = BoundaryData(complex(x, y), complex(y, x), T)
    traj = shoot(H, bd, bd.v_final)
    if not traj.converged:
        return
    ricc = riccati_X(H, traj)
    mask = np.abs(ricc.dv_samples) > 1e-8
    dev = np.abs(ricc.X[mask] - ricc.du_samples[mask] / (2.0 * ricc.dv_samples[mask]))
    assert np.max(dev) <= 1e-6
