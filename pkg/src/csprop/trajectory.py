"""Complex classical trajectories for the two-point boundary problem.

The flow lives in the independent complex variables (u, v) with split
boundary data u(0) = z' and v(T) = conj(z'').  One adaptive embedded
Runge-Kutta 5(4) pass integrates, as a single augmented state,

  * the flow (u, v) under i*hbar*du/dt = +dH/dv, i*hbar*dv/dt = -dH/du,
  * the tangent pair (du, dv) with du(0) = 0, dv(0) = 1,
  * quadrature accumulators: the action integrand, the correction
    integrand dH2/dudv / 2, and any extra polynomial integrands,

so every reported quantity carries the same accuracy.  The argument of
dv(t) is tracked continuously from 0 (steps that would jump it by pi/2
or more are rejected), which fixes the square-root branch of the
semiclassical prefactor 1/sqrt(dv(T)).
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .symbols import CompiledSystem, ScaleParams, SymbolPoly

__all__ = [
    "BoundaryData",
    "TrajectoryResult",
    "RiccatiResult",
    "TrajectoryError",
    "IntegrationError",
    "CausticError",
    "hamilton_rhs",
    "integrate_trajectory",
    "shoot",
    "find_trajectories",
    "default_guess_grid",
    "riccati_X",
    "prefactor",
    "action_second_derivative_fd",
    "write_trajectory_csv",
]


class TrajectoryError(RuntimeError):
    pass


class IntegrationError(TrajectoryError):
    """Step-size underflow or overflow: trajectory escaping to infinity."""


class CausticError(TrajectoryError):
    """dv(T) is (numerically) zero: the prefactor branch is ambiguous."""


@dataclass(frozen=True)
class BoundaryData:
    """u(0) = u_initial = z', v(T) = v_final = conj(z'').

    T is normally nonnegative; negative values are accepted for
    time-reversal symmetry checks.
    """

    u_initial: complex
    v_final: complex
    T: float

    def __post_init__(self):
        if not math.isfinite(self.T):
            raise ValueError("T must be finite")


@dataclass(frozen=True)
class TrajectoryResult:
    u_initial: complex
    v_initial: complex
    u_final: complex
    v_final: complex
    T: float
    t_samples: np.ndarray
    u_samples: np.ndarray
    v_samples: np.ndarray
    du_samples: np.ndarray
    dv_samples: np.ndarray
    S: complex
    I: complex
    extras: tuple
    delta_v_final: complex
    branch_phase: float
    converged: bool = True
    residual: complex = 0.0
    iterations: int = 0
    residual_history: tuple = ()

    @property
    def samples(self):
        """Ordered (t, u, v) triples at accepted steps."""
        return list(zip(self.t_samples, self.u_samples, self.v_samples))


@dataclass(frozen=True)
class RiccatiResult:
    t_samples: np.ndarray
    X: np.ndarray
    u_samples: np.ndarray
    v_samples: np.ndarray
    du_samples: np.ndarray
    dv_samples: np.ndarray

    @property
    def X_samples(self):
        return list(zip(self.t_samples, self.X))


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau
# ---------------------------------------------------------------------------

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# difference between the 5th- and 4th-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_MAX_STEPS = 500_000
_OVERFLOW = 1e8
# escape bound on |u|, |v|: far above any saddle of desk-scale boundary
# data, and polynomial flows past it are in finite-time blow-up, where the
# controller would otherwise crawl with ever-shrinking steps
_ESCAPE = 1e4


def _rk_stages(f, t, y, h, k1):
    """One embedded step; returns (y_new, k_first_of_next_step, error_vector).

    The last stage is evaluated at the 5th-order solution itself (FSAL), so
    its slope seeds the next step for free.
    """
    k = [k1]
    n = len(y)
    y5 = y
    for s in range(1, 7):
        ys = list(y)
        for j, a in enumerate(_A[s]):
            if a == 0.0:
                continue
            kj = k[j]
            ha = h * a
            for i in range(n):
                ys[i] += ha * kj[i]
        k.append(f(t + _C[s] * h, ys))
        if s == 6:
            y5 = ys
    err = [0.0 + 0.0j] * n
    for j, e in enumerate(_E):
        if e == 0.0:
            continue
        kj = k[j]
        he = h * e
        for i in range(n):
            err[i] += he * kj[i]
    return y5, k[6], err


def _error_norm(err, y, y_new, rtol, atol):
    total = 0.0
    for e, a, b in zip(err, y, y_new):
        scale = atol + rtol * max(abs(a), abs(b))
        total += (abs(e) / scale) ** 2
    return math.sqrt(total / len(err))


def _initial_step(f, y0, T, rtol, atol):
    f0 = f(0.0, y0)
    d0 = max((abs(y) for y in y0), default=0.0)
    d1 = max((abs(v) for v in f0), default=0.0)
    if d1 <= 1e-300:
        h = 0.1 * abs(T)
    else:
        h = 0.01 * max(d0, atol / rtol) / d1
    h = min(h if h > 0 else 1e-6, abs(T))
    return math.copysign(h, T), f0


def adaptive_rk(f, y0, T, rtol=1e-10, atol=1e-12, dv_index=None, record=True,
                escape=_ESCAPE):
    """Adaptive RK5(4) from t=0 to t=T over a complex list state.

    Components 0 and 1 are treated as the flow variables (u, v); exceeding
    `escape` in magnitude aborts as an integration failure.  When dv_index
    is given, the argument of that component is tracked continuously: any
    accepted step that would rotate it by >= pi/2 is rejected and retried
    with half the step.

    Returns (ts, ys, y_final, phase) where ys is the list of accepted
    states (present only when record=True) and phase the unwrapped
    argument of the tracked component.
    """
    if T == 0.0:
        return [0.0], [tuple(y0)] if record else [], list(y0), 0.0
    t = 0.0
    y = list(y0)
    h, k1 = _initial_step(f, y0, T, rtol, atol)
    phase = 0.0
    err_prev = 1.0
    ts = [0.0]
    ys = [tuple(y)] if record else []
    hmin = 1e-15 * max(abs(T), 1.0)
    for _ in range(_MAX_STEPS):
        final_step = (T > 0 and t + h >= T) or (T < 0 and t + h <= T)
        if final_step:
            h = T - t
        y_new, k_new, err = _rk_stages(f, t, y, h, k1)
        if max(abs(y_new[0]), abs(y_new[1])) > escape or any(
            abs(val) > _OVERFLOW for val in y_new
        ):
            raise IntegrationError(
                f"state overflow at t = {t:.6g}: trajectory escaping to infinity"
            )
        norm = _error_norm(err, y, y_new, rtol, atol)
        if norm > 1.0:
            err_prev = 1.0
            h *= max(_MIN_FACTOR, _SAFETY * norm ** (-0.2))
            if abs(h) < hmin:
                raise IntegrationError(f"step-size underflow at t = {t:.6g}")
            continue
        if dv_index is not None:
            old = y[dv_index]
            new = y_new[dv_index]
            if abs(new) == 0.0 or abs(old) == 0.0:
                raise CausticError(f"tangent solution dv vanished near t = {t:.6g}")
            dphi = cmath.phase(new / old)
            if abs(dphi) >= 0.5 * math.pi:
                h *= 0.5
                if abs(h) < hmin:
                    raise IntegrationError(f"step-size underflow at t = {t:.6g}")
                continue
            phase += dphi
        t = T if final_step else t + h
        y = y_new
        k1 = k_new
        ts.append(t)
        if record:
            ys.append(tuple(y))
        if final_step:
            return ts, ys, y, phase
        base = _SAFETY * norm ** (-_PI_ALPHA) * err_prev**_PI_BETA if norm > 0 else _MAX_FACTOR
        h *= min(_MAX_FACTOR, max(_MIN_FACTOR, base))
        err_prev = max(norm, 1e-10)
    raise IntegrationError("step limit exceeded")


def fixed_rk(f, y0, T, n_steps):
    """Classical fixed-step pass with the same 5th-order stages.

    The map (y0 -> y(T)) is smooth in the initial data to machine
    precision, which finite differencing requires.
    """
    y = list(y0)
    h = T / n_steps
    t = 0.0
    k1 = f(t, y)
    for _ in range(n_steps):
        y, k1, _err = _rk_stages(f, t, y, h, k1)
        t += h
    return y


# ---------------------------------------------------------------------------
# Hamiltonian flow
# ---------------------------------------------------------------------------


def hamilton_rhs(H: SymbolPoly, u: complex, v: complex):
    """(du/dt, dv/dt) from i*hbar*du/dt = +dH/dv, i*hbar*dv/dt = -dH/du."""
    hbar = H.scales.hbar
    H_u = H.derivative("u")
    H_v = H.derivative("v")
    return (
        H_v(u, v) / (1j * hbar),
        -H_u(u, v) / (1j * hbar),
    )


def _action_integrand(H: SymbolPoly) -> SymbolPoly:
    # (i hbar / 2)(du/dt v - dv/dt u) - H == (u H_u + v H_v)/2 - H along the flow
    u_mono = SymbolPoly({(0, 1): 1.0}, H.scales)
    v_mono = SymbolPoly({(1, 0): 1.0}, H.scales)
    return (u_mono * H.derivative("u") + v_mono * H.derivative("v")).scaled(0.5) - H


def correction_integrand(H: SymbolPoly) -> SymbolPoly:
    """Integrand of the action correction: (1/2) d^2 H / du dv."""
    return H.derivative("u").derivative("v").scaled(0.5)


class _Flow:
    """RHS of the augmented (u, v, du, dv, channels...) system."""

    def __init__(self, H: SymbolPoly, extra_integrands=(), with_riccati=False):
        self.hbar = H.scales.hbar
        channels = (_action_integrand(H), correction_integrand(H)) + tuple(
            extra_integrands
        )
        self.sys = CompiledSystem(H, extra=channels)
        self.n_channels = len(channels)
        self.with_riccati = with_riccati

    def state0(self, u0, v0):
        y = [complex(u0), complex(v0), 0.0 + 0.0j, 1.0 + 0.0j]
        if self.with_riccati:
            y.append(0.0 + 0.0j)
        y.extend([0.0 + 0.0j] * self.n_channels)
        return y

    def __call__(self, t, y):
        sys = self.sys
        u, v, du, dv = y[0], y[1], y[2], y[3]
        upow, vpow = sys.tables(u, v)
        H_u = sys.H_u.eval_tables(upow, vpow)
        H_v = sys.H_v.eval_tables(upow, vpow)
        H_uu = sys.H_uu.eval_tables(upow, vpow)
        H_uv = sys.H_uv.eval_tables(upow, vpow)
        H_vv = sys.H_vv.eval_tables(upow, vpow)
        c = -1j / self.hbar
        out = [
            c * H_v,
            -c * H_u,
            c * (H_uv * du + H_vv * dv),
            -c * (H_uu * du + H_uv * dv),
        ]
        if self.with_riccati:
            X = y[4]
            out.append(c * (0.5 * H_vv + 2.0 * H_uv * X + 2.0 * H_uu * X * X))
        for ch in sys.extra:
            out.append(ch.eval_tables(upow, vpow))
        return out


def integrate_trajectory(
    H: SymbolPoly,
    u0: complex,
    v0: complex,
    T: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    extra_integrands=(),
) -> TrajectoryResult:
    """Integrate the augmented system from given initial data (no shooting).

    On return S carries the boundary term: S = S_run - (i hbar/2)(u''v'' + u'v').
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    flow = _Flow(H, extra_integrands)
    ts, ys, y_end, phase = adaptive_rk(
        flow, flow.state0(u0, v0), T, rtol, atol, dv_index=3
    )
    return _pack_result(H, u0, v0, T, ts, ys, y_end, phase, flow.n_channels)


def _pack_result(H, u0, v0, T, ts, ys, y_end, phase, n_channels):
    hbar = H.scales.hbar
    u_T, v_T = y_end[0], y_end[1]
    S_run = y_end[4]
    I_val = y_end[5]
    extras = tuple(y_end[6 : 4 + n_channels])
    S = S_run - 0.5j * hbar * (u_T * v_T + complex(u0) * complex(v0))
    arr = np.array(ys, dtype=complex) if ys else np.zeros((0, 4), dtype=complex)
    return TrajectoryResult(
        u_initial=complex(u0),
        v_initial=complex(v0),
        u_final=u_T,
        v_final=v_T,
        T=T,
        t_samples=np.array(ts, dtype=float),
        u_samples=arr[:, 0] if len(arr) else np.array([], dtype=complex),
        v_samples=arr[:, 1] if len(arr) else np.array([], dtype=complex),
        du_samples=arr[:, 2] if len(arr) else np.array([], dtype=complex),
        dv_samples=arr[:, 3] if len(arr) else np.array([], dtype=complex),
        S=S,
        I=I_val,
        extras=extras,
        delta_v_final=y_end[3],
        branch_phase=phase,
    )


# ---------------------------------------------------------------------------
# Shooting
# ---------------------------------------------------------------------------


def shoot(
    H: SymbolPoly,
    bd: BoundaryData,
    v0_guess: complex,
    tol: float = 1e-10,
    max_iter: int = 50,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    extra_integrands=(),
) -> TrajectoryResult:
    """Newton iteration on the single complex unknown v(0).

    The residual is r(v0) = v(T) - bd.v_final and dr/dv0 = dv(T) exactly,
    because u(0) is held fixed and the polynomial flow is holomorphic in
    the initial data.  Steps are halved while |r| fails to decrease.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = complex(bd.v_final)
    conv_scale = tol * (1.0 + abs(target))
    v0 = complex(v0_guess)
    result = integrate_trajectory(
        H, bd.u_initial, v0, bd.T, rtol, atol, extra_integrands
    )
    r = result.v_final - target
    history = [abs(r)]
    for iteration in range(max_iter):
        if abs(r) <= conv_scale:
            return _mark(result, True, r, iteration, history)
        dv_T = result.delta_v_final
        if abs(dv_T) < 1e-12:
            raise CausticError(
                f"dv(T) = {dv_T:.3e} is singular; Newton derivative unavailable"
            )
        step = r / dv_T
        # damped update: halve until the residual decreases
        best = None
        for _ in range(8):
            try:
                candidate = integrate_trajectory(
                    H, bd.u_initial, v0 - step, bd.T, rtol, atol, extra_integrands
                )
            except TrajectoryError:
                step *= 0.5
                continue
            if abs(candidate.v_final - target) < abs(r):
                best = candidate
                break
            step *= 0.5
        if best is None:
            return _mark(result, False, r, iteration + 1, history)
        v0 = v0 - step
        result = best
        r = result.v_final - target
        history.append(abs(r))
    converged = abs(r) <= conv_scale
    return _mark(result, converged, r, max_iter, history)


def _mark(result, converged, residual, iterations, history):
    return dataclasses.replace(
        result,
        converged=converged,
        residual=residual,
        iterations=iterations,
        residual_history=tuple(history),
    )


def default_guess_grid(z1: complex, z2: complex, size: int = 5, spread: float | None = None):
    """size x size grid of v(0) guesses centered at conj(z'')."""
    center = complex(z2).conjugate()
    if size <= 1:
        return [center]
    if spread is None:
        spread = max(1.0, abs(z1) + abs(z2))
    offsets = np.linspace(-spread, spread, size)
    return [center + complex(dx, dy) for dx in offsets for dy in offsets]


def find_trajectories(
    H: SymbolPoly,
    bd: BoundaryData,
    grid,
    tol: float = 1e-10,
    max_iter: int = 50,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    extra_integrands=(),
    dedup_tol: float = 1e-6,
):
    """Multi-start shooting; distinct converged roots sorted by |Im S|."""
    grid = list(grid)
    if not grid:
        raise ValueError("guess grid must be non-empty")
    found = []
    for guess in grid:
        try:
            result = shoot(
                H, bd, guess, tol, max_iter, rtol, atol, extra_integrands
            )
        except TrajectoryError:
            continue
        if not result.converged:
            continue
        if any(abs(result.v_initial - r.v_initial) < dedup_tol for r in found):
            continue
        found.append(result)
    found.sort(key=lambda r: abs(r.S.imag))
    return found


# ---------------------------------------------------------------------------
# Riccati variable and prefactor
# ---------------------------------------------------------------------------


def riccati_X(
    H: SymbolPoly,
    traj: TrajectoryResult,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    blowup: float = 1e8,
) -> RiccatiResult:
    """Integrate dX/dt = -(i/2 hbar) H_vv - (2i/hbar) H_uv X - (2i/hbar) H_uu X^2
    with X(0) = 0 along the trajectory; X must equal du/(2 dv) throughout.

    The flow is re-integrated jointly with X so no interpolation of the
    stored samples enters the comparison.
    """
    if not traj.converged:
        raise ValueError("riccati_X requires a converged trajectory")
    flow = _Flow(H, with_riccati=True)
    ts, ys, y_end, _ = adaptive_rk(
        flow, flow.state0(traj.u_initial, traj.v_initial), traj.T, rtol, atol, dv_index=3
    )
    arr = np.array(ys, dtype=complex)
    X = arr[:, 4]
    if np.max(np.abs(X)) > blowup:
        raise CausticError("Riccati variable exceeded blow-up threshold (dv zero crossing)")
    return RiccatiResult(
        t_samples=np.array(ts, dtype=float),
        X=X,
        u_samples=arr[:, 0],
        v_samples=arr[:, 1],
        du_samples=arr[:, 2],
        dv_samples=arr[:, 3],
    )


def prefactor(traj: TrajectoryResult) -> complex:
    """1/sqrt(dv(T)) with the branch fixed by the tracked phase of dv.

    Equals sqrt(dv(0)/dv(T)) since dv(0) = 1, and via the action identity
    also sqrt((i/hbar) d2S/du'dv'').
    """
    dv = traj.delta_v_final
    if abs(dv) < 1e-12:
        raise CausticError(f"caustic: dv(T) = {dv:.3e}")
    return cmath.exp(-0.5 * (math.log(abs(dv)) + 1j * traj.branch_phase))


# ---------------------------------------------------------------------------
# Finite-difference check of the action second derivative
# ---------------------------------------------------------------------------


def _shoot_fixed(flow, hbar, u0, v_target, T, n_steps, v0_seed, tol=1e-13):
    """Newton shooting over the fixed-step map; returns the action S."""
    v0 = complex(v0_seed)
    for _ in range(60):
        y = fixed_rk(flow, flow.state0(u0, v0), T, n_steps)
        r = y[1] - v_target
        if abs(r) <= tol * (1.0 + abs(v_target)):
            S_run = y[4]
            return S_run - 0.5j * hbar * (y[0] * y[1] + u0 * v0)
        dv_T = y[3]
        if abs(dv_T) < 1e-12:
            raise CausticError("dv(T) singular during finite-difference re-shoot")
        v0 = v0 - r / dv_T
    raise TrajectoryError("fixed-step re-shoot failed to converge")


def action_second_derivative_fd(
    H: SymbolPoly,
    bd: BoundaryData,
    base: TrajectoryResult,
    h: float | None = None,
) -> complex:
    """d^2 S / du' dv'' by a 4-point cross stencil of re-shot actions.

    Contract: (i/hbar) * result ~= 1/dv(T) = dv(0)/dv(T).  The perturbed
    problems are solved over a fixed-step map so the differenced action is
    a smooth function of the boundary data.
    """
    if h is None:
        h = 1e-5 * (1.0 + abs(bd.u_initial))
    if h <= 0:
        raise ValueError("h must be positive")
    flow = _Flow(H)
    hbar = H.scales.hbar
    n_steps = max(256, 2 * (len(base.t_samples) - 1))
    S = {}
    for su in (+1, -1):
        for sv in (+1, -1):
            S[(su, sv)] = _shoot_fixed(
                flow,
                hbar,
                complex(bd.u_initial) + su * h,
                complex(bd.v_final) + sv * h,
                bd.T,
                n_steps,
                base.v_initial,
            )
    return (S[(1, 1)] - S[(1, -1)] - S[(-1, 1)] + S[(-1, -1)]) / (4.0 * h * h)


# ---------------------------------------------------------------------------
# CSV dump
# ---------------------------------------------------------------------------


def write_trajectory_csv(path, ricc: RiccatiResult) -> None:
    """Plot-ready dump: t,re_u,im_u,re_v,im_v,re_X,im_X per accepted step."""
    with open(path, "w") as fh:
        fh.write("t,re_u,im_u,re_v,im_v,re_X,im_X\n")
        for t, u, v, x in zip(ricc.t_samples, ricc.u_samples, ricc.v_samples, ricc.X):
            fields = (t, u.real, u.imag, v.real, v.imag, x.real, x.imag)
            fh.write(",".join(f"{val:.17g}" for val in fields) + "\n")
