"""Operating-point solver: damped Newton with a no-load homotopy ramp.

The cold start builds the closed-form no-load phasor solution (zero
mechanical power and zero reactive setpoints: stator current vanishes and
the rotor carries only magnetizing current), then ramps (grid voltage, Pm,
Qsref, Qgref) toward the target in 10 homotopy steps with step-halving on
failure.  Warm starts skip straight to Newton.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoEquilibrium
from .modal import jacobian_exact
from .model import OMEGA_SYNC, rhs, rotate_dq_to_xy
from .params import SystemSpec
from .state import N_UNIT_STATES, StateLayout

RESIDUAL_TOL = 1e-10
ARMIJO_FACTOR = 0.5
ARMIJO_MIN_STEP = 2.0 ** -20
HOMOTOPY_STEPS = 10
HOMOTOPY_HALVINGS = 4


@dataclass
class EquilibriumResult:
    x_star: np.ndarray
    residual_norm: float
    iterations: int
    homotopy_steps: int


def _with_loading(spec: SystemSpec, lam: float) -> SystemSpec:
    """Spec with the loading setpoints (Pm, Qsref, Qgref) scaled by lam.

    The no-load closed form is exact at any grid voltage, so only the power
    setpoints need ramping; the grid source stays at its target.
    """
    units = tuple(
        dataclasses.replace(
            u,
            setpoints=dataclasses.replace(
                u.setpoints,
                Pm=lam * u.setpoints.Pm,
                Qsref=lam * u.setpoints.Qsref,
                Qgref=lam * u.setpoints.Qgref,
            ),
        )
        for u in spec.units
    )
    return dataclasses.replace(spec, units=units)


def noload_state(spec: SystemSpec) -> np.ndarray:
    """Closed-form no-load seed: i_s = 0, rotor supplies the magnetizing flux."""
    ws = OMEGA_SYNC
    layout = StateLayout(spec.n_units)
    x = layout.zeros()
    Vg = spec.grid.V
    theta_g = spec.grid.theta
    u_sx, u_sy = Vg * math.cos(theta_g), Vg * math.sin(theta_g)
    i_t = np.zeros(2)
    for j, u in enumerate(spec.units):
        m, cv, sp = u.machine, u.converter, u.setpoints
        delta = theta_g - math.pi / 2.0
        psi_sx, psi_sy = u_sy / ws, -u_sx / ws
        i_rx, i_ry = psi_sx / m.Lm, psi_sy / m.Lm
        psi_rx, psi_ry = (m.Lr / m.Lm) * psi_sx, (m.Lr / m.Lm) * psi_sy
        omega_r = sp.omega_mref
        omega_sl = ws - omega_r
        u_rx = m.Rr * i_rx - omega_sl * psi_ry
        u_ry = m.Rr * i_ry + omega_sl * psi_rx
        P_r = u_rx * i_rx + u_ry * i_ry
        i_gd, i_gq = 0.0, P_r / Vg  # GSC covers rotor-port losses
        i_gx, i_gy = rotate_dq_to_xy(i_gd, i_gq, delta)
        u_gx = u_sx - cv.Rc * i_gx + ws * cv.Lc * i_gy
        u_gy = u_sy - cv.Rc * i_gy - ws * cv.Lc * i_gx

        cd, sd = math.cos(delta), math.sin(delta)

        def dq(ax, ay):
            return ax * cd + ay * sd, -ax * sd + ay * cd

        u_sd, u_sq = dq(u_sx, u_sy)
        psi_sd, psi_sq = dq(psi_sx, psi_sy)
        i_rd, i_rq = dq(i_rx, i_ry)
        u_rd, u_rq = dq(u_rx, u_ry)
        u_gd, u_gq = dq(u_gx, u_gy)
        sigma = m.Lr - m.Lm * m.Lm / m.Ls
        u_rqc = (m.Lm / m.Ls) * (u_sq - omega_r * psi_sd) + omega_sl * sigma * i_rd
        u_rdc = (m.Lm / m.Ls) * omega_sl * psi_sq - omega_sl * sigma * i_rq
        u_gqc = u_sq - ws * cv.Lc * i_gd
        u_gdc = u_sd + ws * cv.Lc * i_gq

        blk = x[layout.unit_slice(j)]
        blk[0:4] = psi_sx, psi_sy, psi_rx, psi_ry
        blk[4] = omega_r
        blk[5:7] = i_gx, i_gy
        blk[7] = sp.udcref
        blk[8:10] = u_sx, u_sy
        blk[10] = i_rq
        blk[11] = u_rq - u_rqc
        blk[12] = i_rd
        blk[13] = u_rd - u_rdc
        blk[14] = i_gq
        blk[15] = u_gqc - u_gq
        blk[16] = u_gdc - u_gd
        blk[17] = 0.0
        blk[18] = delta

        # feeder carries the GSC draw plus the filter capacitor current
        cf_sign = -1.0 if spec.cf_symmetric_coupling else 1.0
        i_fx = i_gx - cv.Cf * ws * u_sy
        i_fy = i_gy - cf_sign * cv.Cf * ws * u_sx
        x[layout.line_slice(j)] = i_fx, i_fy
        beta = u.base_mva / spec.system_mva
        i_t += beta * np.array([i_fx, i_fy])
    x[layout.trunk_slice] = i_t
    return x


def _wrap_angles(spec, x):
    layout = StateLayout(spec.n_units)
    x = x.copy()
    for j in range(spec.n_units):
        i = layout.unit_slice(j).start + N_UNIT_STATES - 1
        x[i] = math.remainder(x[i], 2.0 * math.pi)
    return x


def _newton(spec, x0, tol=RESIDUAL_TOL, max_iter=40):
    """Damped Newton with backtracking on the scaled residual ||J^-1 f||.

    The raw 2-norm of f is a poor merit function here: the PLL integrator
    row carries a gain of order 1e4, so the quadratic trigonometric terms of
    the angle equations dominate it and full steps get rejected even when
    they are excellent.  Backtracking on the Newton-scaled residual (the
    affine-covariant "natural" level function, reusing the LU factors) keeps
    the prescribed 0.5 factor and 2^-20 floor but measures progress in state
    space, restoring quadratic convergence.
    """
    x = np.asarray(x0, dtype=float).copy()
    f = rhs(spec, x)
    norm = float(np.max(np.abs(f)))
    iters = 0
    for _ in range(max_iter):
        if norm <= tol:
            return x, norm, iters, True
        J = jacobian_exact(spec, x)
        try:
            lu = scipy.linalg.lu_factor(J)
            dx = scipy.linalg.lu_solve(lu, -f)
        except (scipy.linalg.LinAlgError, ValueError):
            return x, norm, iters, False
        nat0 = float(np.linalg.norm(dx))
        lam = 1.0
        while True:
            x_try = x + lam * dx
            try:
                f_try = rhs(spec, x_try)
                nat = float(np.linalg.norm(scipy.linalg.lu_solve(lu, -f_try)))
                ok = nat <= (1.0 - 0.25 * lam) * nat0
            except Exception:
                ok = False
            if ok:
                break
            lam *= ARMIJO_FACTOR
            if lam < ARMIJO_MIN_STEP:
                return x, norm, iters, False
        x, f = x_try, f_try
        norm = float(np.max(np.abs(f)))
        iters += 1
    return x, norm, iters, norm <= tol


def _physical(spec, x) -> bool:
    """Reject the anti-lock PLL branch and other non-physical solutions."""
    from .model import unit_port_quantities

    layout = StateLayout(spec.n_units)
    q = unit_port_quantities(spec, x)
    if np.any(q["u_sq"] <= 0.0):
        return False
    for j in range(spec.n_units):
        blk = x[layout.unit_slice(j)]
        if blk[7] <= 0.0 or blk[4] <= 0.0:
            return False
    return True


def solve_equilibrium(spec: SystemSpec, x_guess=None) -> EquilibriumResult:
    """Solve rhs(spec, x) = 0 to ||f||_inf <= 1e-10.

    Warm starts run plain damped Newton; cold starts (or failed warm solves)
    go through the no-load homotopy.  Raises NoEquilibrium when the ramp is
    exhausted, carrying the best residual seen.
    """
    total_iters = 0
    if x_guess is not None:
        x, norm, iters, ok = _newton(spec, x_guess)
        total_iters += iters
        if ok and _physical(spec, x):
            return EquilibriumResult(_wrap_angles(spec, x), norm, total_iters, 0)

    x = noload_state(_with_loading(spec, 0.0))
    x, norm, iters, ok = _newton(_with_loading(spec, 0.0), x)
    total_iters += iters
    best = norm
    if not ok:
        raise NoEquilibrium(
            f"no-load seed failed to converge (residual {norm:.3e})",
            best_residual=norm, best_x=x,
        )
    lam_done = 0.0
    dlam = 1.0 / HOMOTOPY_STEPS
    min_dlam = dlam / 2 ** HOMOTOPY_HALVINGS
    steps = 0
    while lam_done < 1.0 - 1e-12:
        lam = min(1.0, lam_done + dlam)
        x_new, norm, iters, ok = _newton(_with_loading(spec, lam), x)
        total_iters += iters
        steps += 1
        best = min(best, norm) if lam >= 1.0 - 1e-12 else best
        if ok and _physical(_with_loading(spec, lam), x_new):
            x = x_new
            lam_done = lam
            continue
        dlam *= 0.5
        if dlam < min_dlam:
            raise NoEquilibrium(
                f"homotopy stalled at lambda={lam_done:.4f} (residual {norm:.3e})",
                best_residual=norm, best_x=x_new,
            )
    if not _physical(spec, x):
        raise NoEquilibrium("converged to a non-physical branch", best_residual=norm,
                            best_x=x)
    return EquilibriumResult(_wrap_angles(spec, x), norm, total_iters, steps)
