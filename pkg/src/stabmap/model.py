"""Nonlinear ODE right-hand side for the multi-unit farm in the common xy frame.

Machine, converter and network branch equations are written in the common
synchronously rotating xy frame; each unit's control loops act on dq
quantities obtained through that unit's own PLL angle, and the converter
reference voltages are rotated back.  All derivatives are returned in SI
time (1/s): flux/current/voltage equations carry the omega_b scaling, the
DC-link and controller-integrator equations do not.

The collector bus has no dynamic element of its own, so its voltage is
eliminated algebraically from the feeder/trunk inductor equations.  Because
all N+1 line currents are kept as states, the current mismatch at the
collector is a redundant pair; the elimination injects a damping term that
parks that pair at omega_b * (-CONSTRAINT_DAMPING +/- j).  The physical
subspace (zero mismatch) is exactly invariant, so the remaining spectrum is
untouched.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from types import SimpleNamespace

import numpy as np

from .errors import DomainError, StructuralError
from .params import LineParams, SystemSpec
from .state import N_UNIT_STATES, StateLayout

OMEGA_SYNC = 1.0  # synchronous frame speed, pu
CONSTRAINT_DAMPING = 1.0  # collector KCL stabilization, in units of omega_b


def rotate_dq_to_xy(a_d, a_q, delta):
    """Rotate a dq pair into the common xy frame (inverse: rotate by -delta)."""
    cd = np.cos(delta)
    sd = np.sin(delta)
    return a_d * cd - a_q * sd, a_d * sd + a_q * cd


@functools.lru_cache(maxsize=128)
def _compiled(spec: SystemSpec):
    """Per-unit parameter arrays shaped (N, 1) for batch broadcasting."""
    c = SimpleNamespace()
    units = spec.units

    def col(get):
        return np.array([get(u) for u in units], dtype=float)[:, None]

    c.Rs = col(lambda u: u.machine.Rs)
    c.Rr = col(lambda u: u.machine.Rr)
    c.Ls = col(lambda u: u.machine.Ls)
    c.Lr = col(lambda u: u.machine.Lr)
    c.Lm = col(lambda u: u.machine.Lm)
    c.H = col(lambda u: u.machine.H)
    c.wb = col(lambda u: u.machine.omega_b)
    c.Rc = col(lambda u: u.converter.Rc)
    c.Lc = col(lambda u: u.converter.Lc)
    c.Cf = col(lambda u: u.converter.Cf)
    c.Cdc = col(lambda u: u.converter.Cdc)
    c.kp = np.array([u.gains.kp for u in units])[:, :, None]
    c.ki = np.array([u.gains.ki for u in units])[:, :, None]
    c.omega_mref = col(lambda u: u.setpoints.omega_mref)
    c.Qsref = col(lambda u: u.setpoints.Qsref)
    c.udcref = col(lambda u: u.setpoints.udcref)
    c.Qgref = col(lambda u: u.setpoints.Qgref)
    c.Pm = col(lambda u: u.setpoints.Pm)
    c.det = c.Ls * c.Lr - c.Lm * c.Lm
    c.sigma = c.Lr - c.Lm * c.Lm / c.Ls
    c.fR = np.array([f.R for f in spec.feeders])[:, None]
    c.fL = np.array([f.L for f in spec.feeders])[:, None]
    c.beta = col(lambda u: u.base_mva) / spec.system_mva
    c.tR = spec.trunk.R
    c.tL = spec.trunk.L
    c.wb_net = float(units[0].machine.omega_b)
    c.Vgx = spec.grid.V * math.cos(spec.grid.theta)
    c.Vgy = spec.grid.V * math.sin(spec.grid.theta)
    # collector-bus elimination: u_c = (num + gamma*kcl_mismatch) / den
    c.cden = 1.0 / c.tL + float(np.sum(c.beta / c.fL))
    c.cf_sign = -1.0 if spec.cf_symmetric_coupling else 1.0
    c.layout = StateLayout(len(units))
    return c


def _unpack(c, X):
    """Split a (n, B) state batch into named per-unit and per-line arrays."""
    N = c.layout.n_units
    xu = X[: N_UNIT_STATES * N].reshape(N, N_UNIT_STATES, -1)
    lines = X[N_UNIT_STATES * N:].reshape(N + 1, 2, -1)
    u = SimpleNamespace(
        psi_sx=xu[:, 0], psi_sy=xu[:, 1], psi_rx=xu[:, 2], psi_ry=xu[:, 3],
        omega_r=xu[:, 4], i_gx=xu[:, 5], i_gy=xu[:, 6], u_dc=xu[:, 7],
        u_sx=xu[:, 8], u_sy=xu[:, 9], xi=xu[:, 10:18], delta=xu[:, 18],
        i_fx=lines[:N, 0], i_fy=lines[:N, 1],
        i_tx=lines[N, 0], i_ty=lines[N, 1],
    )
    return u


def _machine_currents(c, s):
    i_sx = (c.Lr * s.psi_sx - c.Lm * s.psi_rx) / c.det
    i_sy = (c.Lr * s.psi_sy - c.Lm * s.psi_ry) / c.det
    i_rx = (c.Ls * s.psi_rx - c.Lm * s.psi_sx) / c.det
    i_ry = (c.Ls * s.psi_ry - c.Lm * s.psi_sy) / c.det
    return i_sx, i_sy, i_rx, i_ry


def _rhs_batched(c, X):
    ws = OMEGA_SYNC
    s = _unpack(c, X)
    i_sx, i_sy, i_rx, i_ry = _machine_currents(c, s)

    cd = np.cos(s.delta)
    sd = np.sin(s.delta)

    def to_dq(ax, ay):
        return ax * cd + ay * sd, -ax * sd + ay * cd

    u_sd, u_sq = to_dq(s.u_sx, s.u_sy)
    i_rd, i_rq = to_dq(i_rx, i_ry)
    i_gd, i_gq = to_dq(s.i_gx, s.i_gy)
    psi_sd, psi_sq = to_dq(s.psi_sx, s.psi_sy)
    i_sd, i_sq = to_dq(i_sx, i_sy)

    Qs = u_sq * i_sd - u_sd * i_sq
    Qg = u_sq * i_gd - u_sd * i_gq
    omega_sl = ws - s.omega_r

    kp, ki = c.kp, c.ki
    x1, x2, x3, x4 = s.xi[:, 0], s.xi[:, 1], s.xi[:, 2], s.xi[:, 3]
    x5, x6, x7, x8 = s.xi[:, 4], s.xi[:, 5], s.xi[:, 6], s.xi[:, 7]

    e1 = s.omega_r - c.omega_mref
    i_rqref = x1 + kp[:, 0] * e1
    e2 = i_rqref - i_rq
    u_rqc = (c.Lm / c.Ls) * (u_sq - s.omega_r * psi_sd) + omega_sl * c.sigma * i_rd
    u_rq = x2 + kp[:, 1] * e2 + u_rqc

    e3 = Qs - c.Qsref
    i_rdref = x3 + kp[:, 2] * e3
    e4 = i_rdref - i_rd
    u_rdc = (c.Lm / c.Ls) * omega_sl * psi_sq - omega_sl * c.sigma * i_rq
    u_rd = x4 + kp[:, 3] * e4 + u_rdc

    e5 = c.udcref - s.u_dc
    i_gqref = x5 + kp[:, 4] * e5
    e6 = i_gqref - i_gq
    u_gqc = u_sq - ws * c.Lc * i_gd
    u_gq = -x6 - kp[:, 5] * e6 + u_gqc

    e7 = c.Qgref - Qg
    u_gdc = u_sd + ws * c.Lc * i_gq
    u_gd = -x7 - kp[:, 6] * e7 + u_gdc

    u_rx, u_ry = rotate_dq_to_xy(u_rd, u_rq, s.delta)
    u_gx, u_gy = rotate_dq_to_xy(u_gd, u_gq, s.delta)

    # collector-bus voltage from feeder/trunk inductor elimination
    num_x = (c.Vgx - c.tR * s.i_tx) / c.tL + np.sum(
        c.beta * (s.u_sx + c.fR * s.i_fx) / c.fL, axis=0
    )
    num_y = (c.Vgy - c.tR * s.i_ty) / c.tL + np.sum(
        c.beta * (s.u_sy + c.fR * s.i_fy) / c.fL, axis=0
    )
    eps_x = s.i_tx - np.sum(c.beta * s.i_fx, axis=0)
    eps_y = s.i_ty - np.sum(c.beta * s.i_fy, axis=0)
    u_cx = (num_x + CONSTRAINT_DAMPING * eps_x) / c.cden
    u_cy = (num_y + CONSTRAINT_DAMPING * eps_y) / c.cden

    d = SimpleNamespace()
    d.psi_sx = c.wb * (s.u_sx - c.Rs * i_sx + ws * s.psi_sy)
    d.psi_sy = c.wb * (s.u_sy - c.Rs * i_sy - ws * s.psi_sx)
    d.psi_rx = c.wb * (u_rx - c.Rr * i_rx + omega_sl * s.psi_ry)
    d.psi_ry = c.wb * (u_ry - c.Rr * i_ry - omega_sl * s.psi_rx)

    # Motor-convention torque; the wind torque Pm/omega_r drives the shaft,
    # so generation settles at Te = -Pm/omega_r.
    Te = psi_sd * i_sq - psi_sq * i_sd
    d.omega_r = (Te + c.Pm / s.omega_r) / (2.0 * c.H)

    d.i_gx = c.wb * ((s.u_sx - u_gx - c.Rc * s.i_gx) / c.Lc + ws * s.i_gy)
    d.i_gy = c.wb * ((s.u_sy - u_gy - c.Rc * s.i_gy) / c.Lc - ws * s.i_gx)

    # DC-link energy balance, both converter ports measured into the link
    P_r = u_rx * i_rx + u_ry * i_ry
    P_g = u_gx * s.i_gx + u_gy * s.i_gy
    d.u_dc = (P_g - P_r) / (c.Cdc * s.u_dc)

    d.u_sx = c.wb * ((s.i_fx - i_sx - s.i_gx) / c.Cf + ws * s.u_sy)
    d.u_sy = c.wb * ((s.i_fy - i_sy - s.i_gy) / c.Cf + c.cf_sign * ws * s.u_sx)

    d.x = [ki[:, 0] * e1, ki[:, 1] * e2, ki[:, 2] * e3, ki[:, 3] * e4,
           ki[:, 4] * e5, ki[:, 5] * e6, ki[:, 6] * e7, -ki[:, 7] * u_sd]
    d.delta = x8 - kp[:, 7] * u_sd

    d.i_fx = c.wb * ((u_cx[None, :] - s.u_sx - c.fR * s.i_fx) / c.fL + ws * s.i_fy)
    d.i_fy = c.wb * ((u_cy[None, :] - s.u_sy - c.fR * s.i_fy) / c.fL - ws * s.i_fx)
    d.i_tx = c.wb_net * ((c.Vgx - u_cx - c.tR * s.i_tx) / c.tL + ws * s.i_ty)
    d.i_ty = c.wb_net * ((c.Vgy - u_cy - c.tR * s.i_ty) / c.tL - ws * s.i_tx)

    N, B = s.psi_sx.shape[0], X.shape[1]
    out = np.empty_like(X)
    unit = out[: N_UNIT_STATES * N].reshape(N, N_UNIT_STATES, B)
    unit[:, 0], unit[:, 1], unit[:, 2], unit[:, 3] = d.psi_sx, d.psi_sy, d.psi_rx, d.psi_ry
    unit[:, 4] = d.omega_r
    unit[:, 5], unit[:, 6] = d.i_gx, d.i_gy
    unit[:, 7] = d.u_dc
    unit[:, 8], unit[:, 9] = d.u_sx, d.u_sy
    for i in range(8):
        unit[:, 10 + i] = d.x[i]
    unit[:, 18] = d.delta
    lines = out[N_UNIT_STATES * N:].reshape(N + 1, 2, B)
    lines[:N, 0], lines[:N, 1] = d.i_fx, d.i_fy
    lines[N, 0], lines[N, 1] = d.i_tx, d.i_ty
    return out


def rhs(spec: SystemSpec, x):
    """dx/dt for state `x`; accepts a single (n,) state or an (n, B) batch."""
    c = _compiled(spec)
    x = np.asarray(x)
    single = x.ndim == 1
    X = x[:, None] if single else x
    if X.shape[0] != c.layout.n:
        raise StructuralError(
            f"state has {X.shape[0]} rows, spec needs {c.layout.n}"
        )
    if not np.iscomplexobj(X):
        udc = _unpack(c, X).u_dc
        if udc.size and not np.all(udc > 0.0):
            raise DomainError("u_dc <= 0 in input state")
    out = _rhs_batched(c, X)
    return out[:, 0] if single else out


def collector_voltage(spec: SystemSpec, x):
    """Eliminated collector-bus voltage (u_cx, u_cy) at state `x` (system pu)."""
    c = _compiled(spec)
    X = np.asarray(x, dtype=float)[:, None]
    s = _unpack(c, X)
    num_x = (c.Vgx - c.tR * s.i_tx) / c.tL + np.sum(
        c.beta * (s.u_sx + c.fR * s.i_fx) / c.fL, axis=0
    )
    num_y = (c.Vgy - c.tR * s.i_ty) / c.tL + np.sum(
        c.beta * (s.u_sy + c.fR * s.i_fy) / c.fL, axis=0
    )
    eps_x = s.i_tx - np.sum(c.beta * s.i_fx, axis=0)
    eps_y = s.i_ty - np.sum(c.beta * s.i_fy, axis=0)
    u_cx = (num_x + CONSTRAINT_DAMPING * eps_x) / c.cden
    u_cy = (num_y + CONSTRAINT_DAMPING * eps_y) / c.cden
    return float(u_cx[0]), float(u_cy[0])


def unit_port_quantities(spec: SystemSpec, x):
    """Port powers and currents per unit at state `x` (unit-base pu).

    Motor convention throughout: Ps/Qs into the stator, Pg/Qg into the GSC
    branch, P_line into the unit terminal bus from its feeder.
    """
    c = _compiled(spec)
    X = np.asarray(x, dtype=float)[:, None]
    s = _unpack(c, X)
    i_sx, i_sy, i_rx, i_ry = _machine_currents(c, s)
    cd, sd = np.cos(s.delta), np.sin(s.delta)
    u_sd = s.u_sx * cd + s.u_sy * sd
    u_sq = -s.u_sx * sd + s.u_sy * cd
    i_sd = i_sx * cd + i_sy * sd
    i_sq = -i_sx * sd + i_sy * cd
    i_gd = s.i_gx * cd + s.i_gy * sd
    i_gq = -s.i_gx * sd + s.i_gy * cd
    out = {
        "Ps": (s.u_sx * i_sx + s.u_sy * i_sy)[:, 0],
        "Qs": (u_sq * i_sd - u_sd * i_sq)[:, 0],
        "Pg": (s.u_sx * s.i_gx + s.u_sy * s.i_gy)[:, 0],
        "Qg": (u_sq * i_gd - u_sd * i_gq)[:, 0],
        "P_line": (s.u_sx * s.i_fx + s.u_sy * s.i_fy)[:, 0],
        "loss_cu": (c.Rs * (i_sx**2 + i_sy**2) + c.Rr * (i_rx**2 + i_ry**2))[:, 0],
        "loss_filter": (c.Rc * (s.i_gx**2 + s.i_gy**2))[:, 0],
        "i_s_mag": np.hypot(i_sx, i_sy)[:, 0],
        "i_r_mag": np.hypot(i_rx, i_ry)[:, 0],
        "u_s_mag": np.hypot(s.u_sx, s.u_sy)[:, 0],
        "u_sq": u_sq[:, 0],
    }
    return out


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba ships in the test env
    _numba = None

if _numba is not None:

    @_numba.njit(fastmath=False)
    def _rhs_kernel(x, out, N, Rs, Rr, Ls, Lr, Lm, H, wb, Rc, Lc, Cf, Cdc,
                    kp, ki, omref, Qsref, udcref, Qgref, Pm, fR, fL, beta,
                    tR, tL, wbn, Vgx, Vgy, cden, cf_sign, gamma):
        ws = 1.0
        nl = 19 * N
        i_tx = x[nl + 2 * N]
        i_ty = x[nl + 2 * N + 1]
        num_x = (Vgx - tR * i_tx) / tL
        num_y = (Vgy - tR * i_ty) / tL
        sum_bx = 0.0
        sum_by = 0.0
        for k in range(N):
            i_fx = x[nl + 2 * k]
            i_fy = x[nl + 2 * k + 1]
            u_sx = x[19 * k + 8]
            u_sy = x[19 * k + 9]
            num_x += beta[k] * (u_sx + fR[k] * i_fx) / fL[k]
            num_y += beta[k] * (u_sy + fR[k] * i_fy) / fL[k]
            sum_bx += beta[k] * i_fx
            sum_by += beta[k] * i_fy
        u_cx = (num_x + gamma * (i_tx - sum_bx)) / cden
        u_cy = (num_y + gamma * (i_ty - sum_by)) / cden

        for j in range(N):
            b = 19 * j
            psi_sx = x[b]; psi_sy = x[b + 1]
            psi_rx = x[b + 2]; psi_ry = x[b + 3]
            omega_r = x[b + 4]
            i_gx = x[b + 5]; i_gy = x[b + 6]
            u_dc = x[b + 7]
            u_sx = x[b + 8]; u_sy = x[b + 9]
            x1 = x[b + 10]; x2 = x[b + 11]; x3 = x[b + 12]; x4 = x[b + 13]
            x5 = x[b + 14]; x6 = x[b + 15]; x7 = x[b + 16]; x8 = x[b + 17]
            delta = x[b + 18]

            det = Ls[j] * Lr[j] - Lm[j] * Lm[j]
            sigma = Lr[j] - Lm[j] * Lm[j] / Ls[j]
            i_sx = (Lr[j] * psi_sx - Lm[j] * psi_rx) / det
            i_sy = (Lr[j] * psi_sy - Lm[j] * psi_ry) / det
            i_rx = (Ls[j] * psi_rx - Lm[j] * psi_sx) / det
            i_ry = (Ls[j] * psi_ry - Lm[j] * psi_sy) / det

            cd = np.cos(delta); sd = np.sin(delta)
            u_sd = u_sx * cd + u_sy * sd
            u_sq = -u_sx * sd + u_sy * cd
            i_rd = i_rx * cd + i_ry * sd
            i_rq = -i_rx * sd + i_ry * cd
            i_gd = i_gx * cd + i_gy * sd
            i_gq = -i_gx * sd + i_gy * cd
            psi_sd = psi_sx * cd + psi_sy * sd
            psi_sq = -psi_sx * sd + psi_sy * cd
            i_sd = i_sx * cd + i_sy * sd
            i_sq = -i_sx * sd + i_sy * cd

            Qs = u_sq * i_sd - u_sd * i_sq
            Qg = u_sq * i_gd - u_sd * i_gq
            omega_sl = ws - omega_r

            e1 = omega_r - omref[j]
            i_rqref = x1 + kp[j, 0] * e1
            e2 = i_rqref - i_rq
            u_rqc = (Lm[j] / Ls[j]) * (u_sq - omega_r * psi_sd) \
                + omega_sl * sigma * i_rd
            u_rq = x2 + kp[j, 1] * e2 + u_rqc
            e3 = Qs - Qsref[j]
            i_rdref = x3 + kp[j, 2] * e3
            e4 = i_rdref - i_rd
            u_rdc = (Lm[j] / Ls[j]) * omega_sl * psi_sq - omega_sl * sigma * i_rq
            u_rd = x4 + kp[j, 3] * e4 + u_rdc
            e5 = udcref[j] - u_dc
            i_gqref = x5 + kp[j, 4] * e5
            e6 = i_gqref - i_gq
            u_gqc = u_sq - ws * Lc[j] * i_gd
            u_gq = -x6 - kp[j, 5] * e6 + u_gqc
            e7 = Qgref[j] - Qg
            u_gdc = u_sd + ws * Lc[j] * i_gq
            u_gd = -x7 - kp[j, 6] * e7 + u_gdc

            u_rx = u_rd * cd - u_rq * sd
            u_ry = u_rd * sd + u_rq * cd
            u_gx = u_gd * cd - u_gq * sd
            u_gy = u_gd * sd + u_gq * cd

            out[b] = wb[j] * (u_sx - Rs[j] * i_sx + ws * psi_sy)
            out[b + 1] = wb[j] * (u_sy - Rs[j] * i_sy - ws * psi_sx)
            out[b + 2] = wb[j] * (u_rx - Rr[j] * i_rx + omega_sl * psi_ry)
            out[b + 3] = wb[j] * (u_ry - Rr[j] * i_ry - omega_sl * psi_rx)
            Te = psi_sd * i_sq - psi_sq * i_sd
            out[b + 4] = (Te + Pm[j] / omega_r) / (2.0 * H[j])
            out[b + 5] = wb[j] * ((u_sx - u_gx - Rc[j] * i_gx) / Lc[j]
                                  + ws * i_gy)
            out[b + 6] = wb[j] * ((u_sy - u_gy - Rc[j] * i_gy) / Lc[j]
                                  - ws * i_gx)
            P_r = u_rx * i_rx + u_ry * i_ry
            P_g = u_gx * i_gx + u_gy * i_gy
            out[b + 7] = (P_g - P_r) / (Cdc[j] * u_dc)
            i_fx = x[nl + 2 * j]
            i_fy = x[nl + 2 * j + 1]
            out[b + 8] = wb[j] * ((i_fx - i_sx - i_gx) / Cf[j] + ws * u_sy)
            out[b + 9] = wb[j] * ((i_fy - i_sy - i_gy) / Cf[j]
                                  + cf_sign * ws * u_sx)
            out[b + 10] = ki[j, 0] * e1
            out[b + 11] = ki[j, 1] * e2
            out[b + 12] = ki[j, 2] * e3
            out[b + 13] = ki[j, 3] * e4
            out[b + 14] = ki[j, 4] * e5
            out[b + 15] = ki[j, 5] * e6
            out[b + 16] = ki[j, 6] * e7
            out[b + 17] = -ki[j, 7] * u_sd
            out[b + 18] = x8 - kp[j, 7] * u_sd

            out[nl + 2 * j] = wb[j] * ((u_cx - u_sx - fR[j] * i_fx) / fL[j]
                                       + ws * i_fy)
            out[nl + 2 * j + 1] = wb[j] * ((u_cy - u_sy - fR[j] * i_fy) / fL[j]
                                           - ws * i_fx)
        out[nl + 2 * N] = wbn * ((Vgx - u_cx - tR * i_tx) / tL + ws * i_ty)
        out[nl + 2 * N + 1] = wbn * ((Vgy - u_cy - tR * i_ty) / tL - ws * i_tx)
        return out


def rhs_compiled(spec: SystemSpec):
    """Single-state rhs closure compiled with numba for integrator hot loops.

    Falls back to the batched numpy implementation when numba is missing.
    Identical math to `rhs`; the equivalence is covered by tests.
    """
    c = _compiled(spec)
    if _numba is None:
        return lambda y: rhs(spec, y)
    args = (c.layout.n_units,
            c.Rs[:, 0].copy(), c.Rr[:, 0].copy(), c.Ls[:, 0].copy(),
            c.Lr[:, 0].copy(), c.Lm[:, 0].copy(), c.H[:, 0].copy(),
            c.wb[:, 0].copy(), c.Rc[:, 0].copy(), c.Lc[:, 0].copy(),
            c.Cf[:, 0].copy(), c.Cdc[:, 0].copy(),
            c.kp[:, :, 0].copy(), c.ki[:, :, 0].copy(),
            c.omega_mref[:, 0].copy(), c.Qsref[:, 0].copy(),
            c.udcref[:, 0].copy(), c.Qgref[:, 0].copy(), c.Pm[:, 0].copy(),
            c.fR[:, 0].copy(), c.fL[:, 0].copy(), c.beta[:, 0].copy(),
            c.tR, c.tL, c.wb_net, c.Vgx, c.Vgy, c.cden, c.cf_sign,
            CONSTRAINT_DAMPING)
    n = c.layout.n

    def f(y):
        out = np.empty(n)
        _rhs_kernel(np.asarray(y, dtype=float), out, *args)
        return out

    return f


def aggregate(spec: SystemSpec, ratios) -> SystemSpec:
    """Aggregate identical units into one equivalent unit per capacity ratio.

    `ratios` are positive capacity fractions summing to one; each becomes one
    aggregated unit on the base ratio * total MVA.  Per-unit parameters,
    gains and setpoints carry over unchanged; the feeder pu values carry
    over too, because the parallel combination of a group's member feeders
    rescaled to the group base cancels exactly (loss-preserving scaling).
    The trunk, grid source and system base are untouched.
    """
    ratios = [float(r) for r in ratios]
    if not ratios:
        raise StructuralError("aggregation needs at least one group")
    if any(r <= 0 for r in ratios):
        raise StructuralError("empty or negative aggregation group")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise StructuralError(f"group ratios sum to {sum(ratios)!r}, expected 1")
    first = spec.units[0]
    if any(
        dataclasses.replace(u, base_mva=first.base_mva) != first for u in spec.units
    ):
        raise StructuralError("aggregation requires identical units")
    if any(f != spec.feeders[0] for f in spec.feeders):
        raise StructuralError("aggregation requires identical feeders")
    total = sum(u.base_mva for u in spec.units)
    units = tuple(
        dataclasses.replace(first, base_mva=r * total) for r in ratios
    )
    feeders = (spec.feeders[0],) * len(ratios)
    return dataclasses.replace(
        spec, units=units, feeders=feeders, system_mva=spec.system_mva
    )
