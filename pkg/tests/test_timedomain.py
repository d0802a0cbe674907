import numpy as np
import pytest
import scipy.linalg

import stabmap as sm
from stabmap.equilibrium import solve_equilibrium
from stabmap.errors import StructuralError
from stabmap.modal import jacobian_exact
from stabmap.model import unit_port_quantities
from stabmap.timedomain import (Scenario, linear_response, simulate,
                                write_timeseries_csv)


def _critical_pair(spec, x):
    J = jacobian_exact(spec, x)
    w, vr = scipy.linalg.eig(J)
    i = int(np.argmax(w.real))
    return w, vr, i


def _eig_perturbation(spec, x, scale, index=None):
    w, vr, i = _critical_pair(spec, x)
    if index is not None:
        i = index
    vec = vr[:, i].real
    if np.linalg.norm(vec) < 1e-12:
        vec = vr[:, i].imag
    return w[i], scale * vec / np.linalg.norm(vec)


def test_equilibrium_invariance(spec1, eq1):
    sc = Scenario(t_end=10.0, outputs=("u1.u_dc", "u1.omega_r", "u1.u_sx"),
                  dt_out=0.05)
    out = simulate(spec1, eq1.x_star, sc)
    assert not out.escaped
    for name, sig in out.signals.items():
        assert np.max(np.abs(sig - sig[0])) < 1e-7, name


def test_voltage_dip_settles_to_stepped_equilibrium(spec1, eq1):
    sc = Scenario(t_end=30.0, events=((1.0, "grid.V", 0.8),),
                  outputs=("u1.u_s_mag", "u1.omega_r", "u1.u_dc"),
                  dt_out=0.01)
    out = simulate(spec1, eq1.x_star, sc)
    assert not out.escaped
    stepped = sm.bind(spec1, "grid.V", 0.8)
    res = solve_equilibrium(stepped, x_guess=eq1.x_star)
    q = unit_port_quantities(stepped, res.x_star)
    assert abs(out.signals["u1.u_s_mag"][-1] - q["u_s_mag"][0]) < 1e-6
    assert abs(out.signals["u1.omega_r"][-1] - res.x_star[4]) < 1e-6
    assert abs(out.signals["u1.u_dc"][-1] - res.x_star[7]) < 1e-6


def test_mechanical_power_dip_bounded(spec1, eq1):
    sc = Scenario(t_end=6.0, events=((1.0, "unit1.Pm", 0.72),),
                  outputs=("u1.omega_r",), dt_out=0.01)
    out = simulate(spec1, eq1.x_star, sc)
    assert not out.escaped
    sig = out.signals["u1.omega_r"]
    assert np.max(np.abs(sig - sig[0])) < 0.05


def test_event_validation():
    with pytest.raises(StructuralError):
        Scenario(t_end=1.0, events=((0.5, "grid.V", 0.9), (0.5, "grid.V", 0.8)))
    with pytest.raises(StructuralError):
        Scenario(t_end=1.0, events=((2.0, "grid.V", 0.9),))


def test_unknown_output_rejected(spec1, eq1):
    sc = Scenario(t_end=0.1, outputs=("u1.bogus",))
    with pytest.raises(StructuralError):
        simulate(spec1, eq1.x_star, sc)


def test_zero_perturbation_linear_response(spec1, eq1):
    out = linear_response(spec1, eq1.x_star, np.zeros(spec1.n_states),
                          t_end=1.0, dt_out=0.1)
    for sig in out.signals.values():
        assert np.all(sig == 0.0)


def test_linear_decay_envelope_matches_eigenvalue(spec2, eq2):
    """|l^H dx(t)| of the critical mode decays exactly at exp(Re lam t)."""
    J = jacobian_exact(spec2, eq2.x_star)
    w, vl, vr = scipy.linalg.eig(J, left=True, right=True)
    i = int(np.argmax(w.real))
    lam = w[i]
    tau = 1.0 / abs(lam.real)
    dt = tau / 20.0
    out = linear_response(spec2, eq2.x_star, 1e-4 * vr[:, i].real,
                          t_end=5.0 * tau, dt_out=dt)
    traj = np.stack([out.signals[k] for k in out.signals])
    a = np.abs(vl[:, i].conj() @ traj)
    mask = a > 1e-300
    slope = np.polyfit(out.t[mask], np.log(a[mask]), 1)[0]
    assert slope == pytest.approx(lam.real, rel=0.05)


def test_small_signal_equivalence(spec2, eq2):
    """Nonlinear and linearized responses to a 0.1% perturbation agree to 1%
    over two periods of the dominant mode."""
    lam, dx0 = _eig_perturbation(spec2, eq2.x_star,
                                 1e-3 * np.linalg.norm(eq2.x_star))
    period = 2.0 * np.pi / abs(lam.imag)
    t_end = 2.0 * period
    dt = period / 200.0
    lin = linear_response(spec2, eq2.x_star, dx0, t_end=t_end, dt_out=dt)
    lin_traj = np.stack([lin.signals[k] for k in lin.signals])
    from stabmap.state import StateLayout

    names = StateLayout(spec2.n_units).names()
    sc_full = Scenario(t_end=t_end, outputs=tuple(names), dt_out=dt)
    non = simulate(spec2, eq2.x_star + dx0, sc_full)
    assert not non.escaped
    non_traj = np.stack([non.signals[n] for n in names])
    dev_nl = non_traj - eq2.x_star[:, None]
    m = min(dev_nl.shape[1], lin_traj.shape[1])
    err = np.linalg.norm(dev_nl[:, :m] - lin_traj[:, :m], axis=0)
    ref = np.max(np.linalg.norm(lin_traj[:, :m], axis=0))
    assert np.max(err) <= 0.01 * ref


def test_tolerance_halving_convergence(spec2, eq2):
    lam, dx0 = _eig_perturbation(spec2, eq2.x_star, 1e-3)
    base = Scenario(t_end=5.0, outputs=("u1.omega_r", "u1.u_dc"), dt_out=0.05)
    tight = Scenario(t_end=5.0, outputs=("u1.omega_r", "u1.u_dc"), dt_out=0.05,
                     rtol=0.5e-8, atol=0.5e-10)
    a = simulate(spec2, eq2.x_star + dx0, base)
    b = simulate(spec2, eq2.x_star + dx0, tight)
    for k in a.signals:
        assert np.max(np.abs(a.signals[k] - b.signals[k])) < 1e-7


def test_unstable_point_grows_stable_point_bounded(spec2):
    """Reactive-setpoint plane: a point outside the region grows, the
    anchor-side point stays bounded (paper's scenario protocol on the
    shipped parameter set)."""
    cases = [((-0.12, 0.0), True), ((0.05, 0.05), False)]
    for (q1, q2), expect_growth in cases:
        spec = sm.bind(sm.bind(sm.default_spec(2), "unit1.Qgref", q1),
                       "unit2.Qgref", q2)
        res = solve_equilibrium(spec)
        lam, dx0 = _eig_perturbation(spec, res.x_star, 1e-4)
        sc = Scenario(t_end=20.0, outputs=("u1.u_dc",), dt_out=0.002,
                      escape_level=1e-2)
        out = simulate(spec, res.x_star + dx0, sc)
        if expect_growth:
            assert lam.real > 0
            assert out.escaped and out.escape_time < 20.0
        else:
            assert lam.real < 0
            assert not out.escaped
            dev = np.abs(out.signals["u1.u_dc"] - out.signals["u1.u_dc"][0])
            assert np.max(dev) < 1e-3


def test_write_timeseries_csv(tmp_path, spec1, eq1):
    sc = Scenario(t_end=0.5, outputs=("u1.u_dc", "u1.Ps"), dt_out=0.1)
    out = simulate(spec1, eq1.x_star, sc)
    path = tmp_path / "timeseries.csv"
    write_timeseries_csv(out, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,u1.u_dc,u1.Ps"
    assert len(lines) == out.t.size + 1
