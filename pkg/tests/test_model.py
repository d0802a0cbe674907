import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stabmap as sm
from stabmap.errors import DomainError, StructuralError
from stabmap.model import (CONSTRAINT_DAMPING, aggregate, rhs, rhs_compiled,
                           rotate_dq_to_xy, unit_port_quantities)
from stabmap.state import StateLayout

from conftest import random_valid_state

finite = st.floats(-10.0, 10.0, allow_nan=False)
angles = st.floats(-4.0 * math.pi, 4.0 * math.pi, allow_nan=False)


def test_rotate_identity():
    assert rotate_dq_to_xy(1.0, 0.0, 0.0) == (1.0, 0.0)


def test_rotate_quarter_turn():
    ax, ay = rotate_dq_to_xy(1.0, 0.0, math.pi / 2.0)
    assert ax == pytest.approx(0.0, abs=1e-15)
    assert ay == pytest.approx(1.0)


@given(finite, finite, angles)
@settings(max_examples=200, deadline=None)
def test_rotate_round_trip(ad, aq, delta):
    ax, ay = rotate_dq_to_xy(ad, aq, delta)
    bd, bq = rotate_dq_to_xy(ax, ay, -delta)
    assert bd == pytest.approx(ad, abs=1e-9)
    assert bq == pytest.approx(aq, abs=1e-9)


@given(finite, finite, angles)
@settings(max_examples=200, deadline=None)
def test_rotate_is_isometry(ad, aq, delta):
    ax, ay = rotate_dq_to_xy(ad, aq, delta)
    assert ax * ax + ay * ay == pytest.approx(ad * ad + aq * aq, rel=1e-12,
                                              abs=1e-12)


def test_rhs_zero_at_equilibrium(spec2, eq2):
    f = rhs(spec2, eq2.x_star)
    assert np.max(np.abs(f)) <= 1e-10


def test_rhs_dimension_mismatch(spec2):
    with pytest.raises(StructuralError):
        rhs(spec2, np.zeros(10))


def test_rhs_rejects_nonpositive_udc(spec1):
    x = np.zeros(spec1.n_states)
    x[4] = 1.0
    x[7] = -0.5
    with pytest.raises(DomainError):
        rhs(spec1, x)


def test_zero_gains_freeze_integrators(spec1):
    spec = spec1
    for i in range(1, 9):
        spec = sm.bind(spec, f"unit1.Kp{i}", 0.0)
        spec = sm.bind(spec, f"unit1.Ki{i}", 0.0)
    rng = np.random.default_rng(3)
    for _ in range(5):
        x = random_valid_state(spec, rng)
        dx = rhs(spec, x)
        assert np.allclose(dx[10:18], 0.0, atol=1e-14)


def test_power_audit_single_unit(spec1, eq1):
    # independent oracle: energy conservation, Ps + Pg - losses = -Pm
    q = unit_port_quantities(spec1, eq1.x_star)
    lhs = q["Ps"][0] + q["Pg"][0] - q["loss_cu"][0] - q["loss_filter"][0]
    assert lhs == pytest.approx(-spec1.units[0].setpoints.Pm, abs=1e-8)


def test_frame_rotation_consistency(spec2):
    """Rotating the whole xy frame (states, grid angle, PLL angles) must
    rotate the xy derivative pairs covariantly and preserve the rest."""
    layout = StateLayout(spec2.n_units)
    rng = np.random.default_rng(7)
    phi = 0.731
    c, s = math.cos(phi), math.sin(phi)

    def rot_state(x):
        y = x.copy()
        for j in range(spec2.n_units):
            b = layout.unit_slice(j).start
            for off in (0, 2, 5, 8):   # psi_s, psi_r, i_g, u_s xy pairs
                ax, ay = x[b + off], x[b + off + 1]
                y[b + off] = c * ax - s * ay
                y[b + off + 1] = s * ax + c * ay
            y[b + 18] = x[b + 18] + phi
        for k in range(spec2.n_units + 1):
            b = layout.line_slice(k).start
            ax, ay = x[b], x[b + 1]
            y[b] = c * ax - s * ay
            y[b + 1] = s * ax + c * ay
        return y

    spec_rot = sm.bind(spec2, "grid.theta", spec2.grid.theta + phi)
    for _ in range(5):
        x = random_valid_state(spec2, rng, scale=0.3)
        d1 = rot_state(x + 0.0)
        dx = rhs(spec2, x)
        dx_rot = rhs(spec_rot, rot_state(x))
        expected = rot_state(x + dx) - d1   # rotation is linear in the pairs
        for j in range(spec2.n_units):
            b = layout.unit_slice(j).start
            np.testing.assert_allclose(dx_rot[b + 18], dx[b + 18],
                                       rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(dx_rot, expected, rtol=1e-8, atol=1e-8)


def test_permutation_symmetry(spec2):
    layout = StateLayout(2)
    rng = np.random.default_rng(11)
    x = random_valid_state(spec2, rng, scale=0.4)

    def swap(v):
        w = v.copy()
        w[layout.unit_slice(0)], w[layout.unit_slice(1)] = (
            v[layout.unit_slice(1)].copy(), v[layout.unit_slice(0)].copy())
        w[layout.line_slice(0)], w[layout.line_slice(1)] = (
            v[layout.line_slice(1)].copy(), v[layout.line_slice(0)].copy())
        return w

    np.testing.assert_allclose(rhs(spec2, swap(x)), swap(rhs(spec2, x)),
                               rtol=1e-10, atol=1e-10)


def test_compiled_rhs_matches_batched(spec2):
    f = rhs_compiled(spec2)
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = random_valid_state(spec2, rng)
        np.testing.assert_allclose(f(x), rhs(spec2, x), rtol=1e-12, atol=1e-10)


def test_batched_rhs_matches_loop(spec2):
    rng = np.random.default_rng(9)
    X = np.stack([random_valid_state(spec2, rng) for _ in range(7)], axis=1)
    batch = rhs(spec2, X)
    for i in range(X.shape[1]):
        np.testing.assert_allclose(batch[:, i], rhs(spec2, X[:, i]),
                                   rtol=1e-13, atol=1e-13)


def test_constraint_pair_parked(spec2, eq2):
    """The collector KCL mismatch pair must sit at omega_b(-gamma +/- j)."""
    from stabmap.modal import jacobian_exact

    wb = spec2.units[0].machine.omega_b
    w = np.linalg.eigvals(jacobian_exact(spec2, eq2.x_star))
    target = wb * complex(-CONSTRAINT_DAMPING, 1.0)
    assert np.min(np.abs(w - target)) < 1e-6 * wb


def test_cf_coupling_sign_switch(spec1):
    """The printed y-axis capacitor coupling sign is available behind the
    switch; it flips exactly the u_sy rows relative to the symmetric default."""
    printed = dataclasses.replace(spec1, cf_symmetric_coupling=False)
    rng = np.random.default_rng(21)
    layout = StateLayout(1)
    x = random_valid_state(spec1, rng)
    d_sym = rhs(spec1, x)
    d_prn = rhs(printed, x)
    i_usy = layout.index("u1.u_sy")
    wb = spec1.units[0].machine.omega_b
    cf_term = 2.0 * wb * x[layout.index("u1.u_sx")]
    assert d_prn[i_usy] - d_sym[i_usy] == pytest.approx(cf_term, rel=1e-12)
    mask = np.ones(layout.n, dtype=bool)
    mask[i_usy] = False
    np.testing.assert_allclose(d_prn[mask], d_sym[mask], rtol=0, atol=0)


def test_symmetric_cap_absorbs_no_active_power(spec1, eq1):
    """With the sign-symmetric filter coupling, the capacitor branch is
    lossless at equilibrium: feeder power equals stator + GSC power."""
    q = unit_port_quantities(spec1, eq1.x_star)
    assert q["P_line"][0] == pytest.approx(q["Ps"][0] + q["Pg"][0], abs=1e-9)


# --- aggregation ----------------------------------------------------------

def test_aggregate_identity(spec1):
    assert aggregate(spec1, [1.0]) == spec1


def test_aggregate_three_to_one(spec3):
    agg = aggregate(spec3, [1.0])
    assert agg.n_units == 1
    assert agg.units[0].base_mva == pytest.approx(3 * 1.5)
    # identical pu parameters on the tripled base; feeder pu carries over
    assert agg.units[0].machine == spec3.units[0].machine
    assert agg.feeders[0] == spec3.feeders[0]
    assert agg.trunk == spec3.trunk
    assert agg.system_mva == spec3.system_mva


def test_aggregate_ratio_two_one(spec3):
    agg = aggregate(spec3, [2.0 / 3.0, 1.0 / 3.0])
    assert agg.n_units == 2
    assert agg.units[0].base_mva == pytest.approx(3.0)
    assert agg.units[1].base_mva == pytest.approx(1.5)


def test_aggregate_composition(spec3):
    """Aggregating in two stages equals the direct coarse aggregation."""
    two = aggregate(spec3, [2.0 / 3.0, 1.0 / 3.0])
    one_direct = aggregate(spec3, [1.0])
    one_via_two = aggregate(two, [1.0])
    for f in dataclasses.fields(one_direct):
        assert getattr(one_via_two, f.name) == getattr(one_direct, f.name)


def test_aggregate_rejects_bad_groups(spec3):
    with pytest.raises(StructuralError):
        aggregate(spec3, [])
    with pytest.raises(StructuralError):
        aggregate(spec3, [0.5, 0.0, 0.5])
    with pytest.raises(StructuralError):
        aggregate(spec3, [0.5, 0.2])


def test_aggregate_rejects_nonidentical(spec2):
    mixed = sm.bind(spec2, "unit1.Rs", 0.05)
    with pytest.raises(StructuralError):
        aggregate(mixed, [0.5, 0.5])
