"""Tests for moment dynamics and charged-particle motion."""

import numpy as np
import pytest

from paulilab.classical import (
    ChargedParticleState,
    ClassicalError,
    MomentState,
    canonical_evolve,
    hj_residual,
    lorentz_evolve,
    moment_action,
    moment_hamiltonian,
    torque_evolve,
    velocity_field,
)
from paulilab.functionals import EMConfiguration, natural_constants
from paulilab.grids import DIRICHLET_ZERO, PERIODIC, Grid, ScalarField, VectorField3

CONSTS = natural_constants()


def angle_between(a, b):
    dots = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(dots)


# ---------------------------------------------------------------------------
# torque integrator
# ---------------------------------------------------------------------------


def test_torque_zero_field():
    traj = torque_evolve(MomentState((0.3, 0.5, np.sqrt(1 - 0.34))), np.zeros(3), 1.0, 1.0, 1e-2)
    np.testing.assert_allclose(
        traj.moments, np.broadcast_to(traj.moments[0], traj.moments.shape), atol=1e-14
    )


def test_torque_aligned_moment_constant():
    b = np.array([0.0, 0.0, 2.0])
    traj = torque_evolve(MomentState((0, 0, 1.0)), b, 1.7, 1.0, 1e-3)
    np.testing.assert_allclose(traj.moments[:, 2], 1.0, atol=1e-12)


def test_torque_precession_oracle():
    gamma, b = 1.0, 2.0
    period = 2 * np.pi / (gamma * b)
    dt = period / 1000
    traj = torque_evolve(MomentState((1, 0, 0)), np.array([0, 0, b]), gamma, 10 * period, dt)
    t = traj.times
    exact = np.stack(
        [np.cos(gamma * b * t), -np.sin(gamma * b * t), np.zeros_like(t)], axis=-1
    )
    assert np.max(np.abs(traj.moments - exact)) < 1e-6


def test_torque_exact_rotation_matches_rk4():
    b = np.array([0.3, -0.4, 0.8])
    rk = torque_evolve(MomentState((1, 0, 0)), b, 2.0, 3.0, 1e-3)
    ex = torque_evolve(MomentState((1, 0, 0)), b, 2.0, 3.0, 1e-3, exact_rotation=True)
    assert np.max(angle_between(rk.moments, ex.moments)) < 1e-8


def test_moment_norm_conserved():
    b = np.array([0.5, 0.1, 1.0])
    traj = torque_evolve(MomentState((0, 1, 0)), b, 3.0, 10.0, 1e-3)
    norms = np.linalg.norm(traj.moments, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


# ---------------------------------------------------------------------------
# spherical-chart form
# ---------------------------------------------------------------------------


def test_hamiltonian_matches_vector_form():
    rng = np.random.default_rng(2)
    for _ in range(20):
        phi = rng.uniform(-np.pi, np.pi)
        z = rng.uniform(-0.99, 0.99)
        b = rng.normal(size=3)
        gamma = rng.uniform(0.5, 2.0)
        m = MomentState.from_angles(phi, z)
        assert moment_hamiltonian(phi, z, b, gamma) == pytest.approx(
            -gamma * float(np.dot(m.m, b)), abs=1e-12
        )


def test_hamiltonian_aligned_and_orthogonal():
    assert moment_hamiltonian(0.0, 1.0 - 1e-12, (0, 0, 2.0), 1.5) == pytest.approx(-3.0, rel=1e-9)
    assert moment_hamiltonian(0.0, 0.0, (0, 0, 2.0), 1.5) == pytest.approx(0.0, abs=1e-12)


def test_canonical_axial_field_closed_form():
    gamma, bz = 1.3, 0.8
    traj = canonical_evolve(0.4, 0.2, np.array([0, 0, bz]), gamma, 5.0, 1e-3)
    np.testing.assert_allclose(traj.z, 0.2, atol=1e-12)
    np.testing.assert_allclose(traj.phi, 0.4 - gamma * bz * traj.times, atol=1e-9)


def test_canonical_energy_drift():
    b = np.array([0.3, 0.2, 0.9])
    gamma = 1.1
    traj = canonical_evolve(0.1, 0.3, b, gamma, 10.0, 1e-3)  # 10^4 steps
    h = np.array(
        [moment_hamiltonian(p, z, b, gamma) for p, z in zip(traj.phi, traj.z)]
    )
    assert np.max(np.abs(h - h[0])) < 1e-8 * abs(h[0])


def test_canonical_matches_torque_on_tilted_field():
    b = np.array([0.4, -0.3, 0.85])
    gamma = 1.7
    dt = 2 * np.pi / (gamma * np.linalg.norm(b)) / 2000
    m0 = MomentState.from_angles(0.7, 0.35)
    ct = canonical_evolve(0.7, 0.35, b, gamma, 2.0, dt)
    tt = torque_evolve(m0, b, gamma, 2.0, dt)
    m_c = np.stack(
        [
            np.sqrt(1 - ct.z**2) * np.cos(ct.phi),
            np.sqrt(1 - ct.z**2) * np.sin(ct.phi),
            ct.z,
        ],
        axis=-1,
    )
    assert np.max(angle_between(m_c, tt.moments)) < 1e-6


def test_canonical_pole_guard():
    with pytest.raises(ClassicalError):
        canonical_evolve(0.0, 1.0 - 1e-9, (0, 0, 1.0), 1.0, 1.0, 1e-2)
    # a great-circle orbit through the pole aborts with a diagnostic
    with pytest.raises(ClassicalError):
        canonical_evolve(np.pi / 2, 0.999, (1.0, 0, 0), 1.0, 10.0, 1e-3)


# ---------------------------------------------------------------------------
# action functional
# ---------------------------------------------------------------------------


def test_action_stationary_moment():
    # m parallel to B: z = 1 is the pole, use the vector statement via z -> B
    gamma, b = 1.2, np.array([0.0, 0.0, 0.9])
    t_final, dt = 2.0, 1e-3
    n = int(t_final / dt) + 1
    phi = np.zeros(n)
    z = np.full(n, 1.0)
    act = moment_action(phi, z, dt, b, gamma)
    assert act == pytest.approx(-gamma * 0.9 * t_final, rel=1e-9)


def test_action_first_variation_second_order():
    b = np.array([0.4, 0.2, 0.9])
    gamma = 1.3
    dt = 1e-3
    traj = canonical_evolve(0.3, 0.4, b, gamma, 2.0, dt)
    base = moment_action(traj.phi, traj.z, dt, b, gamma)
    t = traj.times
    eta_phi = np.sin(np.pi * t / t[-1])  # endpoint-fixed phase direction
    eta_z = 0.5 * np.sin(2 * np.pi * t / t[-1] + 0.3)
    deltas = []
    for eps in (2e-3, 1e-3):
        val = moment_action(traj.phi + eps * eta_phi, traj.z + eps * eta_z, dt, b, gamma)
        deltas.append(abs(val - base))
    assert 3.5 <= deltas[0] / deltas[1] <= 4.5


def test_action_time_reversal_with_field_flip():
    # magnetic time reversal: reverse traversal, flip moment and field
    b = np.array([0.4, 0.2, 0.9])
    gamma = 1.3
    dt = 1e-3
    traj = canonical_evolve(0.3, 0.4, b, gamma, 2.0, dt)
    act = moment_action(traj.phi, traj.z, dt, b, gamma)
    act_rev = moment_action(
        (traj.phi + np.pi)[::-1], -traj.z[::-1], dt, -b, gamma
    )
    assert act_rev == pytest.approx(act, rel=1e-9)


# ---------------------------------------------------------------------------
# particle motion
# ---------------------------------------------------------------------------


def box_em(extent=8.0, cells=9, phi_fn=None, b_uniform=None, u_fn=None):
    g = Grid((extent,) * 3, (cells,) * 3, DIRICHLET_ZERO)
    x, y, z = g.meshgrid()
    ones = np.ones(g.shape)
    phi = ScalarField(g, phi_fn(x, y, z) * ones if phi_fn else np.zeros(g.shape))
    b = None
    if b_uniform is not None:
        vals = np.zeros(g.shape + (3,))
        vals[:] = np.asarray(b_uniform)
        b = VectorField3(g, vals)
    u = ScalarField(g, u_fn(x, y, z) * ones) if u_fn else None
    return g, EMConfiguration(g, phi, VectorField3.zero(g), b=b, u=u)


def test_lorentz_free_particle():
    g, em = box_em()
    state = ChargedParticleState((4.0, 4.0, 4.0), (0.3, -0.2, 0.1))
    traj = lorentz_evolve(state, em, charge=0.0, mass=1.0, t_final=2.0, dt=1e-2)
    exact = state.x + np.outer(traj.times, state.v)
    np.testing.assert_allclose(traj.positions, exact, atol=1e-12)


def test_lorentz_uniform_field_parabola():
    e0 = 0.5
    g, em = box_em(phi_fn=lambda x, y, z: -e0 * x)  # E = +e0 along x
    q, m = 1.3, 2.0
    state = ChargedParticleState((1.0, 4.0, 4.0), (0.1, 0.0, 0.0))
    traj = lorentz_evolve(state, em, q, m, t_final=2.0, dt=1e-3)
    exact_x = 1.0 + 0.1 * traj.times + 0.5 * (q * e0 / m) * traj.times**2
    np.testing.assert_allclose(traj.positions[:, 0], exact_x, atol=1e-10)


def test_lorentz_cyclotron_radius_drift():
    bz, q, m, v = 1.0, 1.0, 1.0, 0.5
    radius = m * v / (q * bz)
    period = 2 * np.pi * m / (q * bz)
    g, em = box_em(extent=8.0, b_uniform=(0.0, 0.0, bz))
    center = np.array([4.0, 4.0, 4.0])
    # v x B must point toward the gyrocenter
    state = ChargedParticleState(center + np.array([radius, 0, 0]), (0.0, -v, 0.0))
    traj = lorentz_evolve(state, em, q, m, 10 * period, period / 300)
    radii = np.linalg.norm(traj.positions[:, :2] - center[:2], axis=1)
    assert np.max(np.abs(radii - radius)) < 1e-3 * radius
    speeds = np.linalg.norm(traj.velocities, axis=1)
    assert np.max(np.abs(speeds - v)) < 1e-6 * v  # magnetic force does no work


def test_lorentz_energy_conservation():
    e0, q, m = 0.4, 1.0, 1.0
    g, em = box_em(extent=50.0, cells=11, phi_fn=lambda x, y, z: -e0 * x)
    state = ChargedParticleState((5.0, 25.0, 25.0), (0.2, 0.1, 0.0))
    traj = lorentz_evolve(state, em, q, m, 10.0, 1e-3)
    phi_at = -e0 * traj.positions[:, 0]
    energy = 0.5 * m * np.sum(traj.velocities**2, axis=1) + q * phi_at
    assert np.max(np.abs(energy - energy[0])) < 1e-6 * abs(energy[0])


def test_lorentz_exit_grid_raises():
    g, em = box_em(extent=4.0)
    state = ChargedParticleState((2.0, 2.0, 2.0), (1.0, 0.0, 0.0))
    with pytest.raises(ClassicalError):
        lorentz_evolve(state, em, 0.0, 1.0, 10.0, 1e-2)


def test_gradient_force_from_u():
    g, em = box_em(extent=10.0, cells=11, u_fn=lambda x, y, z: 0.7 * x)
    state = ChargedParticleState((5.0, 5.0, 5.0), (0.0, 0.0, 0.0))
    traj = lorentz_evolve(state, em, charge=0.0, mass=2.0, t_final=1.0, dt=1e-3)
    exact_x = 5.0 - 0.5 * (0.7 / 2.0) * traj.times**2
    np.testing.assert_allclose(traj.positions[:, 0], exact_x, atol=1e-10)


# ---------------------------------------------------------------------------
# velocity field and the motion constraint
# ---------------------------------------------------------------------------


def test_velocity_field_momentum_action():
    g = Grid((2.0,) * 3, (9,) * 3, DIRICHLET_ZERO)
    x, y, z = g.meshgrid()
    p_vec = np.array([0.7, -0.2, 0.4])
    s = ScalarField(g, p_vec[0] * x + p_vec[1] * y + p_vec[2] * z)
    u = velocity_field(s, VectorField3.zero(g), charge=1.0, mass=2.0)
    for i in range(3):
        np.testing.assert_allclose(u.values[..., i], p_vec[i] / 2.0, atol=1e-12)


def test_velocity_field_pure_potential():
    g = Grid((1.0,) * 3, (8,) * 3, PERIODIC)
    a_vals = np.zeros(g.shape + (3,))
    a_vals[..., 1] = 0.6
    u = velocity_field(ScalarField.full(g, 0.0), VectorField3(g, a_vals), 1.5, 3.0)
    np.testing.assert_allclose(u.values[..., 1], -1.5 * 0.6 / 3.0, atol=1e-13)


def test_velocity_field_circulation():
    # curl-carrying potential: loop integral of U matches -(q/m) loop of A
    g = Grid((2.0,) * 3, (17,) * 3, DIRICHLET_ZERO)
    x, y, z = g.meshgrid()
    ones = np.ones(g.shape)
    a_vals = np.zeros(g.shape + (3,))
    a_vals[..., 0] = -(y - 1.0) * ones
    a_vals[..., 1] = (x - 1.0) * ones
    a = VectorField3(g, a_vals)
    q, m = 1.2, 0.8
    u = velocity_field(ScalarField.full(g, 0.0), a, q, m)
    # square loop through lattice points at fixed k, mid-plane
    idx = [4, 12]
    k = 8
    circ_u = 0.0
    circ_a = 0.0
    h = g.spacing[0]

    def seg(vals, comp, i0, i1, j, axis):
        # sum component along a lattice segment, trapezoid weights
        if axis == 0:
            line = vals[i0 : i1 + 1, j, k, comp] if i1 >= i0 else vals[i1 : i0 + 1, j, k, comp][::-1]
        else:
            line = vals[j, i0 : i1 + 1, k, comp] if i1 >= i0 else vals[j, i1 : i0 + 1, k, comp][::-1]
        sign = 1.0 if i1 >= i0 else -1.0
        return sign * h * (line.sum() - 0.5 * line[0] - 0.5 * line[-1])

    for vals, acc in ((u.values, "u"), (a.values, "a")):
        total = (
            seg(vals, 0, idx[0], idx[1], idx[0], axis=0)
            + seg(vals, 1, idx[0], idx[1], idx[1], axis=1)
            + seg(vals, 0, idx[1], idx[0], idx[1], axis=0)
            + seg(vals, 1, idx[1], idx[0], idx[0], axis=1)
        )
        if acc == "u":
            circ_u = total
        else:
            circ_a = total
    assert abs(circ_u) > 1e-3
    assert circ_u == pytest.approx(-(q / m) * circ_a, rel=1e-10)


def test_hj_residual_free_particle():
    g = Grid((4.0,), (33,), DIRICHLET_ZERO)
    x = g.axis_coordinates(0)
    p, m = 0.8, CONSTS.mass
    dt = 0.01
    frames = [
        ScalarField(g, p * x - (p**2 / (2 * m)) * (i * dt)) for i in range(5)
    ]
    em = EMConfiguration.zero(g)
    res = hj_residual(frames, em, ScalarField.full(g, 0.0), CONSTS, dt=dt)
    for r in res:
        np.testing.assert_allclose(r.values, 0.0, atol=1e-12)


def test_hj_residual_constant_potential():
    g = Grid((1.0,), (16,), PERIODIC)
    v0 = 0.6
    dt = 0.05
    frames = [ScalarField.full(g, -v0 * i * dt) for i in range(5)]
    res = hj_residual(frames, EMConfiguration.zero(g), ScalarField.full(g, v0), CONSTS, dt=dt)
    for r in res:
        np.testing.assert_allclose(r.values, 0.0, atol=1e-13)


def test_hj_chain_matches_lorentz():
    # residual-zero action for a uniform force; drift trajectories follow it
    e0, q, m = 0.5, CONSTS.charge, CONSTS.mass
    L, n = 40.0, 41
    g = Grid((L,) * 3, (n,) * 3, DIRICHLET_ZERO)
    x, _, _ = g.meshgrid()
    ones = np.ones(g.shape)
    dt = 0.02
    frames = []
    p0 = 0.3
    for i in range(101):
        t = i * dt
        p_t = p0 + q * e0 * t
        # dS/dt = -p(t)^2/2m  ->  g(t) = -int p^2/2m dt
        g_t = -(p_t**3 - p0**3) / (6.0 * m * q * e0)
        frames.append(ScalarField(g, p_t * x * ones + g_t))
    v_pot = ScalarField(g, -q * e0 * x * ones)  # V = q phi, phi = -e0 x
    em = EMConfiguration(g, ScalarField(g, -e0 * x * ones), VectorField3.zero(g))
    res = hj_residual(frames, em, v_pot, CONSTS, dt=dt)
    # residual limited by the time stencil on the cubic-in-time action
    assert np.max(np.abs(res[50].values)) < 5e-5

    # drift flow: dx/dt = (p0 + q e0 t)/m from the action gradient
    x0 = 10.0
    t_final = 2.0
    drift_x = x0 + (p0 * t_final + 0.5 * q * e0 * t_final**2) / m
    state = ChargedParticleState((x0, 20.0, 20.0), (p0 / m, 0.0, 0.0))
    traj = lorentz_evolve(state, em, q, m, t_final, 1e-3)
    assert traj.positions[-1, 0] == pytest.approx(drift_x, rel=1e-4)


def test_hj_residual_gauge_pure_configuration():
    # S = q*chi with A = grad(chi): the drift momentum vanishes identically
    g = Grid((2.0,) * 3, (17,) * 3, DIRICHLET_ZERO)
    x, y, z = g.meshgrid()
    chi = (0.4 * x + 0.1 * y - 0.3 * z) * np.ones(g.shape)  # affine: stencil-exact
    q = CONSTS.charge
    from paulilab.grids import gradient as grad_op
    a = VectorField3(g, grad_op(ScalarField(g, chi)).values)
    em = EMConfiguration(g, ScalarField.full(g, 0.0), a)
    res = hj_residual(ScalarField(g, q * chi), em, ScalarField.full(g, 0.0), CONSTS)
    np.testing.assert_allclose(res[0].values, 0.0, atol=1e-12)
