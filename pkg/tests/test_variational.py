"""Tests for the constrained minimizers."""

import numpy as np
import pytest

from paulilab.functionals import EMConfiguration, natural_constants
from paulilab.grids import (
    DIRICHLET_ZERO,
    PERIODIC,
    Grid,
    ScalarField,
    VectorField3,
    quadrature_weights,
)
from paulilab.variational import (
    FISHER,
    TOTAL,
    MinimizationProblem,
    VariationalError,
    functional_gradient,
    minimize,
    objective_value,
    projected_density_gradient,
    spectrum_scan,
)

CONSTS = natural_constants()
L = 1.0


def box_grid(n=256):
    return Grid((L,), (n,), DIRICHLET_ZERO)


def box_density(grid):
    x = grid.axis_coordinates(0)
    return (2 / L) * np.sin(np.pi * x / L) ** 2


def fisher_problem(grid, **kw):
    defaults = dict(objective=FISHER, grid=grid, grad_tol=1e-6, multistarts=4, seed=1)
    defaults.update(kw)
    return MinimizationProblem(**defaults)


# ---------------------------------------------------------------------------
# flagship box problem
# ---------------------------------------------------------------------------


def test_box_minimum_objective_and_density():
    grid = box_grid(256)
    res = minimize(fisher_problem(grid))
    target = (2 * np.pi / L) ** 2
    assert res.converged
    assert res.objective_value == pytest.approx(target, rel=0.01)
    err = np.max(np.abs(res.fields["p"] - box_density(grid)))
    assert err < 0.02 * np.max(box_density(grid))


def test_analytic_optimum_is_fixed_point():
    grid = box_grid(512)
    res = minimize(fisher_problem(grid, initial={"p": box_density(grid)}))
    assert res.iterations == 0
    assert res.converged


def test_monotone_descent_trace():
    grid = box_grid(128)
    res = minimize(fisher_problem(grid, multistarts=1))
    objectives = res.trace[:, 1]
    assert np.all(np.diff(objectives) <= 1e-12 * np.maximum(1.0, np.abs(objectives[:-1])))


def test_constraints_hold_at_optimum():
    grid = box_grid(128)
    res = minimize(fisher_problem(grid))
    p = res.fields["p"]
    w = quadrature_weights(grid)
    assert abs(float(np.sum(w * p)) - 1.0) < 1e-8
    assert np.min(p) >= 0.0
    assert p[0] == 0.0 and p[-1] == 0.0


def test_translation_insensitive_objective():
    grid = box_grid(256)
    base = box_density(grid) + 0.3 / L
    w = quadrature_weights(grid)
    values = []
    for shift in (0, 31):
        init = np.roll(base, shift)
        init[0] = init[-1] = 0.0
        init = init / float(np.sum(w * init))
        res = minimize(fisher_problem(grid, initial={"p": init}, grad_tol=1e-7))
        values.append(res.objective_value)
    assert values[0] == pytest.approx(values[1], abs=1e-6 * abs(values[0]))


def test_multistart_determinism():
    grid = box_grid(64)
    a = minimize(fisher_problem(grid, seed=5))
    b = minimize(fisher_problem(grid, seed=5))
    assert a.objective_value == b.objective_value
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.fields["p"], b.fields["p"])


def test_two_cell_toy_matches_brute_force():
    grid = Grid((2.0,), (2,), PERIODIC)  # two cells of unit volume
    coeff = np.array([1.0, 3.0])

    def value(fields):
        p = np.asarray(fields["p"], dtype=float)
        return float(np.sum(coeff * p * p))

    problem = MinimizationProblem(
        objective=value, grid=grid, grad_tol=1e-10, multistarts=3, seed=2,
        max_iterations=500,
    )
    res = minimize(problem)

    best = None
    for p1 in np.linspace(0.0, 1.0, 2001):
        val = coeff[0] * p1**2 + coeff[1] * (1 - p1) ** 2
        best = val if best is None or val < best else best
    assert res.objective_value == pytest.approx(best, abs=1e-6)
    assert res.fields["p"][0] == pytest.approx(0.75, abs=1e-4)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def test_gradient_zero_for_constant_density_periodic():
    grid = Grid((L,), (64,), PERIODIC)
    problem = fisher_problem(grid)
    g = functional_gradient(problem, {"p": np.full(grid.shape, 1.0 / L)})
    np.testing.assert_allclose(g["p"], 0.0, atol=1e-12)


def test_projected_gradient_vanishes_at_box_optimum():
    grid = box_grid(512)
    problem = fisher_problem(grid)
    p = box_density(grid)
    grad = functional_gradient(problem, {"p": p})["p"]
    proj = projected_density_gradient(grad, p, grid)
    assert float(np.linalg.norm(proj)) < 1e-6


def fd_check(problem, fields, components, rel_tol=1e-5, delta=3e-6):
    grads = functional_gradient(problem, fields)
    base = dict(fields)
    rng = np.random.default_rng(7)
    for _ in range(components):
        name = list(fields)[rng.integers(len(fields))]
        arr = np.asarray(fields[name], dtype=float)
        idx = tuple(rng.integers(s) for s in arr.shape)
        step = delta * max(1.0, abs(arr[idx]))
        up = arr.copy()
        up[idx] += step
        down = arr.copy()
        down[idx] -= step
        fd = (
            objective_value(problem, {**base, name: up})
            - objective_value(problem, {**base, name: down})
        ) / (2 * step)
        analytic = grads[name][idx]
        assert fd == pytest.approx(analytic, rel=rel_tol, abs=1e-9)


def test_fisher_gradient_matches_finite_differences():
    grid = Grid((L,), (48,), PERIODIC)
    rng = np.random.default_rng(3)
    p = 1.0 + 0.5 * rng.random(grid.shape)
    p /= np.sum(p * grid.cell_volume)
    fd_check(fisher_problem(grid), {"p": p}, components=40)


def smooth_total_problem(n=24):
    grid = Grid((L, L), (n, n), PERIODIC)
    rng = np.random.default_rng(11)
    x, y = grid.meshgrid()
    a_vals = np.zeros(grid.shape + (3,))
    for i in range(3):
        a_vals[..., i] = 0.3 * np.sin(2 * np.pi * x + i) * np.cos(2 * np.pi * y - i)
    phi_pot = ScalarField(grid, 0.4 * np.cos(2 * np.pi * (x + y)))
    em = EMConfiguration.from_potentials(phi_pot, VectorField3(grid, a_vals))
    em = EMConfiguration(grid, phi_pot, em.a_pot, b=em.b, e=em.e)
    ones = np.ones(grid.shape)
    p = 1.0 + 0.4 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
    p /= np.sum(p * grid.cell_volume)
    fields = {
        "p": p * ones,
        "theta": (np.pi / 2 + 0.5 * np.cos(2 * np.pi * y + 0.4)) * ones,
        "s": 0.4 * np.sin(2 * np.pi * (x - y)) * ones,
        "phi": 0.5 * np.cos(2 * np.pi * x + 1.0) * ones,
    }
    problem = MinimizationProblem(
        objective=TOTAL,
        grid=grid,
        free_fields=("p", "theta", "s", "phi"),
        em=em,
        consts=CONSTS,
        seed=0,
    )
    return problem, fields


def test_total_gradient_matches_finite_differences():
    problem, fields = smooth_total_problem()
    fd_check(problem, fields, components=100)


def test_total_objective_descends():
    problem, fields = smooth_total_problem(n=16)
    problem = MinimizationProblem(
        objective=TOTAL,
        grid=problem.grid,
        free_fields=("s",),
        em=problem.em,
        consts=problem.consts,
        initial={**fields},
        grad_tol=1e-8,
        max_iterations=3000,
    )
    start = objective_value(problem, fields)
    res = minimize(problem)
    assert res.objective_value < start
    # the kinetic cost of the action gradient has been relaxed away
    grads = functional_gradient(problem, res.fields)
    assert float(np.linalg.norm(grads["s"])) < 1e-6


# ---------------------------------------------------------------------------
# excited family
# ---------------------------------------------------------------------------


def test_spectrum_scan_reproduces_mode_family():
    grid = box_grid(256)
    problem = fisher_problem(grid, multistarts=2, grad_tol=1e-5)
    scan = spectrum_scan(problem, 3)
    for n, (value, p_field) in enumerate(scan, start=1):
        assert value == pytest.approx((2 * n * np.pi / L) ** 2, rel=0.01)
        assert abs(float(np.sum(quadrature_weights(grid) * p_field.values)) - 1.0) < 1e-8


def test_spectrum_scan_single_mode_matches_minimize():
    grid = box_grid(128)
    problem = fisher_problem(grid, multistarts=2)
    scan = spectrum_scan(problem, 1)
    res = minimize(problem)
    assert scan[0][0] == res.objective_value
    np.testing.assert_array_equal(scan[0][1].values, res.fields["p"])


def test_no_stationary_point_below_ground_value():
    grid = box_grid(256)
    problem = fisher_problem(grid, multistarts=2, grad_tol=1e-5)
    scan = spectrum_scan(problem, 3)
    ground = (2 * np.pi / L) ** 2
    assert min(v for v, _ in scan) >= 0.99 * ground


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_problem_validation():
    grid = box_grid(32)
    with pytest.raises(VariationalError):
        MinimizationProblem(objective=FISHER, grid=grid, free_fields=())
    with pytest.raises(VariationalError):
        MinimizationProblem(objective=FISHER, grid=grid, free_fields=("q",))
    with pytest.raises(VariationalError):
        MinimizationProblem(objective=FISHER, grid=grid, free_fields=("p", "s"))
    with pytest.raises(VariationalError):
        spectrum_scan(MinimizationProblem(objective=TOTAL, grid=grid), 2)
