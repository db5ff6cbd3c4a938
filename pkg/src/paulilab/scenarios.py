"""Scenario documents: JSON in, validated runs out.

A scenario is a single JSON object selecting one named pipeline and its
parameters.  Parsing validates against a per-kind schema and reports every
violation at once; running executes the mapped modules, writes the data
outputs atomically, and returns a report with one record per executed check.
All data outputs are byte-deterministic for a fixed (scenario, seed,
version); the report carries the wall time and is the one timing-dependent
artifact.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__, classical, fieldio, functionals, inference, pauli, variational, verification
from .functionals import EMConfiguration, pauli_constants
from .grids import DIRICHLET_ZERO, PERIODIC, SPECTRAL, Grid, ScalarField, VectorField3
from .verification import CheckRecord, check_in, check_leq, check_true


class ScenarioError(ValueError):
    """Raised with the full list of schema violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


REQUIRED = object()

_COMMON_CONSTANTS = {
    "hbar": (float, 1.0, "Planck constant over 2 pi"),
    "mass": (float, 1.0, "particle mass"),
    "charge": (float, 1.0, "particle charge"),
}

SCHEMAS: dict[str, dict[str, tuple]] = {
    "sample": {
        "cells": (int, 160, "voxels per axis"),
        "sigma": (float, 10.0, "table width in lattice spacings"),
        "slices": (int, 2, "time slices"),
        "color_angle": (float, 0.6, "color split angle"),
        "repetitions": (int, 10**6, "events per slice"),
    },
    "evidence": {
        "cells": (int, 200, "voxels per axis"),
        "repetitions": (int, 10**6, "events per slice"),
        "shift": (list, [0.25, 0.0, 0.0], "position shift in lattice spacings"),
    },
    "fisher_discrete": {
        "cells": (int, 256, "voxels per axis"),
        "sigma": (float, 10.0, "table width in lattice spacings"),
        "slices": (int, 1, "time slices"),
    },
    "box_minimize": {
        "cells": (int, 512, "lattice points"),
        "length": (float, 1.0, "box length"),
        "modes": (int, 3, "stationary modes to scan"),
        "multistarts": (int, 8, "random starts"),
        "grad_tol": (float, 1e-6, "projected-gradient tolerance"),
        "max_iterations": (int, 20000, "iteration cap"),
    },
    "equivalence": {
        "cells": (int, 24, "points per axis (3-d)"),
        "frames": (int, 12, "time snapshots"),
        "sets": (int, 20, "random field sets"),
        "max_mode": (int, 1, "band limit"),
        "amplitude": (float, 0.15, "field amplitude"),
        **_COMMON_CONSTANTS,
    },
    "pauli_evolve": {
        "setup": (str, "larmor", "larmor | free_packet | uniform_field"),
        "cells": (int, 1024, "lattice points"),
        "extent": (float, 60.0, "box length"),
        "periods": (float, 10.0, "precession periods (larmor)"),
        "t_final": (float, 6.0, "duration (packet setups)"),
        "steps": (int, 1000, "time steps"),
        "scheme": (str, "split_operator", "split_operator | crank_nicolson"),
        "bz": (float, 1.3, "axial field"),
        "gamma_energy": (float, 0.8, "moment coupling, energy per field"),
        "sigma": (float, 1.5, "packet width"),
        "e0": (float, 0.2, "electric field (uniform_field)"),
        "record_every": (int, 10, "recording stride"),
        **_COMMON_CONSTANTS,
    },
    "stern_gerlach": {
        "extent": (float, 60.0, "beam axis length"),
        "cells": (int, 768, "lattice points"),
        "sigma": (float, 2.0, "packet width"),
        "center": (float, 30.0, "packet center"),
        "velocity": (float, 0.0, "packet velocity"),
        "spin_up_weight": (float, 1.0, "first color amplitude"),
        "spin_down_weight": (float, 1.0, "second color amplitude"),
        "field_gradient": (float, REQUIRED, "axial field gradient dBz/dz"),
        "field_offset": (float, 0.5, "axial field at z=0"),
        "gamma_energy": (float, 1.0, "moment coupling, energy per field"),
        "dt": (float, 0.01, "time step"),
        "t_final": (float, 10.0, "flight time"),
        "record_every": (int, 50, "recording stride"),
        **_COMMON_CONSTANTS,
    },
    "moment": {
        "b": (list, [0.4, -0.3, 0.85], "static field vector"),
        "gamma": (float, 1.7, "angular rate per field"),
        "phi0": (float, 0.7, "initial azimuth"),
        "z0": (float, 0.35, "initial cos(theta)"),
        "t_final": (float, 2.0, "duration"),
        "dt": (float, 1e-3, "time step"),
    },
    "lorentz": {
        "setup": (str, "uniform_b", "uniform_e | uniform_b"),
        "e0": (float, 0.5, "electric field (uniform_e)"),
        "bz": (float, 1.0, "magnetic field (uniform_b)"),
        "charge": (float, 1.0, "particle charge"),
        "mass": (float, 1.0, "particle mass"),
        "speed": (float, 0.5, "initial speed"),
        "turns": (float, 10.0, "cyclotron turns (uniform_b)"),
        "t_final": (float, 2.0, "duration (uniform_e)"),
        "steps_per_turn": (int, 300, "resolution"),
    },
    "verify_all": {
        "fast": (bool, True, "reduced resolution"),
    },
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    parameters: dict
    seed: int = 0
    output_dir: str = "."

    def echo(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "parameters": dict(sorted(self.parameters.items())),
        }


@dataclass(frozen=True)
class RunReport:
    scenario: dict
    version: str
    wall_time_s: float
    checks: list[CheckRecord]
    outputs: list[str]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "version": self.version,
            "wall_time_s": self.wall_time_s,
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "value": c.value,
                    "tolerance": c.tolerance,
                    "pass": c.passed,
                    "note": c.note,
                }
                for c in self.checks
            ],
            "outputs": self.outputs,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def schema_text(kind: str) -> str:
    if kind not in SCHEMAS:
        raise ScenarioError([f"unknown kind {kind!r}; choose from {sorted(SCHEMAS)}"])
    lines = [f"parameters for kind {kind!r}:"]
    for name, (typ, default, help_text) in sorted(SCHEMAS[kind].items()):
        default_text = "REQUIRED" if default is REQUIRED else repr(default)
        lines.append(f"  {name} ({typ.__name__}, default {default_text}): {help_text}")
    return "\n".join(lines)


def parse_scenario(document: str) -> Scenario:
    """Validate a JSON scenario document, reporting every violation."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as err:
        raise ScenarioError([f"malformed JSON: {err}"]) from err
    violations: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario document must be a JSON object"])
    kind = doc.get("kind")
    if kind not in SCHEMAS:
        raise ScenarioError([f"unknown kind {kind!r}; choose from {sorted(SCHEMAS)}"])
    schema = SCHEMAS[kind]
    raw = doc.get("parameters", {})
    if not isinstance(raw, dict):
        violations.append("parameters must be an object")
        raw = {}
    params: dict = {}
    for name, (typ, default, _help) in schema.items():
        if name in raw:
            value = raw[name]
            if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
                params[name] = float(value)
            elif typ is int and isinstance(value, int) and not isinstance(value, bool):
                params[name] = int(value)
            elif typ is bool and isinstance(value, bool):
                params[name] = value
            elif typ is str and isinstance(value, str):
                params[name] = value
            elif typ is list and isinstance(value, list):
                params[name] = [float(v) for v in value]
            else:
                violations.append(f"parameter {name!r} must be of type {typ.__name__}")
        elif default is REQUIRED:
            violations.append(f"missing required parameter {name!r}")
        else:
            params[name] = default
    for name in raw:
        if name not in schema:
            violations.append(f"unknown parameter {name!r} for kind {kind!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        violations.append("seed must be an integer")
        seed = 0
    output_dir = doc.get("output_dir", ".")
    if not isinstance(output_dir, str):
        violations.append("output_dir must be a string")
        output_dir = "."
    for name in doc:
        if name not in ("kind", "parameters", "seed", "output_dir"):
            violations.append(f"unknown field {name!r}")
    if violations:
        raise ScenarioError(violations)
    return Scenario(kind, params, seed, output_dir)


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _lattice_table(cells: int, sigma: float, slices: int, color_angle: float):
    grid = Grid((float(cells - 1),), (cells,), DIRICHLET_ZERO)
    return grid, inference.gaussian_table(grid, sigma, slices=slices, color_angle=color_angle)


def _run_sample(scenario: Scenario, out):
    p = scenario.parameters
    grid, table = _lattice_table(p["cells"], p["sigma"], p["slices"], p["color_angle"])
    data = inference.sample_dataset(table, p["repetitions"], scenario.seed)
    path = out("dataset.csv")
    fieldio.write_dataset_csv(path, data)
    sums = data.counts.reshape(data.slices, -1).sum(axis=1)
    checks = [
        check_leq("sample.slice_sum_deviation", float(np.max(np.abs(sums - p["repetitions"]))), 0.0),
        check_true(
            "sample.round_trip_bit_exact",
            bool(np.array_equal(fieldio.read_dataset_csv(path).counts, data.counts)),
        ),
    ]
    return checks, [path]


def _run_evidence(scenario: Scenario, out):
    p = scenario.parameters
    grid, table = verification._skewed_table(p["cells"])
    data = inference.expected_counts(table, p["repetitions"])
    h = grid.spacing[0]
    shift = np.array([[float(s) * h for s in p["shift"]]])
    rows = []
    residuals = []
    for eps_scale in (1.0, 0.5, 0.25):
        ev = inference.evidence(table, data, shift * eps_scale)
        terms = inference.evidence_taylor_terms(table, data, shift * eps_scale)
        resid = abs(ev + terms.second_order_square / 2.0)
        residuals.append(resid)
        rows.append(
            (eps_scale, ev, terms.first_order, terms.second_order_square,
             terms.second_order_curvature, resid)
        )
    term, bound = inference.cauchy_schwarz_bound(table, shift, repetitions=p["repetitions"])
    path = out("evidence.csv")
    fieldio.write_table_csv(
        path,
        ["shift_scale", "evidence", "first_order", "second_order_square",
         "second_order_curvature", "cubic_residual"],
        rows,
    )
    checks = [
        check_leq("evidence.first_order_vanishes", abs(rows[0][2]), 1e-12 * p["repetitions"]),
        check_leq("evidence.curvature_vanishes", abs(rows[0][4]), 1e-12 * p["repetitions"]),
        check_in("evidence.cubic_ratio", residuals[0] / residuals[1], 6.0, 10.0),
        check_true("evidence.cauchy_schwarz_bound", term <= bound * (1 + 1e-12),
                   note=f"term {term:.4g} <= bound {bound:.4g}"),
    ]
    return checks, [path]


def _run_fisher_discrete(scenario: Scenario, out):
    p = scenario.parameters
    grid, table = _lattice_table(p["cells"], p["sigma"], p["slices"], 0.0)
    value = inference.discrete_fisher(table)
    oracle = p["slices"] / p["sigma"] ** 2
    path = out("fisher.csv")
    fieldio.write_table_csv(path, ["discrete_fisher", "oracle"], [(value, oracle)])
    return [check_leq("fisher.rel_error", abs(value - oracle) / oracle, 0.02)], [path]


def _run_box_minimize(scenario: Scenario, out):
    p = scenario.parameters
    grid = Grid((p["length"],), (p["cells"],), DIRICHLET_ZERO)
    problem = variational.MinimizationProblem(
        objective=variational.FISHER,
        grid=grid,
        grad_tol=p["grad_tol"],
        max_iterations=p["max_iterations"],
        multistarts=p["multistarts"],
        seed=scenario.seed,
    )
    result = variational.minimize(problem)
    scan = variational.spectrum_scan(problem, p["modes"]) if p["modes"] > 1 else [
        (result.objective_value, ScalarField(grid, result.fields["p"]))
    ]
    x = grid.axis_coordinates(0)
    exact = (2 / p["length"]) * np.sin(np.pi * x / p["length"]) ** 2
    density_path = out("density.csv")
    fieldio.write_table_csv(
        density_path, ["x", "density", "exact"], zip(x, result.fields["p"], exact)
    )
    trace_path = out("trace.csv")
    fieldio.write_convergence_trace_csv(trace_path, result.trace)
    target = (2 * np.pi / p["length"]) ** 2
    checks = [
        check_leq(
            "box.objective_rel_error", abs(result.objective_value - target) / target, 0.01
        ),
        check_leq(
            "box.density_max_error",
            float(np.max(np.abs(result.fields["p"] - exact)) / np.max(exact)),
            0.02,
        ),
        check_true("box.converged", result.converged),
    ]
    for mode, (value, _field) in enumerate(scan, start=1):
        mode_target = (2 * mode * np.pi / p["length"]) ** 2
        checks.append(
            check_leq(
                f"box.mode_{mode}_rel_error", abs(value - mode_target) / mode_target, 0.01
            )
        )
    return checks, [density_path, trace_path]


def _run_equivalence(scenario: Scenario, out):
    p = scenario.parameters
    consts = pauli_constants(p["hbar"], p["mass"], p["charge"])
    grid = Grid((1.0, 1.0, 1.0), (p["cells"],) * 3, PERIODIC)
    rows = []
    worst = 0.0
    for index in range(p["sets"]):
        polar, em, dt = functionals.random_smooth_configuration(
            grid, frames=p["frames"], consts=consts, seed=scenario.seed + index,
            max_mode=p["max_mode"], amplitude=p["amplitude"],
        )
        rep = functionals.equivalence_residual(
            polar, em, consts, dt=dt, time_periodic=True, scheme=SPECTRAL
        )
        worst = max(worst, rep.rel_residual, rep.spinor_rel_residual)
        last_polar, last_em, last_dt = polar, em, dt
        rows.append(
            (scenario.seed + index, rep.q_polar, rep.total, rep.q_spinor,
             rep.rel_residual, rep.spinor_rel_residual)
        )
    path = out("equivalence.csv")
    fieldio.write_table_csv(
        path,
        ["seed", "q_polar", "total_functional", "q_spinor", "rel_residual",
         "spinor_rel_residual"],
        rows,
    )
    breakdown = functionals.total_functional_breakdown(
        last_polar, last_em, consts, dt=last_dt, time_periodic=True, scheme=SPECTRAL
    )
    breakdown_path = out("breakdown.csv")
    fieldio.write_table_csv(
        breakdown_path, ["term", "value"], sorted(breakdown.items())
    )
    return (
        [check_leq(f"equivalence.worst_rel_residual_{p['sets']}_sets", worst, 1e-8)],
        [path, breakdown_path],
    )


def _run_pauli_evolve(scenario: Scenario, out):
    p = scenario.parameters
    consts = pauli_constants(p["hbar"], p["mass"], p["charge"])
    scheme = p["scheme"]
    checks = []
    extra_outputs = []
    if p["setup"] == "larmor":
        grid = Grid((1.0,), (8,), PERIODIC)
        omega = 2 * p["gamma_energy"] * p["bz"] / consts.hbar
        period = 2 * np.pi / omega
        dt = period / p["steps"]
        vals = np.zeros(grid.shape + (2,), dtype=np.complex128)
        vals[:] = np.array([1.0, 1.0]) / np.sqrt(2.0 * grid.extents[0])
        em = _uniform_bz_em(grid, p["bz"])
        config = pauli.SolverConfig(scheme, dt, consts, em, neutral=True,
                                    gamma_energy=p["gamma_energy"])
        traj = pauli.evolve(
            pauli.PauliState(_spinor(grid, vals)), config, p["periods"] * period,
            record_every=p["record_every"],
        )
        measured = verification._zero_crossing_frequency(traj.times, traj.spins[:, 0])
        checks.append(check_leq("pauli.precession_rel_error", abs(measured - omega) / omega, 1e-3))
    elif p["setup"] == "free_packet":
        grid = Grid((p["extent"],), (p["cells"],), PERIODIC)
        state = pauli.gaussian_packet_state(
            grid, p["sigma"], p["extent"] / 2, 0.0, (1.0, 0.0), consts
        )
        config = pauli.SolverConfig(
            scheme, p["t_final"] / p["steps"], consts, EMConfiguration.zero(grid)
        )
        traj = pauli.evolve(state, config, p["t_final"], record_every=p["record_every"],
                            keep_snapshots=True)
        snap_path = out("snapshots.bin")
        fieldio.write_field_snapshots(
            snap_path,
            grid,
            config.dt * p["record_every"],
            {"wavefunction": np.stack([s.phi.values for s in traj.snapshots])},
            metadata={"setup": "free_packet"},
        )
        extra_outputs.append(snap_path)
        x = grid.axis_coordinates(0)
        dens = np.sum(np.abs(traj.snapshots[-1].phi.values) ** 2, axis=-1)
        mean = float(np.sum(x * dens) * grid.cell_volume)
        width_sq = float(np.sum((x - mean) ** 2 * dens) * grid.cell_volume)
        expect = p["sigma"] ** 2 + (
            consts.hbar * p["t_final"] / (2 * consts.mass * p["sigma"])
        ) ** 2
        checks.append(check_leq("pauli.spreading_rel_error", abs(width_sq - expect) / expect, 5e-3))
    elif p["setup"] == "uniform_field":
        grid = Grid((p["extent"],), (p["cells"],), PERIODIC)
        x = grid.axis_coordinates(0)
        em = EMConfiguration(grid, ScalarField(grid, -p["e0"] * x), VectorField3.zero(grid))
        start = p["extent"] / 3
        state = pauli.gaussian_packet_state(grid, p["sigma"], start, 0.0, (1.0, 0.0), consts)
        config = pauli.SolverConfig(scheme, p["t_final"] / p["steps"], consts, em)
        traj = pauli.evolve(state, config, p["t_final"], record_every=p["record_every"])
        expect = start + 0.5 * (consts.charge * p["e0"] / consts.mass) * traj.times**2
        disp = expect[-1] - start
        checks.append(
            check_leq(
                "pauli.uniform_field_rel_error",
                float(np.max(np.abs(traj.positions[:, 0] - expect))) / disp,
                1e-3,
            )
        )
    else:
        raise ScenarioError([f"unknown setup {p['setup']!r}"])
    checks.append(check_leq("pauli.norm_drift", float(np.max(np.abs(traj.norms - 1.0))), 1e-10))
    path = out("trajectory.csv")
    fieldio.write_pauli_trajectory_csv(path, traj)
    return checks, [path] + extra_outputs


def _uniform_bz_em(grid, bz):
    vals = np.zeros(grid.shape + (3,))
    vals[..., 2] = bz
    return EMConfiguration(
        grid, ScalarField.full(grid, 0.0), VectorField3.zero(grid),
        b=VectorField3(grid, vals),
    )


def _spinor(grid, vals):
    from .grids import SpinorField

    return SpinorField(grid, vals)


def _run_stern_gerlach(scenario: Scenario, out):
    p = scenario.parameters
    consts = pauli_constants(p["hbar"], p["mass"], p["charge"])
    config = pauli.SternGerlachConfig(
        extent=p["extent"],
        cells=p["cells"],
        sigma=p["sigma"],
        center=p["center"],
        velocity=p["velocity"],
        spin_weights=(p["spin_up_weight"], p["spin_down_weight"]),
        field_gradient=p["field_gradient"],
        field_offset=p["field_offset"],
        consts=consts,
        gamma_energy=p["gamma_energy"],
        dt=p["dt"],
        t_final=p["t_final"],
        record_every=p["record_every"],
    )
    try:
        result = pauli.stern_gerlach(config)
    except pauli.SolverError as err:
        return [check_true("stern_gerlach.completed", False, note=str(err))], []
    path = out("separation.csv")
    fieldio.write_table_csv(
        path,
        ["t", "center_plus", "center_minus", "separation", "overlap"],
        zip(result.times, result.centers[:, 0], result.centers[:, 1],
            result.separation, result.overlap),
    )
    law = (p["gamma_energy"] * p["field_gradient"] / consts.mass) * result.times**2
    checks = [check_true("stern_gerlach.completed", True)]
    if p["field_gradient"] != 0.0:
        checks.append(
            check_leq(
                "stern_gerlach.separation_rel_error",
                abs(result.separation[-1] - law[-1]) / abs(law[-1]),
                0.01,
            )
        )
    else:
        checks.append(
            check_leq("stern_gerlach.zero_gradient_separation",
                      float(np.max(np.abs(result.separation))), 0.0)
        )
    return checks, [path]


def _run_moment(scenario: Scenario, out):
    p = scenario.parameters
    b = np.asarray(p["b"], dtype=float)
    m0 = classical.MomentState.from_angles(p["phi0"], p["z0"])
    torque = classical.torque_evolve(m0, b, p["gamma"], p["t_final"], p["dt"])
    ct = classical.canonical_evolve(p["phi0"], p["z0"], b, p["gamma"], p["t_final"], p["dt"])
    m_c = np.stack(
        [np.sqrt(1 - ct.z**2) * np.cos(ct.phi), np.sqrt(1 - ct.z**2) * np.sin(ct.phi), ct.z],
        axis=-1,
    )
    dots = np.clip(np.sum(m_c * torque.moments, axis=-1), -1.0, 1.0)
    h_vals = np.array(
        [classical.moment_hamiltonian(ph, z, b, p["gamma"]) for ph, z in zip(ct.phi, ct.z)]
    )
    path_t = out("moment.csv")
    fieldio.write_moment_trajectory_csv(path_t, torque)
    path_c = out("canonical.csv")
    fieldio.write_table_csv(path_c, ["t", "phi", "z", "energy_rate"],
                            zip(ct.times, ct.phi, ct.z, h_vals))
    checks = [
        check_leq(
            "moment.norm_drift",
            float(np.max(np.abs(np.linalg.norm(torque.moments, axis=1) - 1))),
            1e-9,
        ),
        check_leq("moment.torque_vs_canonical_angle", float(np.max(np.arccos(dots))), 1e-6),
        check_leq(
            "moment.energy_rel_drift",
            float(np.max(np.abs(h_vals - h_vals[0]))) / max(abs(h_vals[0]), 1e-30),
            1e-8,
        ),
    ]
    return checks, [path_t, path_c]


def _run_lorentz(scenario: Scenario, out):
    p = scenario.parameters
    q, m = p["charge"], p["mass"]
    if p["setup"] == "uniform_b":
        bz = p["bz"]
        radius = m * p["speed"] / (abs(q) * bz)
        period = 2 * np.pi * m / (abs(q) * bz)
        extent = max(8.0, 6 * radius)
        g = Grid((extent,) * 3, (9,) * 3, DIRICHLET_ZERO)
        b_vals = np.zeros(g.shape + (3,))
        b_vals[..., 2] = bz
        em = EMConfiguration(
            g, ScalarField.full(g, 0.0), VectorField3.zero(g), b=VectorField3(g, b_vals)
        )
        center = np.full(3, extent / 2)
        state = classical.ChargedParticleState(
            center + np.array([radius, 0, 0]), (0.0, -p["speed"], 0.0)
        )
        traj = classical.lorentz_evolve(
            state, em, q, m, p["turns"] * period, period / p["steps_per_turn"]
        )
        radii = np.linalg.norm(traj.positions[:, :2] - center[:2], axis=1)
        speeds = np.linalg.norm(traj.velocities, axis=1)
        checks = [
            check_leq("lorentz.radius_rel_drift",
                      float(np.max(np.abs(radii - radius))) / radius, 1e-3),
            check_leq("lorentz.speed_rel_drift",
                      float(np.max(np.abs(speeds - p["speed"]))) / p["speed"], 1e-6),
        ]
    elif p["setup"] == "uniform_e":
        e0 = p["e0"]
        extent = 50.0
        g = Grid((extent,) * 3, (11,) * 3, DIRICHLET_ZERO)
        x, _, _ = g.meshgrid()
        em = EMConfiguration(
            g, ScalarField(g, -e0 * x * np.ones(g.shape)), VectorField3.zero(g)
        )
        state = classical.ChargedParticleState(
            (5.0, extent / 2, extent / 2), (0.1, 0.0, 0.0)
        )
        traj = classical.lorentz_evolve(state, em, q, m, p["t_final"], 1e-3)
        exact = 5.0 + 0.1 * traj.times + 0.5 * (q * e0 / m) * traj.times**2
        checks = [
            check_leq(
                "lorentz.parabola_max_error",
                float(np.max(np.abs(traj.positions[:, 0] - exact))),
                1e-8 * max(1.0, float(np.max(np.abs(exact)))),
            )
        ]
    else:
        raise ScenarioError([f"unknown setup {p['setup']!r}"])
    path = out("particle.csv")
    fieldio.write_particle_trajectory_csv(path, traj)
    return checks, [path]


def _run_verify_all(scenario: Scenario, out):
    records = verification.run_all(fast=scenario.parameters["fast"], echo=None)
    path = out("verification.csv")
    fieldio.write_table_csv(
        path,
        ["name", "value", "tolerance", "pass"],
        ((r.name, r.value, r.tolerance, int(r.passed)) for r in records),
    )
    return records, [path]


_RUNNERS = {
    "sample": _run_sample,
    "evidence": _run_evidence,
    "fisher_discrete": _run_fisher_discrete,
    "box_minimize": _run_box_minimize,
    "equivalence": _run_equivalence,
    "pauli_evolve": _run_pauli_evolve,
    "stern_gerlach": _run_stern_gerlach,
    "moment": _run_moment,
    "lorentz": _run_lorentz,
    "verify_all": _run_verify_all,
}


def run(scenario: Scenario) -> RunReport:
    """Execute a validated scenario: compute, write outputs, report checks."""
    started = time.perf_counter()
    os.makedirs(scenario.output_dir, exist_ok=True)
    outputs: list[str] = []

    def out(name: str) -> str:
        return os.path.join(scenario.output_dir, name)

    checks, paths = _RUNNERS[scenario.kind](scenario, out)
    outputs.extend(paths)
    report = RunReport(
        scenario=scenario.echo(),
        version=__version__,
        wall_time_s=time.perf_counter() - started,
        checks=list(checks),
        outputs=[os.path.abspath(p) for p in outputs],
    )
    fieldio.atomic_write_text(out("report.json"), report.to_json() + "\n")
    return report
