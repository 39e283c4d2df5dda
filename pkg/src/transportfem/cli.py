"""Batch experiment runner.

Configurations are flat ``key = value`` text files with dotted section
names (``mesh.kind``, ``sim.dt``, ...).  Lines starting with ``#`` and
blank lines are ignored; unknown or duplicate keys are rejected before any
computation starts.  Three commands are exposed:

    transportfem run <cfg>
    transportfem verify [--seed S --count K]
    transportfem sweep <cfg> --axis {dt,N} --values v1,v2,...

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.  The environment variable TRANSPORTFEM_OUTPUT_ROOT,
when set, is prepended to every configured output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .csvout import fmt, write_csv
from .diagnostics import (EnergyLedger, balance_audit, balance_audit_2d,
                          analytic_1d_state, analytic_output,
                          fixed_identity_battery, l2_error_1d,
                          moving_identity_battery, output_l2_error,
                          overshoot_metric, write_ledger_csv)
from .errors import ConfigError, NumericalFailure
from .fem1d import HamiltonianDensity, SystemMatrices1D, assemble_fixed, \
    constant_density, density_from_callable
from .fem2d import constant_field, rect_mesh, write_mesh_csv, write_snapshot_csv
from .integrator import (MatrixTimeline, SimConfig, TimeSeries,
                         Transport1DProblem, Transport2DProblem,
                         make_input_signal, simulate_1d, simulate_2d,
                         step_midpoint)
from .mesh1d import (Mesh1D, log_concentrated_mesh, static_motion,
                     traveling_motion, uniform_mesh, write_trajectory_csv)

OUTPUT_ROOT_ENV = "TRANSPORTFEM_OUTPUT_ROOT"

_MESH_KINDS = ("uniform", "log-right", "log-left")
_INPUT_KINDS = ("zero", "gaussian-pulse", "step", "sine")


# ---------------------------------------------------------------------------
# Config file parsing and validation

def parse_config_text(text: str) -> dict[str, str]:
    """Raw key -> string map; rejects malformed lines and duplicate keys."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        raw[key] = value
    return raw


def _as_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse '{value}' as a number")


def _as_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse '{value}' as an integer")


def _as_float_list(key: str, value: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse '{value}' as numbers")


def _choice(key: str, value: str, options: tuple[str, ...]) -> str:
    if value not in options:
        raise ConfigError(f"key '{key}': '{value}' not in {options}")
    return value


_COMMON_KEYS = {"problem", "sim.dt", "sim.T", "sim.scheme", "sim.snapshots",
                "output.dir", "output.stride"}
_KEYS_1D = _COMMON_KEYS | {
    "mesh.kind", "mesh.elements", "mesh.a", "mesh.b", "mesh.ratio",
    "mesh.motion", "mesh.speed", "mesh.horizon",
    "density.kind", "density.h0", "density.slope",
    "initial.kind", "initial.center", "initial.width", "initial.amplitude",
    "initial.value",
    "input.kind", "input.t0", "input.sigma", "input.amp", "input.omega",
}
_KEYS_2D = _COMMON_KEYS | {
    "mesh.lx", "mesh.ly", "mesh.nx", "mesh.ny",
    "field.c1", "field.c2",
    "initial.kind", "initial.center1", "initial.center2", "initial.width",
    "initial.amplitude",
    "input.kind", "input.t0", "input.sigma", "input.amp", "input.omega",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated, typed run configuration."""

    problem: str
    values: dict
    sim: SimConfig
    output_dir: str


def _signal_params(values: dict[str, str]) -> dict:
    kind = values.get("input.kind", "zero")
    needed = {"zero": (), "gaussian-pulse": ("t0", "sigma", "amp"),
              "step": ("t0", "amp"), "sine": ("omega", "amp")}[kind]
    params = {}
    for name in needed:
        key = f"input.{name}"
        if key not in values:
            raise ConfigError(f"input kind '{kind}' requires key '{key}'")
        params[name] = _as_float(key, values[key])
    for name in ("t0", "sigma", "amp", "omega"):
        key = f"input.{name}"
        if key in values and name not in needed:
            raise ConfigError(f"key '{key}' not used by input kind '{kind}'")
    return params


def validate_config(raw: dict[str, str]) -> RunConfig:
    if "problem" not in raw:
        raise ConfigError("missing required key 'problem'")
    problem = _choice("problem", raw["problem"], ("transport-1d", "transport-2d"))
    allowed = _KEYS_1D if problem == "transport-1d" else _KEYS_2D
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    for key in ("sim.dt", "sim.T", "output.dir"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")

    values: dict = {"problem": problem}
    values["sim.dt"] = _as_float("sim.dt", raw["sim.dt"])
    values["sim.T"] = _as_float("sim.T", raw["sim.T"])
    values["sim.scheme"] = _choice("sim.scheme", raw.get("sim.scheme", "midpoint"),
                                   ("midpoint", "rk4"))
    values["sim.snapshots"] = _as_float_list("sim.snapshots",
                                             raw.get("sim.snapshots", ""))
    values["output.dir"] = raw["output.dir"]
    values["output.stride"] = _as_int("output.stride", raw.get("output.stride", "1"))

    if problem == "transport-1d":
        _validate_1d(raw, values)
    else:
        _validate_2d(raw, values)

    try:
        sim = SimConfig(dt=values["sim.dt"], T=values["sim.T"],
                        scheme=values["sim.scheme"],
                        output_stride=values["output.stride"],
                        snapshot_times=values["sim.snapshots"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    return RunConfig(problem=problem, values=values, sim=sim,
                     output_dir=values["output.dir"])


def _validate_1d(raw: dict[str, str], values: dict) -> None:
    for key in ("mesh.kind", "mesh.elements", "initial.kind"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    values["mesh.kind"] = _choice("mesh.kind", raw["mesh.kind"], _MESH_KINDS)
    values["mesh.elements"] = _as_int("mesh.elements", raw["mesh.elements"])
    if values["mesh.elements"] < 1:
        raise ConfigError("mesh.elements must be at least 1")
    values["mesh.a"] = _as_float("mesh.a", raw.get("mesh.a", "0"))
    values["mesh.b"] = _as_float("mesh.b", raw.get("mesh.b", "1"))
    if values["mesh.b"] <= values["mesh.a"]:
        raise ConfigError("mesh.b must exceed mesh.a")
    if values["mesh.kind"] != "uniform":
        if "mesh.ratio" not in raw:
            raise ConfigError("graded meshes require key 'mesh.ratio'")
        values["mesh.ratio"] = _as_float("mesh.ratio", raw["mesh.ratio"])
        if values["mesh.ratio"] <= 1:
            raise ConfigError("mesh.ratio must exceed 1")
    elif "mesh.ratio" in raw:
        raise ConfigError("key 'mesh.ratio' only applies to graded meshes")

    values["mesh.motion"] = _choice("mesh.motion",
                                    raw.get("mesh.motion", "static"),
                                    ("static", "traveling"))
    if values["mesh.motion"] == "traveling":
        if "mesh.speed" not in raw:
            raise ConfigError("traveling motion requires key 'mesh.speed'")
        values["mesh.speed"] = _as_float("mesh.speed", raw["mesh.speed"])
        values["mesh.horizon"] = _as_float(
            "mesh.horizon", raw.get("mesh.horizon", raw["sim.T"]))
        if values["mesh.horizon"] < _as_float("sim.T", raw["sim.T"]):
            raise ConfigError("mesh.horizon must cover sim.T")
    elif "mesh.speed" in raw or "mesh.horizon" in raw:
        raise ConfigError("mesh.speed/mesh.horizon only apply to traveling motion")

    values["density.kind"] = _choice("density.kind",
                                     raw.get("density.kind", "constant"),
                                     ("constant", "affine"))
    values["density.h0"] = _as_float("density.h0", raw.get("density.h0", "1"))
    if values["density.kind"] == "affine":
        if "density.slope" not in raw:
            raise ConfigError("affine density requires key 'density.slope'")
        values["density.slope"] = _as_float("density.slope", raw["density.slope"])
        lo = min(values["density.h0"] + values["density.slope"] * values["mesh.a"],
                 values["density.h0"] + values["density.slope"] * values["mesh.b"])
        if lo <= 0:
            raise ConfigError("affine density is not positive on the domain")
    else:
        if "density.slope" in raw:
            raise ConfigError("key 'density.slope' only applies to affine density")
        if values["density.h0"] <= 0:
            raise ConfigError("density.h0 must be positive")

    kind = _choice("initial.kind", raw["initial.kind"],
                   ("gaussian", "zero", "constant"))
    values["initial.kind"] = kind
    if kind == "gaussian":
        for key in ("initial.center", "initial.width", "initial.amplitude"):
            if key not in raw:
                raise ConfigError(f"gaussian initial data requires key '{key}'")
        values["initial.center"] = _as_float("initial.center", raw["initial.center"])
        values["initial.width"] = _as_float("initial.width", raw["initial.width"])
        values["initial.amplitude"] = _as_float("initial.amplitude",
                                                raw["initial.amplitude"])
        if values["initial.width"] <= 0:
            raise ConfigError("initial.width must be positive")
    elif kind == "constant":
        if "initial.value" not in raw:
            raise ConfigError("constant initial data requires key 'initial.value'")
        values["initial.value"] = _as_float("initial.value", raw["initial.value"])

    values["input.kind"] = _choice("input.kind", raw.get("input.kind", "zero"),
                                   _INPUT_KINDS)
    values["input.params"] = _signal_params({**raw, "input.kind": values["input.kind"]})


def _validate_2d(raw: dict[str, str], values: dict) -> None:
    for key in ("mesh.lx", "mesh.ly", "mesh.nx", "mesh.ny", "field.c1",
                "field.c2", "initial.kind"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    values["mesh.lx"] = _as_float("mesh.lx", raw["mesh.lx"])
    values["mesh.ly"] = _as_float("mesh.ly", raw["mesh.ly"])
    values["mesh.nx"] = _as_int("mesh.nx", raw["mesh.nx"])
    values["mesh.ny"] = _as_int("mesh.ny", raw["mesh.ny"])
    if values["mesh.nx"] < 1 or values["mesh.ny"] < 1:
        raise ConfigError("mesh.nx and mesh.ny must be at least 1")
    values["field.c1"] = _as_float("field.c1", raw["field.c1"])
    values["field.c2"] = _as_float("field.c2", raw["field.c2"])
    kind = _choice("initial.kind", raw["initial.kind"], ("gaussian", "zero"))
    values["initial.kind"] = kind
    if kind == "gaussian":
        for key in ("initial.center1", "initial.center2", "initial.width",
                    "initial.amplitude"):
            if key not in raw:
                raise ConfigError(f"gaussian initial data requires key '{key}'")
        for key in ("initial.center1", "initial.center2", "initial.width",
                    "initial.amplitude"):
            values[key] = _as_float(key, raw[key])
        if values["initial.width"] <= 0:
            raise ConfigError("initial.width must be positive")
    values["input.kind"] = _choice("input.kind", raw.get("input.kind", "zero"),
                                   _INPUT_KINDS)
    values["input.params"] = _signal_params({**raw, "input.kind": values["input.kind"]})


def load_run_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    return validate_config(parse_config_text(text))


# ---------------------------------------------------------------------------
# Problem construction

def _build_density(values: dict) -> HamiltonianDensity:
    if values["density.kind"] == "constant":
        return constant_density(values["density.h0"])
    h0 = values["density.h0"]
    slope = values["density.slope"]
    return density_from_callable(lambda z: h0 + slope * z)


def _build_initial_1d(values: dict) -> Callable:
    kind = values["initial.kind"]
    if kind == "zero":
        return lambda z: np.zeros_like(np.asarray(z, dtype=float))
    if kind == "constant":
        value = values["initial.value"]
        return lambda z: np.full_like(np.asarray(z, dtype=float), value)
    center = values["initial.center"]
    width = values["initial.width"]
    amp = values["initial.amplitude"]
    return lambda z: amp * np.exp(-width * (np.asarray(z, float) - center) ** 2)


def _build_mesh_1d(values: dict) -> Mesh1D:
    n_nodes = values["mesh.elements"] + 1
    a, b = values["mesh.a"], values["mesh.b"]
    if values["mesh.kind"] == "uniform":
        return uniform_mesh(a, b, n_nodes)
    side = "right" if values["mesh.kind"] == "log-right" else "left"
    return log_concentrated_mesh(a, b, n_nodes, side, values["mesh.ratio"])


def build_problem_1d(values: dict) -> Transport1DProblem:
    mesh = _build_mesh_1d(values)
    if values["mesh.motion"] == "traveling":
        geometry = traveling_motion(mesh, values["mesh.speed"],
                                    values["mesh.horizon"])
    else:
        geometry = mesh
    signal = make_input_signal(values["input.kind"], **values["input.params"])
    return Transport1DProblem(geometry=geometry, density=_build_density(values),
                              initial=_build_initial_1d(values),
                              input_signal=signal)


def build_problem_2d(values: dict) -> Transport2DProblem:
    mesh = rect_mesh(values["mesh.lx"], values["mesh.ly"],
                     values["mesh.nx"], values["mesh.ny"])
    field = constant_field(values["field.c1"], values["field.c2"])
    if values["initial.kind"] == "zero":
        initial = lambda p: np.zeros(p.shape[0])
    else:
        c1, c2 = values["initial.center1"], values["initial.center2"]
        width, amp = values["initial.width"], values["initial.amplitude"]
        initial = lambda p: amp * np.exp(
            -width * ((p[:, 0] - c1) ** 2 + (p[:, 1] - c2) ** 2))
    signal = make_input_signal(values["input.kind"], **values["input.params"])
    if values["input.kind"] == "zero":
        inflow = None
    else:
        inflow = lambda pts, t: np.full(pts.shape[0], float(signal(t)))
    return Transport2DProblem(mesh=mesh, field=field, initial=initial,
                              inflow_data=inflow, input_trace=signal)


# ---------------------------------------------------------------------------
# run command

def _resolve_output_dir(configured: str) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root) / configured
    return Path(configured)


def _write_output_csv(path, t, u, y, u_tilde, H, residual, stride) -> None:
    res = np.concatenate(([0.0], residual))
    rows = [(t[k], u[k], y[k], u_tilde[k], H[k], res[k])
            for k in range(0, t.size, stride)]
    write_csv(path, ["t", "u", "y", "u_tilde", "H", "residual"], rows)


def _write_snapshots_1d(outdir: Path, series) -> list[Path]:
    paths = []
    for snap in series.snapshots:
        path = outdir / f"snapshot_t{fmt(snap.t)}.csv"
        write_csv(path, ["zeta", "x"], zip(snap.grid, snap.values))
        paths.append(path)
    return paths


def execute_run(cfg: RunConfig) -> dict:
    """Simulate, audit, and write every configured artifact."""
    outdir = _resolve_output_dir(cfg.output_dir)
    if cfg.problem == "transport-1d":
        problem = build_problem_1d(cfg.values)
        series = simulate_1d(problem, cfg.sim)
        timeline = MatrixTimeline(problem.geometry, problem.density)
        ledger = balance_audit(series, timeline, problem.input_signal)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_output_csv(outdir / "output.csv", series.t, series.u, series.y,
                          series.u_tilde, series.H, ledger.residual,
                          cfg.sim.output_stride)
        write_ledger_csv(ledger, outdir / "ledger.csv")
        _write_snapshots_1d(outdir, series)
        if problem.is_moving:
            times = series.t[::cfg.sim.output_stride]
            write_trajectory_csv(problem.geometry, times,
                                 outdir / "mesh_trajectory.csv")
        return {"series": series, "ledger": ledger, "outdir": outdir,
                "problem": problem}

    problem = build_problem_2d(cfg.values)
    series = simulate_2d(problem, cfg.sim)
    from .fem2d import assemble_2d, input_load_2d
    mats = assemble_2d(problem.mesh, problem.field)
    load_at = None
    if problem.inflow_data is not None:
        load_at = lambda t: input_load_2d(problem.mesh,
                                          mats.classification.inflow,
                                          problem.field, problem.inflow_data, t)
    ledger = balance_audit_2d(series, mats, load_at)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_output_csv(outdir / "output.csv", series.t, series.u,
                      np.sqrt(series.outflow_q), np.sqrt(series.inflow_q),
                      series.H, ledger.residual, cfg.sim.output_stride)
    write_ledger_csv(ledger, outdir / "ledger.csv")
    write_mesh_csv(problem.mesh, outdir / "mesh_vertices.csv",
                   outdir / "mesh_triangles.csv")
    for snap in series.snapshots:
        write_snapshot_csv(problem.mesh, snap.nodal_values,
                           outdir / f"snapshot_t{fmt(snap.t)}.csv")
    return {"series": series, "ledger": ledger, "outdir": outdir,
            "problem": problem, "matrices": mats}


def cmd_run(config_path) -> int:
    try:
        cfg = load_run_config(config_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = execute_run(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    ledger: EnergyLedger = result["ledger"]
    print(f"run complete: {result['outdir']}  "
          f"max|residual| = {ledger.max_residual:.3e}")
    return 0


# ---------------------------------------------------------------------------
# verify command

@dataclass
class VerificationReport:
    count: int
    seed: int
    worst: dict            # name -> (defect, tolerance, passed)

    @property
    def all_pass(self) -> bool:
        return all(entry[2] for entry in self.worst.values())

    def format(self) -> str:
        lines = [f"verification over {self.count} randomized instances "
                 f"(seed {self.seed})",
                 f"{'identity':<44s} {'worst defect':>12s}  {'tol':>8s}  verdict"]
        for name, (defect, tol, passed) in self.worst.items():
            verdict = "PASS" if passed else "FAIL"
            lines.append(f"{name:<44s} {defect:12.3e}  {tol:8.1e}  {verdict}")
        return "\n".join(lines)


def _random_mesh(rng: np.random.Generator, max_nodes: int = 200) -> Mesh1D:
    n_nodes = int(rng.integers(2, max_nodes + 1))
    gaps = rng.uniform(0.2, 1.0, n_nodes - 1)
    nodes = np.concatenate(([0.0], np.cumsum(gaps)))
    nodes /= nodes[-1]
    nodes[-1] = 1.0
    return Mesh1D(0.0, 1.0, nodes)


def run_verification(seed: int = 0, count: int = 200,
                     fault_hook: Callable[[SystemMatrices1D], SystemMatrices1D]
                     | None = None) -> VerificationReport:
    """Randomized identity battery plus a short balance run per instance.

    ``fault_hook`` may replace the assembled matrices before the battery
    runs; it exists so tests can confirm that an injected defect is caught.
    """
    rng = np.random.default_rng(seed)
    worst: dict[str, list] = {}

    def record(name: str, defect: float, tol: float):
        entry = worst.setdefault(name, [0.0, tol, True])
        entry[0] = max(entry[0], defect)
        entry[2] = entry[2] and defect <= tol

    for instance in range(count):
        mesh = _random_mesh(rng)
        h0 = float(rng.uniform(0.1, 10.0))
        density = constant_density(h0)
        mats = assemble_fixed(mesh, density)
        if fault_hook is not None:
            mats = fault_hook(mats)
        for check in fixed_identity_battery(mats).checks:
            if check.passed is not None:
                record(check.name, check.defect, check.tolerance)

        # Short midpoint balance run on a random state with a sine input.
        timeline = MatrixTimeline(mesh, density)
        signal = make_input_signal("sine", omega=3.0,
                                   amp=float(rng.uniform(0.0, 2.0)))
        n_steps, dt = 20, 1e-3
        x = rng.standard_normal(mesh.n_nodes)
        h_prev = 0.5 * float(x @ (mats.Q @ x))
        h_first = h_prev
        res_max = 0.0
        from .fem1d import coenergy
        for k in range(n_steps):
            x_next = step_midpoint(timeline, k * dt, x, dt, signal)
            x_mid = 0.5 * (x + x_next)
            ref = timeline.at((k + 0.5) * dt)
            _, y_m, ut_m = coenergy(ref, x_mid)
            u_m = float(signal((k + 0.5) * dt))
            h_next = 0.5 * float(x_next @ (ref.Q @ x_next))
            r = (h_next - h_prev) \
                - dt * (0.5 * u_m ** 2 - 0.5 * y_m ** 2
                        - 0.5 * (u_m - ut_m) ** 2)
            res_max = max(res_max, abs(r))
            x, h_prev = x_next, h_next
        record("midpoint balance residual (20 steps)",
               res_max / max(1.0, h_first), 1e-12)

        if instance % 10 == 0:
            n_el = int(rng.integers(3, 40))
            mesh_m = log_concentrated_mesh(0.0, 1.0, n_el + 1, "right",
                                           float(rng.uniform(2.0, 40.0)))
            motion = traveling_motion(mesh_m, 1.0, 2.0)
            t_probe = float(rng.uniform(0.2, 1.8))
            rep = moving_identity_battery(motion, density, t_probe)
            for check in rep.checks:
                if check.passed is not None:
                    record(check.name, check.defect, check.tolerance)

    return VerificationReport(count=count, seed=seed, worst=worst)


def cmd_verify(seed: int = 0, count: int = 200, fault_hook=None) -> int:
    report = run_verification(seed=seed, count=count, fault_hook=fault_hook)
    print(report.format())
    if not report.all_pass:
        failed = [name for name, entry in report.worst.items() if not entry[2]]
        print(f"FAILED identities: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# sweep command

def _analytic_refs(values: dict, problem: Transport1DProblem):
    h0 = values["density.h0"]
    domain = (values["mesh.a"], values["mesh.b"])
    x0 = _build_initial_1d(values)
    signal = problem.input_signal
    return (analytic_1d_state(x0, h0, domain, values["sim.T"], signal),
            analytic_output(x0, h0, domain, signal))


def sweep_metrics(cfg: RunConfig) -> tuple[float, float, float, float]:
    """One run of the configuration; returns the four sweep columns."""
    problem = build_problem_1d(cfg.values)
    series = simulate_1d(problem, cfg.sim)
    timeline = MatrixTimeline(problem.geometry, problem.density)
    ledger = balance_audit(series, timeline, problem.input_signal)
    exact_state, exact_output = _analytic_refs(cfg.values, problem)
    nodes_final = timeline.at(series.t[-1]).nodes
    l2_state = l2_error_1d(nodes_final, series.x[-1], exact_state)
    y_ref = exact_output(series.t)
    l2_out = output_l2_error(series.t, series.y, y_ref)
    overshoot = overshoot_metric(series.y, y_ref)
    return l2_state, l2_out, ledger.accumulated_residual, overshoot


def cmd_sweep(config_path, axis: str, values_list: list[float]) -> int:
    try:
        cfg = load_run_config(config_path)
        if axis not in ("dt", "N"):
            raise ConfigError("sweep axis must be 'dt' or 'N'")
        if cfg.problem != "transport-1d":
            raise ConfigError("sweeps are defined for transport-1d configs")
        if cfg.values["density.kind"] != "constant":
            raise ConfigError("sweeps need a constant density (analytic reference)")
        if not values_list:
            raise ConfigError("sweep needs at least one value")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    rows = []
    for value in values_list:
        values = dict(cfg.values)
        if axis == "dt":
            sim = SimConfig(dt=float(value), T=cfg.sim.T, scheme=cfg.sim.scheme,
                            output_stride=cfg.sim.output_stride,
                            snapshot_times=cfg.sim.snapshot_times)
            values["sim.dt"] = float(value)
            sub = RunConfig(cfg.problem, values, sim, cfg.output_dir)
        else:
            values["mesh.elements"] = int(value)
            sub = RunConfig(cfg.problem, values, cfg.sim, cfg.output_dir)
        try:
            metrics = sweep_metrics(sub)
        except NumericalFailure as exc:
            print(f"numerical failure at {axis} = {value}: {exc}",
                  file=sys.stderr)
            return 3
        rows.append((value, *metrics))
        print(f"{axis} = {value:g}: l2_state = {metrics[0]:.6e}, "
              f"l2_output = {metrics[1]:.6e}, residual_sum = {metrics[2]:.3e}, "
              f"overshoot = {metrics[3]:.6e}")

    outdir = _resolve_output_dir(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / "sweep.csv",
              ["value", "l2_state_error", "l2_output_error", "residual_sum",
               "overshoot"], rows)
    return 0


# ---------------------------------------------------------------------------
# entry point

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="transportfem",
        description="Structure-preserving transport simulations: run "
                    "configured experiments, verify structural identities, "
                    "and sweep refinement parameters.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one configured experiment")
    p_run.add_argument("config")
    p_verify = sub.add_parser("verify", help="randomized identity battery")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--count", type=int, default=200)
    p_sweep = sub.add_parser("sweep", help="parameter sweep over dt or N")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=("dt", "N"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list of axis values")
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config)
    if args.command == "verify":
        return cmd_verify(seed=args.seed, count=args.count)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    return cmd_sweep(args.config, args.axis, values)


if __name__ == "__main__":
    sys.exit(main())
