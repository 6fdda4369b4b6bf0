"""Batch experiment runner: sweeps, artifact persistence, verification.

A run expands a TOML config into sweep points (cartesian product over the
listed axes), executes each point independently in a worker pool, and writes
one subdirectory per point plus a top-level aggregate table and manifest.
Numeric outputs are deterministic for a fixed config and seed: floats are
serialized through repr, nothing records wall-clock time, and per-point seeds
are derived as seed + index, so re-runs and different worker counts produce
bit-identical aggregates.

Exit codes: 0 success (skipped hypothesis-gated points allowed), 2 invalid
config, 3 one or more points failed (or verification mismatches).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .analysis import (
    AsymptoticReport,
    REPORT_COLUMNS,
    a3_norms,
    average_vorticity_distance,
    comparison_report,
    f2d_decomposition,
    interlayer_difference_norms,
    interpolate_layers,
    vorticity,
)
from .construct import assemble_test_configuration, m_eps_value, translation_candidates
from .domain import MeshSpec, ModelParams, build_domain
from .energy import EnergyBreakdown, agl_energy, ld_energy
from .fieldio import atomic_write_text, load_array, save_array
from .fields import ContinuumConfiguration, LayeredConfiguration, Potential3D
from .minimize import MinimizeOptions, minimize_agl, minimize_ld, random_agl_state, random_ld_state
from .potentials import representation_residual, trace_deviation

SCHEMA_VERSION = 1
TASKS = (
    "construct-upper-bound",
    "minimize-ld",
    "minimize-agl",
    "compare-ld-agl",
    "diagnostics",
)
SWEEP_AXES = ("epsilon", "n_layers", "h_ex", "pad")
AGGREGATE_COLUMNS = ("point", "task", "status") + REPORT_COLUMNS


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the invariant."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_MODEL_KEYS = ("epsilon", "n_layers", "height", "h_ex", "lam", "omega", "pad", "mesh")


@dataclass
class ExperimentConfig:
    """Validated experiment description plus the expanded sweep points."""

    task: str
    out: Path
    seed: int = 0
    workers: int = 1
    dump_fields: bool = False
    mixed_regime: bool = False
    model: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    minimize: dict = field(default_factory=dict)
    construct: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path, task: str, overrides: dict) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
        return cls.from_dict(data, task, overrides)

    @classmethod
    def from_dict(cls, data: dict, task: str, overrides: dict | None = None) -> "ExperimentConfig":
        overrides = overrides or {}
        cfg_task = data.get("task", task)
        if cfg_task != task:
            raise ConfigError(f"config task {cfg_task!r} does not match subcommand {task!r}")
        if task not in TASKS:
            raise ConfigError(f"unknown task {task!r}; choose one of {', '.join(TASKS)}")
        out = overrides.get("out") or data.get("out")
        if not out:
            raise ConfigError("output directory missing: set 'out' or pass --out")
        cfg = cls(
            task=task,
            out=Path(out),
            seed=int(overrides.get("seed", data.get("seed", 0))),
            workers=int(overrides.get("workers", data.get("workers", 1))),
            dump_fields=bool(overrides.get("dump_fields", data.get("dump_fields", False))),
            mixed_regime=bool(data.get("mixed_regime", False)),
            model=dict(data.get("model", {})),
            sweep=dict(data.get("sweep", {})),
            minimize=dict(data.get("minimize", {})),
            construct=dict(data.get("construct", {})),
            compare=dict(data.get("compare", {})),
        )
        cfg._validate()
        return cfg

    # -- validation -----------------------------------------------------

    def _validate(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for key in ("epsilon", "n_layers", "height", "h_ex", "mesh"):
            if key not in self.model:
                raise ConfigError(f"model block is missing {key!r}")
        mesh = self.model["mesh"]
        if not (isinstance(mesh, (list, tuple)) and len(mesh) == 3):
            raise ConfigError("model.mesh must be [n_x, n_y, n_z]")
        for axis in self.sweep:
            if axis not in SWEEP_AXES:
                raise ConfigError(
                    f"unknown sweep axis {axis!r}; supported: {', '.join(SWEEP_AXES)}"
                )
        for axis, values in self.sweep.items():
            if axis == "h_ex" and isinstance(values, str):
                if values != "log_eps_sq":
                    raise ConfigError(f"unknown h_ex sweep rule {values!r}")
                continue
            if not isinstance(values, list) or len(values) == 0:
                raise ConfigError(f"sweep axis {axis!r} is empty")
        _minimize_options(self.minimize, 0)
        for block, allowed in (
            (self.construct, ("d", "candidates", "subsample", "disk_n")),
            (self.compare, ("c",)),
        ):
            for key in block:
                if key not in allowed:
                    raise ConfigError(
                        f"unknown option {key!r}; supported: {', '.join(allowed)}"
                    )
        # expanding also checks each point's regime and grid alignment
        self.points()

    # -- sweep expansion --------------------------------------------------

    def points(self) -> list[dict]:
        """Resolved per-point parameter dicts, validated against the regime."""
        axes: list[tuple[str, list]] = []
        for axis in SWEEP_AXES:
            if axis in self.sweep and not (
                axis == "h_ex" and isinstance(self.sweep[axis], str)
            ):
                axes.append((axis, list(self.sweep[axis])))
        combos: list[dict] = [{}]
        for axis, values in axes:
            combos = [dict(c, **{axis: v}) for c in combos for v in values]

        h_rule = self.sweep.get("h_ex") if isinstance(self.sweep.get("h_ex"), str) else None
        points = []
        for idx, combo in enumerate(combos):
            resolved = dict(self.model)
            resolved.update(combo)
            if h_rule == "log_eps_sq":
                resolved["h_ex"] = float(np.log(resolved["epsilon"]) ** 2)
            eps, h_ex = float(resolved["epsilon"]), float(resolved["h_ex"])
            if not eps * math.sqrt(h_ex) < 1.0:
                raise ConfigError(
                    f"point {idx}: eps*sqrt(h_ex) = {eps * math.sqrt(h_ex):.6g} "
                    "must be < 1 for the mixed-state scale"
                )
            if self.mixed_regime and h_ex < abs(math.log(eps)):
                raise ConfigError(
                    f"point {idx}: mixed-regime sweep requires h_ex >= |ln eps| "
                    f"({h_ex:.6g} < {abs(math.log(eps)):.6g})"
                )
            try:
                params = _params_from_dict(resolved)
                build_domain(params)
            except ValueError as exc:
                raise ConfigError(f"point {idx}: {exc}") from exc
            points.append(
                {"index": idx, "seed": self.seed + idx, "params": _params_to_dict(params)}
            )
        return points

    def echo(self) -> dict:
        """Location-independent copy of the configuration, for the manifest."""
        return {
            "schema_version": SCHEMA_VERSION,
            "task": self.task,
            "seed": self.seed,
            "dump_fields": self.dump_fields,
            "mixed_regime": self.mixed_regime,
            "model": self.model,
            "sweep": self.sweep,
            "minimize": self.minimize,
            "construct": self.construct,
            "compare": self.compare,
        }


def _params_from_dict(d: dict) -> ModelParams:
    return ModelParams(
        epsilon=float(d["epsilon"]),
        n_layers=int(d["n_layers"]),
        height=float(d["height"]),
        h_ex=float(d["h_ex"]),
        mesh=MeshSpec(*(int(v) for v in d["mesh"])),
        lam=float(d.get("lam", 1.0)),
        omega=tuple(float(v) for v in d.get("omega", (1.0, 1.0))),
        pad=float(d.get("pad", 1.0)),
    )


def _params_to_dict(p: ModelParams) -> dict:
    return {
        "epsilon": p.epsilon,
        "n_layers": p.n_layers,
        "height": p.height,
        "h_ex": p.h_ex,
        "lam": p.lam,
        "omega": list(p.omega),
        "pad": p.pad,
        "s": p.s,
        "mesh": [p.mesh.n_x, p.mesh.n_y, p.mesh.n_z],
    }


def _minimize_options(block: dict, seed: int) -> MinimizeOptions:
    opts = MinimizeOptions(seed=seed)
    for key, value in block.items():
        if not hasattr(opts, key):
            raise ConfigError(f"unknown minimize option {key!r}")
        current = getattr(opts, key)
        try:
            setattr(opts, key, value if current is None else type(current)(value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"minimize option {key!r}: {exc}") from exc
    return opts


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------


def _write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _dump_ld_fields(point_dir: Path, state: LayeredConfiguration) -> None:
    save_array(point_dir / "u.ldf", state.u)
    _dump_potential(point_dir, state.pot)


def _dump_agl_fields(point_dir: Path, state: ContinuumConfiguration) -> None:
    save_array(point_dir / "psi.ldf", state.psi)
    _dump_potential(point_dir, state.pot)


def _dump_potential(point_dir: Path, pot: Potential3D, prefix: str = "") -> None:
    save_array(point_dir / f"{prefix}dev_a1.ldf", pot.dev_a1)
    save_array(point_dir / f"{prefix}dev_a2.ldf", pot.dev_a2)
    save_array(point_dir / f"{prefix}dev_a3.ldf", pot.dev_a3)


def _load_potential(point_dir: Path, background_h: float, prefix: str = "") -> Potential3D:
    return Potential3D(
        dev_a1=load_array(point_dir / f"{prefix}dev_a1.ldf"),
        dev_a2=load_array(point_dir / f"{prefix}dev_a2.ldf"),
        dev_a3=load_array(point_dir / f"{prefix}dev_a3.ldf"),
        background_h=background_h,
    )


def _agl_report(domain, state: ContinuumConfiguration, breakdown: EnergyBreakdown) -> AsymptoticReport:
    """Report row for a continuum run; layer-only columns stay empty."""
    p = domain.params
    m = m_eps_value(p)
    return AsymptoticReport(
        epsilon=p.epsilon,
        s=p.s,
        h_ex=p.h_ex,
        pad=p.pad,
        volume=p.sample_volume,
        m_eps=m,
        energy_ratio=breakdown.total / m,
        josephson_ratio=0.0,
        exterior_ratio=breakdown.magnetic_exterior / m,
        mixed_ratio=breakdown.magnetic_mixed_in_d / m,
        trace_deviation_ratio=trace_deviation(domain, state) / m,
    )


# ---------------------------------------------------------------------------
# per-point execution
# ---------------------------------------------------------------------------


def _execute_point(payload: dict) -> dict:
    """Run one sweep point; returns {index, status, reason}.

    Executed in a worker process; every artifact is written inside the
    point's own directory, so points never contend on files.
    """
    point_dir = Path(payload["point_dir"])
    point_dir.mkdir(parents=True, exist_ok=True)
    task = payload["task"]
    index = payload["index"]
    seed = payload["seed"]
    try:
        params = _params_from_dict(payload["params"])
        _write_json(
            point_dir / "config.json",
            {
                "schema_version": SCHEMA_VERSION,
                "task": task,
                "index": index,
                "seed": seed,
                "params": _params_to_dict(params),
            },
        )
        if task == "compare-ld-agl":
            c_max = float(payload["compare"].get("c", 1.0))
            if params.s > c_max * params.epsilon:
                reason = (
                    f"hypothesis s <= c*eps violated: s = {params.s:.6g} > "
                    f"{c_max:.6g} * {params.epsilon:.6g}"
                )
                _write_json(point_dir / "status.json", {"status": "skipped", "reason": reason})
                return {"index": index, "status": "skipped", "reason": reason}
        _run_task(task, params, payload, point_dir, seed)
        _write_json(point_dir / "status.json", {"status": "ok", "reason": ""})
        return {"index": index, "status": "ok", "reason": ""}
    except Exception as exc:  # failure isolation: record and keep sweeping
        reason = f"{type(exc).__name__}: {exc}"
        _write_json(point_dir / "status.json", {"status": "failed", "reason": reason})
        return {"index": index, "status": "failed", "reason": reason}


def _run_task(task: str, params: ModelParams, payload: dict, point_dir: Path, seed: int) -> None:
    domain = build_domain(params)
    dump = payload["dump_fields"]

    if task == "construct-upper-bound":
        cblock = payload["construct"]
        candidates = translation_candidates(params.h_ex, n=int(cblock.get("candidates", 8)))
        report = assemble_test_configuration(
            params,
            d=float(cblock.get("d", 1.0)),
            candidates=candidates,
            sub=int(cblock.get("subsample", 2)),
            disk_n=int(cblock.get("disk_n", 129)),
        )
        breakdown = ld_energy(domain, report.configuration)
        _write_json(
            point_dir / "construction.json",
            dict(report.scalar_dict(), fit_c=report.fit_c()),
        )
        row = AsymptoticReport.from_state(domain, report.configuration, include_vorticity=False)
        state_to_dump = report.configuration
    elif task in ("minimize-ld", "diagnostics"):
        opts = _minimize_options(payload["minimize"], seed)
        state, trace = minimize_ld(domain, random_ld_state(domain, seed), opts)
        atomic_write_text(point_dir / "trace.csv", trace.to_csv())
        breakdown = ld_energy(domain, state)
        row = AsymptoticReport.from_state(domain, state)
        if task == "diagnostics":
            vort = vorticity(domain, state)
            _write_json(
                point_dir / "diagnostics.json",
                {
                    "trace_deviation": trace_deviation(domain, state),
                    "representation_residual": [
                        float(v) for v in representation_residual(domain, state)
                    ],
                    "circulation": [float(v) for v in vort.circulation],
                    "vorticity_distance": row.vorticity_distance,
                    "a3_norms": a3_norms(domain, state),
                    "interlayer_norms": interlayer_difference_norms(domain, state),
                },
            )
        state_to_dump = state
    elif task == "minimize-agl":
        opts = _minimize_options(payload["minimize"], seed)
        state, trace = minimize_agl(domain, random_agl_state(domain, seed), opts)
        atomic_write_text(point_dir / "trace.csv", trace.to_csv())
        breakdown = agl_energy(domain, state)
        row = _agl_report(domain, state, breakdown)
        state_to_dump = state
    elif task == "compare-ld-agl":
        opts = _minimize_options(payload["minimize"], seed)
        ld_state, ld_trace = minimize_ld(domain, random_ld_state(domain, seed), opts)
        atomic_write_text(point_dir / "trace_ld.csv", ld_trace.to_csv())
        warm = interpolate_layers(domain, ld_state)
        agl_warm_total = agl_energy(domain, warm).total
        agl_state, agl_trace = minimize_agl(domain, warm, opts)
        atomic_write_text(point_dir / "trace_agl.csv", agl_trace.to_csv())
        breakdown = ld_energy(domain, ld_state)
        agl_min_total = agl_energy(domain, agl_state).total
        comp = comparison_report(domain, ld_state)
        m = m_eps_value(params)
        _write_json(
            point_dir / "comparison.json",
            {
                "ld_total": breakdown.total,
                "agl_warm_total": agl_warm_total,
                "agl_min_total": agl_min_total,
                "gap_warm_ratio": (agl_warm_total - breakdown.total) / m,
                "gap_min_ratio": (agl_min_total - breakdown.total) / m,
                "bound": comp.bound,
                "satisfied": comp.satisfied,
                "m_eps": m,
            },
        )
        row = AsymptoticReport.from_state(domain, ld_state, agl_total=agl_min_total)
        if dump:
            save_array(point_dir / "psi.ldf", agl_state.psi)
            _dump_potential(point_dir, agl_state.pot, prefix="agl_")
        state_to_dump = ld_state
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown task {task!r}")

    atomic_write_text(point_dir / "breakdown.json", breakdown.to_json() + "\n")
    row.validate()
    atomic_write_text(point_dir / "report.json", row.to_json() + "\n")
    if dump:
        if isinstance(state_to_dump, ContinuumConfiguration):
            _dump_agl_fields(point_dir, state_to_dump)
        else:
            _dump_ld_fields(point_dir, state_to_dump)


# ---------------------------------------------------------------------------
# run orchestration
# ---------------------------------------------------------------------------


def run_experiment(config: ExperimentConfig) -> int:
    """Execute every sweep point and write the aggregate; 0 or 3."""
    points = config.points()
    out = config.out
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    _write_json(out / "config.json", config.echo())

    payloads = [
        {
            "task": config.task,
            "index": pt["index"],
            "seed": pt["seed"],
            "params": pt["params"],
            "minimize": config.minimize,
            "construct": config.construct,
            "compare": config.compare,
            "dump_fields": config.dump_fields,
            "point_dir": str(out / f"point_{pt['index']:03d}"),
        }
        for pt in points
    ]
    if config.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_execute_point, payloads))
    else:
        results = [_execute_point(p) for p in payloads]
    results.sort(key=lambda r: r["index"])

    rows = []
    for res in results:
        if res["status"] == "skipped":
            continue
        point_dir = out / f"point_{res['index']:03d}"
        cells = [str(res["index"]), config.task, res["status"]]
        if res["status"] == "ok":
            stored = json.loads((point_dir / "report.json").read_text())
            cells += [
                "" if stored[c] is None else repr(float(stored[c])) for c in REPORT_COLUMNS
            ]
        else:
            cells += [""] * len(REPORT_COLUMNS)
        rows.append(",".join(cells))
    atomic_write_text(
        out / "aggregate.csv", "\n".join([",".join(AGGREGATE_COLUMNS)] + rows) + "\n"
    )
    _write_json(
        out / "manifest.json",
        {
            "schema_version": SCHEMA_VERSION,
            "task": config.task,
            "seed": config.seed,
            "dump_fields": config.dump_fields,
            "n_points": len(points),
            "points": results,
        },
    )
    n_failed = sum(1 for r in results if r["status"] == "failed")
    for res in results:
        if res["status"] != "ok":
            print(f"point {res['index']}: {res['status']} ({res['reason']})", file=sys.stderr)
    return 3 if n_failed else 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _close(a: float, b: float, tol: float = 1.0e-12) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def verify_run(run_dir: str | Path) -> int:
    """Recompute derived scalars of a stored run; 0 clean, 3 mismatch, 2 bad dir."""
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        print(f"config error: {run_dir} has no manifest.json", file=sys.stderr)
        return 2
    manifest = json.loads(manifest_path.read_text())
    problems: list[str] = []
    checked = 0
    for entry in manifest["points"]:
        if entry["status"] != "ok":
            continue
        point_dir = run_dir / f"point_{entry['index']:03d}"
        label = point_dir.name
        cfg = json.loads((point_dir / "config.json").read_text())
        params = _params_from_dict(cfg["params"])
        stored = json.loads((point_dir / "report.json").read_text())
        breakdown = json.loads((point_dir / "breakdown.json").read_text())

        m = m_eps_value(params)
        if not _close(stored["m_eps"], m):
            problems.append(f"{label}: m_eps does not match its closed form")
        parts = [
            breakdown[k]
            for k in (
                "layer_kinetic",
                "vertical_kinetic",
                "gl_potential",
                "josephson",
                "magnetic_in_d",
                "magnetic_mixed_in_d",
                "magnetic_exterior",
            )
        ]
        if not _close(breakdown["total"], sum(parts)):
            problems.append(f"{label}: breakdown total is not the sum of its parts")
        for col, key in (
            ("energy_ratio", "total"),
            ("josephson_ratio", "josephson"),
            ("exterior_ratio", "magnetic_exterior"),
            ("mixed_ratio", "magnetic_mixed_in_d"),
        ):
            if not _close(stored[col], breakdown[key] / m):
                problems.append(f"{label}: {col} inconsistent with breakdown/m_eps")

        conf_path = point_dir / "construction.json"
        if conf_path.is_file():
            conf = json.loads(conf_path.read_text())
            if not _close(conf["total"], conf["I1"] + conf["I2"] + conf["I3"]):
                problems.append(f"{label}: construction total != I1+I2+I3")
            if not _close(conf["ratio"], conf["total"] / conf["m_eps"]):
                problems.append(f"{label}: construction ratio inconsistent")
            fit = (conf["ratio"] - 1.0 - conf["s_over_L"]) * conf["log_factor"]
            if not _close(conf["fit_c"], fit):
                problems.append(f"{label}: construction fit_c inconsistent")

        state = _load_state(point_dir, cfg["task"], params)
        if state is not None:
            domain = build_domain(params)
            if isinstance(state, ContinuumConfiguration):
                recomputed = agl_energy(domain, state)
            else:
                recomputed = ld_energy(domain, state)
            for key, val in recomputed.to_dict().items():
                if not _close(breakdown[key], val):
                    problems.append(f"{label}: stored breakdown.{key} != recomputed")
            if not _close(stored["trace_deviation_ratio"], trace_deviation(domain, state) / m):
                problems.append(f"{label}: trace_deviation_ratio != recomputed")
            if isinstance(state, LayeredConfiguration):
                f2d_sum, _ = f2d_decomposition(domain, state)
                if not _close(stored["f2d_sum"], f2d_sum):
                    problems.append(f"{label}: f2d_sum != recomputed")
                if stored["vorticity_distance"] is not None and not _close(
                    stored["vorticity_distance"], average_vorticity_distance(domain, state)
                ):
                    problems.append(f"{label}: vorticity_distance != recomputed")
        checked += 1
    for msg in problems:
        print(f"verify mismatch: {msg}", file=sys.stderr)
    if not problems:
        print(f"verified {checked} point(s) in {run_dir}")
    return 3 if problems else 0


def _load_state(point_dir: Path, task: str, params: ModelParams):
    """Rebuild the dumped final state, if this run stored fields."""
    if (point_dir / "u.ldf").is_file():
        return LayeredConfiguration(
            u=load_array(point_dir / "u.ldf"),
            pot=_load_potential(point_dir, params.h_ex),
        )
    if (point_dir / "psi.ldf").is_file() and task == "minimize-agl":
        return ContinuumConfiguration(
            psi=load_array(point_dir / "psi.ldf"),
            pot=_load_potential(point_dir, params.h_ex),
        )
    return None


# ---------------------------------------------------------------------------
# report aggregation
# ---------------------------------------------------------------------------


def aggregate_runs(run_dirs: list[str | Path]) -> list[dict]:
    """Collect per-point report rows from completed runs, in run/point order."""
    rows = []
    for run in run_dirs:
        run = Path(run)
        manifest_path = run / "manifest.json"
        if not manifest_path.is_file():
            raise ConfigError(f"{run} has no manifest.json")
        manifest = json.loads(manifest_path.read_text())
        for entry in manifest["points"]:
            if entry["status"] == "skipped":
                continue
            row = {"run": run.name, "point": entry["index"], "task": manifest["task"],
                   "status": entry["status"]}
            if entry["status"] == "ok":
                stored = json.loads(
                    (run / f"point_{entry['index']:03d}" / "report.json").read_text()
                )
                row.update({c: stored[c] for c in REPORT_COLUMNS})
            else:
                row.update({c: None for c in REPORT_COLUMNS})
            rows.append(row)
    return rows


def write_report(rows: list[dict], out: Path | None, as_json: bool) -> str:
    if as_json:
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        header = ("run", "point", "task", "status") + REPORT_COLUMNS
        lines = [",".join(header)]
        for row in rows:
            cells = []
            for col in header:
                val = row[col]
                if val is None:
                    cells.append("")
                elif isinstance(val, float):
                    cells.append(repr(val))
                else:
                    cells.append(str(val))
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"
    if out is not None:
        atomic_write_text(out, text)
    return text


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldsim",
        description="Layered/continuum superconductor experiments: sweeps, "
        "minimization, construction bounds, diagnostics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for task in TASKS:
        p = sub.add_parser(task, help=f"run a {task} sweep from a TOML config")
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--workers", type=int, help="worker pool size (overrides config)")
        p.add_argument("--seed", type=int, help="base seed (overrides config)")
        p.add_argument(
            "--dump-fields", action="store_true", help="store final states as field binaries"
        )
    v = sub.add_parser("verify", help="recompute stored scalars of completed runs")
    v.add_argument("run_dirs", nargs="+", help="run directories to verify")
    r = sub.add_parser("report", help="aggregate run directories into one table")
    r.add_argument("run_dirs", nargs="+", help="run directories to aggregate")
    r.add_argument("--out", help="write the table here instead of stdout")
    r.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in TASKS:
            overrides = {
                "out": args.out,
                "workers": args.workers,
                "seed": args.seed,
                "dump_fields": args.dump_fields or None,
            }
            overrides = {k: v for k, v in overrides.items() if v is not None}
            config = ExperimentConfig.from_file(args.config, args.command, overrides)
            return run_experiment(config)
        if args.command == "verify":
            worst = 0
            for run in args.run_dirs:
                worst = max(worst, verify_run(run))
            return worst
        if args.command == "report":
            rows = aggregate_runs(args.run_dirs)
            text = write_report(rows, Path(args.out) if args.out else None, args.json)
            if args.out is None:
                sys.stdout.write(text)
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover - argparse enforces the subcommand set


if __name__ == "__main__":
    raise SystemExit(main())
