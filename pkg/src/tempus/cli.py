"""Scenario runner: ``tempus solve|check|transform|oscillator --config FILE``.

A scenario is one JSON document::

    {
      "scale": {"kind": "Z"},
      "system": {"builtin": "alternating-harmonic", "params": {"M": [[1.0]]}},
      "run": "check",
      "schedule": [32, 64, 128, 256, 512, 1024, 2048, 4096],
      "k_max": 2,
      "output": {"dir": "out", "format": "csv"}
    }

Exit codes: 0 when every verdict was computed (including negative ones),
1 for configuration errors, 2 for numerical errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, systems
from .bocher import check_order_k, higher_transform, transform_residual, TailLadder
from .calculus import MatrixSignal, Tolerances, norm_signal
from .errors import ConfigInvalid, InvalidScale, NumericalError, TempusError
from .oscillator import run_oscillator
from .solver import (
    NonlinearField,
    advance_nonlinear,
    classify_limit,
    fundamental_matrix,
    gronwall_envelope,
    gronwall_lower,
    limit_estimate,
    solve_linear,
    solve_nonlinear,
    theorem4_gate,
)
from .timescale import GridSpec, TimeScale, doubling_schedule, from_description

RUN_KINDS = ("solve", "check", "transform", "oscillator")
FORMATS = ("csv", "record")
TOLERANCE_KEYS = ("tol_cauchy", "tol_cauchy_rel", "tol_sing", "tol_regress", "h_max")


@dataclass
class ScenarioConfig:
    scale: dict[str, Any]
    system: dict[str, Any]
    run: str | None = None
    schedule: list[float] | None = None
    start: float = 0.0
    x0: list[float] | None = None
    k_max: int = 2
    k: int = 1
    horizon: float | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    output: dict[str, Any] = field(default_factory=lambda: {"dir": "out", "format": "csv"})
    base_dir: str | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def tol(self) -> Tolerances:
        t = self.tolerances
        base = Tolerances()
        return base.replace(
            cauchy_abs=t.get("tol_cauchy", base.cauchy_abs),
            cauchy_rel=t.get("tol_cauchy_rel", base.cauchy_rel),
            sing=t.get("tol_sing", base.sing),
            regress=t.get("tol_regress", base.regress),
        )

    @property
    def h_max(self) -> float:
        return float(self.tolerances.get("h_max", 1e-2))

    def build_scale(self) -> TimeScale:
        return from_description(self.scale)

    def build_system(self) -> MatrixSignal | NonlinearField:
        return systems.build(self.system, None if self.base_dir is None else Path(self.base_dir))


def _number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate_config(text: str, base_dir: str | None = None) -> ScenarioConfig | list[str]:
    """Parse and validate a scenario document; returns the config or a list of field errors."""
    try:
        doc = json.loads(text) if text.strip() else {}
    except (json.JSONDecodeError, TypeError) as exc:
        return [f"invalid JSON: {exc}"]
    if not isinstance(doc, dict):
        return ["config must be a JSON object"]
    errors: list[str] = []
    for key in ("scale", "system"):
        if key not in doc:
            errors.append(f"missing field: {key}")
    known = set(ScenarioConfig.__dataclass_fields__) - {"base_dir"}
    for key in sorted(set(doc) - known):
        errors.append(f"unknown field: {key}")

    if "scale" in doc:
        try:
            from_description(doc["scale"])
        except InvalidScale as exc:
            errors.append(f"scale: {exc}")
        except NumericalError:
            pass  # raised again, by name, when the scenario runs
        except (TempusError, TypeError, ValueError, KeyError) as exc:
            errors.append(f"scale: {exc}")
    if "system" in doc:
        sysrec = doc["system"]
        if not isinstance(sysrec, dict) or ("builtin" not in sysrec and "table" not in sysrec):
            errors.append("system: needs 'builtin' or 'table'")
        elif "builtin" in sysrec and sysrec["builtin"] not in systems.BUILTINS:
            errors.append(f"system: unknown builtin {sysrec['builtin']!r}; choose from {list(systems.BUILTINS)}")
        elif "params" in sysrec and not isinstance(sysrec["params"], dict):
            errors.append("system: 'params' must be an object")
    run = doc.get("run")
    if run is not None and run not in RUN_KINDS:
        errors.append(f"run: must be one of {list(RUN_KINDS)}")
    sched = doc.get("schedule")
    if sched is not None:
        if not isinstance(sched, list) or not all(_number(h) for h in sched):
            errors.append("schedule: must be a list of numbers")
        elif any(b <= a for a, b in zip(sched, sched[1:])):
            errors.append("schedule not increasing")
        elif len(sched) < 3:
            errors.append("schedule: needs at least 3 horizons")
    for key in ("start", "horizon"):
        if doc.get(key) is not None and not _number(doc[key]):
            errors.append(f"{key}: must be a number")
    for key in ("k_max", "k"):
        if key in doc and (not isinstance(doc[key], int) or isinstance(doc[key], bool) or doc[key] < 1):
            errors.append(f"{key}: must be a positive integer")
    if doc.get("x0") is not None and (not isinstance(doc["x0"], list) or not all(_number(v) for v in doc["x0"])):
        errors.append("x0: must be a list of numbers")
    tols = doc.get("tolerances", {})
    if not isinstance(tols, dict):
        errors.append("tolerances: must be an object")
    else:
        for key, v in tols.items():
            if key not in TOLERANCE_KEYS:
                errors.append(f"tolerances: unknown key {key!r}")
            elif not _number(v) or v <= 0:
                errors.append(f"tolerances.{key}: must be a positive number")
    out = doc.get("output", {"dir": "out", "format": "csv"})
    if not isinstance(out, dict):
        errors.append("output: must be an object")
    else:
        if out.get("format", "csv") not in FORMATS:
            errors.append(f"output.format: must be one of {list(FORMATS)}")
        if not isinstance(out.get("dir", "out"), str):
            errors.append("output.dir: must be a string")
    if errors:
        return errors

    cfg = ScenarioConfig(
        scale=doc["scale"],
        system={"params": {}, **doc["system"]} if "builtin" in doc["system"] else dict(doc["system"]),
        run=run,
        schedule=None if sched is None else [float(h) for h in sched],
        start=float(doc.get("start", 0.0)),
        x0=None if doc.get("x0") is None else [float(v) for v in doc["x0"]],
        k_max=int(doc.get("k_max", 2)),
        k=int(doc.get("k", 1)),
        horizon=None if doc.get("horizon") is None else float(doc["horizon"]),
        tolerances={k: float(v) for k, v in tols.items()},
        output={"dir": out.get("dir", "out"), "format": out.get("format", "csv")},
        base_dir=base_dir,
    )
    try:
        cfg.build_system()
    except NumericalError:
        pass
    except (TempusError, ValueError, TypeError, KeyError, OSError) as exc:
        return [f"system: {exc}"]
    return cfg


# ---------------------------------------------------------------------------
# outputs


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Writer:
    def __init__(self, out_dir: Path, fmt: str):
        self.dir = out_dir
        self.fmt = fmt
        self.files: list[Path] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def record(self, name: str, rec: dict[str, Any]) -> None:
        path = self.dir / f"{name}.json"
        path.write_text(json.dumps(_clean(rec), indent=2, sort_keys=True) + "\n")
        self.files.append(path)

    def csv(self, name: str, header: list[str], rows) -> None:
        if self.fmt != "csv":
            return
        path = self.dir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(f"{float(v):.17g}" for v in row) + "\n")
        self.files.append(path)


def _schedule(cfg: ScenarioConfig, ts: TimeScale) -> list[float]:
    if cfg.schedule is not None:
        return [ts.snap(h) for h in cfg.schedule]
    return doubling_schedule(ts, cfg.start)


def _run_solve(cfg, ts, sysobj, w, stages):
    hs = _schedule(cfg, ts)
    spec = GridSpec(hs[-1], cfg.h_max)
    tol = cfg.tol()
    if isinstance(sysobj, NonlinearField):
        x0 = np.asarray(cfg.x0 if cfg.x0 is not None else [0.1] * sysobj.dim, dtype=float)
        t0 = time.perf_counter()
        gate, sup = theorem4_gate(ts, sysobj.K, float(np.linalg.norm(x0)), sysobj.delta_bound, cfg.start, hs, spec, tol)
        stages["gate"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        traj = solve_nonlinear(ts, sysobj, x0, cfg.start, spec)
        stages["solve"] = time.perf_counter() - t0
        verdict = limit_estimate(traj, hs, tol)
        w.csv("trajectory", traj.header(), ([t, *v] for t, v in zip(traj.t, traj.values)))
        w.record("verdict", {"class_s": verdict.to_record(), "gate": {"passed": gate, "sup_envelope": sup}})
        return
    t0 = time.perf_counter()
    fm = fundamental_matrix(ts, sysobj, cfg.start, spec, tol)
    stages["fundamental"] = time.perf_counter() - t0
    verdict = limit_estimate(fm, hs, tol)
    rec: dict[str, Any] = {"class_s": verdict.to_record()}
    if cfg.x0 is not None:
        traj = solve_linear(ts, sysobj, cfg.x0, cfg.start, spec, tol)
        x0n = float(np.linalg.norm(cfg.x0))
        na = norm_signal(sysobj)
        rec["solution"] = {
            "limit": classify_limit(hs, [traj.at(h) for h in hs], "vector", tol, not np.any(traj.values)).to_record(),
            "gronwall_upper": gronwall_envelope(ts, na, x0n, cfg.start, hs[-1], spec, tol),
            "gronwall_lower": gronwall_lower(ts, na, x0n, cfg.start, hs[-1], spec, tol),
        }
    else:
        traj = fm
    stages["solve"] = time.perf_counter() - t0
    flat = traj.values.reshape(len(traj), -1)
    w.csv("trajectory", traj.header(), ([t, *v] for t, v in zip(traj.t, flat)))
    w.record("verdict", rec)


def _run_check(cfg, ts, sysobj, w, stages):
    hs = _schedule(cfg, ts)
    t0 = time.perf_counter()
    rep = check_order_k(ts, sysobj, cfg.start, cfg.k_max, hs, GridSpec(hs[-1], cfg.h_max), cfg.tol(), include_ominus=True)
    stages["check"] = time.perf_counter() - t0
    w.record("report", rep.to_record())


def _run_transform(cfg, ts, sysobj, w, stages):
    hs = _schedule(cfg, ts)
    horizon = ts.snap(cfg.horizon) if cfg.horizon is not None else hs[-1]
    spec = GridSpec(horizon, cfg.h_max)
    tol = cfg.tol()
    t0 = time.perf_counter()
    ladder = TailLadder(ts, sysobj, cfg.start, horizon, spec, tol, [h for h in hs if h <= horizon])
    tr = higher_transform(ts, sysobj, cfg.k, horizon, spec, cfg.start, tol, ladder=ladder)
    stages["transform"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = transform_residual(tr, sysobj, substeps=spec.rk_substeps)
    stages["residual"] = time.perf_counter() - t0
    n = sysobj.dim
    g = tr.grid
    valid = np.isfinite(tr.B_values[:, 0, 0])
    w.csv(
        "coefficients",
        ["t"] + [f"B_{i}{j}" for i in range(n) for j in range(n)],
        ([t, *b] for t, b in zip(g.t[valid], tr.B_values[valid].reshape(-1, n * n))),
    )
    w.csv("residual", ["t", "residual"], ([t, r] for t, r in zip(res.t[:-1], res.residual)))
    w.record(
        "report",
        {
            "order": cfg.k,
            "t_star": tr.t_star,
            "horizon": horizon,
            "max_residual": res.max_residual,
            "orders": [{"order": j, **ladder.verdict(j).to_record()} for j in range(1, cfg.k + 1)],
        },
    )


def _run_oscillator(cfg, ts, sysobj, w, stages):
    spec = systems.oscillator_spec(cfg.system.get("params", {}))
    horizon = int(cfg.horizon if cfg.horizon is not None else 10**4)
    u0 = np.asarray(cfg.x0 if cfg.x0 is not None else [1.0, 0.0], dtype=float)
    t0 = time.perf_counter()
    run = run_oscillator(spec, u0, horizon)
    stages["oscillator"] = time.perf_counter() - t0
    norms = np.linalg.norm(run.u, axis=1)
    w.csv("amplitudes", ["n", "C1", "C2", "norm_u"], zip(run.n, run.u[:, 0], run.u[:, 1], norms))
    hs = [h for h in doubling_schedule(ts, 0.0, 62) if h <= horizon]
    t0 = time.perf_counter()
    rep = check_order_k(ts, sysobj, 0.0, cfg.k_max, hs, GridSpec(hs[-1]), cfg.tol())
    stages["check"] = time.perf_counter() - t0
    amp = classify_limit(hs, [run.u[int(h)] for h in hs], "vector", cfg.tol(), not np.any(run.u))
    w.record(
        "report",
        {
            "alpha": spec.alpha,
            "g": spec.g_name,
            "horizon": horizon,
            "max_roundtrip_residual": run.max_residual,
            "final_window_drift": run.drift(),
            "amplitude_limit": amp.to_record(),
            "conditions": rep.to_record(),
        },
    )


RUNNERS = {"solve": _run_solve, "check": _run_check, "transform": _run_transform, "oscillator": _run_oscillator}


@dataclass
class RunManifest:
    config: dict[str, Any]
    tool_version: str
    stages: dict[str, float]
    outputs: list[dict[str, Any]]

    def digests(self) -> dict[str, str]:
        return {o["file"]: o["sha256"] for o in self.outputs}


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> RunManifest:
    """Execute one scenario and write its outputs plus ``manifest.json``."""
    if cfg.run not in RUN_KINDS:
        raise ConfigInvalid([f"run: must be one of {list(RUN_KINDS)}"])
    out = Path(out_dir) if out_dir is not None else Path(cfg.output["dir"])
    w = _Writer(out, cfg.output["format"])
    stages: dict[str, float] = {}
    t0 = time.perf_counter()
    ts = cfg.build_scale()
    sysobj = cfg.build_system()
    stages["setup"] = time.perf_counter() - t0
    if cfg.run == "oscillator" and cfg.system.get("builtin") != "oscillator":
        raise ConfigInvalid(["system: oscillator runs need the 'oscillator' builtin"])
    if isinstance(sysobj, NonlinearField) and cfg.run != "solve":
        raise ConfigInvalid([f"system: nonlinear systems only support 'solve', not {cfg.run!r}"])
    RUNNERS[cfg.run](cfg, ts, sysobj, w, stages)
    outputs = [
        {"file": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest(), "bytes": p.stat().st_size}
        for p in w.files
    ]
    manifest = RunManifest(cfg.to_dict(), __version__, stages, outputs)
    (out / "manifest.json").write_text(json.dumps(_clean(asdict(manifest)), indent=2, sort_keys=True) + "\n")
    return manifest


def _load(path: Path, verb: str) -> ScenarioConfig:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid([f"cannot read {path}: {exc}"]) from exc
    cfg = validate_config(text, str(path.parent))
    if isinstance(cfg, list):
        raise ConfigInvalid(cfg)
    if cfg.run is None:
        cfg.run = verb
    elif cfg.run != verb:
        raise ConfigInvalid([f"run: config says {cfg.run!r} but command is {verb!r}"])
    return cfg


def _execute(path: Path, verb: str, out: Path | None) -> int:
    try:
        cfg = _load(path, verb)
        manifest = run_scenario(cfg, out)
    except ConfigInvalid as exc:
        for e in exc.errors:
            print(f"ConfigInvalid: {path}: {e}", file=sys.stderr)
        return 1
    except TempusError as exc:
        print(f"{type(exc).__name__}: {path}: {exc}", file=sys.stderr)
        return 2
    print(f"{path}: {', '.join(o['file'] for o in manifest.outputs)}", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tempus", description="Dynamic equations on time scales: scenario runner")
    parser.add_argument("verb", choices=RUN_KINDS)
    parser.add_argument("--config", type=Path, help="scenario JSON file")
    parser.add_argument("--batch", type=Path, help="directory of scenario JSON files")
    parser.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    args = parser.parse_args(argv)
    if args.config is None and args.batch is None:
        parser.error("one of --config or --batch is required")
    code = 0
    if args.config is not None:
        code = max(code, _execute(args.config, args.verb, args.out))
    if args.batch is not None:
        files = sorted(args.batch.glob("*.json"))
        if not files:
            print(f"ConfigInvalid: no scenario files in {args.batch}", file=sys.stderr)
            return 1
        for f in files:
            out = None if args.out is None else args.out / f.stem
            code = max(code, _execute(f, args.verb, out))
    return code


if __name__ == "__main__":
    sys.exit(main())
