"""Scenario runner and quick-look commands.

Subcommands:
  run      execute a YAML scenario file (tables, fit summaries, Wigner grids)
  pacs     one-off chain query: pattern probability and heralded-state fidelity
  wstate   W-state extraction for an N-stage chain
  wigner   Wigner grid of a named state, written as a plain-text matrix
  sweep    pattern probability across parameter values, with power-law fit

All outputs are deterministic: identical configs produce byte-identical
files. Exit codes: 0 success, 1 validation error, 2 dimension-budget error.
The environment variable PACSIM_MAX_WORKERS caps task parallelism.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product as iproduct
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .analysis import (
    WignerGrid,
    extract_w_state,
    fit_power_law,
    w_state_reference,
    wigner,
)
from .detection import (
    ClickPattern,
    DetectorModel,
    condition_on_pattern,
    enumerate_patterns,
    project_signal,
)
from .dynamics import (
    ChainConfig,
    StageParams,
    run_chain_full,
    run_chain_sequential,
)
from .errors import DimensionBudgetError, ScenarioError
from .fock import (
    PureState,
    coherent_state,
    fidelity_ensemble,
    fidelity_pure,
    fock_state,
    mean_photon_number,
    pacs_state,
)

SCHEMA_VERSION = 1
_TASK_TYPES = ("patterns", "project", "sweep", "wigner")


# ---------------------------------------------------------------------------
# scenario parsing and validation
# ---------------------------------------------------------------------------

def _parse_alpha(value: Any, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            raise ScenarioError(f"{where}: cannot parse {value!r} as a complex number")
    raise ScenarioError(f"{where}: expected a number or complex string, got {value!r}")


def _require(mapping: dict, key: str, where: str) -> Any:
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return mapping[key]


def _parse_chain(raw: Any) -> ChainConfig:
    if not isinstance(raw, dict):
        raise ScenarioError("chain: expected a mapping")
    alpha = _parse_alpha(_require(raw, "alpha", "chain"), "chain.alpha")
    signal_dim = raw.get("signal_dim")
    if signal_dim is not None and (not isinstance(signal_dim, int) or signal_dim < 2):
        raise ScenarioError(f"chain.signal_dim: expected an integer >= 2, got {signal_dim!r}")
    if "stages" in raw:
        stages = []
        if not isinstance(raw["stages"], list) or not raw["stages"]:
            raise ScenarioError("chain.stages: expected a nonempty list")
        for i, entry in enumerate(raw["stages"]):
            if not isinstance(entry, dict):
                raise ScenarioError(f"chain.stages[{i}]: expected a mapping")
            lam = _require(entry, "lam", f"chain.stages[{i}]")
            idler_dim = entry.get("idler_dim", 4)
            try:
                stages.append(StageParams(float(lam), int(idler_dim)))
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"chain.stages[{i}]: {exc}")
        try:
            return ChainConfig(alpha, tuple(stages), signal_dim)
        except ValueError as exc:
            raise ScenarioError(f"chain: {exc}")
    lam = _require(raw, "lam", "chain")
    n_stages = _require(raw, "n_stages", "chain")
    if not isinstance(n_stages, int) or n_stages < 1:
        raise ScenarioError(f"chain.n_stages: expected a positive integer, got {n_stages!r}")
    try:
        return ChainConfig.uniform(
            alpha, float(lam), n_stages, int(raw.get("idler_dim", 4)), signal_dim
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"chain: {exc}")


def _parse_detector(raw: Any) -> DetectorModel:
    if raw is None:
        return DetectorModel.ideal()
    if not isinstance(raw, dict):
        raise ScenarioError("detector: expected a mapping")
    try:
        return DetectorModel(
            eta=float(raw.get("eta", 1.0)),
            dark_prob=float(raw.get("dark_prob", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"detector: {exc}")


def _parse_pattern(text: Any, n_stages: int, where: str) -> ClickPattern:
    if not isinstance(text, str):
        raise ScenarioError(f"{where}: expected a 0/1 string, got {text!r}")
    try:
        pattern = ClickPattern.from_string(text)
    except ValueError as exc:
        raise ScenarioError(f"{where}: {exc}")
    if len(pattern) != n_stages:
        raise ScenarioError(
            f"{where}: pattern {text!r} has {len(pattern)} outcomes for a "
            f"{n_stages}-stage chain"
        )
    return pattern


@dataclass(frozen=True)
class Scenario:
    """Validated scenario: chain, detector, evolution mode and task list."""

    chain: ChainConfig
    detector: DetectorModel
    mode: str
    tasks: tuple[dict, ...]


def parse_scenario(raw: Any) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected a mapping at the top level")
    version = _require(raw, "version", "scenario")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"version: expected {SCHEMA_VERSION}, got {version!r}")
    known = {"version", "chain", "detector", "mode", "tasks"}
    for key in raw:
        if key not in known:
            raise ScenarioError(f"scenario: unknown field {key!r}")
    chain = _parse_chain(_require(raw, "chain", "scenario"))
    detector = _parse_detector(raw.get("detector"))
    mode = raw.get("mode", "full")
    if mode not in ("full", "sequential"):
        raise ScenarioError(f"mode: expected 'full' or 'sequential', got {mode!r}")
    rawtasks = _require(raw, "tasks", "scenario")
    if not isinstance(rawtasks, list) or not rawtasks:
        raise ScenarioError("tasks: expected a nonempty list")
    tasks = []
    seen_outputs: set[str] = set()
    for i, entry in enumerate(rawtasks):
        where = f"tasks[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{where}: expected a mapping")
        ttype = _require(entry, "type", where)
        if ttype not in _TASK_TYPES:
            raise ScenarioError(f"{where}.type: expected one of {_TASK_TYPES}, got {ttype!r}")
        task = dict(entry)
        output = _require(entry, "output", where)
        if not isinstance(output, str) or not output:
            raise ScenarioError(f"{where}.output: expected a file path")
        for path_field in ("output", "fit_output"):
            p = task.get(path_field)
            if p is not None:
                if p in seen_outputs:
                    raise ScenarioError(f"{where}.{path_field}: duplicate output path {p!r}")
                seen_outputs.add(p)
        _validate_task(task, chain, where)
        tasks.append(task)
    return Scenario(chain=chain, detector=detector, mode=mode, tasks=tuple(tasks))


def _validate_task(task: dict, chain: ChainConfig, where: str) -> None:
    ttype = task["type"]
    if ttype == "patterns":
        if "pattern" in task and task["pattern"] is not None:
            _parse_pattern(task["pattern"], chain.n_stages, f"{where}.pattern")
    elif ttype == "project":
        m = task.get("reference_m", 1)
        if not isinstance(m, int) or m < 0 or m > chain.n_stages:
            raise ScenarioError(
                f"{where}.reference_m: expected an integer in 0..{chain.n_stages}, got {m!r}"
            )
    elif ttype == "sweep":
        param = task.get("param", "lam")
        if param not in ("lam", "alpha"):
            raise ScenarioError(f"{where}.param: expected 'lam' or 'alpha', got {param!r}")
        values = _require(task, "values", where)
        if not isinstance(values, list) or len(values) < 1:
            raise ScenarioError(f"{where}.values: expected a nonempty list")
        for v in values:
            if not isinstance(v, (int, float)) or v <= 0:
                raise ScenarioError(f"{where}.values: expected positive numbers, got {v!r}")
        if task.get("fit_output") is not None:
            if param != "lam":
                raise ScenarioError(f"{where}.fit_output: fits are only defined for lam sweeps")
            if len(values) < 3 or len(set(values)) != len(values):
                raise ScenarioError(f"{where}.values: a fit needs >= 3 distinct values")
        _parse_pattern(_require(task, "pattern", where), chain.n_stages, f"{where}.pattern")
    elif ttype == "wigner":
        _parse_state_spec(str(_require(task, "state", where)), f"{where}.state")
        for field, default in (("extent", 5.0), ("step", 0.1)):
            v = task.get(field, default)
            if not isinstance(v, (int, float)) or v <= 0:
                raise ScenarioError(f"{where}.{field}: expected a positive number, got {v!r}")


def _parse_state_spec(spec: str, where: str = "state") -> PureState:
    """Build a single-mode state from 'coherent:A', 'fock:N' or 'pacs:A,M'."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "coherent":
            alpha = _parse_alpha(arg, where)
            return coherent_state(alpha, _auto_dim(alpha, 0))
        if kind == "fock":
            n = int(arg)
            return fock_state(n, max(n + 2, 8))
        if kind == "pacs":
            alpha_text, _, m_text = arg.partition(",")
            alpha = _parse_alpha(alpha_text, where)
            m = int(m_text)
            return pacs_state(alpha, m, _auto_dim(alpha, m))
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: cannot parse state spec {spec!r} ({exc})")
    raise ScenarioError(
        f"{where}: unknown state kind {kind!r} (use coherent:A, fock:N or pacs:A,M)"
    )


def _auto_dim(alpha: complex, m: int) -> int:
    from .fock import default_signal_dim

    return default_signal_dim(alpha, m)


# ---------------------------------------------------------------------------
# formatting helpers
# ---------------------------------------------------------------------------

def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def wigner_grid_text(grid: WignerGrid) -> str:
    """Plain-text matrix with axis headers; rows follow x, columns follow p."""
    lines = ["# wigner grid"]
    lines.append("# x: " + " ".join(repr(float(v)) for v in grid.x_axis))
    lines.append("# p: " + " ".join(repr(float(v)) for v in grid.p_axis))
    for row in grid.values:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def emit_wigner(grid: WignerGrid, path: str | Path) -> None:
    Path(path).write_text(wigner_grid_text(grid), encoding="utf-8")


def load_wigner(path: str | Path) -> WignerGrid:
    """Inverse of emit_wigner."""
    x_axis = p_axis = None
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# x:"):
            x_axis = np.array([float(v) for v in line[4:].split()])
        elif line.startswith("# p:"):
            p_axis = np.array([float(v) for v in line[4:].split()])
        elif line.startswith("#") or not line.strip():
            continue
        else:
            rows.append([float(v) for v in line.split()])
    if x_axis is None or p_axis is None:
        raise ValueError(f"{path}: missing axis headers")
    values = np.array(rows)
    if values.shape != (x_axis.size, p_axis.size):
        raise ValueError(
            f"{path}: matrix shape {values.shape} does not match axes "
            f"({x_axis.size}, {p_axis.size})"
        )
    return WignerGrid(x_axis=x_axis, p_axis=p_axis, values=values)


# ---------------------------------------------------------------------------
# task execution
# ---------------------------------------------------------------------------

def _pattern_rows(scenario: Scenario) -> list[list[str]]:
    chain, detector = scenario.chain, scenario.detector
    if scenario.mode == "full":
        joint = run_chain_full(chain)
        outcomes = [
            (o.pattern, o.probability, o.ensemble) for o in enumerate_patterns(joint, detector)
        ]
    else:
        outcomes = []
        for bits in iproduct((False, True), repeat=chain.n_stages):
            pattern = ClickPattern(bits)
            cond = run_chain_sequential(chain, detector, pattern)
            outcomes.append((pattern, cond.probability, cond.ensemble))
    rows = []
    for pattern, probability, ensemble in outcomes:
        fid = mean_n = None
        if ensemble is not None:
            reference = pacs_state(chain.alpha, pattern.n_clicks, chain.signal_dim)
            fid = fidelity_ensemble(ensemble, reference)
            mean_n = float(
                sum(w * mean_photon_number(s) for w, s in ensemble.branches)
            )
        rows.append(
            [str(pattern), str(pattern.n_clicks), _fmt(probability), _fmt(fid), _fmt(mean_n)]
        )
    return rows


def _run_patterns_task(task: dict, scenario: Scenario) -> dict[str, str]:
    rows = _pattern_rows(scenario)
    if task.get("pattern") is not None:
        rows = [r for r in rows if r[0] == task["pattern"]]
    header = ["pattern", "n_clicks", "probability", "fidelity_vs_pacs_m", "mean_signal_photons"]
    return {task["output"]: _csv_text(header, rows)}


def _run_project_task(task: dict, scenario: Scenario) -> dict[str, str]:
    chain = scenario.chain
    m = task.get("reference_m", 1)
    plain = bool(task.get("plain", False))
    ladder_max = task.get("ladder_max") or chain.n_stages
    payload: dict[str, Any] = {
        "n_stages": chain.n_stages,
        "reference_m": m,
        "plain_projector": plain,
    }
    if m == 1 and not plain:
        result = extract_w_state(chain, ladder_max=ladder_max)
        payload["probability"] = result.probability
        payload["w_fidelity"] = result.w_fidelity
    else:
        joint = run_chain_full(chain)
        reference = pacs_state(chain.alpha, m, chain.signal_dim)
        others = () if plain else tuple(
            pacs_state(chain.alpha, k, chain.signal_dim)
            for k in range(ladder_max + 1)
            if k != m
        )
        proj = project_signal(joint, reference, orthogonal_to=others)
        payload["probability"] = proj.probability
        w_fid = None
        if m == 1 and proj.state is not None:
            idler_dims = joint.space.dims[1:]
            if all(d == idler_dims[0] for d in idler_dims):
                w_fid = fidelity_pure(
                    proj.state, w_state_reference(len(idler_dims), idler_dims[0])
                )
        payload["w_fidelity"] = w_fid
    return {task["output"]: _json_text(payload)}


def _run_sweep_task(task: dict, scenario: Scenario) -> dict[str, str]:
    chain, detector = scenario.chain, scenario.detector
    param = task.get("param", "lam")
    values = [float(v) for v in task["values"]]
    pattern = ClickPattern.from_string(task["pattern"])
    samples = []
    for value in values:
        if param == "lam":
            cfg = ChainConfig(
                chain.alpha,
                tuple(StageParams(value, s.idler_dim) for s in chain.stages),
                chain.signal_dim,
            )
        else:
            cfg = ChainConfig(complex(value), chain.stages, None)
        if scenario.mode == "sequential":
            probability = run_chain_sequential(cfg, detector, pattern).probability
        else:
            joint = run_chain_full(cfg)
            probability = condition_on_pattern(joint, pattern, detector).probability
        samples.append((value, probability))
    rows = [[_fmt(v), _fmt(p)] for v, p in samples]
    outputs = {task["output"]: _csv_text([param, "probability"], rows)}
    if task.get("fit_output"):
        fit = fit_power_law(samples)
        outputs[task["fit_output"]] = _json_text(
            {
                "exponent": fit.exponent,
                "prefactor": fit.prefactor,
                "r_squared": fit.r_squared,
                "samples": [[l, p] for l, p in fit.samples],
            }
        )
    return outputs


def _run_wigner_task(task: dict, scenario: Scenario) -> dict[str, str]:
    state = _parse_state_spec(str(task["state"]))
    grid = wigner(state, float(task.get("extent", 5.0)), float(task.get("step", 0.1)))
    return {task["output"]: wigner_grid_text(grid)}


_TASK_RUNNERS = {
    "patterns": _run_patterns_task,
    "project": _run_project_task,
    "sweep": _run_sweep_task,
    "wigner": _run_wigner_task,
}


def _max_workers(n_tasks: int) -> int:
    env = os.environ.get("PACSIM_MAX_WORKERS", "")
    cap = min(4, os.cpu_count() or 1)
    if env.strip():
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ScenarioError(f"PACSIM_MAX_WORKERS: expected an integer, got {env!r}")
    return max(1, min(cap, n_tasks))


def run_scenario(config_path: str | Path, outdir: str | Path | None = None) -> int:
    """Execute a scenario file; writes nothing unless every task succeeds."""
    config_path = Path(config_path)
    if outdir is None:
        outdir = Path.cwd()
    outdir = Path(outdir)
    try:
        raw = yaml.safe_load(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"{config_path}: no such file")
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{config_path}: YAML parse error{loc}: {exc}")
    scenario = parse_scenario(raw)

    def run_one(task: dict) -> dict[str, str]:
        return _TASK_RUNNERS[task["type"]](task, scenario)

    workers = _max_workers(len(scenario.tasks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, scenario.tasks))
    else:
        results = [run_one(task) for task in scenario.tasks]

    # all tasks succeeded; only now touch the filesystem
    for outputs in results:
        for rel_path, text in outputs.items():
            target = outdir / rel_path
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# quick-look subcommands
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    return run_scenario(args.config, args.outdir)


def _cmd_pacs(args) -> int:
    pattern = ClickPattern.from_string(args.pattern)
    config = ChainConfig.uniform(
        _parse_alpha(args.alpha, "--alpha"), args.lam, len(pattern),
        idler_dim=args.idler_dim, signal_dim=args.signal_dim,
    )
    detector = DetectorModel(eta=args.eta, dark_prob=args.dark_prob)
    cond = run_chain_sequential(config, detector, pattern)
    print(f"pattern {pattern}: probability = {cond.probability!r}")
    if cond.ensemble is None:
        print("impossible outcome")
        return 0
    reference = pacs_state(config.alpha, pattern.n_clicks, config.signal_dim)
    fid = fidelity_ensemble(cond.ensemble, reference)
    print(f"fidelity vs {pattern.n_clicks}-photon-added state = {fid!r}")
    return 0


def _cmd_wstate(args) -> int:
    config = ChainConfig.uniform(
        _parse_alpha(args.alpha, "--alpha"), args.lam, args.n,
        idler_dim=args.idler_dim, signal_dim=args.signal_dim,
    )
    result = extract_w_state(config)
    print(f"heralding probability = {result.probability!r}")
    if result.idler_state is None:
        print("impossible outcome")
    else:
        print(f"fidelity vs {args.n}-mode W state = {result.w_fidelity!r}")
    return 0


def _cmd_wigner(args) -> int:
    state = _parse_state_spec(args.state, "--state")
    grid = wigner(state, args.range, args.step)
    emit_wigner(grid, args.out)
    print(
        f"wrote {args.out}: {grid.values.shape[0]}x{grid.values.shape[1]} grid, "
        f"min = {grid.minimum()!r}, integral = {grid.integral()!r}"
    )
    return 0


def _cmd_sweep(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    pattern = ClickPattern.from_string(args.pattern)
    task = {
        "type": "sweep",
        "param": args.param,
        "values": values,
        "pattern": args.pattern,
        "output": args.out,
        "fit_output": args.fit_out,
    }
    chain = ChainConfig.uniform(
        _parse_alpha(args.alpha, "--alpha"),
        values[0] if args.param == "lam" else args.lam,
        len(pattern),
        idler_dim=args.idler_dim,
        signal_dim=args.signal_dim,
    )
    scenario = Scenario(
        chain=chain,
        detector=DetectorModel(eta=args.eta, dark_prob=args.dark_prob),
        mode="full",
        tasks=(task,),
    )
    _validate_task(task, chain, "sweep")
    outputs = _run_sweep_task(task, scenario)
    for rel_path, text in outputs.items():
        Path(rel_path).parent.mkdir(parents=True, exist_ok=True)
        Path(rel_path).write_text(text, encoding="utf-8")
        print(f"wrote {rel_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pacsim",
        description="cascaded parametric-amplifier simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a YAML scenario file")
    p_run.add_argument("config", help="path to the scenario file")
    p_run.add_argument("--outdir", default=None, help="directory for output files")
    p_run.set_defaults(func=_cmd_run)

    def add_chain_args(p, with_lam=True):
        p.add_argument("--alpha", required=True, help="seed coherent amplitude")
        if with_lam:
            p.add_argument("--lam", "--lambda", dest="lam", type=float,
                           required=True,
                           help="effective interaction strength per stage")
        p.add_argument("--idler-dim", type=int, default=4, dest="idler_dim")
        p.add_argument("--signal-dim", type=int, default=None, dest="signal_dim")
        p.add_argument("--eta", type=float, default=1.0, help="detector efficiency")
        p.add_argument("--dark-prob", type=float, default=0.0, dest="dark_prob")

    p_pacs = sub.add_parser("pacs", help="condition a chain on a click pattern")
    add_chain_args(p_pacs)
    p_pacs.add_argument("--pattern", required=True, help="click pattern, e.g. 10")
    p_pacs.set_defaults(func=_cmd_pacs)

    p_w = sub.add_parser("wstate", help="extract the N-mode W state")
    add_chain_args(p_w)
    p_w.add_argument("--n", type=int, required=True, help="number of stages")
    p_w.set_defaults(func=_cmd_wstate)

    p_wig = sub.add_parser("wigner", help="write a Wigner grid to a text file")
    p_wig.add_argument("--state", required=True,
                       help="state spec: coherent:A | fock:N | pacs:A,M")
    p_wig.add_argument("--range", type=float, default=5.0,
                       help="grid half-width in x and p")
    p_wig.add_argument("--step", type=float, default=0.1)
    p_wig.add_argument("--out", default="wigner.txt")
    p_wig.set_defaults(func=_cmd_wigner)

    p_sweep = sub.add_parser("sweep", help="sweep a parameter and fit the scaling")
    add_chain_args(p_sweep)
    p_sweep.add_argument("--param", choices=("lam", "alpha"), default="lam")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--pattern", required=True)
    p_sweep.add_argument("--out", default="sweep.csv")
    p_sweep.add_argument("--fit-out", default=None, dest="fit_out")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DimensionBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
