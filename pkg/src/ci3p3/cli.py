"""Command-line interface: decision tables, one-shot decisions, simulation
campaigns, scenario export, interactive conduct, and the HTTP service.

Exit codes: 0 success, 2 configuration error, 3 state-file integrity error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from pathlib import Path

from . import service as service_mod
from .engine import (
    DesignParams,
    StateIntegrityError,
    TrialError,
    TrialState,
    new_trial,
    next_assignment,
    record_cohort,
    state_from_json,
    state_to_json,
    params_from_dict,
)
from .grid import DoseGrid
from .rules import EquivalenceInterval, decision_table
from .scenarios import (
    classification_histogram,
    classify_truth,
    matrix_to_csv,
    scenario_suite,
    scenario_to_json,
)
from .selection import select_mtdc, selection_report
from .simulate import (
    SimConfig,
    VARIANTS,
    apply_variant,
    oc_long_csv,
    oc_to_csv,
    oc_to_json,
    run_oc,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STATE = 3

CONFIG_SCHEMA = "ci3p3-config/1"
DATA_DIR_ENV = "CI3P3_DATA_DIR"

_CONFIG_KEYS = {"schema", "design", "grid", "variant", "scenarios", "n_reps", "master_seed", "workers", "output_dir"}


class ConfigError(Exception):
    pass


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


def load_config(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data.get("schema") != CONFIG_SCHEMA:
        raise ConfigError(f"config must declare schema {CONFIG_SCHEMA!r}")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _params_from_args(args, base: DesignParams | None = None) -> DesignParams:
    params = base or DesignParams()
    updates = {}
    if getattr(args, "pt", None) is not None or any(
        getattr(args, k, None) is not None for k in ("eps1", "eps2")
    ):
        updates["ei"] = EquivalenceInterval(
            args.pt if args.pt is not None else params.ei.target,
            args.eps1 if args.eps1 is not None else params.ei.eps_lower,
            args.eps2 if args.eps2 is not None else params.ei.eps_upper,
        )
    for attr, key in (
        ("cohort", "cohort_size"),
        ("max_n", "max_n"),
        ("xi", "exclusion_threshold"),
        ("path", "path"),
        ("seed", "rng_seed"),
    ):
        val = getattr(args, attr, None)
        if val is not None:
            updates[key] = val
    if updates:
        params = dataclasses.replace(params, **updates)
    return params


# -- subcommands -------------------------------------------------------------


def cmd_table(args) -> int:
    ei = EquivalenceInterval(args.pt, args.eps1, args.eps2)
    table = decision_table(ei, n_max=args.nmax, threshold=args.xi)
    text = table.to_csv() if args.format == "csv" else table.to_text()
    _emit(text, args.out)
    return EXIT_OK


def cmd_init(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        params = params_from_dict(cfg.get("design", {}))
        grid_cfg = cfg.get("grid", {})
        grid = DoseGrid(int(grid_cfg.get("levels_a", 4)), int(grid_cfg.get("levels_b", 4)))
    else:
        params = _params_from_args(args)
        la, lb = (int(v) for v in args.grid.lower().split("x"))
        grid = DoseGrid(la, lb)
    state = new_trial(grid, params)
    _write_atomic(Path(args.out), state_to_json(state))
    nxt = next_assignment(state)
    print(f"initialized trial state at {args.out}; first cohort at d{nxt.coord[0]}{nxt.coord[1]}")
    return EXIT_OK


def _load_state(path: str) -> TrialState:
    try:
        return state_from_json(Path(path).read_text())
    except OSError as exc:
        raise StateIntegrityError(f"cannot read state file {path}: {exc}") from exc


def _print_grid(state: TrialState, file=sys.stdout) -> None:
    print("     " + "".join(f"   B{j}   " for j in range(1, state.grid.levels_b + 1)), file=file)
    for i in range(state.grid.levels_a, 0, -1):
        cells = []
        for j in range(1, state.grid.levels_b + 1):
            y, n = state.counts((i, j))
            mark = "x" if state.is_excluded((i, j)) else (" " if (i, j) != state.current else "*")
            cells.append(f"{mark}{y:2d}/{n:<2d}  ")
        print(f"  A{i} " + "".join(cells), file=file)


def cmd_decide(args) -> int:
    state = _load_state(args.state)
    if args.what_if is not None:
        rec = next_assignment(state)
        if rec.coord is None:
            raise ConfigError(f"trial already stopped ({rec.stop.value}); nothing to preview")
        preview = state.clone()
        record_cohort(preview, rec.coord, args.what_if)
        outcome = next_assignment(preview)
        nxt = f"d{outcome.coord[0]}{outcome.coord[1]}" if outcome.coord else f"stop:{outcome.stop.value}"
        dec = outcome.decision.value if outcome.decision else "-"
        print(
            f"what-if dlt={args.what_if} at d{rec.coord[0]}{rec.coord[1]}: "
            f"decision {dec}, next {nxt}"
        )
        return EXIT_OK
    if args.dc is not None or args.dlt is not None:
        if args.dc is None or args.dlt is None:
            raise ConfigError("--dc and --dlt must be provided together")
        i, j = (int(v) for v in args.dc.split(","))
        record_cohort(state, (i, j), args.dlt)
        _write_atomic(Path(args.state), state_to_json(state))
    nxt = next_assignment(state)
    _print_grid(state)
    print(f"stage: {state.stage.value}   enrolled: {len(state.log) * state.params.cohort_size}")
    if nxt.decision is not None:
        print(f"decision at d{state.current[0]}{state.current[1]}: {nxt.decision.value}")
    if nxt.considered:
        shown = ", ".join(f"d{c[0]}{c[1]} xi={x:.4f}" for c, x in nxt.considered)
        print(f"candidates: {shown}")
    if nxt.coord is None:
        print(f"trial stopped ({nxt.stop.value}); run finalize or the service to select the MTDC")
        result = select_mtdc(state)
        sel = f"d{result.coord[0]}{result.coord[1]}" if result.coord else "none"
        print(f"MTDC: {sel}")
        if args.report:
            _write_atomic(Path(args.report), json.dumps(selection_report(result), indent=2))
    else:
        print(f"next cohort: d{nxt.coord[0]}{nxt.coord[1]} [{nxt.rule}]")
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = DesignParams()
    n_reps = 1000
    master_seed = 0
    workers = None
    out_dir = None
    variant = "base"
    scenario_names = "study2"
    if args.config:
        cfg = load_config(args.config)
        params = params_from_dict(cfg.get("design", {}))
        n_reps = int(cfg.get("n_reps", n_reps))
        master_seed = int(cfg.get("master_seed", master_seed))
        workers = cfg.get("workers", workers)
        out_dir = cfg.get("output_dir", out_dir)
        variant = cfg.get("variant", variant)
        scenario_names = cfg.get("scenarios", scenario_names)
    params = _params_from_args(args, params)
    if args.reps is not None:
        n_reps = args.reps
    if args.master_seed is not None:
        master_seed = args.master_seed
    if args.workers is not None:
        workers = args.workers
    if args.out is not None:
        out_dir = args.out
    if args.variant is not None:
        variant = args.variant
    if args.suite is not None:
        scenario_names = args.suite
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    try:
        scenarios = tuple(scenario_suite(scenario_names))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    config = SimConfig(
        params=apply_variant(params, variant),
        scenarios=scenarios,
        n_reps=n_reps,
        master_seed=master_seed,
    )
    result = run_oc(config, workers=int(workers) if workers else None)

    print(f"variant: {variant}   scenarios: {scenario_names} ({len(scenarios)})   reps: {n_reps}")
    print(f"{'metric':18s} {'mean':>10s} {'sd':>10s}")
    for metric, (mean, sd) in result.summary.items():
        print(f"{metric:18s} {mean:10.4f} {sd:10.4f}")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_atomic(out / "oc.csv", oc_to_csv(result))
        _write_atomic(out / "oc.json", oc_to_json(result))
        _write_atomic(out / "oc_long.csv", oc_long_csv(result))
        print(f"wrote oc.csv, oc.json, oc_long.csv to {out}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    try:
        matrices = scenario_suite(args.suite)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    ei = EquivalenceInterval(args.pt, args.eps1, args.eps2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for m in matrices:
        stem = m.label.replace("/", "_")
        _write_atomic(out / f"{stem}.csv", matrix_to_csv(m))
        _write_atomic(out / f"{stem}.json", scenario_to_json(m, ei))
    hist = classification_histogram(matrices, ei)
    order = ["all_safe", "1", "2", "3", ">3", "all_toxic", "no_mtdc"]
    report = {
        "suite": args.suite,
        "count": len(matrices),
        "target": ei.target,
        "interval": [ei.lower, ei.upper],
        "histogram": {k: hist.get(k, 0) for k in order if hist.get(k, 0) or k != "no_mtdc"},
    }
    _write_atomic(out / "classification.json", json.dumps(report, indent=2))
    for k, v in report["histogram"].items():
        print(f"{k:>9s}: {v}")
    print(f"wrote {len(matrices)} scenarios + classification.json to {out}")
    return EXIT_OK


def cmd_conduct(args) -> int:
    state = _load_state(args.state)
    print("interactive conduct; enter the DLT count for each recommended cohort, q to quit")
    while True:
        nxt = next_assignment(state)
        _print_grid(state)
        if nxt.coord is None:
            result = select_mtdc(state)
            sel = f"d{result.coord[0]}{result.coord[1]}" if result.coord else "none"
            print(f"trial stopped ({nxt.stop.value}); MTDC: {sel}")
            return EXIT_OK
        prompt = f"cohort {len(state.log) + 1} at d{nxt.coord[0]}{nxt.coord[1]} -- DLTs (0-{state.params.cohort_size})? "
        try:
            line = input(prompt)
        except EOFError:
            print()
            return EXIT_OK
        if line.strip().lower() in ("q", "quit", "exit"):
            return EXIT_OK
        try:
            dlt = int(line.strip())
            record_cohort(state, nxt.coord, dlt)
        except (ValueError, TrialError) as exc:
            print(f"  rejected: {exc}")
            continue
        _write_atomic(Path(args.state), state_to_json(state))


def cmd_serve(args) -> int:
    host, _, port = args.bind.partition(":")
    data_dir = args.data or os.environ.get(DATA_DIR_ENV) or "./ci3p3-data"
    server = service_mod.make_server(host or "127.0.0.1", int(port or 8866), data_dir)
    print(
        f"serving on http://{server.server_address[0]}:{server.server_address[1]} (data: {data_dir})",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ci3p3",
        description="Two-stage rule-based dose finding for dual-agent combination trials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="emit the pretabulated decision table")
    p.add_argument("--pt", type=float, default=0.3)
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--eps2", type=float, default=0.05)
    p.add_argument("--xi", type=float, default=0.95, help="exclusion threshold")
    p.add_argument("--nmax", type=int, default=12)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("init", help="create a fresh trial state file")
    p.add_argument("--config", help="JSON config file with design/grid")
    p.add_argument("--grid", default="4x4", help="IxJ levels, e.g. 3x3")
    p.add_argument("--pt", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--cohort", type=int)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--xi", type=float)
    p.add_argument("--path", choices=("P1", "P2", "P3"))
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("decide", help="record a cohort and/or print the next assignment")
    p.add_argument("--state", required=True)
    p.add_argument("--dc", help="treated combination i,j")
    p.add_argument("--dlt", type=int, help="DLT count for the recorded cohort")
    p.add_argument(
        "--what-if", dest="what_if", type=int,
        help="preview the decision for a hypothetical DLT count; no state change",
    )
    p.add_argument("--report", help="write the selection report JSON here when stopped")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("simulate", help="run an operating-characteristics campaign")
    p.add_argument("--config", help="JSON campaign config")
    p.add_argument("--suite", choices=("study1", "study2"))
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--reps", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--pt", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--cohort", type=int)
    p.add_argument("--max-n", dest="max_n", type=int)
    p.add_argument("--xi", type=float)
    p.add_argument("--path", choices=("P1", "P2", "P3"))
    p.add_argument("-o", "--out", help="directory for oc.csv / oc.json / oc_long.csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenarios", help="export a scenario suite and its classification")
    p.add_argument("--suite", required=True, choices=("study1", "study2"))
    p.add_argument("--pt", type=float, default=0.3)
    p.add_argument("--eps1", type=float, default=0.05)
    p.add_argument("--eps2", type=float, default=0.05)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("conduct", help="interactive cohort-by-cohort session")
    p.add_argument("--state", required=True)
    p.set_defaults(func=cmd_conduct)

    p = sub.add_parser("serve", help="run the HTTP conduct service")
    p.add_argument("--bind", default="127.0.0.1:8866")
    p.add_argument("--data", help=f"data directory (default ${DATA_DIR_ENV} or ./ci3p3-data)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StateIntegrityError as exc:
        print(f"state error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (ConfigError, ValueError, TrialError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
