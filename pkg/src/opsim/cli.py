"""Command-line interface.

Subcommands: ``validate`` a config, ``run`` a single scenario, ``sweep`` an
axis over seeds and modes, ``estimate`` matrices from an activity log, and
``export-defaults`` for the embedded config and matrix set. All outputs are
plot-agnostic CSV/JSON written to --out; identical inputs produce
byte-identical outputs regardless of --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from .core import (
    ConfigError,
    ScenarioConfig,
    parse_mode,
    validate_config,
)
from .contact import write_contact_trace
from .engine import SWEEP_AXES, run_scenario, run_sweep
from .estimation import ActivityLogError, discretize, estimate_matrices, read_activity_csv
from .metrics import report_json_dict, write_outcomes_csv, write_sweep_csv
from .mobility import (
    DEFAULT_SCHEDULE,
    MATRIX_VARIANTS,
    MatrixError,
    default_matrix_set_raw,
    load_matrix_file,
    normalize_matrix_set,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2


class CliError(Exception):
    """Input problem with a user-facing message (exit code 2)."""


def _default_threads() -> int:
    env = os.environ.get("OPSIM_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def parse_seed_range(text: str) -> list[int]:
    """Inclusive 'A..B' seed range, or a single seed."""
    text = text.strip()
    if ".." in text:
        first, _, last = text.partition("..")
        try:
            a, b = int(first), int(last)
        except ValueError:
            raise CliError(f"bad seed range {text!r}; expected A..B") from None
        if b < a:
            raise CliError(f"bad seed range {text!r}; end before start")
        return list(range(a, b + 1))
    try:
        return [int(text)]
    except ValueError:
        raise CliError(f"bad seed range {text!r}; expected A..B or one integer") from None


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _parse_override_value(key: str, raw: str):
    if key == "mode":
        return parse_mode(raw)
    if key in ("grid.side_cells",):
        return int(raw)
    if key in ("grid.cell_size_ft",):
        return float(raw)
    ftype = _FIELD_TYPES.get(key)
    if ftype is None:
        raise CliError(f"unknown override key {key!r}")
    if ftype in ("bool", bool):
        low = raw.strip().lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise CliError(f"override {key} expects true/false, got {raw!r}")
    if ftype in ("int", int):
        return int(raw)
    if ftype in ("float", float):
        return float(raw)
    raise CliError(f"override key {key!r} is not settable from the command line")


def apply_overrides(config: ScenarioConfig, pairs: list[str]) -> ScenarioConfig:
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"bad --set {pair!r}; expected KEY=VALUE")
        key, _, raw = pair.partition("=")
        key = key.strip()
        try:
            value = _parse_override_value(key, raw.strip())
        except ValueError:
            raise CliError(f"bad value for override {key}: {raw!r}") from None
        if key.startswith("grid."):
            setattr(config.grid, key.split(".", 1)[1], value)
        else:
            setattr(config, key, value)
    return config


def load_config(args) -> ScenarioConfig:
    path = getattr(args, "config", None)
    if path is None:
        config = ScenarioConfig()
    else:
        p = Path(path)
        if not p.is_file():
            raise CliError(f"config file not found: {path}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed config JSON in {path}: {exc}") from None
        config = ScenarioConfig.from_json_dict(data)
    return apply_overrides(config, getattr(args, "set", None) or [])


def load_matrices(args):
    path = getattr(args, "matrices", None)
    if path:
        if not Path(path).is_file():
            raise CliError(f"matrix file not found: {path}")
        matrices, warnings = load_matrix_file(path)
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        return matrices
    variant = getattr(args, "matrix_variant", "printed")
    matrices, _ = normalize_matrix_set(default_matrix_set_raw(variant))
    return matrices


def _require_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    config = load_config(args)
    violations = validate_config(config)
    for v in violations:
        print(f"{v.severity}: {v.message}")
    if any(v.is_error for v in violations):
        return EXIT_INPUT
    if not violations:
        print("ok")
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args)
    if args.mode:
        modes = [parse_mode(m) for m in args.mode.split(",") if m]
        if len(modes) != 1:
            raise CliError("run takes exactly one --mode")
        config.mode = modes[0]
    errors = [v for v in validate_config(config) if v.is_error]
    if errors:
        for v in errors:
            print(f"error: {v.message}", file=sys.stderr)
        return EXIT_INPUT
    matrices = load_matrices(args)
    out = _require_out(args)

    from .engine import EngineOptions

    options = EngineOptions(record_contacts=bool(args.trace))
    result = run_scenario(config, matrices=matrices, options=options)
    stem = f"run_{config.mode.value}_s{config.seed}"
    write_outcomes_csv(
        out / f"{stem}.csv", result.outcomes, config.mode, config.seed, config.step_minutes
    )
    _write_json(
        out / "metrics.json",
        report_json_dict(result.metrics(config.step_minutes), config.mode, config.seed),
    )
    if args.trace:
        write_contact_trace(out / f"contacts_{config.mode.value}_s{config.seed}.csv",
                            result.contact_trace or [])
    print(f"wrote {stem}.csv and metrics.json to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args)
    errors = [v for v in validate_config(config) if v.is_error]
    if errors:
        for v in errors:
            print(f"error: {v.message}", file=sys.stderr)
        return EXIT_INPUT
    if args.axis not in SWEEP_AXES:
        raise CliError(f"unknown --axis {args.axis!r}; expected patients or participation")
    modes = [parse_mode(m) for m in (args.mode or "dtn,hybrid,upn").split(",") if m]
    seeds = parse_seed_range(args.seeds)
    matrices = load_matrices(args)
    out = _require_out(args)

    result = run_sweep(
        config, args.axis, seeds, modes, matrices=matrices, threads=args.threads
    )
    csv_path = out / f"sweep_{args.axis}.csv"
    write_sweep_csv(csv_path, result.rows())
    _write_json(out / "sweep_manifest.json", result.manifest)
    print(f"wrote {csv_path.name} and sweep_manifest.json to {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    if not Path(args.logs).is_file():
        raise CliError(f"activity log not found: {args.logs}")
    logs = read_activity_csv(args.logs)
    sequences = [discretize(log, args.interval_minutes) for log in logs]
    matrices, warnings = estimate_matrices(
        sequences, DEFAULT_SCHEDULE, interval_minutes=args.interval_minutes,
        method=args.method,
    )
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = _require_out(args)
    path = out / "estimated_matrices.json"
    _write_json(path, matrices.to_json_dict())
    print(f"wrote {path.name} to {out}")
    return EXIT_OK


def cmd_export_defaults(args) -> int:
    out = _require_out(args)
    _write_json(out / "default_config.json", ScenarioConfig().to_json_dict())
    raw = default_matrix_set_raw(args.matrix_variant)
    _write_json(out / "default_matrices.json", raw.to_json_dict())
    print(f"wrote default_config.json and default_matrices.json to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opsim",
        description="Monte-Carlo simulator for opportunistic message "
        "dissemination in rural patient-monitoring networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, matrices=False, out=True):
        if config:
            p.add_argument("--config", help="scenario config JSON (defaults when omitted)")
            p.add_argument(
                "--set", action="append", metavar="KEY=VALUE",
                help="override a config field (repeatable)",
            )
        if matrices:
            p.add_argument("--matrices", help="transition-matrix JSON to use")
            p.add_argument(
                "--matrix-variant", choices=MATRIX_VARIANTS, default="printed",
                help="bundled matrix variant when --matrices is not given",
            )
        if out:
            p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("validate", help="check a config and print violations")
    add_common(p, out=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one scenario and write outcome CSV + metrics")
    add_common(p, matrices=True)
    p.add_argument("--mode", help="routing mode override (dtn, hybrid, or upn)")
    p.add_argument("--trace", action="store_true", help="also write the contact trace CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="sweep an axis over seeds and modes")
    add_common(p, matrices=True)
    p.add_argument("--axis", required=True, help="patients or participation")
    p.add_argument("--mode", help="comma list of modes (default dtn,hybrid,upn)")
    p.add_argument("--seeds", default="0..99", help="inclusive seed range A..B")
    p.add_argument(
        "--threads", type=int, default=_default_threads(),
        help="worker processes (default 1 or $OPSIM_THREADS)",
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("estimate", help="estimate matrices from an activity-log CSV")
    p.add_argument("--logs", required=True, help="activity log CSV")
    p.add_argument("--interval-minutes", type=int, default=30)
    p.add_argument("--method", choices=("pooled", "averaged"), default="pooled")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("export-defaults", help="write the embedded config and matrices")
    p.add_argument(
        "--matrix-variant", choices=MATRIX_VARIANTS, default="printed",
        help="which bundled matrix variant to export",
    )
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_export_defaults)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ConfigError, MatrixError, ActivityLogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # runtime failure, not an input problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
