"""Command-line entry point: simulate / fit / validate / bank / predict / serve.

Every run prints its resolved seed on stderr, and every artifact written to
disk embeds the producing command line and seed (CSV as leading ``#`` comment
lines, JSON under a ``provenance`` key) so pipelines are reproducible.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .bank import build_bank, inspect_entry, load_bank_file, lookup, save_bank
from .data import MultiCohortDataset, PatientRecord, parse_cohort_csv, serialize_cohort_csv
from .errors import (
    BankLoadError,
    DataValidationError,
    FitError,
    MetricError,
    PcriskError,
    UsageError,
)
from .factors import BINARY_FACTORS, FULL_MASK, mask_from_factors
from .harness import external_validate, loco_cv, method_comparison, resolve_strategies
from .serialize import canonical_json, read_json
from .simulate import (
    apply_missingness,
    config_from_dict,
    config_to_dict,
    generate_cohorts,
    pbcg_like_preset,
)
from .strategies import PATTERN_TAILORED, STRATEGY_IDS, fit_strategy, model_to_json

PRESETS = ("pbcg-like",)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        raise UsageError(message)


def _auto_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**31))


def _command_line(argv: list[str]) -> str:
    return "pcrisk " + " ".join(shlex.quote(a) for a in argv)


def _provenance(argv: list[str], seed: int | None) -> dict:
    return {"command": _command_line(argv), "seed": seed}


def _print_seed(seed: int | None) -> None:
    print(f"seed: {'none' if seed is None else seed}", file=sys.stderr)


def _read_dataset(path: str) -> MultiCohortDataset:
    p = Path(path)
    if not p.exists():
        raise DataValidationError(f"file not found: {path}")
    return parse_cohort_csv(p.read_text(encoding="utf-8"))


def _write_dataset(path: str, dataset, argv: list[str], seed: int | None) -> None:
    header = f"# command: {_command_line(argv)}\n# seed: {seed}\n"
    Path(path).write_text(header + serialize_cohort_csv(dataset), encoding="utf-8")


def _write_report(path: str, obj: dict, argv: list[str], seed: int | None) -> None:
    obj = dict(obj)
    obj["provenance"] = _provenance(argv, seed)
    Path(path).write_text(canonical_json(obj, indent=2), encoding="utf-8")


def _parse_pattern(raw: str) -> int:
    try:
        mask = int(raw)
    except ValueError:
        names = [p.strip() for p in raw.split(",") if p.strip()]
        try:
            return mask_from_factors(names)
        except DataValidationError as exc:
            raise UsageError(str(exc)) from None
    if not (0 <= mask <= FULL_MASK):
        raise UsageError(f"pattern mask must be in [0, {FULL_MASK}]")
    return mask


def build_parser() -> _Parser:
    parser = _Parser(prog="pcrisk", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate synthetic training/validation CSVs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="generator config JSON file")
    src.add_argument("--preset", choices=PRESETS, help="built-in generator preset")
    p.add_argument("--out", help="output CSV path(s): train.csv[,valid.csv]")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--emit-config", help="write the resolved config JSON here")

    p = sub.add_parser("fit", help="fit one strategy and write the model JSON")
    p.add_argument("--method", required=True, choices=STRATEGY_IDS)
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--pattern", help="pattern mask (int) or comma-separated factor names")
    p.add_argument("--seed", type=int, help="seed (imputation); auto-generated if omitted")
    p.add_argument("--m", type=int, default=30, help="imputation count")
    p.add_argument("--cycles", type=int, default=10, help="chained-equation sweeps")
    p.add_argument("--donors", type=int, default=5, help="PMM donor count")

    p = sub.add_parser("validate", help="external validation or leave-one-cohort-out CV")
    p.add_argument("--train", required=True, help="training CSV")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--test", help="validation CSV")
    mode.add_argument("--loco", action="store_true", help="leave-one-cohort-out over --train")
    p.add_argument("--methods", default="all", help="'all' or comma-separated strategy ids")
    p.add_argument("--seed", type=int, help="seed; auto-generated if omitted")
    p.add_argument("--out", required=True, help="report JSON output path")
    p.add_argument("--cells-csv", help="also write a flat CSV of the result cells")
    p.add_argument("--compare", action="store_true",
                   help="add the cross-method comparison block (external mode only)")
    p.add_argument("--m", type=int, default=30, help="imputation count")
    p.add_argument("--cycles", type=int, default=10, help="chained-equation sweeps")
    p.add_argument("--donors", type=int, default=5, help="PMM donor count")

    p = sub.add_parser("bank", help="build or inspect the 1,024-pattern model bank")
    bank_sub = p.add_subparsers(dest="bank_command", required=True)
    b = bank_sub.add_parser("build", help="fit all 1,024 pattern models")
    b.add_argument("--train", required=True, help="training CSV")
    b.add_argument("--out", required=True, help="bank file output path")
    b = bank_sub.add_parser("inspect", help="odds-ratio summary for one pattern")
    b.add_argument("--bank", required=True, help="bank file")
    b.add_argument("--pattern", required=True,
                   help="pattern mask (int) or comma-separated factor names")
    b.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("predict", help="single prediction from a bank file")
    p.add_argument("--bank", required=True, help="bank file")
    p.add_argument("--psa", type=float, required=True)
    p.add_argument("--age", type=float, required=True)
    p.add_argument("--dre", choices=("normal", "abnormal"))
    p.add_argument("--volume", type=float)
    for f in BINARY_FACTORS:
        p.add_argument(f"--{f.replace('_', '-')}", type=int, choices=(0, 1), dest=f)

    p = sub.add_parser("serve", help="run the HTTP prediction service")
    p.add_argument("--bank", help="bank file (default: env HR_BANK)")
    p.add_argument("--listen", help="host:port (default: env HR_LISTEN or 127.0.0.1:8000)")
    p.add_argument("--cors-origin", help="allowed browser origin for CORS")

    return parser


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_simulate(args, argv: list[str]) -> int:
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise DataValidationError(f"file not found: {args.config}")
        preset = config_from_dict(read_json(cfg_path))
    else:
        preset = pbcg_like_preset()
    config = preset.config
    seed = args.seed if args.seed is not None else config.seed
    if seed != config.seed:
        config = replace(config, seed=seed)
    _print_seed(seed)
    if args.emit_config:
        emitted = config_to_dict(type(preset)(config=config, plan=preset.plan))
        _write_report(args.emit_config, emitted, argv, seed)
        print(f"wrote {args.emit_config}")
    if not args.out:
        if not args.emit_config:
            raise UsageError("simulate needs --out and/or --emit-config")
        return 0
    paths = [p.strip() for p in args.out.split(",") if p.strip()]
    full = generate_cohorts(config)
    observed = apply_missingness(full, preset.plan, seed)
    train_ids = set(config.training_cohorts())
    if len(paths) == 1:
        _write_dataset(paths[0], observed, argv, seed)
        print(f"wrote {paths[0]} ({len(observed)} records)")
        return 0
    if len(paths) != 2:
        raise UsageError("--out takes one or two comma-separated paths")
    if not config.validation_cohorts():
        raise DataValidationError("config defines no validation cohorts for the second path")
    train = MultiCohortDataset(r for r in observed if r.cohort_id in train_ids)
    valid = MultiCohortDataset(r for r in observed if r.cohort_id not in train_ids)
    _write_dataset(paths[0], train, argv, seed)
    _write_dataset(paths[1], valid, argv, seed)
    print(f"wrote {paths[0]} ({len(train)} records) and {paths[1]} ({len(valid)} records)")
    return 0


def _cmd_fit(args, argv: list[str]) -> int:
    training = _read_dataset(args.train)
    pattern = None
    if args.method in PATTERN_TAILORED:
        if args.pattern is None:
            raise UsageError(f"--pattern is required for {args.method}")
        pattern = _parse_pattern(args.pattern)
    elif args.pattern is not None:
        raise UsageError(f"{args.method} is pattern-free; drop --pattern")
    seed = args.seed if args.seed is not None else _auto_seed()
    _print_seed(seed)
    model = fit_strategy(
        args.method,
        training,
        pattern=pattern,
        seed=seed,
        imputation_config={"m": args.m, "cycles": args.cycles, "donors": args.donors},
    )
    obj = model_to_json(model)
    obj["training_fingerprint"] = training.fingerprint()
    _write_report(args.out, obj, argv, seed)
    print(f"wrote {args.out}")
    return 0


def _flatten_external(report_obj: dict) -> str:
    rows = ["strategy,status,n,auc,auc_lo,auc_hi,cil_pct,cil_lo_pct,cil_hi_pct"]
    for name, r in sorted(report_obj["strategies"].items()):
        if r["status"] == "ok":
            rows.append(
                f"{name},ok,{r['n']},{r['auc']},{r['auc_ci'][0]},{r['auc_ci'][1]},"
                f"{r['cil_pct']},{r['cil_ci_pct'][0]},{r['cil_ci_pct'][1]}"
            )
        else:
            rows.append(f"{name},failed,,,,,,,")
    return "\n".join(rows) + "\n"


def _flatten_loco(report_obj: dict) -> str:
    rows = ["strategy,cohort,status,auc,cil_pct"]
    for strategy, by_cohort in sorted(report_obj["cells"].items()):
        for cohort, cell in sorted(by_cohort.items()):
            auc = "" if cell["auc"] is None else cell["auc"]
            cilv = "" if cell["cil_pct"] is None else cell["cil_pct"]
            rows.append(f"{strategy},{cohort},{cell['status']},{auc},{cilv}")
    return "\n".join(rows) + "\n"


def _cmd_validate(args, argv: list[str]) -> int:
    training = _read_dataset(args.train)
    methods = "all" if args.methods == "all" else [m.strip() for m in args.methods.split(",")]
    strategies = resolve_strategies(methods)
    seed = args.seed if args.seed is not None else _auto_seed()
    _print_seed(seed)
    imputation_config = {"m": args.m, "cycles": args.cycles, "donors": args.donors}
    if args.loco:
        report = loco_cv(training, strategies, seed, imputation_config=imputation_config)
        obj = report.to_json()
        flat = _flatten_loco(obj)
    else:
        validation = _read_dataset(args.test)
        report = external_validate(
            training, validation, strategies, seed, imputation_config=imputation_config
        )
        obj = report.to_json()
        if args.compare:
            comparison = method_comparison(
                training, validation, strategies, seed, imputation_config=imputation_config
            )
            obj["comparison"] = comparison.to_json()
        flat = _flatten_external(obj)
    _write_report(args.out, obj, argv, seed)
    print(f"wrote {args.out}")
    if args.cells_csv:
        Path(args.cells_csv).write_text(
            f"# command: {_command_line(argv)}\n# seed: {seed}\n" + flat, encoding="utf-8"
        )
        print(f"wrote {args.cells_csv}")
    return 0


def _cmd_bank(args, argv: list[str]) -> int:
    if args.bank_command == "build":
        training = _read_dataset(args.train)
        _print_seed(None)
        bank = build_bank(training, provenance=_provenance(argv, None))
        Path(args.out).write_bytes(save_bank(bank))
        print(
            f"wrote {args.out}: {bank.fittable_count()} fittable of 1024 patterns, "
            f"training n={bank.training_n}"
        )
        return 0
    bank = load_bank_file(args.bank)
    _print_seed(None)
    pattern = _parse_pattern(args.pattern)
    info = inspect_entry(bank, pattern)
    if args.json:
        print(canonical_json(info, indent=2), end="")
        return 0
    if not info["fittable"]:
        print(f"pattern {pattern}: unfittable ({info['reason']})")
        return 0
    print(f"pattern {pattern} ({', '.join(info['factors']) or 'psa+age only'})")
    print(f"n={info['n']} cohorts={len(info['cohorts'])}")
    print(f"{'term':<28}{'OR':>8}{'95% CI':>20}{'p':>10}")
    for row in info["terms"]:
        ci = f"({row['ci_low']:.2f}, {row['ci_high']:.2f})"
        print(f"{row['term']:<28}{row['odds_ratio']:>8.2f}{ci:>20}{row['p_value']:>10.2g}")
    return 0


def _cmd_predict(args, argv: list[str]) -> int:
    bank = load_bank_file(args.bank)
    _print_seed(None)
    record = PatientRecord(
        cohort_id="request",
        age=args.age,
        psa=args.psa,
        outcome=0,
        dre=args.dre,
        volume=args.volume,
        **{f: getattr(args, f) for f in BINARY_FACTORS},
    )
    result = lookup(bank, record)
    print(
        canonical_json(
            {
                "risk": result.risk,
                "pattern": result.pattern,
                "requested_pattern": result.requested_pattern,
                "fallback": result.fallback,
                "n": result.n,
                "cohorts": len(result.cohorts),
                "model_version": bank.training_fingerprint,
                "warnings": list(result.warnings),
            },
            indent=2,
        ),
        end="",
    )
    return 0


def _cmd_serve(args, argv: list[str]) -> int:
    import os

    import uvicorn

    from .service import create_app

    bank_path = args.bank or os.environ.get("HR_BANK")
    listen = args.listen or os.environ.get("HR_LISTEN") or "127.0.0.1:8000"
    _print_seed(None)
    bank = load_bank_file(bank_path) if bank_path else None
    if bank is None:
        print("warning: serving without a bank (degraded health)", file=sys.stderr)
    host, _, port = listen.partition(":")
    app = create_app(bank, cors_origin=args.cors_origin)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000), log_level="warning")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "validate": _cmd_validate,
    "bank": _cmd_bank,
    "predict": _cmd_predict,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataValidationError, BankLoadError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return 2
    except (FitError, MetricError, np.linalg.LinAlgError) as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return 3
    except PcriskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
