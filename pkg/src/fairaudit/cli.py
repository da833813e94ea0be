"""Command-line interface: ``run``, ``validate``, and ``synth`` subcommands.

Exit codes: 0 the audit ran (verdicts never gate unless
--fail-on-violation is set, which exits 1 on any violation), 2 input
error, 3 internal error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .audit import AuditOptions, audit_dataset, audit_predictions
from .data import load_dataset, schema_from_file, schema_to_toml, write_dataset_csv
from .errors import AuditError
from .model import TrainConfig, load_external_predictions
from .report import render_markdown, write_json
from .synth import SynthConfig, generate, synth_schema

REPORT_DIR_ENV = "FAIRAUDIT_REPORT_DIR"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairaudit",
        description=(
            "Audit a binary classifier for statistically significant group "
            "disparities under fourteen fairness definitions."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full audit and write report files")
    run.add_argument("--data", type=Path, help="CSV data file")
    run.add_argument("--schema", type=Path, help="TOML/JSON schema for --data")
    run.add_argument(
        "--predictions",
        type=Path,
        help="prediction CSV from an external model (skips training)",
    )
    run.add_argument("--k", type=int, default=250, help="fold count (default 250)")
    run.add_argument("--alpha", type=float, default=0.05, help="significance level")
    run.add_argument("--bins", type=int, default=10, help="calibration score bins")
    run.add_argument("--seed", type=int, default=0, help="fold shuffle / trainer seed")
    run.add_argument("--threshold", type=float, default=0.5, help="decision threshold")
    run.add_argument(
        "--include-race",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="use the group attribute as a model feature (default on)",
    )
    run.add_argument(
        "--stratified",
        action="store_true",
        help="stratify folds by outcome and group (default off)",
    )
    run.add_argument(
        "--fail-on-violation",
        action="store_true",
        help="exit 1 when any metric verdict is a violation",
    )
    run.add_argument("--iterations", type=int, default=600, help="trainer iterations")
    run.add_argument(
        "--learning-rate", type=float, default=0.2, help="trainer learning rate"
    )
    run.add_argument("--l2", type=float, default=1e-4, help="trainer L2 strength")
    run.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"report directory (default ${REPORT_DIR_ENV} or the working directory)",
    )

    validate = sub.add_parser("validate", help="check a data file against a schema")
    validate.add_argument("--data", type=Path, required=True)
    validate.add_argument("--schema", type=Path, required=True)

    synth = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    synth.add_argument("--n", type=int, default=5000)
    synth.add_argument("--d", type=int, default=4)
    synth.add_argument(
        "--delta",
        type=float,
        default=0.0,
        help="log-odds penalty applied to the protected group (0 = exchangeable)",
    )
    synth.add_argument("--group-mix", type=float, default=0.5)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", type=Path, required=True, help="output CSV path")
    synth.add_argument(
        "--schema-out",
        type=Path,
        default=None,
        help="where to write the matching schema (default: alongside --out)",
    )
    return parser


def _report_dir(args) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(REPORT_DIR_ENV)
    return Path(env) if env else Path.cwd()


def _cmd_run(args) -> int:
    if args.data is None and args.predictions is None:
        print("error: provide --data (with --schema) or --predictions", file=sys.stderr)
        return 2
    options = AuditOptions(
        k=args.k,
        alpha=args.alpha,
        bins=args.bins,
        seed=args.seed,
        threshold=args.threshold,
        include_group=args.include_race,
        stratified=args.stratified,
        train=TrainConfig(
            learning_rate=args.learning_rate,
            iterations=args.iterations,
            l2=args.l2,
            seed=args.seed,
        ),
    )
    dataset = None
    dropped = None
    reasons = None
    if args.data is not None:
        if args.schema is None:
            print("error: --data requires --schema", file=sys.stderr)
            return 2
        loaded = load_dataset(args.data, schema_from_file(args.schema))
        dataset = loaded.dataset
        dropped = loaded.dropped
        reasons = loaded.drop_reasons

    if args.predictions is not None:
        predictions = load_external_predictions(args.predictions)
        report = audit_predictions(
            predictions,
            options,
            dataset=dataset,
            model_id=f"external:{args.predictions.name}",
        )
    else:
        report = audit_dataset(
            dataset,
            options,
            model_id="builtin_logistic",
            dropped_rows=dropped,
            drop_reasons=reasons,
        )

    out_dir = _report_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    md_path = out_dir / "report.md"
    write_json(report, json_path)
    md_path.write_text(render_markdown(report), encoding="utf-8")

    acc = "n/a" if report.model_accuracy is None else f"{report.model_accuracy:.3f}"
    print(f"{report.model_id}  accuracy {acc}")
    for verdict in report.verdicts:
        print(f"  {verdict.metric_id}: {verdict.verdict}")
    print(f"wrote {json_path} and {md_path}")

    if args.fail_on_violation and report.violations():
        print(
            f"violations detected: {', '.join(report.violations())}", file=sys.stderr
        )
        return 1
    return 0


def _cmd_validate(args) -> int:
    schema = schema_from_file(args.schema)
    result = load_dataset(args.data, schema)
    d = result.dataset
    print(
        f"ok: {d.n} rows ({d.n_protected} protected, {d.n_unprotected} unprotected), "
        f"{len(d.feature_names)} encoded features, {result.dropped} dropped"
    )
    if result.drop_reasons:
        for reason, count in sorted(result.drop_reasons.items()):
            print(f"  dropped {count}: {reason}")
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(
        n=args.n,
        d=args.d,
        group_intercept_shift=args.delta,
        group_mix=args.group_mix,
        seed=args.seed,
    )
    dataset = generate(config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(dataset, args.out)
    schema_path = args.schema_out or args.out.with_suffix(".schema.toml")
    schema_path.write_text(schema_to_toml(synth_schema(config)), encoding="utf-8")
    print(f"wrote {args.out} ({dataset.n} rows) and {schema_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "validate": _cmd_validate, "synth": _cmd_synth}
    try:
        return handlers[args.command](args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
