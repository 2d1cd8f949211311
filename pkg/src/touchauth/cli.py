"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 config error, 3 internal invariant
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    FusionError,
    IngestError,
    InvariantError,
    SplitError,
    TrainingError,
)
from .harness import (
    FORMATS,
    DataSource,
    Report,
    SyntheticSpec,
    build_config,
    emit,
    fingerprint,
    generate_synthetic,
    parse_config_text,
    run_all,
    run_user,
    table_csv,
)
from .ingest import write_canonical

log = logging.getLogger("touchauth")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


def _add_source_flags(p):
    p.add_argument("--dataset", help="canonical fused CSV")
    p.add_argument("--bioident", help="stroke feature export (CSV)")
    p.add_argument("--hmog", help="motion snapshot export (CSV)")
    p.add_argument("--mapping", help="column-mapping file (field = source_column)")
    p.add_argument("--hmog-session", help="keep only this motion session")
    p.add_argument("--synthetic", action="store_true", help="use a synthetic dataset")
    p.add_argument("--config", help="key = value experiment config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--algo", choices=("rf", "svm", "knn", "all"))
    p.add_argument("--jobs", type=int, help="worker processes")


def _settings(args) -> dict:
    """Config-file settings overridden by command-line flags."""
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    flags = {
        "dataset": args.dataset,
        "bioident": args.bioident,
        "hmog": args.hmog,
        "mapping": args.mapping,
        "hmog_session": args.hmog_session,
        "seed": args.seed,
        "algo": args.algo,
        "jobs": args.jobs,
    }
    if any(flags[k] for k in ("dataset", "bioident", "hmog")) or args.synthetic:
        for key in [k for k in values if k in ("dataset", "bioident", "hmog", "synthetic")
                    or k.startswith("synthetic_")]:
            del values[key]
    if args.synthetic:
        values["synthetic"] = "true"
    values.update({k: str(v) for k, v in flags.items() if v is not None})
    return values


def cmd_fuse(args):
    src = DataSource(bioident=args.bioident, hmog=args.hmog, mapping=args.mapping,
                     hmog_session=args.hmog_session, pairing=args.pairing,
                     samples_per_user=args.samples_per_user)
    dataset = src.load(seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.csv").write_bytes(write_canonical(dataset))
    print(f"{len(dataset)} samples, {len(dataset.roster)} users -> {out / 'dataset.csv'}")


def cmd_synth(args):
    spec = SyntheticSpec(users=args.users, samples_per_user=args.samples_per_user,
                         separation=args.separation, noise=args.noise, seed=args.seed)
    dataset = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "dataset.csv").write_bytes(write_canonical(dataset))
    print(f"{len(dataset)} samples, {len(dataset.roster)} users -> {out / 'dataset.csv'}")


def cmd_run(args):
    config = build_config(_settings(args))
    report = run_all(config)
    for path in emit(report, args.out, args.format or FORMATS):
        log.info("wrote %s", path)
    _print_averages(report)


def cmd_eval_user(args):
    config = build_config(_settings(args))
    if config.source is None:
        raise ConfigError("no dataset source given")
    dataset = config.source.load(seed=config.seed)
    results = {}
    for algo in config.algorithms:
        results[algo] = {args.user: run_user(dataset, args.user, algo, config)}
    report = Report(results=results, config=config.echo(),
                    dataset_fingerprint=fingerprint(dataset))
    if args.out:
        emit(report, args.out, args.format or FORMATS)
    _print_averages(report)


def cmd_report(args):
    text = Path(args.results).read_text(encoding="utf-8")
    report = Report.from_json(text)
    _check_stored_averages(json.loads(text).get("averages", {}), report.averages)
    for path in emit(report, args.out, args.format or FORMATS):
        log.info("wrote %s", path)
    _print_averages(report)


def _check_stored_averages(stored, recomputed):
    for algo, metrics in recomputed.items():
        for name, value in metrics.items():
            if abs(stored.get(algo, {}).get(name, float("nan")) - value) > 1e-12:
                raise InvariantError(
                    f"stored {algo} {name} average disagrees with per-user results"
                )


def _print_averages(report):
    sys.stdout.write(table_csv(report))


def build_parser():
    parser = argparse.ArgumentParser(prog="touchauth", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="ingest stroke + motion exports into canonical CSV")
    p.add_argument("--bioident", required=True)
    p.add_argument("--hmog", required=True)
    p.add_argument("--mapping")
    p.add_argument("--hmog-session")
    p.add_argument("--pairing", choices=("identity", "shuffled"), default="identity")
    p.add_argument("--samples-per-user", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("synth", help="generate a synthetic fused dataset")
    p.add_argument("--users", type=int, default=51)
    p.add_argument("--samples-per-user", type=int, default=100)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("run", cmd_run, "full per-user experiment for every user"),
        ("eval-user", cmd_eval_user, "evaluate a single user"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_source_flags(p)
        p.add_argument("--out", required=(name == "run"), help="output directory")
        p.add_argument("--format", action="append", choices=("csv", "json", "json-like", "roc"))
        if name == "eval-user":
            p.add_argument("--user", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="re-emit outputs from a stored report.json")
    p.add_argument("--results", required=True, help="report.json from a previous run")
    p.add_argument("--out", required=True)
    p.add_argument("--format", action="append", choices=("csv", "json", "json-like", "roc"))
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (IngestError, FusionError, SplitError, TrainingError, OSError) as exc:
        log.error("input error: %s", exc)
        return EXIT_INPUT
    except (InvariantError, AssertionError) as exc:
        log.error("internal invariant failure: %s", exc)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
