"""Command-line driver: analyze, generate, inspect.

Exit codes: 0 success, 2 usage or configuration error, 3 input/format
error, 4 pipeline contract violation. LIDD_LOG selects log verbosity
(debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import lidd
from lidd import _core
from lidd.errors import ConfigError, ContractViolation, InputFormatError
from lidd.ingest import IngestConfig
from lidd.pipeline import RunConfig, run_from_inputs
from lidd.report import dumps_json, write_report
from lidd.similarity import SimilarityConfig
from lidd.synth import SyntheticSpec, write_corpus

logger = logging.getLogger(__name__)


def parse_duration(text: str) -> int:
    """Duration in seconds from '3600', '3600s', '60m', '1h' or '1d'."""
    raw = text.strip().lower()
    units = {"s": 1, "m": 60, "h": 3600, "d": 86400}
    factor = 1
    if raw and raw[-1] in units:
        factor = units[raw[-1]]
        raw = raw[:-1]
    try:
        seconds = int(raw) * factor
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid duration {text!r} (examples: 3600, 30m, 1h, 1d)"
        )
    if seconds <= 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return seconds


def _parse_injection(text: str) -> tuple[int, int, float]:
    try:
        g, s, m = text.split(":")
        return int(g), int(s), float(m)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid injection {text!r} (expected group:sensor:magnitude)"
        )


def _parse_group_sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid group sizes {text!r} (expected comma-separated integers)"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidd",
        description=(
            "Discover interconnection structure and divergent behavior across "
            "systems monitored by a shared set of sensors."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the full analysis pipeline")
    pa.add_argument("--input", action="append", required=True,
                    help="csv file or directory (repeatable)")
    pa.add_argument("--format", choices=("long", "wide"), default="long")
    pa.add_argument("--resample", type=parse_duration, default=3600,
                    metavar="DURATION", help="grid interval (default 1h)")
    pa.add_argument("--aggregator", choices=("median", "mean"), default="median")
    pa.add_argument("--despike-window", type=int, default=5, metavar="N")
    pa.add_argument("--max-gap", type=int, default=6, metavar="N")
    pa.add_argument("--min-coverage", type=float, default=0.5, metavar="F")
    pa.add_argument("--min-overlap", type=int, default=24, metavar="N")
    pa.add_argument("--undefined-policy", choices=("zero_with_flag", "invalidate"),
                    default="zero_with_flag")
    pa.add_argument("--linkage", choices=("average", "single", "complete"),
                    default="average")
    pa.add_argument("--alpha-system", type=float, default=0.007, metavar="F")
    pa.add_argument("--alpha-sensor", type=float, default=0.05, metavar="F")
    pa.add_argument("--alpha-rca", type=float, default=0.15, metavar="F")
    pa.add_argument("--out", default="lidd-out", metavar="DIR")
    pa.add_argument("--jobs", type=int, default=1, metavar="N")

    pg = sub.add_parser("generate", help="write a synthetic corpus with ground truth")
    pg.add_argument("--systems", type=int, default=36, metavar="N")
    pg.add_argument("--sensors", type=int, default=12, metavar="N")
    pg.add_argument("--samples", type=int, default=2880, metavar="N")
    pg.add_argument("--groups", type=int, default=5, metavar="N")
    pg.add_argument("--group-sizes", type=_parse_group_sizes, default=None,
                    metavar="A,B,...", help="per-group system counts")
    pg.add_argument("--noise", type=float, default=0.1, metavar="F")
    pg.add_argument("--missing-rate", type=float, default=0.0, metavar="F")
    pg.add_argument("--invert", action="append", type=_parse_injection, default=[],
                    metavar="G:S:M", help="invert sensor S couplings in group G "
                    "with magnitude M in [0,1] (repeatable)")
    pg.add_argument("--seed", type=int, default=0, metavar="N")
    pg.add_argument("--out", default="lidd-corpus", metavar="DIR")

    pi = sub.add_parser("inspect", help="print a section of a written report")
    pi.add_argument("report", help="path to report.json")
    pi.add_argument("query", choices=("clusters", "sensors", "rca"))
    return parser


def _configure_logging() -> None:
    level_name = os.environ.get("LIDD_LOG", "warning").strip().lower()
    levels = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "error": logging.ERROR,
    }
    logging.basicConfig(
        level=levels.get(level_name, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_analyze(args) -> int:
    cfg = RunConfig(
        inputs=tuple(args.input),
        fmt=args.format,
        ingest=IngestConfig(
            resample_interval=args.resample,
            aggregator=args.aggregator,
            despike_window=args.despike_window,
            max_gap_fill=args.max_gap,
            min_coverage=args.min_coverage,
        ),
        similarity=SimilarityConfig(
            min_overlap=args.min_overlap,
            undefined_policy=args.undefined_policy,
        ),
        linkage=args.linkage,
        alpha_system=args.alpha_system,
        alpha_sensor=args.alpha_sensor,
        alpha_rca=args.alpha_rca,
        out_dir=args.out,
        jobs=args.jobs,
    )
    cfg.validate()
    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    result = run_from_inputs(cfg)
    manifest = write_report(result.report, cfg.out_dir)
    elapsed = time.perf_counter() - t0
    meta = {
        "started_at": started.isoformat(),
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "duration_s": elapsed,
        "backend": _core.BACKEND,
        "version": lidd.__version__,
        "jobs": cfg.jobs,
    }
    Path(cfg.out_dir).joinpath("run_meta.json").write_text(
        dumps_json(meta), encoding="utf-8"
    )

    partition = result.system_partition
    print(f"systems: {len(result.report.system_ids)}  "
          f"sensors: {len(result.report.sensor_ids)}")
    print(f"clusters at alpha_system={cfg.alpha_system:g}: {partition.n_clusters}")
    for label, members in enumerate(partition.clusters):
        print(f"  cluster {label} (size {len(members)}): {' '.join(members)}")
    divergence = result.report.divergence
    flagged = [
        (label, sensor, psi_bar)
        for label, sensor, psi_bar, is_flagged in divergence.aggregate_rows()
        if is_flagged
    ]
    print(f"root-cause flags at alpha_rca={cfg.alpha_rca:g}: {len(flagged)}")
    for label, sensor, psi_bar in flagged:
        print(f"  cluster {label}: {sensor} (psi_bar={psi_bar:.4f})")
    print(f"report: {Path(cfg.out_dir) / 'report.json'} ({len(manifest)} artifacts)")
    return 0


def cmd_generate(args) -> int:
    spec = SyntheticSpec(
        n_systems=args.systems,
        n_sensors=args.sensors,
        n_samples=args.samples,
        n_groups=args.groups,
        group_sizes=args.group_sizes,
        injections=tuple(args.invert),
        noise=args.noise,
        missing_rate=args.missing_rate,
        seed=args.seed,
    )
    truth = write_corpus(spec, args.out)
    out = Path(args.out)
    print(f"corpus: {out / 'corpus.csv'}")
    print(f"truth:  {out / 'truth.json'}")
    print(f"groups: {truth['group_sizes']}  "
          f"suggested alpha_system: {truth['suggested_alpha_system']:g}")
    return 0


def _print_table(headers, rows) -> None:
    widths = [len(h) for h in headers]
    str_rows = [[str(c) for c in row] for row in rows]
    for row in str_rows:
        widths = [max(w, len(c)) for w, c in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(line)
    print("  ".join("-" * w for w in widths))
    for row in str_rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def cmd_inspect(args) -> int:
    try:
        with open(args.report, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise InputFormatError(f"cannot read report: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"report is not valid json: {exc}") from exc

    if args.query == "clusters":
        part = doc.get("system_partition") or {"threshold": None, "clusters": []}
        rows = [
            (label, len(members), " ".join(members))
            for label, members in enumerate(part["clusters"])
        ]
        _print_table(("cluster", "size", "members"), rows)
    elif args.query == "sensors":
        part = doc.get("overall_sensor_partition") or {"clusters": []}
        rows = [
            (label, len(members), " ".join(members))
            for label, members in enumerate(part["clusters"])
        ]
        _print_table(("sensor_cluster", "size", "members"), rows)
    else:  # rca
        div = doc.get("divergence")
        rows = []
        if div:
            labels = div["cluster_labels"]
            sensors = div["sensor_ids"]
            S = len(sensors)
            for a, label in enumerate(labels):
                for s, sensor in enumerate(sensors):
                    idx = a * S + s
                    if div["flags"][idx]:
                        rows.append((label, sensor, f"{div['aggregate'][idx]:.6f}"))
        _print_table(("cluster", "sensor", "psi_bar"), rows)
    return 0


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "generate":
            return cmd_generate(args)
        return cmd_inspect(args)
    except ConfigError as exc:
        print(f"lidd: configuration error: {exc}", file=sys.stderr)
        return 2
    except (InputFormatError, OSError) as exc:
        print(f"lidd: input error: {exc}", file=sys.stderr)
        return 3
    except ContractViolation as exc:
        print(f"lidd: pipeline error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
