"""Command-line entry point.

Four commands:

    gen     write a seeded random weight manifest (and optionally a random
            input manifest) for a config
    run     run the sparse engine on a weight/input manifest pair; print
            logits as JSON, optionally write a perf report
    verify  differential sweep: N seeded instances through the sparse
            engine and the dense reference, bit-exact comparison
    stats   run the engine and emit only the perf report

Exit codes: 0 success, 1 verification mismatch, 2 usage or file errors.
All outputs are deterministic given (config, seed, input files).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, RunConfig, load_config
from .manifest import (
    ManifestError,
    input_to_record,
    read_manifest,
    records_to_input,
    records_to_weights,
    weights_to_records,
    write_manifest,
)
from .model import random_input, random_weights, run_model
from .perf import PerfCounters
from .perf import report as perf_report
from .verify import verify_many


class _CliError(Exception):
    """User-facing error that maps to exit code 2."""


def _load_config(path) -> RunConfig:
    try:
        return load_config(path)
    except OSError as exc:
        raise _CliError(f"cannot read config {path}: {exc.strerror or exc}")
    except ConfigError as exc:
        raise _CliError(f"bad config {path}: {exc}")


def _read_manifest(path):
    try:
        return read_manifest(path)
    except OSError as exc:
        raise _CliError(f"cannot read manifest {path}: {exc.strerror or exc}")
    except ManifestError as exc:
        raise _CliError(f"bad manifest {path}: {exc}")


def _write_file(path, writer):
    try:
        writer(path)
    except OSError as exc:
        raise _CliError(f"cannot write {path}: {exc.strerror or exc}")


def cmd_gen(args) -> int:
    cfg = _load_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    weights = random_weights(cfg.model, seed)
    records = weights_to_records(cfg.model, weights)
    _write_file(args.weights, lambda p: write_manifest(p, records))
    print(f"wrote {len(records)} tensors to {args.weights} (seed {seed})")
    if args.input:
        x = random_input(cfg.model, seed)
        _write_file(args.input, lambda p: write_manifest(p, [input_to_record(x)]))
        print(f"wrote input tensor to {args.input} (seed {seed})")
    return 0


def _run_engine(args):
    cfg = _load_config(args.config)
    try:
        weights = records_to_weights(cfg.model, _read_manifest(args.weights))
        x = records_to_input(cfg.model, _read_manifest(args.input))
    except ManifestError as exc:
        raise _CliError(str(exc))
    counters = PerfCounters()
    logits = run_model(x, cfg.model, weights, counters=counters)
    rep = perf_report(counters, hw=cfg.hardware, power_watts=cfg.power_watts)
    return cfg, logits, rep


def _emit_report(rep, fmt: str, path) -> None:
    text = rep.to_json() if fmt == "json" else rep.to_csv()
    if path:
        _write_file(path, lambda p: open(p, "w", encoding="utf-8").write(text))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def cmd_run(args) -> int:
    cfg, logits, rep = _run_engine(args)
    print(
        json.dumps(
            {
                "logits": logits.data.tolist(),
                "width": logits.fmt.width,
                "scale_exp": logits.fmt.scale_exp,
                "argmax": int(logits.data.argmax()),
            },
            sort_keys=True,
        )
    )
    if args.report:
        _emit_report(rep, args.format, args.report)
    return 0


def cmd_stats(args) -> int:
    _, _, rep = _run_engine(args)
    _emit_report(rep, args.format, args.report)
    return 0


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    if args.seeds < 1:
        raise _CliError("--seeds must be >= 1")

    def on_result(result):
        if not result.ok:
            print(str(result))

    summary = verify_many(
        cfg.model, args.seeds, start_seed=cfg.seed, on_result=on_result
    )
    print(str(summary))
    return 0 if summary.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikedrive",
        description="Sparse spiking-transformer inference engine and "
        "performance model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a random weight manifest")
    gen.add_argument("--config", required=True, help="run config path")
    gen.add_argument("--weights", required=True, help="output manifest path")
    gen.add_argument("--input", help="also write a random input manifest here")
    gen.add_argument("--seed", type=int, default=None,
                     help="override the config's seed")
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run the sparse engine")
    run.add_argument("--config", required=True)
    run.add_argument("--weights", required=True)
    run.add_argument("--input", required=True)
    run.add_argument("--report", help="write the perf report here")
    run.add_argument("--format", choices=("json", "csv"), default="json")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser(
        "verify", help="differential sweep against the dense reference"
    )
    verify.add_argument("--config", required=True)
    verify.add_argument("--seeds", type=int, default=1, metavar="N")
    verify.set_defaults(func=cmd_verify)

    stats = sub.add_parser("stats", help="emit only the perf report")
    stats.add_argument("--config", required=True)
    stats.add_argument("--weights", required=True)
    stats.add_argument("--input", required=True)
    stats.add_argument("--report", help="write the report here instead of stdout")
    stats.add_argument("--format", choices=("json", "csv"), default="json")
    stats.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
