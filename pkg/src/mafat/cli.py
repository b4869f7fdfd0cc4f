"""Command-line front end: ``mafat {plan,predict,layers,sweep,simulate}``.

Exit codes: 0 success / fit, 2 no configuration fits (fallback returned), 1 error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import kernels
from .executor import (PREDICTOR_MASK, ScheduleMode, first_difference, monolithic_macs,
                       peak_footprint, random_input, random_weights, run_mafat,
                       run_monolithic, trace_to_csv)
from .geometry import build_tile_chain
from .network import BUILTINS, MB, NetworkError, NetworkSpec, layer_sizes, parse_network, to_mb
from .predictor import ConfigError, MemoryReport, PredictorParams, group_spans
from .search import MafatConfig, SearchSpace, get_config, sweep_space

EXIT_OK, EXIT_ERROR, EXIT_FALLBACK = 0, 1, 2
DEFAULT_MAX_ELEMENTS = 1 << 26


class UsageError(Exception):
    pass


def parse_memory(text: str) -> int:
    """``96`` or ``96MB`` -> 96 * 2**20 bytes; ``1234B`` -> 1234 bytes."""
    t = text.strip().upper()
    try:
        if t.endswith("MB"):
            value = float(t[:-2]) * MB
        elif t.endswith("B"):
            value = float(t[:-1])
        else:
            value = float(t) * MB
    except ValueError:
        raise UsageError(f"bad memory size {text!r}") from None
    if value <= 0:
        raise UsageError(f"memory size must be positive, got {text!r}")
    return int(round(value))


def load_network(args) -> NetworkSpec:
    if args.builtin:
        return BUILTINS[args.builtin]()
    try:
        text = Path(args.network).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read network file: {exc}") from None
    return parse_network(text)


def predictor_params(args) -> PredictorParams:
    bias_mb = args.bias
    if bias_mb is None and os.environ.get("MAFAT_BIAS_MB"):
        try:
            bias_mb = float(os.environ["MAFAT_BIAS_MB"])
        except ValueError:
            raise UsageError("MAFAT_BIAS_MB must be a number") from None
    if bias_mb is None:
        return PredictorParams(strict_weights=args.strict_weights)
    if bias_mb < 0:
        raise UsageError("bias must be non-negative")
    return PredictorParams(bias_bytes=int(round(bias_mb * MB)), strict_weights=args.strict_weights)


def load_space(path: Optional[str]) -> SearchSpace:
    if not path:
        return SearchSpace()
    try:
        return SearchSpace.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"bad search space file {path}: {exc}") from None


def _report_lines(report: MemoryReport) -> List[str]:
    lines = []
    for g, grp in enumerate(report.groups):
        w = grp.witness
        lines.append(
            f"group {g} layers {grp.top}-{grp.bottom} {grp.tiling[0]}x{grp.tiling[1]}: "
            f"max {to_mb(grp.group_max_bytes)} MB at layer {w.layer} tile ({w.tile[0]},{w.tile[1]}) "
            f"[scratch {to_mb(w.scratch)} + output {to_mb(w.output)} + 2 x input {to_mb(w.input)}]")
    lines.append(f"bias: {to_mb(report.bias_bytes)} MB")
    lines.append(f"predicted: {to_mb(report.network_max_bytes)} MB ({report.network_max_bytes} B)")
    return lines


def _emit_csv(rows, header):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    sys.stdout.write(buf.getvalue())


def cmd_plan(args) -> int:
    net = load_network(args)
    limit = parse_memory(args.memory_limit)
    result = get_config(net, limit, load_space(args.space), predictor_params(args))
    if args.format == "json":
        print(json.dumps({"config": str(result.config), "fit": result.fit,
                          "memory_limit_bytes": limit, "report": result.report.as_dict()},
                         indent=2))
    elif args.format == "csv":
        _emit_csv([[str(result.config), str(result.fit).lower(), limit,
                    result.report.network_max_bytes, to_mb(result.report.network_max_bytes)]],
                  ["config", "fit", "memory_limit_bytes", "predicted_bytes", "predicted_mb"])
    else:
        print(f"config: {result.config}")
        print(f"fit: {str(result.fit).lower()}")
        for line in _report_lines(result.report):
            print(line)
    if not result.fit:
        print(f"no configuration fits in {to_mb(limit)} MB; returning fallback {result.config}",
              file=sys.stderr)
    return EXIT_OK if result.fit else EXIT_FALLBACK


def cmd_predict(args) -> int:
    net = load_network(args)
    config = MafatConfig.parse(args.config)
    report = config.predict(net, predictor_params(args))
    if args.format == "json":
        print(json.dumps({"config": str(config), "report": report.as_dict()}, indent=2))
    elif args.format == "csv":
        rows = [[g, grp.top, grp.bottom, f"{grp.tiling[0]}x{grp.tiling[1]}", grp.group_max_bytes,
                 grp.witness.layer, grp.witness.tile[0], grp.witness.tile[1]]
                for g, grp in enumerate(report.groups)]
        _emit_csv(rows, ["group", "top", "bottom", "tiling", "group_max_bytes",
                         "witness_layer", "tile_i", "tile_j"])
    else:
        print(f"config: {config}")
        for line in _report_lines(report):
            print(line)
    return EXIT_OK


def layer_table_rows(net: NetworkSpec) -> List[List[str]]:
    rows = []
    for r in layer_sizes(net):
        w, h, c = net.in_dims(r.layer)
        rows.append([str(r.layer), net.layers[r.layer].kind.label, f"{w}x{h}x{c}",
                     str(r.weights_bytes), to_mb(r.input_bytes), to_mb(r.output_bytes),
                     to_mb(r.scratch_bytes), to_mb(r.total_bytes)])
    return rows


LAYER_HEADER = ["layer", "type", "dimensions", "weights", "input", "output", "scratch", "total"]


def cmd_layers(args) -> int:
    net = load_network(args)
    rows = layer_table_rows(net)
    if args.format == "csv":
        _emit_csv(rows, LAYER_HEADER)
    elif args.format == "json":
        print(json.dumps([{"layer": r.layer, "type": net.layers[r.layer].kind.label,
                           "dimensions": list(net.in_dims(r.layer)),
                           "weights_bytes": r.weights_bytes, "input_bytes": r.input_bytes,
                           "output_bytes": r.output_bytes, "scratch_bytes": r.scratch_bytes,
                           "total_bytes": r.total_bytes} for r in layer_sizes(net)], indent=2))
    else:
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(LAYER_HEADER)]
        print("  ".join(h.rjust(w) for h, w in zip(LAYER_HEADER, widths)))
        for r in rows:
            print("  ".join(v.rjust(w) for v, w in zip(r, widths)))
        print("(sizes in MB = 2^20 bytes, weights in bytes)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    net = load_network(args)
    space = load_space(args.space)
    overrides = {}
    if args.cuts:
        overrides["cuts"] = tuple(None if c.lower() == "nocut" else int(c) for c in args.cuts.split(","))
    if args.top_tiles:
        overrides["top_tiles"] = tuple(int(t) for t in args.top_tiles.split(","))
    if args.bottom_tiles:
        overrides["bottom_tiles"] = tuple(int(t) for t in args.bottom_tiles.split(","))
    if args.no_prune:
        overrides["prune_from_cut"] = None
    if overrides:
        space = SearchSpace(**{**space.__dict__, **overrides})
    rows = sweep_space(net, space, predictor_params(args))
    if args.format == "json":
        print(json.dumps([{"config": str(c), "predicted_bytes": b} for c, b in rows], indent=2))
    elif args.format == "csv":
        _emit_csv([[str(c), b, to_mb(b)] for c, b in rows], ["config", "predicted_bytes", "predicted_mb"])
    else:
        for c, b in rows:
            print(f"{str(c):<14} {to_mb(b):>9} MB")
    return EXIT_OK


def _dump_tiles(net: NetworkSpec, config: MafatConfig) -> list:
    out = []
    for g, ((top, bottom), (n, m)) in enumerate(zip(group_spans(net, config.cut), config.groups())):
        tasks = []
        for i in range(n):
            for j in range(m):
                chain = build_tile_chain(net, top, bottom, n, m, i, j)
                tasks.append({"tile": [i, j], "layers": [
                    {"layer": l, "input": chain.inputs[l].as_dict(), "output": chain.outputs[l].as_dict()}
                    for l in chain.layers()]})
        out.append({"group": g, "top": top, "bottom": bottom, "tiling": [n, m], "tasks": tasks})
    return out


def cmd_simulate(args) -> int:
    net = load_network(args)
    config = MafatConfig.parse(args.config)
    group_spans(net, config.cut)
    elements = sum(net.widths[l] * net.heights[l] * net.channels[l] for l in range(len(net) + 1))
    if elements > args.max_elements:
        raise UsageError(f"network has {elements} feature-map elements, above the guard of "
                         f"{args.max_elements}; raise --max-elements to run anyway")
    if args.dump_tiles:
        print(json.dumps(_dump_tiles(net, config), indent=2))
        return EXIT_OK
    weights = random_weights(net, args.seed, bias=args.with_bias, leaky=args.leaky)
    x = random_input(net, args.seed + 1)
    t0 = time.perf_counter()
    ref = run_monolithic(net, x, weights)
    modes = [ScheduleMode.RECOMPUTE] + ([ScheduleMode.REUSE] if args.reuse else [])
    runs = {mode: run_mafat(net, x, weights, config, mode) for mode in modes}
    elapsed = time.perf_counter() - t0
    params = PredictorParams()
    report = config.predict(net, params)
    rec = runs[ScheduleMode.RECOMPUTE]
    peaks_match = all(
        peak_footprint(rec.trace, PREDICTOR_MASK, group=g, tasks_only=True) == grp.group_max_bytes
        for g, grp in enumerate(report.groups))
    diffs = {mode: first_difference(ref, run.output) for mode, run in runs.items()}
    equivalent = all(d is None for d in diffs.values())
    chosen = runs[modes[-1]]
    if args.trace:
        Path(args.trace).write_text(trace_to_csv(chosen.trace), encoding="utf-8")
    summary = {
        "config": str(config),
        "backend": kernels.BACKEND,
        "equivalent": equivalent,
        "peak_matches_predictor": peaks_match,
        "macs": {"monolithic": monolithic_macs(net), **{m.value: r.macs for m, r in runs.items()}},
        "group_peaks": [peak_footprint(rec.trace, PREDICTOR_MASK, group=g, tasks_only=True)
                        for g in range(len(report.groups))],
        "predicted_group_max": [g.group_max_bytes for g in report.groups],
        "seconds": round(elapsed, 4),
    }
    if args.format == "json":
        print(json.dumps(summary, indent=2))
    else:
        print(f"config: {config}  (kernels: {kernels.BACKEND})")
        print(f"equivalent: {str(equivalent).lower()}; peak matches predictor: {str(peaks_match).lower()}")
        for name, count in summary["macs"].items():
            print(f"macs {name}: {count}")
    if args.check:
        failed = False
        for mode, d in diffs.items():
            if d is not None:
                print(f"{mode.value} output differs from monolithic at {d}", file=sys.stderr)
                failed = True
        if not peaks_match:
            print("trace peak does not match the predictor", file=sys.stderr)
            failed = True
        if failed:
            return EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--network", metavar="PATH", help="network description file")
    src.add_argument("--builtin", choices=sorted(BUILTINS), help="built-in network")
    common.add_argument("--format", choices=["table", "json", "csv"], default="table")
    common.add_argument("--bias", type=float, metavar="MB",
                        help="predictor bias in MB (default 31, or $MAFAT_BIAS_MB)")
    common.add_argument("--strict-weights", action="store_true",
                        help="add each group's weight bytes to its prediction")

    parser = argparse.ArgumentParser(prog="mafat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="search a configuration for a memory limit")
    p.add_argument("--memory-limit", required=True, help="limit in MB, or bytes with a B suffix")
    p.add_argument("--space", metavar="JSON", help="search space override file")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("predict", parents=[common], help="predict peak memory of a configuration")
    p.add_argument("--config", required=True, help="e.g. 5x5/8/2x2 or 1x1/NoCut")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("layers", parents=[common], help="per-layer size table")
    p.set_defaults(func=cmd_layers)

    p = sub.add_parser("sweep", parents=[common], help="predict every candidate of a search space")
    p.add_argument("--space", metavar="JSON")
    p.add_argument("--cuts", help="comma list, e.g. NoCut,12,8,4")
    p.add_argument("--top-tiles", help="comma list, e.g. 1,2,3,4,5")
    p.add_argument("--bottom-tiles", help="comma list, e.g. 2,3")
    p.add_argument("--no-prune", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="run the reference executor")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reuse", action="store_true", help="also run the data-reuse schedule")
    p.add_argument("--check", action="store_true", help="exit 1 on any mismatch")
    p.add_argument("--trace", metavar="PATH", help="write the memory trace as CSV")
    p.add_argument("--dump-tiles", action="store_true", help="print task regions as JSON and exit")
    p.add_argument("--with-bias", action="store_true", help="use random conv biases")
    p.add_argument("--leaky", action="store_true", help="apply leaky activation after convs")
    p.add_argument("--max-elements", type=int, default=DEFAULT_MAX_ELEMENTS)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, NetworkError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
