"""Command line surface: encode, decode, verify, plan, macs, report.

Exit codes: 0 on success, 1 when a verification run found a mismatch,
2 on usage, config, or input-format errors.

Weight bank files are raw dumps: a 16-byte header of four little-endian
32-bit unsigned extents (filters, channels, kernel, kernel; the two kernel
extents must match) followed by the float32 weights in C order.
"""

from __future__ import annotations

import argparse
import csv
import struct
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .codec import (CsfFormatError, decode_csf, deserialize_csf, encode_csf,
                    quantize_shift, serialize_csf, stack_filters)
from .dense import dense_conv, dense_fc, random_sparse_filters
from .engine import run_layer_batched
from .layers import LayerSpec, mac_count, output_shape
from .netconfig import ConfigError, NetworkConfig, parse_network_config
from .perf import PerfParams, dense_trace, efficiency_per_pe, predict_runtime
from .tiling import PlanError, plan_feature_division, plan_filter_grouping

_BANK_HEADER = struct.Struct("<IIII")


def write_weight_bank(path, bank: np.ndarray) -> None:
    """Dump a (filters, channels, k, k) float32 bank to disk."""
    arr = np.ascontiguousarray(bank, dtype="<f4")
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise ValueError(f"bank shape {arr.shape} is not (filters, channels, k, k)")
    with open(path, "wb") as fh:
        fh.write(_BANK_HEADER.pack(*arr.shape))
        fh.write(arr.tobytes())


def read_weight_bank(path) -> np.ndarray:
    """Load a weight bank dump; validates header against payload length."""
    data = Path(path).read_bytes()
    if len(data) < _BANK_HEADER.size:
        raise ValueError(f"{path}: shorter than the 16-byte header")
    filters, channels, k1, k2 = _BANK_HEADER.unpack_from(data)
    if k1 != k2:
        raise ValueError(f"{path}: kernel extents {k1} and {k2} differ")
    if min(filters, channels, k1) < 1:
        raise ValueError(f"{path}: zero extent in header")
    count = filters * channels * k1 * k2
    if len(data) != _BANK_HEADER.size + 4 * count:
        raise ValueError(
            f"{path}: header promises {count} weights but payload holds "
            f"{(len(data) - _BANK_HEADER.size) // 4}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=_BANK_HEADER.size)
    return flat.reshape(filters, channels, k1, k2).copy()


def _load_config(arg: str) -> NetworkConfig:
    """Read a config path, falling back to the bundled example configs."""
    path = Path(arg)
    if path.exists():
        return parse_network_config(path.read_text(encoding="utf-8"))
    name = arg if arg.endswith(".cfg") else arg + ".cfg"
    if "/" not in arg and "\\" not in arg:
        bundled = resources.files("csfsim").joinpath("configs", name)
        if bundled.is_file():
            return parse_network_config(bundled.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"config {arg!r} not found")


def _print_table(headers, rows, file=None):
    """Aligned text table: first column left, the rest right-justified."""
    out = file or sys.stdout
    cells = [[str(c) for c in row] for row in rows]
    widths = [len(h) for h in headers]
    for row in cells:
        for i, c in enumerate(row):
            widths[i] = max(widths[i], len(c))
    def fmt(row):
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()
    print(fmt(headers), file=out)
    for row in cells:
        print(fmt(row), file=out)


def _write_csv(headers, rows, file=None):
    writer = csv.writer(file or sys.stdout, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)


def _division_cells(layer: LayerSpec, budget: int, tile):
    """Per-layer division columns, or an infeasibility note."""
    try:
        plan = plan_feature_division(layer, budget, tile=tile)
    except PlanError as exc:
        return None, f"infeasible: {exc}"
    return plan, None


def _grouping_cells(layer: LayerSpec, budget: int):
    try:
        plan = plan_filter_grouping(layer, budget)
    except PlanError as exc:
        return None, f"infeasible: {exc}"
    return plan, plan.note


def _cmd_encode(args) -> int:
    bank = read_weight_bank(args.weights)
    quantized = args.quantize_shift is not None
    if quantized:
        exp_min, exp_max = args.quantize_shift
        if exp_min > exp_max:
            raise ValueError(f"exponent range [{exp_min}, {exp_max}] is empty")
        bank = quantize_shift(bank, exp_min, exp_max)
    stacked = stack_filters(bank, 0, bank.shape[0])
    stream = encode_csf(stacked, args.profile, quantized=quantized)
    payload = serialize_csf(stream)
    Path(args.output).write_bytes(payload)
    print(f"{args.output}: {stream.filters} filters, "
          f"{stream.position_count} positions, {stream.total_nnz} nonzeros, "
          f"{len(payload)} bytes")
    return 0


def _cmd_decode(args) -> int:
    stream = deserialize_csf(Path(args.stream).read_bytes())
    for key, value in (
        ("profile", stream.profile),
        ("filters", stream.filters),
        ("channels", stream.channels),
        ("kernel", stream.kernel),
        ("positions", stream.position_count),
        ("nonzeros", stream.total_nnz),
        ("quantized", "yes" if stream.quantized else "no"),
    ):
        print(f"{key:<10}{value}")
    if args.output:
        stacked = decode_csf(stream)
        if stream.profile == "conv":
            bank = np.ascontiguousarray(np.moveaxis(stacked, -1, 0))
        else:
            bank = np.ascontiguousarray(
                stacked.T.reshape(stream.filters, stream.channels, 1, 1)
            )
        write_weight_bank(args.output, bank)
        print(f"wrote {args.output}")
    return 0


def _verify_input(layer: LayerSpec, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    shape = (layer.channels, layer.height, layer.width)
    return (rng.random(shape) * 2.0 - 1.0).astype(np.float32)


def _cmd_verify(args) -> int:
    config = _load_config(args.config)
    failures = 0
    for i, layer in enumerate(config):
        layer_seed = args.seed + 7919 * i
        bank = random_sparse_filters(layer, args.density, layer_seed)
        features = _verify_input(layer, layer_seed + 3571)
        if layer.kind == "conv":
            expected = dense_conv(features, bank, layer)
        else:
            expected = dense_fc(features, bank, layer)
        run_bank = bank
        if args.corrupt_layer == layer.name:
            run_bank = bank.copy()
            run_bank[0, 0, 0, 0] += 1.0
        batch = min(layer.filters, args.batch_size)
        actual, trace = run_layer_batched(run_bank, features, layer, batch)
        exact = actual.shape == expected.shape and np.array_equal(actual, expected)
        deviation = float(np.max(np.abs(actual - expected))) if not exact else 0.0
        verdict = "PASS" if exact else "FAIL"
        print(f"{layer.name}: {verdict} (max abs deviation {deviation:.3e}, "
              f"{trace.macs_executed} macs)")
        failures += 0 if exact else 1
    print(f"{len(config.layers) - failures}/{len(config.layers)} layers passed")
    return 0 if failures == 0 else 1


def _plan_tables(config, args):
    """Shared by plan and report: per-layer division/grouping cells."""
    tile = None if args.budget_max else args.tile
    division = []
    grouping = []
    if args.div_budget is not None:
        for layer in config:
            division.append((layer, *_division_cells(layer, args.div_budget, tile)))
    if args.grp_budget is not None:
        for layer in config:
            grouping.append((layer, *_grouping_cells(layer, args.grp_budget)))
    return division, grouping


def _print_division_table(entries, budget, tile):
    mode = f"tile {tile}" if tile is not None else "largest tile in budget"
    print(f"feature division (output buffer budget {budget}, {mode})")
    headers = ["layer", "grid", "load times", "filter weights",
               "total weights loaded", "note"]
    rows = []
    sum_weights = 0
    sum_loaded = 0
    for layer, plan, note in entries:
        if plan is None:
            rows.append([layer.name, "-", "-", "-", "-", note])
            continue
        rows.append([layer.name, f"{plan.grid_h}x{plan.grid_w}",
                     plan.load_times, plan.dense_weight_count,
                     plan.total_weights_loaded, note or ""])
        sum_weights += plan.dense_weight_count
        sum_loaded += plan.total_weights_loaded
    rows.append(["total", "", "", sum_weights, sum_loaded, ""])
    _print_table(headers, rows)


def _print_grouping_table(entries, budget):
    print(f"filter grouping (output buffer budget {budget})")
    headers = ["layer", "batch size", "batches", "features",
               "total features loaded", "note"]
    rows = []
    sum_features = 0
    sum_loaded = 0
    for layer, plan, note in entries:
        if plan is None:
            rows.append([layer.name, "-", "-", "-", "-", note])
            continue
        rows.append([layer.name, plan.batch_size, plan.batches,
                     plan.feature_count, plan.total_features_loaded,
                     note or ""])
        sum_features += plan.feature_count
        sum_loaded += plan.total_features_loaded
    rows.append(["total", "", "", sum_features, sum_loaded, ""])
    _print_table(headers, rows)


def _cmd_plan(args) -> int:
    if args.div_budget is None and args.grp_budget is None:
        raise ValueError("plan needs --div-budget and/or --grp-budget")
    config = _load_config(args.config)
    division, grouping = _plan_tables(config, args)
    if args.csv:
        headers = ["layer", "kind"]
        if division:
            headers += ["grid_h", "grid_w", "load_times", "filter_weights",
                        "total_weights_loaded"]
        if grouping:
            headers += ["batch_size", "batches", "features",
                        "total_features_loaded"]
        headers.append("note")
        rows = []
        for i, layer in enumerate(config):
            row = [layer.name, layer.kind]
            notes = []
            if division:
                _, plan, note = division[i]
                if plan is None:
                    row += [""] * 5
                    notes.append(note)
                else:
                    row += [plan.grid_h, plan.grid_w, plan.load_times,
                            plan.dense_weight_count, plan.total_weights_loaded]
            if grouping:
                _, plan, note = grouping[i]
                if plan is None:
                    row += [""] * 4
                    notes.append(note)
                else:
                    row += [plan.batch_size, plan.batches, plan.feature_count,
                            plan.total_features_loaded]
                    if note:
                        notes.append(note)
            row.append("; ".join(notes))
            rows.append(row)
        _write_csv(headers, rows)
        return 0
    first = True
    if division:
        tile = None if args.budget_max else args.tile
        _print_division_table(division, args.div_budget, tile)
        first = False
    if grouping:
        if not first:
            print()
        _print_grouping_table(grouping, args.grp_budget)
    return 0


def _cmd_macs(args) -> int:
    config = _load_config(args.config)
    headers = ["layer", "kind", "macs", "millions"]
    rows = [[layer.name, layer.kind, mac_count(layer),
             f"{mac_count(layer) / 1e6:.4f}"] for layer in config]
    if args.csv:
        _write_csv(headers, rows)
        return 0
    total = sum(mac_count(layer) for layer in config)
    rows.append(["total", "", total, f"{total / 1e6:.4f}"])
    _print_table(headers, rows)
    return 0


def _cmd_report(args) -> int:
    config = _load_config(args.config)
    params = PerfParams(
        pe_count=args.pe_count,
        clock_mhz=args.clock_mhz,
        add_latency_cycles=args.add_latency_cycles,
        weights_per_clock=args.weights_per_clock,
        efficiency_divisor=args.efficiency_divisor,
    )
    perf_rows = []
    for layer in config:
        trace = dense_trace(layer)
        macs = trace.macs_executed
        runtime = predict_runtime(trace, params)
        eff = efficiency_per_pe(macs / 1e6, runtime, params.efficiency_divisor)
        perf_rows.append([layer.name, layer.kind, macs, f"{macs / 1e6:.4f}",
                          f"{runtime:.4f}", f"{eff:.4f}"])
    division, grouping = _plan_tables(config, args)
    if args.csv:
        headers = ["layer", "kind", "macs", "macs_millions", "predicted_ms",
                   "efficiency", "grid_h", "grid_w", "load_times",
                   "filter_weights", "total_weights_loaded", "batch_size",
                   "batches", "features", "total_features_loaded", "note"]
        rows = []
        for i, layer in enumerate(config):
            row = list(perf_rows[i])
            notes = []
            _, plan, note = division[i]
            if plan is None:
                row += [""] * 5
                notes.append(note)
            else:
                row += [plan.grid_h, plan.grid_w, plan.load_times,
                        plan.dense_weight_count, plan.total_weights_loaded]
            _, plan, note = grouping[i]
            if plan is None:
                row += [""] * 4
                notes.append(note)
            else:
                row += [plan.batch_size, plan.batches, plan.feature_count,
                        plan.total_features_loaded]
                if note:
                    notes.append(note)
            row.append("; ".join(n for n in notes if n))
            rows.append(row)
        _write_csv(headers, rows)
        return 0
    print(f"arithmetic and predicted timing ({params.pe_count} processing "
          f"elements at {params.clock_mhz} MHz)")
    _print_table(["layer", "kind", "macs", "millions", "predicted ms",
                  "efficiency"], perf_rows)
    print()
    tile = None if args.budget_max else args.tile
    _print_division_table(division, args.div_budget, tile)
    print()
    _print_grouping_table(grouping, args.grp_budget)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csfsim",
        description="Compressed sparse filter streams and the stacked-filter "
                    "streaming dataflow: encoding, simulation, planning and "
                    "reporting tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="pack a weight bank into a stream file")
    p.add_argument("weights", help="weight bank dump (16-byte header + f32)")
    p.add_argument("-o", "--output", required=True, help="stream file to write")
    p.add_argument("--profile", choices=("conv", "fc"), default="conv")
    p.add_argument("--quantize-shift", nargs=2, type=int, default=None,
                   metavar=("EXP_MIN", "EXP_MAX"),
                   help="round weights to powers of two in this exponent range")
    p.set_defaults(handler=_cmd_encode)

    p = sub.add_parser("decode", help="inspect a stream file")
    p.add_argument("stream", help="stream file to read")
    p.add_argument("-o", "--output", default=None,
                   help="also write the dense bank back to this path")
    p.set_defaults(handler=_cmd_decode)

    p = sub.add_parser("verify",
                       help="check the streaming engine against the dense "
                            "reference on every layer of a config")
    p.add_argument("config", help="network config path or bundled name")
    p.add_argument("--density", type=float, default=0.25,
                   help="nonzero weight fraction (default 0.25)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=64,
                   help="filters per encoded stack (default 64)")
    p.add_argument("--corrupt-layer", default=None, help=argparse.SUPPRESS)
    p.set_defaults(handler=_cmd_verify)

    def add_plan_args(p):
        p.add_argument("--div-budget", type=int, default=None,
                       help="output buffer budget for feature division")
        p.add_argument("--grp-budget", type=int, default=None,
                       help="output buffer budget for filter grouping")
        group = p.add_mutually_exclusive_group()
        group.add_argument("--tile", type=int, default=14,
                           help="square output tile size (default 14)")
        group.add_argument("--budget-max", action="store_true",
                           help="pick the largest tile the budget allows")
        p.add_argument("--csv", action="store_true")

    p = sub.add_parser("plan", help="feature-division and filter-grouping "
                                    "tables for a config")
    p.add_argument("config", help="network config path or bundled name")
    add_plan_args(p)
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("macs", help="dense multiply-accumulate counts")
    p.add_argument("config", help="network config path or bundled name")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(handler=_cmd_macs)

    p = sub.add_parser("report", help="full analytic report: arithmetic, "
                                      "predicted timing, and both plans")
    p.add_argument("config", help="network config path or bundled name")
    add_plan_args(p)
    p.add_argument("--pe-count", type=int, default=8)
    p.add_argument("--clock-mhz", type=float, default=299.97)
    p.add_argument("--add-latency-cycles", type=int, default=11)
    p.add_argument("--weights-per-clock", type=int, default=None)
    p.add_argument("--efficiency-divisor", type=int, default=4)
    p.set_defaults(handler=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "report":
        if args.div_budget is None:
            args.div_budget = 100352
        if args.grp_budget is None:
            args.grp_budget = 200704
    try:
        return args.handler(args)
    except (ConfigError, CsfFormatError, PlanError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
