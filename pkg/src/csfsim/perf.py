"""Analytic throughput metrics and a parametric runtime predictor.

Efficiency here is millions of multiply-accumulates divided by runtime in
milliseconds and by a per-design divisor, so designs with different
processing-element counts can be compared on one scale. The runtime
predictor is a two-term bound: weight streaming and multiply throughput
overlap (the slower one wins), and every instruction pays a fixed
pipeline-drain latency on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import TraceCounters
from .layers import LayerSpec, output_shape


@dataclass(frozen=True)
class PerfParams:
    """Design knobs for the runtime predictor and efficiency scaling.

    weights_per_clock defaults to the processing-element count: the design
    streams one weight per element per clock. efficiency_divisor is the
    per-design constant the efficiency figure is normalized by.
    """

    pe_count: int = 8
    clock_mhz: float = 299.97
    add_latency_cycles: int = 11
    weights_per_clock: int | None = None
    efficiency_divisor: int = 4

    def __post_init__(self):
        if self.weights_per_clock is None:
            object.__setattr__(self, "weights_per_clock", self.pe_count)
        for name in ("pe_count", "add_latency_cycles", "weights_per_clock",
                     "efficiency_divisor"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.clock_mhz > 0:
            raise ValueError("clock_mhz must be positive")


# comparison design: 168 processing elements, clocked 100-250 MHz (upper
# bound taken; efficiency math never consults the clock)
BASELINE_PARAMS = PerfParams(pe_count=168, clock_mhz=250.0,
                             efficiency_divisor=168)


@dataclass(frozen=True)
class LayerPerfRow:
    """One rendered table row; improvement is against a paired baseline."""

    name: str
    macs_millions: float
    runtime_ms: float
    efficiency: float
    improvement: float | None = None


def efficiency_per_pe(macs_millions: float, runtime_ms: float,
                      divisor: int) -> float:
    """Millions of multiply-accumulates per millisecond per divisor unit."""
    if runtime_ms <= 0:
        raise ValueError(f"runtime {runtime_ms} ms must be positive")
    if divisor < 1:
        raise ValueError(f"divisor {divisor} must be >= 1")
    return macs_millions / (runtime_ms * divisor)


def improvement(ours: float, baseline: float) -> float:
    """Efficiency ratio against a baseline; callers round for display."""
    if baseline <= 0:
        raise ValueError(f"baseline efficiency {baseline} must be positive")
    return ours / baseline


def predict_runtime(trace: TraceCounters, params: PerfParams) -> float:
    """Predicted milliseconds for one run's trace.

    Weight streaming and multiply execution overlap, so the cycle count is
    the larger of the two, plus a fixed drain latency per instruction
    issued. Clock is in MHz, so cycles / (clock_mhz * 1000) gives ms.
    """
    stream_cycles = math.ceil(trace.weight_loads / params.weights_per_clock)
    compute_cycles = math.ceil(trace.macs_executed / params.pe_count)
    cycles = max(stream_cycles, compute_cycles) \
        + params.add_latency_cycles * trace.simd_instructions
    return cycles / (params.clock_mhz * 1000.0)


def dense_trace(layer: LayerSpec) -> TraceCounters:
    """The trace a fully dense filter bank would produce on the engine.

    Pure shape arithmetic: equals the counters from actually running the
    layer at density 1 with every filter in one stack.
    """
    out_w, out_h = output_shape(layer)
    if layer.kind == "conv":
        windows = out_h * out_w
        k2 = layer.kernel ** 2
        macs = layer.filters * layer.channels * k2 * windows
        streams = layer.channels * windows * k2
        instructions = layer.channels * windows
    else:
        positions = layer.channels * layer.height * layer.width
        macs = layer.filters * positions
        streams = positions
        instructions = positions
    return TraceCounters(
        macs_executed=macs,
        weight_loads=macs,
        index_loads=macs,
        feature_loads=streams,
        pointer_loads=streams,
        simd_instructions=instructions,
    )


def _as_macs_millions(work) -> float:
    if isinstance(work, TraceCounters):
        return work.macs_executed / 1e6
    return float(work)


def build_table(entries, params: PerfParams | None = None,
                baselines=None,
                baseline_params: PerfParams | None = None):
    """Assemble efficiency rows from (name, work, runtime_ms) entries.

    `work` is either a macs-in-millions number or a TraceCounters; a None
    runtime is predicted from the trace. With `baselines` (a same-length
    list of (work, runtime_ms) pairs) each entry also yields a baseline
    row, placed before its counterpart, and the entry row carries the
    efficiency ratio between the two.
    """
    params = params or PerfParams()
    baseline_params = baseline_params or BASELINE_PARAMS
    if baselines is not None and len(baselines) != len(entries):
        raise ValueError(
            f"{len(entries)} entries but {len(baselines)} baselines"
        )
    rows = []
    for i, (name, work, runtime_ms) in enumerate(entries):
        if runtime_ms is None:
            if not isinstance(work, TraceCounters):
                raise ValueError(f"{name}: runtime can only be predicted "
                                 f"from a trace")
            runtime_ms = predict_runtime(work, params)
        macs = _as_macs_millions(work)
        eff = efficiency_per_pe(macs, runtime_ms, params.efficiency_divisor)
        gain = None
        if baselines is not None:
            base_work, base_runtime = baselines[i]
            base_macs = _as_macs_millions(base_work)
            base_eff = efficiency_per_pe(base_macs, base_runtime,
                                         baseline_params.efficiency_divisor)
            rows.append(LayerPerfRow(
                name=f"{name} (baseline)",
                macs_millions=base_macs,
                runtime_ms=base_runtime,
                efficiency=base_eff,
            ))
            gain = improvement(eff, base_eff)
        rows.append(LayerPerfRow(
            name=name,
            macs_millions=macs,
            runtime_ms=runtime_ms,
            efficiency=eff,
            improvement=gain,
        ))
    return rows
