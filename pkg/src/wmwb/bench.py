"""Single-image inference benchmarking with a determinism gate."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonDeterministicOutputError, WmwbError
from .netgraph import NetGraph, count_params, footprint_bytes, infer_shapes
from .ops import forward

# one bench at a time per process, or latencies interleave
_bench_lock = threading.Lock()


def activation_footprint_bytes(g: NetGraph) -> int:
    """float32 bytes of the largest single activation in the graph."""
    shapes = infer_shapes(g)
    return max(int(np.prod(s)) for s in shapes.values()) * 4


@dataclass
class BenchReport:
    arch: str
    param_count: int
    weight_bytes: int
    largest_activation_bytes: int
    peak_bytes_estimate: int
    warmup_runs: int
    timed_runs: int
    latency_ms: list[float] = field(default_factory=list)
    p50_ms: float = 0.0
    p95_ms: float = 0.0
    mean_ms: float = 0.0
    throughput_ips: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def bench_forward(
    g: NetGraph, image: np.ndarray, warmup: int = 3, runs: int = 10
) -> BenchReport:
    """Time repeated forward passes of one image.

    Warmup runs are untimed. Every timed run must produce bit-identical
    probabilities or the report is abandoned with
    NonDeterministicOutputError. Peak memory is estimated, not measured:
    weights plus the largest single activation.
    """
    if runs < 1 or warmup < 0:
        raise WmwbError(f"need runs >= 1 and warmup >= 0, got {runs}/{warmup}")
    if not _bench_lock.acquire(blocking=False):
        raise WmwbError("another bench is already running in this process")
    try:
        for _ in range(warmup):
            forward(g, image)
        latencies = []
        reference = None
        for _ in range(runs):
            t0 = time.perf_counter()
            pred = forward(g, image)
            latencies.append((time.perf_counter() - t0) * 1000.0)
            if reference is None:
                reference = pred.probs
            elif not np.array_equal(reference, pred.probs):
                raise NonDeterministicOutputError(
                    "repeated forward passes disagreed on identical input"
                )
        lat = np.asarray(latencies)
        return BenchReport(
            arch=g.meta.get("arch", "unknown"),
            param_count=count_params(g),
            weight_bytes=footprint_bytes(g),
            largest_activation_bytes=activation_footprint_bytes(g),
            peak_bytes_estimate=footprint_bytes(g) + activation_footprint_bytes(g),
            warmup_runs=warmup,
            timed_runs=runs,
            latency_ms=[float(v) for v in lat],
            p50_ms=float(np.percentile(lat, 50)),
            p95_ms=float(np.percentile(lat, 95)),
            mean_ms=float(lat.mean()),
            throughput_ips=float(runs / (lat.sum() / 1000.0)),
        )
    finally:
        _bench_lock.release()
