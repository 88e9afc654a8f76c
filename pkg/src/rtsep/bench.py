"""Wall-clock benchmarking of forward passes and variant comparisons.

Timing uses a monotonic clock around the forward work only; the model is
always built outside the timed region. The default workload is one
1024-sample stereo chunk, timed both through the full pipeline
(analysis -> network -> synthesis) and network-only on a precomputed
spectrogram. The median is the primary statistic; mean and p95 are
reported alongside, plus the real-time factor against 44.1 kHz.

Trend checks are ordinal only: an assertion fails only when the ordering
is violated by more than measurement noise, estimated from the spread of
repeated medians over consecutive slices of the timing series.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import SAMPLE_RATE, ModelConfig
from .model import ModelGraph, build_model, parameter_count, parameter_spec
from .streaming import separate_offline
from .stft import stft_forward
from .weights import random_init

MIN_ITERATIONS = 100
_NOISE_SLICES = 5


def config_fingerprint(cfg: ModelConfig) -> str:
    return (f"g={cfg.base_channels} layers={cfg.layers} L={cfg.path_repeats} "
            f"S={cfg.sources} path={cfg.path_mode} fusion={cfg.fusion_mode} "
            f"dtype={cfg.dtype}")


@dataclass
class BenchReport:
    label: str
    fingerprint: str
    iterations: int
    warmup: int
    input_samples: int
    times_ms: list[float] = field(repr=False, default_factory=list)

    @property
    def median_ms(self) -> float:
        return float(np.median(self.times_ms))

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.times_ms))

    @property
    def p95_ms(self) -> float:
        return float(np.percentile(self.times_ms, 95))

    @property
    def rtf(self) -> float:
        """Processing time over audio duration; < 1 means real-time capable."""
        duration_ms = self.input_samples / SAMPLE_RATE * 1000.0
        return self.median_ms / duration_ms

    def slice_medians(self) -> list[float]:
        chunks = np.array_split(np.asarray(self.times_ms), _NOISE_SLICES)
        return [float(np.median(c)) for c in chunks if len(c)]

    def noise_ms(self) -> float:
        """p95 absolute deviation of repeated medians: the noise floor for
        ordinal comparisons."""
        meds = np.asarray(self.slice_medians())
        return float(np.percentile(np.abs(meds - np.median(meds)), 95))

    def summary(self) -> str:
        return (f"{self.label}: median {self.median_ms:.3f} ms, mean "
                f"{self.mean_ms:.3f} ms, p95 {self.p95_ms:.3f} ms, RTF {self.rtf:.3f}")


def _time_loop(fn, iterations: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(iterations):
        t0 = time.perf_counter_ns()
        fn()
        times.append((time.perf_counter_ns() - t0) / 1e6)
    return times


def bench_forward(model: ModelGraph, input_samples: int = 1024,
                  iterations: int = 1000, warmup: int = 50,
                  include_transforms: bool = True, label: str = "",
                  seed: int = 0) -> BenchReport:
    """Time the forward path on a fresh random chunk of input_samples."""
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"iterations must be >= {MIN_ITERATIONS} for a reported aggregate")
    cfg = model.config
    rng = np.random.default_rng(seed)
    audio = rng.standard_normal((cfg.audio_channels, input_samples)).astype(np.float32)
    if include_transforms:
        fn = lambda: separate_offline(model, audio)
    else:
        pad = (-input_samples) % cfg.hop
        padded = np.concatenate(
            [audio, np.zeros((cfg.audio_channels, pad), dtype=np.float32)], axis=1)
        spec = stft_forward(padded, cfg.stft())
        fn = lambda: model.forward(spec)
    times = _time_loop(fn, iterations, warmup)
    name = label or ("pipeline" if include_transforms else "network")
    return BenchReport(label=name, fingerprint=config_fingerprint(cfg),
                       iterations=iterations, warmup=warmup,
                       input_samples=input_samples, times_ms=times)


def stability_gate(first: BenchReport, second: BenchReport,
                   tolerance: float = 0.20) -> tuple[bool, str]:
    """Repeatability probe: medians of two consecutive runs should agree
    within the tolerance on an idle machine. Callers warn, never fail."""
    a, b = first.median_ms, second.median_ms
    drift = abs(a - b) / max(a, b)
    return drift <= tolerance, f"medians {a:.3f} / {b:.3f} ms, drift {drift:.1%}"


def trend_ok(faster: BenchReport, slower: BenchReport) -> tuple[bool, str]:
    """Check the ordinal claim median(faster) <= median(slower), allowing
    measurement noise from both sides."""
    allowance = max(faster.noise_ms(), slower.noise_ms())
    gap = faster.median_ms - slower.median_ms
    ok = gap <= allowance
    detail = (f"{faster.label} {faster.median_ms:.3f} ms vs {slower.label} "
              f"{slower.median_ms:.3f} ms (noise allowance {allowance:.3f} ms)")
    return ok, detail


@dataclass
class VariantRow:
    values: dict
    params: int
    pipeline: BenchReport
    network: BenchReport

    def record(self) -> dict:
        return {
            **self.values,
            "params": self.params,
            "pipeline_median_ms": self.pipeline.median_ms,
            "pipeline_mean_ms": self.pipeline.mean_ms,
            "network_median_ms": self.network.median_ms,
            "rtf": self.pipeline.rtf,
        }


# Ordinal expectations along each comparison axis: values listed from
# fastest to slowest (layers/path_repeats: ascending cost with the value).
CANONICAL_TRENDS = {
    "path_mode": ["single", "dual"],
    "fusion_mode": ["joint", "separate"],
    "layers": "ascending",
    "path_repeats": "ascending",
}

DEFAULT_AXES = {
    "path_mode": ["single", "dual"],
    "fusion_mode": ["joint", "separate"],
    "dtype": ["f32", "f16"],
    "layers": [1, 2],
    "g": [16, 8],
    "l_repeats": [3, 4],
}

_AXIS_FIELD = {"g": "base_channels", "l_repeats": "path_repeats"}


def compare_variants(base: ModelConfig, axes: dict[str, list],
                     input_samples: int = 1024, iterations: int = 1000,
                     warmup: int = 50, seed: int = 0) -> list[VariantRow]:
    """Benchmark the cartesian product of the given axis values.

    Returns one row per configuration with parameter counts and both
    pipeline and network-only reports.
    """
    names = list(axes)
    rows = []
    for combo in itertools.product(*(axes[n] for n in names)):
        values = dict(zip(names, combo))
        overrides = {_AXIS_FIELD.get(k, k): v for k, v in values.items()}
        cfg = base.with_overrides(**overrides)
        ws = random_init(cfg, seed=seed)
        model = build_model(ws.config, ws.as_dict())
        label = " ".join(f"{k}={v}" for k, v in values.items()) or "base"
        pipeline = bench_forward(model, input_samples, iterations, warmup,
                                 include_transforms=True, label=label, seed=seed)
        network = bench_forward(model, input_samples, iterations, warmup,
                                include_transforms=False,
                                label=f"{label} (network)", seed=seed)
        rows.append(VariantRow(values=values, params=parameter_count(parameter_spec(cfg)),
                               pipeline=pipeline, network=network))
    return rows


def check_trends(rows: list[VariantRow], axes: dict[str, list]) -> list[tuple[str, bool, str]]:
    """Evaluate the canonical ordinal claims along each compared axis.

    For every pair of rows that differ only in one axis with a known
    expected ordering, check median(faster config) <= median(slower).
    """
    results = []
    for axis, values in axes.items():
        expect = CANONICAL_TRENDS.get(axis)
        if expect is None or len(values) < 2:
            continue
        order = sorted(values) if expect == "ascending" else [
            v for v in expect if v in values]
        for fast_v, slow_v in zip(order, order[1:]):
            for a, b in itertools.product(rows, rows):
                if a.values.get(axis) != fast_v or b.values.get(axis) != slow_v:
                    continue
                rest_a = {k: v for k, v in a.values.items() if k != axis}
                rest_b = {k: v for k, v in b.values.items() if k != axis}
                if rest_a != rest_b:
                    continue
                ok, detail = trend_ok(a.pipeline, b.pipeline)
                results.append((f"{axis}: {fast_v} <= {slow_v}", ok, detail))
    return results


def variants_table(rows: list[VariantRow]) -> str:
    if not rows:
        return "(no variants)"
    names = list(rows[0].values)
    head = " ".join(f"{n:>10}" for n in names)
    lines = [f"{head} {'params':>9} {'pipeline ms':>12} {'network ms':>11} {'rtf':>7}"]
    for row in rows:
        vals = " ".join(f"{str(row.values[n]):>10}" for n in names)
        lines.append(
            f"{vals} {row.params:>9d} {row.pipeline.median_ms:>12.3f} "
            f"{row.network.median_ms:>11.3f} {row.pipeline.rtf:>7.3f}")
    return "\n".join(lines)


def variants_jsonl(rows: list[VariantRow]) -> str:
    return "\n".join(json.dumps(row.record()) for row in rows)
