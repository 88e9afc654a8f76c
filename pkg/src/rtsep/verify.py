"""Runnable invariant suites: causality, streaming equivalence, analysis
round trips, softmax normalization, parameter budget, half-precision
agreement. Each suite works on seeded random weights and returns a
structured pass/fail result; the CLI prints one line per suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, StftConfig
from .model import build_model, parameter_count, parameter_spec
from .stft import band_restore, istft_overlap_add, stft_forward
from .streaming import SeparationStream, separate_offline
from .weights import random_init, to_f16

PARAM_BUDGET = (300_000, 480_000)
SUITES = ("causality", "streaming", "cola", "softmax", "params", "f16")


@dataclass
class VerifyResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({self.detail})"


def _model(config: ModelConfig, seed: int):
    ws = random_init(config, seed=seed)
    return build_model(ws.config, ws.as_dict())


def suite_causality(config: ModelConfig, seed: int = 0, probes: int = 20,
                    frames: int = 8) -> VerifyResult:
    """Future-frame perturbations must never change past output frames."""
    model = _model(config, seed)
    rng = np.random.default_rng(seed + 1)
    shape = (config.spec_channels, config.freq_bins, frames)
    worst = 0.0
    for p in range(probes):
        x = rng.standard_normal(shape).astype(np.float32)
        t = int(rng.integers(0, frames - 1))
        y = model.forward(x)[..., : t + 1]
        perturbed = x.copy()
        perturbed[..., t + 1:] = rng.standard_normal(
            (shape[0], shape[1], frames - t - 1)).astype(np.float32)
        y2 = model.forward(perturbed)[..., : t + 1]
        diff = float(np.max(np.abs(y.astype(np.float64) - y2.astype(np.float64))))
        worst = max(worst, diff)
    return VerifyResult("causality", worst == 0.0,
                        f"probes={probes}, max_diff={worst:.1e}")


def suite_streaming(config: ModelConfig, seed: int = 0, seconds: float = 1.0) -> VerifyResult:
    """Chunked streaming must equal the offline pipeline bit-exactly."""
    model = _model(config, seed)
    rng = np.random.default_rng(seed + 2)
    hops = max(4, int(seconds * 44100 / config.hop))
    audio = rng.standard_normal((config.audio_channels, hops * config.hop)).astype(np.float32)
    offline = separate_offline(model, audio)
    stream = SeparationStream(model)
    parts = []
    pos = 0
    while pos < audio.shape[1]:
        step = int(rng.integers(1, 5)) * config.hop
        parts.append(stream.push(audio[:, pos:pos + step]))
        pos += step
    emitted = np.concatenate(parts, axis=2)
    expect = offline[:, :, : emitted.shape[2]]
    exact = emitted.shape[2] == audio.shape[1] - stream.latency_samples() \
        and np.array_equal(emitted, expect)
    diff = float(np.max(np.abs(emitted - expect))) if emitted.size else 0.0
    return VerifyResult("streaming", exact,
                        f"hops={hops}, emitted={emitted.shape[2]}, max_diff={diff:.1e}")


def suite_cola(config: ModelConfig, seed: int = 0) -> VerifyResult:
    """Analysis/synthesis round trip and band-cut round trip, interior
    relative L2 below 1e-6."""
    cfg = config.stft()
    rng = np.random.default_rng(seed + 3)
    hops = 32
    length = hops * cfg.hop
    audio = rng.standard_normal((2, length)).astype(np.float32)
    # full-bin round trip
    full_cfg = StftConfig(cfg.window, cfg.hop, cfg.full_bins)
    window_spec = stft_forward(audio, full_cfg)
    frames = np.empty((2, cfg.full_bins, hops), dtype=np.complex128)
    frames.real = window_spec[:2]
    frames.imag = window_spec[2:]
    recon = istft_overlap_add(frames, cfg)
    lo, hi = cfg.window, length - cfg.window
    err_full = _rel_l2(audio[:, lo:hi], recon[:, lo:hi])
    # band-limited signal survives the cut
    t = np.arange(length)
    band = np.zeros((2, length), dtype=np.float64)
    for k in (10, 97, 200, 380):
        phase = rng.uniform(0, 2 * np.pi, size=(2, 1))
        band += np.sin(2 * np.pi * k * t / cfg.window + phase)
    band = band.astype(np.float32)
    spec = stft_forward(band, cfg)
    recon_band = istft_overlap_add(band_restore(spec, cfg), cfg)
    err_band = _rel_l2(band[:, lo:hi], recon_band[:, lo:hi])
    ok = err_full < 1e-6 and err_band < 1e-6
    return VerifyResult("cola", ok,
                        f"roundtrip_rel={err_full:.2e}, bandcut_rel={err_band:.2e}")


def _rel_l2(ref: np.ndarray, est: np.ndarray) -> float:
    ref = ref.astype(np.float64)
    est = est.astype(np.float64)
    return float(np.linalg.norm(ref - est) / np.linalg.norm(ref))


def suite_softmax(config: ModelConfig, seed: int = 0, inputs: int = 5) -> VerifyResult:
    """Source-axis fibers at the expansion stage must sum to one."""
    model = _model(config, seed)
    rng = np.random.default_rng(seed + 4)
    worst = 0.0
    for _ in range(inputs):
        x = rng.standard_normal(
            (config.spec_channels, config.freq_bins, 3)).astype(np.float32)
        collected: list = []
        model.forward(x, collect=collected)
        for frame in collected:
            sums = frame.astype(np.float64).sum(axis=0)
            worst = max(worst, float(np.max(np.abs(sums - 1.0))))
    ok = worst <= 1e-6
    return VerifyResult("softmax", ok, f"inputs={inputs}, max_fiber_dev={worst:.1e}")


def suite_params(config: ModelConfig, seed: int = 0) -> VerifyResult:
    count = parameter_count(parameter_spec(config))
    lo, hi = PARAM_BUDGET
    ok = lo <= count <= hi
    return VerifyResult("params", ok, f"count={count}, budget=[{lo}, {hi}]")


def suite_f16(config: ModelConfig, seed: int = 0, seconds: float = 0.25) -> VerifyResult:
    """Half-precision weights and activations stay within 2% relative L2 of
    the full-precision pipeline on unit-scale input."""
    ws32 = random_init(config.with_overrides(dtype="f32"), seed=seed)
    ws16 = to_f16(ws32)
    m32 = build_model(ws32.config, ws32.as_dict())
    m16 = build_model(ws16.config, ws16.as_dict())
    rng = np.random.default_rng(seed + 5)
    hops = max(2, int(seconds * 44100 / config.hop))
    audio = rng.standard_normal((config.audio_channels, hops * config.hop)).astype(np.float32)
    out32 = separate_offline(m32, audio)
    out16 = separate_offline(m16, audio)
    err = _rel_l2(out32, out16)
    return VerifyResult("f16", err < 2e-2, f"rel_l2={err:.2e}, bound=2e-2")


_SUITE_FN = {
    "causality": suite_causality,
    "streaming": suite_streaming,
    "cola": suite_cola,
    "softmax": suite_softmax,
    "params": suite_params,
    "f16": suite_f16,
}


def run_suites(names, config: ModelConfig, seed: int = 0) -> list[VerifyResult]:
    unknown = [n for n in names if n not in _SUITE_FN]
    if unknown:
        raise ValueError(f"unknown suites: {unknown}; choose from {SUITES}")
    return [_SUITE_FN[n](config, seed) for n in names]
