"""Causal STFT analysis/synthesis with band cut and streaming overlap-add.

Frame convention: frame k windows input samples [k*hop - (window - hop),
k*hop + hop), left-padded with zeros (or a carried analysis tail when
streaming). A signal of L = T*hop samples yields exactly T frames, and no
frame ever reads past the newest input sample.

Synthesis applies the same periodic Hann window and divides the
overlap-added signal by the per-position sum of squared windows, which is
strictly positive at 50% overlap, so analysis -> synthesis reconstructs
interior samples to FFT precision. Per-frame FFT work runs in float64;
spectrogram channels are stored as float32.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import StftConfig


def hann_periodic(n: int) -> np.ndarray:
    """Periodic Hann window of length n (float64)."""
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / n))


def ola_norm(cfg: StftConfig) -> np.ndarray:
    """Per-position normalization over one hop: w^2[m] + w^2[m + hop]."""
    w = hann_periodic(cfg.window)
    return w[: cfg.hop] ** 2 + w[cfg.hop:] ** 2


@dataclass
class OlaState:
    """Streaming carry for analysis and synthesis.

    analysis_tail: last window-hop input samples per channel.
    synthesis_tail: pending (un-normalized) overlap-add samples per channel,
    one hop long, waiting for the next frame's first half.
    frames_seen: synthesis frames consumed so far; the first frame of a
    stream overlaps the pre-stream region only, so it emits nothing.
    """

    analysis_tail: np.ndarray
    synthesis_tail: np.ndarray
    frames_seen: int = 0

    @classmethod
    def zero(cls, cfg: StftConfig, channels: int) -> "OlaState":
        return cls(
            analysis_tail=np.zeros((channels, cfg.window - cfg.hop), dtype=np.float64),
            synthesis_tail=np.zeros((channels, cfg.hop), dtype=np.float64),
        )


def stft_frame(samples: np.ndarray, window: np.ndarray) -> np.ndarray:
    """rfft of one windowed frame. samples: (channels, window) -> (channels, bins)."""
    return np.fft.rfft(samples * window, axis=-1)


def stft_forward(
    audio: np.ndarray, cfg: StftConfig, state: OlaState | None = None
) -> np.ndarray:
    """Analyze (channels, L) audio into a real-valued spectrogram.

    L must be a positive multiple of hop. Returns (2*channels, freq_bins, T)
    float32 with real parts in channels [0, C) and imaginary parts in
    channels [C, 2C), T = L // hop. With a state the analysis tail is
    carried, so chunked calls match one-shot analysis exactly.

    Args:
        audio: (channels, L) waveform.
        cfg: analysis parameters.
        state: optional streaming carry, updated in place.
    """
    audio = np.asarray(audio)
    if audio.ndim != 2:
        raise ValueError("audio must be (channels, samples)")
    channels, length = audio.shape
    if length <= 0 or length % cfg.hop != 0:
        raise ValueError(f"sample count {length} is not a positive multiple of hop")
    tail = (
        state.analysis_tail
        if state is not None
        else np.zeros((channels, cfg.window - cfg.hop), dtype=np.float64)
    )
    window = hann_periodic(cfg.window)
    frames = length // cfg.hop
    out = np.empty((2 * channels, cfg.freq_bins, frames), dtype=np.float32)
    buf = np.empty((channels, cfg.window), dtype=np.float64)
    for k in range(frames):
        block = audio[:, k * cfg.hop:(k + 1) * cfg.hop]
        buf[:, : cfg.window - cfg.hop] = tail
        buf[:, cfg.window - cfg.hop:] = block
        spec = stft_frame(buf, window)[:, : cfg.freq_bins]
        out[:channels, :, k] = spec.real.astype(np.float32)
        out[channels:, :, k] = spec.imag.astype(np.float32)
        tail = buf[:, cfg.hop:].copy()
    if state is not None:
        state.analysis_tail = tail
    return out


def band_restore(spec: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Recombine a (2C, freq_bins, T) spectrogram into full-bin complex frames.

    Bins [0, freq_bins) are copied; the cut bins up to window//2 are
    zero-filled. Returns (C, full_bins, T) complex128.
    """
    spec = np.asarray(spec)
    if spec.ndim != 3 or spec.shape[0] % 2 != 0:
        raise ValueError("spectrogram must be (2*channels, freq_bins, T)")
    if spec.shape[1] != cfg.freq_bins:
        raise ValueError(f"expected {cfg.freq_bins} bins, got {spec.shape[1]}")
    channels = spec.shape[0] // 2
    frames = spec.shape[2]
    full = np.zeros((channels, cfg.full_bins, frames), dtype=np.complex128)
    full[:, : cfg.freq_bins, :] = (
        spec[:channels].astype(np.float64) + 1j * spec[channels:].astype(np.float64)
    )
    return full


def istft_frame(
    frame: np.ndarray, cfg: StftConfig, window: np.ndarray, norm: np.ndarray,
    tail: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Synthesize one frame and advance the overlap-add carry.

    frame: (channels, full_bins) complex. Returns (finalized hop block,
    new pending tail); the finalized block is already normalized.
    """
    y = np.fft.irfft(frame, n=cfg.window, axis=-1) * window
    done = (tail + y[:, : cfg.hop]) / norm
    return done, y[:, cfg.hop:].copy()


def istft_overlap_add(
    frames: np.ndarray, cfg: StftConfig, state: OlaState | None = None
) -> np.ndarray:
    """Overlap-add synthesis of (channels, full_bins, T) complex frames.

    A hop block of output is emitted once its overlap partner frame has
    arrived, so frame k finalizes output samples [(k-1)*hop, k*hop). The
    first frame of a fresh stream overlaps the pre-stream region only and
    emits nothing.

    Without a state (offline convenience) the pending final block is
    appended un-partnered, normalized by the usual profile, so the return
    is (channels, T*hop) float32 with an attenuated last hop; callers that
    need an exact tail feed one extra window of zero input, as the
    streaming engine's flush does. With a state the return holds only the
    finalized blocks and chunked calls concatenate to the one-shot result.
    """
    frames = np.asarray(frames)
    if frames.ndim != 3 or frames.shape[1] != cfg.full_bins:
        raise ValueError("frames must be (channels, full_bins, T)")
    channels, _, count = frames.shape
    if state is not None:
        tail, seen = state.synthesis_tail, state.frames_seen
    else:
        tail = np.zeros((channels, cfg.hop), dtype=np.float64)
        seen = 0
    window = hann_periodic(cfg.window)
    norm = ola_norm(cfg)
    blocks = []
    for k in range(count):
        done, tail = istft_frame(frames[:, :, k], cfg, window, norm, tail)
        if seen + k > 0:
            blocks.append(done.astype(np.float32))
    if state is not None:
        state.synthesis_tail = tail
        state.frames_seen = seen + count
    else:
        blocks.append((tail / norm).astype(np.float32))
    if not blocks:
        return np.empty((channels, 0), dtype=np.float32)
    return np.concatenate(blocks, axis=1)
