"""Stateful real-time pipeline: hop-sized pushes in, per-source audio out.

The engine enforces a uniform algorithmic latency of exactly one window:
output sample s is emitted only once input sample s + window - 1 has been
consumed, so at every hop-aligned point samples_out equals
max(0, samples_in - window). Overlap-add finalizes a hop block one frame
earlier than that; the engine holds the newest finalized block to keep the
latency accounting exact and uniform.

Arbitrary push sizes are accepted; whole hops are processed immediately
and any remainder is buffered. flush() zero-pads one window (plus hop
alignment) to drain the pipeline so total output length equals total
input length, after which the stream must be reset before reuse.
"""

from __future__ import annotations

import numpy as np

from .model import ModelGraph
from .stft import OlaState, band_restore, istft_overlap_add, stft_forward


class StreamClosedError(RuntimeError):
    """Raised when pushing to or flushing an already-flushed stream."""


class SeparationStream:
    """Single-owner streaming state over a shared immutable model."""

    def __init__(self, model: ModelGraph):
        self.model = model
        self.config = model.config
        self._stft = model.config.stft()
        self.reset()

    def reset(self) -> None:
        """Return every buffer to the zero state of a fresh stream."""
        cfg, c0 = self._stft, self.config.audio_channels
        self._analysis = OlaState.zero(cfg, c0)
        self._synth = [OlaState.zero(cfg, c0) for _ in range(self.config.sources)]
        self._model_state = self.model.zero_state()
        self._remainder = np.zeros((c0, 0), dtype=np.float32)
        self._ready: list[np.ndarray] = []
        self.samples_in = 0
        self.samples_out = 0
        self.frames_processed = 0
        self.finished = False

    def latency_samples(self) -> int:
        """Exact input-to-output delay in samples (one analysis window)."""
        return self._stft.latency_samples

    def _process_hops(self, audio: np.ndarray) -> None:
        """Run whole-hop audio (c0, n*hop) through STFT -> model -> iSTFT."""
        cfg = self._stft
        for k in range(audio.shape[1] // cfg.hop):
            block = audio[:, k * cfg.hop:(k + 1) * cfg.hop]
            spec = stft_forward(block, cfg, self._analysis)
            est = self.model.step(spec[:, :, 0], self._model_state)
            est = np.asarray(est, dtype=np.float32)
            parts = []
            for s in range(self.config.sources):
                frames = band_restore(est[s][:, :, None], cfg)
                emitted = istft_overlap_add(frames, cfg, self._synth[s])
                if emitted.shape[1]:
                    parts.append(emitted)
            if parts:
                self._ready.append(np.stack(parts, axis=0))
            self.frames_processed += 1

    def _emit(self, target_out: int) -> np.ndarray:
        """Release finalized blocks until samples_out reaches target_out."""
        c0 = self.config.audio_channels
        chunks = []
        while self.samples_out < target_out and self._ready:
            block = self._ready.pop(0)
            take = min(block.shape[2], target_out - self.samples_out)
            chunks.append(block[:, :, :take])
            self.samples_out += take
        if not chunks:
            return np.zeros((self.config.sources, c0, 0), dtype=np.float32)
        return np.concatenate(chunks, axis=2)

    def push(self, samples: np.ndarray) -> np.ndarray:
        """Feed (audio_channels, n) samples; returns finalized output.

        Returns (sources, audio_channels, m) with m determined by the
        latency rule. Chunking is irrelevant: any partition of the same
        input yields bit-identical concatenated emissions.
        """
        if self.finished:
            raise StreamClosedError("stream already flushed; call reset() first")
        samples = np.asarray(samples, dtype=np.float32)
        if samples.ndim != 2 or samples.shape[0] != self.config.audio_channels:
            raise ValueError(
                f"expected ({self.config.audio_channels}, n) samples, got {samples.shape}")
        self.samples_in += samples.shape[1]
        buf = np.concatenate([self._remainder, samples], axis=1)
        whole = (buf.shape[1] // self._stft.hop) * self._stft.hop
        self._remainder = buf[:, whole:]
        if whole:
            self._process_hops(buf[:, :whole])
        aligned_in = self.samples_in - self._remainder.shape[1]
        return self._emit(max(0, aligned_in - self.latency_samples()))

    def flush(self) -> np.ndarray:
        """Drain with zero padding so total emissions equal total input.

        The stream becomes unusable until reset().
        """
        if self.finished:
            raise StreamClosedError("stream already flushed")
        cfg = self._stft
        pad = (-self._remainder.shape[1]) % cfg.hop + cfg.window
        zeros = np.zeros((self.config.audio_channels, pad), dtype=np.float32)
        buf = np.concatenate([self._remainder, zeros], axis=1)
        self._remainder = buf[:, :0]
        self._process_hops(buf)
        self.finished = True
        return self._emit(self.samples_in)


def separate_offline(model: ModelGraph, audio: np.ndarray) -> np.ndarray:
    """One-shot pipeline on (audio_channels, L) audio.

    Returns (sources, audio_channels, L). Input is zero-padded to a hop
    multiple for analysis and the output is trimmed back to L. The final
    window of output is un-partnered overlap-add (attenuated); streaming
    with flush() reconstructs it exactly instead.
    """
    cfg = model.config.stft()
    audio = np.asarray(audio, dtype=np.float32)
    if audio.ndim != 2 or audio.shape[0] != model.config.audio_channels:
        raise ValueError(
            f"expected ({model.config.audio_channels}, L) audio, got {audio.shape}")
    length = audio.shape[1]
    pad = (-length) % cfg.hop
    if pad:
        audio = np.concatenate(
            [audio, np.zeros((audio.shape[0], pad), dtype=np.float32)], axis=1)
    spec = stft_forward(audio, cfg)
    est = np.asarray(model.forward(spec), dtype=np.float32)
    stems = []
    for s in range(model.config.sources):
        frames = band_restore(est[s], cfg)
        stems.append(istft_overlap_add(frames, cfg))
    return np.stack(stems, axis=0)[:, :, :length]


def separate(model: ModelGraph, audio: np.ndarray, chunk_hops: int = 64) -> np.ndarray:
    """Separate via the streaming engine with a final flush.

    Returns (sources, audio_channels, L) stems of exactly the input length.
    """
    stream = SeparationStream(model)
    audio = np.asarray(audio, dtype=np.float32)
    step = chunk_hops * model.config.hop
    parts = []
    for start in range(0, audio.shape[1], step):
        parts.append(stream.push(audio[:, start:start + step]))
    parts.append(stream.flush())
    return np.concatenate(parts, axis=2)
