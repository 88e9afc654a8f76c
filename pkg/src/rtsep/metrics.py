"""Separation quality metrics: SDR, chunk-level cSDR, track-level uSDR.

sdr follows the plain energy-ratio definition over all channels jointly:
10*log10(||ref||^2 / ||ref - est||^2). cSDR splits each track into
non-overlapping 1-second chunks (trailing partial chunk dropped), takes
the median of chunk SDRs within a track, then the median across tracks.
uSDR averages whole-track SDRs across tracks. Sources are paired by label;
no permutation search.

Perfect reconstruction is reported as +inf by sdr() and capped at
SDR_CAP dB inside aggregates; silent-reference chunks are skipped and a
fully silent reference yields None (undefined) rather than a number.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

SDR_CAP = 100.0


def sdr(reference: np.ndarray, estimate: np.ndarray) -> float | None:
    """Signal-to-distortion ratio in dB, or inf/None for the edge cases."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    ref_energy = float(np.sum(ref * ref))
    if ref_energy == 0.0:
        return None
    err = ref - est
    err_energy = float(np.sum(err * err))
    if err_energy == 0.0:
        return math.inf
    return 10.0 * math.log10(ref_energy / err_energy)


def _capped(value: float | None) -> float | None:
    if value is None:
        return None
    return min(value, SDR_CAP)


def chunk_sdrs(reference: np.ndarray, estimate: np.ndarray, sample_rate: int,
               chunk_seconds: float = 1.0) -> list[float]:
    """Per-chunk SDRs (capped); silent-reference chunks are skipped."""
    ref = np.atleast_2d(np.asarray(reference))
    est = np.atleast_2d(np.asarray(estimate))
    size = int(round(chunk_seconds * sample_rate))
    out = []
    for start in range(0, ref.shape[1] - size + 1, size):
        value = sdr(ref[:, start:start + size], est[:, start:start + size])
        if value is not None:
            out.append(_capped(value))
    return out


def _median(values: list[float]) -> float | None:
    if not values:
        return None
    return float(np.median(values))


def csdr(refs, ests, sample_rate: int, chunk_seconds: float = 1.0) -> float | None:
    """Chunk-level SDR for one source: median over tracks of per-track
    chunk medians. refs/ests are sequences of aligned track arrays."""
    per_track = []
    for ref, est in zip(refs, ests):
        track_median = _median(chunk_sdrs(ref, est, sample_rate, chunk_seconds))
        if track_median is not None:
            per_track.append(track_median)
    return _median(per_track)


def usdr(refs, ests) -> float | None:
    """Track-level SDR for one source: mean over tracks of whole-track SDR."""
    values = []
    for ref, est in zip(refs, ests):
        value = _capped(sdr(ref, est))
        if value is not None:
            values.append(value)
    if not values:
        return None
    return float(np.mean(values))


@dataclass
class SdrReport:
    """Per-source, per-track results plus aggregates."""

    sources: list[str]
    tracks: list[str]
    chunk_lists: dict = field(default_factory=dict)   # (track, source) -> [dB]
    track_sdr: dict = field(default_factory=dict)     # (track, source) -> dB | None
    csdr_per_source: dict = field(default_factory=dict)
    usdr_per_source: dict = field(default_factory=dict)

    @property
    def csdr_overall(self) -> float | None:
        vals = [v for v in self.csdr_per_source.values() if v is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def usdr_overall(self) -> float | None:
        vals = [v for v in self.usdr_per_source.values() if v is not None]
        return float(np.mean(vals)) if vals else None

    def records(self) -> list[dict]:
        """One structured record per (track, source)."""
        out = []
        for track in self.tracks:
            for source in self.sources:
                chunks = self.chunk_lists.get((track, source), [])
                out.append({
                    "track": track,
                    "source": source,
                    "track_sdr_db": self.track_sdr.get((track, source)),
                    "chunk_median_db": _median(chunks),
                    "chunks": len(chunks),
                })
        return out

    def records_jsonl(self) -> str:
        return "\n".join(json.dumps(r) for r in self.records())

    def table(self) -> str:
        """Aligned text table of per-source aggregates."""
        def cell(v):
            return f"{v:8.3f}" if v is not None else "     n/a"
        lines = [f"{'source':<10} {'cSDR (dB)':>9} {'uSDR (dB)':>9}"]
        for source in self.sources:
            lines.append(
                f"{source:<10} {cell(self.csdr_per_source.get(source))} "
                f"{cell(self.usdr_per_source.get(source))}")
        lines.append(
            f"{'all':<10} {cell(self.csdr_overall)} {cell(self.usdr_overall)}")
        return "\n".join(lines)


def evaluate(pairs: dict, sample_rate: int, chunk_seconds: float = 1.0) -> SdrReport:
    """Evaluate {track: {source: (ref, est)}} into an SdrReport."""
    tracks = list(pairs)
    sources = list(next(iter(pairs.values()))) if pairs else []
    report = SdrReport(sources=sources, tracks=tracks)
    for track, by_source in pairs.items():
        for source, (ref, est) in by_source.items():
            chunks = chunk_sdrs(ref, est, sample_rate, chunk_seconds)
            report.chunk_lists[(track, source)] = chunks
            report.track_sdr[(track, source)] = _capped(sdr(ref, est))
    for source in sources:
        refs = [pairs[t][source][0] for t in tracks]
        ests = [pairs[t][source][1] for t in tracks]
        report.csdr_per_source[source] = csdr(refs, ests, sample_rate, chunk_seconds)
        report.usdr_per_source[source] = usdr(refs, ests)
    return report
