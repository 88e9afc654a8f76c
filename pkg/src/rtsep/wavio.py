"""Minimal RIFF/WAVE reader and writer.

Reads PCM 16/24-bit and IEEE float 32-bit, mono or stereo; integer formats
scale to [-1, 1) with -32768 mapping exactly to -1.0. Unknown chunks are
skipped. Writing supports float32 (lossless) and pcm16 (clipped to
[-1, 1) before scaling).
"""

from __future__ import annotations

import struct

import numpy as np


class WavError(Exception):
    """Base class for WAV read/write failures."""


class MalformedRiffError(WavError):
    pass


class UnsupportedCodecError(WavError):
    pass


class UnsupportedLayoutError(WavError):
    pass


_PCM = 1
_IEEE_FLOAT = 3


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file into ((channels, samples) float32, sample_rate)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedRiffError("not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack("<I", blob[pos + 4:pos + 8])
        body = blob[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise MalformedRiffError(f"chunk {cid!r} truncated")
        if cid == b"fmt ":
            if size < 16:
                raise MalformedRiffError("fmt chunk too small")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise MalformedRiffError("missing fmt or data chunk")
    codec, channels, rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedLayoutError(f"{channels} channels not supported (mono/stereo only)")
    if codec == _PCM and bits == 16:
        raw = np.frombuffer(data[: len(data) - len(data) % (2 * channels)], dtype="<i2")
        samples = raw.astype(np.float32) / 32768.0
    elif codec == _PCM and bits == 24:
        usable = len(data) - len(data) % (3 * channels)
        b = np.frombuffer(data[:usable], dtype=np.uint8).reshape(-1, 3)
        ints = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        samples = ints.astype(np.float32) / float(1 << 23)
    elif codec == _IEEE_FLOAT and bits == 32:
        usable = len(data) - len(data) % (4 * channels)
        samples = np.frombuffer(data[:usable], dtype="<f4").astype(np.float32)
    else:
        raise UnsupportedCodecError(f"codec {codec} at {bits} bits not supported")
    return np.ascontiguousarray(samples.reshape(-1, channels).T), int(rate)


def write_wav(path, data: np.ndarray, sample_rate: int, fmt: str = "float32") -> None:
    """Write (channels, samples) audio. fmt is 'float32' or 'pcm16'."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2 or data.shape[0] not in (1, 2):
        raise UnsupportedLayoutError(f"cannot write shape {data.shape} (mono/stereo only)")
    interleaved = np.ascontiguousarray(data.T)
    if fmt == "float32":
        codec, bits = _IEEE_FLOAT, 32
        payload = interleaved.astype("<f4").tobytes()
    elif fmt == "pcm16":
        codec, bits = _PCM, 16
        scaled = np.clip(np.rint(interleaved.astype(np.float64) * 32768.0),
                         -32768, 32767).astype("<i2")
        payload = scaled.tobytes()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    channels = data.shape[0]
    block_align = channels * bits // 8
    header = (
        b"WAVE"
        + b"fmt " + struct.pack("<I", 16)
        + struct.pack("<HHIIHH", codec, channels, sample_rate,
                      sample_rate * block_align, block_align, bits)
        + b"data" + struct.pack("<I", len(payload))
    )
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(header) + len(payload)))
        fh.write(header + payload)
