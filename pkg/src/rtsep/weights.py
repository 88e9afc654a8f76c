"""Deterministic weight initialization and the RTST binary container.

File layout (all integers little-endian):

    magic   4 bytes  b"RTST"
    version u16      currently 1
    config  26 bytes fixed-width fields, see _pack_config
    count   u32      number of tensor entries
    entries          name_len u16, name utf-8, dtype u8 (0=f32, 1=f16),
                     ndim u8, dims u32 each, raw payload
    crc     u32      CRC-32 (IEEE) of every preceding byte

Initialization draws every matrix weight uniformly from
[-1/sqrt(fan_in), +1/sqrt(fan_in)] using the Philox 4x64-10 counter-based
generator keyed by the seed, in parameter_spec order; biases and norm
offsets start at zero, norm gains at one. Philox makes the byte stream
identical across platforms for a given (config, seed).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .config import DTYPES, FUSION_MODES, PATH_MODES, ModelConfig
from .model import parameter_spec

MAGIC = b"RTST"
VERSION = 1

_DTYPE_CODE = {"f32": 0, "f16": 1}
_DTYPE_NAME = {0: "f32", 1: "f16"}
_NP_DTYPE = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}


class WeightFileError(Exception):
    """Base class for weight container failures."""


class InvalidMagicError(WeightFileError):
    pass


class UnsupportedVersionError(WeightFileError):
    pass


class ChecksumError(WeightFileError):
    pass


class TruncatedFileError(WeightFileError):
    pass


class IncompatibleWeightsError(WeightFileError):
    pass


@dataclass
class WeightSet:
    """A model configuration plus its ordered named tensors."""

    config: ModelConfig
    entries: list[tuple[str, np.ndarray]]

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.entries)

    def payload_bytes(self) -> int:
        return sum(arr.nbytes for _, arr in self.entries)


def random_init(config: ModelConfig, seed: int = 0) -> WeightSet:
    """Draw a fresh WeightSet for the given configuration.

    Matrix weights are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)];
    biases zero; norm gains one. Tensors are drawn in parameter_spec order
    from one Philox stream, as float32, then cast to the config dtype.
    """
    config = config.canonical()
    gen = np.random.Generator(np.random.Philox(key=seed))
    target = _NP_DTYPE[config.dtype]
    entries = []
    for spec in parameter_spec(config):
        if spec.init == "uniform":
            bound = 1.0 / np.sqrt(spec.fan_in)
            arr = gen.uniform(-bound, bound, size=spec.shape).astype(np.float32)
        elif spec.init == "ones":
            arr = np.ones(spec.shape, dtype=np.float32)
        else:
            arr = np.zeros(spec.shape, dtype=np.float32)
        entries.append((spec.name, arr.astype(target)))
    return WeightSet(config=config, entries=entries)


def to_f16(ws: WeightSet) -> WeightSet:
    """Cast an f32 WeightSet to half precision (round-to-nearest-even)."""
    if ws.config.dtype != "f32":
        raise IncompatibleWeightsError("weight set is already half precision")
    entries = [(name, arr.astype(np.dtype("<f2"))) for name, arr in ws.entries]
    return WeightSet(config=ws.config.with_overrides(dtype="f16"), entries=entries)


def _pack_config(cfg: ModelConfig) -> bytes:
    return struct.pack(
        "<HIIIHHHHHHBBBB",
        cfg.audio_channels, cfg.window, cfg.hop, cfg.freq_bins,
        cfg.base_channels, cfg.layers, cfg.path_repeats, cfg.sources,
        cfg.tdf_width, cfg.hidden_size,
        PATH_MODES.index(cfg.path_mode), FUSION_MODES.index(cfg.fusion_mode),
        _DTYPE_CODE[cfg.dtype], 0,
    )


_CONFIG_SIZE = struct.calcsize("<HIIIHHHHHHBBBB")


def _unpack_config(raw: bytes) -> ModelConfig:
    (audio_channels, window, hop, freq_bins, base_channels, layers,
     path_repeats, sources, tdf_width, hidden, path_i, fusion_i,
     dtype_i, _reserved) = struct.unpack("<HIIIHHHHHHBBBB", raw)
    try:
        return ModelConfig(
            audio_channels=audio_channels, window=window, hop=hop,
            freq_bins=freq_bins, base_channels=base_channels, layers=layers,
            path_repeats=path_repeats, sources=sources,
            freq_bottleneck=tdf_width, lstm_hidden=hidden,
            path_mode=PATH_MODES[path_i], fusion_mode=FUSION_MODES[fusion_i],
            dtype=_DTYPE_NAME[dtype_i],
        )
    except (ValueError, IndexError, KeyError) as exc:
        raise IncompatibleWeightsError(f"invalid embedded config: {exc}") from exc


def save(ws: WeightSet, path) -> None:
    """Write the container; round trips are bit-exact."""
    parts = [MAGIC, struct.pack("<H", VERSION), _pack_config(ws.config),
             struct.pack("<I", len(ws.entries))]
    for name, arr in ws.entries:
        encoded = name.encode("utf-8")
        dtype_name = "f16" if arr.dtype == np.float16 else "f32"
        arr = np.ascontiguousarray(arr, dtype=_NP_DTYPE[dtype_name])
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", _DTYPE_CODE[dtype_name], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(blob)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.blob)}")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u(self, fmt: str) -> int:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))[0]


def load(path) -> WeightSet:
    """Read and validate a container.

    Raises a distinct error per failure: InvalidMagicError,
    UnsupportedVersionError, ChecksumError, TruncatedFileError, or
    IncompatibleWeightsError when entries disagree with the embedded
    config's expected graph.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 2 + _CONFIG_SIZE + 4 + 4:
        raise TruncatedFileError(f"file too short ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise InvalidMagicError(f"bad magic {blob[:4]!r}")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("CRC-32 mismatch")
    rd = _Reader(blob[:-4])
    rd.take(4)
    version = rd.u("<H")
    if version != VERSION:
        raise UnsupportedVersionError(f"version {version} not supported")
    config = _unpack_config(rd.take(_CONFIG_SIZE))
    count = rd.u("<I")
    entries = []
    for _ in range(count):
        name_len = rd.u("<H")
        name = rd.take(name_len).decode("utf-8")
        dtype_i = rd.u("<B")
        if dtype_i not in _DTYPE_NAME:
            raise IncompatibleWeightsError(f"unknown tensor dtype code {dtype_i}")
        ndim = rd.u("<B")
        shape = tuple(rd.u("<I") for _ in range(ndim))
        np_dtype = _NP_DTYPE[_DTYPE_NAME[dtype_i]]
        n = 1
        for dim in shape:
            n *= dim
        raw = rd.take(n * np_dtype.itemsize)
        entries.append((name, np.frombuffer(raw, dtype=np_dtype).reshape(shape).copy()))
    if rd.pos != len(rd.blob):
        raise TruncatedFileError(f"{len(rd.blob) - rd.pos} trailing bytes after entries")
    ws = WeightSet(config=config, entries=entries)
    _check_against_graph(ws)
    return ws


def _check_against_graph(ws: WeightSet) -> None:
    expected = parameter_spec(ws.config)
    want_dtype = _NP_DTYPE[ws.config.dtype]
    if len(expected) != len(ws.entries):
        raise IncompatibleWeightsError(
            f"expected {len(expected)} tensors, file has {len(ws.entries)}")
    for spec, (name, arr) in zip(expected, ws.entries):
        if name != spec.name:
            raise IncompatibleWeightsError(f"tensor {name!r} where {spec.name!r} expected")
        if tuple(arr.shape) != spec.shape:
            raise IncompatibleWeightsError(
                f"tensor {name}: shape {tuple(arr.shape)} != expected {spec.shape}")
        if arr.dtype != want_dtype:
            raise IncompatibleWeightsError(
                f"tensor {name}: dtype {arr.dtype} != config dtype {ws.config.dtype}")
