"""Command line interface.

Subcommands: init-weights, quantize, demix, stream, verify, bench, eval.
Every subcommand exits nonzero on a contract violation and never leaves
partial output behind silently. The raw stream protocol reads interleaved
little-endian float32 stereo from stdin and writes interleaved
little-endian float32 blocks (source-major per sample) to stdout, whole
hops only.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import metrics, verify, wavio
from . import weights as weights_io
from .config import SAMPLE_RATE, ModelConfig
from .model import build_model, parameter_count, parameter_spec
from .streaming import SeparationStream, separate

STEM_NAMES = ("vocals", "drums", "bass", "other")


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _stem_names(sources: int) -> list[str]:
    if sources == len(STEM_NAMES):
        return list(STEM_NAMES)
    return [f"source{i}" for i in range(sources)]


def _add_config_flags(parser: argparse.ArgumentParser, multi: bool = False) -> None:
    """Model configuration flags. With multi=True each flag may repeat to
    span a benchmark comparison axis."""
    kw = {"action": "append"} if multi else {}
    parser.add_argument("-g", "--base-channels", type=int, **kw)
    parser.add_argument("--layers", type=int, **kw)
    parser.add_argument("-L", "--path-repeats", type=int, **kw)
    parser.add_argument("--sources", type=int)
    parser.add_argument("--window", type=int)
    parser.add_argument("--hop", type=int)
    parser.add_argument("--freq-bins", type=int)
    parser.add_argument("--path-mode", choices=["single", "dual"], **kw)
    parser.add_argument("--fusion-mode", choices=["joint", "separate"], **kw)
    parser.add_argument("--dtype", choices=["f32", "f16"], **kw)


_FLAG_FIELD = {
    "base_channels": "base_channels",
    "layers": "layers",
    "path_repeats": "path_repeats",
    "sources": "sources",
    "window": "window",
    "hop": "hop",
    "freq_bins": "freq_bins",
    "path_mode": "path_mode",
    "fusion_mode": "fusion_mode",
    "dtype": "dtype",
}


def _config_from_args(args, multi: bool = False) -> ModelConfig:
    overrides = {}
    for flag, field in _FLAG_FIELD.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if multi and isinstance(value, list):
            value = value[0] if len(value) == 1 else None
            if value is None:
                continue
        overrides[field] = value
    return ModelConfig().with_overrides(**overrides)


def _load_model(path, args):
    ws = weights_io.load(path)
    for flag, field in _FLAG_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None and getattr(ws.config, field) != value:
            raise ValueError(
                f"--{flag.replace('_', '-')}={value} conflicts with the embedded "
                f"config ({field}={getattr(ws.config, field)})")
    return build_model(ws.config, ws.as_dict())


def cmd_init_weights(args) -> int:
    cfg = _config_from_args(args)
    ws = weights_io.random_init(cfg, seed=args.seed)
    weights_io.save(ws, args.output)
    print(f"wrote {args.output}: {bench_mod.config_fingerprint(ws.config)}, "
          f"{parameter_count(parameter_spec(ws.config))} parameters")
    return 0


def cmd_quantize(args) -> int:
    ws = weights_io.load(args.input)
    half = weights_io.to_f16(ws)
    weights_io.save(half, args.output)
    before = ws.payload_bytes()
    after = half.payload_bytes()
    print(f"wrote {args.output}: tensor payload {before} -> {after} bytes")
    return 0


def cmd_demix(args) -> int:
    model = _load_model(args.model, args)
    audio, rate = wavio.read_wav(args.input)
    if rate != SAMPLE_RATE:
        return _fail(f"sample rate {rate} != required {SAMPLE_RATE}")
    if audio.shape[0] != model.config.audio_channels:
        return _fail(f"input has {audio.shape[0]} channels, model expects "
                     f"{model.config.audio_channels}")
    stems = separate(model, audio)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(_stem_names(model.config.sources)):
        wavio.write_wav(out_dir / f"{name}.wav", stems[i], rate, fmt=args.format)
    print(f"wrote {model.config.sources} stems to {out_dir}")
    return 0


def cmd_stream(args) -> int:
    model = _load_model(args.model, args)
    c0 = model.config.audio_channels
    frame_bytes = 4 * c0
    stream = SeparationStream(model)
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def emit(block: np.ndarray) -> None:
        if block.shape[2] == 0:
            return
        # (S, c0, n) -> per-sample source-major interleave
        stdout.write(np.ascontiguousarray(
            block.transpose(2, 0, 1)).astype("<f4").tobytes())
        stdout.flush()

    leftover = b""
    while True:
        chunk = stdin.read(65536)
        if not chunk:
            break
        data = leftover + chunk
        usable = len(data) - len(data) % frame_bytes
        leftover = data[usable:]
        if usable:
            samples = np.frombuffer(data[:usable], dtype="<f4").reshape(-1, c0).T
            emit(stream.push(samples))
    emit(stream.flush())
    if leftover:
        return _fail(f"input ended mid-frame ({len(leftover)} stray bytes)", code=3)
    return 0


def cmd_verify(args) -> int:
    cfg = _config_from_args(args)
    names = args.suite or list(verify.SUITES)
    results = verify.run_suites(names, cfg, seed=args.seed)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_bench(args) -> int:
    axes = {}
    fixed = {}
    for flag in ("base_channels", "layers", "path_repeats", "path_mode",
                 "fusion_mode", "dtype"):
        values = getattr(args, flag)
        if not values:
            continue
        axis = {"base_channels": "g", "path_repeats": "l_repeats"}.get(flag, flag)
        unique = list(dict.fromkeys(values))
        if len(unique) > 1:
            axes[axis] = unique
        else:
            fixed[flag] = unique[0]
    for flag in ("sources", "window", "hop", "freq_bins"):
        value = getattr(args, flag)
        if value is not None:
            fixed[flag] = value
    for axis in args.compare or []:
        axes.setdefault(axis, bench_mod.DEFAULT_AXES[axis])
    base = ModelConfig().with_overrides(**fixed)
    if not axes:
        ws = weights_io.random_init(base, seed=args.seed)
        model = build_model(ws.config, ws.as_dict())
        pipeline = bench_mod.bench_forward(
            model, args.input_samples, args.iterations, args.warmup, True, seed=args.seed)
        network = bench_mod.bench_forward(
            model, args.input_samples, args.iterations, args.warmup, False, seed=args.seed)
        print(pipeline.summary())
        print(network.summary())
        if args.records:
            Path(args.records).write_text(json.dumps({
                "fingerprint": pipeline.fingerprint,
                "pipeline_median_ms": pipeline.median_ms,
                "network_median_ms": network.median_ms,
                "rtf": pipeline.rtf,
            }) + "\n")
        return 0
    rows = bench_mod.compare_variants(
        base, axes, args.input_samples, args.iterations, args.warmup, seed=args.seed)
    print(bench_mod.variants_table(rows))
    if args.records:
        Path(args.records).write_text(bench_mod.variants_jsonl(rows) + "\n")
    if args.assert_trends:
        failed = False
        for claim, ok, detail in bench_mod.check_trends(rows, axes):
            print(f"trend {claim}: {'OK' if ok else 'VIOLATED'} [{detail}]")
            failed = failed or not ok
        if failed:
            return 1
    return 0


def _collect_tracks(ref_dir: Path, est_dir: Path) -> tuple[dict, int]:
    """Builds {track: {source: (ref, est)}} from two directory trees.

    Each directory either holds stem wavs directly (one track) or one
    subdirectory of stem wavs per track.
    """
    def track_dirs(root: Path):
        subs = sorted(p for p in root.iterdir() if p.is_dir())
        if subs:
            return {p.name: p for p in subs}
        return {root.name: root}

    refs, ests = track_dirs(ref_dir), track_dirs(est_dir)
    common_tracks = sorted(set(refs) & set(ests))
    if not common_tracks:
        raise ValueError("no common tracks between --ref and --est")
    pairs = {}
    rate = None
    for track in common_tracks:
        ref_stems = {p.stem: p for p in refs[track].glob("*.wav")}
        est_stems = {p.stem: p for p in ests[track].glob("*.wav")}
        sources = sorted(set(ref_stems) & set(est_stems))
        if not sources:
            raise ValueError(f"track {track}: no common stem files")
        by_source = {}
        for source in sources:
            ref, r1 = wavio.read_wav(ref_stems[source])
            est, r2 = wavio.read_wav(est_stems[source])
            if r1 != r2:
                raise ValueError(f"{track}/{source}: sample rates differ")
            n = min(ref.shape[1], est.shape[1])
            by_source[source] = (ref[:, :n], est[:, :n])
            rate = r1
        pairs[track] = by_source
    return pairs, rate


def cmd_eval(args) -> int:
    pairs, rate = _collect_tracks(Path(args.ref), Path(args.est))
    report = metrics.evaluate(pairs, rate, chunk_seconds=args.chunk_seconds)
    print(report.table())
    if args.records:
        Path(args.records).write_text(report.records_jsonl() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtsep", description="Real-time music source separation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-weights", help="write deterministically seeded weights")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("output")
    p.set_defaults(fn=cmd_init_weights)

    p = sub.add_parser("quantize", help="convert an f32 weight file to f16")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=cmd_quantize)

    p = sub.add_parser("demix", help="separate a WAV file into stem files")
    _add_config_flags(p)
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output_dir")
    p.add_argument("--format", choices=["float32", "pcm16"], default="float32")
    p.set_defaults(fn=cmd_demix)

    p = sub.add_parser("stream", help="separate raw float32 audio from stdin to stdout")
    _add_config_flags(p)
    p.add_argument("model")
    p.set_defaults(fn=cmd_stream)

    p = sub.add_parser("verify", help="run invariant suites")
    _add_config_flags(p)
    p.add_argument("--suite", action="append", choices=list(verify.SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="benchmark forward passes")
    _add_config_flags(p, multi=True)
    p.add_argument("--compare", action="append",
                   choices=list(bench_mod.DEFAULT_AXES))
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--input-samples", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", help="write line-delimited JSON records here")
    p.add_argument("--assert-trends", action="store_true",
                   help="exit nonzero if a canonical ordering is violated")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("eval", help="score estimated stems against references")
    p.add_argument("--ref", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--chunk-seconds", type=float, default=1.0)
    p.add_argument("--records", help="write line-delimited JSON records here")
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (weights_io.WeightFileError, wavio.WavError, ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
