"""The separation network: encoder, latent recurrent stack, fused decoder.

Dataflow per frame (default single-path, joint-fusion configuration):

    spectrogram (C, F) -> 1x1 conv to base width
    -> per encoder layer: conv block (skip saved), 1x1 conv doubling width
    -> latent: conv block, stacked recurrent path modules, 1x1 source
       expansion, softmax across the source axis
    -> per decoder layer: 1x1 fusion conv halving width (joint mixes all
       sources in one matmul, separate keeps per-source groups),
       multiplicative skips around a shared conv block
    -> 1x1 conv back to spectrogram channels, per source

Every operation is causal in time. Batch forward iterates the identical
per-frame step used when streaming, so chunked evaluation with carried
state is bit-exact against one-shot evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .kernels import CausalConv2d, Dense, FrameNorm, Lstm, PointwiseConv, gelu, softmax

KERNEL_TIME = 3
KERNEL_FREQ = 3


@dataclass(frozen=True)
class ParamSpec:
    """One named weight tensor: shape, init family, and fan-in for scaling."""

    name: str
    shape: tuple[int, ...]
    init: str      # "uniform" | "zeros" | "ones"
    fan_in: int = 0

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


def _conv_specs(name: str, out_c: int, in_c: int, groups: int = 1,
                kernel: tuple[int, int] = (KERNEL_TIME, KERNEL_FREQ)):
    kt, kf = kernel
    fan = (in_c // groups) * kt * kf
    return [
        ParamSpec(f"{name}.weight", (out_c, in_c // groups, kt, kf), "uniform", fan),
        ParamSpec(f"{name}.bias", (out_c,), "zeros"),
    ]


def _pconv_specs(name: str, out_c: int, in_c: int, groups: int = 1):
    fan = in_c // groups
    return [
        ParamSpec(f"{name}.weight", (out_c, in_c // groups), "uniform", fan),
        ParamSpec(f"{name}.bias", (out_c,), "zeros"),
    ]


def _dense_specs(name: str, out_f: int, in_f: int):
    return [
        ParamSpec(f"{name}.weight", (out_f, in_f), "uniform", in_f),
        ParamSpec(f"{name}.bias", (out_f,), "zeros"),
    ]


def _norm_specs(name: str, channels: int):
    return [
        ParamSpec(f"{name}.gain", (channels,), "ones"),
        ParamSpec(f"{name}.offset", (channels,), "zeros"),
    ]


def _lstm_specs(name: str, input_size: int, hidden: int):
    return [
        ParamSpec(f"{name}.w_ih", (input_size, 4 * hidden), "uniform", input_size),
        ParamSpec(f"{name}.w_hh", (hidden, 4 * hidden), "uniform", hidden),
        ParamSpec(f"{name}.bias", (4 * hidden,), "zeros"),
    ]


def _block_specs(name: str, width: int, freq: int, bottleneck: int):
    specs = []
    for part in ("tfc1", "tfc2"):
        for i in (0, 1):
            specs += _conv_specs(f"{name}.{part}.conv{i}", width, width)
            specs += _norm_specs(f"{name}.{part}.norm{i}", width)
        if part == "tfc1":
            specs += _dense_specs(f"{name}.tdf.fc1", bottleneck, freq)
            specs += _dense_specs(f"{name}.tdf.fc2", freq, bottleneck)
    specs += _conv_specs(f"{name}.res", width, width)
    return specs


def _rnn_block_specs(name: str, width: int, hidden: int):
    return (
        _norm_specs(f"{name}.norm", width)
        + _lstm_specs(f"{name}.lstm", width, hidden)
        + _dense_specs(f"{name}.proj", width, hidden)
    )


def parameter_spec(config: ModelConfig) -> list[ParamSpec]:
    """Canonical ordered list of every weight tensor the graph owns."""
    c = config.spec_channels
    g = config.base_channels
    freq = config.freq_bins
    d = config.tdf_width
    s = config.sources
    hidden = config.hidden_size
    wl = config.latent_channels
    specs = _pconv_specs("enc_in", g, c)
    for i in range(1, config.layers + 1):
        w = g * (2 ** (i - 1))
        specs += _block_specs(f"enc{i}.block", w, freq, d)
        specs += _pconv_specs(f"enc{i}.down", 2 * w, w)
    specs += _block_specs("latent.block", wl, freq, d)
    for j in range(config.path_repeats):
        for b in (0, 1):
            specs += _rnn_block_specs(f"latent.path{j}.blk{b}", wl, hidden)
    specs += _pconv_specs("latent.expand", s * wl, wl)
    for i in range(config.layers, 0, -1):
        w = g * (2 ** (i - 1))
        if config.fusion_mode == "joint":
            specs += _pconv_specs(f"dec{i}.fuse", s * w, s * 2 * w)
        else:
            specs += _pconv_specs(f"dec{i}.fuse", s * w, s * 2 * w, groups=s)
        specs += _block_specs(f"dec{i}.block", w, freq, d)
    specs += _pconv_specs("out", c, g)
    return specs


def parameter_count(specs_or_model) -> int:
    """Total scalar count across all weight tensors."""
    if isinstance(specs_or_model, ModelGraph):
        return sum(p.size for p in parameter_spec(specs_or_model.config))
    return sum(p.size for p in specs_or_model)


class TfcTdfBlock:
    """Conv block: two conv+norm+gelu pairs, a residual frequency
    bottleneck, two more conv+norm+gelu pairs, plus a single-conv residual
    from the block input. Output shape equals input shape."""

    def __init__(self, name: str, p: dict, lead: tuple = ()):
        self.name = name
        self.lead = lead
        def conv(k):
            return CausalConv2d(p[f"{name}.{k}.weight"], p[f"{name}.{k}.bias"])
        def norm(k):
            return FrameNorm(p[f"{name}.{k}.gain"], p[f"{name}.{k}.offset"])
        self.pairs1 = [(f"{name}.tfc1.conv{i}", conv(f"tfc1.conv{i}"),
                        norm(f"tfc1.norm{i}")) for i in (0, 1)]
        self.pairs2 = [(f"{name}.tfc2.conv{i}", conv(f"tfc2.conv{i}"),
                        norm(f"tfc2.norm{i}")) for i in (0, 1)]
        self.fc1 = Dense(p[f"{name}.tdf.fc1.weight"], p[f"{name}.tdf.fc1.bias"])
        self.fc2 = Dense(p[f"{name}.tdf.fc2.weight"], p[f"{name}.tdf.fc2.bias"])
        self.res_key = f"{name}.res"
        self.res = CausalConv2d(p[f"{name}.res.weight"], p[f"{name}.res.bias"])

    def convs(self):
        for key, cv, _ in self.pairs1 + self.pairs2:
            yield key, cv, self.lead
        yield self.res_key, self.res, self.lead

    def step(self, x: np.ndarray, state: dict) -> np.ndarray:
        """x: (..., width, F) one frame."""
        y = x
        for key, cv, nm in self.pairs1:
            y, _ = cv.step(y, state[key])
            y = gelu(nm.step(y))
        y = y + self.fc2(gelu(self.fc1(y)))
        for key, cv, nm in self.pairs2:
            y, _ = cv.step(y, state[key])
            y = gelu(nm.step(y))
        r, _ = self.res.step(x, state[self.res_key])
        return y + r


class RnnBlock:
    """norm -> LSTM over one axis -> linear back to the feature width, with
    a residual connection around the whole block."""

    def __init__(self, name: str, p: dict):
        self.name = name
        self.norm = FrameNorm(p[f"{name}.norm.gain"], p[f"{name}.norm.offset"])
        self.lstm = Lstm(p[f"{name}.lstm.w_ih"], p[f"{name}.lstm.w_hh"],
                         p[f"{name}.lstm.bias"])
        self.proj = Dense(p[f"{name}.proj.weight"], p[f"{name}.proj.bias"])

    def step_time(self, x: np.ndarray, state: dict) -> np.ndarray:
        """One time step. x: (width, F); LSTM batches over frequency bins."""
        y = self.norm.step(x)
        seq = np.ascontiguousarray(y.T, dtype=np.float32)  # (F, width)
        h, st = self.lstm.step(seq, state[self.name])
        state[self.name] = st
        if x.dtype == np.float16:
            h = h.astype(np.float16)
        out = self.proj(h)
        return x + out.T

    def step_freq(self, x: np.ndarray) -> np.ndarray:
        """Sweep over frequency within one frame; no cross-frame state."""
        y = self.norm.step(x)
        seq = np.ascontiguousarray(y.T, dtype=np.float32)[None]  # (1, F, width)
        h, _ = self.lstm.forward(seq)
        h = h[0]
        if x.dtype == np.float16:
            h = h.astype(np.float16)
        out = self.proj(h)
        return x + out.T


class PathModule:
    """Two stacked recurrent blocks in the latent stage.

    single mode: both blocks iterate over time (state carried per stream).
    dual mode: the first block iterates over time, the second reorders
    dimensions and sweeps the frequency axis within each frame.
    """

    def __init__(self, name: str, p: dict, mode: str):
        self.name = name
        self.mode = mode
        self.blk0 = RnnBlock(f"{name}.blk0", p)
        self.blk1 = RnnBlock(f"{name}.blk1", p)

    def carried(self):
        yield self.blk0.name, self.blk0.lstm
        if self.mode == "single":
            yield self.blk1.name, self.blk1.lstm

    def step(self, x: np.ndarray, state: dict) -> np.ndarray:
        x = self.blk0.step_time(x, state)
        if self.mode == "single":
            return self.blk1.step_time(x, state)
        return self.blk1.step_freq(x)


class ModelGraph:
    """The full network: immutable weights plus a per-frame step.

    Construct via build_model(); weights are a flat name -> array mapping
    following parameter_spec(config) order.
    """

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        expected = parameter_spec(config)
        missing = [p.name for p in expected if p.name not in params]
        if missing:
            raise ValueError(f"missing weight tensors: {missing[:4]}...")
        for p in expected:
            arr = params[p.name]
            if tuple(arr.shape) != p.shape:
                raise ValueError(
                    f"weight {p.name}: expected shape {p.shape}, got {tuple(arr.shape)}")
            if not np.all(np.isfinite(np.asarray(arr, dtype=np.float32))):
                raise ValueError(f"weight {p.name} contains non-finite values")
        self.config = config
        self.half = config.dtype == "f16"
        c, g, s = config.spec_channels, config.base_channels, config.sources
        self.enc_in = PointwiseConv(params["enc_in.weight"], params["enc_in.bias"])
        self.enc_layers = []
        for i in range(1, config.layers + 1):
            block = TfcTdfBlock(f"enc{i}.block", params)
            down = PointwiseConv(params[f"enc{i}.down.weight"],
                                 params[f"enc{i}.down.bias"])
            self.enc_layers.append((block, down))
        self.latent_block = TfcTdfBlock("latent.block", params)
        self.path_modules = [
            PathModule(f"latent.path{j}", params, config.path_mode)
            for j in range(config.path_repeats)
        ]
        self.expand = PointwiseConv(params["latent.expand.weight"],
                                    params["latent.expand.bias"])
        self.dec_layers = []
        for i in range(config.layers, 0, -1):
            groups = 1 if config.fusion_mode == "joint" else s
            fuse = PointwiseConv(params[f"dec{i}.fuse.weight"],
                                 params[f"dec{i}.fuse.bias"], groups=groups)
            block = TfcTdfBlock(f"dec{i}.block", params, lead=(s,))
            self.dec_layers.append((fuse, block))
        self.out_conv = PointwiseConv(params["out.weight"], params["out.bias"])

    def _all_convs(self):
        for block, _ in self.enc_layers:
            yield from block.convs()
        yield from self.latent_block.convs()
        for _, block in self.dec_layers:
            yield from block.convs()

    def zero_state(self) -> dict:
        """Fresh causal carry: conv ring buffers and LSTM hidden/cell pairs."""
        freq = self.config.freq_bins
        state = {}
        for key, cv, lead in self._all_convs():
            state[key] = cv.zero_state(freq, lead)
        for mod in self.path_modules:
            for key, lstm in mod.carried():
                state[key] = lstm.zero_state(freq)
        return state

    def step(self, x: np.ndarray, state: dict, collect: list | None = None) -> np.ndarray:
        """Process one spectrogram frame.

        Args:
            x: (spec_channels, F) frame.
            state: carry from zero_state(), mutated in place.
            collect: optional list receiving the (S, latent, F) softmax
                stage output for inspection.

        Returns:
            (sources, spec_channels, F) frame estimates.
        """
        cfg = self.config
        s = cfg.sources
        x = x.astype(np.float16 if self.half else np.float32)
        y = self.enc_in.step(x)
        skips = []
        for block, down in self.enc_layers:
            pre = y
            y = block.step(y, state)
            skips.append((pre, y))
            y = down.step(y)
        y = self.latent_block.step(y, state)
        for mod in self.path_modules:
            y = mod.step(y, state)
        y = self.expand.step(y)
        y = softmax(y.reshape(s, cfg.latent_channels, cfg.freq_bins), axis=0)
        if collect is not None:
            collect.append(y.copy())
        for (fuse, block), (pre, post) in zip(self.dec_layers, reversed(skips)):
            width2 = fuse.in_channels // s
            y = fuse.step(y.reshape(s * width2, cfg.freq_bins))
            y = y.reshape(s, fuse.out_channels // s, cfg.freq_bins)
            y = y * post
            y = block.step(y, state)
            y = y * pre
        return self.out_conv.step(y)

    def forward(self, spec: np.ndarray, state: dict | None = None,
                collect: list | None = None) -> np.ndarray:
        """Run (spec_channels, F, T) through the network frame by frame.

        Returns (sources, spec_channels, F, T). With state=None a fresh
        zero carry is used (offline evaluation).
        """
        spec = np.asarray(spec)
        if spec.ndim != 3 or spec.shape[0] != self.config.spec_channels \
                or spec.shape[1] != self.config.freq_bins:
            raise ValueError(
                f"expected ({self.config.spec_channels}, {self.config.freq_bins}, T) input, "
                f"got {spec.shape}")
        if state is None:
            state = self.zero_state()
        frames = [self.step(spec[:, :, t], state, collect) for t in range(spec.shape[2])]
        return np.stack(frames, axis=-1)

    def parameter_count(self) -> int:
        return parameter_count(self)


def build_model(config: ModelConfig, params: dict[str, np.ndarray]) -> ModelGraph:
    """Assemble the graph from a named weight mapping."""
    return ModelGraph(config, params)
