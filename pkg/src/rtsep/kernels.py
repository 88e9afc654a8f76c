"""Dense tensor kernels: causal convolution, linear, frame-wise norm, LSTM.

All kernels accept float32 or float16 arrays. Arithmetic always runs in
float32; float16 inputs produce float16 outputs (round-to-nearest-even),
which models a half-precision activation store with full-precision
accumulation.

Whole-sequence entry points iterate the same per-frame step that streaming
callers use, so evaluating a causal kernel over arbitrary sequence splits
with carried state is bit-identical to one-shot evaluation. Weights are
immutable after construction; mutable state (ring buffers, LSTM carries)
is owned by exactly one stream.
"""

from __future__ import annotations

import math

import numpy as np

_GELU_C = math.sqrt(2.0 / math.pi)


def _compute32(x: np.ndarray) -> np.ndarray:
    return x.astype(np.float32) if x.dtype != np.float32 else x

def _restore(y: np.ndarray, dtype) -> np.ndarray:
    return y.astype(np.float16) if dtype == np.float16 else y


def cast(x: np.ndarray, dtype: str) -> np.ndarray:
    """Cast between 'f32' and 'f16'. f32->f16 rounds to nearest even."""
    if dtype == "f32":
        return x.astype(np.float32)
    if dtype == "f16":
        return x.astype(np.float16)
    raise ValueError(f"unknown dtype {dtype!r}")


def gelu(x: np.ndarray) -> np.ndarray:
    """GELU activation (tanh form)."""
    dt = x.dtype
    x32 = _compute32(x)
    t = x32 * x32
    t *= x32
    t *= 0.044715
    t += x32
    t *= _GELU_C
    np.tanh(t, out=t)
    t += 1.0
    t *= x32
    t *= 0.5
    return _restore(t, dt)


def softmax(x: np.ndarray, axis: int) -> np.ndarray:
    """Softmax along one axis, computed with max subtraction for stability."""
    dt = x.dtype
    x32 = _compute32(x)
    shifted = x32 - np.max(x32, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return _restore(y, dt)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _sigmoid_inplace(x: np.ndarray) -> np.ndarray:
    np.negative(x, out=x)
    with np.errstate(over="ignore"):  # exp overflow saturates to 0 correctly
        np.exp(x, out=x)
    x += 1.0
    np.reciprocal(x, out=x)
    return x


class PointwiseConv:
    """1x1 convolution: a per-(f, t) linear map across channels.

    weight: (out_channels, in_channels // groups), bias: (out_channels,).
    With groups=g the channel axes split into g independent slices.
    """

    kernel_time = 1

    def __init__(self, weight: np.ndarray, bias: np.ndarray, groups: int = 1):
        out_c, in_per_group = weight.shape
        if out_c % groups != 0:
            raise ValueError("groups must divide out_channels")
        self.groups = groups
        self.in_channels = in_per_group * groups
        self.out_channels = out_c
        self.weight = np.ascontiguousarray(weight, dtype=np.float32)
        self.bias = np.ascontiguousarray(bias, dtype=np.float32)

    def step(self, x: np.ndarray) -> np.ndarray:
        """x: (..., in_channels, F) one frame -> (..., out_channels, F)."""
        dt = x.dtype
        x32 = _compute32(x)
        lead = x32.shape[:-2]
        f = x32.shape[-1]
        if x32.shape[-2] != self.in_channels:
            raise ValueError(
                f"expected {self.in_channels} input channels, got {x32.shape[-2]}")
        cols = x32.reshape(-1, self.in_channels, f)
        out = np.empty((cols.shape[0], self.out_channels, f), dtype=np.float32)
        opg = self.out_channels // self.groups
        ipg = self.in_channels // self.groups
        for b in range(cols.shape[0]):
            for g in range(self.groups):
                wg = self.weight[g * opg:(g + 1) * opg]
                out[b, g * opg:(g + 1) * opg] = wg @ cols[b, g * ipg:(g + 1) * ipg]
        out += self.bias[:, None]
        return _restore(out.reshape(lead + (self.out_channels, f)), dt)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (..., in_channels, F, T) -> (..., out_channels, F, T)."""
        frames = [self.step(x[..., t]) for t in range(x.shape[-1])]
        return np.stack(frames, axis=-1)

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size


class CausalConv2d:
    """2D convolution, causal along time, zero-padded symmetric in frequency.

    weight: (out_channels, in_channels // groups, kernel_time, kernel_freq)
    with odd kernel sizes. Output frame t reads input frames
    t-(kernel_time-1) .. t only; streaming state is a ring buffer of the
    kernel_time-1 most recent input frames.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, groups: int = 1):
        out_c, in_per_group, kt, kf = weight.shape
        if kt % 2 == 0 or kf % 2 == 0:
            raise ValueError("kernel sizes must be odd")
        if out_c % groups != 0:
            raise ValueError("groups must divide out_channels")
        self.groups = groups
        self.in_channels = in_per_group * groups
        self.out_channels = out_c
        self.kernel_time = kt
        self.kernel_freq = kf
        self.bias = np.ascontiguousarray(bias, dtype=np.float32)
        w32 = np.ascontiguousarray(weight, dtype=np.float32)
        self.weight = w32
        # (out, kt * ipg * kf) matrix matching the assembled patch layout
        self._wmat = np.ascontiguousarray(
            w32.transpose(0, 2, 1, 3).reshape(out_c, kt * in_per_group * kf))

    def zero_state(self, freq: int, lead: tuple = ()) -> np.ndarray:
        """Ring buffer of kernel_time-1 trailing input frames, zero at start."""
        return np.zeros(
            lead + (self.kernel_time - 1, self.in_channels, freq), dtype=np.float32)

    def _frame_out(self, hist: np.ndarray) -> np.ndarray:
        """hist: (..., kernel_time, in_channels, F) -> (..., out_channels, F).

        Leading axes (batch, sources) are folded into matmul columns so the
        computation is one matrix product per channel group.
        """
        kt, kf = self.kernel_time, self.kernel_freq
        pad = (kf - 1) // 2
        lead = hist.shape[:-3]
        f = hist.shape[-1]
        ipg = self.in_channels // self.groups
        opg = self.out_channels // self.groups
        hist2 = hist.reshape((-1, kt, self.in_channels, f))
        nb = hist2.shape[0]
        out = np.empty((nb, self.out_channels, f), dtype=np.float32)
        patch = np.empty((kt, ipg, kf, nb, f), dtype=np.float32)
        for g in range(self.groups):
            src = hist2[:, :, g * ipg:(g + 1) * ipg]  # (nb, kt, ipg, F)
            for j in range(kf):
                lo, hi = max(0, pad - j), f - max(0, j - pad)
                if lo:
                    patch[:, :, j, :, :lo] = 0.0
                if hi < f:
                    patch[:, :, j, :, hi:] = 0.0
                patch[:, :, j, :, lo:hi] = (
                    src[:, :, :, lo - pad + j:hi - pad + j].transpose(1, 2, 0, 3))
            wg = self._wmat[g * opg:(g + 1) * opg]
            res = wg @ patch.reshape(kt * ipg * kf, nb * f)
            out[:, g * opg:(g + 1) * opg] = res.reshape(opg, nb, f).transpose(1, 0, 2)
        out += self.bias[:, None]
        return out.reshape(lead + (self.out_channels, f))

    def step(self, x: np.ndarray, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One frame. x: (..., in_channels, F); state: ring buffer.

        Returns (output frame, updated state). The state array is reused.
        """
        dt = x.dtype
        x32 = _compute32(x)
        hist = np.concatenate([state, x32[..., None, :, :]], axis=-3)
        out = self._frame_out(hist)
        if self.kernel_time > 1:
            state[...] = hist[..., 1:, :, :]
        return _restore(out, dt), state

    def forward(self, x: np.ndarray, state: np.ndarray | None = None) -> np.ndarray:
        """x: (..., in_channels, F, T) -> (..., out_channels, F, T).

        Iterates the per-frame step; with state=None the time axis is
        left-padded with zeros (fresh-stream behavior).
        """
        if state is None:
            state = self.zero_state(x.shape[-2], x.shape[:-3])
        frames = []
        for t in range(x.shape[-1]):
            y, state = self.step(x[..., t], state)
            frames.append(y)
        return np.stack(frames, axis=-1)

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size


class Dense:
    """Affine map over the last axis: y = x @ weight.T + bias.

    weight: (out_features, in_features), bias: (out_features,).
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = np.ascontiguousarray(weight, dtype=np.float32)
        self.bias = np.ascontiguousarray(bias, dtype=np.float32)
        self._wt = np.ascontiguousarray(self.weight.T)
        self.in_features = weight.shape[1]
        self.out_features = weight.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        dt = x.dtype
        x32 = _compute32(x)
        if x32.shape[-1] != self.in_features:
            raise ValueError(
                f"expected last axis {self.in_features}, got {x32.shape[-1]}")
        y = x32 @ self._wt
        y += self.bias
        return _restore(y, dt)

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size


class FrameNorm:
    """Frame-wise normalization over (channels, frequency).

    Statistics are computed independently per time frame (and per source in
    batched use), so the layer is causal: output frame t depends on input
    frame t only. gain/offset: (channels,).
    """

    def __init__(self, gain: np.ndarray, offset: np.ndarray, eps: float = 1e-5):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.gain = np.ascontiguousarray(gain, dtype=np.float32)
        self.offset = np.ascontiguousarray(offset, dtype=np.float32)
        self.eps = float(eps)

    def step(self, x: np.ndarray) -> np.ndarray:
        """x: (..., channels, F) one frame, normalized over the last two axes."""
        dt = x.dtype
        x32 = _compute32(x)
        if x32.ndim == 2:
            centered = x32 - x32.mean(dtype=np.float32)
            flat = centered.ravel()
            var = np.dot(flat, flat) / flat.size
            scale = self.gain * np.float32(1.0 / np.sqrt(var + self.eps))
            centered *= scale[:, None]
            centered += self.offset[:, None]
            return _restore(centered, dt)
        lead = x32.shape[:-2]
        rows = x32.reshape(lead + (-1,))
        centered = x32 - rows.mean(axis=-1, dtype=np.float32)[..., None, None]
        cflat = centered.reshape(lead + (-1,))
        var = np.einsum("...i,...i->...", cflat, cflat) / cflat.shape[-1]
        inv = (1.0 / np.sqrt(var + self.eps)).astype(np.float32)
        centered *= inv[..., None, None] * self.gain[:, None]
        centered += self.offset[:, None]
        return _restore(centered, dt)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x: (..., channels, F, T)."""
        frames = [self.step(x[..., t]) for t in range(x.shape[-1])]
        return np.stack(frames, axis=-1)

    def parameter_count(self) -> int:
        return self.gain.size + self.offset.size


class Lstm:
    """Unidirectional LSTM with gate order (input, forget, output, cell).

    w_ih: (input_size, 4*hidden), w_hh: (hidden, 4*hidden), bias: (4*hidden,).
    Gate columns: sigmoid gates i, f, o occupy [0, 3H); the tanh cell
    candidate occupies [3H, 4H). The input and recurrent weights are
    applied as one concatenated matmul, and the state buffers are updated
    in place (a state tuple belongs to exactly one stream).
    """

    def __init__(self, w_ih: np.ndarray, w_hh: np.ndarray, bias: np.ndarray):
        self.w_ih = np.ascontiguousarray(w_ih, dtype=np.float32)
        self.w_hh = np.ascontiguousarray(w_hh, dtype=np.float32)
        self.bias = np.ascontiguousarray(bias, dtype=np.float32)
        self.input_size = w_ih.shape[0]
        self.hidden_size = w_hh.shape[0]
        if w_ih.shape[1] != 4 * self.hidden_size or w_hh.shape[1] != 4 * self.hidden_size:
            raise ValueError("gate dimension must be 4*hidden")
        self._wcat = np.ascontiguousarray(np.concatenate([self.w_ih, self.w_hh], axis=0))

    def zero_state(self, batch: int) -> tuple[np.ndarray, np.ndarray]:
        h = np.zeros((batch, self.hidden_size), dtype=np.float32)
        return h, h.copy()

    def step(self, x: np.ndarray, state: tuple[np.ndarray, np.ndarray]):
        """x: (batch, input_size) float32 -> (h', (h', c')), in place."""
        h, c = state
        if h.shape != (x.shape[0], self.hidden_size):
            raise ValueError("LSTM state shape mismatch")
        z = np.concatenate([x, h], axis=1) @ self._wcat
        z += self.bias
        hs = self.hidden_size
        gates = _sigmoid_inplace(z[:, :3 * hs])
        i, f, o = gates[:, :hs], gates[:, hs:2 * hs], gates[:, 2 * hs:]
        g = np.tanh(z[:, 3 * hs:])
        np.multiply(c, f, out=c)
        np.multiply(i, g, out=i)
        c += i
        np.tanh(c, out=g)
        np.multiply(o, g, out=h)
        return h, (h, c)

    def forward(self, x: np.ndarray, state=None):
        """x: (batch, T, input_size) -> (y: (batch, T, hidden), final state).

        Output step t depends only on inputs <= t and the initial state,
        so splitting a sequence and carrying the state is exact.
        """
        dt = x.dtype
        x32 = _compute32(x)
        b, steps, _ = x32.shape
        if state is None:
            state = self.zero_state(b)
        out = np.empty((b, steps, self.hidden_size), dtype=np.float32)
        for t in range(steps):
            y, state = self.step(x32[:, t], state)
            out[:, t] = y
        return _restore(out, dt), state

    def parameter_count(self) -> int:
        return self.w_ih.size + self.w_hh.size + self.bias.size
