import numpy as np
import pytest

from rtsep.config import StftConfig
from rtsep.stft import (
    OlaState,
    band_restore,
    hann_periodic,
    istft_overlap_add,
    ola_norm,
    stft_forward,
)

CFG = StftConfig()
FULL = StftConfig(freq_bins=CFG.full_bins)


def rel_l2(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.linalg.norm(a - b) / np.linalg.norm(a)


def roundtrip(audio, cfg):
    spec = stft_forward(audio, cfg)
    return istft_overlap_add(band_restore(spec, cfg), cfg)


def integer_bin_signal(bins, length, rng, window):
    """Sum of sinusoids at exact analysis bins: the windowed spectrum of
    every frame is then confined to bins k-1..k+1."""
    t = np.arange(length)
    out = np.zeros((2, length))
    for k in bins:
        phase = rng.uniform(0, 2 * np.pi, size=(2, 1))
        out += np.sin(2 * np.pi * k * t / window + phase)
    return out.astype(np.float32)


class TestAnalysis:
    def test_dc_input(self):
        c = 0.7
        audio = np.full((1, 8 * CFG.hop), c, dtype=np.float32)
        spec = stft_forward(audio, CFG)
        scale = c * hann_periodic(CFG.window).sum()
        assert spec[0, 0, -1] == pytest.approx(scale, rel=1e-6)
        # frame 0 windows the onset edge; every steady-state frame is pure DC
        assert np.max(np.abs(spec[1, :, 1:])) < 1e-9 * scale

    def test_sine_at_bin_43(self, rng):
        k = 43
        audio = integer_bin_signal([k], 16 * CFG.hop, rng, CFG.window)[:1]
        spec = stft_forward(audio, CFG)
        energy = spec[0] ** 2 + spec[1] ** 2
        for t in range(2, 16):  # interior frames (first ones see zero padding)
            assert int(np.argmax(energy[:, t])) == k

    def test_frame_count_convention(self):
        audio = np.zeros((2, 32256), dtype=np.float32)
        spec = stft_forward(audio, CFG)
        assert spec.shape == (4, 384, 63)

    def test_non_hop_multiple_rejected(self):
        with pytest.raises(ValueError):
            stft_forward(np.zeros((1, 1000), np.float32), CFG)

    def test_linearity(self, rng):
        x = rng.standard_normal((2, 8 * CFG.hop)).astype(np.float32)
        y = rng.standard_normal((2, 8 * CFG.hop)).astype(np.float32)
        a, b = 1.7, -0.4
        lhs = stft_forward(a * x + b * y, CFG)
        rhs = a * stft_forward(x, CFG) + b * stft_forward(y, CFG)
        assert rel_l2(rhs, lhs) < 1e-6

    def test_chunked_analysis_bit_identical(self, rng):
        audio = rng.standard_normal((2, 12 * CFG.hop)).astype(np.float32)
        whole = stft_forward(audio, CFG)
        state = OlaState.zero(CFG, 2)
        parts = [stft_forward(audio[:, :3 * CFG.hop], CFG, state),
                 stft_forward(audio[:, 3 * CFG.hop:4 * CFG.hop], CFG, state),
                 stft_forward(audio[:, 4 * CFG.hop:], CFG, state)]
        assert np.array_equal(np.concatenate(parts, axis=2), whole)

    def test_matches_manual_frames(self, rng):
        """Oracle: window and transform each frame directly from the padded
        signal."""
        audio = rng.standard_normal((1, 4 * CFG.hop)).astype(np.float32)
        spec = stft_forward(audio, CFG)
        padded = np.concatenate(
            [np.zeros((1, CFG.window - CFG.hop)), audio.astype(np.float64)], axis=1)
        win = hann_periodic(CFG.window)
        for k in range(4):
            frame = padded[0, k * CFG.hop:k * CFG.hop + CFG.window]
            ref = np.fft.rfft(frame * win)[: CFG.freq_bins]
            np.testing.assert_allclose(spec[0, :, k], ref.real, atol=1e-4)
            np.testing.assert_allclose(spec[1, :, k], ref.imag, atol=1e-4)


class TestBandRestore:
    def test_zero_spectrogram(self):
        frames = band_restore(np.zeros((4, 384, 5), np.float32), CFG)
        assert frames.shape == (2, CFG.full_bins, 5)
        assert np.all(frames == 0)

    def test_high_bins_zero_filled(self, rng):
        spec = rng.standard_normal((2, 384, 3)).astype(np.float32)
        frames = band_restore(spec, CFG)
        assert np.all(frames[:, CFG.freq_bins:, :] == 0)
        np.testing.assert_allclose(frames[0, :384, 0].real, spec[0, :, 0])

    def test_white_noise_energy_never_grows(self, rng):
        audio = rng.standard_normal((2, 16 * CFG.hop)).astype(np.float32)
        recon = roundtrip(audio, CFG)
        lo, hi = CFG.window, audio.shape[1] - CFG.window
        assert np.sum(recon[:, lo:hi] ** 2) <= np.sum(audio[:, lo:hi] ** 2) * (1 + 1e-9)


class TestSynthesis:
    def test_all_zero_frames(self):
        out = istft_overlap_add(np.zeros((2, CFG.full_bins, 6), np.complex128), CFG)
        assert out.shape == (2, 6 * CFG.hop)
        assert np.all(out == 0)

    def test_perfect_reconstruction_interior(self, rng):
        audio = rng.standard_normal((2, 32 * CFG.hop)).astype(np.float32)
        recon = roundtrip(audio, FULL)
        lo, hi = CFG.window, audio.shape[1] - CFG.window
        assert rel_l2(audio[:, lo:hi], recon[:, lo:hi]) < 1e-6

    def test_band_limited_survives_cut(self, rng):
        audio = integer_bin_signal([10, 100, 200, 380], 32 * CFG.hop, rng, CFG.window)
        recon = roundtrip(audio, CFG)
        lo, hi = CFG.window, audio.shape[1] - CFG.window
        assert rel_l2(audio[:, lo:hi], recon[:, lo:hi]) < 1e-6

    def test_chunked_synthesis_bit_identical(self, rng):
        audio = rng.standard_normal((2, 10 * CFG.hop)).astype(np.float32)
        frames = band_restore(stft_forward(audio, FULL), FULL)
        whole = istft_overlap_add(frames, FULL)
        state = OlaState.zero(FULL, 2)
        parts = [istft_overlap_add(frames[:, :, :4], FULL, state),
                 istft_overlap_add(frames[:, :, 4:5], FULL, state),
                 istft_overlap_add(frames[:, :, 5:], FULL, state)]
        streamed = np.concatenate(parts, axis=1)
        # streaming withholds the final, un-partnered block
        assert streamed.shape[1] == whole.shape[1] - FULL.hop
        assert np.array_equal(streamed, whole[:, : streamed.shape[1]])

    def test_ola_norm_strictly_positive(self):
        norm = ola_norm(CFG)
        assert norm.shape == (CFG.hop,)
        assert np.all(norm > 0.49)

    def test_latency_definition(self):
        assert CFG.latency_samples == 1024
        assert CFG.latency_samples / 44100 == pytest.approx(0.0232, abs=2e-4)
