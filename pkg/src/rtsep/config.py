"""Model and STFT configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

SAMPLE_RATE = 44100

PATH_MODES = ("single", "dual")
FUSION_MODES = ("joint", "separate")
DTYPES = ("f32", "f16")


@dataclass(frozen=True)
class StftConfig:
    """Analysis/synthesis parameters for the causal STFT front end.

    Frame k windows input samples [k*hop - (window - hop), k*hop + hop),
    so a frame is complete as soon as sample (k+1)*hop - 1 has arrived.
    """

    window: int = 1024
    hop: int = 512
    freq_bins: int = 384  # retained low bins; the rest are cut

    def __post_init__(self):
        if self.window <= 0 or self.hop <= 0:
            raise ValueError("window and hop must be positive")
        if self.hop * 2 != self.window:
            raise ValueError("hop must be window/2 (50% overlap)")
        if not (0 < self.freq_bins <= self.full_bins):
            raise ValueError(f"freq_bins must be in (0, {self.full_bins}]")

    @property
    def full_bins(self) -> int:
        return self.window // 2 + 1

    @property
    def latency_samples(self) -> int:
        """Algorithmic latency of analysis + synthesis, equal to the window."""
        return self.window


@dataclass(frozen=True)
class ModelConfig:
    """All hyperparameters of the separation network.

    base_channels is the channel width after the input 1x1 convolution;
    widths double per encoder layer. path_repeats is the number of stacked
    recurrent modules in the latent stage.
    """

    audio_channels: int = 2
    window: int = 1024
    hop: int = 512
    freq_bins: int = 384
    base_channels: int = 16
    layers: int = 1
    path_repeats: int = 3
    sources: int = 4
    freq_bottleneck: int = 0  # 0 -> freq_bins // 8
    lstm_hidden: int = 0      # 0 -> 2 * latent_channels
    path_mode: str = "single"
    fusion_mode: str = "joint"
    dtype: str = "f32"

    def __post_init__(self):
        for name in ("audio_channels", "base_channels", "path_repeats", "sources"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.layers not in (1, 2):
            raise ValueError("layers must be 1 or 2")
        if self.path_mode not in PATH_MODES:
            raise ValueError(f"path_mode must be one of {PATH_MODES}")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.dtype not in DTYPES:
            raise ValueError(f"dtype must be one of {DTYPES}")
        self.stft()  # validates window/hop/freq_bins
        if self.freq_bins % self.tdf_width != 0:
            raise ValueError("freq_bins must be divisible by the bottleneck width")

    def stft(self) -> StftConfig:
        return StftConfig(window=self.window, hop=self.hop, freq_bins=self.freq_bins)

    @property
    def spec_channels(self) -> int:
        """Channels of the real-valued spectrogram: real+imag per audio channel."""
        return 2 * self.audio_channels

    @property
    def latent_channels(self) -> int:
        """Channel width at the latent stage (after all encoder expansions)."""
        return self.base_channels * (2 ** self.layers)

    @property
    def tdf_width(self) -> int:
        return self.freq_bottleneck if self.freq_bottleneck else self.freq_bins // 8

    @property
    def hidden_size(self) -> int:
        return self.lstm_hidden if self.lstm_hidden else 2 * self.latent_channels

    def with_overrides(self, **kw) -> "ModelConfig":
        return replace(self, **kw)

    def canonical(self) -> "ModelConfig":
        """Resolve defaulted widths so equal configurations compare equal."""
        return replace(self, freq_bottleneck=self.tdf_width, lstm_hidden=self.hidden_size)
