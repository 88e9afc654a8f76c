"""scikit-learn style front door for the separation pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .config import ModelConfig
from .model import build_model
from .streaming import SeparationStream, separate
from .validation import check_audio
from . import weights as weights_io


class StemSeparator(BaseEstimator):
    """Source separation as a transformer: waveform in, stems out.

    Parameters mirror ModelConfig; `weights` may point to a saved weight
    file, in which case its embedded configuration must match any
    explicitly overridden parameters. Without a file, weights are drawn
    deterministically from `seed`.

    Examples
    --------
    >>> sep = StemSeparator(seed=7).fit()
    >>> stems = sep.transform(np.zeros((2, 44100), dtype=np.float32))
    >>> stems.shape
    (4, 2, 44100)
    """

    def __init__(self, base_channels=16, layers=1, path_repeats=3, sources=4,
                 window=1024, hop=512, freq_bins=384, path_mode="single",
                 fusion_mode="joint", dtype="f32", audio_channels=2,
                 weights=None, seed=0):
        self.base_channels = base_channels
        self.layers = layers
        self.path_repeats = path_repeats
        self.sources = sources
        self.window = window
        self.hop = hop
        self.freq_bins = freq_bins
        self.path_mode = path_mode
        self.fusion_mode = fusion_mode
        self.dtype = dtype
        self.audio_channels = audio_channels
        self.weights = weights
        self.seed = seed

    def _config(self) -> ModelConfig:
        return ModelConfig(
            audio_channels=self.audio_channels, window=self.window, hop=self.hop,
            freq_bins=self.freq_bins, base_channels=self.base_channels,
            layers=self.layers, path_repeats=self.path_repeats, sources=self.sources,
            path_mode=self.path_mode, fusion_mode=self.fusion_mode, dtype=self.dtype,
        )

    def fit(self, X=None, y=None):
        """Build the model graph (load or deterministically initialize weights)."""
        if self.weights is not None:
            ws = weights_io.load(self.weights)
            wanted = self._config().canonical()
            if ws.config != wanted:
                raise ValueError(
                    "estimator parameters conflict with the embedded config of "
                    f"{self.weights!r}")
            self.config_ = ws.config
        else:
            ws = weights_io.random_init(self._config(), seed=self.seed)
            self.config_ = ws.config
        self.model_ = build_model(self.config_, ws.as_dict())
        return self

    def _require_fit(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("call fit() before using the separator")

    def transform(self, X) -> np.ndarray:
        """Separate (channels, samples) audio into (sources, channels, samples)."""
        self._require_fit()
        audio = check_audio(X, channels=self.config_.audio_channels, name="X")
        return separate(self.model_, audio)

    def stream(self) -> SeparationStream:
        """A fresh push/flush stream over the fitted model."""
        self._require_fit()
        return SeparationStream(self.model_)
