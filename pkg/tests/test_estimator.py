import numpy as np
import pytest
from sklearn.base import clone

from rtsep import StemSeparator, random_init, save
from rtsep.config import ModelConfig

TINY_KW = dict(base_channels=4, freq_bins=64, sources=2, path_repeats=1)


class TestSklearnContract:
    def test_get_params_roundtrip(self):
        sep = StemSeparator(seed=3, **TINY_KW)
        params = sep.get_params()
        assert params["seed"] == 3
        assert params["base_channels"] == 4
        rebuilt = StemSeparator(**params)
        assert rebuilt.get_params() == params

    def test_clone(self):
        sep = StemSeparator(seed=5, **TINY_KW)
        twin = clone(sep)
        assert twin.get_params() == sep.get_params()

    def test_set_params(self):
        sep = StemSeparator(**TINY_KW)
        sep.set_params(seed=9, path_mode="dual")
        assert sep.seed == 9
        assert sep.path_mode == "dual"


class TestFitTransform:
    def test_transform_shape_and_length(self, rng):
        sep = StemSeparator(seed=1, **TINY_KW).fit()
        audio = rng.standard_normal((2, 3 * 512 + 17)).astype(np.float32)
        stems = sep.transform(audio)
        assert stems.shape == (2, 2, audio.shape[1])

    def test_same_seed_same_output(self, rng):
        audio = rng.standard_normal((2, 2048)).astype(np.float32)
        a = StemSeparator(seed=4, **TINY_KW).fit().transform(audio)
        b = StemSeparator(seed=4, **TINY_KW).fit().transform(audio)
        assert np.array_equal(a, b)

    def test_unfitted_raises(self):
        with pytest.raises(RuntimeError):
            StemSeparator(**TINY_KW).transform(np.zeros((2, 512), np.float32))

    def test_channel_mismatch_rejected(self):
        sep = StemSeparator(seed=1, **TINY_KW).fit()
        with pytest.raises(ValueError):
            sep.transform(np.zeros((3, 512), np.float32))

    def test_non_finite_rejected(self):
        sep = StemSeparator(seed=1, **TINY_KW).fit()
        bad = np.zeros((2, 512), np.float32)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            sep.transform(bad)

    def test_stream_factory(self, rng):
        sep = StemSeparator(seed=1, **TINY_KW).fit()
        stream = sep.stream()
        out = stream.push(rng.standard_normal((2, 4 * 512)).astype(np.float32))
        assert out.shape[0] == 2  # sources


class TestWeightFileLoading:
    def test_fit_from_file(self, tmp_path, rng):
        cfg = ModelConfig(**TINY_KW)
        path = tmp_path / "w.rtst"
        save(random_init(cfg, seed=8), path)
        sep = StemSeparator(weights=str(path), **TINY_KW).fit()
        audio = rng.standard_normal((2, 1024)).astype(np.float32)
        assert sep.transform(audio).shape == (2, 2, 1024)

    def test_conflicting_params_rejected(self, tmp_path):
        cfg = ModelConfig(**TINY_KW)
        path = tmp_path / "w.rtst"
        save(random_init(cfg, seed=8), path)
        sep = StemSeparator(weights=str(path), **{**TINY_KW, "base_channels": 8})
        with pytest.raises(ValueError, match="conflict"):
            sep.fit()
