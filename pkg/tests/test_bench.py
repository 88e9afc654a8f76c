import json

import numpy as np
import pytest

from rtsep import ModelConfig, build_model, random_init
from rtsep.bench import (
    BenchReport,
    bench_forward,
    check_trends,
    compare_variants,
    config_fingerprint,
    stability_gate,
    trend_ok,
    variants_jsonl,
    variants_table,
)

TINY = ModelConfig(base_channels=4, freq_bins=64, sources=2, path_repeats=1)


def report_from(times, label="x", samples=1024):
    return BenchReport(label=label, fingerprint="t", iterations=len(times),
                       warmup=0, input_samples=samples, times_ms=list(times))


class TestReportStats:
    def test_median_mean_p95(self):
        report = report_from([1.0, 2.0, 3.0, 4.0, 100.0])
        assert report.median_ms == 3.0
        assert report.mean_ms == 22.0
        assert report.p95_ms == pytest.approx(np.percentile([1, 2, 3, 4, 100], 95))

    def test_rtf_definition(self):
        report = report_from([23.2199] * 10, samples=1024)
        assert report.rtf == pytest.approx(1.0, abs=1e-3)

    def test_noise_from_slice_medians(self):
        report = report_from([1.0] * 50 + [1.2] * 50)
        assert len(report.slice_medians()) == 5
        assert report.noise_ms() >= 0.0

    def test_trend_ok_tolerates_noise(self):
        a = report_from(list(np.linspace(1.0, 1.1, 100)))
        b = report_from(list(np.linspace(1.05, 1.15, 100)))
        ok, _ = trend_ok(a, b)
        assert ok
        slow = report_from([5.0] * 100)
        ok, _ = trend_ok(slow, a)
        assert not ok


@pytest.fixture(scope="module")
def model():
    ws = random_init(TINY, seed=1)
    return build_model(ws.config, ws.as_dict())


class TestBenchForward:

    def test_minimum_iterations_enforced(self, model):
        with pytest.raises(ValueError):
            bench_forward(model, iterations=50)

    def test_pipeline_report(self, model):
        report = bench_forward(model, iterations=100, warmup=5)
        assert report.iterations == 100
        assert len(report.times_ms) == 100
        assert report.median_ms > 0
        assert "g=4" in report.fingerprint

    def test_warmup_excluded(self, model):
        report = bench_forward(model, iterations=100, warmup=0)
        assert len(report.times_ms) == 100

    def test_network_only_faster_than_pipeline(self, model):
        pipe = bench_forward(model, iterations=100, warmup=10, include_transforms=True)
        net = bench_forward(model, iterations=100, warmup=10, include_transforms=False)
        assert net.median_ms < pipe.median_ms

    def test_repeatability_gate_warns_not_fails(self, model):
        import warnings
        first = bench_forward(model, iterations=100, warmup=10)
        second = bench_forward(model, iterations=100, warmup=10)
        stable, detail = stability_gate(first, second)
        if not stable:
            warnings.warn(f"benchmark medians unstable: {detail}")
        assert stability_gate(first, first) == (True, stability_gate(first, first)[1])

    def test_stability_gate_detects_drift(self):
        a = report_from([1.0] * 100)
        b = report_from([1.5] * 100)
        stable, detail = stability_gate(a, b)
        assert not stable and "drift" in detail
        stable, _ = stability_gate(a, report_from([1.1] * 100))
        assert stable


class TestVariants:
    def test_compare_and_trends(self):
        rows = compare_variants(TINY, {"fusion_mode": ["joint", "separate"]},
                                iterations=100, warmup=10)
        assert len(rows) == 2
        table = variants_table(rows)
        assert "joint" in table and "separate" in table
        records = [json.loads(line) for line in variants_jsonl(rows).splitlines()]
        assert records[0]["params"] > 0
        results = check_trends(rows, {"fusion_mode": ["joint", "separate"]})
        assert len(results) == 1
        claim, ok, detail = results[0]
        assert "joint" in claim and "ms" in detail

    def test_param_counts_differ_across_g(self):
        rows = compare_variants(TINY, {"g": [4, 8]}, iterations=100, warmup=5)
        assert rows[1].params > rows[0].params

    def test_fingerprint_mentions_all_axes(self):
        fp = config_fingerprint(TINY)
        for token in ("g=4", "layers=1", "L=1", "S=2", "path=single",
                      "fusion=joint", "dtype=f32"):
            assert token in fp


class TestModuleTimingTrend:
    def test_single_path_faster_than_dual(self):
        """Ordinal claim on the recurrent module itself, default shapes: the
        per-frame frequency sweep makes the dual variant strictly slower."""
        from rtsep.bench import _time_loop
        results = {}
        for mode in ("single", "dual"):
            cfg = ModelConfig(path_mode=mode)
            ws = random_init(cfg, seed=2)
            model = build_model(ws.config, ws.as_dict())
            module = model.path_modules[0]
            x = np.random.default_rng(0).standard_normal(
                (cfg.latent_channels, cfg.freq_bins)).astype(np.float32)
            def run():
                state = {k: l.zero_state(cfg.freq_bins) for k, l in module.carried()}
                module.step(x, state)
            results[mode] = np.median(_time_loop(run, 300, 20))
        assert results["single"] < results["dual"]
