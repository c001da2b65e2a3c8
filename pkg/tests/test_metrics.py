import numpy as np
import pytest

import oracles
from attriqa.errors import DataError, DegenerateInput, ShapeError
from attriqa.metrics.correlation import plcc, srcc
from attriqa.metrics.report import MetricReport, strength_metrics
from attriqa.metrics.strength import IntervalScheme, interval_accuracy, strength_rmse
from attriqa.render.builder import ReportBuilder


def test_interval_boundaries():
    scheme = IntervalScheme(levels=5)
    assert list(scheme.boundaries()) == [0.1, 0.3, 0.5, 0.7, 0.9]
    assert scheme.interval(0) == (0.0, 0.1)
    assert scheme.interval(5) == (0.9, 1.0)
    assert scheme.contains(5, 1.0)
    assert not scheme.contains(0, 0.1)


def test_interval_accuracy_examples():
    target = np.array([[0.6, 0.0], [1.0, 0.2]])
    assert interval_accuracy(target, target) == 1.0
    assert interval_accuracy([[0.55, 0.05], [0.95, 0.35]], target) == 0.75
    assert strength_rmse(target, target) == 0.0


def test_targets_must_sit_on_the_level_grid():
    with pytest.raises(DataError):
        interval_accuracy([0.5], [0.55])
    with pytest.raises(ShapeError):
        strength_rmse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_correlation_examples():
    assert plcc([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)
    assert srcc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert srcc([1, 1, 2, 3], [1, 2, 3, 4]) == pytest.approx(oracles.spearman([1, 1, 2, 3], [1, 2, 3, 4]))


def test_correlation_degenerate_inputs():
    with pytest.raises(DegenerateInput):
        plcc([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        srcc([1], [1])
    with pytest.raises(DegenerateInput):
        plcc([1, np.nan], [1, 2])


def test_metrics_against_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(3, 40))
        x = rng.normal(size=n)
        y = 0.5 * x + rng.normal(size=n)
        # ties on purpose
        xr = np.round(x, 1)
        assert plcc(x, y) == pytest.approx(oracles.pearson(list(x), list(y)), abs=1e-9)
        assert srcc(xr, y) == pytest.approx(oracles.spearman(list(xr), list(y)), abs=1e-9)

        target = rng.integers(0, 6, size=(n, 3)) / 5
        pred = np.clip(target + rng.normal(scale=0.12, size=target.shape), 0, 1)
        assert interval_accuracy(pred, target) == pytest.approx(
            oracles.interval_accuracy(pred.tolist(), target.tolist()), abs=1e-12
        )
        assert strength_rmse(pred, target) == pytest.approx(
            oracles.rmse(pred.tolist(), target.tolist()), abs=1e-9
        )


def test_invariances():
    rng = np.random.default_rng(8)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert plcc(3 * x + 2, y) == pytest.approx(plcc(x, y), abs=1e-12)
    assert srcc(np.exp(x), y) == pytest.approx(srcc(x, y), abs=1e-12)


def test_report_and_rendering(tmp_path):
    target = np.array([[0.6, 0.0], [1.0, 0.2]])
    pred = np.array([[0.55, 0.05], [0.95, 0.35]])
    accuracy, rmse, breakdown = strength_metrics(pred, target, ["gaussian_blur", "pixelate"], 5)
    report = MetricReport(
        accuracy=accuracy, rmse=rmse, plcc=0.9, srcc=0.85, per_distortion=breakdown,
        counts={"records": 2}, split="test",
    )
    assert [b.accuracy for b in breakdown] == [1.0, 0.5]
    assert "accuracy=0.7500" in report.summary()
    path = ReportBuilder(tmp_path).build_report(report, title="unit")
    text = path.read_text()
    assert "gaussian_blur" in text and "pixelate" in text
