import numpy as np
import pandas as pd
import pytest
import torch

from attriqa.diffcore import ops
from attriqa.diffcore.fdcheck import fd_check
from attriqa.diffcore.schedule import Schedule
from attriqa.errors import ConfigError, SchemaError
from attriqa.regressor.model import QualityRegressor, RegressorConfig, predict_score
from attriqa.regressor.scores import Polarity, ScoreNormalizer, normalize_score, read_scores
from attriqa.regressor.training import (
    RegTrainConfig,
    check_schema,
    feature_matrix,
    load_regressor,
    save_regressor,
    train_regressor,
)

COLUMNS = [f"gaussian_blur.{k}" for k in range(5)] + [f"pixelate.{k}" for k in range(5)]


def test_normalize_examples():
    assert normalize_score(100, ScoreNormalizer(lo=0, hi=100)) == 1.0
    assert normalize_score(3, ScoreNormalizer(lo=1, hi=5)) == 0.5
    assert normalize_score(0, ScoreNormalizer(lo=0, hi=100, polarity=Polarity.LOWER_BETTER)) == 1.0


def test_out_of_range_scores_are_clamped_and_counted():
    n = ScoreNormalizer(lo=0, hi=10)
    assert normalize_score(12, n) == 1.0
    assert normalize_score(-1, n) == 0.0
    assert n.clamped == 2
    with pytest.raises(ValueError):
        ScoreNormalizer(lo=5, hi=5)


def test_read_scores(tmp_path):
    path = tmp_path / "scores.csv"
    pd.DataFrame(
        {
            "record_id": ["a#0", "a#1", "b#0"],
            "raw_score": [80.0, 20.0, 2.0],
            "lo": [0.0, 0.0, 1.0],
            "hi": [100.0, 100.0, 5.0],
            "polarity": ["higher-better", "higher-better", "lower-better"],
        }
    ).to_csv(path, index=False)
    assert read_scores(path) == pytest.approx({"a#0": 0.8, "a#1": 0.2, "b#0": 0.75})


def test_read_scores_schema(tmp_path):
    path = tmp_path / "scores.csv"
    pd.DataFrame({"record_id": ["a#0"], "mos": [3.0]}).to_csv(path, index=False)
    with pytest.raises(SchemaError):
        read_scores(path)


def test_matrix_schema_is_exact():
    df = pd.DataFrame(np.full((2, 10), 0.5), columns=COLUMNS)
    df.insert(0, "record_id", ["a#0", "a#1"])
    assert feature_matrix(df, COLUMNS).shape == (2, 10)
    with pytest.raises(SchemaError):
        check_schema(df.assign(embedding_0=0.1), COLUMNS)
    with pytest.raises(SchemaError):
        check_schema(df[["record_id", *reversed(COLUMNS)]], COLUMNS)


def test_selu_values():
    assert ops.selu(torch.zeros(1, dtype=torch.float64)).item() == 0.0
    slope = ops.selu(torch.tensor([1.0], dtype=torch.float64)).item()
    assert slope == pytest.approx(1.0507009873554805)


def _model(dropout=0.2, hidden=(8, 8)):
    return QualityRegressor(RegressorConfig(input_dim=10, hidden=hidden, dropout=dropout, init_seed=3))


def test_batch_equals_per_item_and_finite():
    model = _model().eval()
    x = torch.rand(6, 10, dtype=torch.float64)
    batch = model(x)
    single = torch.stack([model(x[i : i + 1])[0] for i in range(6)])
    np.testing.assert_allclose(batch.detach().numpy(), single.detach().numpy(), atol=1e-12)
    assert torch.isfinite(batch).all()


def test_eval_mode_ignores_dropout_stream():
    model = _model(dropout=0.5).eval()
    x = torch.rand(4, 10, dtype=torch.float64)
    a = model(x, torch.Generator().manual_seed(1))
    b = model(x, torch.Generator().manual_seed(2))
    assert torch.equal(a, b)


def test_predict_score_clamps_for_reporting():
    model = _model()
    with torch.no_grad():
        model.biases[-1].fill_(5.0)
    clamped, raw = predict_score(np.zeros((2, 10)), model)
    assert torch.all(clamped == 1.0)
    assert torch.all(raw > 1.0)
    assert model.training


def test_regressor_gradients():
    model = _model(dropout=0.0).eval()
    gen = torch.Generator().manual_seed(0)
    x = torch.rand(12, 10, generator=gen, dtype=torch.float64)
    y = torch.rand(12, generator=gen, dtype=torch.float64)
    report = fd_check([model.param_group()], lambda: ((model(x) - y) ** 2).mean(), tolerance=1e-6)
    assert report.passed


def _data(n=64, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.random((n, 10))
    y = 0.2 + 0.6 * x[:, :5].mean(axis=1)
    return x, y


def test_constant_target_is_learned():
    x, _ = _data()
    y = np.full(len(x), 0.5)
    config = RegTrainConfig(
        hidden=(8, 8), dropout=0.0, schedule=Schedule(epochs=200, warmup_epochs=0, max_lr=1e-2)
    )
    result = train_regressor(x, y, COLUMNS, config)
    _, raw = predict_score(x, result.model)
    assert float(((raw.numpy() - 0.5) ** 2).mean()) < 1e-4


def test_training_loss_falls():
    x, y = _data()
    config = RegTrainConfig(
        hidden=(16, 8), dropout=0.0, schedule=Schedule(epochs=20, warmup_epochs=0, max_lr=1e-2)
    )
    result = train_regressor(x, y, COLUMNS, config)
    assert result.history[-1] < result.history[0]


def test_mse_falls_every_epoch_at_first():
    x, y = _data()
    config = RegTrainConfig(
        hidden=(16, 8),
        dropout=0.0,
        schedule=Schedule(epochs=40, warmup_epochs=0, max_lr=3e-4, batch_size=64),
    )
    result = train_regressor(x, y, COLUMNS, config)
    first = np.array(result.history[:20])
    assert first[0] == pytest.approx(y.var(), rel=1e-9)
    assert np.all(np.diff(first) < 0)


def test_untrained_regressor_predicts_the_mean():
    model = _model(dropout=0.0)
    model.start_from_constant(0.37)
    _, raw = predict_score(np.random.default_rng(1).random((5, 10)), model)
    np.testing.assert_array_equal(raw.numpy(), np.full(5, 0.37))


def test_best_validation_epoch_is_kept(tmp_path):
    x, y = _data(80)
    config = RegTrainConfig(hidden=(8, 8), schedule=Schedule(epochs=15, warmup_epochs=0, max_lr=5e-3))
    result = train_regressor(x[:60], y[:60], COLUMNS, config, x[60:], y[60:])
    assert len(result.val_history) == 15
    assert result.val_history[result.best_epoch - 1] == min(result.val_history)

    save_regressor(result, tmp_path / "reg.atq", config, {"features": "abc"})
    model, header = load_regressor(tmp_path / "reg.atq", COLUMNS)
    assert header.inputs == {"features": "abc"}
    np.testing.assert_array_equal(
        predict_score(x, model)[1].numpy(), predict_score(x, result.model)[1].numpy()
    )
    with pytest.raises(ConfigError):
        load_regressor(tmp_path / "reg.atq", COLUMNS[:9])
    with pytest.raises(ConfigError):
        load_regressor(tmp_path / "reg.atq", list(reversed(COLUMNS)))


def test_training_input_checks():
    x, y = _data(8)
    with pytest.raises(ConfigError):
        train_regressor(x, y[:4], COLUMNS, RegTrainConfig())
    with pytest.raises(ConfigError):
        train_regressor(x[:, :9], y, COLUMNS, RegTrainConfig())
