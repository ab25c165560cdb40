import numpy as np
import pytest

import oracles
from dmsgcn.data import synth_windows
from dmsgcn.errors import NumericalError
from dmsgcn.model import DMSGCNModel, ModelConfig, save
from dmsgcn.optim import lr_schedule
from dmsgcn.training import (
    TrainSettings,
    evaluate,
    evaluate_loss,
    predict,
    report_from_predictions,
    train,
    zero_velocity,
)

TINY = dict(hidden_width=8, blocks_per_scale=1, tcn_layers=2)


def tiny(**kw):
    return DMSGCNModel(ModelConfig(**{**TINY, **kw}))


@pytest.fixture(scope="module")
def windows():
    return synth_windows(12, seed=3)


def test_schedule_halves_at_10_and_20():
    lrs = [lr_schedule(e, 1e-3) for e in range(25)]
    assert lrs[:10] == [1e-3] * 10
    assert lrs[10:20] == [5e-4] * 10
    assert lrs[20:] == [2.5e-4] * 5


def test_history_records_schedule(windows):
    h = train(tiny(), windows[:2], settings=TrainSettings(epochs=21, batch_size=2))
    assert [e.lr for e in h.epochs][9:12] == [1e-3, 5e-4, 5e-4]
    assert h.epochs[20].lr == 2.5e-4


def test_loss_decreases(windows):
    s = TrainSettings(epochs=20, batch_size=4, lr=1e-2, lr_decay_every=100)
    h = train(tiny(), windows, settings=s)
    assert h.train_losses[-1] < 0.7 * h.train_losses[0]


def test_seeded_runs_are_bitwise_identical(windows, tmp_path):
    logs = []
    for run in "ab":
        model = tiny(seed=5)
        h = train(model, windows, windows[:4], TrainSettings(epochs=3, batch_size=5))
        h.write_csv(tmp_path / f"{run}.csv")
        save(model, tmp_path / run)
        logs.append([(e.train_loss, e.val_loss) for e in h.epochs])
    assert logs[0] == logs[1]
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    for f in sorted((tmp_path / "a").rglob("*.*")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_shuffle_seed_changes_trajectory(windows):
    a = train(tiny(), windows, settings=TrainSettings(epochs=2, batch_size=5, shuffle_seed=0))
    b = train(tiny(), windows, settings=TrainSettings(epochs=2, batch_size=5, shuffle_seed=1))
    assert a.train_losses != b.train_losses


def test_masked_entries_stay_zero_after_training(windows):
    model = tiny(max_hop_joint=1)
    train(model, windows[:4], settings=TrainSettings(epochs=5, batch_size=2, lr=1e-2))
    for p in model.parameters():
        if p.freeze_mask is not None:
            assert not p.data[~p.freeze_mask].any(), p.name


def test_zero_weights_evaluation_is_zero_velocity(windows):
    report = evaluate(tiny().zero_weights(), windows)
    base = report_from_predictions(zero_velocity(windows), windows)
    np.testing.assert_allclose(report.average, base.average, rtol=1e-6)
    frames = [f - 1 for f in report.frames]
    for s, row in zip(windows, report.window_rows):
        last = np.repeat(s.observed[-1:], 25, axis=0)
        want = [oracles.mpjpe(last.tolist(), s.target.tolist(), [k]) for k in frames]
        np.testing.assert_allclose(row[3], want, rtol=1e-6)


def test_perfect_prediction_gives_zero_table(windows):
    pred = np.stack([s.target for s in windows])
    report = report_from_predictions(pred, windows)
    assert not report.average.any()
    assert "average" in report.table()


def test_average_is_window_mean(windows):
    for i, s in enumerate(windows):
        s.action = "a" if i % 3 else "b"
    pred = zero_velocity(windows) + 1.0
    report = report_from_predictions(pred, windows)
    rows = np.array([r[3] for r in report.window_rows])
    np.testing.assert_allclose(report.average, rows.mean(axis=0))
    assert report.counts() == {"a": 8, "b": 4}
    assert report.actions == ["a", "b"]
    for s in windows:
        s.action = "synthetic"


def test_report_csv_files(windows, tmp_path):
    report = report_from_predictions(zero_velocity(windows), windows)
    report.write_csv(tmp_path / "e.csv")
    report.write_windows_csv(tmp_path / "w.csv")
    head, *rows = (tmp_path / "e.csv").read_text().splitlines()
    assert head == "action,n,80ms,160ms,320ms,400ms,560ms,1000ms"
    assert rows[-1].startswith("average,12,")
    assert len((tmp_path / "w.csv").read_text().splitlines()) == 13


def test_horizon_beyond_prediction(windows):
    with pytest.raises(ValueError):
        report_from_predictions(zero_velocity(windows)[:, :9], windows)


def test_predict_keeps_training_flag(windows):
    model = tiny().train()
    obs = np.stack([s.observed for s in windows])
    out = predict(model, obs, batch_size=5)
    assert out.shape == (12, 25, 22, 3) and out.dtype == np.float64 and model.training


def test_evaluate_loss_empty_is_nan():
    assert np.isnan(evaluate_loss(tiny(), []))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises(windows):
    model = tiny()
    model.decoder.layers[0].bias.data[...] = np.inf
    with pytest.raises(NumericalError):
        train(model, windows[:2], settings=TrainSettings(epochs=1, batch_size=2))


def test_periodic_checkpoints(windows, tmp_path):
    train(tiny(), windows[:2], settings=TrainSettings(epochs=4, batch_size=2, checkpoint_every=2),
          checkpoint_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["epoch_0001", "epoch_0003"]
