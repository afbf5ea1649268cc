import json
from dataclasses import replace
from datetime import date, timedelta

import numpy as np
import pytest

from resilient_forecast.dataio import WindowedDataset
from resilient_forecast.errors import DivergenceError, ValidationError
from resilient_forecast.mlp import (MLPModel, Scaler, TrainConfig, backprop, dataset_loss, forward,
                                    forward_batch, init_model, load_model, loss, model_from_dict,
                                    model_to_dict, save_model, train)


def _dataset(x_raw, z):
    days = tuple(date(2004, 1, 8) + timedelta(days=k) for k in range(len(z)))
    return WindowedDataset(np.asarray(x_raw, float), np.asarray(z, float), days)


def _zero_model(**kw):
    m = MLPModel(np.zeros((50, 168)), np.zeros(50), np.zeros(50), 0.0)
    return replace(m, **kw) if kw else m


def _naive_forward(model, x):
    s = model.scaler
    out = model.b2
    for i in range(model.n_hidden):
        a = model.b1[i]
        for j in range(model.n_in):
            a += model.w1[i, j] * (x[j] - s.input_center) / s.input_scale
        out += model.w2[i] / (1.0 + np.exp(-a))
    return s.output_center + s.output_scale * out


def test_init_model_determinism_and_bounds():
    a, b = init_model(1), init_model(1)
    assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
    assert not np.array_equal(a.w1, init_model(2).w1)
    assert np.all(np.abs(a.w1) <= 1 / np.sqrt(168))
    assert np.all(np.abs(a.w2) <= 1 / np.sqrt(50))
    assert np.all(a.b1 == 0) and a.b2 == 0
    assert a.w1.shape == (50, 168) and a.hidden_activation == "sigmoid" and a.output_activation == "linear"


def test_model_invariants():
    with pytest.raises(ValidationError):
        MLPModel(np.full((50, 168), np.nan), np.zeros(50), np.zeros(50), 0.0)
    with pytest.raises(ValidationError):
        MLPModel(np.zeros((50, 168)), np.zeros(49), np.zeros(50), 0.0)
    m = init_model(0)
    with pytest.raises(ValueError):
        m.w1[0, 0] = 3.0


def test_forward_closed_forms():
    x = np.full(168, 9.0)
    assert forward(_zero_model(), x) == 0.0
    assert forward(_zero_model(w2=np.ones(50)), x) == 25.0


def test_forward_matches_naive_oracle(rng):
    m = replace(init_model(3), b1=rng.normal(size=50), b2=0.3, scaler=Scaler(9.8, 0.2, 9.7, 0.3))
    for _ in range(3):
        x = rng.normal(9.8, 0.3, 168)
        assert abs(forward(m, x) - _naive_forward(m, x)) <= 1e-12 * max(1, abs(_naive_forward(m, x)))


def test_forward_batch_agrees_and_is_pure(rng):
    m = replace(init_model(4), scaler=Scaler(9.8, 0.2, 9.7, 0.3))
    x = rng.normal(9.8, 0.3, (7, 168))
    batch = forward_batch(m, x)
    single = np.array([forward(m, r) for r in x])
    assert np.allclose(batch, single, rtol=1e-13, atol=0)
    assert forward(m, x[0]) == forward(m, x[0])


def test_forward_rejects_bad_input():
    m = init_model(0)
    with pytest.raises(ValidationError):
        forward(m, np.full(168, np.inf))
    with pytest.raises(ValidationError):
        forward(m, np.zeros(167))


def test_loss_cases():
    assert loss(1.5, 1.5) == 0
    assert loss(3, 1) == 2
    assert loss(1, 3) == 2


def test_dataset_loss(rng):
    x = rng.uniform(100, 200, (2, 168))
    m = _zero_model(b2=1.0)
    ds = _dataset(x, [3.0, -1.0])
    # residuals 1 - 3 = -2 and 1 - (-1) = 2 -> losses 2 and 2
    assert dataset_loss(m, ds) == 2.0
    ds2 = _dataset(x, [3.0, 1.0 - np.sqrt(8)])
    assert dataset_loss(m, ds2) == pytest.approx(3.0, rel=1e-15)
    m3 = replace(init_model(5), scaler=Scaler(5.0, 0.2, 5.0, 0.1))
    ds3 = _dataset(x, rng.normal(5, 0.1, 2))
    naive = sum(0.5 * (_naive_forward(m3, np.log(r)) - z) ** 2 for r, z in zip(x, ds3.z)) / 2
    assert dataset_loss(m3, ds3) == pytest.approx(naive, rel=1e-12)
    with pytest.raises(ValidationError):
        dataset_loss(m, ds.take([]))


def test_backprop_zero_at_exact_fit(rng):
    m = init_model(6)
    x = rng.normal(0, 1, 168)
    g = backprop(m, x, forward(m, x))
    assert not np.any(g.as_vector())


def test_backprop_b2_is_residual(rng):
    m = replace(init_model(7), b1=rng.normal(size=50))
    x = rng.normal(0, 1, 168)
    z_hat = forward(m, x)
    assert backprop(m, x, 0.25).b2 == z_hat - 0.25


def test_backprop_central_differences_float64(rng):
    m = replace(init_model(8), b1=rng.normal(0, 0.5, 50), scaler=Scaler(9.9, 0.2, 9.9, 0.2))
    x, z = rng.normal(9.9, 0.2, 168), 10.0
    g = backprop(m, x, z)
    h = 1e-6
    for name, idx in [("w1", (3, 7)), ("w1", (49, 167)), ("b1", (11,)), ("w2", (20,))]:
        arr = np.array(getattr(m, name))
        arr[idx] += h
        up = loss(forward(replace(m, **{name: arr}), x), z)
        arr[idx] -= 2 * h
        down = loss(forward(replace(m, **{name: arr}), x), z)
        assert getattr(g, name)[idx] == pytest.approx((up - down) / (2 * h), rel=1e-5)


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(max_epochs=0).validate()
    with pytest.raises(ValidationError):
        TrainConfig(eta=0).validate()
    with pytest.raises(ValidationError):
        TrainConfig.from_dict({"learning_rate": 1})
    cfg = TrainConfig.from_dict({"eta": 0.5, "seed": 3})
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_single_step_matches_hand_oracle(rng):
    x = rng.uniform(0.5, 1.5, (2, 168))
    ds = _dataset(x, [0.3, -0.2])
    m = replace(init_model(9), b1=rng.normal(size=50), b2=0.1)
    eta = 0.05
    grads = [backprop(m, np.log(r), z) for r, z in zip(x, ds.z)]
    want_w1 = m.w1 - eta / 2 * (grads[0].w1 + grads[1].w1)
    want_b2 = m.b2 - eta / 2 * (grads[0].b2 + grads[1].b2)
    out, report = train(m, ds, TrainConfig(eta=eta, max_epochs=1, standardize=False))
    assert report.epochs_run == 1 and len(report.loss_trace) == 1
    assert report.final_loss == report.loss_trace[-1]
    assert report.loss_trace[0] == pytest.approx(dataset_loss(m, ds), rel=1e-12)
    assert np.allclose(out.w1, want_w1, rtol=1e-12, atol=1e-15)
    assert out.b2 == pytest.approx(want_b2, rel=1e-12)
    # w is updated, i.e. the step moved the parameters
    assert not np.array_equal(out.w1, m.w1)


def test_constant_target_fits(rng):
    x = rng.uniform(80, 120, (30, 168))
    ds = _dataset(x, np.full(30, 0.7))
    _, report = train(init_model(0), ds, TrainConfig(eta=0.05, max_epochs=2000))
    assert report.final_loss < 1e-4
    assert report.epochs_run <= 2000


def test_monotone_loss_small_eta(small_splits):
    _, report = train(init_model(1), small_splits[0], TrainConfig(eta=1e-3, max_epochs=50))
    trace = np.array(report.loss_trace)
    assert len(trace) == 50
    assert np.all(np.diff(trace) <= 0)


def test_training_reduces_loss_and_is_deterministic(small_splits):
    cfg = TrainConfig(max_epochs=200, seed=2)
    a, ra = train(init_model(2), small_splits[0], cfg)
    b, rb = train(init_model(2), small_splits[0], cfg)
    assert a.w1.tobytes() == b.w1.tobytes() and ra.loss_trace == rb.loss_trace
    assert ra.final_loss < ra.loss_trace[0]
    assert not a.scaler.is_identity
    assert a.seed == 2


def test_permutation_invariance(small_splits, rng):
    train_ds = small_splits[0]
    perm = rng.permutation(len(train_ds))
    shuffled = WindowedDataset(train_ds.x_raw[perm], train_ds.z[perm], train_ds.target_days)
    cfg = TrainConfig(max_epochs=25)
    a, _ = train(init_model(3), train_ds, cfg)
    b, _ = train(init_model(3), shuffled, cfg)
    assert a.w1.tobytes() == b.w1.tobytes() and a.b2 == b.b2


def test_loss_tolerance_stops_early(small_splits):
    _, report = train(init_model(3), small_splits[0], TrainConfig(max_epochs=5000, loss_tolerance=1e-3))
    assert report.epochs_run < 5000


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch(small_splits):
    # an absurd step overflows the weights in one update; the next loss is not finite
    with pytest.raises(DivergenceError) as err:
        train(init_model(0), small_splits[0], TrainConfig(eta=1e300, max_epochs=10))
    assert err.value.epoch == 2
    assert "epoch 2" in str(err.value)


def test_stops_when_loss_stops_decreasing(rng):
    x = rng.uniform(80, 120, (30, 168))
    ds = _dataset(x, np.full(30, 0.7))
    _, report = train(init_model(0), ds, TrainConfig(eta=0.05, max_epochs=2000, standardize=False))
    trace = report.loss_trace
    assert report.epochs_run < 2000
    assert trace[-2] - trace[-1] < 1e-8


def test_train_rejects_empty(small_splits):
    with pytest.raises(ValidationError):
        train(init_model(0), small_splits[0].take([]), TrainConfig())


def test_persistence_round_trip(tmp_path, rng):
    m = replace(init_model(11), b1=rng.normal(size=50), b2=0.5, scaler=Scaler(1, 2, 3, 4), seed=11)
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert back.w1.tobytes() == m.w1.tobytes() and back.w2.tobytes() == m.w2.tobytes()
    assert back.b2 == m.b2 and back.scaler == m.scaler and back.seed == 11
    doc = json.loads(path.read_text())
    assert doc["layers"] == {"input": 168, "hidden": 50, "output": 1}
    assert doc["activations"] == {"hidden": "sigmoid", "output": "linear"}
    assert len(doc["w2"]) == 1 and len(doc["w2"][0]) == 50
    bad = dict(doc, version=99)
    with pytest.raises(ValidationError):
        model_from_dict(bad)
    with pytest.raises(ValidationError):
        model_from_dict(dict(doc, layers={"input": 10, "hidden": 50, "output": 1}))
    assert model_to_dict(back) == model_to_dict(m)
