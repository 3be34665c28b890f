import math

import numpy as np
import pytest
from scipy.stats import norm

from mgstc.errors import ConfigError, DomainError
from mgstc.online import (DriftMonitor, OnlineConfig, OnlineLearner, ReplayStores, Sample,
                          aggressive_update, augment_sample, augmentation_gap, explicit_gap_norm,
                          fine_tune_step, max_admissible_xi, monitor_check, online_loop,
                          random_orthonormal, verify_appendix)
from mgstc.stmodel import MGSTC, ModelConfig, checkpoint

MINI = dict(n_series=3, history=16, chunk_len=8, stride=4, d_model=8, n_heads=2, n_agg=2,
            horizon=2)


# -- monitor ------------------------------------------------------------------
def test_monitor_centered_statistic():
    v = monitor_check([1.0, 2.0, 3.0], [1.0, 3.0, 2.0, 2.0], 0.05)
    assert v.z_statistic == 0.0 and v.p_value == 0.5 and not v.drifted


def test_monitor_window_standard_error_example():
    # mu_bar = 1, mu = 2, sigma = 1 (ddof 1), B = 100 -> z = 10
    v = monitor_check([1.0, 2.0, 3.0], np.ones(100), 0.05, se_mode="window")
    assert v.z_statistic == pytest.approx(10.0, rel=1e-12)
    assert v.p_value == pytest.approx(norm.sf(10.0), rel=1e-9)
    assert v.p_value == pytest.approx(7.62e-24, rel=1e-2)
    assert v.drifted


def test_monitor_two_sample_standard_error():
    v = monitor_check([1.0, 2.0, 3.0], np.ones(100), 0.05)
    z = 1.0 / math.sqrt(1 / 3 + 1 / 100)
    assert v.z_statistic == pytest.approx(z, rel=1e-12)
    assert v.p_value == pytest.approx(norm.sf(z), rel=1e-9)


def test_monitor_single_sample_uses_recent_losses():
    window = np.arange(20.0)
    v = monitor_check([30.0], window, 0.05, se_mode="window")
    sigma = np.std(np.r_[window[-7:], 30.0], ddof=1)
    assert v.z_statistic == pytest.approx((30.0 - window.mean()) / (sigma / math.sqrt(20)))


def test_monitor_constant_losses_floor_sigma():
    v = monitor_check([1.0, 1.0], [1.0, 1.0], 0.05)
    assert v.z_statistic == 0.0 and not v.drifted
    v = monitor_check([2.0, 2.0], [1.0, 1.0], 0.05)
    assert v.drifted and np.isfinite(v.z_statistic)


def test_monitor_warm_up_and_threshold_domain():
    v = monitor_check([5.0, 6.0], [], 0.05)
    assert (v.z_statistic, v.p_value, v.drifted) == (0.0, 1.0, False)
    for d in (0.0, 1.0, -0.1, 2.0):
        with pytest.raises(ConfigError):
            monitor_check([1.0], [1.0], d)
    with pytest.raises(ConfigError):
        monitor_check([1.0], [1.0], 0.05, se_mode="other")


def test_smaller_threshold_is_stricter(rng):
    for _ in range(500):
        batch = rng.normal(rng.uniform(-1, 1), 1, size=5)
        window = rng.normal(0, 1, size=30)
        d_small, d_big = sorted(rng.uniform(1e-6, 0.999, size=2))
        if monitor_check(batch, window, d_small).drifted:
            assert monitor_check(batch, window, d_big).drifted


def test_false_alarm_rate_iid(rng):
    d, drifts = 0.05, 0
    window = list(rng.normal(size=100))
    for _ in range(10_000):
        batch = rng.normal(size=8)
        drifts += monitor_check(batch, window, d).drifted
        window = (window + list(batch))[-100:]
    assert 0.5 * d <= drifts / 10_000 <= 2 * d


def test_drift_verdict_record():
    mon = DriftMonitor(0.05)
    v = mon.check([3.0, 4.0], [0.0, 0.1, 0.2], batch_index=7)
    rec = v.to_record("fine_tune+aggressive")
    assert set(rec) == {"batch_index", "z", "p_value", "drifted", "stage"}
    assert rec["batch_index"] == 7 and rec["drifted"] is True
    assert mon.checks == 1 and mon.alarms == 1
    mon.reset()
    assert mon.checks == 0


# -- replay stores --------------------------------------------------------------
def _s(i):
    return Sample(np.full((1, 1), float(i)), np.zeros((1, 1)), float(i))


def test_fifo_against_reference(rng):
    stores = ReplayStores(7, 13)
    ref_b, ref_h = [], []
    n = 0
    for _ in range(2_000):
        if rng.random() < 0.1:
            stores.flush()
            ref_h = (ref_h + ref_b)[-13:]
            ref_b = []
        else:
            k = int(rng.integers(1, 5))
            batch = [_s(n + j) for j in range(k)]
            n += k
            stores.push(batch)
            ref_b = (ref_b + [s.loss for s in batch])[-7:]
        assert [s.loss for s in stores.buffer] == ref_b
        assert [s.loss for s in stores.history] == ref_h
    np.testing.assert_array_equal(stores.buffer_losses(), ref_b)


def test_store_sampling(rng):
    stores = ReplayStores(5, 5)
    stores.push([_s(i) for i in range(5)])
    picked = stores.sample_buffer(10, rng)
    assert sorted(s.loss for s in picked) == [0, 1, 2, 3, 4]
    stores.flush()
    assert not stores.buffer and len(stores.sample_history(12, rng)) == 12
    with pytest.raises(ConfigError):
        ReplayStores(0, 3)


# -- update stages ---------------------------------------------------------------
def _samples(rng, k, cfg):
    return [Sample(rng.normal(size=(cfg.n_series, cfg.history)),
                   rng.normal(size=(cfg.n_series, cfg.horizon)), 1.0) for _ in range(k)]


def test_fine_tune_step_contract(rng):
    cfg = ModelConfig(**MINI)
    model = MGSTC(cfg, lr=1e-2)
    stores = ReplayStores(10, 20)
    out = fine_tune_step(model, _samples(rng, 3, cfg), stores, 0.5, rng)
    assert out.replay == 0.0 and out.fine == pytest.approx(out.current)
    assert len(stores.buffer) == 3
    out = fine_tune_step(model, _samples(rng, 3, cfg), stores, 0.5, rng)
    assert out.fine == pytest.approx(out.current + 0.5 * out.replay, rel=1e-12)
    assert out.replay > 0 and len(stores.buffer) == 6
    assert {s.step_count for s in model.optimizer.states.values()} == {2}


def test_fine_tune_with_zero_eta_ignores_replay(rng):
    cfg = ModelConfig(**MINI)
    model = MGSTC(cfg, lr=1e-2)
    twin = checkpoint.from_dict(checkpoint.to_dict(model))[0]
    stores = ReplayStores(10, 20)
    stores.push(_samples(rng, 4, cfg))
    cur = _samples(rng, 2, cfg)
    out = fine_tune_step(model, cur, stores, 0.0, rng)
    assert out.replay > 0
    from mgstc.online.learner import _loss
    twin.step(_loss(twin, cur))
    for k in model.params:
        np.testing.assert_array_equal(model.params[k].data, twin.params[k].data)


def test_aggressive_update_contract(rng):
    cfg = ModelConfig(**MINI)
    model = MGSTC(cfg, lr=1e-2)
    stores = ReplayStores(10, 20)
    stores.push(_samples(rng, 5, cfg))
    stores.flush()
    fresh = _samples(rng, 7, cfg)
    stores.push(fresh)
    before = [s.x for s in stores.history]
    out = aggressive_update(model, stores, 0.5, epochs=3, xi=0.01, batch_size=3, rng=rng)
    assert {s.step_count for s in model.optimizer.states.values()} == {3 * 3}
    assert not stores.buffer
    assert [s.x for s in stores.history] == before + [s.x for s in fresh]
    assert out.history > 0 and out.aggressive is not None


def _stream(rng, length=260, n=3):
    t = np.arange(length)[:, None]
    return np.sin(2 * np.pi * t / 24 + np.arange(n)) + 0.1 * rng.normal(size=(length, n))


def test_stage_exclusivity_and_label_delay(rng):
    model = MGSTC(ModelConfig(**MINI), lr=1e-3)
    res = online_loop(model, _stream(rng), OnlineConfig(batch_size=4, threshold=0.3), seed=1)
    stages = [r.stage for r in res.records]
    assert set(stages) <= {"await_labels", "fine_tune", "fine_tune+aggressive"}
    for r in res.records:
        assert (r.stage == "fine_tune+aggressive") == (r.verdict is not None and r.verdict.drifted)
    assert res.drift_batches
    assert [rec["batch_index"] for rec in res.drift_log()] == [
        r.index for r in res.records if r.verdict is not None]


def test_labels_arrive_after_the_horizon(rng):
    # horizon 2, one window per batch: the first tuning happens at batch 2
    model = MGSTC(ModelConfig(**MINI), lr=1e-3)
    res = online_loop(model, _stream(rng, 30), OnlineConfig(batch_size=1))
    assert [r.stage for r in res.records[:3]] == ["await_labels", "await_labels", "fine_tune"]
    res = online_loop(model, _stream(rng, 30), OnlineConfig(batch_size=1, label_delay=5))
    assert [r.stage for r in res.records[:6]] == ["await_labels"] * 5 + ["fine_tune"]


def test_zero_label_delay_tunes_immediately(rng):
    model = MGSTC(ModelConfig(**MINI), lr=1e-3)
    res = online_loop(model, _stream(rng, 60), OnlineConfig(batch_size=4, label_delay=0))
    assert res.records[0].stage == "fine_tune"


def test_tiny_threshold_never_alarms(rng):
    model = MGSTC(ModelConfig(**MINI), lr=1e-4)
    values = rng.normal(size=(400, 3))
    res = online_loop(model, values, OnlineConfig(batch_size=4, threshold=1e-9))
    assert res.drift_batches == []
    assert {r.stage for r in res.records} <= {"await_labels", "fine_tune"}


def test_frozen_leaves_model_untouched_and_repeats(rng):
    model = MGSTC(ModelConfig(**MINI))
    before = model.state_arrays()
    values = _stream(rng)
    a = online_loop(model, values, OnlineConfig(online=False, batch_size=4))
    b = online_loop(model, values, OnlineConfig(online=False, batch_size=4))
    assert a.trace.mse == b.trace.mse
    for k, v in model.state_arrays().items():
        np.testing.assert_array_equal(v, before[k])
    assert {r.stage for r in a.records} == {"frozen"}


def test_metric_scale_rescales_errors(rng):
    model = MGSTC(ModelConfig(**MINI))
    values = _stream(rng, 60)
    plain = online_loop(model, values, OnlineConfig(online=False, batch_size=4))
    scaled = online_loop(model, values, OnlineConfig(online=False, batch_size=4),
                         metric_scale=np.full(3, 2.0))
    np.testing.assert_allclose(scaled.trace.mse, 4 * np.array(plain.trace.mse), rtol=1e-12)
    np.testing.assert_allclose(scaled.trace.mae, 2 * np.array(plain.trace.mae), rtol=1e-12)


def test_online_config_validation():
    for bad in (dict(eta_fine=-1), dict(threshold=1.0), dict(replay="x"), dict(xi=-1.0),
                dict(label_delay=-2), dict(aggressive_epochs=0), dict(se_mode="z")):
        with pytest.raises(ConfigError):
            OnlineConfig(**bad)


def test_learner_is_deterministic(rng):
    values = _stream(rng)
    runs = []
    for _ in range(2):
        model = MGSTC(ModelConfig(**MINI), seed=5, lr=1e-3)
        res = OnlineLearner(model, OnlineConfig(batch_size=4, threshold=0.3), seed=9).run(values)
        runs.append((res.trace.mse, model.state_arrays()))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        np.testing.assert_array_equal(runs[0][1][k], runs[1][1][k])


# -- augmentation -------------------------------------------------------------------
def test_augment_sample_noise_variance():
    rng = np.random.default_rng(0)
    x = np.zeros((200, 500))
    out = augment_sample(x, 0.04, rng)
    assert out.var() == pytest.approx(0.04, rel=0.02)
    assert abs(out.mean()) < 0.002
    np.testing.assert_array_equal(augment_sample(x[:2], 0.0, rng), x[:2])
    with pytest.raises(ConfigError):
        augment_sample(x, -1.0, rng)


def test_gap_worked_example():
    plain, aug = augmentation_gap(1.0, 2.0, 0.5, 0.2, 1.5)
    assert plain == pytest.approx(1 / 3, abs=1e-15)
    assert aug == pytest.approx(1 - 1.9 / 2.25, abs=1e-15)
    assert aug == pytest.approx(0.1556, abs=5e-5)


def test_gap_vanishes_for_small_noise_at_lower_nu():
    plain, aug = augmentation_gap(1.0, 3.0, 0.3, 1e-12, 2.0)
    assert aug == pytest.approx(0.0, abs=1e-11) and plain == pytest.approx(0.375)


@pytest.mark.parametrize("args", [(2.0, 1.0, 0.5, 0.1, 1.0), (1.0, 2.0, 1.0, 0.1, 1.5),
                                  (1.0, 2.0, 0.5, 0.0, 1.5), (1.0, 2.0, 0.5, 0.1, 2.5),
                                  (0.0, 2.0, 0.5, 0.1, 2.5)])
def test_gap_domain(args):
    with pytest.raises(DomainError):
        augmentation_gap(*args)


def test_admissible_noise_bound_is_tight():
    a, b, g, nu = 1.0, 2.0, 0.5, 1.5
    cap = max_admissible_xi(a, b, g, nu)
    p, q = augmentation_gap(a, b, g, cap * (1 - 1e-9), nu)
    assert q < p
    p, q = augmentation_gap(a, b, g, cap * (1 + 1e-9), nu)
    assert q > p


def test_explicit_gap_norm_matches_closed_form(rng):
    for _ in range(50):
        t = int(rng.integers(2, 33))
        k = int(rng.integers(1, min(8, t - 1) + 1))
        a = rng.uniform(0.1, 3)
        b = a + rng.uniform(0.1, 3)
        g = rng.uniform(0.05, 0.95)
        nu = rng.uniform(0, 2 * (b - a), size=k)
        u = random_orthonormal(rng, t, k)
        np.testing.assert_allclose(u.T @ u, np.eye(k), atol=1e-12)
        lam = (1 - g) * a + g * b
        assert abs(explicit_gap_norm(a, b, g, u, nu) - g * (b - a) / lam) < 1e-8


def test_verify_appendix_report():
    r = verify_appendix(500, seed=3, n_spectral=20)
    assert r["violations"] == 0 and r["min_margin"] > 0
    assert r["spectral_max_abs_error"] < 1e-8
    assert r["worked_example"]["gap_plain"] == pytest.approx(1 / 3)
    assert r == verify_appendix(500, seed=3, n_spectral=20)
    with pytest.raises(ConfigError):
        verify_appendix(0)
