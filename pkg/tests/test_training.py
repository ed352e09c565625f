import math

import numpy as np
import pytest

from rram_lstm.crossbar import init_random
from rram_lstm.data import Pairs
from rram_lstm.device import DeviceParams, NoiseFlags
from rram_lstm.network import NetworkLayout, WeightView, digital_forward, weight_view
from rram_lstm.training import (
    GradientTensors,
    TrainingConfig,
    bptt_gradients,
    initial_weights,
    make_streams,
    momentum_update,
    mse_loss,
    select_pulse,
    train_digital_baseline,
    train_epoch,
)

from conftest import fd_gradient, max_rel_err, random_weights

LAYOUT = NetworkLayout()


def make_xb(seed=0, flags=NoiseFlags()):
    s = make_streams(seed)
    return init_random(64, 64, DeviceParams(), flags, s["init"], s["d2d"]), s


class TestMse:
    def test_equal(self):
        assert mse_loss([0.1, 0.2], [0.1, 0.2]) == 0

    def test_arithmetic(self):
        assert mse_loss([1, 0], [0, 0]) == 0.5

    def test_oracle(self):
        rng = np.random.default_rng(1)
        a, b = rng.normal(size=50), rng.normal(size=50)
        assert mse_loss(a, b) == pytest.approx(math.fsum((a - b) ** 2) / 50, rel=1e-13)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss([1, 2], [1, 2, 3])


class TestBptt:
    def test_zero_loss_zero_gradient(self):
        w = WeightView(np.zeros((17, 60)), np.zeros(16))
        g = bptt_gradients(w, [0.4], [0.0], LAYOUT)
        assert not g.d_lstm.any() and not g.d_dense.any()

    def test_own_predictions_zero_gradient(self):
        w = random_weights(np.random.default_rng(0))
        x = np.random.default_rng(1).uniform(0, 1, 12)
        g = bptt_gradients(w, x, digital_forward(w, x, LAYOUT), LAYOUT)
        assert not g.d_lstm.any() and not g.d_dense.any()

    def test_finite_differences_short(self):
        rng = np.random.default_rng(2)
        w = random_weights(rng, scale=1.0)
        x, y = rng.uniform(0, 1, 4), rng.uniform(0, 1, 4)
        g = bptt_gradients(w, x, y, LAYOUT)
        fl, fd = fd_gradient(w, x, y)
        assert max_rel_err(g.d_lstm, fl) <= 1e-4
        assert max_rel_err(g.d_dense, fd) <= 1e-4

    def test_finite_differences_single_step_loss(self):
        rng = np.random.default_rng(3)
        w = random_weights(rng, scale=1.0)
        x, y = rng.uniform(0, 1, 5), rng.uniform(0, 1, 5)
        g = bptt_gradients(w, x, y, LAYOUT, loss_steps=[4])
        fl, fd = fd_gradient(w, x, y, loss_steps=[4])
        assert max_rel_err(g.d_lstm, fl) <= 1e-4
        assert max_rel_err(g.d_dense, fd) <= 1e-4

    def test_rejects_mismatch(self):
        with pytest.raises(ValueError):
            bptt_gradients(random_weights(np.random.default_rng(0)), [0.1, 0.2], [0.1], LAYOUT)


class TestMomentum:
    def _grad(self, g, prev):
        return GradientTensors(np.full((17, 60), g), np.full(16, g), np.full((17, 60), prev), np.full(16, prev))

    @pytest.mark.parametrize("g, prev, expected", [(1.0, 0.0, 0.01), (0.0, 0.01, 0.009), (-0.5, 0.02, 0.013)])
    def test_examples(self, g, prev, expected):
        gt = self._grad(g, prev)
        dl, dd = momentum_update(gt, TrainingConfig())
        np.testing.assert_allclose(dl, expected, rtol=1e-12)
        np.testing.assert_allclose(dd, expected, rtol=1e-12)
        assert gt.momentum_lstm is dl

    def test_recurrence_unrolled(self):
        cfg = TrainingConfig(alpha=0.25, eta=0.5)
        grads = [3.0, -1.0, 2.0]
        gt = self._grad(0.0, 0.0)
        for g in grads:
            gt.d_lstm[:] = g
            gt.d_dense[:] = g
            dl, _ = momentum_update(gt, cfg)
        unrolled = cfg.alpha * sum(cfg.eta ** (2 - k) * g for k, g in enumerate(grads))
        assert (dl == unrolled).all()

    def test_recurrence_defaults(self):
        cfg = TrainingConfig()
        rng = np.random.default_rng(0)
        seq = [rng.normal(size=(17, 60)) for _ in range(3)]
        gt = GradientTensors.zeros(LAYOUT)
        for g in seq:
            gt.d_lstm = g
            dl, _ = momentum_update(gt, cfg)
        unrolled = cfg.alpha * sum(cfg.eta ** (2 - k) * g for k, g in enumerate(seq))
        np.testing.assert_allclose(dl, unrolled, rtol=1e-14, atol=1e-16)


class TestSelectPulse:
    def test_positive(self):
        t = select_pulse(0.3, TrainingConfig())
        assert t.pulse.amplitude == 0.8 and t.pulse.duration == 100e-9 and t.positive_device

    def test_zero(self):
        assert select_pulse(0.0, TrainingConfig()) is None

    def test_tiny_negative(self):
        t = select_pulse(-1e-9, TrainingConfig())
        assert t is not None and not t.positive_device


class TestTrainEpoch:
    def test_zero_gradient_no_pulses(self, pairs):
        train, _ = pairs
        xb, s = make_xb(0)
        targets = digital_forward(weight_view(xb, LAYOUT), train.inputs, LAYOUT)
        data = Pairs(train.inputs, targets, train.index)
        g_before = xb.g.copy()
        rec = train_epoch(xb, LAYOUT, TrainingConfig(), data, GradientTensors.zeros(LAYOUT), s)
        assert rec.pulses_set == rec.pulses_reset == 0
        assert rec.energy_J == 0.0
        assert np.array_equal(xb.g, g_before)

    def test_pulse_budget_and_energy(self, pairs):
        train, _ = pairs
        xb, s = make_xb(1, NoiseFlags.all_on())
        gs = GradientTensors.zeros(LAYOUT)
        for epoch in range(3):
            before = xb.ledger.cumulative_energy
            rec = train_epoch(xb, LAYOUT, TrainingConfig(), train, gs, s, epoch)
            assert rec.pulses_set + rec.pulses_reset <= 1036
            assert rec.energy_J == xb.ledger.energy_per_epoch[-1]
            assert xb.ledger.cumulative_energy == before + rec.energy_J
            assert rec.energy_J > 0

    def test_sign_fidelity_and_economy(self, pairs):
        train, _ = pairs
        xb, s = make_xb(2)
        gs = GradientTensors.zeros(LAYOUT)
        cfg = TrainingConfig()
        p = xb.params
        for epoch in range(5):
            w0 = weight_view(xb, LAYOUT)
            g0 = xb.g.copy()
            rec = train_epoch(xb, LAYOUT, cfg, train, gs, s, epoch)
            w1 = weight_view(xb, LAYOUT)
            desired = np.concatenate([-gs.momentum_lstm.ravel(), -gs.momentum_dense])
            moved = np.concatenate([(w1.lstm_weights - w0.lstm_weights).ravel(), w1.dense_weights - w0.dense_weights])
            assert rec.pulses_set + rec.pulses_reset == np.count_nonzero(desired)
            stuck = moved == 0
            assert (np.sign(moved[~stuck]) == np.sign(desired[~stuck])).all()
            # a weight can only stay put if its device had no headroom left
            if stuck.any():
                assert (g0 >= p.g_max - 1e-3 * p.g_range).sum() > 0

    def test_reproducible(self, pairs):
        train, _ = pairs
        runs = []
        for _ in range(2):
            xb, s = make_xb(3, NoiseFlags.all_on())
            gs = GradientTensors.zeros(LAYOUT)
            recs = [train_epoch(xb, LAYOUT, TrainingConfig(), train, gs, s, e) for e in range(3)]
            runs.append(([(r.train_mse, r.energy_J, r.pulses_set, r.pulses_reset) for r in recs], xb.g.tobytes()))
        assert runs[0] == runs[1]

    def test_saturated_device_falls_back_to_reset(self):
        xb, s = make_xb(4)
        xb.g[:, :] = 200e-6
        xb.g[0, 0] = xb.params.g_max
        data = Pairs(np.array([0.5]), np.array([1.0]), np.array([1]))
        from rram_lstm.training import apply_manhattan

        desired = np.zeros((17, 60))
        desired[0, 0] = 1.0
        apply_manhattan(xb, LAYOUT, TrainingConfig(), desired, np.zeros(16), s["c2c"])
        assert xb.ledger.pulse_count_reset == 1 and xb.ledger.pulse_count_set == 0
        assert xb.g[1, 0] < 200e-6
        assert xb.g[0, 0] == xb.params.g_max

    def test_per_sample_granularity(self, pairs):
        train, _ = pairs
        short = Pairs(train.inputs[:6], train.targets[:6], train.index[:6])
        xb, s = make_xb(5)
        rec = train_epoch(xb, LAYOUT, TrainingConfig(granularity="per-sample"), short,
                          GradientTensors.zeros(LAYOUT), s)
        assert 1036 < rec.pulses_set + rec.pulses_reset <= 6 * 1036


class TestBaseline:
    def test_zero_learning_rate(self, pairs):
        train, _ = pairs
        w0 = initial_weights(LAYOUT, DeviceParams(), make_streams(0)["init"])
        res = train_digital_baseline(TrainingConfig(alpha=0.0, epochs=1), train, LAYOUT, w0)
        np.testing.assert_array_equal(res.weights.lstm_weights, w0.lstm_weights)
        assert res.loss_curve == [res.final_train_mse]

    def test_matches_crossbar_initial_weights(self):
        w0 = initial_weights(LAYOUT, DeviceParams(), make_streams(7)["init"])
        xb, _ = make_xb(7)
        np.testing.assert_array_equal(w0.lstm_weights, weight_view(xb, LAYOUT).lstm_weights)

    def test_short_run_decreases_loss(self, pairs):
        train, test = pairs
        w0 = initial_weights(LAYOUT, DeviceParams(), make_streams(0)["init"])
        res = train_digital_baseline(TrainingConfig(epochs=30), train, LAYOUT, w0, test)
        assert res.loss_curve[-1] < res.loss_curve[0]
        assert len(res.test_curve) == 30


class TestConfigValidation:
    def test_defaults_valid(self):
        assert TrainingConfig().violations() == []

    def test_collects_all(self):
        bad = TrainingConfig(alpha=0, eta=1.0, epochs=0, v_set=-1, granularity="x")
        assert len(bad.violations()) == 5


def test_streams_independent():
    a, b = make_streams(0), make_streams(0)
    assert a["init"].random() == b["init"].random()
    s = make_streams(0)
    assert len({round(g.random(), 12) for g in s.values()}) == len(s)
