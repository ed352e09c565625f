"""In-situ Manhattan-rule training on the crossbar, and a float baseline.

Gradients are computed digitally by backpropagation through time on the
noise-free weight mirror. The momentum accumulator follows

    dW_t = alpha * grad + eta * dW_{t-1}

and the weight should move along ``-dW_t``. On the crossbar only the sign of
that desired change is used: one fixed set pulse on G+ to raise a weight,
one on G- to lower it. If the device to be potentiated is saturated at
g_max, its partner is reset instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .crossbar import CrossbarArray, init_random, program_pulse
from .data import Pairs, mse
from .device import NoiseFlags, PulseSpec
from .network import NetworkLayout, WeightView, digital_forward, forward_sequence, weight_view

GRANULARITIES = ("per-epoch", "per-sample")
STREAM_NAMES = ("init", "d2d", "c2c", "read", "baseline")

mse_loss = mse


@dataclass(frozen=True)
class TrainingConfig:
    alpha: float = 0.01
    eta: float = 0.9
    g2w_ratio: float = 1e-4
    v_set: float = 0.8
    v_reset: float = -0.8
    t_p: float = 100e-9
    epochs: int = 200
    flags: NoiseFlags = field(default_factory=NoiseFlags)
    seed: int = 0
    granularity: str = "per-epoch"
    # Fraction of the conductance window below g_max treated as saturated;
    # 0 means only a device sitting exactly at g_max counts.
    saturation_margin: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if not self.alpha > 0:
            out.append(f"training.alpha: must be > 0, got {self.alpha}")
        if not 0 <= self.eta < 1:
            out.append(f"training.eta: must be in [0, 1), got {self.eta}")
        if not self.g2w_ratio > 0:
            out.append(f"training.g2w_ratio: must be > 0, got {self.g2w_ratio}")
        if not self.v_set > 0 > self.v_reset:
            out.append(f"training.v_set/v_reset: need v_set > 0 > v_reset, got {self.v_set}, {self.v_reset}")
        if not self.t_p > 0:
            out.append(f"training.t_p: must be > 0, got {self.t_p}")
        if self.epochs < 1:
            out.append(f"training.epochs: must be >= 1, got {self.epochs}")
        if self.granularity not in GRANULARITIES:
            out.append(f"training.granularity: must be one of {GRANULARITIES}, got {self.granularity!r}")
        if not 0 <= self.saturation_margin < 1:
            out.append(f"training.saturation_margin: must be in [0, 1), got {self.saturation_margin}")
        return out


def make_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from one master seed."""
    return {
        name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
        for k, name in enumerate(STREAM_NAMES)
    }


@dataclass
class GradientTensors:
    d_lstm: np.ndarray
    d_dense: np.ndarray
    momentum_lstm: np.ndarray
    momentum_dense: np.ndarray

    @classmethod
    def zeros(cls, layout: NetworkLayout) -> GradientTensors:
        n_l = (layout.lstm_in, 4 * layout.n_hidden)
        return cls(np.zeros(n_l), np.zeros(layout.dense_in), np.zeros(n_l), np.zeros(layout.dense_in))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_mse: float
    energy_J: float
    pulses_set: int
    pulses_reset: int
    test_mse: float = float("nan")


def bptt_gradients(w: WeightView, inputs, targets, layout: NetworkLayout, loss_steps=None) -> GradientTensors:
    """Gradient of the mean-squared error over the whole sequence.

    ``loss_steps`` optionally restricts the loss to the mean over a subset
    of time steps; per-sample updates use a single step.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.shape != targets.shape or inputs.size == 0:
        raise ValueError("inputs and targets must be equal-length, non-empty")
    n_h = layout.n_hidden
    T = len(inputs)
    preds, cache = digital_forward(w, inputs, layout, cache=True)
    U, G, C, H = cache["U"], cache["G"], cache["C"], cache["H"]
    if loss_steps is None:
        dy = 2.0 * (preds - targets) / T
    else:
        keep = np.zeros(T, dtype=bool)
        keep[loss_steps] = True
        dy = np.where(keep, 2.0 * (preds - targets) / keep.sum(), 0.0)

    Wl = w.lstm_weights
    wd = w.dense_weights
    d_lstm = np.zeros_like(Wl)
    d_dense = np.zeros_like(wd)
    sa, si, so, sf = (layout.gate_slice(g) for g in ("a", "i", "o", "f"))
    dh_next = np.zeros(n_h)
    dc_next = np.zeros(n_h)
    dz = np.empty(4 * n_h)
    for t in range(T - 1, -1, -1):
        a, i, o, f = G[t]
        c_prev, c = C[t], C[t + 1]
        d_dense[:n_h] += dy[t] * H[t]
        d_dense[n_h] += dy[t]
        dh = dy[t] * wd[:n_h] + dh_next
        tc = np.tanh(c)
        dc = dh * o * (1.0 - tc**2) + dc_next
        dz[sa] = dc * i * (1.0 - a**2)
        dz[si] = dc * a * i * (1.0 - i)
        dz[so] = dh * tc * o * (1.0 - o)
        dz[sf] = dc * c_prev * f * (1.0 - f)
        d_lstm += np.outer(U[t], dz)
        dh_next = (Wl @ dz)[:n_h]
        dc_next = dc * f
    z_l, z_d = np.zeros_like(d_lstm), np.zeros_like(d_dense)
    return GradientTensors(d_lstm, d_dense, z_l, z_d)


def momentum_update(grad: GradientTensors, cfg: TrainingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Advance the momentum accumulators in place and return the new ``dW``."""
    grad.momentum_lstm = cfg.alpha * grad.d_lstm + cfg.eta * grad.momentum_lstm
    grad.momentum_dense = cfg.alpha * grad.d_dense + cfg.eta * grad.momentum_dense
    return grad.momentum_lstm, grad.momentum_dense


class PulseTarget(NamedTuple):
    pulse: PulseSpec
    positive_device: bool  # True -> G+, False -> G-


def select_pulse(delta_w: float, cfg: TrainingConfig) -> PulseTarget | None:
    """Sign-only pulse choice for a desired weight change."""
    if delta_w > 0:
        return PulseTarget(PulseSpec(cfg.v_set, cfg.t_p), True)
    if delta_w < 0:
        return PulseTarget(PulseSpec(cfg.v_set, cfg.t_p), False)
    return None


def _apply_pair_update(xb, cfg, target: PulseTarget, plus, minus, rng) -> None:
    (r_p, c_p), (r_m, c_m) = plus, minus
    up, down = ((r_p, c_p), (r_m, c_m)) if target.positive_device else ((r_m, c_m), (r_p, c_p))
    p = xb.params
    if xb.g[up] >= p.g_max - cfg.saturation_margin * p.g_range:
        program_pulse(xb, *down, PulseSpec(cfg.v_reset, cfg.t_p), rng)
    else:
        program_pulse(xb, *up, target.pulse, rng)


def apply_manhattan(
    xb: CrossbarArray,
    layout: NetworkLayout,
    cfg: TrainingConfig,
    desired_lstm: np.ndarray,
    desired_dense: np.ndarray,
    rng: np.random.Generator,
) -> None:
    """One pulse (at most) per logical weight, in row-major logical order."""
    n_in, n_out = desired_lstm.shape
    for i in range(n_in):
        for j in range(n_out):
            target = select_pulse(desired_lstm[i, j], cfg)
            if target is not None:
                rp, rm, col = layout.lstm_cell(i, j)
                _apply_pair_update(xb, cfg, target, (rp, col), (rm, col), rng)
    for i in range(len(desired_dense)):
        target = select_pulse(desired_dense[i], cfg)
        if target is not None:
            rp, rm, col = layout.dense_cell(i)
            _apply_pair_update(xb, cfg, target, (rp, col), (rm, col), rng)


def train_epoch(
    xb: CrossbarArray,
    layout: NetworkLayout,
    cfg: TrainingConfig,
    data: Pairs,
    grad_state: GradientTensors,
    streams: dict[str, np.random.Generator],
    epoch: int = 0,
    test: Pairs | None = None,
) -> EpochRecord:
    """One training pass over the sequence followed by the pulse updates.

    The recorded loss is the analog forward pass before this epoch's
    updates. ``test_mse`` (when ``test`` is given) is the digital-mirror
    loss over train+test inputs, scored on the test targets only.
    """
    ledger = xb.ledger
    n_set, n_reset = ledger.pulse_count_set, ledger.pulse_count_reset
    preds = forward_sequence(xb, layout, data.inputs, streams["read"])
    train_loss = mse(preds, data.targets)
    test_loss = float("nan")
    if test is not None:
        test_loss = digital_test_mse(weight_view(xb, layout), layout, data, test)

    if cfg.granularity == "per-epoch":
        grads = bptt_gradients(weight_view(xb, layout), data.inputs, data.targets, layout)
        _step(xb, layout, cfg, grads, grad_state, streams["c2c"])
    else:
        for t in range(len(data)):
            grads = bptt_gradients(
                weight_view(xb, layout), data.inputs[: t + 1], data.targets[: t + 1], layout, loss_steps=[t]
            )
            _step(xb, layout, cfg, grads, grad_state, streams["c2c"])

    energy = ledger.close_epoch()
    return EpochRecord(
        epoch=epoch,
        train_mse=train_loss,
        energy_J=energy,
        pulses_set=ledger.pulse_count_set - n_set,
        pulses_reset=ledger.pulse_count_reset - n_reset,
        test_mse=test_loss,
    )


def _step(xb, layout, cfg, grads, grad_state, rng) -> None:
    grad_state.d_lstm = grads.d_lstm
    grad_state.d_dense = grads.d_dense
    dw_lstm, dw_dense = momentum_update(grad_state, cfg)
    apply_manhattan(xb, layout, cfg, -dw_lstm, -dw_dense, rng)


def digital_test_mse(w: WeightView, layout: NetworkLayout, train: Pairs, test: Pairs) -> float:
    """Test loss with the state warmed up over the training inputs."""
    preds = digital_forward(w, np.concatenate([train.inputs, test.inputs]), layout)
    return mse(preds[len(train) :], test.targets)


def initial_weights(layout: NetworkLayout, params, rng: np.random.Generator) -> WeightView:
    """Logical weights as they come out of a uniformly initialised array."""
    xb = init_random(layout.n_rows, layout.n_cols, params, NoiseFlags(), rng)
    return weight_view(xb, layout)


@dataclass
class BaselineResult:
    loss_curve: list[float]
    test_curve: list[float]
    weights: WeightView
    final_train_mse: float


def train_digital_baseline(
    cfg: TrainingConfig,
    data: Pairs,
    layout: NetworkLayout,
    w0: WeightView,
    test: Pairs | None = None,
) -> BaselineResult:
    """Same network in float precision with continuous momentum-SGD steps."""
    w = w0.copy()
    grad_state = GradientTensors.zeros(layout)
    losses, tests = [], []
    for _ in range(cfg.epochs):
        preds = digital_forward(w, data.inputs, layout)
        losses.append(mse(preds, data.targets))
        if test is not None:
            tests.append(digital_test_mse(w, layout, data, test))
        if cfg.granularity == "per-epoch":
            steps = [(data.inputs, data.targets, None)]
        else:
            steps = [(data.inputs[: t + 1], data.targets[: t + 1], [t]) for t in range(len(data))]
        for inputs, targets, loss_steps in steps:
            grads = bptt_gradients(w, inputs, targets, layout, loss_steps=loss_steps)
            grad_state.d_lstm, grad_state.d_dense = grads.d_lstm, grads.d_dense
            dw_lstm, dw_dense = momentum_update(grad_state, cfg)
            w.lstm_weights -= dw_lstm
            w.dense_weights -= dw_dense
    final = mse(digital_forward(w, data.inputs, layout), data.targets)
    return BaselineResult(losses, tests, w, final)
