"""Phenomenological model of a single passive-crossbar RRAM cell.

Conductances are in siemens, voltages in volts, times in seconds.

The pulse response is a saturating power-law window::

    set:    dG =  a_set   * ((g_max - g) / (g_max - g_min)) ** gamma
    reset:  dG = -a_reset * ((g - g_min) / (g_max - g_min)) ** gamma

Device-to-device spread enters as a frozen multiplicative factor on the
expected step, cycle-to-cycle spread as zero-mean noise proportional to it.
All constants live in :class:`DeviceParams` so the window can be refitted to
measured data without touching the update logic.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np


class DeviceError(ValueError):
    """Raised for out-of-range conductances or unrecognised pulses."""


def param_violations(p: dict) -> list[str]:
    """Every invalid entry of a DeviceParams-shaped mapping, as messages."""
    out = []
    if not 0 < p["g_min"] < p["g_max"]:
        out.append(f"device.g_min/g_max: need 0 < g_min < g_max, got {p['g_min']}, {p['g_max']}")
    for name in ("a_set", "a_reset"):
        if not p[name] > 0:
            out.append(f"device.{name}: must be > 0, got {p[name]}")
    if not p["gamma"] >= 0:
        out.append(f"device.gamma: must be >= 0, got {p['gamma']}")
    for name in ("sigma_d2d", "sigma_c2c", "sigma_read"):
        if not p[name] >= 0:
            out.append(f"device.{name}: must be >= 0, got {p[name]}")
    if not p["v_set"] > 0 > p["v_reset"]:
        out.append(f"device.v_set/v_reset: need v_set > 0 > v_reset, got {p['v_set']}, {p['v_reset']}")
    return out


@dataclass(frozen=True)
class DeviceParams:
    g_min: float = 100e-6
    g_max: float = 300e-6
    a_set: float = 4e-6
    a_reset: float = 4e-6
    gamma: float = 2.0
    sigma_d2d: float = 0.2
    sigma_c2c: float = 0.1
    sigma_read: float = 0.01
    # Pulse amplitudes recognised by expected_update.
    v_set: float = 0.8
    v_reset: float = -0.8

    def __post_init__(self):
        problems = param_violations(asdict(self))
        if problems:
            raise DeviceError("; ".join(problems))

    @property
    def g_range(self) -> float:
        return self.g_max - self.g_min

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class PulseSpec:
    """A programming pulse. Positive amplitude sets, negative resets."""

    amplitude: float
    duration: float = 100e-9

    def __post_init__(self):
        if self.duration <= 0:
            raise DeviceError(f"pulse duration must be > 0, got {self.duration}")
        if self.amplitude == 0:
            raise DeviceError("zero-amplitude pulse; omit the pulse instead")

    @property
    def is_set(self) -> bool:
        return self.amplitude > 0


@dataclass(frozen=True)
class DeviceState:
    g: float
    k_dev: float = 1.0


@dataclass(frozen=True)
class NoiseFlags:
    d2d_enabled: bool = False
    c2c_enabled: bool = False
    read_noise_enabled: bool = False

    @classmethod
    def all_on(cls) -> NoiseFlags:
        return cls(True, True, True)

    @property
    def any(self) -> bool:
        return self.d2d_enabled or self.c2c_enabled or self.read_noise_enabled


def _check_g(params: DeviceParams, g0: float) -> None:
    if not params.g_min <= g0 <= params.g_max:
        raise DeviceError(
            f"conductance {g0!r} S outside [{params.g_min}, {params.g_max}] S"
        )


def draw_k_dev(sigma_d2d: float, rng: np.random.Generator, size=None):
    """Normal(1, sigma_d2d) draws, redrawn until strictly positive."""
    if size is None:
        while True:
            k = float(rng.normal(1.0, sigma_d2d))
            if k > 0:
                return k
    k = rng.normal(1.0, sigma_d2d, size=size)
    bad = k <= 0
    while bad.any():
        k[bad] = rng.normal(1.0, sigma_d2d, size=int(bad.sum()))
        bad = k <= 0
    return k


def sample_device(params: DeviceParams, g0: float, rng: np.random.Generator) -> DeviceState:
    _check_g(params, g0)
    return DeviceState(g=float(g0), k_dev=draw_k_dev(params.sigma_d2d, rng))


def expected_update(params: DeviceParams, g0: float, pulse: PulseSpec) -> float:
    """Noise-free conductance change for one pulse starting at ``g0``."""
    _check_g(params, g0)
    if pulse.amplitude == params.v_set:
        headroom = (params.g_max - g0) / params.g_range
        return params.a_set * headroom**params.gamma
    if pulse.amplitude == params.v_reset:
        headroom = (g0 - params.g_min) / params.g_range
        return -params.a_reset * headroom**params.gamma
    raise DeviceError(
        f"pulse amplitude {pulse.amplitude} V is neither v_set={params.v_set} "
        f"nor v_reset={params.v_reset}"
    )


def apply_pulse(
    state: DeviceState,
    params: DeviceParams,
    pulse: PulseSpec,
    flags: NoiseFlags,
    rng: np.random.Generator,
) -> tuple[DeviceState, float]:
    """Program one pulse; returns the new state and the realised (post-clamp) change."""
    d_m = expected_update(params, state.g, pulse)
    k = state.k_dev if flags.d2d_enabled else 1.0
    delta = k * d_m
    if flags.c2c_enabled and params.sigma_c2c > 0 and d_m != 0:
        delta += rng.normal(0.0, params.sigma_c2c * abs(d_m))
    g_new = min(max(state.g + delta, params.g_min), params.g_max)
    return replace(state, g=g_new), g_new - state.g


def read_conductance(state, params: DeviceParams, flags: NoiseFlags, rng: np.random.Generator):
    """Static read, optionally with multiplicative Gaussian noise.

    ``state`` may be a :class:`DeviceState` or anything with a ``g`` array, in
    which case one independent draw is taken per element.
    """
    g = state.g
    if not flags.read_noise_enabled or params.sigma_read == 0:
        return g
    if np.ndim(g) == 0:
        return max(g * (1.0 + rng.normal(0.0, params.sigma_read)), np.finfo(float).tiny)
    g = np.asarray(g, dtype=float)
    noisy = g * (1.0 + rng.normal(0.0, params.sigma_read, size=g.shape))
    return np.maximum(noisy, np.finfo(float).tiny)
