"""Passive RRAM crossbar: analog VMM, pulse programming, energy and area bookkeeping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .device import (
    DeviceError,
    DeviceParams,
    DeviceState,
    NoiseFlags,
    PulseSpec,
    apply_pulse,
    draw_k_dev,
    read_conductance,
)

READ_SAFE_LIMIT = 0.2  # V


class CrossbarError(ValueError):
    pass


def fmt(x: float) -> str:
    """Numeric format used by every CSV export."""
    return f"{x:.9g}"


@dataclass(frozen=True)
class Block:
    row: int
    col: int
    n_rows: int
    n_cols: int

    @property
    def rows(self) -> slice:
        return slice(self.row, self.row + self.n_rows)

    @property
    def cols(self) -> slice:
        return slice(self.col, self.col + self.n_cols)

    def fits(self, n_rows: int, n_cols: int) -> bool:
        return (
            self.row >= 0
            and self.col >= 0
            and self.row + self.n_rows <= n_rows
            and self.col + self.n_cols <= n_cols
        )


@dataclass(frozen=True)
class PartitionMap:
    """Where the LSTM (34x60) and dense (32x1) weight blocks sit on the array."""

    lstm_block: Block = Block(0, 0, 34, 60)
    dense_block: Block = Block(0, 60, 32, 1)

    def validate(self, n_rows: int, n_cols: int) -> None:
        if (self.lstm_block.n_rows, self.lstm_block.n_cols) != (34, 60):
            raise CrossbarError("LSTM block must be 34x60")
        if (self.dense_block.n_rows, self.dense_block.n_cols) != (32, 1):
            raise CrossbarError("dense block must be 32x1")
        for name, blk in (("lstm", self.lstm_block), ("dense", self.dense_block)):
            if not blk.fits(n_rows, n_cols):
                raise CrossbarError(f"{name} block {blk} does not fit a {n_rows}x{n_cols} array")


@dataclass
class EnergyLedger:
    """Programming energy, bucketed by epoch.

    Pulses accumulate into the open epoch; :meth:`close_epoch` freezes it.
    The cumulative total is always the in-order sum of the epoch buckets.
    """

    pulse_count_set: int = 0
    pulse_count_reset: int = 0
    energy_per_epoch: list[float] = field(default_factory=list)
    open_epoch_energy: float = 0.0

    def record(self, pulse: PulseSpec, g_before: float) -> float:
        e = pulse.amplitude**2 * g_before * pulse.duration
        self.open_epoch_energy += e
        if pulse.is_set:
            self.pulse_count_set += 1
        else:
            self.pulse_count_reset += 1
        return e

    def close_epoch(self) -> float:
        e = self.open_epoch_energy
        self.energy_per_epoch.append(e)
        self.open_epoch_energy = 0.0
        return e

    @property
    def cumulative_energy(self) -> float:
        total = 0.0
        for e in self.energy_per_epoch:
            total += e
        return total + self.open_epoch_energy

    def write_csv(self, path: Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "energy_J", "cumulative_J"])
            running = 0.0
            for i, e in enumerate(self.energy_per_epoch):
                running += e
                w.writerow([i, fmt(e), fmt(running)])


@dataclass
class CrossbarArray:
    """``n_rows x n_cols`` grid of RRAM cells.

    Cell state is held as two dense row-major arrays (``g`` and
    ``k_dev``); :meth:`cell` hands out per-cell :class:`DeviceState` views.
    """

    g: np.ndarray
    k_dev: np.ndarray
    params: DeviceParams
    flags: NoiseFlags
    ledger: EnergyLedger = field(default_factory=EnergyLedger)
    read_limit: float = READ_SAFE_LIMIT

    def __post_init__(self):
        if self.g.shape != self.k_dev.shape or self.g.ndim != 2:
            raise CrossbarError("g and k_dev must be 2-D arrays of equal shape")

    @property
    def n_rows(self) -> int:
        return self.g.shape[0]

    @property
    def n_cols(self) -> int:
        return self.g.shape[1]

    def cell(self, row: int, col: int) -> DeviceState:
        self._check_index(row, col)
        return DeviceState(g=float(self.g[row, col]), k_dev=float(self.k_dev[row, col]))

    def _check_index(self, row: int, col: int) -> None:
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise CrossbarError(f"cell ({row}, {col}) outside {self.n_rows}x{self.n_cols} array")

    def copy(self) -> CrossbarArray:
        ledger = EnergyLedger(
            self.ledger.pulse_count_set,
            self.ledger.pulse_count_reset,
            list(self.ledger.energy_per_epoch),
            self.ledger.open_epoch_energy,
        )
        return CrossbarArray(self.g.copy(), self.k_dev.copy(), self.params, self.flags, ledger, self.read_limit)

    def write_snapshot(self, path: Path) -> None:
        """Conductance map as CSV, one line per physical row, siemens."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.g:
                w.writerow([fmt(v) for v in row])


def init_random(
    n_rows: int,
    n_cols: int,
    params: DeviceParams,
    flags: NoiseFlags,
    rng: np.random.Generator,
    d2d_rng: np.random.Generator | None = None,
) -> CrossbarArray:
    """Uniform conductances in [g_min, g_max]; per-device k_dev when d2d is on.

    ``d2d_rng`` lets the caller keep device-variation draws on their own
    stream; it defaults to ``rng``.
    """
    if n_rows <= 0 or n_cols <= 0:
        raise CrossbarError(f"array dimensions must be positive, got {n_rows}x{n_cols}")
    g = rng.uniform(params.g_min, params.g_max, size=(n_rows, n_cols))
    if flags.d2d_enabled:
        k = draw_k_dev(params.sigma_d2d, d2d_rng if d2d_rng is not None else rng, size=(n_rows, n_cols))
    else:
        k = np.ones((n_rows, n_cols))
    return CrossbarArray(g, k, params, flags)


def _read_block(xb: CrossbarArray, rows, cols, rng) -> np.ndarray:
    g = xb.g[rows, cols]
    if not xb.flags.read_noise_enabled:
        return g
    if rng is None:
        raise CrossbarError("read noise enabled but no random stream supplied")
    return read_conductance(DeviceState(g=g), xb.params, xb.flags, rng)


def _check_voltages(xb: CrossbarArray, v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise CrossbarError(f"expected {n} input voltages, got shape {v.shape}")
    if np.any(np.abs(v) > xb.read_limit):
        raise CrossbarError(f"read voltage above the {xb.read_limit} V read-safe limit")
    return v


def vmm_rows_to_cols(
    xb: CrossbarArray,
    v_in: np.ndarray,
    rng: np.random.Generator | None = None,
    cols: slice = slice(None),
) -> np.ndarray:
    """Column currents ``I_j = sum_i v_i G_ij`` with all columns at virtual ground.

    ``cols`` restricts sensing to a column window (the others are left
    floating and not read).
    """
    v = _check_voltages(xb, v_in, xb.n_rows)
    return v @ _read_block(xb, slice(None), cols, rng)


def vmm_cols_to_rows(
    xb: CrossbarArray,
    v_in: np.ndarray,
    rng: np.random.Generator | None = None,
    rows: slice = slice(None),
) -> np.ndarray:
    """Transposed read: drive columns, sense row currents."""
    v = _check_voltages(xb, v_in, xb.n_cols)
    return _read_block(xb, rows, slice(None), rng) @ v


def program_pulse(
    xb: CrossbarArray, row: int, col: int, pulse: PulseSpec, rng: np.random.Generator
) -> float:
    """Apply one pulse to a cell, charge the ledger, return the realised change."""
    xb._check_index(row, col)
    g_before = float(xb.g[row, col])
    state = DeviceState(g_before, float(xb.k_dev[row, col]))
    try:
        new, delta = apply_pulse(state, xb.params, pulse, xb.flags, rng)
    except DeviceError as exc:
        raise CrossbarError(f"cell ({row}, {col}): {exc}") from exc
    xb.g[row, col] = new.g
    xb.ledger.record(pulse, g_before)
    return delta


@dataclass(frozen=True)
class AreaReport:
    passive_area: float  # um^2
    active_area: float  # um^2
    ratio: float

    def to_dict(self) -> dict[str, float]:
        return {
            "passive_area_um2": self.passive_area,
            "active_area_um2": self.active_area,
            "active_area_mm2": self.active_area * 1e-6,
            "ratio": self.ratio,
        }


PASSIVE_CELL_AREA = 0.36  # um^2, 0.6 x 0.6
ACTIVE_CELL_AREA = 2360.0  # um^2, 59 x 40


def area_report(
    n_rows: int = 40,
    n_cols: int = 64,
    passive_cell_area: float = PASSIVE_CELL_AREA,
    active_cell_area: float = ACTIVE_CELL_AREA,
) -> AreaReport:
    if min(n_rows, n_cols) <= 0 or min(passive_cell_area, active_cell_area) <= 0:
        raise CrossbarError("area_report needs positive dimensions and cell areas")
    n = n_rows * n_cols
    passive = n * passive_cell_area
    active = n * active_cell_area
    return AreaReport(passive, active, active / passive)
