"""15-unit LSTM plus a one-output dense layer, with weights stored on the crossbar.

Every logical weight is a differential pair ``W = (G+ - G-) / g2w_ratio``.
Logical input ``i`` of a block drives physical rows ``2i`` (G+) and ``2i+1``
(G-) with ``+u_i*v_read`` and ``-u_i*v_read``, so the subtraction happens in
the column current and the decoded pre-activation is ``I / (v_read*ratio)``.

LSTM block, logical inputs ``[h (15), x, 1]`` over 60 columns grouped
``[a, i, o, f]``; dense block, logical inputs ``[h (15), 1]`` over one
column. Gate non-linearities are evaluated digitally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .crossbar import CrossbarArray, PartitionMap, vmm_rows_to_cols

GATES = ("a", "i", "o", "f")


@dataclass(frozen=True)
class NetworkLayout:
    n_hidden: int = 15
    n_input: int = 1
    gate_order: tuple[str, ...] = GATES
    v_read: float = 0.1
    g2w_ratio: float = 1e-4
    partition: PartitionMap = field(default_factory=PartitionMap)
    n_rows: int = 64
    n_cols: int = 64

    def __post_init__(self):
        if sorted(self.gate_order) != sorted(GATES):
            raise ValueError(f"gate_order must be a permutation of {GATES}")
        if self.lstm_in * 2 != self.partition.lstm_block.n_rows:
            raise ValueError("LSTM block rows must equal 2 * (n_hidden + n_input + 1)")
        if 4 * self.n_hidden != self.partition.lstm_block.n_cols:
            raise ValueError("LSTM block columns must equal 4 * n_hidden")
        if self.dense_in * 2 != self.partition.dense_block.n_rows:
            raise ValueError("dense block rows must equal 2 * (n_hidden + 1)")
        self.partition.validate(self.n_rows, self.n_cols)

    @property
    def lstm_in(self) -> int:
        return self.n_hidden + self.n_input + 1

    @property
    def dense_in(self) -> int:
        return self.n_hidden + 1

    @property
    def n_weights(self) -> int:
        return self.lstm_in * 4 * self.n_hidden + self.dense_in

    def gate_slice(self, gate: str) -> slice:
        k = self.gate_order.index(gate)
        return slice(k * self.n_hidden, (k + 1) * self.n_hidden)

    def lstm_cell(self, i: int, j: int) -> tuple[int, int, int]:
        """Physical ``(row+, row-, col)`` for LSTM weight (input i, column j)."""
        b = self.partition.lstm_block
        return b.row + 2 * i, b.row + 2 * i + 1, b.col + j

    def dense_cell(self, i: int) -> tuple[int, int, int]:
        b = self.partition.dense_block
        return b.row + 2 * i, b.row + 2 * i + 1, b.col

    def to_dict(self) -> dict:
        lb, db = self.partition.lstm_block, self.partition.dense_block
        return {
            "n_hidden": self.n_hidden,
            "n_input": self.n_input,
            "gate_order": list(self.gate_order),
            "pair_scheme": "logical input i -> rows (2i, 2i+1) = (G+, G-)",
            "lstm_inputs": ["h"] * self.n_hidden + ["x"] * self.n_input + ["bias"],
            "dense_inputs": ["h"] * self.n_hidden + ["bias"],
            "v_read": self.v_read,
            "g2w_ratio": self.g2w_ratio,
            "array": [self.n_rows, self.n_cols],
            "lstm_block": [lb.row, lb.col, lb.n_rows, lb.n_cols],
            "dense_block": [db.row, db.col, db.n_rows, db.n_cols],
        }


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, n_hidden: int = 15) -> LstmState:
        return cls(np.zeros(n_hidden), np.zeros(n_hidden))


@dataclass
class WeightView:
    lstm_weights: np.ndarray  # (17, 60)
    dense_weights: np.ndarray  # (16,)

    def copy(self) -> WeightView:
        return WeightView(self.lstm_weights.copy(), self.dense_weights.copy())


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _pairs_to_voltages(u: np.ndarray, block_row: int, n_rows: int, v_read: float) -> np.ndarray:
    v = np.zeros(n_rows)
    v[block_row : block_row + 2 * len(u) : 2] = u * v_read
    v[block_row + 1 : block_row + 2 * len(u) : 2] = -u * v_read
    return v


def encode_lstm_input(x: float, state: LstmState, layout: NetworkLayout) -> np.ndarray:
    u = np.concatenate([state.h, np.atleast_1d(float(x)), [1.0]])
    return _pairs_to_voltages(u, layout.partition.lstm_block.row, layout.n_rows, layout.v_read)


def encode_dense_input(state: LstmState, layout: NetworkLayout) -> np.ndarray:
    u = np.concatenate([state.h, [1.0]])
    return _pairs_to_voltages(u, layout.partition.dense_block.row, layout.n_rows, layout.v_read)


def gates_from_preactivations(z: np.ndarray, layout: NetworkLayout):
    a = np.tanh(z[layout.gate_slice("a")])
    i = sigmoid(z[layout.gate_slice("i")])
    o = sigmoid(z[layout.gate_slice("o")])
    f = sigmoid(z[layout.gate_slice("f")])
    return a, i, o, f


def lstm_step(
    xb: CrossbarArray,
    layout: NetworkLayout,
    x: float,
    state: LstmState,
    rng: np.random.Generator | None = None,
) -> LstmState:
    v = encode_lstm_input(x, state, layout)
    current = vmm_rows_to_cols(xb, v, rng, cols=layout.partition.lstm_block.cols)
    z = current / (layout.v_read * layout.g2w_ratio)
    a, i, o, f = gates_from_preactivations(z, layout)
    c = i * a + f * state.c
    return LstmState(h=o * np.tanh(c), c=c)


def dense_forward(
    xb: CrossbarArray,
    layout: NetworkLayout,
    state: LstmState,
    rng: np.random.Generator | None = None,
) -> float:
    v = encode_dense_input(state, layout)
    current = vmm_rows_to_cols(xb, v, rng, cols=layout.partition.dense_block.cols)
    return float(current[0] / (layout.v_read * layout.g2w_ratio))


def forward_sequence(
    xb: CrossbarArray,
    layout: NetworkLayout,
    inputs,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Analog inference over a sequence, starting from a zero state."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.size == 0:
        raise ValueError("forward_sequence needs at least one input")
    state = LstmState.zeros(layout.n_hidden)
    preds = np.empty(len(inputs))
    for t, x in enumerate(inputs):
        state = lstm_step(xb, layout, x, state, rng)
        preds[t] = dense_forward(xb, layout, state, rng)
    return preds


def weight_view(xb: CrossbarArray, layout: NetworkLayout) -> WeightView:
    """Noise-free logical weights decoded from the differential pairs."""
    lb, db = layout.partition.lstm_block, layout.partition.dense_block
    blk = xb.g[lb.rows, lb.cols]
    lstm = (blk[0::2] - blk[1::2]) / layout.g2w_ratio
    col = xb.g[db.rows, db.col]
    dense = (col[0::2] - col[1::2]) / layout.g2w_ratio
    return WeightView(lstm, dense)


def digital_forward(w: WeightView, inputs, layout: NetworkLayout, cache: bool = False):
    """Float-precision replica of :func:`forward_sequence` driven by logical weights.

    With ``cache=True`` also returns the per-step intermediates needed for
    backpropagation through time.
    """
    inputs = np.asarray(inputs, dtype=float)
    n_h = layout.n_hidden
    T = len(inputs)
    h = np.zeros(n_h)
    c = np.zeros(n_h)
    preds = np.empty(T)
    if cache:
        U = np.empty((T, layout.lstm_in))
        G = np.empty((T, 4, n_h))
        C = np.empty((T + 1, n_h))
        H = np.empty((T, n_h))
        C[0] = c
    for t, x in enumerate(inputs):
        u = np.concatenate([h, [x], [1.0]])
        z = u @ w.lstm_weights
        a, i, o, f = gates_from_preactivations(z, layout)
        c = i * a + f * c
        h = o * np.tanh(c)
        preds[t] = h @ w.dense_weights[:n_h] + w.dense_weights[n_h]
        if cache:
            U[t], G[t], C[t + 1], H[t] = u, (a, i, o, f), c, h
    if cache:
        return preds, {"U": U, "G": G, "C": C, "H": H}
    return preds
