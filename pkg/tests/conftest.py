import numpy as np
import pytest

from rram_lstm.data import TimeSeriesDataset, make_supervised
from rram_lstm.device import DeviceParams
from rram_lstm.network import NetworkLayout, WeightView, digital_forward


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def params():
    return DeviceParams()


@pytest.fixture(scope="session")
def layout():
    return NetworkLayout()


@pytest.fixture(scope="session")
def dataset():
    return TimeSeriesDataset.load()


@pytest.fixture(scope="session")
def pairs(dataset):
    return make_supervised(dataset)


def random_weights(rng, layout=NetworkLayout(), scale=2.0):
    return WeightView(
        rng.uniform(-scale, scale, (layout.lstm_in, 4 * layout.n_hidden)),
        rng.uniform(-scale, scale, layout.dense_in),
    )


def fd_gradient(w, inputs, targets, step=1e-6, loss_steps=None, layout=NetworkLayout()):
    """Central finite differences of the mean-squared error, one weight at a time."""

    def loss():
        p = digital_forward(w, inputs, layout)
        if loss_steps is None:
            return np.mean((p - targets) ** 2)
        return np.mean((p[loss_steps] - targets[loss_steps]) ** 2)

    out = []
    for arr in (w.lstm_weights, w.dense_weights):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            lp = loss()
            arr[idx] = orig - step
            lm = loss()
            arr[idx] = orig
            g[idx] = (lp - lm) / (2 * step)
        out.append(g)
    return out


def max_rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)))
