"""Hardware-aware LSTM on a simulated passive RRAM crossbar."""

__version__ = "0.1.0"
