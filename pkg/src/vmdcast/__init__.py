"""VMD + CNN + LSTM one-step-ahead time series forecasting."""

__version__ = "0.1.0"
