"""Multi-level order flow imbalance features, price- and cross-impact
regressions over rolling intraday windows, return forecasting with
portfolio backtests, and cross-impact coefficient networks, plus a
synthetic LOB generator with planted ground truth for verification."""

__version__ = "0.1.0"
