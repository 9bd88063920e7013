"""Day-ahead electricity price forecasting with ARMAX and gradient-boosted trees."""

__version__ = "0.1.0"
