"""Monthly proximity indices between technologies from scholarly records, with
series processing, shape clustering and forecasting backtests."""

__version__ = "0.1.0"
