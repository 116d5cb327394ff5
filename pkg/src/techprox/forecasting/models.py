from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Iterable

STATISTICAL = ("naive_seasonal", "exp_smoothing", "theta")
REGRESSION = ("linear_regression", "gbt", "random_forest")
FAMILIES = STATISTICAL + REGRESSION


@dataclass(frozen=True)
class ForecastModelSpec:
    family: str
    K: int = 1
    alpha: float = 0.1
    theta_variant: str = "drift"
    lags: int = 12
    n_trees: int = 50
    max_depth: int = 4
    learning_rate: float = 0.1
    max_features: float = 1.0
    min_samples_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.lags < 1:
            raise ValueError("lag window must be >= 1")
        if self.n_trees < 1 or self.max_depth < 0 or self.learning_rate <= 0:
            raise ValueError("tree hyperparameters must be positive")
        if not 0 < self.max_features <= 1:
            raise ValueError("max_features is a fraction in (0, 1]")
        if self.theta_variant not in ("drift", "classic"):
            raise ValueError(f"unknown theta variant {self.theta_variant!r}")

    @property
    def is_statistical(self) -> bool:
        return self.family in STATISTICAL

    @property
    def label(self) -> str:
        """Row label used in the median-SMAPE tables."""
        return {
            "naive_seasonal": f"Naive seasonal (K={self.K})",
            "exp_smoothing": "Exponential smoothing",
            "theta": "Theta",
            "linear_regression": "Linear Regression",
            "gbt": "LGBM",
            "random_forest": "Random Forest",
        }[self.family]

    def min_history(self) -> int:
        if self.family == "naive_seasonal":
            return max(self.K, 3)
        if self.is_statistical:
            return 3
        return self.lags + 1

    def to_dict(self) -> dict:
        return asdict(self)


def expand_grid(base: ForecastModelSpec, grid: dict[str, Iterable]) -> list[ForecastModelSpec]:
    """All specs obtained by overriding ``base`` with every combination in ``grid``."""
    specs = [base]
    for key, values in grid.items():
        specs = [replace(s, **{key: v}) for s in specs for v in values]
    return specs
