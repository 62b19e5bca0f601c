"""
Ordinary least squares with an intercept.

Coefficients are reported in raw units (response units per regressor unit).
"""

from typing import Dict, Mapping

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict

from utils.errors import UsageError, UserInputError

# reciprocal condition number below which the design counts as collinear
MIN_RECIPROCAL_CONDITION = 1e-12


class RankDeficientError(UserInputError):
    pass


class OlsFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    coefficients: Dict[str, float]
    intercept: float
    rss: float
    n: int

    def predict(self, columns: Mapping[str, ArrayLike]) -> np.ndarray:
        out = np.full(len(next(iter(columns.values()))) if columns else 0, self.intercept)
        for name, value in self.coefficients.items():
            out = out + value * np.asarray(columns[name], dtype=float)
        return out

    def residuals(self, columns: Mapping[str, ArrayLike], response: ArrayLike) -> np.ndarray:
        return np.asarray(response, dtype=float) - self.predict(columns)


def fit_ols(columns: Mapping[str, ArrayLike], response: ArrayLike) -> OlsFit:
    y = np.asarray(response, dtype=float)
    names = list(columns)
    regressors = [np.asarray(columns[name], dtype=float) for name in names]
    n = len(y)

    for name, x in zip(names, regressors):
        if x.shape != y.shape:
            raise UsageError(f"Column {name} has {len(x)} rows, response has {n}", {"column": name})
    if n < len(names) + 2:
        raise UsageError(
            f"{len(names)} regressor(s) need at least {len(names) + 2} rows, got {n}", {"n": n}
        )

    design = np.column_stack([np.ones(n)] + regressors)
    beta, _, _, singular = np.linalg.lstsq(design, y, rcond=None)
    if singular[-1] <= MIN_RECIPROCAL_CONDITION * singular[0]:
        raise RankDeficientError(
            f"Design matrix on {names} is rank-deficient (collinear regressors)",
            {"regressors": names, "reciprocal_condition": float(singular[-1] / singular[0]) if singular[0] else 0.0},
        )

    resid = y - design @ beta
    return OlsFit(
        coefficients={name: float(b) for name, b in zip(names, beta[1:])},
        intercept=float(beta[0]),
        rss=float(resid @ resid),
        n=n,
    )
