"""
The three analyses of a baseline exposure and a repeatedly measured outcome.

    change-score:   followup - baseline ~ exposure
    adjusted:       followup ~ exposure + baseline
    unadjusted:     followup ~ exposure

plus ``followup - baseline ~ exposure + baseline``, which gives the adjusted
exposure coefficient exactly and is kept as a check.
"""

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, model_validator

from analysis.ols import OlsFit, fit_ols
from sem.strategy import Strategy
from simulation.dataset import Dataset
from utils.errors import UsageError

CHANGE_SCORE_ADJUSTED = "change-score-adjusted"


class Bindings(BaseModel):
    model_config = ConfigDict(frozen=True)

    exposure: str
    baseline: str
    followup: str

    @model_validator(mode="after")
    def _distinct(self) -> "Bindings":
        if len({self.exposure, self.baseline, self.followup}) != 3:
            raise UsageError("exposure, baseline and followup must name different variables", self.model_dump())
        return self


class AnalysisResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: Strategy
    variant: Optional[str] = None
    model: str
    coefficient: float
    fit: OlsFit
    bindings: Bindings

    @model_validator(mode="after")
    def _coefficient_of_interest(self) -> "AnalysisResult":
        if self.fit.coefficients.get(self.bindings.exposure) != self.coefficient:
            raise ValueError("coefficient must be the exposure entry of the fit")
        return self

    @property
    def label(self) -> str:
        return self.variant or self.strategy.value

    def to_json(self) -> dict:
        return {
            "strategy": self.label,
            "model": self.model,
            "coefficient": self.coefficient,
            "intercept": self.fit.intercept,
            "all_coefficients": dict(self.fit.coefficients),
            "n": self.fit.n,
            "bindings": self.bindings.model_dump(),
        }


def make_change_score(y0: ArrayLike, y1: ArrayLike) -> np.ndarray:
    y0 = np.asarray(y0, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    if y0.shape != y1.shape:
        raise UsageError(f"Baseline has {y0.size} values, follow-up has {y1.size}")
    return y1 - y0


def run_strategy(data: Dataset, strategy: Strategy, exposure: str, baseline: str, followup: str) -> AnalysisResult:
    bindings = Bindings(exposure=exposure, baseline=baseline, followup=followup)
    x = data.analysis_column(exposure)
    y0 = data.analysis_column(baseline)
    y1 = data.analysis_column(followup)

    if strategy is Strategy.ChangeScore:
        fit = fit_ols({exposure: x}, make_change_score(y0, y1))
    elif strategy is Strategy.FollowUpAdjusted:
        fit = fit_ols({exposure: x, baseline: y0}, y1)
    else:
        fit = fit_ols({exposure: x}, y1)

    return AnalysisResult(
        strategy=strategy,
        model=strategy.formula(exposure, baseline, followup),
        coefficient=fit.coefficients[exposure],
        fit=fit,
        bindings=bindings,
    )


def run_change_score_adjusted(data: Dataset, exposure: str, baseline: str, followup: str) -> AnalysisResult:
    bindings = Bindings(exposure=exposure, baseline=baseline, followup=followup)
    x = data.analysis_column(exposure)
    y0 = data.analysis_column(baseline)
    y1 = data.analysis_column(followup)

    fit = fit_ols({exposure: x, baseline: y0}, make_change_score(y0, y1))
    return AnalysisResult(
        strategy=Strategy.ChangeScore,
        variant=CHANGE_SCORE_ADJUSTED,
        model=f"{followup} - {baseline} ~ {exposure} + {baseline}",
        coefficient=fit.coefficients[exposure],
        fit=fit,
        bindings=bindings,
    )


def standardized_coefficient(result: AnalysisResult, data: Dataset) -> float:
    """Display-only: the exposure coefficient per sd of exposure, in sds of the response."""
    b = result.bindings
    x = data.analysis_column(b.exposure)
    if result.strategy is Strategy.ChangeScore:
        y = make_change_score(data.analysis_column(b.baseline), data.analysis_column(b.followup))
    else:
        y = data.analysis_column(b.followup)
    return result.coefficient * float(np.std(x, ddof=1) / np.std(y, ddof=1))
