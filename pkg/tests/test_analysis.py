import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from analysis import ols
from analysis.oldham import oldham_correlation, sample_correlation
from analysis.ols import RankDeficientError
from analysis.strategies import (
    CHANGE_SCORE_ADJUSTED,
    Bindings,
    make_change_score,
    run_change_score_adjusted,
    run_strategy,
    standardized_coefficient,
)
from sem.strategy import Strategy
from simulation.dataset import Dataset, MissingColumnError
from simulation.mc_engine import sample_dataset
from utils.errors import UsageError

B = ("WC0", "IC0", "IC1")


def _frame(seed: int, n: int = 60) -> Dataset:
    rng = np.random.default_rng(seed)
    x = rng.normal(9.5, 1.6, n)
    y0 = 0.3 * x + rng.normal(4.0, 0.7, n)
    y1 = 0.2 * x + 0.6 * y0 + rng.normal(1.0, 0.5, n)
    return Dataset.from_frame(pd.DataFrame({"WC0": x, "IC0": y0, "IC1": y1}))


# -- OLS -------------------------------------------------------------------


def test_ols_exact_line():
    fit = ols.fit_ols({"x": [1.0, 2.0, 3.0, 4.0]}, [3.0, 5.0, 7.0, 9.0])
    assert fit.coefficients["x"] == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(1.0)
    assert fit.rss == pytest.approx(0.0, abs=1e-20)


def test_ols_matches_normal_equations():
    data = _frame(7)
    x, y0, y1 = (data.frame[c].to_numpy() for c in B)
    design = np.column_stack([np.ones(len(x)), x, y0])
    expected = np.linalg.solve(design.T @ design, design.T @ y1)
    fit = ols.fit_ols({"WC0": x, "IC0": y0}, y1)
    assert [fit.intercept, fit.coefficients["WC0"], fit.coefficients["IC0"]] == pytest.approx(expected, rel=1e-9)


def test_ols_on_five_points_matches_brute_force_solve():
    x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    z = np.array([2.0, 1.0, 4.0, 3.0, 6.0])
    y = np.array([3.1, 3.9, 7.2, 7.8, 11.5])
    design = np.column_stack([np.ones(5), x, z])
    expected = np.linalg.solve(design.T @ design, design.T @ y)

    fit = ols.fit_ols({"x": x, "z": z}, y)
    assert fit.intercept == pytest.approx(expected[0], abs=1e-10)
    assert fit.coefficients["x"] == pytest.approx(expected[1], abs=1e-10)
    assert fit.coefficients["z"] == pytest.approx(expected[2], abs=1e-10)
    resid = y - design @ expected
    assert fit.rss == pytest.approx(resid @ resid, abs=1e-10)
    assert fit.n == 5


def test_residuals_are_orthogonal_to_regressors():
    data = _frame(11)
    columns = {"WC0": data.frame["WC0"], "IC0": data.frame["IC0"]}
    resid = ols.fit_ols(columns, data.frame["IC1"]).residuals(columns, data.frame["IC1"])
    assert resid.sum() == pytest.approx(0.0, abs=1e-8)
    for values in columns.values():
        assert float(resid @ values.to_numpy()) == pytest.approx(0.0, abs=1e-7)


def test_collinear_regressors():
    x = np.arange(10.0)
    with pytest.raises(RankDeficientError):
        ols.fit_ols({"a": x, "b": 2 * x + 1}, x**2)


def test_constant_regressor():
    with pytest.raises(RankDeficientError):
        ols.fit_ols({"a": np.ones(10)}, np.arange(10.0))


def test_too_few_rows():
    with pytest.raises(UsageError):
        ols.fit_ols({"a": [1.0, 2.0], "b": [0.0, 1.0]}, [1.0, 2.0])


def test_length_mismatch():
    with pytest.raises(UsageError):
        ols.fit_ols({"a": [1.0, 2.0, 3.0, 4.0]}, [1.0, 2.0, 3.0])


# -- strategies ----------------------------------------------------------------


def test_formulas_and_json():
    result = run_strategy(_frame(3), Strategy.FollowUpAdjusted, *B)
    assert result.model == "IC1 ~ WC0 + IC0"
    doc = result.to_json()
    assert doc["strategy"] == "adjusted"
    assert doc["coefficient"] == doc["all_coefficients"]["WC0"]
    assert doc["n"] == 60
    assert run_strategy(_frame(3), Strategy.ChangeScore, *B).model == "IC1 - IC0 ~ WC0"
    assert run_change_score_adjusted(_frame(3), *B).to_json()["strategy"] == CHANGE_SCORE_ADJUSTED


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_change_score_identities(seed):
    data = _frame(seed)
    change = run_strategy(data, Strategy.ChangeScore, *B).coefficient
    adjusted = run_strategy(data, Strategy.FollowUpAdjusted, *B)
    unadjusted = run_strategy(data, Strategy.FollowUpUnadjusted, *B).coefficient
    slope = ols.fit_ols({"WC0": data.frame["WC0"]}, data.frame["IC0"]).coefficients["WC0"]
    assert change == pytest.approx(unadjusted - slope, abs=1e-9)

    laird = run_change_score_adjusted(data, *B)
    assert laird.coefficient == pytest.approx(adjusted.coefficient, abs=1e-9)
    assert laird.fit.coefficients["IC0"] == pytest.approx(adjusted.fit.coefficients["IC0"] - 1, abs=1e-9)


_GRID = np.linspace(-1.0, 1.0, 50)


@settings(max_examples=100, deadline=None)
@given(
    noise=hnp.arrays(np.float64, (50, 3), elements=st.floats(-1.0, 1.0, allow_subnormal=False)),
    scales=st.lists(st.floats(1e-2, 1e2), min_size=3, max_size=3),
    shifts=st.lists(st.floats(-10.0, 10.0), min_size=3, max_size=3),
    effects=st.lists(st.floats(-5.0, 5.0), min_size=2, max_size=2),
)
def test_change_score_identities_on_arbitrary_columns(noise, scales, shifts, effects):
    x = shifts[0] + scales[0] * (_GRID + 0.25 * noise[:, 0])
    y0 = shifts[1] + scales[1] * (np.cos(3 * np.pi * _GRID) + 0.25 * noise[:, 1])
    y1 = shifts[2] + effects[0] * x + effects[1] * y0 + scales[2] * noise[:, 2]
    data = Dataset.from_frame(pd.DataFrame({"WC0": x, "IC0": y0, "IC1": y1}))

    change = run_strategy(data, Strategy.ChangeScore, *B)
    adjusted = run_strategy(data, Strategy.FollowUpAdjusted, *B)
    unadjusted = run_strategy(data, Strategy.FollowUpUnadjusted, *B)
    slope = ols.fit_ols({"WC0": x}, y0)
    size = max(
        1.0,
        *(abs(v) for fit in (change.fit, adjusted.fit, unadjusted.fit, slope) for v in fit.coefficients.values()),
        *(abs(fit.intercept) for fit in (change.fit, adjusted.fit, unadjusted.fit, slope)),
    )
    assert abs(change.coefficient - (unadjusted.coefficient - slope.coefficients["WC0"])) <= 1e-10 * size

    laird = run_change_score_adjusted(data, *B)
    assert abs(laird.coefficient - adjusted.coefficient) <= 1e-10 * size
    assert abs(laird.fit.coefficients["IC0"] - (adjusted.fit.coefficients["IC0"] - 1)) <= 1e-10 * size


def test_change_score_equals_unadjusted_when_baseline_is_orthogonal_to_exposure():
    rng = np.random.default_rng(17)
    x = rng.normal(9.5, 1.6, 200)
    y0 = rng.normal(4.0, 0.7, 200) + 0.4 * x
    centered = x - x.mean()
    y0 = y0 - (centered @ y0) / (centered @ centered) * centered
    y1 = 0.2 * x + 0.6 * y0 + rng.normal(1.0, 0.5, 200)
    data = Dataset.from_frame(pd.DataFrame({"WC0": x, "IC0": y0, "IC1": y1}))

    assert ols.fit_ols({"WC0": x}, y0).coefficients["WC0"] == pytest.approx(0.0, abs=1e-12)
    change = run_strategy(data, Strategy.ChangeScore, *B).coefficient
    unadjusted = run_strategy(data, Strategy.FollowUpUnadjusted, *B).coefficient
    assert change == pytest.approx(unadjusted, abs=1e-12)


def test_change_score_on_large_1a_sample(scenarios):
    data = sample_dataset(scenarios["1A"].sem, 1_000_000, seed=2024)
    assert run_strategy(data, Strategy.ChangeScore, *B).coefficient == pytest.approx(0.200, abs=0.01)


def test_latent_columns_never_enter_analysis(scenarios):
    data = sample_dataset(scenarios["3B+"].sem, 200, seed=5)
    assert "U" in data.columns
    assert "U" not in data.analysis_view().columns
    with pytest.raises(MissingColumnError, match="latent"):
        run_strategy(data, Strategy.FollowUpUnadjusted, "U", "IC0", "IC1")


def test_missing_column():
    with pytest.raises(MissingColumnError, match="not found"):
        run_strategy(_frame(1), Strategy.ChangeScore, "BMI", "IC0", "IC1")


def test_bindings_must_differ():
    with pytest.raises(UsageError):
        Bindings(exposure="WC0", baseline="WC0", followup="IC1")


def test_change_score_length_check():
    assert make_change_score([1.0, 2.0], [3.0, 5.0]).tolist() == [2.0, 3.0]
    with pytest.raises(UsageError):
        make_change_score([1.0], [1.0, 2.0])


def test_standardized_coefficient_scales_by_sds():
    data = _frame(9)
    result = run_strategy(data, Strategy.FollowUpUnadjusted, *B)
    x, y = data.frame["WC0"], data.frame["IC1"]
    assert standardized_coefficient(result, data) == pytest.approx(np.corrcoef(x, y)[0, 1], rel=1e-9)


# -- Oldham ----------------------------------------------------------------------


def test_oldham_correlations():
    baseline_r, followup_r = oldham_correlation(100_000, seed=1)
    assert baseline_r == pytest.approx(-1 / np.sqrt(2), abs=0.01)
    assert followup_r == pytest.approx(1 / np.sqrt(2), abs=0.01)


def test_oldham_is_deterministic():
    assert oldham_correlation(500, seed=42) == oldham_correlation(500, seed=42)


def test_oldham_constant_baseline():
    baseline_r, followup_r = oldham_correlation(1000, seed=3, y0_sd=0.0)
    assert np.isnan(baseline_r)
    assert followup_r == pytest.approx(1.0)


def test_oldham_needs_ten_rows():
    with pytest.raises(UsageError):
        oldham_correlation(9, seed=0)


def test_sample_correlation():
    assert sample_correlation([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert np.isnan(sample_correlation([1, 1, 1], [1, 2, 3]))
