import numpy as np
import pytest

from analysis import ols, strategies
from scenarios.scenario_library import BUILTIN_IDS, builtin


@pytest.fixture(scope="session")
def scenarios():
    return {sid: builtin(sid) for sid in BUILTIN_IDS}


@pytest.fixture
def dag_file(tmp_path):
    def write(text: str, name: str = "model.dag"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


def assert_residuals_orthogonal(fit: ols.OlsFit, columns, response):
    """Residuals of a least-squares fit are orthogonal to the intercept and every regressor."""
    y = np.asarray(response, dtype=float)
    resid = fit.residuals(columns, y)
    scale = float(np.linalg.norm(y)) + 1.0
    design = [np.ones(len(y))] + [np.asarray(columns[name], dtype=float) for name in fit.coefficients]
    for column in design:
        assert abs(float(column @ resid)) <= 1e-9 * (float(np.linalg.norm(column)) + 1.0) * scale


@pytest.fixture(scope="session", autouse=True)
def checked_ols_fits():
    # every in-process fit in the suite goes through the orthogonality check
    original = ols.fit_ols

    def checked(columns, response):
        fit = original(columns, response)
        assert_residuals_orthogonal(fit, columns, response)
        return fit

    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(ols, "fit_ols", checked)
        mp.setattr(strategies, "fit_ols", checked)
        yield
