import logging
from typing import List, Sequence

import numba
import numpy as np
from pydantic import BaseModel
from scipy import optimize

from shared.errors import FitError, InsufficientHistoryError
from shared.models import ArimaParams

logger = logging.getLogger(__name__)

MIN_TRAIN = 30
# |phi|, |theta| < 1 strictly
COEFFICIENT_BOUND = 0.999


class ArimaModel(BaseModel):
    fit_end: int
    params: List[ArimaParams]


@numba.njit(cache=True)
def _css_residuals(z, c, phi, theta):
    """Residuals of the differenced ARMA(1,1) with the pre-sample error set to zero"""
    e = np.zeros(z.shape[0])
    for k in range(1, z.shape[0]):
        e[k] = z[k] - c - phi * z[k - 1] - theta * e[k - 1]
    return e


def arima_fit(train: Sequence[float], max_iter: int = 2000) -> ArimaParams:
    """ARIMA(1,1,1) by conditional sum of squares on the first differences.

    Raises FitError carrying the best parameters found when the derivative-free
    search runs out of iterations without converging.
    """
    y = np.asarray(train, dtype=float)
    if y.shape[0] < MIN_TRAIN:
        raise InsufficientHistoryError(
            f"ARIMA(1,1,1) needs at least {MIN_TRAIN} observations, got {y.shape[0]}", module="forecast"
        )
    z = np.diff(y)

    def css(params: np.ndarray) -> float:
        e = _css_residuals(z, params[0], params[1], params[2])
        value = float(e @ e)
        return value if np.isfinite(value) else 1e300

    bounds = [(None, None), (-COEFFICIENT_BOUND, COEFFICIENT_BOUND), (-COEFFICIENT_BOUND, COEFFICIENT_BOUND)]
    drift = float(z.mean())
    starts = (
        np.array([drift, 0.1, 0.1]),
        np.array([drift, 0.5, -0.3]),
        np.array([drift, -0.3, 0.5]),
    )
    best = None
    for start in starts:
        result = optimize.minimize(
            css, start, method="Nelder-Mead", bounds=bounds,
            options={"maxiter": max_iter, "xatol": 1e-6, "fatol": 1e-6},
        )
        if best is None or result.fun < best.fun:
            best = result

    c, phi, theta = (float(v) for v in best.x)
    n_residuals = max(z.shape[0] - 1, 1)
    params = ArimaParams(
        c=c,
        phi=float(np.clip(phi, -COEFFICIENT_BOUND, COEFFICIENT_BOUND)),
        theta=float(np.clip(theta, -COEFFICIENT_BOUND, COEFFICIENT_BOUND)),
        sigma2=float(best.fun) / n_residuals,
        converged=bool(best.success),
    )
    if not best.success:
        raise FitError(f"CSS search did not converge: {best.message}", best_params=params)
    return params


def arima_forecast_step(params: ArimaParams, history: Sequence[float]) -> float:
    """One-step forecast of the level, undifferencing the ARMA(1,1) forecast of the change"""
    y = np.asarray(history, dtype=float)
    if y.shape[0] < 2:
        raise InsufficientHistoryError("ARIMA forecast needs at least two observations", module="forecast")
    z = np.diff(y)
    e = _css_residuals(z, params.c, params.phi, params.theta)
    return float(y[-1] + params.c + params.phi * z[-1] + params.theta * e[-1])
