import logging
from typing import List, Sequence, Tuple

import numba
import numpy as np
from pydantic import BaseModel
from scipy import optimize

from shared.errors import InsufficientHistoryError
from shared.models import HoltWintersState

logger = logging.getLogger(__name__)

# Fixed starting points for the bounded search; seeded random starts are added on top
_STARTS = ((0.3, 0.05, 0.1), (0.1, 0.01, 0.3), (0.7, 0.1, 0.05))
_BOUNDS = [(0.0, 1.0)] * 3


class HoltWintersModel(BaseModel):
    fit_end: int
    states: List[HoltWintersState]


@numba.njit(cache=True)
def _smooth(y, alpha, beta, gamma, level, trend, seasonal):
    """Run the additive recursions over y; returns (sse, level, trend, seasonal oldest-first)"""
    m = seasonal.shape[0]
    season = seasonal.copy()
    sse = 0.0
    for t in range(y.shape[0]):
        slot = t % m
        s_old = season[slot]
        err = y[t] - (level + trend + s_old)
        sse += err * err
        new_level = alpha * (y[t] - s_old) + (1.0 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        season[slot] = gamma * (y[t] - new_level) + (1.0 - gamma) * s_old
        level = new_level
    k = y.shape[0] % m
    return sse, level, trend, np.concatenate((season[k:], season[:k]))


def initial_components(y: np.ndarray, m: int) -> Tuple[float, float, np.ndarray]:
    """Level, trend and seasonals from the first two seasons"""
    first = y[:m].mean()
    second = y[m:2 * m].mean()
    level = float(first)
    trend = float((second - first) / m)
    return level, trend, y[:m] - level


def hw_fit(
    train: Sequence[float],
    m: int = 7,
    restarts: int = 2,
    seed: int = 0,
) -> HoltWintersState:
    """Fit alpha, beta, gamma by minimizing the one-step SSE; returns the state at the end of train"""
    y = np.asarray(train, dtype=float)
    if y.shape[0] < 2 * m:
        raise InsufficientHistoryError(
            f"Holt-Winters needs at least {2 * m} observations, got {y.shape[0]}", module="forecast"
        )
    level0, trend0, season0 = initial_components(y, m)
    body = y[m:]

    def sse(params: np.ndarray) -> float:
        value = _smooth(body, params[0], params[1], params[2], level0, trend0, season0)[0]
        return value if np.isfinite(value) else 1e300

    rng = np.random.default_rng(seed)
    starts = [np.array(s) for s in _STARTS] + list(rng.uniform(0.0, 1.0, size=(restarts, 3)))
    best = None
    for start in starts:
        result = optimize.minimize(sse, start, method="L-BFGS-B", bounds=_BOUNDS)
        if best is None or result.fun < best.fun:
            best = result
    alpha, beta, gamma = (float(np.clip(v, 0.0, 1.0)) for v in best.x)

    _, level, trend, season = _smooth(body, alpha, beta, gamma, level0, trend0, season0)
    return HoltWintersState(
        level=float(level),
        trend=float(trend),
        seasonal=tuple(float(s) for s in season),
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        m=m,
    )


def hw_forecast_step(state: HoltWintersState, y_t: float) -> Tuple[HoltWintersState, float]:
    """Absorb observation y_t and return the new state with its one-step forecast"""
    s_old = state.seasonal[0]
    level = state.alpha * (y_t - s_old) + (1.0 - state.alpha) * (state.level + state.trend)
    trend = state.beta * (level - state.level) + (1.0 - state.beta) * state.trend
    s_new = state.gamma * (y_t - level) + (1.0 - state.gamma) * s_old
    next_state = state.model_copy(update={
        "level": level,
        "trend": trend,
        "seasonal": state.seasonal[1:] + (s_new,),
    })
    return next_state, next_state.forecast
