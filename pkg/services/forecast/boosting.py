import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from sklearn.tree import DecisionTreeRegressor

from shared.errors import InsufficientHistoryError

logger = logging.getLogger(__name__)


class BoostingHyper(BaseModel):
    n_estimators: int = Field(default=300, ge=0)
    learning_rate: float = Field(default=0.05, gt=0.0)
    max_depth: int = Field(default=6, ge=1)
    min_leaf: int = Field(default=20, ge=1)


class BoostedEnsemble(BaseModel):
    """Stagewise least-squares boosting: base + learning_rate * sum of tree outputs"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    trees: List[DecisionTreeRegressor]
    learning_rate: float
    base_score: float
    feature_names: List[str]
    hyper: BoostingHyper
    # SSE on the training rows after each stage; entry 0 is the base score alone
    train_sse: List[float]
    fit_end: Optional[int] = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return self.base_score + self.learning_rate * total


def gbr_fit(
    X: np.ndarray,
    y: np.ndarray,
    hyper: BoostingHyper,
    feature_names: Optional[Sequence[str]] = None,
    seed: int = 0,
    fit_end: Optional[int] = None,
) -> BoostedEnsemble:
    """Fit each tree to the residuals of the ensemble so far, pooled over all series"""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape[0] < 2 * hyper.min_leaf:
        raise InsufficientHistoryError(
            f"boosting needs at least {2 * hyper.min_leaf} valid rows, got {y.shape[0]}", module="forecast"
        )
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]

    base = float(y.mean())
    fitted = np.full(y.shape[0], base)
    residual = y - fitted
    sse = [float(residual @ residual)]
    trees: List[DecisionTreeRegressor] = []

    if np.ptp(y) == 0.0:
        logger.info("Constant target; boosting keeps the base score only")
        n_stages = 0
    else:
        n_stages = hyper.n_estimators

    for stage in range(n_stages):
        tree = DecisionTreeRegressor(
            max_depth=hyper.max_depth,
            min_samples_leaf=hyper.min_leaf,
            random_state=seed + stage,
        )
        tree.fit(X, residual)
        fitted = fitted + hyper.learning_rate * tree.predict(X)
        residual = y - fitted
        sse.append(float(residual @ residual))
        trees.append(tree)

    logger.debug("Boosting finished: %d trees, train SSE %.4f -> %.4f", len(trees), sse[0], sse[-1])
    return BoostedEnsemble(
        trees=trees,
        learning_rate=hyper.learning_rate,
        base_score=base,
        feature_names=names,
        hyper=hyper,
        train_sse=sse,
        fit_end=fit_end,
    )


def hyper_grid(
    base: BoostingHyper,
    learning_rates: Sequence[float],
    max_depths: Sequence[int],
) -> List[BoostingHyper]:
    """Every (learning rate, depth) combination; empty axes fall back to the base value"""
    rates = list(learning_rates) or [base.learning_rate]
    depths = list(max_depths) or [base.max_depth]
    return [
        base.model_copy(update={"learning_rate": float(rate), "max_depth": int(depth)})
        for rate, depth in itertools.product(rates, depths)
    ]


def grid_label(hyper: BoostingHyper) -> str:
    return f"lr={hyper.learning_rate:g},depth={hyper.max_depth}"


def select_best(scores: Dict[str, float], candidates: List[BoostingHyper]) -> Tuple[BoostingHyper, float]:
    """Lowest validation RMSE; ties keep the earlier grid entry"""
    best = min(candidates, key=lambda h: scores[grid_label(h)])
    return best, scores[grid_label(best)]
