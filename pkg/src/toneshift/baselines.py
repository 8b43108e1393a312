"""Reference predictors the sequence model must beat.

Three trivial tone baselines (unchanged, mean, last) plus a gradient
boosted tree regressor over pooled per-message features.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict

import numpy as np
from sklearn.ensemble import GradientBoostingRegressor

from .errors import EmptyTrainingSet, LengthMismatch
from .threadsel import ThreadSegment

POOLED_DIM = 1540  # avg and max over 770-d per-message features


def predict_unchanged(segment: ThreadSegment) -> float:
    """Tone of the opening post, unchanged."""
    return float(segment.messages[0].emt)


def predict_mean(segment: ThreadSegment) -> float:
    tones = [m.emt for m in segment.messages]
    return sum(tones) / len(tones)


def predict_last(segment: ThreadSegment) -> float:
    return float(segment.messages[-1].emt)


def pool_features(seq: np.ndarray) -> np.ndarray:
    """Average and element-wise max over the (n, 770) message features."""
    if seq.ndim != 2 or seq.shape[1] != 770:
        raise LengthMismatch(f"expected (n, 770) features, got {seq.shape}")
    return np.concatenate([seq.mean(axis=0), seq.max(axis=0)])


@dataclass(frozen=True)
class GBTConfig:
    """Boosted-tree hyperparameters, squared-error objective.

    min_child_weight and column subsampling are expressed through their
    closest scikit-learn equivalents (min_samples_leaf, max_features).
    """

    learning_rate: float = 1e-2
    max_depth: int = 5
    min_child_weight: int = 1
    subsample: float = 0.7
    colsample: float = 0.7
    n_estimators: int = 500
    seed: int = 0
    early_stopping_rounds: int | None = 10


def gbt_grid() -> list[GBTConfig]:
    """All 648 combinations of the tuning grid, in deterministic order."""
    grid = []
    for lr, depth, mcw, subsample, colsample, trees in itertools.product(
        (1e-3, 1e-2, 1e-1), (1, 3, 5), (1, 3, 5), (0.5, 0.7), (0.5, 0.7), (100, 200, 500)
    ):
        grid.append(GBTConfig(
            learning_rate=lr, max_depth=depth, min_child_weight=mcw,
            subsample=subsample, colsample=colsample, n_estimators=trees,
        ))
    return grid


def fit_gbt(features: np.ndarray, y: np.ndarray, cfg: GBTConfig | None = None):
    cfg = cfg or GBTConfig()
    if features.shape[0] == 0:
        raise EmptyTrainingSet("no rows to fit the boosted-tree baseline")
    if features.shape[0] != len(y):
        raise LengthMismatch(f"{features.shape[0]} rows vs {len(y)} targets")
    kwargs = {}
    if cfg.early_stopping_rounds is not None and features.shape[0] >= 20:
        kwargs = {"n_iter_no_change": cfg.early_stopping_rounds, "validation_fraction": 0.1}
    model = GradientBoostingRegressor(
        loss="squared_error",
        learning_rate=cfg.learning_rate,
        max_depth=cfg.max_depth,
        min_samples_leaf=cfg.min_child_weight,
        subsample=cfg.subsample,
        max_features=cfg.colsample,
        n_estimators=cfg.n_estimators,
        random_state=cfg.seed,
        **kwargs,
    )
    model.fit(features, np.asarray(y, dtype=float))
    return model


def predict_gbt(model, features: np.ndarray) -> np.ndarray:
    return np.clip(model.predict(features), -1.0, 1.0)


def gbt_search(
    train_x: np.ndarray, train_y: np.ndarray,
    val_x: np.ndarray, val_y: np.ndarray,
    configs: list[GBTConfig] | None = None,
    metric=None,
):
    """Fit each config, rank by validation metric; returns (rows, best model)."""
    if metric is None:
        metric = lambda yhat, y: float(np.mean(np.abs(yhat - y)))
    configs = configs if configs is not None else gbt_grid()
    rows, best, best_key = [], None, None
    for i, cfg in enumerate(configs):
        model = fit_gbt(train_x, train_y, cfg)
        score = metric(predict_gbt(model, val_x), val_y)
        rows.append({"rank": -1, "config": asdict(cfg), "val_loss": score})
        key = (score, i)
        if best_key is None or key < best_key:
            best_key, best = key, model
    order = np.argsort([r["val_loss"] for r in rows], kind="stable")
    rows = [rows[i] for i in order]
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows, best
