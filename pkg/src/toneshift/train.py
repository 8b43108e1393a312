"""Training: loss weighting, splits, the optimization loop, and grid search.

The target distribution is heavily concentrated near zero, so the L1 loss
is reweighted by inverse bin frequency over ten equal-width bins of
[-1, 1].  Splits are stratified over the same bins.  Optimization is Adam
with early stopping on the validation loss.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import regressor
from .errors import DegenerateData, DivergedLoss, EmptyTrainingSet, LengthMismatch
from .regressor import ModelConfig

NUM_BINS = 10


def bin_index(y: np.ndarray) -> np.ndarray:
    """Map targets in [-1, 1] to bin indices 0..9 (right-closed last bin)."""
    y = np.asarray(y, dtype=float)
    idx = np.floor((y + 1.0) * (NUM_BINS / 2.0) + 1e-9).astype(int)
    return np.clip(idx, 0, NUM_BINS - 1)


@dataclass(frozen=True)
class BinWeights:
    counts: tuple[int, ...]
    weights: tuple[float, ...]

    def weight_of(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.weights)[bin_index(y)]

    def to_json(self) -> dict:
        return {"counts": list(self.counts), "weights": list(self.weights)}

    @classmethod
    def from_json(cls, obj: dict) -> "BinWeights":
        return cls(counts=tuple(obj["counts"]), weights=tuple(obj["weights"]))


def compute_bin_weights(y: np.ndarray) -> BinWeights:
    """Inverse-frequency weights over ten equal bins.

    With k occupied bins and n samples, an occupied bin of count c gets
    weight n / (k * c), so the weighted sample count sums back to n.
    Empty bins get n / k as a safe default.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise EmptyTrainingSet("cannot compute bin weights on an empty target set")
    counts = np.bincount(bin_index(y), minlength=NUM_BINS)
    occupied = int((counts > 0).sum())
    weights = y.size / (occupied * np.maximum(counts, 1))
    return BinWeights(counts=tuple(int(c) for c in counts), weights=tuple(float(w) for w in weights))


def weighted_l1(yhat: np.ndarray, y: np.ndarray, bw: BinWeights):
    """Mean per-sample weighted absolute error and its gradient in yhat."""
    yhat = np.asarray(yhat, dtype=float)
    y = np.asarray(y, dtype=float)
    if yhat.shape != y.shape:
        raise LengthMismatch(f"prediction/target shapes differ: {yhat.shape} vs {y.shape}")
    w = bw.weight_of(y)
    loss = float(np.mean(w * np.abs(yhat - y)))
    grad = w * np.sign(yhat - y) / y.size
    return loss, grad


def stratified_split(
    y: np.ndarray, fractions=(0.8, 0.1, 0.1), seed: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-bin largest-remainder split into train/val/test index arrays.

    Ties in the remainders are broken in favor of train, then val.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise EmptyTrainingSet("cannot split an empty target set")
    rng = np.random.default_rng(seed)
    parts: list[list[int]] = [[], [], []]
    bins = bin_index(y)
    for b in range(NUM_BINS):
        members = np.flatnonzero(bins == b)
        if members.size == 0:
            continue
        members = members[rng.permutation(members.size)]
        exact = np.array(fractions) * members.size
        base = np.floor(exact).astype(int)
        leftover = members.size - base.sum()
        # larger remainder wins; on ties the earlier split (train, val) wins
        order = sorted(range(3), key=lambda i: (-(exact[i] - base[i]), i))
        for i in order[:leftover]:
            base[i] += 1
        cuts = np.cumsum(base)
        parts[0].extend(members[: cuts[0]])
        parts[1].extend(members[cuts[0] : cuts[1]])
        parts[2].extend(members[cuts[1] :])
    return tuple(np.sort(np.array(p, dtype=int)) for p in parts)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    epochs: int = 20
    patience: int = 3
    seed: int = 0
    diverge_threshold: float = 1e3


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        for k in params:
            g = grads[k]
            self.m[k] = c.beta1 * self.m[k] + (1 - c.beta1) * g
            self.v[k] = c.beta2 * self.v[k] + (1 - c.beta2) * g * g
            mhat = self.m[k] / (1 - c.beta1 ** self.t)
            vhat = self.v[k] / (1 - c.beta2 ** self.t)
            params[k] -= c.learning_rate * mhat / (np.sqrt(vhat) + c.eps)


@dataclass
class FitResult:
    params: dict
    history: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False


def pad_batch(sequences: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length (n_i, 770) feature arrays into a padded batch."""
    lengths = np.array([s.shape[0] for s in sequences], dtype=np.int64)
    width = int(lengths.max())
    out = np.zeros((len(sequences), width, sequences[0].shape[1]))
    for i, s in enumerate(sequences):
        out[i, : s.shape[0]] = s
    return out, lengths


def evaluate_loss(
    params, model_cfg: ModelConfig, sequences, y, bw: BinWeights, batch_size: int = 64
) -> float:
    total = 0.0
    for start in range(0, len(sequences), batch_size):
        chunk = sequences[start : start + batch_size]
        raw, lengths = pad_batch(chunk)
        yhat, _ = regressor.forward(params, model_cfg, raw, lengths)
        w = bw.weight_of(y[start : start + len(chunk)])
        total += float(np.sum(w * np.abs(yhat - y[start : start + len(chunk)])))
    return total / len(sequences)


def fit(
    model_cfg: ModelConfig,
    train_seqs: list[np.ndarray],
    train_y: np.ndarray,
    val_seqs: list[np.ndarray],
    val_y: np.ndarray,
    train_cfg: TrainConfig | None = None,
    bin_weights: BinWeights | None = None,
) -> FitResult:
    """Train with Adam on the weighted L1 loss, keeping the best-val params."""
    cfg = train_cfg or TrainConfig()
    if len(train_seqs) == 0:
        raise EmptyTrainingSet("no training sequences")
    if len(train_seqs) != len(train_y):
        raise LengthMismatch(f"{len(train_seqs)} sequences vs {len(train_y)} targets")
    train_y = np.asarray(train_y, dtype=float)
    val_y = np.asarray(val_y, dtype=float)
    bw = bin_weights or compute_bin_weights(train_y)

    params = regressor.init_params(model_cfg, seed=cfg.seed)
    opt = Adam(params, cfg)
    shuffle_rng = np.random.default_rng(cfg.seed + 1)
    dropout_rng = np.random.default_rng(cfg.seed + 2)

    result = FitResult(params={k: v.copy() for k, v in params.items()})
    bad_epochs = 0
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(len(train_seqs))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            raw, lengths = pad_batch([train_seqs[i] for i in idx])
            yb = train_y[idx]
            yhat, cache = regressor.forward(
                params, model_cfg, raw, lengths, training=True, dropout_rng=dropout_rng
            )
            loss, dy = weighted_l1(yhat, yb, bw)
            if not np.isfinite(loss) or loss > cfg.diverge_threshold:
                raise DivergedLoss(
                    f"loss {loss:g} at epoch {epoch}, batch offset {start} (seed {cfg.seed})"
                )
            grads = regressor.backward(params, model_cfg, cache, dy)
            opt.step(params, grads)
            epoch_loss += loss * len(idx)
        epoch_loss /= len(order)
        if len(val_seqs) > 0:
            val_loss = evaluate_loss(params, model_cfg, val_seqs, val_y, bw)
        else:
            val_loss = epoch_loss
        result.history.append({"epoch": epoch, "train_loss": epoch_loss, "val_loss": val_loss})
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            result.params = {k: v.copy() for k, v in params.items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                result.stopped_early = True
                break
    return result


def grid_configs() -> list[ModelConfig]:
    """The full 30-point architecture grid, in deterministic order."""
    configs = []
    for fc_out in (2, 14, 62):
        for bidirectional in (False, True):
            configs.append(ModelConfig(fc_out=fc_out, num_layers=1,
                                       bidirectional=bidirectional, dropout=0.0))
            for dropout in (0.0, 0.2, 0.5, 0.8):
                configs.append(ModelConfig(fc_out=fc_out, num_layers=2,
                                           bidirectional=bidirectional, dropout=dropout))
    return configs


def grid_search(
    train_seqs, train_y, val_seqs, val_y,
    train_cfg: TrainConfig | None = None,
    configs: list[ModelConfig] | None = None,
    progress=None,
):
    """Train every grid point; returns (leaderboard, best FitResult).

    The leaderboard is sorted by validation loss ascending, ties broken by
    grid order.
    """
    configs = configs if configs is not None else grid_configs()
    rows = []
    best = None
    best_key = None
    for i, mc in enumerate(configs):
        start = time.time()
        res = fit(mc, train_seqs, train_y, val_seqs, val_y, train_cfg=train_cfg)
        row = {
            "rank": -1,
            "config": asdict(mc),
            "val_loss": res.best_val_loss,
            "best_epoch": res.best_epoch,
            "epochs_run": len(res.history),
            "stopped_early": res.stopped_early,
            "seconds": round(time.time() - start, 3),
        }
        rows.append(row)
        key = (res.best_val_loss, i)
        if best_key is None or key < best_key:
            best_key = key
            best = res
            best.config = mc  # type: ignore[attr-defined]
        if progress is not None:
            progress(i, len(configs), row)
    rows.sort(key=lambda r: (r["val_loss"], configs.index(ModelConfig(**r["config"]))))
    for rank, row in enumerate(rows, start=1):
        row["rank"] = rank
    return rows, best
