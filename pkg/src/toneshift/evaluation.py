"""Evaluation: loss metrics, extreme-reaction subsets, and plot-data export.

Everything here is pure computation over predictions and targets.  The
joint-density export and the rendered tables produce plot-ready data, not
images.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import LengthMismatch
from .train import BinWeights

GRID_SIZE = 100
BANDWIDTH_FLOOR = 1e-3

_trapezoid = getattr(np, "trapezoid", np.trapz)


def metrics(predictions: np.ndarray, targets: np.ndarray, bw: BinWeights) -> dict:
    """Weighted L1, plain L1, and MSE.

    The bin weights must come from the training split; they are applied to
    the targets being evaluated.
    """
    predictions = np.asarray(predictions, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise LengthMismatch(
            f"need equal-length nonempty arrays, got {predictions.shape} and {targets.shape}"
        )
    err = predictions - targets
    w = bw.weight_of(targets)
    return {
        "weighted_l1": float(np.mean(w * np.abs(err))),
        "l1": float(np.mean(np.abs(err))),
        "mse": float(np.mean(err * err)),
    }


@dataclass
class SubsetRow:
    name: str
    definition: str
    count: int
    l1: dict  # predictor -> unweighted L1 on the subset
    win_pct: dict  # baseline -> % of subset threads where model beats it

    def to_json(self) -> dict:
        return asdict(self)


def _win_pct(model_err: np.ndarray, base_err: np.ndarray) -> float:
    if model_err.size == 0:
        return 0.0
    return float(100.0 * np.mean(model_err < base_err))


def extreme_subsets(
    targets: np.ndarray,
    predictions: dict[str, np.ndarray],
    last_tone: np.ndarray,
    prev_author_tone: np.ndarray,
    model_name: str = "model",
) -> list[SubsetRow]:
    """Six hard-case subsets of the test set.

    *prev_author_tone* holds the tone of the author's latest comment inside
    the segment, or NaN where the author never commented before the target;
    those rows are excluded from the tone-shift subsets but kept in the
    last-comment-threshold subsets.  Win percentages use strict inequality,
    so ties count against the model.
    """
    targets = np.asarray(targets, dtype=float)
    last_tone = np.asarray(last_tone, dtype=float)
    prev_author_tone = np.asarray(prev_author_tone, dtype=float)
    for name, yhat in predictions.items():
        if np.asarray(yhat).shape != targets.shape:
            raise LengthMismatch(f"predictor {name!r} length mismatch")

    has_delta = np.isfinite(prev_author_tone)
    delta = np.where(has_delta, targets - prev_author_tone, np.nan)
    valid_delta = delta[has_delta]
    if valid_delta.size > 0:
        hi = float(np.percentile(valid_delta, 95))
        lo = float(np.percentile(valid_delta, 5))
    else:
        hi, lo = np.inf, -np.inf

    specs = [
        ("shift_above_p95", f"tone shift > {hi:+.3f} (95th pct)", has_delta & (delta > hi)),
        ("shift_below_p5", f"tone shift < {lo:+.3f} (5th pct)", has_delta & (delta < lo)),
        ("shift_above_1", "tone shift > +1.0", has_delta & (delta > 1.0)),
        ("shift_below_minus1", "tone shift < -1.0", has_delta & (delta < -1.0)),
        ("last_above_0.8", "last comment tone > +0.8", last_tone > 0.8),
        ("last_below_minus0.8", "last comment tone < -0.8", last_tone < -0.8),
    ]
    baselines = [k for k in predictions if k != model_name]
    model_err_all = np.abs(np.asarray(predictions[model_name]) - targets)
    rows = []
    for name, definition, mask in specs:
        l1 = {
            k: (float(np.mean(np.abs(np.asarray(v)[mask] - targets[mask]))) if mask.any() else None)
            for k, v in predictions.items()
        }
        wins = {
            k: _win_pct(model_err_all[mask], np.abs(np.asarray(predictions[k])[mask] - targets[mask]))
            for k in baselines
        }
        rows.append(SubsetRow(name=name, definition=definition,
                              count=int(mask.sum()), l1=l1, win_pct=wins))
    return rows


@dataclass
class JointDensityGrid:
    x_axis: list
    y_axis: list
    density: list  # row-major, density[i][j] at (x_axis[i], y_axis[j])
    scatter: list  # [x, y, size] triples
    bandwidth: tuple

    def to_json(self) -> dict:
        return asdict(self)


def joint_density(
    x: np.ndarray,
    y: np.ndarray,
    n_scatter: int = 100,
    seed: int = 0,
    sizes: np.ndarray | None = None,
) -> JointDensityGrid:
    """2-D Gaussian kernel density on a 100x100 grid over [-1, 1]^2.

    Bandwidth per axis follows Scott's rule with a small floor so a
    zero-variance axis still yields a finite peak.  The grid mass is
    renormalized to integrate to one over the window.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise LengthMismatch("need paired arrays of length >= 2")
    n = x.size
    factor = n ** (-1.0 / 6.0)  # Scott's rule for two dimensions
    hx = max(factor * float(np.std(x)), BANDWIDTH_FLOOR)
    hy = max(factor * float(np.std(y)), BANDWIDTH_FLOOR)

    axis = np.linspace(-1.0, 1.0, GRID_SIZE)
    gx = np.exp(-0.5 * ((axis[:, None] - x[None, :]) / hx) ** 2) / (hx * np.sqrt(2 * np.pi))
    gy = np.exp(-0.5 * ((axis[:, None] - y[None, :]) / hy) ** 2) / (hy * np.sqrt(2 * np.pi))
    density = (gx @ gy.T) / n

    mass = float(_trapezoid(_trapezoid(density, axis, axis=1), axis))
    if mass > 0:
        density /= mass

    rng = np.random.default_rng(seed)
    k = min(n_scatter, n)
    picks = np.sort(rng.choice(n, size=k, replace=False))
    if sizes is None:
        sizes = np.ones(n)
    scatter = [[float(x[i]), float(y[i]), float(sizes[i])] for i in picks]
    return JointDensityGrid(
        x_axis=axis.tolist(), y_axis=axis.tolist(),
        density=density.tolist(), scatter=scatter, bandwidth=(hx, hy),
    )


def _quartiles(values: np.ndarray) -> dict:
    return {
        "q1": float(np.percentile(values, 25)),
        "q2": float(np.percentile(values, 50)),
        "q3": float(np.percentile(values, 75)),
    }


def characterize(segments) -> dict:
    """Per-subreddit quartiles of post tone, last-comment tone, and the
    per-thread average comment tone, plus sign-quadrant shares of
    (post tone, last-comment tone)."""
    by_sub: dict[str, dict[str, list[float]]] = {}
    for seg in segments:
        post = seg.messages[0]
        comments = seg.messages[1:]
        bucket = by_sub.setdefault(seg.subreddit, {"post": [], "last": [], "comment_avg": []})
        bucket["post"].append(post.emt)
        if comments:
            bucket["last"].append(comments[-1].emt)
            bucket["comment_avg"].append(float(np.mean([c.emt for c in comments])))
    out = {}
    for sub, bucket in sorted(by_sub.items()):
        p = np.array(bucket["post"])
        c = np.array(bucket["last"])
        n = min(p.size, c.size)
        quad = {}
        if n > 0:
            pp, cc = p[:n], c[:n]
            quad = {
                "pos_pos": float(np.mean((pp >= 0) & (cc >= 0))),
                "neg_pos": float(np.mean((pp < 0) & (cc >= 0))),
                "neg_neg": float(np.mean((pp < 0) & (cc < 0))),
                "pos_neg": float(np.mean((pp >= 0) & (cc < 0))),
            }
        out[sub] = {
            "post": _quartiles(p),
            "last_comment": _quartiles(np.array(bucket["last"])) if bucket["last"] else None,
            "comment_avg": _quartiles(np.array(bucket["comment_avg"])) if bucket["comment_avg"] else None,
            "quadrant_share": quad,
            "count": int(p.size),
        }
    return out


@dataclass
class EvaluationReport:
    scores: dict  # (subreddit -> predictor -> metrics dict)
    subsets: list  # list[SubsetRow]
    bin_weights: dict

    def to_json(self) -> dict:
        return {
            "scores": self.scores,
            "subsets": [r.to_json() for r in self.subsets],
            "bin_weights": self.bin_weights,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvaluationReport":
        return cls(
            scores=obj["scores"],
            subsets=[SubsetRow(**r) for r in obj["subsets"]],
            bin_weights=obj["bin_weights"],
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def render_scores(report: EvaluationReport) -> str:
    """Plain-text loss table: one block per subreddit, predictors as rows."""
    lines = []
    for sub in sorted(report.scores):
        lines.append(f"== {sub} ==")
        lines.append(f"{'predictor':<12} {'wL1':>8} {'L1':>8} {'MSE':>8}")
        for pred in sorted(report.scores[sub]):
            m = report.scores[sub][pred]
            lines.append(
                f"{pred:<12} {m['weighted_l1']:>8.3f} {m['l1']:>8.3f} {m['mse']:>8.3f}"
            )
        lines.append("")
    return "\n".join(lines)


def render_subsets(report: EvaluationReport) -> str:
    """Plain-text hard-case table: per subset, L1 per predictor and win %."""
    lines = []
    for row in report.subsets:
        lines.append(f"-- {row.definition} (n={row.count}) --")
        for pred in sorted(row.l1):
            l1 = row.l1[pred]
            win = row.win_pct.get(pred)
            tail = f"  win% {win:5.1f}" if win is not None else ""
            l1_text = f"{l1:7.3f}" if l1 is not None else "      -"
            lines.append(f"  {pred:<12} L1 {l1_text}{tail}")
    return "\n".join(lines)
