import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toneshift import evaluation as E
from toneshift import train as T
from toneshift.errors import LengthMismatch
from toneshift.synth import synthetic_segments


def make_bw(y):
    return T.compute_bin_weights(np.asarray(y))


class TestMetrics:
    def test_perfect_prediction(self):
        y = np.array([-0.4, 0.2, 0.9])
        m = E.metrics(y, y, make_bw(y))
        assert m == {"weighted_l1": 0.0, "l1": 0.0, "mse": 0.0}

    def test_uniform_bins_weighted_equals_plain(self):
        y = np.linspace(-0.9, 0.9, 10)
        m = E.metrics(y + 0.2, y, make_bw(y))
        assert m["weighted_l1"] == pytest.approx(m["l1"], abs=1e-12)

    def test_mean_minimizes_mse_among_constants(self):
        rng = np.random.default_rng(0)
        y = rng.uniform(-1, 1, 50)
        bw = make_bw(y)
        at_mean = E.metrics(np.full(50, y.mean()), y, bw)["mse"]
        for c in (-0.5, 0.0, 0.3, 0.9):
            assert at_mean <= E.metrics(np.full(50, c), y, bw)["mse"] + 1e-12

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(-1, 1, 30)
        yhat = rng.uniform(-1, 1, 30)
        bw = make_bw(y)
        perm = rng.permutation(30)
        a = E.metrics(yhat, y, bw)
        b = E.metrics(yhat[perm], y[perm], bw)
        for key in a:
            assert a[key] == pytest.approx(b[key], abs=1e-12)

    def test_mismatch_rejected(self):
        with pytest.raises(LengthMismatch):
            E.metrics(np.zeros(2), np.zeros(3), make_bw([0.0]))
        with pytest.raises(LengthMismatch):
            E.metrics(np.array([]), np.array([]), make_bw([0.0]))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=1, max_value=40), st.integers(min_value=0, max_value=1 << 30))
    def test_all_losses_nonnegative(self, n, seed):
        rng = np.random.default_rng(seed)
        y = rng.uniform(-1, 1, n)
        m = E.metrics(rng.uniform(-1, 1, n), y, make_bw(y))
        assert all(v >= 0 for v in m.values())


class TestExtremeSubsets:
    def _setup(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        y = rng.uniform(-1, 1, n)
        preds = {
            "model": np.clip(y + rng.normal(0, 0.1, n), -1, 1),
            "mean": np.clip(y + rng.normal(0, 0.3, n), -1, 1),
        }
        last = rng.uniform(-1, 1, n)
        prev = np.where(rng.random(n) < 0.8, rng.uniform(-1, 1, n), np.nan)
        return y, preds, last, prev

    def test_six_rows(self):
        rows = E.extreme_subsets(*self._setup())
        assert len(rows) == 6
        assert [r.name for r in rows] == [
            "shift_above_p95", "shift_below_p5", "shift_above_1",
            "shift_below_minus1", "last_above_0.8", "last_below_minus0.8",
        ]

    def test_percentile_thresholds_match_oracle(self):
        y, preds, last, prev = self._setup()
        rows = E.extreme_subsets(y, preds, last, prev)
        delta = (y - prev)[np.isfinite(prev)]
        hi, lo = np.percentile(delta, 95), np.percentile(delta, 5)
        oracle_hi = int(np.sum(delta > hi))
        oracle_lo = int(np.sum(delta < lo))
        assert rows[0].count == oracle_hi
        assert rows[1].count == oracle_lo

    def test_membership_by_independent_predicate(self):
        y, preds, last, prev = self._setup(seed=3)
        rows = E.extreme_subsets(y, preds, last, prev)
        assert rows[4].count == int(np.sum(last > 0.8))
        assert rows[5].count == int(np.sum(last < -0.8))
        delta = y - prev
        assert rows[2].count == int(np.sum(delta[np.isfinite(prev)] > 1.0))
        assert rows[3].count == int(np.sum(delta[np.isfinite(prev)] < -1.0))

    def test_ties_are_not_wins(self):
        y = np.array([0.9, -0.9])
        preds = {"model": y.copy(), "mean": y.copy()}
        rows = E.extreme_subsets(y, preds, np.array([0.9, -0.9]), np.array([np.nan, np.nan]))
        for r in rows:
            assert r.win_pct["mean"] == 0.0

    def test_win_pct_bounds(self):
        rows = E.extreme_subsets(*self._setup(seed=4))
        for r in rows:
            for v in r.win_pct.values():
                assert 0.0 <= v <= 100.0

    def test_counts_bounded_by_test_size(self):
        rows = E.extreme_subsets(*self._setup(n=50, seed=5))
        for r in rows:
            assert r.count <= 50

    def test_missing_prev_author_excluded_from_shift_rows(self):
        y = np.array([0.99, -0.99])
        preds = {"model": y.copy()}
        rows = E.extreme_subsets(y, preds, np.array([0.99, -0.99]),
                                 np.array([np.nan, np.nan]))
        assert rows[0].count == rows[1].count == 0
        assert rows[4].count == 1 and rows[5].count == 1


class TestJointDensity:
    def test_integrates_to_one(self):
        rng = np.random.default_rng(0)
        grid = E.joint_density(rng.uniform(-1, 1, 500), rng.uniform(-1, 1, 500))
        axis = np.array(grid.x_axis)
        density = np.array(grid.density)
        trap = getattr(np, "trapezoid", np.trapz)
        mass = trap(trap(density, axis, axis=1), axis)
        assert mass == pytest.approx(1.0, abs=1e-3)
        assert density.min() >= 0

    def test_peak_near_sample_center(self):
        rng = np.random.default_rng(1)
        x = np.clip(rng.normal(0, 0.25, 10000), -1, 1)
        y = np.clip(rng.normal(0, 0.25, 10000), -1, 1)
        grid = E.joint_density(x, y)
        d = np.array(grid.density)
        i, j = np.unravel_index(d.argmax(), d.shape)
        assert abs(grid.x_axis[i]) < 0.1
        assert abs(grid.y_axis[j]) < 0.1

    def test_degenerate_point_mass(self):
        grid = E.joint_density(np.full(10, 0.5), np.full(10, -0.5))
        d = np.array(grid.density)
        assert np.all(np.isfinite(d))
        i, j = np.unravel_index(d.argmax(), d.shape)
        assert grid.x_axis[i] == pytest.approx(0.5, abs=0.02)
        assert grid.y_axis[j] == pytest.approx(-0.5, abs=0.02)

    def test_scatter_seeded(self):
        rng = np.random.default_rng(2)
        x, y = rng.uniform(-1, 1, 300), rng.uniform(-1, 1, 300)
        a = E.joint_density(x, y, n_scatter=100, seed=9)
        b = E.joint_density(x, y, n_scatter=100, seed=9)
        assert a.scatter == b.scatter
        assert len(a.scatter) == 100

    def test_too_short_rejected(self):
        with pytest.raises(LengthMismatch):
            E.joint_density(np.array([0.1]), np.array([0.2]))


class TestCharacterize:
    def test_single_segment_quartiles_collapse(self):
        seg = synthetic_segments(n=1, seed=0)[0]
        out = E.characterize([seg])
        stats = out[seg.subreddit]
        assert stats["post"]["q1"] == stats["post"]["q2"] == stats["post"]["q3"]
        assert stats["count"] == 1

    def test_quartiles_match_sort_oracle(self):
        segs = synthetic_segments(n=50, seed=1)
        out = E.characterize(segs)
        for sub, stats in out.items():
            posts = sorted(s.messages[0].emt for s in segs if s.subreddit == sub)
            assert stats["post"]["q2"] == pytest.approx(float(np.percentile(posts, 50)))

    def test_quadrant_shares_sum_to_one(self):
        segs = synthetic_segments(n=80, seed=2)
        out = E.characterize(segs)
        for stats in out.values():
            assert sum(stats["quadrant_share"].values()) == pytest.approx(1.0)


class TestReport:
    def test_round_trip(self, tmp_path):
        y = np.linspace(-0.9, 0.9, 10)
        bw = make_bw(y)
        rows = E.extreme_subsets(y, {"model": y, "mean": y + 0.1},
                                 np.linspace(-1, 1, 10), np.full(10, np.nan))
        report = E.EvaluationReport(
            scores={"DEP": {"model": E.metrics(y + 0.1, y, bw)}},
            subsets=rows, bin_weights=bw.to_json(),
        )
        path = tmp_path / "report.json"
        report.save(path)
        assert E.EvaluationReport.load(path).to_json() == report.to_json()

    def test_rendered_tables_mention_predictors(self):
        y = np.linspace(-0.9, 0.9, 10)
        bw = make_bw(y)
        report = E.EvaluationReport(
            scores={"DEP": {"model": E.metrics(y, y, bw), "last": E.metrics(y + 0.1, y, bw)}},
            subsets=E.extreme_subsets(y, {"model": y, "last": y + 0.1},
                                      np.linspace(-1, 1, 10), np.full(10, np.nan)),
            bin_weights=bw.to_json(),
        )
        text = E.render_scores(report)
        assert "model" in text and "last" in text and "DEP" in text
        text2 = E.render_subsets(report)
        assert "last comment tone" in text2
