import numpy as np
import pytest

from toneshift import baselines
from toneshift.errors import EmptyTrainingSet, LengthMismatch
from toneshift.synth import synthetic_segments


@pytest.fixture(scope="module")
def segments():
    return synthetic_segments(n=100, seed=7)


def brute_force_mean(segment):
    total = 0.0
    for m in segment.messages:
        total += m.emt
    return total / len(segment.messages)


def brute_force_pool(seq):
    n, d = seq.shape
    mean = [sum(seq[i][j] for i in range(n)) / n for j in range(d)]
    mx = [max(seq[i][j] for i in range(n)) for j in range(d)]
    return np.array(mean + mx)


class TestHeuristics:
    def test_mean_two_tones(self, segments):
        seg = segments[0]
        import dataclasses
        msgs = [dataclasses.replace(m, emt=v) for m, v in zip(seg.messages[:2], (-0.5, 0.5))]
        seg2 = dataclasses.replace(seg, messages=msgs)
        assert baselines.predict_mean(seg2) == 0.0

    def test_mean_matches_brute_force(self, segments):
        for seg in segments:
            assert baselines.predict_mean(seg) == pytest.approx(brute_force_mean(seg), abs=0)

    def test_mean_within_bounds(self, segments):
        for seg in segments:
            tones = [m.emt for m in seg.messages]
            assert min(tones) <= baselines.predict_mean(seg) <= max(tones)

    def test_last_is_final_message(self, segments):
        for seg in segments:
            assert baselines.predict_last(seg) == seg.messages[-1].emt

    def test_last_ignores_earlier_messages(self, segments):
        import dataclasses
        seg = segments[3]
        shuffled = dataclasses.replace(
            seg, messages=[seg.messages[0]] + seg.messages[1:-1][::-1] + [seg.messages[-1]]
        )
        assert baselines.predict_last(shuffled) == baselines.predict_last(seg)

    def test_unchanged_is_post_tone(self, segments):
        for seg in segments:
            assert baselines.predict_unchanged(seg) == seg.messages[0].emt

    def test_unchanged_ignores_comments(self, segments):
        import dataclasses
        seg = segments[5]
        trimmed = dataclasses.replace(seg, messages=seg.messages[:2])
        assert baselines.predict_unchanged(trimmed) == baselines.predict_unchanged(seg)


class TestPooling:
    def test_single_row(self):
        seq = np.random.default_rng(0).normal(size=(1, 770))
        pooled = baselines.pool_features(seq)
        assert pooled.shape == (1540,)
        assert np.allclose(pooled[:770], seq[0])
        assert np.allclose(pooled[770:], seq[0])

    def test_symmetric_pair(self):
        v = np.random.default_rng(1).normal(size=770)
        pooled = baselines.pool_features(np.stack([v, -v]))
        assert np.allclose(pooled[:770], 0.0)
        assert np.allclose(pooled[770:], np.abs(v))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        seq = rng.normal(size=(6, 770))
        a = baselines.pool_features(seq)
        b = baselines.pool_features(seq[rng.permutation(6)])
        assert np.allclose(a, b)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            seq = rng.normal(size=(int(rng.integers(1, 8)), 770))
            assert np.allclose(baselines.pool_features(seq), brute_force_pool(seq))

    def test_bad_shape(self):
        with pytest.raises(LengthMismatch):
            baselines.pool_features(np.zeros((3, 100)))


class TestGBT:
    def test_constant_targets(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 20))
        y = np.full(50, 0.3)
        model = baselines.fit_gbt(x, y, baselines.GBTConfig(n_estimators=20,
                                                            early_stopping_rounds=None))
        pred = baselines.predict_gbt(model, x)
        assert np.allclose(pred, 0.3, atol=1e-6)

    def test_recovers_linear_signal(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(1000, 10))
        y = np.clip(x[:, 0], -1, 1)
        model = baselines.fit_gbt(x[:800], y[:800],
                                  baselines.GBTConfig(learning_rate=0.1, n_estimators=200))
        pred = baselines.predict_gbt(model, x[800:])
        assert float(np.mean((pred - y[800:]) ** 2)) < 0.01

    def test_prediction_clamped(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(60, 5))
        y = rng.uniform(-5, 5, 60)  # targets outside the tone range
        model = baselines.fit_gbt(x, y, baselines.GBTConfig(n_estimators=30))
        pred = baselines.predict_gbt(model, x)
        assert pred.min() >= -1.0 and pred.max() <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyTrainingSet):
            baselines.fit_gbt(np.zeros((0, 5)), np.array([]))

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            baselines.fit_gbt(np.zeros((3, 5)), np.zeros(4))


class TestGBTGrid:
    def test_grid_size_and_axes(self):
        grid = baselines.gbt_grid()
        assert len(grid) == 3 * 3 * 3 * 2 * 2 * 3
        assert {c.learning_rate for c in grid} == {1e-3, 1e-2, 1e-1}
        assert {c.max_depth for c in grid} == {1, 3, 5}
        assert {c.min_child_weight for c in grid} == {1, 3, 5}
        assert {c.subsample for c in grid} == {0.5, 0.7}
        assert {c.colsample for c in grid} == {0.5, 0.7}
        assert {c.n_estimators for c in grid} == {100, 200, 500}

    def test_reference_best_config_in_grid(self):
        grid = baselines.gbt_grid()
        assert any(
            c.learning_rate == 1e-2 and c.max_depth == 5 and c.min_child_weight == 1
            and c.subsample == 0.7 and c.colsample == 0.7 and c.n_estimators == 500
            for c in grid
        )

    def test_search_ranks(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(200, 5))
        y = np.clip(0.5 * x[:, 0], -1, 1)
        configs = [baselines.GBTConfig(n_estimators=10, learning_rate=lr)
                   for lr in (0.001, 0.1)]
        rows, best = baselines.gbt_search(x[:150], y[:150], x[150:], y[150:], configs=configs)
        assert rows[0]["rank"] == 1
        assert rows[0]["val_loss"] <= rows[1]["val_loss"]
        assert best is not None
