"""Forest training, importance, and report behavior."""

import numpy as np
import pytest

from innoscape import rng
from innoscape.errors import (
    ConfigError,
    DimensionMismatchError,
    TooFewRowsError,
)
from innoscape.forest import (
    ForestParams,
    LeafNode,
    SplitNode,
    best_split,
    fit_forest,
    fit_tree,
    forest_to_text,
    importance_detail_text,
    seed_averaged_importance,
)


def small_data(seed=3, n=24, p=4):
    rs = np.random.RandomState(seed)
    X = rs.randint(0, 9, size=(n, p)).astype(np.float64)
    y = rs.randint(0, 6, size=n).astype(np.float64)
    return X, y


class TestParams:
    def test_defaults(self):
        p = ForestParams()
        assert (p.n_trees, p.min_samples_split, p.n_seeds) == (1000, 2, 8)
        assert p.mtry is None and p.max_depth is None

    @pytest.mark.parametrize(
        "kw",
        [
            {"n_trees": 0},
            {"mtry": 0},
            {"min_samples_split": 1},
            {"max_depth": 0},
            {"n_seeds": 0},
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            ForestParams(**kw)

    def test_resolved_mtry_third_rounded_up(self):
        p = ForestParams()
        assert p.resolved_mtry(1) == 1
        assert p.resolved_mtry(3) == 1
        assert p.resolved_mtry(4) == 2
        assert p.resolved_mtry(35) == 12

    def test_pinned_mtry(self):
        assert ForestParams(mtry=5).resolved_mtry(9) == 5
        with pytest.raises(ConfigError):
            ForestParams(mtry=5).resolved_mtry(4)


class TestFit:
    def test_same_key_same_forest(self):
        X, y = small_data()
        a = fit_forest(X, y, ForestParams(n_trees=6), 41)
        b = fit_forest(X, y, ForestParams(n_trees=6), 41)
        assert np.array_equal(a.node_counts, b.node_counts)
        assert np.array_equal(a.bootstrap_indices, b.bootstrap_indices)
        # slabs are compared over the live node prefix; the tail past
        # node_counts[t] is never written or read
        for t in range(6):
            c = int(a.node_counts[t])
            for name in ("feature", "threshold", "left", "right", "value",
                         "nsamp", "weighted_decrease"):
                assert np.array_equal(
                    getattr(a, name)[t, :c], getattr(b, name)[t, :c]
                ), name

    def test_different_key_different_forest(self):
        X, y = small_data()
        a = fit_forest(X, y, ForestParams(n_trees=6), 41)
        b = fit_forest(X, y, ForestParams(n_trees=6), 42)
        assert not np.array_equal(a.bootstrap_indices, b.bootstrap_indices)

    def test_too_few_rows(self):
        with pytest.raises(TooFewRowsError):
            fit_forest(np.zeros((1, 2)), np.zeros(1), ForestParams(n_trees=1), 1)

    def test_rejects_nonfinite(self):
        X, y = small_data()
        X = X.copy()
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            fit_forest(X, y, ForestParams(n_trees=1), 1)

    def test_rejects_length_mismatch(self):
        X, y = small_data()
        with pytest.raises(DimensionMismatchError):
            fit_forest(X, y[:-1], ForestParams(n_trees=1), 1)

    def test_max_depth_one_gives_stumps(self):
        X, y = small_data()
        m = fit_tree(X, y, ForestParams(n_trees=1, max_depth=1), 99)
        root = m.tree_nodes(0)
        assert isinstance(root, SplitNode)
        assert isinstance(root.left, LeafNode)
        assert isinstance(root.right, LeafNode)

    def test_min_samples_split_makes_root_leaf(self):
        X, y = small_data(n=6)
        m = fit_tree(X, y, ForestParams(n_trees=1, min_samples_split=7), 5)
        assert isinstance(m.tree_nodes(0), LeafNode)

    def test_constant_target_is_single_leaf(self):
        X, _ = small_data()
        y = np.full(X.shape[0], 3.5)
        m = fit_tree(X, y, ForestParams(n_trees=1), 5)
        root = m.tree_nodes(0)
        assert isinstance(root, LeafNode)
        assert root.value == 3.5


class TestPredict:
    def test_routing_matches_manual_walk(self):
        X, y = small_data()
        m = fit_forest(X, y, ForestParams(n_trees=5), 7)
        got = m.predict(X)

        def walk(t, row):
            node = 0
            while int(m.feature[t, node]) >= 0:
                f = int(m.feature[t, node])
                if row[f] <= m.threshold[t, node]:
                    node = int(m.left[t, node])
                else:
                    node = int(m.right[t, node])
            return float(m.value[t, node])

        for i in range(X.shape[0]):
            s = 0.0
            for t in range(5):
                s += walk(t, X[i])
            assert got[i] == pytest.approx(s / 5.0, abs=1e-12)

    def test_dimension_check(self):
        X, y = small_data()
        m = fit_forest(X, y, ForestParams(n_trees=2), 7)
        with pytest.raises(DimensionMismatchError):
            m.predict(X[:, :2])


class TestImportance:
    def test_normalized_or_degenerate(self):
        X, y = small_data()
        m = fit_forest(X, y, ForestParams(n_trees=8), 3)
        imp, degenerate = m.mdi_importance()
        assert not degenerate
        assert float(np.sum(imp)) == pytest.approx(1.0, abs=1e-12)
        assert np.all(imp >= 0)

    def test_constant_target_degenerate(self):
        X, _ = small_data()
        y = np.full(X.shape[0], 2.0)
        m = fit_forest(X, y, ForestParams(n_trees=4), 3)
        imp, degenerate = m.mdi_importance()
        assert degenerate
        assert np.all(imp == 0.0)

    def test_cached(self):
        X, y = small_data()
        m = fit_forest(X, y, ForestParams(n_trees=4), 3)
        a = m.mdi_importance()
        b = m.mdi_importance()
        assert a[0] is b[0]


class TestSeedAveraged:
    def test_seed_keys_and_mean(self):
        X, y = small_data(n=30)
        params = ForestParams(n_trees=5, n_seeds=3)
        rep, models = seed_averaged_importance(
            X, y, [f"f{i}" for i in range(X.shape[1])], params, 123,
            outcome="t", scope="S", keep_models=True
        )
        assert rep.per_seed.shape == (3, X.shape[1])
        for s, model in enumerate(models):
            assert model.forest_key == rng.fold(123, s)
        want = np.zeros(X.shape[1])
        for vec in rep.per_seed:
            want = want + np.asarray(vec)
        want = want / 3
        assert np.max(np.abs(rep.mean_importance - want)) <= 1e-15

    def test_degenerate_seed_tracking(self):
        X, _ = small_data()
        y = np.full(X.shape[0], 1.0)
        rep = seed_averaged_importance(
            X, y, [f"f{i}" for i in range(X.shape[1])],
            ForestParams(n_trees=2, n_seeds=2), 1, outcome="t", scope="S"
        )
        assert rep.degenerate
        assert rep.degenerate_seeds == (True, True)

    def test_ranking_tie_break_keeps_catalog_order(self):
        X, y = small_data(n=40)
        names = ["a", "b", "c", "d"]
        rep = seed_averaged_importance(
            X, y, names,
            ForestParams(n_trees=3, n_seeds=2), 9, outcome="t", scope="S"
        )
        ranking = rep.ranking()
        assert [r for r, _, _ in ranking] == [1, 2, 3, 4]
        means = [m for _, _, m in ranking]
        assert means == sorted(means, reverse=True)
        for (_, n1, m1), (_, n2, m2) in zip(ranking, ranking[1:]):
            if m1 == m2:
                assert names.index(n1) < names.index(n2)


class TestText:
    def test_detail_text_layout(self):
        X, y = small_data()
        rep = seed_averaged_importance(
            X, y, ["a", "b", "c", "d"],
            ForestParams(n_trees=2, n_seeds=2), 9, outcome="t", scope="S"
        )
        text = importance_detail_text(rep)
        lines = text.splitlines()
        head = lines[0].split("\t")
        assert head[:3] == ["feature", "mean_importance", "rank"]
        assert head[3:] == ["seed_0", "seed_1"]
        assert len(lines) == 5
        # floats serialized with repr for exact round-trips
        cell = lines[1].split("\t")[1]
        assert float(cell) == float(repr(float(cell)))

    def test_forest_dump_mentions_every_tree(self):
        X, y = small_data(n=8)
        m = fit_forest(X, y, ForestParams(n_trees=3), 2)
        text = forest_to_text(m)
        for t in range(3):
            assert f"tree {t}" in text
        assert forest_to_text(m, max_trees=1).count("tree ") < text.count("tree ")


class TestBestSplitReference:
    def test_matches_kernel_choice_on_root(self):
        X, y = small_data(n=12, p=3)
        m = fit_tree(X, y, ForestParams(n_trees=1), 31)
        from innoscape.forest_oracle import replay_candidates

        boot = [int(i) for i in m.bootstrap_indices[0]]
        cands = replay_candidates(31, 0, 3, m.mtry)
        ref = best_split(X, y, boot, cands)
        assert ref is not None
        f, thr, _gain = ref
        assert f == int(m.feature[0, 0])
        assert thr == float(m.threshold[0, 0])

    def test_no_split_when_constant(self):
        X = np.asarray([[1.0], [1.0], [1.0]])
        y = np.asarray([1.0, 2.0, 3.0])
        assert best_split(X, y, [0, 1, 2], [0]) is None
