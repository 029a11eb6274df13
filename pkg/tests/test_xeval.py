import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mention_lab.xeval import (
    CrossMatrix,
    Merge,
    ProjectTable,
    auc,
    average_linkage,
    cluster_order,
    coefficient_table,
    cross_predict,
    export_coefficients,
    export_heatmap,
    fit_project_models,
    impute_absent,
    mae,
    tables_from_features,
)

from simulate import simulate_project


def pairwise_auc(labels, scores):
    """Probability a random positive outranks a random negative, ties counting one half."""
    pos = [s for l, s in zip(labels, scores) if l]
    neg = [s for l, s in zip(labels, scores) if not l]
    wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


@pytest.fixture(scope="module")
def pairs():
    tables = [simulate_project(f"p{i}", 40 + i, n=600) for i in range(4)]
    fitted, excluded = fit_project_models(tables)
    assert excluded == {}
    return fitted


class TestMetrics:
    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.booleans(), st.integers(0, 4)), min_size=2, max_size=40))
    def test_auc_matches_pairwise_count(self, data):
        labels = [l for l, _ in data]
        scores = [s for _, s in data]
        got = auc(labels, scores)
        if all(labels) or not any(labels):
            assert got is None
        else:
            assert got == pytest.approx(pairwise_auc(labels, scores))

    def test_random_scores_near_half(self, rng):
        labels = np.tile([0, 1], 5000)
        assert auc(labels, rng.random(labels.size)) == pytest.approx(0.5, abs=0.05)

    def test_true_score_beats_permuted(self, rng):
        wins = 0
        for _ in range(100):
            s = rng.standard_normal(200)
            labels = rng.random(200) < 1 / (1 + np.exp(-s))
            wins += auc(labels, s) > auc(labels, rng.permutation(s))
        assert wins >= 63  # one-sided binomial test at p < 0.01

    def test_constant_predictor_mae(self):
        y = np.array([1, 2, 5, 9])
        assert mae(y, np.full(4, 3.0)) == pytest.approx(np.mean(np.abs(y - 3.0)))


class TestProjectModels:
    def test_small_project_excluded(self):
        t = simulate_project("tiny", 1, n=10)
        assert fit_project_models([t])[1] == {"tiny": "only 10 rows (min_rows=30)"}

    def test_all_zero_excluded(self):
        t = simulate_project("zeros", 1, n=100)
        t.y[:] = 0
        assert fit_project_models([t])[1] == {"zeros": "degenerate response"}

    def test_recovery(self):
        from simulate import XEVAL_COUNT, XEVAL_ZERO
        tables = [simulate_project(f"r{i}", 70 + i, n=20_000) for i in range(2)]
        fitted, _ = fit_project_models(tables)
        for p in fitted:
            for c, v in XEVAL_ZERO.items():
                assert p.zero.coefficients[c] == pytest.approx(v, abs=4 * p.zero.std_errors[c])
            for c, v in XEVAL_COUNT.items():
                assert p.count.coefficients[c] == pytest.approx(v, abs=4 * p.count.std_errors[c])

    def test_tables_from_features(self, synth_store):
        from mention_lab.features import assemble, make_split
        from mention_lab.ingest import list_projects, load_project
        store, _, _ = synth_store
        rows = []
        for pid in list_projects(store):
            data = load_project(store, pid)
            rows += assemble(data, make_split(data))
        tables = tables_from_features(rows)
        assert [t.project for t in tables] == sorted({r.project for r in rows})
        assert sum(len(t.y) for t in tables) == len(rows)


class TestCrossPredict:
    def test_symmetric_with_in_sample_diagonal(self, pairs):
        count, zero = cross_predict(pairs)
        for m in (count, zero):
            assert np.array_equal(m.values, m.values.T)
        for i, p in enumerate(pairs):
            pred, obs = p.count_predictions(p.table)
            assert count.values[i, i] == mae(obs, pred)
            assert zero.values[i, i] == auc(p.table.y > 0, p.zero_scores(p.table))
        assert np.all((zero.values >= 0) & (zero.values <= 1))

    def test_cell_is_mean_of_both_directions(self, pairs):
        count, zero = cross_predict(pairs)
        a, b = pairs[0], pairs[2]
        ab = auc(b.table.y > 0, a.zero_scores(b.table))
        ba = auc(a.table.y > 0, b.zero_scores(a.table))
        assert zero.values[0, 2] == pytest.approx((ab + ba) / 2)

    def test_removing_a_project(self, pairs):
        full_c, full_z = cross_predict(pairs)
        sub_c, sub_z = cross_predict(pairs[:2] + pairs[3:])
        keep = [0, 1, 3]
        assert np.array_equal(sub_c.values, full_c.values[np.ix_(keep, keep)])
        assert np.array_equal(sub_z.values, full_z.values[np.ix_(keep, keep)])

    def test_one_class_target_is_absent(self, pairs):
        t = pairs[0].table
        single = ProjectTable("ones", {c: v.copy() for c, v in t.columns.items()}, np.maximum(t.y, 1))
        fake = type(pairs[0])("ones", pairs[0].zero, pairs[0].count, single)
        _, zero = cross_predict([pairs[1], fake])
        assert np.isnan(zero.values[1, 1])
        assert np.isfinite(zero.values[0, 0])

    def test_needs_two(self, pairs):
        with pytest.raises(ValueError):
            cross_predict(pairs[:1])

    def test_coefficient_table(self, pairs):
        projects, names, values = coefficient_table(pairs, "zero")
        assert values.shape == (len(pairs), len(names)) and names[0] == "intercept"


class TestClustering:
    def test_three_point_hand_dendrogram(self):
        d = np.array([[0, 1, 4], [1, 0, 5], [4, 5, 0]], dtype=float)
        order, merges = average_linkage(d, ["a", "b", "c"])
        assert merges == [Merge(0, 1, 1.0, 2), Merge(3, 2, 4.5, 3)]
        assert order == [0, 1, 2]

    def test_identical_projects_merge_first(self):
        d = np.array([[0, 3, 0], [3, 0, 3], [0, 3, 0]], dtype=float)
        _, merges = average_linkage(d, ["x", "y", "z"])
        assert {merges[0].left, merges[0].right} == {0, 2} and merges[0].height == 0

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        pts = rng.standard_normal((n, 2))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        labels = [f"p{i}" for i in range(n)]
        order, _ = average_linkage(d, labels)
        perm = rng.permutation(n)
        order2, _ = average_linkage(d[np.ix_(perm, perm)], [labels[k] for k in perm])
        assert [labels[perm[k]] for k in order2] == [labels[k] for k in order]

    def test_single_project_identity(self):
        m = CrossMatrix(["only"], np.array([[0.7]]), "mean_auc")
        assert cluster_order(m) == [0]

    def test_impute_absent(self):
        v = np.array([[1.0, np.nan, 3.0], [2.0, 1.0, 5.0], [4.0, 6.0, 1.0]])
        out = impute_absent(v)
        assert out[0, 1] == 6.0  # the only finite off-diagonal cell of column 1


class TestHeatmaps:
    def _matrix(self, values, metric="mean_mae"):
        values = np.asarray(values, dtype=float)
        names = [f"p{i}" for i in range(len(values))]
        m = CrossMatrix(names, values, metric)
        m.dendrogram_order = cluster_order(m)
        return m

    def test_two_by_two_csv(self, tmp_path):
        csv_path, svg_path = export_heatmap(self._matrix([[1, 2], [2, 1]]), None, tmp_path / "m")
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 3 and lines[0].startswith("project")
        assert svg_path.read_text().startswith("<?xml")

    def test_byte_identical(self, tmp_path):
        m = self._matrix([[0.9, 0.8, 0.6], [0.8, 0.9, 0.7], [0.6, 0.7, 0.95]], "mean_auc")
        a = export_heatmap(m, None, tmp_path / "a")
        b = export_heatmap(m, None, tmp_path / "b")
        for x, y in zip(a, b):
            assert x.read_bytes() == y.read_bytes()

    def test_absent_cells(self, tmp_path):
        m = self._matrix([[0.9, np.nan], [np.nan, 0.8]], "mean_auc")
        csv_path, svg_path = export_heatmap(m, [0, 1], tmp_path / "z.csv")
        rows = list(csv.reader(csv_path.open()))
        assert rows[1][2] == "" and rows[2][1] == ""
        assert svg_path.read_text().count('fill="url(#hatch)"') == 2

    def test_order_applied(self, tmp_path):
        m = self._matrix([[1, 5, 2], [5, 1, 6], [2, 6, 1]])
        csv_path, _ = export_heatmap(m, [2, 0, 1], tmp_path / "o")
        assert csv_path.read_text().splitlines()[0] == "project,p2,p0,p1"

    def test_unwritable_path(self, tmp_path):
        with pytest.raises(OSError):
            export_heatmap(self._matrix([[1, 2], [2, 1]]), None, tmp_path / "missing" / "m")

    def test_coefficients(self, tmp_path, pairs):
        projects, names, values = coefficient_table(pairs, "count")
        csv_path, svg_path = export_coefficients(projects, names, values, tmp_path / "coef", "count")
        rows = list(csv.reader(csv_path.open()))
        assert rows[0] == ["project", *names]
        assert sorted(r[0] for r in rows[1:]) == sorted(projects)
