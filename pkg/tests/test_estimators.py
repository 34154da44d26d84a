"""Estimator protocol wrappers.

Core claims:
    - the usual protocol holds: get_params round trips, clone resets,
      unfitted estimators refuse to score
    - raw label rows are validated, cross-tabulated, and scored exactly
      as the underlying count-table machinery would
    - sampling is seeded and emits only labels the schema knows
    - the search estimator recovers a planted independence
"""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from helpers import random_counts, random_schema
from lmlgraph.errors import DataError, SchemaError
from lmlgraph.estimators import (
    GraphSearch,
    LmlGraphModel,
    check_categorical_array,
    observations_to_table,
    schema_from_observations,
)
from lmlgraph.graphs import BidirectedGraph, complete_graph, graph_to_dict


def label_rows(rng, n=1200):
    """Rows from two independent variables and one coin-flip copy."""
    a = rng.choice(["no", "yes"], size=n, p=[0.4, 0.6])
    b = rng.choice(["lo", "mid", "hi"], size=n, p=[0.3, 0.4, 0.3])
    noisy = rng.random(n) < 0.15
    c = np.where(noisy, rng.choice(["no", "yes"], size=n), a)
    return np.column_stack([a, b, c])


class TestValidation:
    def test_one_dimensional_input_becomes_a_column(self):
        X = check_categorical_array(["a", "b", "a"])
        assert X.shape == (3, 1)

    def test_missing_values_rejected(self):
        with pytest.raises(DataError, match="missing"):
            check_categorical_array([["a", None], ["b", "c"]])
        with pytest.raises(DataError, match="missing"):
            check_categorical_array([["a", float("nan")], ["b", "c"]])

    def test_wrong_rank_rejected(self):
        with pytest.raises(DataError):
            check_categorical_array(np.zeros((2, 2, 2), dtype=object))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            check_categorical_array(np.empty((0, 3), dtype=object))

    def test_schema_sorts_levels_and_honors_baselines(self):
        X = check_categorical_array([["b", "1"], ["a", "2"], ["c", "1"]])
        schema = schema_from_observations(
            X, var_names=["u", "v"], baselines={"u": "c"}
        )
        u, v = schema.vars
        assert u.levels == ("a", "b", "c")
        assert u.baseline_level == "c"
        assert v.baseline_level == "1"

    def test_single_level_column_rejected(self):
        X = check_categorical_array([["a", "1"], ["a", "2"]])
        with pytest.raises(DataError, match="one level"):
            schema_from_observations(X)

    def test_unseen_baseline_rejected(self):
        X = check_categorical_array([["a", "1"], ["b", "2"]])
        with pytest.raises(SchemaError, match="never observed"):
            schema_from_observations(X, baselines={"x0": "z"})

    def test_tabulation_counts_every_row(self):
        X = check_categorical_array([["a", "1"], ["b", "2"], ["a", "1"]])
        schema = schema_from_observations(X)
        table = observations_to_table(X, schema)
        assert table.n == 3
        assert table.counts[schema.flat_index((0, 0))] == 2

    def test_unknown_label_rejected_at_tabulation(self):
        X = check_categorical_array([["a", "1"], ["b", "2"]])
        schema = schema_from_observations(X)
        with pytest.raises(DataError, match="no level"):
            observations_to_table([["z", "1"]], schema)


class TestLmlGraphModel:
    def test_params_round_trip_and_clone(self):
        est = LmlGraphModel(tol=1e-6, max_iter=77)
        assert est.get_params()["tol"] == 1e-6
        est.set_params(max_iter=99)
        assert est.max_iter == 99
        rng = np.random.default_rng(0)
        est.fit(label_rows(rng))
        fresh = clone(est)
        assert fresh.get_params() == est.get_params()
        assert not hasattr(fresh, "result_")

    def test_unfitted_refuses_to_score(self):
        with pytest.raises(NotFittedError):
            LmlGraphModel().score_samples([["no", "lo", "no"]])
        with pytest.raises(NotFittedError):
            LmlGraphModel().sample(3)

    def test_saturated_default(self):
        rng = np.random.default_rng(1)
        est = LmlGraphModel().fit(label_rows(rng))
        assert est.deviance_ == 0.0
        assert est.df_ == 0
        assert est.converged_
        assert est.n_obs_ == 1200

    def test_graph_as_object_and_as_dict_agree(self):
        rng = np.random.default_rng(2)
        X = label_rows(rng)
        graph = complete_graph(("x0", "x1", "x2")).without_edges(
            [("x0", "x1")]
        )
        by_object = LmlGraphModel(graph=graph).fit(X)
        by_dict = LmlGraphModel(graph=graph_to_dict(graph)).fit(X)
        assert by_dict.deviance_ == pytest.approx(by_object.deviance_)
        assert by_dict.df_ == by_object.df_

    def test_count_table_passthrough(self):
        rng = np.random.default_rng(3)
        schema = random_schema(rng, n_vars=2, max_levels=3)
        data = random_counts(rng, schema, n=2000)
        est = LmlGraphModel(
            graph=BidirectedGraph(schema.ids, frozenset())
        ).fit(data)
        assert est.schema_ is schema
        assert est.n_obs_ == data.n

    def test_score_samples_match_fitted_probabilities(self):
        rng = np.random.default_rng(4)
        X = label_rows(rng)
        est = LmlGraphModel().fit(X)
        scores = est.score_samples(X[:5])
        for row, got in zip(X[:5], scores):
            cell = tuple(
                v.levels.index(str(lbl))
                for v, lbl in zip(est.schema_.vars, row)
            )
            expected = np.log(
                est.fitted_table_.probs[est.schema_.flat_index(cell)]
            )
            assert got == pytest.approx(expected)
        assert est.score(X) == pytest.approx(float(np.mean(est.score_samples(X))))

    def test_sampling_is_seeded_and_in_vocabulary(self):
        rng = np.random.default_rng(5)
        est = LmlGraphModel().fit(label_rows(rng))
        first = est.sample(50, random_state=11)
        second = est.sample(50, random_state=11)
        assert (first == second).all()
        for k, v in enumerate(est.schema_.vars):
            assert set(first[:, k]) <= set(v.levels)

    def test_column_count_checked_at_scoring(self):
        rng = np.random.default_rng(6)
        est = LmlGraphModel().fit(label_rows(rng))
        with pytest.raises(SchemaError, match="columns"):
            est.score_samples([["no", "lo"]])

    def test_bad_graph_type_rejected(self):
        rng = np.random.default_rng(7)
        with pytest.raises(SchemaError):
            LmlGraphModel(graph="nope").fit(label_rows(rng))


class TestGraphSearch:
    def test_recovers_planted_independence(self):
        rng = np.random.default_rng(7)
        pa = np.array([0.45, 0.55])
        pbc = np.array([[0.5, 0.2], [0.1, 0.2]])  # b, c dependent
        probs = np.einsum("i,jk->ijk", pa, pbc).reshape(-1)
        rows = []
        labels = [("n", "y")] * 3
        cells = rng.choice(8, size=5000, p=probs)
        for flat in cells:
            i, j, k = flat // 4, (flat // 2) % 2, flat % 2
            rows.append([labels[0][i], labels[1][j], labels[2][k]])
        est = GraphSearch(seed=0).fit(np.array(rows, dtype=object))
        got = sorted(
            tuple(sorted((str(u), str(w)))) for u, w in est.graph_.edges
        )
        assert got == [("x1", "x2")]
        assert est.converged_
        assert est.p_value_ >= 0.05

    def test_trace_and_summaries_exposed(self):
        rng = np.random.default_rng(8)
        est = GraphSearch().fit(label_rows(rng))
        assert est.trace_.final is est.result_
        assert est.df_ == est.result_.df
        assert np.isfinite(est.score(label_rows(rng, n=50)))

    def test_unfitted_refuses_to_score(self):
        with pytest.raises(NotFittedError):
            GraphSearch().score_samples([["no", "lo", "no"]])

    def test_clone_keeps_hyperparameters(self):
        est = GraphSearch(alpha=0.17, max_orderings=3, seed=5)
        fresh = clone(est)
        assert fresh.get_params()["alpha"] == 0.17
        assert fresh.get_params()["max_orderings"] == 3
