"""Graphs, connectivity, primary subsets, and constraint generation.

Core claims:
    - connected components and disconnected sets match hand enumerations
      (the four-vertex chain is worked through completely)
    - expanded graphs force complete blocks and enumerate primary subsets
    - constraint sets for known graphs have the exact published contents:
      the chain's five interactions, the single- and triple-constraint
      two-variable examples, and the 18-constraint three-variable model
    - Markov checks accept product tables and flag dependent ones
    - DOT and JSON serializations round-trip
"""

import numpy as np
import pytest

from helpers import random_schema
from lmlgraph.errors import DataError, SchemaError
from lmlgraph.graphs import (
    BExpandedGraph,
    BidirectedGraph,
    ConstraintSet,
    complete_expanded_graph,
    complete_graph,
    connected_components,
    constraints_for_expanded,
    constraints_for_graph,
    constraints_of,
    disconnected_sets,
    export_dot,
    graph_from_dict,
    graph_to_dict,
    holds_markov,
    import_dot,
    primary_subsets,
)
from lmlgraph.tables import ProbTable, TableSchema, VariableSpec
from lmlgraph.transform import GammaIndex


def chain4() -> BidirectedGraph:
    """1 -- 2 -- 3 -- 4."""
    return BidirectedGraph(
        (1, 2, 3, 4),
        frozenset(
            {frozenset({1, 2}), frozenset({2, 3}), frozenset({3, 4})}
        ),
    )


def binary_schema(ids) -> TableSchema:
    return TableSchema(tuple(VariableSpec(i, ("0", "1")) for i in ids))


def snp_pair_schema() -> TableSchema:
    """A 4-level variable and a 3-level variable, used in expanded tests."""
    return TableSchema(
        (
            VariableSpec(1, ("0", "I", "II", "III")),
            VariableSpec(2, ("0", "D", "R")),
        )
    )


# -- connectivity ---------------------------------------------------------------

class TestConnectivity:
    def test_chain_components_on_induced_subset(self):
        comps = connected_components(chain4(), {1, 2, 4})
        assert [set(c) for c in comps] == [{1, 2}, {4}]

    def test_complete_graph_single_component(self):
        g = complete_graph(("a", "b", "c"))
        assert len(connected_components(g, {"a", "b", "c"})) == 1

    def test_edgeless_graph_all_singletons(self):
        g = BidirectedGraph(("a", "b", "c"), frozenset())
        comps = connected_components(g, {"a", "b", "c"})
        assert [set(c) for c in comps] == [{"a"}, {"b"}, {"c"}]

    def test_chain_disconnected_sets_exact(self):
        got = {frozenset(s) for s in disconnected_sets(chain4())}
        assert got == {
            frozenset({1, 3}),
            frozenset({1, 4}),
            frozenset({2, 4}),
            frozenset({1, 2, 4}),
            frozenset({1, 3, 4}),
        }

    def test_complete_graph_has_no_disconnected_sets(self):
        assert disconnected_sets(complete_graph((1, 2, 3))) == []

    def test_two_isolated_vertices(self):
        g = BidirectedGraph(("a", "b"), frozenset())
        got = disconnected_sets(g)
        assert [set(s) for s in got] == [{"a", "b"}]

    def test_self_loops_rejected(self):
        with pytest.raises(SchemaError):
            BidirectedGraph((1, 2), frozenset({frozenset({1})}))


# -- expanded graphs --------------------------------------------------------------

class TestExpandedGraphs:
    def test_blocks_are_forced_complete(self):
        g = BExpandedGraph(
            plain=("y",),
            blocks=((("x"), ("a", "b", "c")),),
            edges=frozenset(),
        )
        for u, w in [(("x", "a"), ("x", "b")), (("x", "a"), ("x", "c"))]:
            assert g.has_edge(u, w)

    def test_within_block_edges_cannot_be_removed(self):
        g = complete_expanded_graph(snp_pair_schema(), [2])
        with pytest.raises(SchemaError):
            g.without_edges([((2, "D"), (2, "R"))])

    def test_primary_subsets_plain_graph_is_all_subsets(self):
        # with no blocks, every nonempty subset of the plain vertices counts
        schema = binary_schema(("a", "b"))
        g = complete_expanded_graph(schema, [])
        got = {frozenset(s.vertices) for s in primary_subsets(g)}
        assert got == {
            frozenset({"a"}),
            frozenset({"b"}),
            frozenset({"a", "b"}),
        }

    def test_primary_pairs_across_blocks(self):
        schema = TableSchema(
            (
                VariableSpec(1, ("0", "I", "II", "III")),
                VariableSpec(2, ("0", "D", "R")),
            )
        )
        g = complete_expanded_graph(schema, [1, 2])
        pairs = {
            frozenset(s.vertices)
            for s in primary_subsets(g)
            if len(s.vertices) == 2
        }
        assert pairs == {
            frozenset({(1, lvl), (2, ind)})
            for lvl in ("I", "II", "III")
            for ind in ("D", "R")
        }

    def test_two_levels_of_one_block_not_primary(self):
        schema = snp_pair_schema()
        g = complete_expanded_graph(schema, [2])
        assert frozenset({(2, "D"), (2, "R")}) not in {
            frozenset(s.vertices) for s in primary_subsets(g)
        }


# -- constraint generation ----------------------------------------------------------

class TestConstraints:
    def test_chain_constraints_binary(self):
        schema = binary_schema((1, 2, 3, 4))
        cons = constraints_for_graph(chain4(), schema)
        got = {(idx.vars, idx.levels) for idx in cons}
        expected_sets = [(1, 3), (1, 4), (2, 4), (1, 2, 4), (1, 3, 4)]
        assert got == {
            (vs, ("1",) * len(vs)) for vs in map(tuple, expected_sets)
        }
        assert len(cons) == 5

    def test_constraint_count_scales_with_level_products(self):
        schema = TableSchema(
            (
                VariableSpec("h", ("t", "a", "at", "te")),
                VariableSpec("i", ("l", "m", "hi")),
                VariableSpec("s", ("l", "m", "hi")),
                VariableSpec("c", ("l", "hi")),
            )
        )
        g = complete_graph(schema.ids).without_edges([("s", "c")])
        cons = constraints_for_graph(g, schema)
        # only {s, c} is disconnected: 2 x 1 level combinations
        assert len(cons) == 2

    def test_complete_graph_no_constraints(self):
        schema = binary_schema((1, 2, 3))
        assert len(constraints_for_graph(complete_graph((1, 2, 3)), schema)) == 0

    def test_expanded_single_edge_removed_three_constraints(self):
        # one plain 4-level variable, one expanded 3-level variable;
        # dropping the edge to one indicator pins one interaction per level,
        # indexed on the original variables
        schema = snp_pair_schema()
        g = complete_expanded_graph(schema, [2])
        g = g.without_edges([(1, (2, "D"))])
        cons = constraints_for_expanded(g, schema)
        got = {(idx.vars, idx.levels) for idx in cons}
        assert got == {((1, 2), (lvl, "D")) for lvl in ("I", "II", "III")}

    def test_both_expanded_single_edge_single_constraint(self):
        schema = snp_pair_schema()
        g = complete_expanded_graph(schema, [1, 2])
        g = g.without_edges([((1, "II"), (2, "R"))])
        cons = constraints_for_expanded(g, schema)
        assert len(cons) == 1
        idx = next(iter(cons))
        assert idx.vars == (1, 2)
        assert idx.levels == ("II", "R")

    def test_three_variable_expanded_model_has_18_constraints(self):
        schema = TableSchema(
            (
                VariableSpec(1, ("0", "I", "II", "III")),
                VariableSpec(2, ("0", "D2", "R2")),
                VariableSpec(3, ("0", "D3", "R3")),
            )
        )
        g = complete_expanded_graph(schema, [2, 3])
        keep = {
            frozenset({1, (2, "D2")}),
            frozenset({1, (3, "D3")}),
            frozenset({(2, "D2"), (2, "R2")}),
            frozenset({(3, "D3"), (3, "R3")}),
            frozenset({(2, "R2"), (3, "R3")}),
        }
        drop = [tuple(e) for e in g.edges if frozenset(e) not in keep]
        g = g.without_edges(drop)
        cons = constraints_for_expanded(g, schema)
        assert len(cons) == 18
        got = {(idx.vars, idx.levels) for idx in cons}
        for lvl in ("I", "II", "III"):
            assert ((1, 2), (lvl, "R2")) in got
            assert ((1, 3), (lvl, "R3")) in got
            assert ((1, 2, 3), (lvl, "R2", "R3")) in got
            assert ((1, 2, 3), (lvl, "R2", "D3")) in got
            assert ((1, 2, 3), (lvl, "D2", "R3")) in got
        assert ((2, 3), ("D2", "D3")) in got
        assert ((2, 3), ("R2", "D3")) in got
        assert ((2, 3), ("D2", "R3")) in got

    def test_expanded_no_blocks_matches_plain_generator(self):
        rng = np.random.default_rng(0)
        schema = random_schema(rng, n_vars=3, max_levels=3)
        plain = complete_graph(schema.ids).without_edges(
            [(schema.ids[0], schema.ids[1])]
        )
        expanded = complete_expanded_graph(schema, []).without_edges(
            [(schema.ids[0], schema.ids[1])]
        )
        a = constraints_for_graph(plain, schema)
        b = constraints_for_expanded(expanded, schema)
        assert a.key() == b.key()

    def test_duplicate_indices_deduplicated(self):
        schema = binary_schema((1, 2, 3))
        idx = GammaIndex((1, 2), ("1", "1"))
        cons = ConstraintSet(schema, (idx, idx))
        assert len(cons) == 1


# -- Markov checks --------------------------------------------------------------------

class TestHoldsMarkov:
    def test_product_table_passes(self):
        rng = np.random.default_rng(5)
        pa = rng.dirichlet(np.ones(2)) * 0.9 + 0.05
        pb = rng.dirichlet(np.ones(3)) * 0.9 + 0.1 / 3
        pa, pb = pa / pa.sum(), pb / pb.sum()
        schema = TableSchema(
            (VariableSpec("a", ("0", "1")), VariableSpec("b", ("0", "1", "2")))
        )
        table = ProbTable(schema, np.outer(pa, pb).ravel())
        g = BidirectedGraph(("a", "b"), frozenset())
        ok, worst = holds_markov(table, constraints_of(g, schema))
        assert ok
        assert worst <= 1e-12

    def test_dependent_table_fails(self):
        schema = TableSchema(
            (VariableSpec("a", ("0", "1")), VariableSpec("b", ("0", "1")))
        )
        table = ProbTable(schema, np.array([0.4, 0.1, 0.1, 0.4]))
        g = BidirectedGraph(("a", "b"), frozenset())
        ok, worst = holds_markov(table, constraints_of(g, schema))
        assert not ok
        assert worst > 0.1


# -- serialization -----------------------------------------------------------------------

class TestSerialization:
    def test_json_round_trip_plain(self):
        schema = binary_schema(("a", "b", "c"))
        g = complete_graph(schema.ids).without_edges([("a", "c")])
        doc = graph_to_dict(g)
        back = graph_from_dict(doc, schema)
        assert back.edges == g.edges

    def test_json_round_trip_expanded(self):
        schema = snp_pair_schema()
        g = complete_expanded_graph(schema, [2]).without_edges([(1, (2, "R"))])
        doc = graph_to_dict(g)
        back = graph_from_dict(doc, schema)
        assert isinstance(back, BExpandedGraph)
        assert back.edges == g.edges
        assert back.blocks == g.blocks

    def test_dot_round_trip_plain(self):
        g = complete_graph(("a", "b", "c")).without_edges([("a", "c")])
        text = export_dot(g)
        back = import_dot(text)
        assert {frozenset(map(str, e)) for e in back.edges} == {
            frozenset(map(str, e)) for e in g.edges
        }

    def test_dot_round_trip_expanded(self):
        schema = snp_pair_schema()
        g = complete_expanded_graph(schema, [2]).without_edges([(1, (2, "D"))])
        text = export_dot(g)
        assert "cluster" in text
        back = import_dot(text)
        assert isinstance(back, BExpandedGraph)
        assert len(back.edges) == len(g.edges)

    def test_from_dict_validates_vertices(self):
        schema = binary_schema(("a", "b"))
        doc = {
            "schema_version": 1,
            "vertices": ["a", "zz"],
            "edges": [],
            "expand": [],
        }
        with pytest.raises((SchemaError, DataError)):
            graph_from_dict(doc, schema)
