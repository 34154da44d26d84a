"""Bi-directed graphs, expanded graphs, and their independence constraints.

A bi-directed graph encodes marginal independences: a subset of vertices
whose induced subgraph is disconnected splits into mutually independent
groups.  For tables this pins interactions to zero, one per disconnected
subset and per choice of non-baseline levels (:func:`constraints_for_graph`).

An expanded graph replaces each variable in a chosen set ``B`` by one
vertex per non-baseline level, keeping every within-variable block
complete.  Constraints then come only from *primary* subsets (at most one
vertex per block): a primary subset splits as plain variables ``Q`` plus
one selected level ``j_D`` for expanded variables ``D``, and if it is
disconnected, the interactions ``(Q + D, j_Q + j_D)`` vanish for every
choice of non-baseline ``j_Q`` (:func:`constraints_for_expanded`).  Working
per level makes the constraint set independent of how the expanded
variables would be dichotomized, which is the point of the construction.

Serialization: a JSON document ``{"vertices", "edges", "expand"}`` where
expanded vertices are named ``"<var>.<level>"``, and a GraphViz DOT
export (bi-directed edges drawn with ``dir=both``, blocks as clusters)
with a matching importer.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DataError, NonPositiveTableError, SchemaError
from .tables import ProbTable, TableSchema, expanded_variable_id
from .transform import GammaIndex, prob_to_lml

__all__ = [
    "BidirectedGraph",
    "BExpandedGraph",
    "PrimarySubset",
    "ConstraintSet",
    "connected_components",
    "disconnected_sets",
    "primary_subsets",
    "constraints_for_graph",
    "constraints_for_expanded",
    "constraints_of",
    "holds_markov",
    "complete_graph",
    "complete_expanded_graph",
    "graph_to_dict",
    "graph_from_dict",
    "export_dot",
    "import_dot",
]

ENUMERATION_LIMIT = 24  # exhaustive subset enumeration caps at 2**24


def _normalize_edges(vertices: tuple, edges: Iterable) -> frozenset:
    pos = {v: k for k, v in enumerate(vertices)}
    out = set()
    for e in edges:
        try:
            u, w = e
        except (TypeError, ValueError):
            raise SchemaError(f"edge {e!r} is not a pair") from None
        if u not in pos or w not in pos:
            raise SchemaError(f"edge {e!r} mentions unknown vertices")
        if u == w:
            raise SchemaError(f"self-loop on {u!r}")
        out.add((u, w) if pos[u] < pos[w] else (w, u))
    return frozenset(out)


@dataclass(frozen=True)
class BidirectedGraph:
    """Undirected simple graph read under the bi-directed interpretation."""

    vertices: tuple
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        vertices = tuple(self.vertices)
        if len(set(vertices)) != len(vertices):
            raise SchemaError("duplicate vertices")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", _normalize_edges(vertices, self.edges))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for u, w in self.edges:
            adj[u].add(w)
            adj[w].add(u)
        return adj

    def has_edge(self, u, w) -> bool:
        return (u, w) in self.edges or (w, u) in self.edges

    def without_edges(self, drop: Iterable) -> "BidirectedGraph":
        dropped = _normalize_edges(self.vertices, drop)
        return BidirectedGraph(self.vertices, self.edges - dropped)


@dataclass(frozen=True)
class BExpandedGraph:
    """Graph over plain variables plus one vertex per expanded level.

    ``blocks`` maps each expanded variable to its tuple of levels; the
    vertex for level ``l`` of variable ``v`` is the pair ``(v, l)``.
    Within-block edges are present by construction and cannot be removed.
    """

    plain: tuple
    blocks: tuple  # ((var_id, (level, ...)), ...) in schema order
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        plain = tuple(self.plain)
        blocks = tuple((v, tuple(levels)) for v, levels in self.blocks)
        for v, levels in blocks:
            if not levels:
                raise SchemaError(f"expanded variable {v!r} has no levels")
        ids = list(plain) + [v for v, _ in blocks]
        if len(set(ids)) != len(ids):
            raise SchemaError("a variable cannot be both plain and expanded")
        object.__setattr__(self, "plain", plain)
        object.__setattr__(self, "blocks", blocks)
        vertices = self.vertex_order()
        edges = _normalize_edges(vertices, self.edges)
        # block completeness is part of the construction, not a choice
        for v, levels in blocks:
            for a, b in itertools.combinations(levels, 2):
                pair = (expanded_variable_id(v, a), expanded_variable_id(v, b))
                edges = edges | _normalize_edges(vertices, [pair])
        object.__setattr__(self, "edges", edges)

    def vertex_order(self) -> tuple:
        order: list = list(self.plain)
        for v, levels in self.blocks:
            order.extend(expanded_variable_id(v, l) for l in levels)
        return tuple(order)

    @property
    def vertices(self) -> tuple:
        return self.vertex_order()

    @property
    def expanded_vars(self) -> tuple:
        return tuple(v for v, _ in self.blocks)

    def block_of(self, var_id) -> tuple:
        """Vertices standing for ``var_id``: itself, or its level vertices."""
        if var_id in self.plain:
            return (var_id,)
        for v, levels in self.blocks:
            if v == var_id:
                return tuple(expanded_variable_id(v, l) for l in levels)
        raise SchemaError(f"unknown variable {var_id!r}")

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for u, w in self.edges:
            adj[u].add(w)
            adj[w].add(u)
        return adj

    def has_edge(self, u, w) -> bool:
        return (u, w) in self.edges or (w, u) in self.edges

    def edges_between(self, var_u, var_w) -> tuple:
        """Edges joining the blocks of two variables, in canonical order."""
        bu, bw = set(self.block_of(var_u)), set(self.block_of(var_w))
        picked = [
            e
            for e in self.edges
            if (e[0] in bu and e[1] in bw) or (e[0] in bw and e[1] in bu)
        ]
        pos = {v: k for k, v in enumerate(self.vertices)}
        picked.sort(key=lambda e: (pos[e[0]], pos[e[1]]))
        return tuple(picked)

    def without_edges(self, drop: Iterable) -> "BExpandedGraph":
        dropped = _normalize_edges(self.vertices, drop)
        blocked = set()
        for v, levels in self.blocks:
            for a, b in itertools.combinations(levels, 2):
                blocked.add(
                    tuple(
                        sorted(
                            (expanded_variable_id(v, a), expanded_variable_id(v, b)),
                            key=self.vertices.index,
                        )
                    )
                )
        if dropped & blocked:
            raise SchemaError("within-block edges cannot be removed")
        return BExpandedGraph(self.plain, self.blocks, self.edges - dropped)


def complete_graph(vertices: Sequence) -> BidirectedGraph:
    vertices = tuple(vertices)
    return BidirectedGraph(vertices, frozenset(itertools.combinations(vertices, 2)))


def complete_expanded_graph(schema: TableSchema, expand_vars: Iterable) -> BExpandedGraph:
    """Fully connected expanded graph; ``expand_vars`` may be empty."""
    expand = list(dict.fromkeys(expand_vars))
    unknown = set(expand) - set(schema.ids)
    if unknown:
        raise SchemaError(f"unknown variables {sorted(map(str, unknown))!r}")
    plain = tuple(v.id for v in schema.vars if v.id not in set(expand))
    blocks = tuple(
        (v.id, v.nonbaseline_levels) for v in schema.vars if v.id in set(expand)
    )
    g = BExpandedGraph(plain, blocks, frozenset())
    return BExpandedGraph(
        plain, blocks, frozenset(itertools.combinations(g.vertex_order(), 2))
    )


# ---------------------------------------------------------------------------
# connectivity


def _components(adj: Mapping, subset: Iterable) -> list[frozenset]:
    subset = set(subset)
    seen: set = set()
    comps = []
    for start in subset:
        if start in seen:
            continue
        stack = [start]
        comp = set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(w for w in adj[v] if w in subset and w not in comp)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def connected_components(
    graph: BidirectedGraph | BExpandedGraph, subset: Iterable | None = None
) -> list[frozenset]:
    """Components of the subgraph induced by ``subset`` (default: all).

    Ordered by first appearance in the graph's vertex order.
    """
    vertices = graph.vertices
    if subset is None:
        subset = vertices
    else:
        subset = list(subset)
        unknown = set(subset) - set(vertices)
        if unknown:
            raise SchemaError(f"unknown vertices {sorted(map(str, unknown))!r}")
    pos = {v: k for k, v in enumerate(vertices)}
    comps = _components(graph.adjacency(), subset)
    comps.sort(key=lambda c: min(pos[v] for v in c))
    return comps


def _is_connected(adj: Mapping, subset: set) -> bool:
    it = iter(subset)
    start = next(it)
    stack = [start]
    seen = set()
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        stack.extend(w for w in adj[v] if w in subset and w not in seen)
    return len(seen) == len(subset)


def disconnected_sets(graph: BidirectedGraph | BExpandedGraph) -> list[frozenset]:
    """All vertex subsets whose induced subgraph is disconnected.

    Exhaustive over ``2**n`` subsets; refuses more than
    ``ENUMERATION_LIMIT`` vertices.  Ordered by size, then vertex
    positions.
    """
    vertices = graph.vertices
    n = len(vertices)
    if n > ENUMERATION_LIMIT:
        raise SchemaError(
            f"subset enumeration over {n} vertices exceeds the "
            f"{ENUMERATION_LIMIT}-vertex limit"
        )
    adj = graph.adjacency()
    out = []
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            subset = {vertices[k] for k in combo}
            if not _is_connected(adj, subset):
                out.append(frozenset(subset))
    return out


# ---------------------------------------------------------------------------
# primary subsets and constraints


@dataclass(frozen=True)
class PrimarySubset:
    """A subset with at most one vertex per expanded block, decomposed.

    ``plain`` are the plain variables it contains (``Q``); ``expanded``
    and ``levels`` give the selected level per expanded variable
    (``j_D``).
    """

    plain: tuple
    expanded: tuple
    levels: tuple

    @property
    def vertices(self) -> frozenset:
        return frozenset(self.plain) | {
            expanded_variable_id(v, l) for v, l in zip(self.expanded, self.levels)
        }

    @property
    def size(self) -> int:
        return len(self.plain) + len(self.expanded)


def primary_subsets(graph: BExpandedGraph) -> list[PrimarySubset]:
    """All nonempty primary subsets, by size then vertex positions."""
    choices: list[list] = []
    n_primary = 1
    for v in graph.plain:
        choices.append([None, ("plain", v)])
        n_primary *= 2
    for v, levels in graph.blocks:
        choices.append([None] + [("level", v, l) for l in levels])
        n_primary *= 1 + len(levels)
    if n_primary > (1 << ENUMERATION_LIMIT):
        raise SchemaError("primary subset enumeration exceeds the size limit")
    out = []
    for combo in itertools.product(*choices):
        plain = tuple(c[1] for c in combo if c and c[0] == "plain")
        expanded = tuple(c[1] for c in combo if c and c[0] == "level")
        levels = tuple(c[2] for c in combo if c and c[0] == "level")
        if not plain and not expanded:
            continue
        out.append(PrimarySubset(plain, expanded, levels))
    pos = {v: k for k, v in enumerate(graph.vertices)}
    out.sort(key=lambda s: (s.size, tuple(sorted(pos[v] for v in s.vertices))))
    return out


@dataclass(frozen=True)
class ConstraintSet:
    """Interactions pinned to zero, canonically ordered and deduplicated."""

    schema: TableSchema
    indices: tuple

    def __post_init__(self) -> None:
        from .transform import cell_of_index

        seen = {}
        for idx in self.indices:
            if not isinstance(idx, GammaIndex):
                raise SchemaError(f"{idx!r} is not an interaction index")
            cell_of_index(self.schema, idx)  # validates against the schema
            seen[idx] = None
        ordered = sorted(seen, key=lambda i: _index_sort_key(self.schema, i))
        object.__setattr__(self, "indices", tuple(ordered))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, idx) -> bool:
        return idx in set(self.indices)

    def key(self) -> tuple:
        return tuple(idx.as_key() for idx in self.indices)


def _index_sort_key(schema: TableSchema, idx: GammaIndex) -> tuple:
    var_pos = tuple(schema.position(v) for v in idx.vars)
    lvl_pos = tuple(
        schema.var(v).levels.index(l) for v, l in zip(idx.vars, idx.levels)
    )
    return (len(var_pos), var_pos, lvl_pos)


def _level_products(schema: TableSchema, var_ids: Sequence) -> Iterable[tuple]:
    pools = [schema.var(v).nonbaseline_levels for v in var_ids]
    return itertools.product(*pools)


def constraints_for_graph(graph: BidirectedGraph, schema: TableSchema) -> ConstraintSet:
    """Zero interactions induced by a plain graph over schema variables.

    One index per disconnected subset ``U`` and per assignment of
    non-baseline levels to ``U``.
    """
    unknown = set(graph.vertices) - set(schema.ids)
    if unknown:
        raise SchemaError(
            f"graph vertices {sorted(map(str, unknown))!r} are not schema variables"
        )
    indices = []
    order = {v: k for k, v in enumerate(schema.ids)}
    for subset in disconnected_sets(graph):
        var_ids = tuple(sorted(subset, key=order.__getitem__))
        for levels in _level_products(schema, var_ids):
            indices.append(GammaIndex(var_ids, levels))
    return ConstraintSet(schema, tuple(indices))


def constraints_for_expanded(graph: BExpandedGraph, schema: TableSchema) -> ConstraintSet:
    """Zero interactions induced by an expanded graph.

    Only disconnected *primary* subsets contribute: for the decomposition
    ``(Q, D, j_D)`` the pinned indices are ``(Q + D, j_Q + j_D)`` over all
    non-baseline assignments ``j_Q``; the union over subsets is
    deduplicated.
    """
    for v in graph.plain:
        schema.position(v)
    for v, levels in graph.blocks:
        spec = schema.var(v)
        if tuple(levels) != spec.nonbaseline_levels:
            raise SchemaError(
                f"expanded variable {v!r} must carry exactly the non-baseline "
                f"levels {spec.nonbaseline_levels!r} (got {tuple(levels)!r})"
            )
    adj = graph.adjacency()
    order = {v: k for k, v in enumerate(schema.ids)}
    indices = []
    for prim in primary_subsets(graph):
        if prim.size < 2:
            continue
        if _is_connected(adj, prim.vertices):
            continue
        assigned = dict(zip(prim.expanded, prim.levels))
        var_ids = tuple(sorted(prim.plain + prim.expanded, key=order.__getitem__))
        free = tuple(v for v in var_ids if v not in assigned)
        for q_levels in _level_products(schema, free):
            q_assigned = dict(zip(free, q_levels))
            levels = tuple(
                assigned[v] if v in assigned else q_assigned[v] for v in var_ids
            )
            indices.append(GammaIndex(var_ids, levels))
    return ConstraintSet(schema, tuple(indices))


def constraints_of(
    graph: BidirectedGraph | BExpandedGraph, schema: TableSchema
) -> ConstraintSet:
    if isinstance(graph, BExpandedGraph):
        return constraints_for_expanded(graph, schema)
    return constraints_for_graph(graph, schema)


def holds_markov(
    table: ProbTable,
    constraints: ConstraintSet,
    tol: float = 1e-8,
) -> tuple[bool, float]:
    """Whether a strictly positive table satisfies pinned-to-zero constraints.

    Returns the verdict and the largest absolute constrained interaction.
    """
    if not table.strictly_positive:
        raise NonPositiveTableError(
            "Markov checks need a strictly positive table"
        )
    gamma = prob_to_lml(table)
    worst = 0.0
    for idx in constraints:
        worst = max(worst, abs(gamma.value(idx)))
    return worst <= tol, worst


# ---------------------------------------------------------------------------
# serialization


def _vertex_name(v) -> str:
    if isinstance(v, tuple) and len(v) == 2:
        return f"{v[0]}.{v[1]}"
    return str(v)


def graph_to_dict(graph: BidirectedGraph | BExpandedGraph) -> dict:
    doc = {
        "schema_version": 1,
        "vertices": [_vertex_name(v) for v in graph.vertices],
        "edges": sorted(
            [_vertex_name(u), _vertex_name(w)] for u, w in graph.edges
        ),
    }
    if isinstance(graph, BExpandedGraph):
        doc["expand"] = [str(v) for v, _ in graph.blocks]
    else:
        doc["expand"] = []
    return doc


def graph_from_dict(doc: Mapping, schema: TableSchema) -> BidirectedGraph | BExpandedGraph:
    """Resolve a graph document against a schema.

    Plain vertices are matched to variable ids by string form; with a
    nonempty ``expand`` list, vertices of expanded variables are written
    ``"<var>.<level>"``.
    """
    if "vertices" not in doc or "edges" not in doc:
        raise DataError("graph document needs 'vertices' and 'edges'")
    expand_names = [str(x) for x in doc.get("expand", [])]
    by_str = {str(v.id): v for v in schema.vars}
    for name in expand_names:
        if name not in by_str:
            raise DataError(f"expand names unknown variable {name!r}")

    def resolve(name: str):
        name = str(name)
        if name in by_str and str(by_str[name].id) not in expand_names:
            return by_str[name].id
        if "." in name:
            var_name, lvl_name = name.split(".", 1)
            if var_name in expand_names:
                spec = by_str[var_name]
                for lvl in spec.nonbaseline_levels:
                    if str(lvl) == lvl_name:
                        return expanded_variable_id(spec.id, lvl)
                raise DataError(
                    f"vertex {name!r}: {lvl_name!r} is not a non-baseline level "
                    f"of {var_name!r}"
                )
        raise DataError(f"cannot resolve vertex {name!r} against the schema")

    vertices = [resolve(n) for n in doc["vertices"]]
    edges = [(resolve(a), resolve(b)) for a, b in doc["edges"]]
    if not expand_names:
        return BidirectedGraph(tuple(vertices), frozenset(edges))

    plain = tuple(
        v.id
        for v in schema.vars
        if str(v.id) not in expand_names and v.id in set(vertices)
    )
    blocks = tuple(
        (v.id, v.nonbaseline_levels)
        for v in schema.vars
        if str(v.id) in expand_names
    )
    declared = set(plain)
    for v, levels in blocks:
        declared |= {expanded_variable_id(v, l) for l in levels}
    extra = set(vertices) - declared
    missing = declared - set(vertices)
    if extra or missing:
        raise DataError(
            "expanded graph must list exactly the plain variables and every "
            "non-baseline level vertex of each expanded variable"
        )
    return BExpandedGraph(plain, blocks, frozenset(edges))


def export_dot(graph: BidirectedGraph | BExpandedGraph, name: str = "model") -> str:
    """GraphViz text: bi-directed edges via ``dir=both``, blocks as clusters."""
    lines = [f"graph {name} {{", "  edge [dir=both];"]
    if isinstance(graph, BExpandedGraph):
        for v in graph.plain:
            lines.append(f'  "{_vertex_name(v)}";')
        for v, levels in graph.blocks:
            lines.append(f"  subgraph cluster_{v} {{")
            lines.append(f'    label="{v}";')
            for l in levels:
                lines.append(f'    "{_vertex_name(expanded_variable_id(v, l))}";')
            lines.append("  }")
    else:
        for v in graph.vertices:
            lines.append(f'  "{_vertex_name(v)}";')
    pos = {v: k for k, v in enumerate(graph.vertices)}
    for u, w in sorted(graph.edges, key=lambda e: (pos[e[0]], pos[e[1]])):
        lines.append(f'  "{_vertex_name(u)}" -- "{_vertex_name(w)}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


_DOT_NODE = re.compile(r'^"([^"]+)";$')
_DOT_EDGE = re.compile(r'^"([^"]+)"\s*--\s*"([^"]+)";$')
_DOT_SUB = re.compile(r"^subgraph cluster_(.+) \{$")


def import_dot(text: str) -> BidirectedGraph | BExpandedGraph:
    """Parse the output of :func:`export_dot` (vertex ids become strings)."""
    vertices: list[str] = []
    edges: list[tuple[str, str]] = []
    blocks: list[tuple[str, list[str]]] = []
    current_block: list[str] | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("graph ") or line.startswith("edge ["):
            continue
        if line == "}":
            current_block = None
            continue
        m = _DOT_SUB.match(line)
        if m:
            blocks.append((m.group(1), []))
            current_block = blocks[-1][1]
            continue
        if line.startswith("label="):
            continue
        m = _DOT_EDGE.match(line)
        if m:
            edges.append((m.group(1), m.group(2)))
            continue
        m = _DOT_NODE.match(line)
        if m:
            name = m.group(1)
            vertices.append(name)
            if current_block is not None:
                current_block.append(name)
            continue
        raise DataError(f"cannot parse DOT line {raw!r}")
    if not blocks:
        return BidirectedGraph(tuple(vertices), frozenset(edges))
    block_members = {name for _, members in blocks for name in members}
    plain = tuple(v for v in vertices if v not in block_members)

    def split_name(block_var: str, name: str) -> tuple:
        prefix = f"{block_var}."
        if not name.startswith(prefix):
            raise DataError(
                f"vertex {name!r} inside cluster {block_var!r} lacks its prefix"
            )
        return expanded_variable_id(block_var, name[len(prefix):])

    block_specs = tuple(
        (var, tuple(name[len(var) + 1:] for name in members))
        for var, members in blocks
    )
    rename = {}
    for var, members in blocks:
        for name in members:
            rename[name] = split_name(var, name)
    edges_resolved = [
        (rename.get(a, a), rename.get(b, b)) for a, b in edges
    ]
    return BExpandedGraph(plain, block_specs, frozenset(edges_resolved))


def save_graph(graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_dict(graph), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(path, schema: TableSchema):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"graph file {path}: invalid JSON ({exc})") from exc
    return graph_from_dict(doc, schema)
