"""Greedy structure search over bi-directed and expanded graphs.

One pass works through the variable pairs of a fixed ordering:
``(Y(1),Y(2)), (Y(1),Y(3)), ..., (Y(p-1),Y(p))``.  At each pair every
subgraph obtained by removing a subset of the edges currently joining the
two variables' vertex blocks is fitted, and the winner under
:func:`criterion` becomes the base graph for the next pair.  Edges are
only ever removed, so later pairs face no larger a candidate family than
earlier ones.  The procedure is repeated over orderings of the variables
(all ``p!`` or a seeded sample) and the per-ordering winners meet in a
final :func:`criterion` round.

The selection rule: among candidates whose fit converged and whose
p-value clears ``alpha``, take the lowest information criterion
(``deviance - df log n``); ties prefer fewer free parameters and then the
canonical edge list.  If nothing clears ``alpha``, the least constrained
candidate survives, so a pass never ends with an inexplicable model.

Identical candidate models recur constantly across orderings; fits are
memoized on their constraint sets, which changes nothing observable
because every fit starts from the same deterministic initialization.
``LML_THREADS`` (or ``threads``) parallelizes across orderings with a
deterministic merge.
"""

from __future__ import annotations

import itertools
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, DataError
from .fit import FitOptions, FitResult, ModelSpec, fit_mle
from .graphs import (
    BExpandedGraph,
    ConstraintSet,
    complete_expanded_graph,
    constraints_for_expanded,
)
from .tables import CountTable, TableSchema

__all__ = [
    "SearchConfig",
    "StepRecord",
    "OrderingRecord",
    "SearchTrace",
    "criterion",
    "pairwise_step",
    "search",
]


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for one search run.

    ``expand`` lists variables to expand, each entry either a variable id
    or an ``(id, baseline_level)`` pair; ``max_orderings`` is ``"all"`` or
    a cap sampled with ``seed``.  ``fit_budget`` bounds the worst-case
    number of model fits before anything is fitted at all.
    """

    alpha: float = 0.05
    expand: tuple = ()
    max_orderings: int | str = "all"
    seed: int = 0
    fit_budget: int = 200_000
    fit_options: FitOptions = field(default_factory=FitOptions)
    threads: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DataError("alpha must be strictly between 0 and 1")
        if self.max_orderings != "all":
            if not isinstance(self.max_orderings, int) or self.max_orderings < 1:
                raise DataError("max_orderings must be 'all' or a positive integer")
        if self.fit_budget < 1:
            raise DataError("fit_budget must be positive")

    def expansion(self) -> tuple[tuple, dict]:
        """Expanded variable ids and requested baseline overrides."""
        expand_vars: list = []
        baselines: dict = {}
        for entry in self.expand:
            if isinstance(entry, tuple) and len(entry) == 2:
                var, baseline = entry
                baselines[var] = baseline
            else:
                var = entry
            if var in expand_vars:
                raise DataError(f"variable {var!r} listed twice in expand")
            expand_vars.append(var)
        return tuple(expand_vars), baselines


def _graph_sort_key(graph: BExpandedGraph) -> tuple:
    names = sorted((str(u), str(w)) for u, w in graph.edges)
    return (len(names), tuple(names))


def criterion(
    candidates: Sequence[FitResult],
    alpha: float = 0.05,
    graphs: Sequence | None = None,
) -> int:
    """Index of the selected candidate.

    Filter to p-value at least ``alpha``, minimize the criterion value,
    break ties toward fewer free parameters and then the canonical edge
    list; with no survivor, fall back to the least constrained candidate.
    """
    if not candidates:
        raise DataError("criterion needs at least one candidate")

    def tie_key(i: int) -> tuple:
        r = candidates[i]
        graph_key = _graph_sort_key(graphs[i]) if graphs is not None else (i,)
        return (r.model.n_free, graph_key, i)

    survivors = [i for i, r in enumerate(candidates) if r.p_value >= alpha]
    if survivors:
        best = min(candidates[i].bic for i in survivors)
        pool = [i for i in survivors if candidates[i].bic == best]
    else:
        least = min(r.df for r in candidates)
        pool = [i for i, r in enumerate(candidates) if r.df == least]
    return min(pool, key=tie_key)


@dataclass(frozen=True)
class StepRecord:
    pair: tuple
    n_candidates: int
    disqualified: tuple  # edge-list keys of non-converged candidates
    winner_edges: tuple
    deviance: float
    df: int
    p_value: float
    bic: float


@dataclass(frozen=True)
class OrderingRecord:
    ordering: tuple
    steps: tuple
    graph: BExpandedGraph
    fit: FitResult


@dataclass(frozen=True)
class SearchTrace:
    """Full audit of a search: every ordering, step, and the final choice."""

    config: SearchConfig
    schema: TableSchema
    orderings: tuple
    final_index: int
    n_distinct_fits: int

    @property
    def final(self) -> FitResult:
        return self.orderings[self.final_index].fit

    @property
    def final_graph(self) -> BExpandedGraph:
        return self.orderings[self.final_index].graph

    def records(self) -> list[dict]:
        """JSON-ready rows, one per step plus one per ordering."""
        rows = []
        for o_idx, rec in enumerate(self.orderings):
            for step in rec.steps:
                rows.append(
                    {
                        "kind": "step",
                        "ordering_index": o_idx,
                        "ordering": [str(v) for v in rec.ordering],
                        "pair": [str(v) for v in step.pair],
                        "n_candidates": step.n_candidates,
                        "disqualified": [list(k) for k in step.disqualified],
                        "winner_edges": [list(e) for e in step.winner_edges],
                        "deviance": step.deviance,
                        "df": step.df,
                        "p_value": step.p_value,
                        "bic": step.bic,
                    }
                )
            rows.append(
                {
                    "kind": "ordering",
                    "ordering_index": o_idx,
                    "ordering": [str(v) for v in rec.ordering],
                    "deviance": rec.fit.deviance,
                    "df": rec.fit.df,
                    "p_value": rec.fit.p_value,
                    "bic": rec.fit.bic,
                    "selected": o_idx == self.final_index,
                }
            )
        return rows


class _FitCache:
    """Constraint-keyed memo of fits; thread-safe, deterministic."""

    def __init__(self, data: CountTable, schema: TableSchema, opts: FitOptions):
        self.data = data
        self.schema = schema
        self.opts = opts
        self._memo: dict[tuple, FitResult] = {}
        self._lock = threading.Lock()

    def fit(self, constraints: ConstraintSet, graph: BExpandedGraph) -> FitResult:
        key = constraints.key()
        with self._lock:
            hit = self._memo.get(key)
        if hit is None:
            model = ModelSpec(self.schema, constraints, provenance=graph)
            hit = fit_mle(self.data, model, self.opts)
            with self._lock:
                hit = self._memo.setdefault(key, hit)
        return replace(
            hit, model=replace(hit.model, provenance=graph)
        )

    def __len__(self) -> int:
        return len(self._memo)


def _edge_key(graph: BExpandedGraph) -> tuple:
    return tuple(sorted((str(u), str(w)) for u, w in graph.edges))


def pairwise_step(
    data: CountTable,
    current: BExpandedGraph,
    pair: tuple,
    cfg: SearchConfig,
    cache: _FitCache | None = None,
) -> tuple[BExpandedGraph, FitResult, StepRecord]:
    """Exhaust subgraphs over the edges joining one pair of variables.

    Candidates keep any subset of the edges currently joining the two
    blocks (within-block edges are untouchable); non-converged fits are
    disqualified and recorded.  Returns the winning graph, its fit, and
    the step record.
    """
    if cache is None:
        cache = _FitCache(data, data.schema, cfg.fit_options)
    u, w = pair
    joining = current.edges_between(u, w)
    candidates: list[BExpandedGraph] = []
    for size in range(len(joining) + 1):
        for kept in itertools.combinations(joining, size):
            dropped = [e for e in joining if e not in set(kept)]
            candidates.append(current.without_edges(dropped))

    fits: list[FitResult] = []
    graphs: list[BExpandedGraph] = []
    disqualified: list[tuple] = []
    for g in candidates:
        result = cache.fit(constraints_for_expanded(g, cache.schema), g)
        if result.converged:
            fits.append(result)
            graphs.append(g)
        else:
            disqualified.append(_edge_key(g))
    if not fits:
        raise DataError(
            f"no candidate fit converged for pair ({u!r}, {w!r}); "
            "loosen the tolerance or raise max_iter"
        )
    pick = criterion(fits, cfg.alpha, graphs)
    winner, fit = graphs[pick], fits[pick]
    record = StepRecord(
        pair=(u, w),
        n_candidates=len(candidates),
        disqualified=tuple(disqualified),
        winner_edges=_edge_key(winner),
        deviance=fit.deviance,
        df=fit.df,
        p_value=fit.p_value,
        bic=fit.bic,
    )
    return winner, fit, record


def _orderings(ids: tuple, cfg: SearchConfig) -> list[tuple]:
    total = 1
    for k in range(2, len(ids) + 1):
        total *= k
    if cfg.max_orderings == "all" or cfg.max_orderings >= total:
        return list(itertools.permutations(ids))
    rng = np.random.default_rng(cfg.seed)
    wanted = cfg.max_orderings
    picked: dict[tuple, None] = {}
    while len(picked) < wanted:
        perm = tuple(ids[k] for k in rng.permutation(len(ids)))
        picked.setdefault(perm, None)
    return list(picked)


def _budget_estimate(start: BExpandedGraph, n_orderings: int) -> int:
    """Worst-case fit count: every pair at its full edge complement."""
    ids = tuple(start.plain) + start.expanded_vars
    per_pass = 0
    for u, w in itertools.combinations(ids, 2):
        per_pass += 1 << len(start.edges_between(u, w))
    return per_pass * n_orderings


def search(data: CountTable, cfg: SearchConfig | None = None) -> SearchTrace:
    """Run the full ordering-by-ordering search; see the module docstring."""
    if cfg is None:
        cfg = SearchConfig()
    expand_vars, baselines = cfg.expansion()
    schema = data.schema.with_baselines(baselines) if baselines else data.schema
    if schema is not data.schema:
        data = CountTable(schema, data.counts)
    for v in expand_vars:
        schema.position(v)

    start = complete_expanded_graph(schema, expand_vars)
    orderings = _orderings(schema.ids, cfg)
    estimate = _budget_estimate(start, len(orderings))
    if estimate > cfg.fit_budget:
        raise BudgetExceededError(
            f"search would need up to {estimate} fits, over the budget of "
            f"{cfg.fit_budget}; cap max_orderings or raise fit_budget"
        )

    cache = _FitCache(data, schema, cfg.fit_options)

    def run_one(ordering: tuple) -> OrderingRecord:
        current = start
        fit: FitResult | None = None
        steps = []
        for pair in itertools.combinations(ordering, 2):
            current, fit, record = pairwise_step(data, current, pair, cfg, cache)
            steps.append(record)
        if fit is None:  # single variable: the saturated model stands
            fit = cache.fit(constraints_for_expanded(current, schema), current)
        return OrderingRecord(
            ordering=ordering, steps=tuple(steps), graph=current, fit=fit
        )

    threads = cfg.threads
    if threads is None:
        threads = int(os.environ.get("LML_THREADS", "1") or "1")
    if threads > 1 and len(orderings) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run_one, orderings))
    else:
        records = [run_one(o) for o in orderings]

    final = criterion(
        [r.fit for r in records],
        cfg.alpha,
        [r.graph for r in records],
    )
    return SearchTrace(
        config=cfg,
        schema=schema,
        orderings=tuple(records),
        final_index=final,
        n_distinct_fits=len(cache),
    )
