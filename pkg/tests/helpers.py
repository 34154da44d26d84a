"""Seeded random generators shared across the test modules."""

from __future__ import annotations

import numpy as np

from lmlgraph.tables import CountTable, ProbTable, TableSchema, VariableSpec


def random_schema(
    rng: np.random.Generator,
    n_vars: int | None = None,
    max_vars: int = 4,
    max_levels: int = 4,
    random_baselines: bool = True,
) -> TableSchema:
    if n_vars is None:
        n_vars = int(rng.integers(2, max_vars + 1))
    specs = []
    for k in range(n_vars):
        n_levels = int(rng.integers(2, max_levels + 1))
        levels = tuple(f"l{j}" for j in range(n_levels))
        baseline = int(rng.integers(0, n_levels)) if random_baselines else 0
        specs.append(VariableSpec(f"v{k}", levels, baseline))
    return TableSchema(tuple(specs))


def random_positive_table(
    rng: np.random.Generator,
    schema: TableSchema,
    floor: float = 0.05,
) -> ProbTable:
    """Dirichlet draw mixed with uniform mass so no cell gets tiny."""
    raw = rng.dirichlet(np.ones(schema.n_cells))
    probs = (1.0 - floor) * raw + floor / schema.n_cells
    return ProbTable(schema, probs)


def random_counts(
    rng: np.random.Generator,
    schema: TableSchema,
    n: int = 2000,
) -> CountTable:
    probs = random_positive_table(rng, schema)
    counts = rng.multinomial(n, probs.probs)
    return CountTable(schema, counts)


def recovery_truth() -> tuple[TableSchema, np.ndarray]:
    """A two-variable ground truth with one level-specific independence.

    ``y2``'s top level ``R`` occurs with the same rate 0.3 at every level
    of ``y1``, while the split of the remaining mass between ``r`` and
    ``D`` swings hard with ``y1`` (15% to 85%).  So the indicator of
    ``R`` is independent of ``y1`` but the indicator of ``D`` is far
    from it, and a search expanding ``y2`` should drop exactly the edge
    ``y1 -- (y2, R)``.
    """
    schema = TableSchema(
        (
            VariableSpec("y1", ("0", "1", "2")),
            VariableSpec("y2", ("r", "D", "R")),
        )
    )
    q = np.array([0.5, 0.3, 0.2])
    rho = 0.3
    s = np.array([0.15, 0.5, 0.85])
    probs = np.zeros(schema.n_cells)
    for i in range(3):
        probs[schema.flat_index((i, 0))] = q[i] * (1 - rho) * (1 - s[i])
        probs[schema.flat_index((i, 1))] = q[i] * (1 - rho) * s[i]
        probs[schema.flat_index((i, 2))] = q[i] * rho
    return schema, probs
