"""Schemas and tables for cross-classified categorical data.

A :class:`TableSchema` declares an ordered list of variables, each with an
ordered list of level labels and one designated baseline level.  Cells are
tuples of level positions, flattened row-major (first variable slowest,
levels in declared order), so a table is a single 1-d array of length
``prod(|levels_v|)``.

Two table types share that layout:

* :class:`CountTable` -- nonnegative integer counts with positive total;
* :class:`ProbTable` -- real entries summing to one.  Entries may be zero
  or negative (reconstructions from unconstrained interaction vectors can
  leave the simplex); ``strictly_positive`` and ``min_prob`` report where
  the table stands, and callers that need positivity check the flag.

The module also hosts the collapsing operations that the rest of the
package is built on:

* :func:`marginalize` -- sum out variables;
* :func:`dichotomize` / :func:`dichotomize_around` -- collapse selected
  variables to binary indicators of one chosen level each;
* :func:`b_expand_table` -- re-express a table over indicator variables,
  one per non-baseline level of each expanded variable, with structural
  zeros on the indicator patterns that select two levels of one variable;
* :func:`load_counts` / :func:`sample_counts` / :func:`empirical_prob`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, SchemaError

__all__ = [
    "VariableSpec",
    "TableSchema",
    "CountTable",
    "ProbTable",
    "load_counts",
    "load_schema",
    "schema_to_dict",
    "empirical_prob",
    "sample_counts",
    "marginalize",
    "dichotomize",
    "dichotomize_around",
    "b_expand_table",
    "expanded_variable_id",
]

SUM_TOL = 1e-12


@dataclass(frozen=True)
class VariableSpec:
    """One categorical variable: identifier, ordered levels, baseline.

    ``baseline`` is the position (not the label) of the level that plays
    the reference role; interactions are indexed by the remaining levels.
    """

    id: Hashable
    levels: tuple
    baseline: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        if len(self.levels) < 2:
            raise SchemaError(f"variable {self.id!r} needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise SchemaError(f"variable {self.id!r} has duplicate levels")
        if not 0 <= self.baseline < len(self.levels):
            raise SchemaError(
                f"variable {self.id!r}: baseline index {self.baseline} out of range"
            )

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def baseline_level(self):
        return self.levels[self.baseline]

    @property
    def nonbaseline_levels(self) -> tuple:
        """Non-baseline levels in declared order."""
        return tuple(
            lvl for k, lvl in enumerate(self.levels) if k != self.baseline
        )

    def with_baseline(self, level) -> "VariableSpec":
        """Same variable with the baseline moved to ``level``."""
        if level not in self.levels:
            raise SchemaError(f"variable {self.id!r} has no level {level!r}")
        return VariableSpec(self.id, self.levels, self.levels.index(level))


@dataclass(frozen=True)
class TableSchema:
    """Ordered collection of :class:`VariableSpec` defining the cell lattice."""

    vars: tuple[VariableSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", tuple(self.vars))
        if not self.vars:
            raise SchemaError("schema needs at least one variable")
        ids = [v.id for v in self.vars]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate variable ids in schema")

    @property
    def ids(self) -> tuple:
        return tuple(v.id for v in self.vars)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(v.n_levels for v in self.vars)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def n_vars(self) -> int:
        return len(self.vars)

    def position(self, var_id) -> int:
        for k, v in enumerate(self.vars):
            if v.id == var_id:
                return k
        raise SchemaError(f"unknown variable {var_id!r}")

    def var(self, var_id) -> VariableSpec:
        return self.vars[self.position(var_id)]

    def flat_index(self, cell: Sequence[int]) -> int:
        """Row-major position of a cell given as level indices."""
        if len(cell) != self.n_vars:
            raise SchemaError("cell length does not match schema")
        flat = 0
        for pos, (k, v) in zip(cell, enumerate(self.vars)):
            if not 0 <= pos < v.n_levels:
                raise SchemaError(
                    f"level index {pos} out of range for variable {v.id!r}"
                )
            flat = flat * v.n_levels + pos
        return flat

    def cell_of_flat(self, flat: int) -> tuple[int, ...]:
        cell = []
        for v in reversed(self.vars):
            flat, pos = divmod(flat, v.n_levels)
            cell.append(pos)
        return tuple(reversed(cell))

    def iter_cells(self) -> Iterable[tuple[int, ...]]:
        return np.ndindex(*self.shape)

    def cell_from_labels(self, labels: Mapping) -> tuple[int, ...]:
        """Cell with the given labels; unmentioned variables sit at baseline."""
        cell = []
        seen = set()
        for v in self.vars:
            if v.id in labels:
                lvl = labels[v.id]
                if lvl not in v.levels:
                    raise SchemaError(f"variable {v.id!r} has no level {lvl!r}")
                cell.append(v.levels.index(lvl))
                seen.add(v.id)
            else:
                cell.append(v.baseline)
        unknown = set(labels) - seen
        if unknown:
            raise SchemaError(f"unknown variables {sorted(map(str, unknown))!r}")
        return tuple(cell)

    def labels_of_cell(self, cell: Sequence[int]) -> tuple:
        return tuple(v.levels[pos] for v, pos in zip(self.vars, cell))

    def baseline_cell(self) -> tuple[int, ...]:
        return tuple(v.baseline for v in self.vars)

    def restrict(self, var_ids: Iterable) -> "TableSchema":
        """Sub-schema over ``var_ids``, kept in this schema's order."""
        wanted = set(var_ids)
        missing = wanted - set(self.ids)
        if missing:
            raise SchemaError(f"unknown variables {sorted(map(str, missing))!r}")
        kept = tuple(v for v in self.vars if v.id in wanted)
        if not kept:
            raise SchemaError("cannot restrict a schema to no variables")
        return TableSchema(kept)

    def with_baselines(self, baselines: Mapping) -> "TableSchema":
        """Same variables and level order, baselines moved per ``baselines``."""
        unknown = set(baselines) - set(self.ids)
        if unknown:
            raise SchemaError(f"unknown variables {sorted(map(str, unknown))!r}")
        return TableSchema(
            tuple(
                v.with_baseline(baselines[v.id]) if v.id in baselines else v
                for v in self.vars
            )
        )


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CountTable:
    """Integer counts over the cells of a schema, total >= 1."""

    schema: TableSchema
    counts: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts)
        if counts.shape != (self.schema.n_cells,):
            raise DataError(
                f"counts length {counts.shape} does not match schema "
                f"({self.schema.n_cells} cells)"
            )
        if not np.issubdtype(counts.dtype, np.integer):
            rounded = np.rint(counts)
            if not np.array_equal(rounded, counts):
                raise DataError("counts must be integers")
            counts = rounded.astype(np.int64)
        else:
            counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise DataError("counts must be nonnegative")
        if counts.sum() < 1:
            raise DataError("count table must contain at least one observation")
        object.__setattr__(self, "counts", _as_readonly(counts))

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ProbTable:
    """Real-valued cell probabilities summing to one.

    Entries are allowed to be zero or negative so that reconstructed
    tables can be inspected rather than rejected; ``strictly_positive``
    is the validity flag and ``min_prob`` the most negative entry.
    """

    schema: TableSchema
    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.shape != (self.schema.n_cells,):
            raise DataError(
                f"probability vector length {probs.shape} does not match schema "
                f"({self.schema.n_cells} cells)"
            )
        if not np.all(np.isfinite(probs)):
            raise DataError("probabilities must be finite")
        total = math.fsum(probs.tolist())
        if abs(total - 1.0) > max(SUM_TOL, 1e-15 * probs.size):
            raise DataError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", _as_readonly(probs))

    @property
    def strictly_positive(self) -> bool:
        return bool(np.min(self.probs) > 0.0)

    @property
    def min_prob(self) -> float:
        return float(np.min(self.probs))

    def value(self, cell: Sequence[int]) -> float:
        return float(self.probs[self.schema.flat_index(cell)])


def load_schema(path) -> TableSchema:
    """Read a schema sidecar: ``{"vars": [{"id", "levels", "baseline"}...]}``.

    ``baseline`` may be a level label or an integer position; it defaults
    to the first declared level.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"schema file {path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "vars" not in doc:
        raise DataError(f"schema file {path}: missing 'vars' list")
    specs = []
    for entry in doc["vars"]:
        try:
            var_id = entry["id"]
            levels = tuple(entry["levels"])
        except (TypeError, KeyError) as exc:
            raise DataError(f"schema file {path}: malformed variable entry") from exc
        baseline = entry.get("baseline", 0)
        if not isinstance(baseline, int):
            if baseline not in levels:
                raise DataError(
                    f"schema file {path}: variable {var_id!r} has no level "
                    f"{baseline!r} to use as baseline"
                )
            baseline = levels.index(baseline)
        try:
            specs.append(VariableSpec(var_id, levels, baseline))
        except SchemaError as exc:
            raise DataError(f"schema file {path}: {exc}") from exc
    try:
        return TableSchema(tuple(specs))
    except SchemaError as exc:
        raise DataError(f"schema file {path}: {exc}") from exc


def schema_to_dict(schema: TableSchema) -> dict:
    return {
        "vars": [
            {"id": v.id, "levels": list(v.levels), "baseline": v.baseline}
            for v in schema.vars
        ]
    }


def load_counts(path, schema: TableSchema | None = None) -> CountTable:
    """Read a long-format CSV of counts: one column per variable plus ``count``.

    Without a supplied schema, levels are taken in order of first
    appearance per column and the first level seen is the baseline.
    Cells absent from the file get count zero; a cell listed twice,
    an unknown level under a supplied schema, or a negative count is an
    error.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[-1] != "count":
            raise DataError(f"{path}: last column must be named 'count'")
        var_names = header[:-1]
        if len(set(var_names)) != len(var_names):
            raise DataError(f"{path}: duplicate variable columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            labels = [c.strip() for c in row[:-1]]
            try:
                count = int(row[-1])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: count {row[-1]!r} is not an integer"
                ) from None
            if count < 0:
                raise DataError(f"{path}:{lineno}: negative count {count}")
            rows.append((labels, count, lineno))
    if not rows:
        raise DataError(f"{path}: no data rows")

    if schema is None:
        seen: list[dict] = [dict() for _ in var_names]
        for labels, _, _ in rows:
            for k, lvl in enumerate(labels):
                seen[k].setdefault(lvl, None)
        specs = []
        for name, levels in zip(var_names, seen):
            if len(levels) < 2:
                raise DataError(
                    f"{path}: variable {name!r} has fewer than 2 observed levels; "
                    "supply a schema"
                )
            specs.append(VariableSpec(name, tuple(levels), 0))
        schema = TableSchema(tuple(specs))
    else:
        if list(schema.ids) != [str(i) for i in var_names] and list(
            map(str, schema.ids)
        ) != var_names:
            raise DataError(
                f"{path}: columns {var_names!r} do not match schema variables "
                f"{list(map(str, schema.ids))!r}"
            )

    level_maps = [
        {str(lvl): k for k, lvl in enumerate(v.levels)} for v in schema.vars
    ]
    counts = np.zeros(schema.n_cells, dtype=np.int64)
    filled = np.zeros(schema.n_cells, dtype=bool)
    for labels, count, lineno in rows:
        cell = []
        for name, lvl, lmap in zip(var_names, labels, level_maps):
            if lvl not in lmap:
                raise DataError(
                    f"{path}:{lineno}: unknown level {lvl!r} for variable {name!r}"
                )
            cell.append(lmap[lvl])
        flat = schema.flat_index(tuple(cell))
        if filled[flat]:
            raise DataError(f"{path}:{lineno}: duplicate cell {tuple(labels)!r}")
        filled[flat] = True
        counts[flat] = count
    return CountTable(schema, counts)


def empirical_prob(table: CountTable, smoothing: float = 0.0) -> ProbTable:
    """Relative frequencies ``(count + s) / (n + s * n_cells)``."""
    if smoothing < 0:
        raise DataError("smoothing must be nonnegative")
    n = table.n
    probs = (table.counts + smoothing) / (n + smoothing * table.schema.n_cells)
    return ProbTable(table.schema, probs)


def sample_counts(table: ProbTable, n: int, seed: int | None = None) -> CountTable:
    """Multinomial sample of size ``n`` from a strictly positive table."""
    if n < 1:
        raise DataError("sample size must be at least 1")
    if table.min_prob < 0:
        raise DataError("cannot sample from a table with negative entries")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, table.probs)
    return CountTable(table.schema, counts)


def marginalize(table: ProbTable, var_ids: Iterable) -> ProbTable:
    """Marginal table over ``var_ids`` (kept in schema order)."""
    sub = table.schema.restrict(var_ids)
    kept_ids = set(sub.ids)
    drop_axes = tuple(
        k for k, v in enumerate(table.schema.vars) if v.id not in kept_ids
    )
    arr = table.probs.reshape(table.schema.shape)
    if drop_axes:
        arr = arr.sum(axis=drop_axes)
    return ProbTable(sub, arr.reshape(-1))


def _binary_spec(var_id) -> VariableSpec:
    return VariableSpec(var_id, (0, 1), 0)


def dichotomize(
    table: ProbTable,
    around: Mapping,
    rename: bool = False,
) -> ProbTable:
    """Collapse each variable in ``around`` to the indicator of one level.

    ``around`` maps variable ids to level positions.  A collapsed variable
    becomes binary with levels ``(0, 1)`` and baseline 0, where 1 means
    "took exactly the selected level".  With ``rename=True`` the collapsed
    variable's id becomes ``(id, selected_level_label)`` so that it lines
    up with indicator vertices of expanded graphs.
    """
    if not around:
        return table
    schema = table.schema
    unknown = set(around) - set(schema.ids)
    if unknown:
        raise SchemaError(f"unknown variables {sorted(map(str, unknown))!r}")
    arr = table.probs.reshape(schema.shape)
    new_specs = []
    for axis, v in enumerate(schema.vars):
        if v.id not in around:
            new_specs.append(v)
            continue
        pos = around[v.id]
        if not 0 <= pos < v.n_levels:
            raise SchemaError(
                f"level index {pos} out of range for variable {v.id!r}"
            )
        sel = np.take(arr, pos, axis=axis)
        rest = arr.sum(axis=axis) - sel
        arr = np.stack([rest, sel], axis=axis)
        new_id = expanded_variable_id(v.id, v.levels[pos]) if rename else v.id
        new_specs.append(_binary_spec(new_id))
    return ProbTable(TableSchema(tuple(new_specs)), arr.reshape(-1))


def dichotomize_around(table: ProbTable, cell: Sequence[int]) -> ProbTable:
    """Collapse every variable to the indicator of its level in ``cell``.

    The result is a binary table whose all-ones cell carries the
    probability of ``cell`` itself.
    """
    schema = table.schema
    if len(cell) != schema.n_vars:
        raise SchemaError("cell length does not match schema")
    return dichotomize(table, {v.id: pos for v, pos in zip(schema.vars, cell)})


def expanded_variable_id(var_id, level) -> tuple:
    """Identifier of the indicator variable for ``level`` of ``var_id``."""
    return (var_id, level)


def b_expand_table(table: ProbTable, expand_vars: Iterable) -> ProbTable:
    """Joint table of the plain variables and all level indicators.

    Each variable in ``expand_vars`` is replaced by one binary indicator
    per non-baseline level.  Indicator patterns selecting two levels of
    the same variable are impossible, so those cells are exact structural
    zeros; each remaining cell carries the probability that the selected
    levels occur jointly and every unselected expanded variable sits at
    its baseline.
    """
    expand = list(dict.fromkeys(expand_vars))
    schema = table.schema
    unknown = set(expand) - set(schema.ids)
    if unknown:
        raise SchemaError(f"unknown variables {sorted(map(str, unknown))!r}")
    expand_set = set(expand)

    new_specs: list[VariableSpec] = []
    # column builders: for each new variable, a function cell -> level index
    col_of_old: list[tuple[int, object]] = []
    for axis, v in enumerate(schema.vars):
        if v.id not in expand_set:
            new_specs.append(v)
            col_of_old.append((axis, None))
        else:
            for lvl in v.nonbaseline_levels:
                new_specs.append(_binary_spec(expanded_variable_id(v.id, lvl)))
                col_of_old.append((axis, v.levels.index(lvl)))
    new_schema = TableSchema(tuple(new_specs))

    probs = np.zeros(new_schema.n_cells, dtype=np.float64)
    for cell in schema.iter_cells():
        new_cell = []
        for axis, sel in col_of_old:
            if sel is None:
                new_cell.append(cell[axis])
            else:
                new_cell.append(1 if cell[axis] == sel else 0)
        probs[new_schema.flat_index(tuple(new_cell))] = table.probs[
            schema.flat_index(cell)
        ]
    return ProbTable(new_schema, probs)
