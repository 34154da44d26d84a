"""Bijections between probability tables, marginal vectors, and interactions.

For a table over variables ``V`` with baselines ``0_v``, the parameters
are indexed by pairs ``(U, j_U)`` where ``U`` is a nonempty subset of
``V`` and ``j_U`` assigns one non-baseline level to each variable in
``U``.  Such a pair corresponds one-to-one with the cell whose support is
``U`` at levels ``j_U`` (everything else at baseline), so both parameter
vectors live naturally on the full cell lattice, storing exactly one
value per index plus a fixed slot at the all-baseline cell:

* Moebius scale: ``mu[U, j_U] = P(Y_U = j_U)``, all-baseline slot 1;
* log-mean linear scale: ``gamma[U, j_U]``, the alternating subset sums
  of ``log mu`` along the sub-assignments of ``j_U``, all-baseline slot 0.

Every map in this module is a composition of one pass per variable along
that variable's axis, so a full conversion costs ``O(p * n_cells)``.  The
four per-axis passes (baseline index ``b``):

* collect:   ``out[b] = sum over all levels``      (probs -> mu)
* scatter:   ``out[b] = in[b] - sum over others``  (mu -> probs)
* diff:      ``out[j] = in[j] - in[b]``            (log mu -> gamma)
* accumulate:``out[j] = in[j] + in[b]``            (gamma -> log mu)

``collect``/``accumulate`` and ``scatter``/``diff`` are mutually
transposed pairs, which is what makes likelihood gradients the same
cheap sequence of passes (see :mod:`lmlgraph.fit`).

A zero marginal leaves every interaction above it without a value; such
entries are carried as an explicit undefined state on :class:`LmlParam`
(never as NaN), which is exactly what tables with structural zeros
produced by :func:`lmlgraph.tables.b_expand_table` require.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, NonPositiveTableError, SchemaError, UndefinedInteractionError
from .tables import ProbTable, TableSchema, VariableSpec

__all__ = [
    "GammaIndex",
    "MoebiusParam",
    "LmlParam",
    "canonical_indices",
    "index_census",
    "prob_to_moebius",
    "moebius_to_prob",
    "moebius_to_lml",
    "lml_to_moebius",
    "lml_to_prob",
    "prob_to_lml",
    "param_to_dict",
    "param_from_dict",
]


@dataclass(frozen=True)
class GammaIndex:
    """One interaction index: variables ``vars`` at non-baseline ``levels``.

    ``vars`` follows schema order and ``levels`` is aligned with it.
    """

    vars: tuple
    levels: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.vars:
            raise SchemaError("interaction index needs at least one variable")
        if len(self.vars) != len(self.levels):
            raise SchemaError("vars and levels differ in length")
        if len(set(self.vars)) != len(self.vars):
            raise SchemaError("duplicate variables in interaction index")

    @property
    def order(self) -> int:
        return len(self.vars)

    def as_key(self) -> str:
        vars_part = ",".join(str(v) for v in self.vars)
        levels_part = ",".join(str(l) for l in self.levels)
        return f"{vars_part}:{levels_part}"


def _validate_index(schema: TableSchema, idx: GammaIndex) -> tuple[int, ...]:
    """Cell (level positions) corresponding to ``idx``; raises if invalid."""
    positions = {}
    for var_id, lvl in zip(idx.vars, idx.levels):
        spec = schema.var(var_id)
        if lvl not in spec.levels:
            raise SchemaError(f"variable {var_id!r} has no level {lvl!r}")
        pos = spec.levels.index(lvl)
        if pos == spec.baseline:
            raise SchemaError(
                f"variable {var_id!r}: level {lvl!r} is the baseline and cannot "
                "index an interaction"
            )
        positions[schema.position(var_id)] = pos
    order = sorted(positions)
    if tuple(schema.vars[k].id for k in order) != idx.vars:
        raise SchemaError("interaction variables must follow schema order")
    return tuple(
        positions.get(k, v.baseline) for k, v in enumerate(schema.vars)
    )


def index_of_cell(schema: TableSchema, cell: Sequence[int]) -> GammaIndex | None:
    """Interaction index of a cell; ``None`` for the all-baseline cell."""
    vars_ = []
    levels = []
    for v, pos in zip(schema.vars, cell):
        if pos != v.baseline:
            vars_.append(v.id)
            levels.append(v.levels[pos])
    if not vars_:
        return None
    return GammaIndex(tuple(vars_), tuple(levels))


def cell_of_index(schema: TableSchema, idx: GammaIndex) -> tuple[int, ...]:
    return _validate_index(schema, idx)


def canonical_indices(schema: TableSchema) -> list[GammaIndex]:
    """All interaction indices in canonical order.

    Sorted by interaction order, then variable positions, then level
    positions; there are ``n_cells - 1`` of them.
    """
    out: list[tuple] = []
    n_vars = schema.n_vars
    for size in range(1, n_vars + 1):
        for var_pos in itertools.combinations(range(n_vars), size):
            specs = [schema.vars[k] for k in var_pos]
            level_choices = [
                [(spec.levels.index(lvl), lvl) for lvl in spec.nonbaseline_levels]
                for spec in specs
            ]
            for combo in itertools.product(*level_choices):
                out.append(
                    GammaIndex(
                        tuple(s.id for s in specs),
                        tuple(lvl for _, lvl in combo),
                    )
                )
    return out


def index_census(schema: TableSchema) -> dict[int, int]:
    """Number of interaction indices per order; values sum to n_cells - 1."""
    census: dict[int, int] = {}
    sizes = [v.n_levels - 1 for v in schema.vars]
    n_vars = len(sizes)
    for size in range(1, n_vars + 1):
        total = 0
        for var_pos in itertools.combinations(range(n_vars), size):
            prod = 1
            for k in var_pos:
                prod *= sizes[k]
            total += prod
        census[size] = total
    return census


# ---------------------------------------------------------------------------
# per-axis passes


def _collect(arr: np.ndarray, axis: int, b: int) -> np.ndarray:
    out = arr.copy()
    sl = [slice(None)] * arr.ndim
    sl[axis] = b
    out[tuple(sl)] = arr.sum(axis=axis)
    return out


def _scatter(arr: np.ndarray, axis: int, b: int) -> np.ndarray:
    out = arr.copy()
    sl = [slice(None)] * arr.ndim
    sl[axis] = b
    out[tuple(sl)] = 2.0 * arr[tuple(sl)] - arr.sum(axis=axis)
    return out


def _diff(arr: np.ndarray, axis: int, b: int) -> np.ndarray:
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(b, b + 1)
    base = arr[tuple(sl)]
    out = arr - base
    out[tuple(sl)] = base
    return out


def _accumulate(arr: np.ndarray, axis: int, b: int) -> np.ndarray:
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(b, b + 1)
    base = arr[tuple(sl)]
    out = arr + base
    out[tuple(sl)] = base
    return out


def _sweep(flat: np.ndarray, schema: TableSchema, op) -> np.ndarray:
    arr = np.asarray(flat, dtype=np.float64).reshape(schema.shape)
    for axis, v in enumerate(schema.vars):
        arr = op(arr, axis, v.baseline)
    return arr.reshape(-1)


# exposed for the likelihood gradient, which needs the transposed passes
def sweep_collect(flat, schema):
    return _sweep(flat, schema, _collect)


def sweep_scatter(flat, schema):
    return _sweep(flat, schema, _scatter)


def sweep_diff(flat, schema):
    return _sweep(flat, schema, _diff)


def sweep_accumulate(flat, schema):
    return _sweep(flat, schema, _accumulate)


# ---------------------------------------------------------------------------
# parameter containers


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MoebiusParam:
    """Marginal probabilities ``P(Y_U = j_U)``, one per interaction index.

    ``values`` lives on the cell lattice; the all-baseline slot is fixed
    at 1 (the empty marginal).  Entries can be zero when the underlying
    table has zero-mass cells; they are never negative for genuine tables.
    """

    schema: TableSchema
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.schema.n_cells,):
            raise DataError("marginal vector length does not match schema")
        base = values[self.schema.flat_index(self.schema.baseline_cell())]
        if abs(base - 1.0) > 1e-9:
            raise DataError(f"empty-set marginal must be 1, got {base!r}")
        object.__setattr__(self, "values", _readonly(values.copy()))

    def value(self, idx: GammaIndex) -> float:
        return float(self.values[self.schema.flat_index(cell_of_index(self.schema, idx))])

    def items(self) -> Iterable[tuple[GammaIndex, float]]:
        for idx in canonical_indices(self.schema):
            yield idx, self.value(idx)


@dataclass(frozen=True)
class LmlParam:
    """Log-mean linear interactions, one value per interaction index.

    The all-baseline slot is fixed at 0.  ``defined`` marks indices whose
    value exists; an index sitting above a zero marginal has no value and
    reading it raises :class:`UndefinedInteractionError`.
    """

    schema: TableSchema
    values: np.ndarray = field(repr=False)
    defined: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.schema.n_cells,):
            raise DataError("interaction vector length does not match schema")
        base_flat = self.schema.flat_index(self.schema.baseline_cell())
        defined = self.defined
        if defined is None:
            defined = np.ones(values.shape, dtype=bool)
        else:
            defined = np.asarray(defined, dtype=bool).copy()
            if defined.shape != values.shape:
                raise DataError("defined mask length does not match schema")
        if not defined[base_flat]:
            raise DataError("the empty interaction is always defined (and 0)")
        if abs(values[base_flat]) > 1e-9:
            raise DataError("the empty interaction must be 0")
        if not np.all(np.isfinite(values[defined])):
            raise DataError("defined interactions must be finite")
        values = values.copy()
        values[~defined] = 0.0
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "defined", _readonly(defined))

    @property
    def all_defined(self) -> bool:
        return bool(np.all(self.defined))

    def is_defined(self, idx: GammaIndex) -> bool:
        return bool(self.defined[self.schema.flat_index(cell_of_index(self.schema, idx))])

    def value(self, idx: GammaIndex) -> float:
        flat = self.schema.flat_index(cell_of_index(self.schema, idx))
        if not self.defined[flat]:
            raise UndefinedInteractionError(
                f"interaction {idx.as_key()!r} is undefined (zero marginal mass)"
            )
        return float(self.values[flat])

    def items(self) -> Iterable[tuple[GammaIndex, float | None]]:
        for idx in canonical_indices(self.schema):
            flat = self.schema.flat_index(cell_of_index(self.schema, idx))
            yield idx, (float(self.values[flat]) if self.defined[flat] else None)


# ---------------------------------------------------------------------------
# the maps


def prob_to_moebius(table: ProbTable) -> MoebiusParam:
    """Monotone marginals of a table: one upward pass per variable."""
    if table.min_prob < 0:
        raise DataError("marginals of a table with negative entries are meaningless")
    return MoebiusParam(table.schema, _sweep(table.probs, table.schema, _collect))


def moebius_to_prob(mu: MoebiusParam) -> ProbTable:
    """Reconstruct the table by one downward pass per variable.

    The output always sums to one (the empty marginal); whether it is a
    genuine distribution is reported by ``strictly_positive``/``min_prob``
    on the result, not by an exception.
    """
    return ProbTable(mu.schema, _sweep(mu.values, mu.schema, _scatter))


def moebius_to_lml(mu: MoebiusParam, allow_undefined: bool = False) -> LmlParam:
    """Alternating subset sums of log marginals.

    Marginals are monotone (``mu[U] <= mu[E]`` for ``E`` below ``U``), so a
    zero marginal poisons exactly the indices above it; with
    ``allow_undefined`` those become undefined entries instead of an error.
    """
    values = mu.values
    positive = values > 0.0
    if not allow_undefined and not np.all(positive):
        bad = int(np.argmin(positive))
        idx = index_of_cell(mu.schema, mu.schema.cell_of_flat(bad))
        key = idx.as_key() if idx is not None else "(empty)"
        raise NonPositiveTableError(
            f"marginal {key!r} is {values[bad]!r}; interactions need strictly "
            "positive marginals (pass allow_undefined=True to mask them)"
        )
    logs = np.zeros_like(values)
    np.log(values, out=logs, where=positive)
    gamma = _sweep(logs, mu.schema, _diff)
    if np.all(positive):
        return LmlParam(mu.schema, gamma)
    return LmlParam(mu.schema, gamma, defined=positive)


def lml_to_moebius(gamma: LmlParam) -> MoebiusParam:
    """Exponentiated downward accumulation; requires all entries defined."""
    if not gamma.all_defined:
        raise UndefinedInteractionError(
            "cannot map a partially undefined interaction vector back to marginals"
        )
    return MoebiusParam(
        gamma.schema, np.exp(_sweep(gamma.values, gamma.schema, _accumulate))
    )


def lml_to_prob(gamma: LmlParam) -> ProbTable:
    """Compose :func:`lml_to_moebius` with :func:`moebius_to_prob`."""
    return moebius_to_prob(lml_to_moebius(gamma))


def prob_to_lml(table: ProbTable, allow_undefined: bool = False) -> LmlParam:
    """Convenience composition of the two forward maps."""
    return moebius_to_lml(prob_to_moebius(table), allow_undefined=allow_undefined)


# ---------------------------------------------------------------------------
# serialization: values keyed by "U:j_U" strings in canonical order


def param_to_dict(param: MoebiusParam | LmlParam) -> dict:
    """JSON-ready document; the fixed empty-set slot is omitted."""
    from .tables import schema_to_dict

    if isinstance(param, MoebiusParam):
        kind = "moebius"
        values = {idx.as_key(): v for idx, v in param.items()}
    elif isinstance(param, LmlParam):
        kind = "lml"
        values = {idx.as_key(): v for idx, v in param.items()}
    else:
        raise DataError(f"cannot serialize {type(param).__name__}")
    return {
        "schema_version": 1,
        "kind": kind,
        "schema": schema_to_dict(param.schema),
        "values": values,
    }


def _parse_key(schema: TableSchema, key: str) -> GammaIndex:
    try:
        vars_part, levels_part = key.split(":")
    except ValueError:
        raise DataError(f"malformed parameter key {key!r}") from None
    var_names = vars_part.split(",")
    level_names = levels_part.split(",")
    if len(var_names) != len(level_names):
        raise DataError(f"malformed parameter key {key!r}")
    # keys carry string forms; resolve against the schema by string match
    by_str = {str(v.id): v for v in schema.vars}
    vars_ = []
    levels = []
    for name, lvl_name in zip(var_names, level_names):
        if name not in by_str:
            raise DataError(f"parameter key {key!r} names unknown variable {name!r}")
        spec = by_str[name]
        match = [l for l in spec.levels if str(l) == lvl_name]
        if not match:
            raise DataError(
                f"parameter key {key!r} names unknown level {lvl_name!r} of {name!r}"
            )
        vars_.append(spec.id)
        levels.append(match[0])
    return GammaIndex(tuple(vars_), tuple(levels))


def param_from_dict(doc: Mapping) -> MoebiusParam | LmlParam:
    if doc.get("schema_version") != 1:
        raise DataError("unsupported or missing schema_version")
    kind = doc.get("kind")
    if kind not in ("moebius", "lml"):
        raise DataError(f"unknown parameter kind {kind!r}")
    schema_doc = doc.get("schema")
    if not isinstance(schema_doc, Mapping) or "vars" not in schema_doc:
        raise DataError("parameter document is missing its schema")
    specs = []
    for entry in schema_doc["vars"]:
        baseline = entry.get("baseline", 0)
        levels = tuple(entry["levels"])
        if not isinstance(baseline, int):
            baseline = levels.index(baseline)
        specs.append(VariableSpec(entry["id"], levels, baseline))
    schema = TableSchema(tuple(specs))

    if kind == "moebius":
        values = np.zeros(schema.n_cells)
        seen = np.zeros(schema.n_cells, dtype=bool)
    else:
        values = np.zeros(schema.n_cells)
        defined = np.ones(schema.n_cells, dtype=bool)
        seen = np.zeros(schema.n_cells, dtype=bool)
    base_flat = schema.flat_index(schema.baseline_cell())
    values[base_flat] = 1.0 if kind == "moebius" else 0.0
    seen[base_flat] = True

    for key, val in doc.get("values", {}).items():
        idx = _parse_key(schema, key)
        flat = schema.flat_index(cell_of_index(schema, idx))
        if seen[flat]:
            raise DataError(f"duplicate parameter key {key!r}")
        seen[flat] = True
        if val is None:
            if kind == "moebius":
                raise DataError("marginal values cannot be null")
            defined[flat] = False
        else:
            values[flat] = float(val)
    if not np.all(seen):
        missing = index_of_cell(schema, schema.cell_of_flat(int(np.argmin(seen))))
        raise DataError(f"parameter document is missing {missing.as_key()!r}")
    if kind == "moebius":
        return MoebiusParam(schema, values)
    return LmlParam(schema, values, defined=defined)
