"""Scikit-learn style estimators over the graph-model machinery.

``LmlGraphModel`` fits one fixed graph; ``GraphSearch`` learns the graph.
Both accept either a prepared :class:`~lmlgraph.tables.CountTable` or a
raw two-dimensional array of categorical labels (one row per
observation, one column per variable), which is validated and
cross-tabulated here.  They follow the usual estimator protocol:
constructor arguments are plain hyperparameters, ``fit`` sets
underscore-suffixed attributes, ``get_params`` and ``set_params`` come
from ``BaseEstimator``, and ``score`` returns mean log-likelihood so the
estimators drop into model-selection utilities.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DataError, SchemaError
from .fit import FitOptions, ModelSpec, fit_mle
from .graphs import BExpandedGraph, BidirectedGraph, graph_from_dict
from .search import SearchConfig, search
from .tables import CountTable, TableSchema, VariableSpec

__all__ = [
    "LmlGraphModel",
    "GraphSearch",
    "check_categorical_array",
    "schema_from_observations",
    "observations_to_table",
]


def check_categorical_array(X) -> np.ndarray:
    """Validate a label matrix: 2-D, nonempty, no missing entries.

    Returns an object array so integer and string labels coexist.
    """
    X = np.asarray(X, dtype=object)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D array of labels, got ndim={X.ndim}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise DataError("label matrix must have at least one row and column")
    for value in X.flat:
        if value is None or (isinstance(value, numbers.Real) and np.isnan(value)):
            raise DataError("label matrix contains missing values")
    return X


def schema_from_observations(
    X: np.ndarray,
    var_names=None,
    baselines=None,
) -> TableSchema:
    """Schema with each column's observed labels, sorted for stability.

    The baseline defaults to the first sorted label; ``baselines`` maps
    variable names to preferred baseline labels.
    """
    n_vars = X.shape[1]
    if var_names is None:
        var_names = [f"x{k}" for k in range(n_vars)]
    if len(var_names) != n_vars:
        raise SchemaError(
            f"{len(var_names)} variable names for {n_vars} columns"
        )
    baselines = dict(baselines or {})
    variables = []
    for k, name in enumerate(var_names):
        column = X[:, k]
        levels = tuple(sorted({str(v) for v in column}))
        if len(levels) < 2:
            raise DataError(f"variable {name!r} shows only one level")
        baseline = 0
        if name in baselines:
            label = str(baselines[name])
            if label not in levels:
                raise SchemaError(
                    f"baseline {label!r} never observed for variable {name!r}"
                )
            baseline = levels.index(label)
        variables.append(VariableSpec(name, levels, baseline))
    return TableSchema(tuple(variables))


def _row_cell(schema: TableSchema, row) -> tuple:
    if len(row) != schema.n_vars:
        raise SchemaError(
            f"row has {len(row)} entries for a {schema.n_vars}-variable schema"
        )
    cell = []
    for v, raw in zip(schema.vars, row):
        label = str(raw)
        if label not in v.levels:
            raise DataError(f"variable {v.id!r} has no level {label!r}")
        cell.append(v.levels.index(label))
    return tuple(cell)


def observations_to_table(X, schema: TableSchema) -> CountTable:
    """Cross-tabulate validated label rows into a count table."""
    counts = np.zeros(schema.n_cells, dtype=np.int64)
    for row in X:
        counts[schema.flat_index(_row_cell(schema, row))] += 1
    return CountTable(schema, counts)


def _coerce_table(X, var_names, baselines) -> CountTable:
    if isinstance(X, CountTable):
        if baselines:
            return CountTable(X.schema.with_baselines(baselines), X.counts)
        return X
    X = check_categorical_array(X)
    schema = schema_from_observations(X, var_names, baselines)
    return observations_to_table(X, schema)


def _log_prob_rows(X, schema: TableSchema, probs: np.ndarray) -> np.ndarray:
    X = check_categorical_array(X)
    if X.shape[1] != schema.n_vars:
        raise SchemaError(
            f"{X.shape[1]} columns for a {schema.n_vars}-variable model"
        )
    out = np.empty(X.shape[0])
    log_p = np.where(probs > 0, np.log(np.maximum(probs, 1e-300)), -np.inf)
    for i, row in enumerate(X):
        out[i] = log_p[schema.flat_index(_row_cell(schema, row))]
    return out


class LmlGraphModel(BaseEstimator):
    """Maximum-likelihood fit of one marginal-independence model.

    Parameters
    ----------
    graph : graph object, dict, or None
        The independence structure: a ``BidirectedGraph``, a
        ``BExpandedGraph``, a JSON-style dict for ``graph_from_dict``,
        or ``None`` for the saturated model.
    var_names, baselines : optional
        Used only when ``fit`` receives raw label rows.
    tol, max_iter, init_smoothing : float, int, float
        Passed through to the optimizer.

    Attributes set by ``fit``: ``schema_``, ``result_``, ``fitted_table_``,
    ``gamma_``, ``deviance_``, ``df_``, ``p_value_``, ``bic_``,
    ``converged_``, ``n_obs_``.
    """

    def __init__(
        self,
        graph=None,
        var_names=None,
        baselines=None,
        tol=1e-8,
        max_iter=500,
        init_smoothing=0.5,
    ):
        self.graph = graph
        self.var_names = var_names
        self.baselines = baselines
        self.tol = tol
        self.max_iter = max_iter
        self.init_smoothing = init_smoothing

    def _resolve_graph(self, schema: TableSchema):
        if self.graph is None:
            return None
        if isinstance(self.graph, (BidirectedGraph, BExpandedGraph)):
            return self.graph
        if isinstance(self.graph, dict):
            return graph_from_dict(self.graph, schema)
        raise SchemaError(
            "graph must be a BidirectedGraph, BExpandedGraph, dict, or None"
        )

    def fit(self, X, y=None):
        data = _coerce_table(X, self.var_names, self.baselines)
        graph = self._resolve_graph(data.schema)
        if graph is None:
            model = ModelSpec.saturated(data.schema)
        else:
            model = ModelSpec.from_graph(data.schema, graph)
        options = FitOptions(
            tol=self.tol,
            max_iter=self.max_iter,
            init_smoothing=self.init_smoothing,
        )
        result = fit_mle(data, model, options)
        self.schema_ = data.schema
        self.result_ = result
        self.fitted_table_ = result.fitted
        self.gamma_ = result.gamma_hat
        self.deviance_ = result.deviance
        self.df_ = result.df
        self.p_value_ = result.p_value
        self.bic_ = result.bic
        self.converged_ = result.converged
        self.n_obs_ = data.n
        return self

    def score_samples(self, X) -> np.ndarray:
        """Log-likelihood of each label row under the fitted table."""
        check_is_fitted(self, "result_")
        return _log_prob_rows(X, self.schema_, self.fitted_table_.probs)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per observation."""
        return float(np.mean(self.score_samples(X)))

    def sample(self, n_samples=1, random_state=None) -> np.ndarray:
        """Draw label rows from the fitted distribution."""
        check_is_fitted(self, "result_")
        probs = np.clip(self.fitted_table_.probs, 0.0, None)
        probs = probs / probs.sum()
        rng = np.random.default_rng(random_state)
        cells = rng.choice(self.schema_.n_cells, size=n_samples, p=probs)
        rows = np.empty((n_samples, self.schema_.n_vars), dtype=object)
        for i, flat in enumerate(cells):
            rows[i] = self.schema_.labels_of_cell(self.schema_.cell_of_flat(flat))
        return rows


class GraphSearch(BaseEstimator):
    """Learn a marginal-independence graph by ordered pairwise search.

    ``expand`` lists variables to model through their level indicators,
    each entry a variable name or ``(name, baseline_level)`` pair.
    Attributes set by ``fit``: ``graph_``, ``result_``, ``trace_``,
    ``schema_``, plus the same fit summaries as ``LmlGraphModel``.
    """

    def __init__(
        self,
        alpha=0.05,
        expand=(),
        max_orderings="all",
        seed=0,
        fit_budget=200_000,
        var_names=None,
        baselines=None,
        tol=1e-8,
        max_iter=500,
        threads=None,
    ):
        self.alpha = alpha
        self.expand = expand
        self.max_orderings = max_orderings
        self.seed = seed
        self.fit_budget = fit_budget
        self.var_names = var_names
        self.baselines = baselines
        self.tol = tol
        self.max_iter = max_iter
        self.threads = threads

    def fit(self, X, y=None):
        data = _coerce_table(X, self.var_names, self.baselines)
        cfg = SearchConfig(
            alpha=self.alpha,
            expand=tuple(self.expand),
            max_orderings=self.max_orderings,
            seed=self.seed,
            fit_budget=self.fit_budget,
            fit_options=FitOptions(tol=self.tol, max_iter=self.max_iter),
            threads=self.threads,
        )
        trace = search(data, cfg)
        result = trace.final
        self.trace_ = trace
        self.graph_ = trace.final_graph
        self.schema_ = trace.schema
        self.result_ = result
        self.fitted_table_ = result.fitted
        self.deviance_ = result.deviance
        self.df_ = result.df
        self.p_value_ = result.p_value
        self.bic_ = result.bic
        self.converged_ = result.converged
        return self

    def score_samples(self, X) -> np.ndarray:
        """Log-likelihood of each label row under the selected model."""
        check_is_fitted(self, "result_")
        return _log_prob_rows(X, self.schema_, self.fitted_table_.probs)

    def score(self, X, y=None) -> float:
        """Mean log-likelihood per observation."""
        return float(np.mean(self.score_samples(X)))
