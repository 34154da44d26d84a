"""Maximum likelihood under pinned-to-zero interaction constraints.

A model is a set of interaction indices forced to zero; the remaining
coordinates are free, so the parameter space is a linear subspace of the
interaction scale and the fitted table is found by quasi-Newton ascent of
the multinomial log-likelihood ``sum_i n_i log p_i(gamma)``.

The likelihood factors through the two linear sweeps of
:mod:`lmlgraph.transform` (interactions -> log marginals -> table), so the
gradient is the same pair of sweeps transposed: with ``mu`` the marginal
vector and ``p`` the table,

    grad = collect-sweep( mu * diff-sweep(n / p) )

restricted to the free coordinates.  The line search backtracks and
rejects any step whose reconstructed table is not strictly positive, so
iterates never leave the valid region.  Near the optimum, where the
objective is flat to machine precision, steps that halve the gradient
norm are accepted instead; termination is on the gradient max-norm of
the unscaled log-likelihood.

Degrees of freedom equal the number of (deduplicated) constraints, the
p-value is the chi-squared upper tail at the deviance, and the reported
criterion is ``deviance - df * log(n)`` (lower is better).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from .errors import DataError, SchemaError
from .graphs import BExpandedGraph, BidirectedGraph, ConstraintSet, constraints_of
from .tables import CountTable, ProbTable, TableSchema, empirical_prob
from .transform import (
    GammaIndex,
    LmlParam,
    canonical_indices,
    cell_of_index,
    prob_to_lml,
    sweep_accumulate,
    sweep_collect,
    sweep_diff,
    sweep_scatter,
)

__all__ = [
    "ModelSpec",
    "FitOptions",
    "FitResult",
    "fit_mle",
    "loglik_gradient",
    "chisq_upper_tail",
    "bic",
    "deviance_of",
]


@dataclass(frozen=True)
class ModelSpec:
    """Schema, pinned interactions, and (optionally) the graph behind them."""

    schema: TableSchema
    constraints: ConstraintSet
    provenance: object = None

    def __post_init__(self) -> None:
        if self.constraints.schema is not self.schema and (
            self.constraints.schema != self.schema
        ):
            raise SchemaError("constraint set was built for a different schema")

    @classmethod
    def from_graph(
        cls, schema: TableSchema, graph: BidirectedGraph | BExpandedGraph
    ) -> "ModelSpec":
        return cls(schema, constraints_of(graph, schema), provenance=graph)

    @classmethod
    def saturated(cls, schema: TableSchema) -> "ModelSpec":
        return cls(schema, ConstraintSet(schema, ()))

    @property
    def df(self) -> int:
        return len(self.constraints)

    @property
    def n_free(self) -> int:
        return self.schema.n_cells - 1 - self.df

    def free_indices(self) -> list[GammaIndex]:
        pinned = set(self.constraints.indices)
        return [i for i in canonical_indices(self.schema) if i not in pinned]


@dataclass(frozen=True)
class FitOptions:
    """Termination controls for the ascent."""

    tol: float = 1e-8
    max_iter: int = 500
    init_smoothing: float = 0.5

    def __post_init__(self) -> None:
        if self.tol <= 0 or self.max_iter < 1 or self.init_smoothing < 0:
            raise DataError("invalid fit options")


@dataclass(frozen=True)
class FitResult:
    """Fitted table plus the usual goodness-of-fit summary.

    ``gamma_hat`` is ``None`` only for a saturated fit whose empirical
    table has empty cells (the interactions do not exist there).
    ``constraint_residual`` is the largest absolute pinned coordinate of
    ``gamma_hat`` and is zero by construction up to rounding.
    """

    model: ModelSpec
    fitted: ProbTable = field(repr=False)
    gamma_hat: LmlParam | None = field(repr=False)
    loglik: float
    deviance: float
    df: int
    p_value: float
    bic: float
    iterations: int
    converged: bool
    grad_norm: float
    constraint_residual: float


def chisq_upper_tail(x: float, df: float) -> float:
    """Upper tail of the chi-squared distribution with ``df`` degrees.

    ``df == 0`` returns 1 by convention (a vacuous test rejects nothing).
    """
    if df < 0:
        raise DataError("degrees of freedom must be nonnegative")
    if x < 0:
        raise DataError("chi-squared statistic must be nonnegative")
    if df == 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def bic(deviance: float, df: int, n: int) -> float:
    """Model-selection score ``deviance - df * log(n)``; lower is better."""
    if n < 1:
        raise DataError("sample size must be at least 1")
    return deviance - df * math.log(n)


def deviance_of(data: CountTable, fitted: ProbTable) -> float:
    """Likelihood-ratio statistic against the saturated model."""
    counts = data.counts.astype(np.float64)
    n = data.n
    observed = counts > 0
    probs = fitted.probs
    if np.any(probs[observed] <= 0):
        raise DataError("fitted table has zero mass on an observed cell")
    ll_sat = float(np.sum(counts[observed] * np.log(counts[observed] / n)))
    ll_fit = float(np.sum(counts[observed] * np.log(probs[observed])))
    return 2.0 * (ll_sat - ll_fit)


def _free_cells(model: ModelSpec) -> np.ndarray:
    schema = model.schema
    flats = [
        schema.flat_index(cell_of_index(schema, idx)) for idx in model.free_indices()
    ]
    return np.asarray(flats, dtype=np.intp)


def _gamma_full(model: ModelSpec, free: np.ndarray, values: Sequence[float]) -> np.ndarray:
    full = np.zeros(model.schema.n_cells)
    full[free] = values
    return full


def _reconstruct(schema: TableSchema, gamma_full: np.ndarray) -> np.ndarray:
    log_mu = sweep_accumulate(gamma_full, schema)
    return sweep_scatter(np.exp(log_mu), schema)


def loglik_gradient(
    gamma_free: Sequence[float], data: CountTable, model: ModelSpec
) -> np.ndarray:
    """Gradient of ``sum_i n_i log p_i`` over the free coordinates.

    Coordinates follow the canonical interaction order restricted to the
    free indices (:meth:`ModelSpec.free_indices`).
    """
    schema = model.schema
    free = _free_cells(model)
    if len(gamma_free) != len(free):
        raise DataError(
            f"expected {len(free)} free coordinates, got {len(gamma_free)}"
        )
    full = _gamma_full(model, free, gamma_free)
    mu = np.exp(sweep_accumulate(full, schema))
    probs = sweep_scatter(mu, schema)
    if np.min(probs) <= 0:
        raise DataError("free coordinates reconstruct an invalid table")
    ratio = data.counts / probs
    grad_full = sweep_collect(mu * sweep_diff(ratio, schema), schema)
    return grad_full[free]


def _objective_factory(data: CountTable, model: ModelSpec, free: np.ndarray):
    """Scaled objective ``-loglik/n`` and its gradient; +inf when infeasible."""
    schema = model.schema
    freq = data.counts / data.n

    def fun(x: np.ndarray):
        full = _gamma_full(model, free, x)
        mu = np.exp(sweep_accumulate(full, schema))
        probs = sweep_scatter(mu, schema)
        if not np.all(np.isfinite(probs)) or np.min(probs) <= 0.0:
            return np.inf, None, None, None
        f = -float(np.dot(freq, np.log(probs)))
        grad_full = sweep_collect(mu * sweep_diff(freq / probs, schema), schema)
        return f, -grad_full[free], probs, mu

    return fun


def _sweep_matrices(schema: TableSchema) -> tuple[np.ndarray, np.ndarray]:
    """Dense matrices of the accumulate and scatter sweeps.

    Both sweeps act per variable, so the full-lattice matrices are
    Kronecker products of the small per-level blocks; only the exact
    curvature computation needs them.
    """
    acc = np.eye(1)
    sca = np.eye(1)
    for v in schema.vars:
        m = v.n_levels
        a = np.eye(m)
        a[:, v.baseline] = 1.0
        s = np.eye(m)
        s[v.baseline, :] = -1.0
        s[v.baseline, v.baseline] = 1.0
        acc = np.kron(acc, a)
        sca = np.kron(sca, s)
    return acc, sca


def _curvature_factory(data: CountTable, model: ModelSpec, free: np.ndarray):
    """Hessian of the scaled objective at the current marginals and table."""
    schema = model.schema
    freq = data.counts / data.n
    acc, sca = _sweep_matrices(schema)
    acc_free = acc[:, free]

    def hessian(mu: np.ndarray, probs: np.ndarray) -> np.ndarray:
        jac = sca.dot(mu[:, None] * acc_free)
        fisher = jac.T.dot((freq / probs**2)[:, None] * jac)
        weights = mu * sweep_diff(freq / probs, schema)
        bend = acc_free.T.dot(weights[:, None] * acc_free)
        return fisher - bend

    return hessian


def _initial_gamma(data: CountTable, model: ModelSpec, free: np.ndarray, opts: FitOptions):
    """Empirical interactions with pins zeroed; uniform table as fallback."""
    smoothing = opts.init_smoothing if np.any(data.counts == 0) else 0.0
    start = prob_to_lml(empirical_prob(data, smoothing))
    x0 = start.values[free]
    full = _gamma_full(model, free, x0)
    if np.min(_reconstruct(model.schema, full)) > 0:
        return x0
    uniform = ProbTable(
        model.schema,
        np.full(model.schema.n_cells, 1.0 / model.schema.n_cells),
    )
    x0 = prob_to_lml(uniform).values[free]
    full = _gamma_full(model, free, x0)
    if np.min(_reconstruct(model.schema, full)) > 0:
        return x0
    raise DataError("no strictly positive table satisfies the model's pins")


def _saturated_result(data: CountTable, model: ModelSpec) -> FitResult:
    fitted = empirical_prob(data)
    gamma_hat = prob_to_lml(fitted) if fitted.strictly_positive else None
    ll = float(
        np.sum(
            data.counts[data.counts > 0]
            * np.log(fitted.probs[data.counts > 0])
        )
    )
    return FitResult(
        model=model,
        fitted=fitted,
        gamma_hat=gamma_hat,
        loglik=ll,
        deviance=0.0,
        df=0,
        p_value=1.0,
        bic=0.0,
        iterations=0,
        converged=True,
        grad_norm=0.0,
        constraint_residual=0.0,
    )


def fit_mle(
    data: CountTable,
    model: ModelSpec,
    opts: FitOptions | None = None,
) -> FitResult:
    """Constrained maximum likelihood fit.

    Always returns a result; ``converged`` records whether the gradient
    max-norm fell below ``opts.tol`` within ``opts.max_iter`` iterations.
    """
    if opts is None:
        opts = FitOptions()
    if data.schema != model.schema:
        raise SchemaError("data and model use different schemas")
    if model.df == 0:
        return _saturated_result(data, model)

    free = _free_cells(model)
    n = data.n
    fun = _objective_factory(data, model, free)
    hessian = _curvature_factory(data, model, free)
    x = np.asarray(_initial_gamma(data, model, free, opts), dtype=np.float64)

    f, g, probs, mu = fun(x)
    if not np.isfinite(f):
        raise DataError("infeasible starting point")
    # tol applies to the unscaled gradient; fun works on loglik/n
    scaled_tol = opts.tol / n
    k = len(free)
    identity = np.eye(k)
    H = identity.copy()
    fresh_h = True
    # quasi-Newton carries the ascent; once the objective goes flat at
    # machine precision, exact-curvature steps finish the last digits
    polish = False
    iterations = 0
    converged = bool(np.max(np.abs(g)) <= scaled_tol)

    while not converged and iterations < opts.max_iter:
        ginf = float(np.max(np.abs(g)))
        if not polish and ginf <= 1e-4:
            polish = True
        if polish:
            curv = hessian(mu, probs)
            damping = 0.0
            d = None
            for _ in range(12):
                damped = curv + damping * identity
                try:
                    np.linalg.cholesky(damped)
                except np.linalg.LinAlgError:
                    trace = float(np.trace(curv)) / k
                    damping = max(damping * 10.0, 1e-10 * max(trace, 1.0))
                    continue
                d = -np.linalg.solve(damped, g)
                break
            if d is None:
                break
        else:
            d = -H.dot(g)
        slope = float(np.dot(d, g))
        if slope >= 0.0:
            if not polish:
                H = identity.copy()
                fresh_h = True
            d = -g
            slope = -float(np.dot(g, g))
        step = 1.0
        accepted = False
        flat_accept = False
        for _ in range(60):
            x_new = x + step * d
            f_new, g_new, probs_new, mu_new = fun(x_new)
            if np.isfinite(f_new):
                if f_new <= f + 1e-4 * step * slope:
                    accepted = True
                    break
                # flat regime: objective differences drown in rounding,
                # but the analytic gradient still resolves progress
                if (
                    f_new <= f + 1e-12 * (1.0 + abs(f))
                    and float(np.max(np.abs(g_new))) <= 0.9 * ginf
                ):
                    accepted = True
                    flat_accept = True
                    break
            step *= 0.5
        if not accepted:
            if not polish:
                polish = True
                continue
            break
        if not polish:
            if flat_accept:
                polish = True
            s = x_new - x
            y = g_new - g
            sy = float(np.dot(s, y))
            if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                if fresh_h:
                    H = (sy / float(np.dot(y, y))) * identity
                Hy = H.dot(y)
                rho = 1.0 / sy
                H = (
                    H
                    - rho * np.outer(Hy, s)
                    - rho * np.outer(s, Hy)
                    + (rho * rho * float(np.dot(y, Hy)) + rho) * np.outer(s, s)
                )
                fresh_h = False
        x, f, g, probs, mu = x_new, f_new, g_new, probs_new, mu_new
        iterations += 1
        converged = bool(np.max(np.abs(g)) <= scaled_tol)

    fitted = ProbTable(model.schema, probs)
    gamma_hat = LmlParam(model.schema, _gamma_full(model, free, x))
    dev = deviance_of(data, fitted)
    df = model.df
    pinned_flats = [
        model.schema.flat_index(cell_of_index(model.schema, i))
        for i in model.constraints
    ]
    residual = (
        float(np.max(np.abs(gamma_hat.values[pinned_flats]))) if pinned_flats else 0.0
    )
    return FitResult(
        model=model,
        fitted=fitted,
        gamma_hat=gamma_hat,
        loglik=-f * n,
        deviance=dev,
        df=df,
        p_value=chisq_upper_tail(max(dev, 0.0), df),
        bic=bic(dev, df, n),
        iterations=iterations,
        converged=converged,
        grad_norm=float(np.max(np.abs(g))) * n,
        constraint_residual=residual,
    )
