"""Fast transforms on vectors indexed by subsets of a finite ground set.

A vector of length ``2**p`` holds one value per subset.  Variable ``k``
(0-based) owns the bit of weight ``2**(p-1-k)``, i.e. subsets are ordered
by binary counting on the row-major bitmask: index 0 is the empty set and
index ``2**p - 1`` the full set.

All transforms run in ``O(p * 2**p)`` by one in-place sweep per bit and
are exact linear maps (no normalization).  In the usual probabilistic
reading, ``probs_to_marginals`` sends joint probabilities of a binary
vector to the monotone marginals ``mu_S = P(all of S equal 1)`` and
``marginals_to_probs`` inverts it.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError, NonPositiveTableError

__all__ = [
    "zeta_binary",
    "moebius_binary",
    "zeta_transpose_binary",
    "moebius_transpose_binary",
    "gamma_binary",
    "gamma_to_moebius_binary",
    "probs_to_marginals",
    "marginals_to_probs",
    "subset_of_index",
    "index_of_subset",
]


def _check(values) -> tuple[np.ndarray, int]:
    out = np.array(values, dtype=np.float64)
    n = out.size
    p = n.bit_length() - 1
    if n <= 0 or (1 << p) != n:
        raise DataError(f"subset vector length {n} is not a power of two")
    return out, p


def _views(out: np.ndarray, p: int, k: int):
    # middle axis of the (-1, 2, 2**(p-1-k)) reshape is bit k
    low = 1 << (p - 1 - k)
    v = out.reshape(-1, 2, low)
    return v[:, 0, :], v[:, 1, :]


def zeta_binary(values) -> np.ndarray:
    """Superset sums: ``out_S = sum over T >= S of v_T``."""
    out, p = _check(values)
    for k in range(p):
        absent, present = _views(out, p, k)
        absent += present
    return out


def moebius_binary(values) -> np.ndarray:
    """Inverse of :func:`zeta_binary` (alternating superset sums)."""
    out, p = _check(values)
    for k in range(p):
        absent, present = _views(out, p, k)
        absent -= present
    return out


def zeta_transpose_binary(values) -> np.ndarray:
    """Subset sums: ``out_S = sum over T <= S of v_T``."""
    out, p = _check(values)
    for k in range(p):
        absent, present = _views(out, p, k)
        present += absent
    return out


def moebius_transpose_binary(values) -> np.ndarray:
    """Inverse of :func:`zeta_transpose_binary` (alternating subset sums)."""
    out, p = _check(values)
    for k in range(p):
        absent, present = _views(out, p, k)
        present -= absent
    return out


probs_to_marginals = zeta_binary
marginals_to_probs = moebius_binary


def gamma_binary(marginals) -> np.ndarray:
    """Interaction vector of monotone binary marginals.

    ``gamma_S = sum over T <= S of (-1)**|S minus T| * log(mu_T)``; requires
    every marginal to be strictly positive.
    """
    mu, p = _check(marginals)
    if np.min(mu) <= 0.0:
        bad = int(np.argmin(mu))
        raise NonPositiveTableError(
            f"marginal of subset {sorted(subset_of_index(bad, p))} is "
            f"{mu[bad]!r}; interactions need strictly positive marginals"
        )
    return moebius_transpose_binary(np.log(mu))


def gamma_to_moebius_binary(gamma) -> np.ndarray:
    """Inverse of :func:`gamma_binary`: ``mu = exp(subset sums of gamma)``."""
    g, p = _check(gamma)
    return np.exp(zeta_transpose_binary(g))


def index_of_subset(subset, p: int) -> int:
    mask = 0
    for k in subset:
        if not 0 <= k < p:
            raise DataError(f"variable {k} out of range for p={p}")
        mask |= 1 << (p - 1 - k)
    return mask


def subset_of_index(index: int, p: int) -> frozenset:
    return frozenset(k for k in range(p) if index & (1 << (p - 1 - k)))
