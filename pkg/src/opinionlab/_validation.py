"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InvalidNetwork, InvalidSize

ROW_SUM_TOL = 1e-12


def check_weight_matrix(A, *, normalize=False, zero_diagonal=True):
    """Return ``A`` as a float64 row-stochastic matrix or raise InvalidNetwork.

    With ``normalize=True`` a non-negative adjacency matrix is rescaled so each
    row sums to one (rows that are all zero are rejected either way).
    """
    try:
        A = check_array(A, dtype=np.float64, ensure_2d=True, copy=True,
                        ensure_min_samples=2, ensure_min_features=2)
    except ValueError as exc:
        raise InvalidNetwork(str(exc)) from exc
    n, k = A.shape
    if n != k:
        raise InvalidNetwork(f"weight matrix must be square, got {A.shape}")
    if np.any(A < 0):
        raise InvalidNetwork("weight matrix has negative entries")
    if zero_diagonal:
        if normalize:
            np.fill_diagonal(A, 0.0)
        elif np.any(np.diag(A) != 0):
            raise InvalidNetwork("A_ii must be 0; self-weight is carried by 1 - gamma")
    sums = A.sum(axis=1)
    if np.any(sums == 0):
        raise InvalidNetwork(f"rows {np.flatnonzero(sums == 0).tolist()} have no neighbours")
    if normalize:
        A /= sums[:, None]
    elif np.max(np.abs(sums - 1.0)) > ROW_SUM_TOL:
        raise InvalidNetwork("rows of the weight matrix must sum to 1")
    return A


def check_vector(v, n, name, *, low=None, high=None, low_open=False):
    """Broadcast a scalar or validate a length-``n`` vector with optional bounds."""
    if isinstance(v, numbers.Real):
        v = np.full(n, float(v))
    else:
        v = np.asarray(v, dtype=np.float64).copy()
        if v.ndim != 1 or v.shape[0] != n:
            raise InvalidSize(f"{name} must have length {n}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    if low is not None:
        bad = v <= low if low_open else v < low
        if np.any(bad):
            op = ">" if low_open else ">="
            raise ValueError(f"{name} must be {op} {low}, got {v[bad].tolist()}")
    if high is not None and np.any(v > high):
        raise ValueError(f"{name} must be <= {high}")
    return v


def check_realizations(x, n, name="x"):
    """Accept a single vector or a (replicas, n) array; return 2-D plus a flag."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    if x2.ndim != 2 or x2.shape[1] != n:
        raise InvalidSize(f"{name} must have trailing dimension {n}, got {x.shape}")
    return x2, single


def check_random_state(seed):
    """Map None / int / Generator to a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
