"""State covariances P_i = sum_{k<=i} A^{k-1} A^{T,k-1} and their running sum G_n.

P_i is the covariance of z_i under P_A and G_n = P_1 + ... + P_n is the
weighting that appears in the parameter-error functional.  Both come from the
Lyapunov-type recursion P_{j+1} = I + A P_j A^T; powers of A are never formed.
"""

import numpy as np

from .ar_model import as_system_matrix
from .errors import NumericOverflowError


def _step(A, P, eye):
    with np.errstate(over="ignore", invalid="ignore"):
        P = eye + A @ P @ A.T
        return 0.5 * (P + P.T)


def _require_index(i, name):
    if isinstance(i, bool) or int(i) != i or i < 1:
        raise ValueError(f"{name} must be a positive integer, got {i!r}")
    return int(i)


def prefix_covariance(A, i: int) -> np.ndarray:
    """P_i, with P_1 = I."""
    A = as_system_matrix(A)
    i = _require_index(i, "i")
    eye = np.eye(A.shape[0])
    P = eye.copy()
    for j in range(1, i):
        P = _step(A, P, eye)
        if not np.all(np.isfinite(P)):
            raise NumericOverflowError(f"prefix covariance overflow at step {j + 1}", step=j + 1)
    return P


def _gram(A: np.ndarray, n: int) -> np.ndarray:
    # n = 0 is allowed here and gives the zero matrix
    eye = np.eye(A.shape[0])
    G = np.zeros_like(eye)
    P = eye.copy()
    for i in range(1, n + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            G = G + P
        if not np.all(np.isfinite(G)):
            raise NumericOverflowError(f"Gram matrix overflow at step {i}", step=i)
        if i < n:
            P = _step(A, P, eye)
    return G


def gram(A, n: int) -> np.ndarray:
    """G_n(A) = P_1 + ... + P_n (unnormalized)."""
    A = as_system_matrix(A)
    n = _require_index(n, "n")
    return _gram(A, n)


def error_trace(Astar, A, G) -> float:
    """tr((A* - A)^T (A* - A) G) for a precomputed weighting G."""
    delta = Astar - A
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.einsum("ij,jk,ik->", delta, G, delta))
    if not np.isfinite(value):
        raise NumericOverflowError("error trace overflow")
    return max(value, 0.0)


def weighted_error(Astar, Ahat, n: int) -> float:
    """tr((A* - Â)^T (A* - Â) G_n(A*)) / n, the parameter error in the bound.

    Equals ``trace_functional(Astar, Ahat, n + 1) / n``: the divergence at
    horizon n only involves G_{n-1}.
    """
    Astar = as_system_matrix(Astar)
    Ahat = as_system_matrix(Ahat)
    if Astar.shape != Ahat.shape:
        raise ValueError(f"dimension mismatch: {Astar.shape} vs {Ahat.shape}")
    n = _require_index(n, "n")
    return error_trace(Astar, Ahat, _gram(Astar, n)) / n
