"""Divergences between the trajectory laws P_A and P_B at a common horizon n.

Exact quantities:

* ``trace_functional``: tr(Sigma_A* Sigma_A^{-1} - I) in closed form,
  tr((A* - A)^T (A* - A) G_{n-1}(A*)), with ``trace_functional_dense`` as a
  dense oracle.
* ``kl``: half the trace functional (both laws have unit determinant).
* ``hellinger_sq_exact``: 1 - det((Sigma_A + Sigma_B)/2)^{-1/2}.

Sampled quantities (``hellinger_sq_mc``, ``tv_mc``) draw z ~ P_A and use the
log-ratio l_A(z) - l_B(z), computed from whitened residuals.  Samples are
generated in fixed-size chunks, chunk ``c`` drawing from
``seed.generator(c)``, and reduced in chunk order.
"""

from dataclasses import dataclass

import numpy as np

from . import ar_model
from ._pool import map_ordered
from .ar_model import as_system_matrix
from .errors import NumericOverflowError
from .gram import _gram, error_trace

CHUNK_SIZE = 16384


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    std_error: float = 0.0
    sample_count: int = 0


def _pair(A, B):
    A = as_system_matrix(A)
    B = as_system_matrix(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A, B


def _horizon(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"horizon must be a positive integer, got {n!r}")
    return int(n)


def trace_functional(Astar, A, n: int) -> float:
    """tr(Sigma_{A*} Sigma_A^{-1}) - n d via the Gram recursion.

    Block row i of L_A^{-1} L_{A*} carries (A* - A) A*^{k-1} for k < i, so only
    the first n - 1 state covariances enter.
    """
    Astar, A = _pair(Astar, A)
    n = _horizon(n)
    return error_trace(Astar, A, _gram(Astar, n - 1))


def trace_functional_dense(Astar, A, n: int) -> float:
    """Dense oracle for :func:`trace_functional`.

    Forms M = L_A^{-1} L_{A*} from the explicit factors and returns
    ||M||_F^2 - n d = tr(Sigma_{A*} Sigma_A^{-1}) - n d.  Working with the
    inverse factor avoids solving against Sigma_A, whose condition number
    explodes for unstable A.
    """
    Astar, A = _pair(Astar, A)
    n = _horizon(n)
    d = A.shape[0]
    M = ar_model.dense_inverse_factor(A, n) @ ar_model.dense_factor(Astar, n)
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.sum(M * M)) - n * d
    if not np.isfinite(value):
        raise NumericOverflowError("dense trace overflow")
    return value


def kl(A, B, n: int) -> DivergenceEstimate:
    """KL(P_A || P_B); A plays the role of the truth."""
    return DivergenceEstimate(0.5 * trace_functional(A, B, n))


def hellinger_sq_exact(A, B, n: int) -> DivergenceEstimate:
    """Squared Hellinger distance (1/2 normalization) in closed form.

    det((Sigma_A + Sigma_B)/2) = det((I + M M^T)/2) with M = L_A^{-1} L_B.
    The Cholesky factor of I + M M^T is taken as the R factor of the QR
    decomposition of [I; M^T], which keeps the identity term exact even when
    M has huge entries.  No jitter is ever added.
    """
    A, B = _pair(A, B)
    n = _horizon(n)
    if np.array_equal(A, B):
        return DivergenceEstimate(0.0)
    d = A.shape[0]
    LB = ar_model.dense_factor(B, n)
    # whiten each column of L_B under A
    cols = LB.T.reshape(n * d, n, d)
    M = ar_model.whiten(cols, A).reshape(n * d, n * d).T
    if not np.all(np.isfinite(M)):
        raise NumericOverflowError("Hellinger determinant overflow")
    R = np.linalg.qr(np.vstack([np.eye(n * d), M.T]), mode="r")
    diag = np.abs(np.diag(R))
    if not np.all(diag > 0) or not np.all(np.isfinite(diag)):
        raise np.linalg.LinAlgError("I + M M^T factorization broke down")
    logdet = 2.0 * float(np.sum(np.log(diag))) - n * d * np.log(2.0)
    value = float(-np.expm1(-0.5 * logdet))
    return DivergenceEstimate(min(max(value, 0.0), 1.0))


def _log_ratio_chunk(args):
    A, B, n, size, seed, chunk = args
    d = A.shape[0]
    w = seed.generator(chunk).standard_normal((size, n, d))
    z = ar_model.color(w, A)
    wb = ar_model.whiten(z, B)
    with np.errstate(over="ignore", invalid="ignore"):
        return 0.5 * (np.sum(wb * wb, axis=(1, 2)) - np.sum(w * w, axis=(1, 2)))


def log_ratio_samples(A, B, n: int, samples: int, seed, workers=1) -> np.ndarray:
    """l_A(z) - l_B(z) for ``samples`` draws z ~ P_A, in deterministic order."""
    A, B = _pair(A, B)
    n = _horizon(n)
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    sizes = [CHUNK_SIZE] * (samples // CHUNK_SIZE)
    if samples % CHUNK_SIZE:
        sizes.append(samples % CHUNK_SIZE)
    jobs = [(A, B, n, size, seed, c) for c, size in enumerate(sizes)]
    out = np.concatenate(map_ordered(_log_ratio_chunk, jobs, workers))
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.isfinite(out)))
        raise NumericOverflowError(f"non-finite log-ratio in sample {bad}")
    return out


def _summarize(terms, offset=0.0, sign=1.0):
    m = terms.size
    value = offset + sign * float(np.mean(terms))
    se = float(np.std(terms, ddof=1)) / float(np.sqrt(m))
    return value, se


def hellinger_sq_mc(A, B, n: int, samples: int, seed, workers=1) -> DivergenceEstimate:
    """1 - mean exp((l_B - l_A) / 2) over z ~ P_A."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    A, B = _pair(A, B)
    if np.array_equal(A, B):
        return DivergenceEstimate(0.0, 0.0, samples)
    r = log_ratio_samples(A, B, n, samples, seed, workers)
    with np.errstate(over="ignore"):
        terms = np.exp(-0.5 * r)
    if not np.all(np.isfinite(terms)):
        raise NumericOverflowError("half log-ratio overflowed in exp")
    value, se = _summarize(terms, offset=1.0, sign=-1.0)
    return DivergenceEstimate(value, se, samples)


def tv_mc(A, B, n: int, samples: int, seed, workers=1) -> DivergenceEstimate:
    """mean max(0, 1 - exp(l_B - l_A)) over z ~ P_A."""
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    A, B = _pair(A, B)
    if np.array_equal(A, B):
        return DivergenceEstimate(0.0, 0.0, samples)
    r = log_ratio_samples(A, B, n, samples, seed, workers)
    with np.errstate(over="ignore"):
        terms = np.maximum(0.0, -np.expm1(-r))
    value, se = _summarize(terms)
    return DivergenceEstimate(min(max(value, 0.0), 1.0), se, samples)

