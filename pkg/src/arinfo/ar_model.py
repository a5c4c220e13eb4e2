"""The AR(1) process z_k = A z_{k-1} + w_k, z_1 = w_1, and its joint Gaussian law.

Trajectories are float arrays of shape ``(n, d)``.  ``whiten``, ``color`` and
``log_density`` also accept a stack of trajectories with shape
``(..., n, d)``; the leading axes are treated as independent samples.

The joint law of the stacked trajectory is N(0, L_A L_A^T) where L_A is the
unit block lower-triangular matrix with blocks A^{i-j}.  Its inverse is block
bidiagonal (I on the diagonal, -A below), which is what ``whiten`` applies in
O(n d^2).  The dense matrices are only built by the ``dense_*`` helpers, which
exist as test oracles.
"""

import csv
import io
import math

import numpy as np

from .errors import NumericOverflowError, SizeCapError
from .seeding import SeedSpec

DENSE_CAP = 2000

_LOG_2PI = math.log(2.0 * math.pi)


def as_system_matrix(A) -> np.ndarray:
    """Validate and return ``A`` as a finite, square float64 array.

    Scalars and 1-element sequences are promoted to ``(1, 1)``.
    """
    arr = np.array(A, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1 and arr.size == 1:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValueError(f"system matrix must be square with dim >= 1, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("system matrix has non-finite entries")
    arr.setflags(write=False)
    return arr


def as_trajectory(traj, dim=None) -> np.ndarray:
    """Return ``traj`` as a float array of shape ``(..., n, d)``.

    A 1-D input is read as a scalar trajectory of shape ``(n, 1)``.
    """
    arr = np.asarray(traj, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim < 2 or arr.shape[-2] < 1 or arr.shape[-1] < 1:
        raise ValueError(f"trajectory must have shape (..., n, d) with n, d >= 1, got {arr.shape}")
    if dim is not None and arr.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: trajectory has d={arr.shape[-1]}, matrix has d={dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("trajectory has non-finite entries")
    return arr


def _check_horizon(n):
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"horizon must be a positive integer, got {n!r}")
    return int(n)


def _first_bad_step(z):
    bad = ~np.isfinite(z)
    bad = bad.reshape(-1, z.shape[-2], z.shape[-1]).any(axis=(0, 2))
    return int(np.argmax(bad)) + 1


def draw_noise(n: int, d: int, seed: SeedSpec) -> np.ndarray:
    """i.i.d. standard normal innovations of shape ``(n, d)`` for ``seed``."""
    n = _check_horizon(n)
    return seed.generator().standard_normal((n, d))


def simulate(A, n: int, seed: SeedSpec, noise=None) -> np.ndarray:
    """Draw one trajectory of length ``n`` from P_A.

    ``noise`` overrides the seeded innovations (test hook); it must have
    shape ``(n, d)``.
    """
    A = as_system_matrix(A)
    n = _check_horizon(n)
    d = A.shape[0]
    if noise is None:
        w = draw_noise(n, d, seed)
    else:
        w = as_trajectory(noise, dim=d)
        if w.shape != (n, d):
            raise ValueError(f"noise must have shape {(n, d)}, got {w.shape}")
    return color(w, A)


def whiten(traj, A) -> np.ndarray:
    """Apply L_A^{-1}: w_1 = z_1 and w_k = z_k - A z_{k-1}."""
    A = as_system_matrix(A)
    z = as_trajectory(traj, dim=A.shape[0])
    w = z.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        w[..., 1:, :] -= z[..., :-1, :] @ A.T
    return w


def color(noise, A) -> np.ndarray:
    """Apply L_A: z_1 = w_1 and z_k = A z_{k-1} + w_k.

    Raises :class:`NumericOverflowError` if any state becomes non-finite.
    """
    A = as_system_matrix(A)
    w = as_trajectory(noise, dim=A.shape[0])
    z = np.empty_like(w)
    z[..., 0, :] = w[..., 0, :]
    At = A.T
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, w.shape[-2]):
            z[..., k, :] = z[..., k - 1, :] @ At + w[..., k, :]
    if not np.all(np.isfinite(z)):
        step = _first_bad_step(z)
        raise NumericOverflowError(f"state overflow at step {step}", step=step)
    return z


def log_density(traj, A):
    """Log-density of N(0, Sigma_A) at the stacked trajectory.

    Uses det Sigma_A = 1, so only the whitened residual norm enters.
    Returns a float for a single trajectory, an array for a stack.
    """
    A = as_system_matrix(A)
    w = whiten(traj, A)
    n, d = w.shape[-2:]
    with np.errstate(over="ignore", invalid="ignore"):
        sq = np.sum(w * w, axis=(-2, -1))
    out = -0.5 * n * d * _LOG_2PI - 0.5 * sq
    if np.ndim(out) == 0:
        return float(out)
    return out


def _check_dense(n, d):
    if n * d > DENSE_CAP:
        raise SizeCapError(f"dense oracle needs n*d <= {DENSE_CAP}, got {n * d}")


def dense_factor(A, n: int) -> np.ndarray:
    """Explicit L_A with blocks A^{i-j} on and below the diagonal."""
    A = as_system_matrix(A)
    n = _check_horizon(n)
    d = A.shape[0]
    _check_dense(n, d)
    powers = np.empty((n + 1, d, d))
    powers[0] = np.eye(d)
    for k in range(1, n):
        powers[k] = A @ powers[k - 1]
    powers[n] = 0.0
    lag = np.subtract.outer(np.arange(n), np.arange(n))
    lag[lag < 0] = n  # points at the zero block
    blocks = powers[lag]  # (n, n, d, d)
    return blocks.transpose(0, 2, 1, 3).reshape(n * d, n * d)


def dense_inverse_factor(A, n: int) -> np.ndarray:
    """Explicit L_A^{-1}: identity on the diagonal, -A on the first subdiagonal."""
    A = as_system_matrix(A)
    n = _check_horizon(n)
    d = A.shape[0]
    _check_dense(n, d)
    Linv = np.eye(n * d)
    for i in range(1, n):
        Linv[i * d:(i + 1) * d, (i - 1) * d:i * d] = -A
    return Linv


def dense_covariance(A, n: int) -> np.ndarray:
    """Sigma_A = L_A L_A^T, assembled densely (oracle use only)."""
    L = dense_factor(A, n)
    return L @ L.T


def trajectory_to_csv(traj) -> str:
    z = as_trajectory(traj)
    if z.ndim != 2:
        raise ValueError("only a single trajectory can be serialized")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k"] + [f"z_{j + 1}" for j in range(z.shape[1])])
    for k, row in enumerate(z, start=1):
        writer.writerow([k] + [format(float(v), ".17g") for v in row])
    return buf.getvalue()


def trajectory_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "k":
        raise ValueError("trajectory CSV must start with a 'k,z_1,...' header")
    d = len(rows[0]) - 1
    data = [r for r in rows[1:] if r]
    if d < 1 or not data:
        raise ValueError("trajectory CSV has no state columns or no rows")
    states = []
    for lineno, r in enumerate(data, start=2):
        if len(r) != d + 1:
            raise ValueError(f"line {lineno}: expected {d + 1} fields, got {len(r)}")
        states.append([float(v) for v in r[1:]])
    return as_trajectory(np.array(states))
