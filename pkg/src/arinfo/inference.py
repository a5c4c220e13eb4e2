"""Finite-class maximum likelihood, Monte-Carlo trial loops and bound certificates."""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import ar_model
from ._pool import map_ordered
from .ar_model import as_system_matrix, as_trajectory
from .divergence import hellinger_sq_exact, hellinger_sq_mc
from .errors import NumericOverflowError
from .gram import _gram
from .seeding import SeedSpec

BOUND_CONSTANT = 2.0e4
DISTINCT_TOL = 1e-12
GRID_CAP = 10**6
HELLINGER_MC_SAMPLES = 10_000
# per-member Hellinger estimates (only when n*d exceeds the dense cap) use
# streams HELLINGER_STREAM + member_index
HELLINGER_STREAM = 2**63
MI_ESTIMATOR = "plug-in entropy of the selection frequencies (biased low)"

_LOG_2PI = math.log(2.0 * math.pi)
_MEMBER_CHUNK = 4096
_TRIAL_CHUNK = 128


def _check_distinct(members):
    m = members.shape[0]
    flat = members.reshape(m, -1)
    for start in range(0, m, 512):
        block = flat[start:start + 512]
        diff = np.abs(block[:, None, :] - flat[None, :, :]).max(axis=2)
        rows, cols = np.nonzero(diff <= DISTINCT_TOL)
        rows = rows + start
        clash = rows < cols
        if np.any(clash):
            i, j = rows[clash][0], cols[clash][0]
            raise ValueError(f"hypothesis class members {i} and {j} coincide")


@dataclass(frozen=True, eq=False)
class HypothesisClass:
    """A finite, indexed list of distinct dynamics matrices, shape ``(m, d, d)``."""

    members: np.ndarray
    truth_index: int | None = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        members = np.array(self.members, dtype=np.float64)
        if members.ndim != 3 or members.shape[0] < 1 or members.shape[1] != members.shape[2]:
            raise ValueError(f"members must have shape (m, d, d) with m >= 1, got {members.shape}")
        if not np.all(np.isfinite(members)):
            raise ValueError("hypothesis class has non-finite entries")
        if self.check:
            _check_distinct(members)
        if self.truth_index is not None and not 0 <= self.truth_index < members.shape[0]:
            raise ValueError(f"truth_index {self.truth_index} out of range")
        members.setflags(write=False)
        object.__setattr__(self, "members", members)

    @classmethod
    def from_members(cls, members, truth=None):
        mats = [as_system_matrix(A) for A in members]
        if not mats:
            raise ValueError("hypothesis class must be nonempty")
        dims = {A.shape for A in mats}
        if len(dims) != 1:
            raise ValueError(f"members have mixed shapes {sorted(dims)}")
        out = cls(np.stack(mats))
        return out if truth is None else out.with_truth(truth)

    @property
    def dim(self):
        return self.members.shape[1]

    @property
    def size(self):
        return self.members.shape[0]

    def __len__(self):
        return self.size

    def __getitem__(self, j):
        return self.members[j]

    def index_of(self, A):
        """Index of the member within 1e-12 (max-abs) of ``A``, or None."""
        A = as_system_matrix(A)
        if A.shape != self.members.shape[1:]:
            raise ValueError(f"dimension mismatch: {A.shape} vs class dim {self.dim}")
        dist = np.abs(self.members - A).reshape(self.size, -1).max(axis=1)
        hits = np.flatnonzero(dist <= DISTINCT_TOL)
        return int(hits[0]) if hits.size else None

    def with_truth(self, A):
        """Mark ``A`` as the truth, appending it if it is not already a member."""
        A = as_system_matrix(A)
        idx = self.index_of(A)
        if idx is not None:
            return HypothesisClass(self.members, truth_index=idx, check=False)
        members = np.concatenate([self.members, A[None]])
        return HypothesisClass(members, truth_index=self.size, check=False)


def grid_class(center, radius: float, points_per_axis: int, cap: int = GRID_CAP) -> HypothesisClass:
    """Cartesian grid of k equispaced values per entry over [c_ij - r, c_ij + r].

    Members are ordered like ``itertools.product`` over the row-major
    entries (last entry varies fastest).  ``k = 1`` gives the center alone.
    """
    center = as_system_matrix(center)
    if not radius > 0 or not math.isfinite(radius):
        raise ValueError(f"radius must be positive and finite, got {radius}")
    k = int(points_per_axis)
    if k != points_per_axis or k < 1:
        raise ValueError(f"points_per_axis must be a positive integer, got {points_per_axis}")
    d = center.shape[0]
    size = k ** (d * d)
    if size > cap:
        raise ValueError(f"grid class would have {size} members, above the cap {cap}")
    if k == 1:
        return HypothesisClass(center[None], check=False)
    offsets = np.linspace(-radius, radius, k)
    grid = np.array(list(itertools.product(offsets, repeat=d * d)))
    members = center.reshape(1, -1) + grid
    return HypothesisClass(members.reshape(size, d, d), check=False)


def _member_log_densities(z, members):
    n, d = z.shape
    const = -0.5 * n * d * _LOG_2PI
    out = np.empty(members.shape[0])
    with np.errstate(over="ignore", invalid="ignore"):
        head = float(z[0] @ z[0])
        for start in range(0, members.shape[0], _MEMBER_CHUNK):
            block = members[start:start + _MEMBER_CHUNK]
            resid = z[None, 1:, :] - z[None, :-1, :] @ block.transpose(0, 2, 1)
            out[start:start + block.shape[0]] = const - 0.5 * (head + np.sum(resid * resid, axis=(1, 2)))
    out[~np.isfinite(out)] = -np.inf
    return out


def mle_select(traj, hclass: HypothesisClass):
    """Return ``(index, log_likelihoods)`` for the maximum likelihood member.

    Ties go to the smallest index.  Members whose log-likelihood is not
    finite are never selected; if none is finite, the trajectory has
    overflowed and :class:`NumericOverflowError` is raised.
    """
    z = as_trajectory(traj, dim=hclass.dim)
    if z.ndim != 2:
        raise ValueError("mle_select takes a single trajectory")
    loglik = _member_log_densities(z, hclass.members)
    if not np.any(np.isfinite(loglik)):
        raise NumericOverflowError("log-likelihood is non-finite for every member")
    return int(np.argmax(loglik)), loglik


def ols_fit(traj) -> np.ndarray:
    """Least-squares (unconstrained Gaussian ML) estimate of A."""
    z = as_trajectory(traj)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("ols_fit needs a single trajectory with n >= 2")
    cross = z[1:].T @ z[:-1]
    second = z[:-1].T @ z[:-1]
    return cross @ np.linalg.pinv(second)


def _frequencies(counts):
    c = np.asarray(counts)
    if c.ndim != 1 or c.size < 1 or np.any(c < 0) or np.any(c != np.floor(c)):
        raise ValueError("counts must be a nonempty vector of nonnegative integers")
    total = c.sum()
    if total < 1:
        raise ValueError("counts must not all be zero")
    p = c[c > 0] / total
    return p, int(total)


def selection_entropy(counts) -> float:
    """Plug-in entropy (nats) of the empirical selection distribution."""
    p, _ = _frequencies(counts)
    h = float(-np.sum(p * np.log(p)))
    return min(max(h, 0.0), math.log(len(counts)))


def selection_entropy_se(counts) -> float:
    """Delta-method standard error of :func:`selection_entropy`."""
    p, total = _frequencies(counts)
    logp = np.log(p)
    h = -np.sum(p * logp)
    var = max(float(np.sum(p * logp**2) - h**2), 0.0)
    return math.sqrt(var / total)


@dataclass(frozen=True)
class TrialSummary:
    class_size: int
    horizon: int
    trials: int
    truth_index: int
    selection_counts: tuple
    mean_weighted_error: float
    se_weighted_error: float
    mean_hellinger_sq: float
    se_hellinger_sq: float
    mean_misselection: float
    se_misselection: float
    hellinger_method: str = "exact"


def _mean_se(x):
    mean = float(np.mean(x))
    if x.size < 2:
        return mean, 0.0
    return mean, float(np.std(x, ddof=1)) / math.sqrt(x.size)


def _trial_chunk(args):
    Astar, hclass, n, seed, first, last = args
    d = Astar.shape[0]
    chosen = np.empty(last - first, dtype=np.int64)
    for t in range(first, last):
        w = seed.generator(t).standard_normal((n, d))
        try:
            z = ar_model.color(w, Astar)
            chosen[t - first], _ = mle_select(z, hclass)
        except NumericOverflowError as exc:
            exc.trial = t
            raise
    return chosen


def run_trials(Astar, hclass: HypothesisClass, n: int, trials: int, seed: SeedSpec,
               workers=1, hellinger_samples=HELLINGER_MC_SAMPLES) -> TrialSummary:
    """Repeat simulate -> MLE ``trials`` times under A* and aggregate.

    Trial t draws its innovations from ``seed.generator(t)``.  Per-trial
    results are merged in trial order, so the summary does not depend on
    ``workers``.
    """
    Astar = as_system_matrix(Astar)
    truth = hclass.index_of(Astar)
    if truth is None:
        raise ValueError("the true system matrix is not a member of the hypothesis class")
    n = int(n)
    if n < 1 or trials < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    d = hclass.dim

    bounds = list(range(0, trials, _TRIAL_CHUNK)) + [trials]
    jobs = [(Astar, hclass, n, seed, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    chosen = np.concatenate(map_ordered(_trial_chunk, jobs, workers))
    counts = np.bincount(chosen, minlength=hclass.size)

    G = _gram(Astar, n)
    delta = Astar[None] - hclass.members[np.unique(chosen)]
    with np.errstate(over="ignore", invalid="ignore"):
        err = np.einsum("mij,jk,mik->m", delta, G, delta) / n
    if not np.all(np.isfinite(err)):
        raise NumericOverflowError("weighted error overflow")
    err_by_member = dict(zip(np.unique(chosen).tolist(), np.maximum(err, 0.0)))

    exact = n * d <= ar_model.DENSE_CAP
    h2_by_member, h2_var = {}, 0.0
    for j in np.unique(chosen).tolist():
        if exact:
            h2_by_member[j] = hellinger_sq_exact(hclass[j], Astar, n).value
        else:
            est = hellinger_sq_mc(hclass[j], Astar, n, hellinger_samples,
                                  SeedSpec(seed.base_seed, HELLINGER_STREAM + j))
            h2_by_member[j] = min(max(est.value, 0.0), 1.0)
            h2_var += (counts[j] / trials) ** 2 * est.std_error**2

    we = np.array([err_by_member[j] for j in chosen.tolist()])
    h2 = np.array([h2_by_member[j] for j in chosen.tolist()])
    miss = (chosen != truth).astype(float)
    mean_we, se_we = _mean_se(we)
    mean_h2, se_h2 = _mean_se(h2)
    mean_miss, se_miss = _mean_se(miss)
    return TrialSummary(
        class_size=hclass.size,
        horizon=n,
        trials=trials,
        truth_index=truth,
        selection_counts=tuple(int(c) for c in counts),
        mean_weighted_error=mean_we,
        se_weighted_error=se_we,
        mean_hellinger_sq=mean_h2,
        se_hellinger_sq=math.sqrt(se_h2**2 + h2_var),
        mean_misselection=mean_miss,
        se_misselection=se_miss,
        hellinger_method="exact" if exact else "mc",
    )


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    se_lhs: float
    mi_estimate: float
    se_mi: float
    rhs_mi: float
    rhs_log_card: float
    holds_mi: bool
    holds_log_card: bool
    slack_ratio: float
    mi_estimator: str = MI_ESTIMATOR


def theorem1_certificate(summary: TrialSummary, hclass: HypothesisClass) -> BoundReport:
    """Compare the mean weighted error with 2e4 * I/n and 2e4 * log|class|/n.

    A bound holds when ``lhs - 3 se`` does not exceed it.
    """
    if summary.class_size != hclass.size:
        raise ValueError("summary was produced for a different class size")
    n = summary.horizon
    mi = selection_entropy(summary.selection_counts)
    rhs_mi = BOUND_CONSTANT * mi / n
    rhs_log_card = BOUND_CONSTANT * math.log(hclass.size) / n
    lhs = summary.mean_weighted_error
    lower = lhs - 3.0 * summary.se_weighted_error
    slack = math.inf if lhs == 0 else rhs_mi / lhs
    return BoundReport(
        lhs=lhs,
        se_lhs=summary.se_weighted_error,
        mi_estimate=mi,
        se_mi=selection_entropy_se(summary.selection_counts),
        rhs_mi=rhs_mi,
        rhs_log_card=rhs_log_card,
        holds_mi=bool(lower <= rhs_mi),
        holds_log_card=bool(lower <= rhs_log_card),
        slack_ratio=slack,
    )


def hellinger_log_transform(e_h2: float) -> float:
    """-2 log(1 - e/2), which dominates e on [0, 1]."""
    return -2.0 * math.log1p(-0.5 * e_h2)


@dataclass(frozen=True)
class Theorem2Report:
    e_h2: float
    se_e_h2: float
    middle_term: float
    rhs: float
    holds_left: bool
    holds_right: bool

    @property
    def holds(self):
        return self.holds_left and self.holds_right


def theorem2_certificate(summary: TrialSummary) -> Theorem2Report:
    """The chain E H^2 <= -2 log(1 - E H^2 / 2) <= 2 I.

    The 3 SE tolerance is applied to E H^2 on the left and carried through
    the log transform on the right.
    """
    e_h2 = summary.mean_hellinger_sq
    se = summary.se_hellinger_sq
    middle = hellinger_log_transform(e_h2)
    rhs = 2.0 * selection_entropy(summary.selection_counts)
    lowered = hellinger_log_transform(max(e_h2 - 3.0 * se, 0.0))
    return Theorem2Report(
        e_h2=e_h2,
        se_e_h2=se,
        middle_term=middle,
        rhs=rhs,
        holds_left=bool(e_h2 - 3.0 * se <= middle),
        holds_right=bool(lowered <= rhs),
    )
