"""
Desk-scale checks of the interval in C2 - C1.

The difference set equals the intersection over n of the 45-degree
projections of the level-n product squares. A trial samples the squares
(``shared``: two offset trees, the true C1 x C2; ``iid``: independent
offsets per square) and tests whether the window I = [-K a^N, K a^N] lies
in the projected union.
"""

import logging
import math
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .cantor import (
    OffsetTree,
    Square,
    descendant_corners,
    level_lefts,
    phi,
    phi_values,
    sample_offset_tree,
)
from .errors import DivergentBound, InvalidParams, SubdivisionOverflow
from .intervals import IntervalSet
from .models import BoundResult, CoverageRow, IntervalEstimate, ProbabilityEstimate
from .params import Params
from .utils import derive_rng, flatten, trial_blocks, wilson_interval

logger = logging.getLogger(__name__)

UNION_TOL = 1e-15
IID_STREAM = 2
CONVERGED = 1.0 - 1e-12


@dataclass(frozen=True, eq=False)
class CoverageReport:
    depth: int
    union: IntervalSet
    covers_I: bool
    union_length: float
    seed: int
    trial: int = 0


def window(K: float, N: int, p: Params) -> float:
    """Half width K a^N of I."""
    return K * p.a**N


def trees_for_trial(p: Params, depth: int, seed: int, trial: int) -> Tuple[OffsetTree, OffsetTree]:
    return (
        sample_offset_tree(p, depth, seed, 2 * trial),
        sample_offset_tree(p, depth, seed, 2 * trial + 1),
    )


def _shared_levels(p: Params, depth: int, seed: int, trial: int) -> Iterator[np.ndarray]:
    t1, t2 = trees_for_trial(p, depth, seed, trial)
    for n in range(1, depth + 1):
        xs = level_lefts(t1, p, n)
        ys = level_lefts(t2, p, n)
        yield (ys[None, :] - xs[:, None]).ravel()


def _iid_levels(p: Params, depth: int, seed: int, trial: int) -> Iterator[np.ndarray]:
    rng = derive_rng(seed, trial, IID_STREAM)
    u = np.zeros(1)
    v = np.zeros(1)
    side = 1.0
    for _ in range(depth):
        draws = rng.uniform(0.0, p.t, size=(u.size, 4))
        x1 = u + side * (p.b + draws[:, 0])
        x2 = u + side * (p.right_base + draws[:, 1])
        y1 = v + side * (p.b + draws[:, 2])
        y2 = v + side * (p.right_base + draws[:, 3])
        # children in clockwise order Q1..Q4
        u = np.stack([x1, x2, x2, x1], axis=1).ravel()
        v = np.stack([y2, y2, y1, y1], axis=1).ravel()
        side *= p.a
        yield v - u


def projected_unions(
    p: Params, depth: int, seed: int, trial: int = 0, mode: str = "shared"
) -> List[IntervalSet]:
    """Union of the projections of all level-n squares, for n = 1..depth."""
    if depth < 1:
        raise InvalidParams(f"depth must be >= 1, got {depth}")
    if mode == "shared":
        levels = _shared_levels(p, depth, seed, trial)
    elif mode == "iid":
        levels = _iid_levels(p, depth, seed, trial)
    else:
        raise InvalidParams(f"unknown product mode {mode!r}")
    out = []
    for n, diffs in enumerate(levels, start=1):
        side = p.a**n
        out.append(IntervalSet.from_arrays(diffs - side, diffs + side, UNION_TOL))
    return out


def run_trial(
    p: Params, depth: int, K: float, N: int, seed: int, trial: int = 0, mode: str = "shared"
) -> CoverageReport:
    union = projected_unions(p, depth, seed, trial, mode)[-1]
    half = window(K, N, p)
    return CoverageReport(
        depth=depth,
        union=union,
        covers_I=union.contains_interval(-half, half),
        union_length=union.total_length(),
        seed=seed,
        trial=trial,
    )


@dataclass(frozen=True, eq=False)
class _CoverageJob:
    p: Params
    depth: int
    half: float
    seed: int
    mode: str
    trials: range


def _coverage_block(job: _CoverageJob) -> List[Tuple[np.ndarray, np.ndarray]]:
    out = []
    for trial in job.trials:
        unions = projected_unions(job.p, job.depth, job.seed, trial, job.mode)
        covers = np.array([u.contains_interval(-job.half, job.half) for u in unions])
        lengths = np.array([u.total_length() for u in unions])
        out.append((covers, lengths))
    return out


def estimate_interval_prob(
    p: Params,
    K: float,
    N: int,
    depth: int,
    trials: int,
    seed: int,
    mode: str = "shared",
    workers: int = 1,
) -> IntervalEstimate:
    """Fraction of trials whose depth-``depth`` projection contains I, with the depth curve."""
    half = window(K, N, p)
    jobs = [
        _CoverageJob(p, depth, half, seed, mode, block) for block in trial_blocks(trials, workers)
    ]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=len(jobs)) as pool:
            results = flatten(pool.map(_coverage_block, jobs))
    else:
        results = flatten(_coverage_block(job) for job in jobs)
    covers = np.stack([r[0] for r in results])
    lengths = np.stack([r[1] for r in results])
    # covering at depth n+1 forces covering at depth n
    violations = int((covers[:, 1:] & ~covers[:, :-1]).sum())
    if violations:
        logger.warning(f"{violations} coverage nestedness violations")
    curve = []
    for n in range(1, depth + 1):
        hits = int(covers[:, n - 1].sum())
        lo, hi = wilson_interval(hits, trials)
        curve.append(
            CoverageRow(
                depth=n,
                covered=hits,
                trials=trials,
                probability=hits / trials,
                ci_low=lo,
                ci_high=hi,
                mean_union_length=float(lengths[:, n - 1].mean()),
                length_bound=min(2.0, 2.0 * (4.0 * p.a) ** n),
            )
        )
    last = curve[-1]
    estimate = ProbabilityEstimate(
        probability=last.probability,
        ci_low=last.ci_low,
        ci_high=last.ci_high,
        successes=last.covered,
        trials=trials,
    )
    return IntervalEstimate(
        K=K,
        N=N,
        depth=depth,
        mode=mode,
        half_width=half,
        estimate=estimate,
        curve=curve,
        monotonicity_violations=violations,
    )


def coverage_curve(
    p: Params, K: float, N: int, depth: int, trials: int, seed: int, mode: str = "shared"
) -> List[CoverageRow]:
    return estimate_interval_prob(p, K, N, depth, trials, seed, mode).curve


def count_nice(squares: Sequence[Square], x: float, K: float, p: Params) -> Tuple[int, int]:
    """
    (l-, l+): squares with -K <= Phi <= 0 and with 0 <= Phi <= K.

    A square with Phi exactly 0 is counted in both.
    """
    lminus = lplus = 0
    for q in squares:
        value = phi(q, x, p)
        if value is None:
            continue
        if -K <= value <= 0.0:
            lminus += 1
        if 0.0 <= value <= K:
            lplus += 1
    return lminus, lplus


def count_nice_arrays(types: np.ndarray, K: float) -> Tuple[int, int]:
    with np.errstate(invalid="ignore"):
        lminus = int(((types >= -K) & (types <= 0.0)).sum())
        lplus = int(((types >= 0.0) & (types <= K)).sum())
    return lminus, lplus


def descendant_types(
    t1: OffsetTree, t2: OffsetTree, q: Square, x: float, n: int, p: Params
) -> np.ndarray:
    """Present Phi-types of the level-(m+n) descendants of a level-m square."""
    u, v = descendant_corners(t1, t2, q, n, p)
    types = phi_values(u, v, p.a ** (q.level + n), x)
    return types[~np.isnan(types)]


def check_event_A(
    trees: Tuple[OffsetTree, OffsetTree],
    q: Square,
    x: float,
    n: int,
    delta: float,
    rho: float,
    K: float,
    p: Params,
) -> bool:
    """Both nice counts among the level-(m+n) descendants of ``q`` exceed delta rho^n."""
    t1, t2 = trees
    u, v = descendant_corners(t1, t2, q, n, p)
    types = phi_values(u, v, p.a ** (q.level + n), x)
    lminus, lplus = count_nice_arrays(types, K)
    threshold = delta * rho**n
    return lminus > threshold and lplus > threshold


@dataclass(frozen=True)
class SubdivisionScheme:
    """Level-k partition of I into count equal intervals."""

    K: float
    N: int
    a: float
    k: int
    count: int
    half_length: float
    g_k: int

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def length_bound(self) -> float:
        """2 K a^{g_k}; every level-k interval is shorter."""
        return 2.0 * self.K * self.a**self.g_k

    @property
    def left(self) -> float:
        return -self.K * self.a**self.N

    def center(self, index: int) -> float:
        if not 0 <= index < self.count:
            raise IndexError(index)
        return self.left + (index + 0.5) * self.length

    def centers(self) -> Iterator[float]:
        for index in range(self.count):
            yield self.center(index)


def _exponent_sum(k: int) -> int:
    """2 + 3 + ... + (k + 1)."""
    return (k + 1) * (k + 2) // 2 - 1


def subdivision(K: float, N: int, a: float, k: int) -> SubdivisionScheme:
    """
    Split I = [-K a^N, K a^N] into 4^{(2+...+(k+1))N} equal intervals.

    Raises:
        SubdivisionOverflow: when the interval length is not representable.
    """
    if k < 1:
        raise InvalidParams(f"subdivision level must be >= 1, got {k}")
    exponent = _exponent_sum(k) * N
    log_half = math.log(K) + N * math.log(a) - exponent * math.log(4.0)
    half = math.exp(log_half) if log_half > -745.0 else 0.0
    if not half > 0.0:
        raise SubdivisionOverflow(
            f"level-{k} intervals are below float resolution", data={"log_half_length": log_half}
        )
    scheme = SubdivisionScheme(
        K=K,
        N=N,
        a=a,
        k=k,
        count=4**exponent,
        half_length=half,
        g_k=(k + 1) * (k + 2) * N // 2,
    )
    if not scheme.length < scheme.length_bound:
        logger.warning(f"level-{k} length {scheme.length:.3e} not below {scheme.length_bound:.3e}")
    return scheme


def _log_term(k: int, q: float, delta: float, rho: float, N: int) -> float:
    """log of 4^{(2+...+(k+1))N} (1-q)^{delta rho^{kN}}."""
    base = _exponent_sum(k) * N * math.log(4.0)
    if q >= 1.0:
        return -math.inf
    log_keep = math.log1p(-q)
    if log_keep == 0.0:
        return base
    log_growth = math.log(delta) + k * N * math.log(rho)
    if log_growth > 700.0:
        return -math.inf
    return base + math.exp(log_growth) * log_keep


def palis_lower_bound(
    q: float, delta: float, rho: float, N: int, kmax: int, strict: bool = False
) -> BoundResult:
    """
    q * prod_{k=1..kmax} (1 - 4^{(2+...+(k+1))N} (1-q)^{delta rho^{kN}}).

    Negative factors are clamped to 0 and flag the bound as divergent.

    Raises:
        InvalidParams: unless rho^N > 1, 0 <= q <= 1 and delta > 0.
        DivergentBound: for a divergent bound when ``strict`` is set.
    """
    if not 0.0 <= q <= 1.0:
        raise InvalidParams(f"q must lie in [0, 1], got {q}")
    if not delta > 0.0:
        raise InvalidParams(f"delta must be positive, got {delta}")
    if not N * math.log(rho) > 0.0:
        raise InvalidParams(f"rho^N must exceed 1, got rho={rho}, N={N}")
    factors = []
    converged_at = None
    for k in range(1, kmax + 1):
        log_term = _log_term(k, q, delta, rho, N)
        term = math.exp(log_term) if log_term < 700.0 else math.inf
        factor = 1.0 - term
        factors.append(factor)
        if converged_at is None and factor > CONVERGED:
            converged_at = k
    divergent = any(f <= 0.0 for f in factors)
    value = q * math.prod(max(f, 0.0) for f in factors)
    if divergent:
        if strict:
            raise DivergentBound("lower-bound product has a non-positive factor", data=factors)
        logger.warning("lower-bound product is vacuous for these inputs")
    return BoundResult(value=value, factors=factors, converged_at=converged_at, divergent=divergent)
