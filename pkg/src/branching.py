"""
Monte Carlo simulation of the multitype branching process Z.

Each individual of type z draws four fresh uniforms on [0, t], its children
are the present offspring types that fall in T. Trials are independent and
each uses the Philox stream of ``(seed, trial)``, so results do not depend
on the number of workers.
"""

import logging
from dataclasses import dataclass
from multiprocessing import Pool
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cantor import exclusivity_violations, offspring_matrix
from .errors import InvalidParams, KTooLarge, NoConvergence, XOutsideT
from .kernel import phi_mass
from .models import (
    MainLemmaCell,
    MainLemmaEstimate,
    ProbabilityEstimate,
    RatioCheck,
    SurvivalFloor,
)
from .params import Params
from .spectral import KernelMatrix, SpectralResult, integrate_nu
from .typespace import TypeSpace
from .utils import derive_rng, flatten, trial_blocks, wilson_interval

logger = logging.getLogger(__name__)

POPULATION_CAP = 10_000_000
STABILISATION_LAG = 5
STABILISATION_THRESHOLD = 0.05
K_CEILING = 0.124

Span = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class Population:
    generation: int
    types: np.ndarray
    ties: int = 0

    def __len__(self) -> int:
        return int(self.types.size)

    @classmethod
    def ancestor(cls, x: float) -> "Population":
        return cls(generation=0, types=np.array([float(x)]))


def step(pop: Population, p: Params, T: TypeSpace, rng: np.random.Generator) -> Population:
    """One generation: children in parent order, within a parent by offspring index."""
    if not len(pop):
        return Population(pop.generation + 1, pop.types, pop.ties)
    draws = rng.uniform(0.0, p.t, size=(len(pop), 4))
    types = offspring_matrix(pop.types, draws, p)
    ties = exclusivity_violations(types)
    present = ~np.isnan(types)
    keep = present & T.contains(np.where(present, types, 0.0))
    return Population(pop.generation + 1, types[keep], pop.ties + ties)


def _count(types: np.ndarray, spans: np.ndarray) -> np.ndarray:
    return ((types[None, :] >= spans[:, :1]) & (types[None, :] <= spans[:, 1:])).sum(axis=1)


@dataclass(frozen=True, eq=False)
class _TrialJob:
    x: float
    n: int
    spans: np.ndarray
    p: Params
    T: TypeSpace
    seed: int
    trials: range
    cap: int


def _run_block(job: _TrialJob) -> List[Tuple[np.ndarray, np.ndarray, bool, int]]:
    out = []
    for trial in job.trials:
        rng = derive_rng(job.seed, trial)
        pop = Population.ancestor(job.x)
        counts = np.full((job.n + 1, job.spans.shape[0]), -1, dtype=np.int64)
        totals = np.full(job.n + 1, -1, dtype=np.int64)
        counts[0] = _count(pop.types, job.spans)
        totals[0] = 1
        capped = False
        for gen in range(1, job.n + 1):
            pop = step(pop, job.p, job.T, rng)
            if len(pop) > job.cap:
                capped = True
                logger.warning(f"trial {trial} exceeded the population cap at generation {gen}")
                break
            counts[gen] = _count(pop.types, job.spans)
            totals[gen] = len(pop)
        out.append((counts, totals, capped, pop.ties))
    return out


@dataclass(frozen=True, eq=False)
class CountStatistics:
    """Per-trial counts Z_k(A) for k = 0..n and every requested set A."""

    x: float
    spans: np.ndarray
    counts: np.ndarray
    totals: np.ndarray
    capped: np.ndarray
    ties: int
    rho: Optional[float] = None

    @property
    def generations(self) -> int:
        return int(self.counts.shape[1]) - 1

    @property
    def capped_trials(self) -> int:
        return int(self.capped.sum())

    def valid(self) -> np.ndarray:
        return self.counts[~self.capped]

    def mean(self, n: int) -> np.ndarray:
        return self.valid()[:, n, :].mean(axis=0)

    def std_error(self, n: int) -> np.ndarray:
        sample = self.valid()[:, n, :]
        return sample.std(axis=0, ddof=1) / np.sqrt(sample.shape[0])

    def extinction(self) -> np.ndarray:
        """Fraction of trials with an empty population, per generation."""
        return (self.totals[~self.capped] == 0).mean(axis=0)

    def W(self, n: int) -> np.ndarray:
        """Z_n / rho^n for every trial and set."""
        if self.rho is None:
            raise ValueError("W needs the dominant eigenvalue")
        return self.valid()[:, n, :] / self.rho**n


def simulate_counts(
    x: float,
    n: int,
    sets: Sequence[Span],
    trials: int,
    seed: int,
    p: Params,
    T: TypeSpace,
    spectral: Optional[SpectralResult] = None,
    cap: int = POPULATION_CAP,
    workers: int = 1,
) -> CountStatistics:
    """
    Run ``trials`` independent copies of Z for ``n`` generations from type ``x``.

    Trials that exceed ``cap`` individuals are aborted and flagged in
    ``capped``; their counts are excluded from the statistics.
    """
    if not bool(T.contains(np.array([x]))[0]):
        raise XOutsideT(f"ancestor type {x} is not in the type space")
    spans = np.asarray(sets, dtype=float).reshape(-1, 2)
    jobs = [
        _TrialJob(x, n, spans, p, T, seed, block, cap) for block in trial_blocks(trials, workers)
    ]
    if workers > 1 and len(jobs) > 1:
        with Pool(processes=len(jobs)) as pool:
            results = flatten(pool.map(_run_block, jobs))
    else:
        results = flatten(_run_block(job) for job in jobs)
    counts = np.stack([r[0] for r in results])
    totals = np.stack([r[1] for r in results])
    capped = np.array([r[2] for r in results], dtype=bool)
    ties = int(sum(r[3] for r in results))
    if capped.any():
        logger.warning(f"{int(capped.sum())} of {trials} trials hit the population cap")
    return CountStatistics(
        x=x,
        spans=spans,
        counts=counts,
        totals=totals,
        capped=capped,
        ties=ties,
        rho=spectral.rho if spectral is not None else None,
    )


def expected_count(x: float, A: Span, n: int, M: KernelMatrix, p: Params) -> float:
    """
    E_x[Z_n(A)] from the discretised kernel.

    The first generation and the indicator of A are integrated exactly per
    quadrature cell; the intermediate generations use powers of M.
    """
    if n == 0:
        return float(A[0] <= x <= A[1])
    g = M.grid
    lo = g.nodes - 0.5 * g.weights
    hi = g.nodes + 0.5 * g.weights
    vec = np.clip((np.minimum(hi, A[1]) - np.maximum(lo, A[0])) / g.weights, 0.0, 1.0)
    for _ in range(n - 1):
        vec = M.values @ vec
    first = sum(phi_mass(i, x, lo, hi, p) for i in range(1, 5))
    return float(np.dot(first, vec))


def _histogram_change(w_now: np.ndarray, w_later: np.ndarray, bins: int = 20) -> float:
    top = max(float(w_now.max(initial=0.0)), float(w_later.max(initial=0.0)))
    if top <= 0.0:
        return 0.0
    edges = np.linspace(0.0, top, bins + 1)
    h1, _ = np.histogram(w_now, bins=edges)
    h2, _ = np.histogram(w_later, bins=edges)
    return float(np.abs(h1 - h2).sum() / max(h1.sum(), 1))


def w_stabilisation(stats: CountStatistics, n: int, column: int = 0) -> float:
    """L1 relative change of the W histogram between generations n and n + 5."""
    return _histogram_change(stats.W(n)[:, column], stats.W(n + STABILISATION_LAG)[:, column])


def estimate_survival_floor(
    xgrid: Sequence[float],
    A: Span,
    y: float,
    trials: int,
    nproxy: int,
    p: Params,
    T: TypeSpace,
    spectral: SpectralResult,
    seed: int = 0,
    workers: int = 1,
    cap: int = POPULATION_CAP,
) -> SurvivalFloor:
    """min over ``xgrid`` of the empirical P_x(W(A) > y), W taken at ``nproxy``."""
    per_x = {}
    worst_change = 0.0
    for x in xgrid:
        stats = simulate_counts(
            x, nproxy + STABILISATION_LAG, [A], trials, seed, p, T, spectral, cap, workers
        )
        w = stats.W(nproxy)[:, 0]
        if not w.size:
            raise NoConvergence(f"every trial from x={x} hit the population cap")
        per_x[f"{x:.6g}"] = float((w > y).mean())
        worst_change = max(worst_change, w_stabilisation(stats, nproxy))
    stabilised = worst_change < STABILISATION_THRESHOLD
    if not stabilised:
        logger.warning(f"W histogram still moving at generation {nproxy}: {worst_change:.3f}")
    return SurvivalFloor(
        rhat=min(per_x.values()),
        per_x=per_x,
        y=y,
        nproxy=nproxy,
        stabilisation=worst_change,
        stabilised=stabilised,
    )


def estimate_w_ratio(
    x: float,
    A: Span,
    B: Span,
    n: int,
    trials: int,
    p: Params,
    T: TypeSpace,
    M: KernelMatrix,
    spectral: SpectralResult,
    seed: int = 0,
    workers: int = 1,
    cap: int = POPULATION_CAP,
) -> RatioCheck:
    """Pooled Z_n(B)/Z_n(A) over surviving trials against the nu-mass ratio."""
    stats = simulate_counts(x, n, [A, B], trials, seed, p, T, spectral, cap, workers)
    final = stats.valid()[:, n, :]
    alive = final[:, 0] > 0
    empirical = float(final[alive, 1].sum() / max(final[alive, 0].sum(), 1))
    predicted = integrate_nu(M.grid, spectral.nu, *B) / integrate_nu(M.grid, spectral.nu, *A)
    return RatioCheck(empirical=empirical, predicted=predicted, surviving_trials=int(alive.sum()))


def default_K(T: TypeSpace) -> float:
    lo, hi = T.middle()
    return min(K_CEILING, 0.9 * min(-lo, hi))


def _check_K(K: float, T: TypeSpace) -> None:
    if not 0.0 < K < 0.125:
        raise KTooLarge(f"K must lie in (0, 1/8), got {K}")
    if not T.components.contains_interval(-K, K):
        raise KTooLarge(f"[-{K}, {K}] is not inside the type space")


def calibrate_delta(
    p: Params,
    T: TypeSpace,
    spectral: SpectralResult,
    K: float,
    n: int,
    trials: int,
    seed: int = 0,
    x: float = 0.0,
    workers: int = 1,
    cap: int = POPULATION_CAP,
) -> float:
    """Half the lower quartile of min(Z_n([-K,0]), Z_n([0,K]))/rho^n over two-sided survivors."""
    _check_K(K, T)
    stats = simulate_counts(x, n, [(-K, 0.0), (0.0, K)], trials, seed, p, T, spectral, cap, workers)
    final = stats.valid()[:, n, :]
    both = (final > 0).all(axis=1)
    if not both.any():
        raise NoConvergence("pilot run produced no trial with both nice counts positive")
    scaled = final[both].min(axis=1) / spectral.rho**n
    return float(0.5 * np.quantile(scaled, 0.25))


def estimate_main_lemma(
    p: Params,
    T: TypeSpace,
    spectral: SpectralResult,
    K: float,
    delta: float,
    Nrange: Sequence[int],
    xgrid: Sequence[float],
    trials: int,
    seed: int = 0,
    workers: int = 1,
    cap: int = POPULATION_CAP,
) -> MainLemmaEstimate:
    """
    Empirical P_x(Z_n([-K,0]) > delta rho^n and Z_n([0,K]) > delta rho^n).

    Raises:
        KTooLarge: unless 0 < K < 1/8 and [-K, K] lies in T.
        NoConvergence: if every trial from some x hits the population cap.
    """
    _check_K(K, T)
    if not delta > 0.0:
        raise InvalidParams(f"delta must be positive, got {delta}")
    nmax = max(Nrange)
    cells = []
    capped = 0
    for x in xgrid:
        stats = simulate_counts(
            x, nmax, [(-K, 0.0), (0.0, K)], trials, seed, p, T, spectral, cap, workers
        )
        capped += stats.capped_trials
        if stats.capped_trials == trials:
            raise NoConvergence(f"every trial from x={x} hit the population cap")
        for n in Nrange:
            final = stats.valid()[:, n, :]
            threshold = delta * spectral.rho**n
            hits = int(((final[:, 0] > threshold) & (final[:, 1] > threshold)).sum())
            total = int(final.shape[0])
            lo, hi = wilson_interval(hits, total)
            cells.append(
                MainLemmaCell(
                    x=float(x),
                    n=int(n),
                    probability=hits / total,
                    ci_low=lo,
                    ci_high=hi,
                    trials=total,
                )
            )
    worst = min(cells, key=lambda c: c.probability)
    return MainLemmaEstimate(
        K=K,
        delta=delta,
        N=min(Nrange),
        rho=spectral.rho,
        table=cells,
        qhat=worst.probability,
        ci=0.5 * (worst.ci_high - worst.ci_low),
        ci_low=worst.ci_low,
        capped_trials=capped,
    )


def estimate_p24(x: float, K: float, trials: int, seed: int, p: Params) -> ProbabilityEstimate:
    """Probability that children 2 and 4 are both born with types in [-K, K]."""
    if not -K <= x <= K:
        raise XOutsideT(f"x={x} is outside [-{K}, {K}]")
    rng = derive_rng(seed, 0)
    draws = rng.uniform(0.0, p.t, size=(trials, 4))
    types = offspring_matrix(np.full(trials, x), draws, p)
    with np.errstate(invalid="ignore"):
        hits = int(((np.abs(types[:, 1]) <= K) & (np.abs(types[:, 3]) <= K)).sum())
    lo, hi = wilson_interval(hits, trials)
    return ProbabilityEstimate(
        probability=hits / trials, ci_low=lo, ci_high=hi, successes=hits, trials=trials
    )
