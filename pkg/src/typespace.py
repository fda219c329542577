"""
Type space T(eps) of the branching process and its support iteration.

In the Simple region T is one interval. In the General region the removal
recursion cuts 3^l - 1 holes out of [-1 + c, 1 - c] before every component
is shrunk by eps at both ends.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .errors import EpsilonTooLarge, InternalInconsistency, XOutsideT
from .intervals import MERGE_TOL, IntervalSet
from .kernel import intercepts, stripe_bounds
from .params import Params, Region, classify

logger = logging.getLogger(__name__)

MAX_ROUNDS = 64
STRUCTURE_TOL = 1e-9
LENGTH_TOL = 1e-12
KAPPA_STEP = 1e-4


@dataclass(frozen=True)
class RemovedInterval:
    address: str
    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class TypeSpace:
    epsilon: float
    level_l: int
    region: Region
    components: IntervalSet
    unshrunk: IntervalSet
    ledger: Tuple[RemovedInterval, ...] = ()
    rho_seq: Tuple[float, ...] = ()

    def contains(self, x: np.ndarray) -> np.ndarray:
        return self.components.contains(x)

    def total_length(self) -> float:
        return self.components.total_length()

    def reflect(self) -> IntervalSet:
        """Components mirrored through 0; equal to the components themselves."""
        return self.components.reflect()

    def middle(self) -> Tuple[float, float]:
        """The component containing 0."""
        idx = len(self.components) // 2
        lo, hi = self.components.array[idx]
        return float(lo), float(hi)

    def to_rows(self) -> List[Dict[str, object]]:
        rows: List[Dict[str, object]] = [
            {"kind": "component", "address": "", "lo": lo, "hi": hi, "length": hi - lo}
            for lo, hi in self.components
        ]
        rows += [
            {"kind": "removed", "address": r.address, "lo": r.lo, "hi": r.hi, "length": r.length}
            for r in self.ledger
        ]
        return rows


def endpoint_recursion(p: Params) -> Tuple[Tuple[float, ...], int]:
    """
    Gap sequence rho_1..rho_{l+1} and the number l of removal rounds.

    rho_1 = 2ac - t and rho_{r+1} = a rho_r - (1 - 3a - 2b); l is the first
    r with rho_{r+1} < 0. The Simple region has no rounds.
    """
    rho = 2.0 * p.a * p.c - p.t
    if rho < 0.0:
        return (), 0
    seq = [rho]
    width = 2.0 * p.t
    while seq[-1] >= 0.0:
        if len(seq) > MAX_ROUNDS:
            raise InternalInconsistency("removal recursion did not terminate", data=seq)
        seq.append(p.a * seq[-1] - width)
    return tuple(seq), len(seq) - 1


def epsilon_bound(p: Params) -> float:
    """Open upper bound on eps for the region of ``p``."""
    if classify(p) is Region.SIMPLE:
        return (1.0 - 3.0 * p.a - 2.0 * p.b) / (4.0 * p.a) - p.c
    rho_seq, _ = endpoint_recursion(p)
    return min(-rho_seq[-1] / (2.0 * p.a), p.t)


def default_epsilon(p: Params) -> float:
    return 0.5 * epsilon_bound(p)


def _removal_rounds(p: Params, rounds: int) -> List[RemovedInterval]:
    """Holes [u^w, v^w] of every round, addresses extended by the stripe index."""
    icp = intercepts(p)
    u1 = -p.a * (1.0 + p.c)
    v1 = p.a * (p.c - 1.0) - p.t
    current = [RemovedInterval("1", u1, v1), RemovedInterval("2", -v1, -u1)]
    ledger = list(current)
    for r in range(2, rounds + 1):
        nxt = []
        for hole in current:
            for k in (1, 2, 3):
                lo = p.a * (hole.lo - icp[2 * k - 1])
                hi = p.a * (hole.hi - icp[2 * k - 2])
                nxt.append(RemovedInterval(hole.address + str(k), lo, hi))
        logger.debug(f"removal round {r}: {len(nxt)} holes")
        ledger.extend(nxt)
        current = nxt
    return ledger


def _subtract(base: IntervalSet, holes: List[RemovedInterval]) -> IntervalSet:
    edges = sorted((h.lo, h.hi) for h in holes)
    pieces = []
    for lo, hi in base:
        cursor = lo
        for h_lo, h_hi in edges:
            if h_hi <= cursor or h_lo >= hi:
                continue
            pieces.append((cursor, h_lo))
            cursor = h_hi
        pieces.append((cursor, hi))
    return IntervalSet.from_sorted(np.array([pc for pc in pieces if pc[1] > pc[0]]))


def mirror_gap(data: np.ndarray) -> float:
    """Largest distance between an interval array and its reflection through 0."""
    if not data.size:
        return 0.0
    return float(np.abs(data + data[::-1, ::-1]).max())


def _symmetrise(data: np.ndarray) -> np.ndarray:
    """Replace the negative half by the exact mirror of the positive half."""
    k = data.shape[0]
    out = data.copy()
    for i in range(k // 2):
        out[i] = -data[k - 1 - i, ::-1]
    if k % 2:
        half = 0.5 * (data[k // 2, 1] - data[k // 2, 0])
        out[k // 2] = (-half, half)
    return out


def build(p: Params, eps: float) -> TypeSpace:
    """
    Construct T(eps).

    Raises:
        EpsilonTooLarge: unless 0 < eps < epsilon_bound(p).
        InternalInconsistency: if the raw removal output is not symmetric
            about 0, or the components are not 3^l intervals of equal length.
    """
    region = classify(p)
    bound = epsilon_bound(p)
    if not 0.0 < eps < bound:
        raise EpsilonTooLarge(
            f"epsilon must lie in (0, {bound:.7g}), got {eps}",
            data={"epsilon": eps, "bound": bound},
        )
    rho_seq, level_l = endpoint_recursion(p)
    outer = IntervalSet([(-1.0 + p.c, 1.0 - p.c)])
    ledger: List[RemovedInterval] = []
    if level_l:
        ledger = _removal_rounds(p, level_l)
        unshrunk = _subtract(outer, ledger)
    else:
        unshrunk = outer
    gap = mirror_gap(unshrunk.array)
    if gap > LENGTH_TOL:
        raise InternalInconsistency(
            "removal left a type space that is not symmetric about 0", data={"gap": gap}
        )
    unshrunk = IntervalSet.from_sorted(_symmetrise(unshrunk.array))
    shrunk = unshrunk.array + np.array([eps, -eps])
    components = IntervalSet.from_sorted(shrunk)
    T = TypeSpace(
        epsilon=eps,
        level_l=level_l,
        region=region,
        components=components,
        unshrunk=unshrunk,
        ledger=tuple(ledger),
        rho_seq=rho_seq,
    )
    check_structure(T, p)
    logger.info(f"type space: {len(components)} components, total length {T.total_length():.6f}")
    return T


def check_structure(T: TypeSpace, p: Params) -> None:
    comps = T.components
    expected = 3**T.level_l
    if len(comps) != expected:
        raise InternalInconsistency(
            f"expected {expected} components, found {len(comps)}", data=comps.to_list()
        )
    lengths = T.unshrunk.lengths()
    if np.ptp(lengths) > LENGTH_TOL:
        raise InternalInconsistency("components differ in length", data=lengths.tolist())
    if not np.allclose(comps.array, -comps.array[::-1, ::-1], atol=STRUCTURE_TOL):
        raise InternalInconsistency("type space is not symmetric about 0")
    lo, hi = T.middle()
    if not lo < 0.0 < hi:
        raise InternalInconsistency("0 is not interior to the middle component")
    limit = 1.0 - p.c - T.epsilon
    if comps.lo[0] < -limit - STRUCTURE_TOL or comps.hi[-1] > limit + STRUCTURE_TOL:
        raise InternalInconsistency("type space leaves [-1+c+eps, 1-c-eps]")
    for hole, rho in zip(T.ledger, _ledger_rhos(T)):
        if abs(hole.length - rho) > LENGTH_TOL:
            raise InternalInconsistency(
                f"hole {hole.address} has length {hole.length}, expected {rho}"
            )


def _ledger_rhos(T: TypeSpace) -> List[float]:
    return [T.rho_seq[len(h.address) - 1] for h in T.ledger]


def support_E1(x: float, p: Params, T: TypeSpace) -> IntervalSet:
    """{y : m(x, y) > 0}: the three stripe slices at ``x`` intersected with T."""
    if not bool(T.contains(np.array([x]))[0]):
        raise XOutsideT(f"x={x} is not in the type space")
    lo, hi = stripe_bounds(x, p)
    return IntervalSet(zip(lo, hi)).intersect(T.components)


def _step_support(E: IntervalSet, p: Params, T: TypeSpace) -> IntervalSet:
    """Union of E_1(y) over y in E, as interval arithmetic."""
    if E.empty():
        return E
    icp = intercepts(p)
    lo = E.lo[:, None] / p.a + icp[1::2][None, :]
    hi = E.hi[:, None] / p.a + icp[0::2][None, :]
    return IntervalSet.from_arrays(lo.ravel(), hi.ravel(), MERGE_TOL).intersect(T.components)


def iterate_support(x: float, n: int, p: Params, T: TypeSpace) -> IntervalSet:
    """E_n(x) = union of E_1(y) over y in E_{n-1}(x)."""
    E = support_E1(x, p, T)
    for _ in range(n - 1):
        E = _step_support(E, p, T)
    return E


def covers_T(E: IntervalSet, T: TypeSpace, tol: float = 1e-9) -> bool:
    return len(E) == len(T.components) and E.isclose(T.components, tol)


def _longest_pieces(xs: np.ndarray, p: Params, T: TypeSpace) -> np.ndarray:
    lo, hi = stripe_bounds(xs, p)
    c_lo = T.components.lo
    c_hi = T.components.hi
    pieces = np.minimum(hi[..., None], c_hi) - np.maximum(lo[..., None], c_lo)
    return np.clip(pieces, 0.0, None).max(axis=(1, 2))


def kappa_grid(T: TypeSpace, step: float = KAPPA_STEP) -> np.ndarray:
    """Grid over T with spacing at most ``step``, component endpoints included."""
    parts = []
    for lo, hi in T.components:
        count = max(2, int(math.ceil((hi - lo) / step)) + 1)
        parts.append(np.linspace(lo, hi, count))
    return np.concatenate(parts)


def kappa(p: Params, T: TypeSpace, step: float = KAPPA_STEP) -> float:
    """Minimum over a fine grid of T of the longest piece of E_1(x)."""
    xs = kappa_grid(T, step)
    best = _longest_pieces(xs, p, T)
    return float(best.min())


def kappa_closed_forms(p: Params, T: TypeSpace) -> Dict[str, float]:
    """Closed-form lower-bound candidates, reported next to the scanned value."""
    width = (1.0 - 3.0 * p.a - 2.0 * p.b) / p.a
    if T.region is Region.SIMPLE:
        return {
            "kappa1": 0.5 * ((1.0 - 3.0 * p.a - 2.0 * p.b) / (2.0 * p.a) - 2.0 * p.c),
            "kappa2": 2.0 * width,
            "stripe_width": width,
        }
    rho_l = T.rho_seq[T.level_l - 1]
    s = float(T.components.lengths()[0])
    return {
        "kappa_boundary": T.epsilon / p.a - T.epsilon,
        "stripe_width": width,
        "kappa_hole": min(s, 0.5 * width - (rho_l + 2.0 * T.epsilon)),
    }


def support_bound(p: Params, T: TypeSpace, kappa_value: float = 0.0) -> int:
    """
    Number of steps after which E_n(x) = T for every x.

    Twice ceil(log_{1/a}(2(1 - c - eps)/kappa)), plus l in the General region.
    """
    k = kappa_value if kappa_value > 0.0 else kappa(p, T)
    if k <= 0.0:
        raise InternalInconsistency("kappa is not positive", data={"kappa": k})
    steps = max(1, math.ceil(math.log(2.0 * (1.0 - p.c - T.epsilon) / k) / math.log(1.0 / p.a)))
    return 2 * steps + T.level_l
