"""
Random Cantor sets of the Larsson family.

An ``OffsetTree`` holds one uniform offset per node of the binary
construction tree. Level-n intervals, product squares and the type map Phi
are computed from it with vectorised numpy arithmetic.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DepthExceeded
from .intervals import IntervalSet
from .params import Params
from .utils import derive_rng

logger = logging.getLogger(__name__)

# (x digit, y digit) -> clockwise square label, top-left first
DIGITS_TO_LABEL: Dict[Tuple[str, str], int] = {
    ("1", "2"): 1,
    ("2", "2"): 2,
    ("2", "1"): 3,
    ("1", "1"): 4,
}
LABEL_TO_DIGITS: Dict[int, Tuple[str, str]] = {v: k for k, v in DIGITS_TO_LABEL.items()}

# index sets an offspring draw may produce; anything else is a measure-zero tie
ALLOWED_INDEX_SETS = frozenset(
    [frozenset(), frozenset({1}), frozenset({2}), frozenset({3}), frozenset({4}), frozenset({2, 4})]
)


def _heap_start(level: int) -> int:
    """Position of the first level-``level`` node in breadth-first order."""
    return (1 << level) - 2


def address_index(address: str) -> int:
    """Left-to-right position of a binary address among its level."""
    idx = 0
    for digit in address:
        if digit not in "12":
            raise ValueError(f"address digits must be 1 or 2, got {address!r}")
        idx = 2 * idx + (int(digit) - 1)
    return idx


def index_address(index: int, level: int) -> str:
    return "".join("2" if (index >> (level - 1 - k)) & 1 else "1" for k in range(level))


@dataclass(frozen=True, eq=False)
class OffsetTree:
    """
    Uniform offsets U_w of one random Cantor set, in breadth-first order.

    ``offsets[_heap_start(k) + i]`` is the offset of the i-th level-k node.
    The root offset is 0 and not stored.
    """

    depth: int
    t: float
    offsets: np.ndarray
    seed: Optional[int] = None
    tree_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("tree depth must be at least 1")
        if self.offsets.shape != (_heap_start(self.depth + 1),):
            raise ValueError(
                f"expected {_heap_start(self.depth + 1)} offsets, got {self.offsets.shape}"
            )

    def level_offsets(self, level: int) -> np.ndarray:
        if not 1 <= level <= self.depth:
            raise DepthExceeded(f"level {level} outside 1..{self.depth}")
        start = _heap_start(level)
        return self.offsets[start : start + (1 << level)]

    def offset(self, address: str) -> float:
        if not address:
            return 0.0
        return float(self.level_offsets(len(address))[address_index(address)])

    def to_json(self) -> Dict[str, float]:
        """Address -> offset map."""
        out: Dict[str, float] = {}
        for level in range(1, self.depth + 1):
            for i, value in enumerate(self.level_offsets(level)):
                out[index_address(i, level)] = float(value)
        return out


def sample_offset_tree(p: Params, depth: int, seed: int, tree_id: int) -> OffsetTree:
    """
    Draw every node offset ~ Uniform[0, t] from the stream of ``(seed, tree_id)``.

    Draws are taken in breadth-first order, so a deeper tree extends a
    shallower one with the same seed and id.
    """
    if depth < 1:
        raise DepthExceeded(f"depth must be >= 1, got {depth}")
    rng = derive_rng(seed, tree_id)
    offsets = rng.uniform(0.0, p.t, size=_heap_start(depth + 1))
    return OffsetTree(depth=depth, t=p.t, offsets=offsets, seed=seed, tree_id=tree_id)


def tree_from_offsets(p: Params, mapping: Dict[str, float]) -> OffsetTree:
    """Rebuild a tree from its ``to_json`` dump."""
    depth = max(len(k) for k in mapping)
    offsets = np.empty(_heap_start(depth + 1))
    for address, value in mapping.items():
        offsets[_heap_start(len(address)) + address_index(address)] = value
    return OffsetTree(depth=depth, t=p.t, offsets=offsets)


def level_lefts(tree: OffsetTree, p: Params, n: int) -> np.ndarray:
    """Left endpoints of the 2^n level-n intervals, in address order."""
    if n > tree.depth:
        raise DepthExceeded(f"level {n} exceeds tree depth {tree.depth}")
    lefts = np.zeros(1)
    base = np.array([p.b, p.right_base])
    length = 1.0
    for level in range(1, n + 1):
        pos = np.tile(base, lefts.size) + tree.level_offsets(level)
        lefts = np.repeat(lefts, 2) + length * pos
        length *= p.a
    return lefts


def level_intervals(tree: OffsetTree, p: Params, n: int) -> IntervalSet:
    lefts = level_lefts(tree, p, n)
    return IntervalSet.from_sorted(np.column_stack([lefts, lefts + p.a**n]))


@dataclass(frozen=True)
class Square:
    """Level-n product square with lower-left corner ``(u, v)``."""

    level: int
    corner: Tuple[float, float]
    address: Tuple[str, str]
    side: float

    @property
    def labels(self) -> Tuple[int, ...]:
        """Clockwise Q-labels of the square and its ancestors, outermost first."""
        return tuple(DIGITS_TO_LABEL[pair] for pair in zip(*self.address))

    @property
    def label(self) -> str:
        return "".join(f"Q{k}" for k in self.labels)


def product_squares(t1: OffsetTree, t2: OffsetTree, p: Params, n: int) -> List[Square]:
    """
    The 4^n level-n squares of C1 x C2 (t1 on the x-axis, t2 on the y-axis).

    Squares are listed in clockwise label order Q1..Q4 at every level.
    """
    if n > min(t1.depth, t2.depth):
        raise DepthExceeded(f"level {n} exceeds tree depth {min(t1.depth, t2.depth)}")
    xs = level_lefts(t1, p, n)
    ys = level_lefts(t2, p, n)
    side = p.a**n
    out = []
    for labels in itertools.product((1, 2, 3, 4), repeat=n):
        x_addr = "".join(LABEL_TO_DIGITS[k][0] for k in labels)
        y_addr = "".join(LABEL_TO_DIGITS[k][1] for k in labels)
        u = float(xs[address_index(x_addr)]) if n else 0.0
        v = float(ys[address_index(y_addr)]) if n else 0.0
        out.append(Square(level=n, corner=(u, v), address=(x_addr, y_addr), side=side))
    return out


def unit_square() -> Square:
    return Square(level=0, corner=(0.0, 0.0), address=("", ""), side=1.0)


def phi(q: Square, x: float, p: Optional[Params] = None) -> Optional[float]:
    """
    Type of square ``q`` along the line e(x); ``None`` when e(x) misses ``q``.

    1 at the upper-left corner, -1 at the lower-right corner.
    """
    u, v = q.corner
    value = (u - v + x) / q.side
    if -1.0 <= value <= 1.0:
        return value
    return None


def phi_values(u: np.ndarray, v: np.ndarray, side: float, x: float) -> np.ndarray:
    """Vectorised ``phi`` with NaN in place of the absent type."""
    value = (np.asarray(u) - np.asarray(v) + x) / side
    return np.where(np.abs(value) <= 1.0, value, np.nan)


def project(q: Square) -> Tuple[float, float]:
    """45-degree projection of the square: [v - u - side, v - u + side]."""
    u, v = q.corner
    return v - u - q.side, v - u + q.side


def offspring_matrix(x: np.ndarray, draws: np.ndarray, p: Params) -> np.ndarray:
    """
    Types Phi_1..Phi_4 of the four children of parents of type ``x``.

    ``draws`` has shape (N, 4) holding (u1, u2, u3, u4) per parent. Absent
    types are NaN.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u1, u2, u3, u4 = (draws[:, k] for k in range(4))
    h = p.shift
    out = np.column_stack(
        [
            (-h + u1 - u4 + x) / p.a,
            (u2 - u4 + x) / p.a,
            (h + u2 - u3 + x) / p.a,
            (u1 - u3 + x) / p.a,
        ]
    )
    return np.where(np.abs(out) <= 1.0, out, np.nan)


def offspring_types(
    x: float, u1: float, u2: float, u3: float, u4: float, p: Params
) -> List[Tuple[int, float]]:
    """Present children ``(index, type)`` of a type-``x`` parent for one offset draw."""
    row = offspring_matrix(np.array([x]), np.array([[u1, u2, u3, u4]]), p)[0]
    return [(i + 1, float(value)) for i, value in enumerate(row) if not np.isnan(value)]


def exclusivity_violations(types: np.ndarray) -> int:
    """Rows of an offspring matrix whose present index set is not allowed."""
    present = ~np.isnan(types)
    bad = (
        (present[:, 0] & (present[:, 1] | present[:, 2] | present[:, 3]))
        | (present[:, 2] & (present[:, 1] | present[:, 3]))
    )
    count = int(np.count_nonzero(bad))
    if count:
        logger.warning(f"{count} offspring draws hit an endpoint tie")
    return count


def descendant_corners(
    t1: OffsetTree, t2: OffsetTree, q: Square, n: int, p: Params
) -> Tuple[np.ndarray, np.ndarray]:
    """Corners of the 4^n level-(m+n) descendants of a level-m square, flattened."""
    m = q.level
    if m + n > min(t1.depth, t2.depth):
        raise DepthExceeded(f"level {m + n} exceeds tree depth {min(t1.depth, t2.depth)}")
    width = 1 << n
    xi = address_index(q.address[0]) * width
    yi = address_index(q.address[1]) * width
    xs = level_lefts(t1, p, m + n)[xi : xi + width]
    ys = level_lefts(t2, p, m + n)[yi : yi + width]
    uu, vv = np.meshgrid(xs, ys, indexing="ij")
    return uu.ravel(), vv.ravel()


def sibling_gaps(lefts: np.ndarray, length: float) -> np.ndarray:
    """Gap between the two children of each parent at one level."""
    return lefts[1::2] - (lefts[0::2] + length)


def reflect_draws(draws: Sequence[float]) -> Tuple[float, float, float, float]:
    """Offset permutation under which offspring_types(-x, ...) negates every type."""
    u1, u2, u3, u4 = draws
    return u3, u4, u1, u2
