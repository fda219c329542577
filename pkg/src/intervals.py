"""Finite unions of closed intervals on the real line."""

from typing import Iterable, Iterator, List, Tuple

import numpy as np

Interval = Tuple[float, float]

MERGE_TOL = 1e-12


def merge_intervals(lo: np.ndarray, hi: np.ndarray, tol: float = MERGE_TOL) -> np.ndarray:
    """
    Merge overlapping intervals and intervals closer than ``tol``.

    Returns an (k, 2) array of sorted disjoint intervals.
    """
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    keep = hi >= lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return np.empty((0, 2))
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    # a new run starts where the interval begins beyond everything seen so far
    starts = np.empty(lo.size, dtype=bool)
    starts[0] = True
    starts[1:] = lo[1:] > reach[:-1] + tol
    run = np.cumsum(starts) - 1
    out_lo = lo[starts]
    out_hi = np.full(out_lo.size, -np.inf)
    np.maximum.at(out_hi, run, hi)
    return np.column_stack([out_lo, out_hi])


class IntervalSet:
    """Sorted, pairwise disjoint closed intervals ``[lo, hi]``."""

    def __init__(self, intervals: Iterable[Interval] = (), tol: float = MERGE_TOL) -> None:
        items = list(intervals)
        if items:
            arr = np.asarray(items, dtype=float).reshape(-1, 2)
            self._data = merge_intervals(arr[:, 0], arr[:, 1], tol)
        else:
            self._data = np.empty((0, 2))

    @classmethod
    def from_arrays(cls, lo: np.ndarray, hi: np.ndarray, tol: float = MERGE_TOL) -> "IntervalSet":
        out = cls()
        out._data = merge_intervals(lo, hi, tol)
        return out

    @classmethod
    def from_sorted(cls, data: np.ndarray) -> "IntervalSet":
        """Wrap intervals that are already sorted and disjoint, without merging."""
        out = cls()
        out._data = np.asarray(data, dtype=float).reshape(-1, 2)
        return out

    @property
    def array(self) -> np.ndarray:
        return self._data

    @property
    def lo(self) -> np.ndarray:
        return self._data[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self._data[:, 1]

    def __len__(self) -> int:
        return int(self._data.shape[0])

    def __iter__(self) -> Iterator[Interval]:
        for lo, hi in self._data:
            yield float(lo), float(hi)

    def __repr__(self) -> str:
        body = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self)
        return f"IntervalSet({body})"

    def empty(self) -> bool:
        return len(self) == 0

    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    def total_length(self) -> float:
        return float(self.lengths().sum())

    def longest(self) -> float:
        return float(self.lengths().max()) if len(self) else 0.0

    def to_list(self) -> List[Interval]:
        return list(self)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Vectorised membership of points in the closed union."""
        x = np.asarray(x, dtype=float)
        if not len(self):
            return np.zeros(x.shape, dtype=bool)
        idx = np.searchsorted(self.lo, x, side="right") - 1
        inside = idx >= 0
        safe = np.clip(idx, 0, len(self) - 1)
        return inside & (x <= self.hi[safe])

    def contains_interval(self, lo: float, hi: float) -> bool:
        """True when ``[lo, hi]`` lies inside a single component."""
        if not len(self):
            return False
        idx = int(np.searchsorted(self.lo, lo, side="right")) - 1
        return idx >= 0 and bool(self.hi[idx] >= hi)

    def union(self, other: "IntervalSet", tol: float = MERGE_TOL) -> "IntervalSet":
        data = np.vstack([self._data, other._data])
        return IntervalSet.from_arrays(data[:, 0], data[:, 1], tol)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        """Pairwise intersection of components; degenerate pieces are dropped."""
        if not len(self) or not len(other):
            return IntervalSet()
        lo = np.maximum(self.lo[:, None], other.lo[None, :]).ravel()
        hi = np.minimum(self.hi[:, None], other.hi[None, :]).ravel()
        keep = hi > lo
        return IntervalSet.from_arrays(lo[keep], hi[keep], tol=0.0)

    def clip(self, lo: float, hi: float) -> "IntervalSet":
        return self.intersect(IntervalSet([(lo, hi)]))

    def reflect(self) -> "IntervalSet":
        return IntervalSet.from_sorted(-self._data[::-1, ::-1])

    def covers(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        """True when every component of ``other`` lies inside one component of ``self``."""
        return all(self.contains_interval(lo + tol, hi - tol) for lo, hi in other)

    def isclose(self, other: "IntervalSet", tol: float = 1e-9) -> bool:
        return len(self) == len(other) and bool(np.allclose(self._data, other._data, atol=tol))
