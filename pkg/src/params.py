"""Larsson parameters, derived constants and region classification."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from .errors import InternalInconsistency, InvalidParams

logger = logging.getLogger(__name__)

# The two Simple-case tests are algebraically equivalent; they may only
# disagree within this distance of the region boundary.
CLASSIFY_TOL = 1e-12


class Region(str, Enum):
    """Parameter region of the type-space construction."""

    INVALID = "Invalid"
    SIMPLE = "Simple"
    GENERAL = "General"


@dataclass(frozen=True)
class Params:
    """Contraction ``a`` and edge gap ``b`` of one construction step."""

    a: float
    b: float

    @classmethod
    def unchecked(cls, a: float, b: float) -> "Params":
        """Build parameters without the growth-condition checks."""
        return cls(a=float(a), b=float(b))

    @property
    def t(self) -> float:
        return (1.0 - 3.0 * self.a - 2.0 * self.b) / 2.0

    @property
    def c(self) -> float:
        return 2.0 * self.b / (1.0 - self.a)

    @property
    def right_base(self) -> float:
        """Left endpoint of the right child before its offset, 1/2 + a/2."""
        return 0.5 + 0.5 * self.a

    @property
    def shift(self) -> float:
        """Horizontal shift h = 1/2 + a/2 - b between the outer offspring types."""
        return 0.5 + 0.5 * self.a - self.b


@dataclass(frozen=True)
class DerivedConstants:
    t: float
    c: float
    four_a: float
    dim_sum: float
    rho1: float


def validate(a: float, b: float) -> Params:
    """
    Check the growth condition and return the parameters.

    Raises:
        InvalidParams: naming the first violated inequality.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidParams(f"a and b must be finite, got a={a}, b={b}", data={"a": a, "b": b})
    if not a > 0.25:
        raise InvalidParams(f"1/4 < a violated: a={a:.6g}", data={"a": a, "b": b})
    if not b > 0.0:
        raise InvalidParams(f"b > 0 violated: b={b:.6g}", data={"a": a, "b": b})
    total = 3.0 * a + 2.0 * b
    if not total < 1.0:
        raise InvalidParams(
            f"3a+2b < 1 violated: 3a+2b={total:.2f} not <1", data={"a": a, "b": b}
        )
    return Params(a=float(a), b=float(b))


def derive(p: Params) -> DerivedConstants:
    """Closed-form constants of the construction."""
    t = p.t
    c = p.c
    return DerivedConstants(
        t=t,
        c=c,
        four_a=4.0 * p.a,
        dim_sum=2.0 * math.log(2.0) / math.log(1.0 / p.a),
        rho1=2.0 * p.a * c - t,
    )


def region_polynomial(p: Params) -> float:
    """1 - 4a - 2b + 3a^2 - 6ab; positive exactly in the Simple region."""
    a, b = p.a, p.b
    return 1.0 - 4.0 * a - 2.0 * b + 3.0 * a * a - 6.0 * a * b


def _simple_tests(p: Params) -> Tuple[bool, bool, float, float]:
    poly = region_polynomial(p)
    gap = (1.0 - 3.0 * p.a - 2.0 * p.b) / (4.0 * p.a) - p.c
    return poly > 0.0, gap > 0.0, poly, gap


def classify(p: Params) -> Region:
    """
    Simple or General region; the boundary counts as General.

    Raises:
        InternalInconsistency: if the polynomial test and the c-test disagree
            away from the boundary.
    """
    by_poly, by_c, poly, gap = _simple_tests(p)
    if min(abs(poly), abs(gap)) <= CLASSIFY_TOL:
        return Region.GENERAL
    if by_poly != by_c:
        raise InternalInconsistency(
            "region tests disagree", data={"a": p.a, "b": p.b, "polynomial": poly, "c_gap": gap}
        )
    return Region.SIMPLE if by_poly and by_c else Region.GENERAL


def region_grid(n: int = 200) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """
    Evaluate both region tests over an n x n grid of the admissible triangle.

    Returns:
        (a values, b values, simple mask, number of disagreements). Grid
        points outside the growth condition are masked out of the count.
    """
    a_vals = np.linspace(0.25, 1.0 / 3.0, n + 2)[1:-1]
    b_vals = np.linspace(0.0, (1.0 - 3.0 * 0.25) / 2.0, n + 2)[1:-1]
    aa, bb = np.meshgrid(a_vals, b_vals, indexing="ij")
    admissible = 3.0 * aa + 2.0 * bb < 1.0
    poly = 1.0 - 4.0 * aa - 2.0 * bb + 3.0 * aa**2 - 6.0 * aa * bb
    c = 2.0 * bb / (1.0 - aa)
    gap = (1.0 - 3.0 * aa - 2.0 * bb) / (4.0 * aa) - c
    by_poly = poly > 0.0
    by_c = gap > 0.0
    near = np.minimum(np.abs(poly), np.abs(gap)) <= CLASSIFY_TOL
    disagree = int(np.count_nonzero(admissible & (by_poly != by_c) & ~near))
    if disagree:
        logger.warning(f"region tests disagree at {disagree} grid points")
    return a_vals, b_vals, admissible & by_poly & by_c, disagree
