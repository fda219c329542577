"""
Offspring densities and the branching kernel m(x, y).

Every one-dimensional integral of a triangular density is evaluated
exactly through ``scipy.stats.triang``, never by quadrature.
"""

import logging
from enum import Enum
from typing import TYPE_CHECKING, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import stats

from .errors import BadIndex
from .params import Params

if TYPE_CHECKING:
    from .typespace import TypeSpace

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class RegionLabel(str, Enum):
    A1_MINUS = "A1minus"
    A2_MINUS = "A2minus"
    A3 = "A3"
    A2_PLUS = "A2plus"
    A1_PLUS = "A1plus"
    OUTSIDE = "Outside"


def intercepts(p: Params) -> np.ndarray:
    """Intercepts of the lines l_1..l_6 (index 0 holds l_1)."""
    outer = (1.0 - p.a - 2.0 * p.b) / p.a
    inner = p.t / p.a
    return np.array([outer, 2.0, inner, -inner, -2.0, -outer])


def line_eval(j: int, x: ArrayLike, p: Params) -> ArrayLike:
    """l_j(x) = x/a + intercept_j."""
    if j not in range(1, 7):
        raise BadIndex(f"line index must be in 1..6, got {j}")
    return np.asarray(x) / p.a + intercepts(p)[j - 1]


def stripe_bounds(x: ArrayLike, p: Params) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lower and upper edges of the three stripes at ``x``.

    Column k-1 holds stripe S_k = (l_{2k}(x), l_{2k-1}(x)); shape (..., 3).
    """
    icp = intercepts(p)
    xs = np.asarray(x, dtype=float)[..., None] / p.a
    return xs + icp[1::2], xs + icp[0::2]


def _base(t: float) -> stats.rv_continuous:
    return stats.triang(c=0.5, loc=-t, scale=2.0 * t)


def triangular(z: ArrayLike, t: float) -> ArrayLike:
    """Symmetric triangular density on [-t, t]: (t - |z|)/t^2."""
    z = np.asarray(z, dtype=float)
    return np.where(np.abs(z) <= t, (t - np.abs(z)) / (t * t), 0.0)


def triangular_cdf(z: ArrayLike, t: float) -> ArrayLike:
    return _base(t).cdf(z)


def _center(i: int, x: ArrayLike, p: Params) -> ArrayLike:
    """Centre of the density of Phi_i(x) on the type axis."""
    if i == 1:
        return (np.asarray(x) - p.shift) / p.a
    if i in (2, 4):
        return np.asarray(x) / p.a
    if i == 3:
        return (np.asarray(x) + p.shift) / p.a
    raise BadIndex(f"offspring index must be in 1..4, got {i}")


def phi_density(i: int, x: ArrayLike, y: ArrayLike, p: Params) -> ArrayLike:
    """Density of Phi_i(x) at ``y``, restricted to [-1, 1]."""
    y = np.asarray(y, dtype=float)
    z = p.a * (y - _center(i, x, p))
    return p.a * triangular(z, p.t) * (np.abs(y) <= 1.0)


def phi_mass(i: int, x: ArrayLike, lo: ArrayLike, hi: ArrayLike, p: Params) -> ArrayLike:
    """Exact integral of ``phi_density(i, x, .)`` over [lo, hi] clipped to [-1, 1]."""
    lo = np.clip(lo, -1.0, 1.0)
    hi = np.clip(hi, -1.0, 1.0)
    centre = _center(i, x, p)
    dist = _base(p.t)
    mass = dist.cdf(p.a * (hi - centre)) - dist.cdf(p.a * (lo - centre))
    return np.where(hi > lo, mass, 0.0)


def mass_on_T(i: int, x: ArrayLike, p: Params, T: "TypeSpace") -> ArrayLike:
    """P(Phi_i(x) lands in T)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for lo, hi in T.components:
        total = total + phi_mass(i, x, lo, hi, p)
    return total


def kernel_m(x: ArrayLike, y: ArrayLike, p: Params, T: "TypeSpace") -> ArrayLike:
    """m(x, y): sum of the four offspring densities, zero off T."""
    y = np.asarray(y, dtype=float)
    total = sum(phi_density(i, x, y, p) for i in range(1, 5))
    return total * T.contains(y)


def atom_prob(i: int, x: ArrayLike, p: Params, T: "TypeSpace") -> ArrayLike:
    """P(Phi_i(x) is absent or falls outside T)."""
    return np.clip(1.0 - mass_on_T(i, x, p, T), 0.0, 1.0)


def region_of(x: float, p: Params, T: Optional["TypeSpace"] = None) -> RegionLabel:
    """Five-set partition of the type axis, see ``RegionLabel``."""
    if T is not None and not bool(T.contains(np.array([x]))[0]):
        return RegionLabel.OUTSIDE
    inner = 0.5 - 0.5 * p.a - p.b
    outer = 1.0 - 2.0 * p.b
    ax = abs(x)
    if ax <= p.a:
        return RegionLabel.A3
    if ax > outer:
        return RegionLabel.OUTSIDE
    if ax <= inner:
        return RegionLabel.A2_PLUS if x > 0 else RegionLabel.A2_MINUS
    return RegionLabel.A1_PLUS if x > 0 else RegionLabel.A1_MINUS


def _restricted(i: int, x: float, z: ArrayLike, p: Params, T: "TypeSpace") -> ArrayLike:
    z = np.asarray(z, dtype=float)
    return phi_density(i, x, z, p) * T.contains(z)


def offspring_densities(
    x: float, z: ArrayLike, z1: ArrayLike, z2: ArrayLike, p: Params, T: "TypeSpace"
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Densities of the first generation of a type-``x`` ancestor.

    h1(x, z) is the density of a lone child at z; h2(x, z1, z2) the density
    of the unordered pair {z1, z2}, counted in both orders. Only the pair
    {Phi_2, Phi_4} can occur, and it is possible only off A1+/A1-.
    """
    region = region_of(x, p)
    zero = np.zeros(np.broadcast(np.asarray(z1), np.asarray(z2)).shape)
    if region is RegionLabel.A1_PLUS:
        return _restricted(1, x, z, p, T), zero
    if region is RegionLabel.A1_MINUS:
        return _restricted(3, x, z, p, T), zero
    if region is RegionLabel.OUTSIDE:
        return np.zeros(np.shape(z)), zero
    lone = 2.0 * _restricted(2, x, z, p, T) * float(atom_prob(4, x, p, T))
    pair = 2.0 * _restricted(2, x, z1, p, T) * _restricted(4, x, z2, p, T)
    if region is RegionLabel.A2_PLUS:
        lone = lone + _restricted(1, x, z, p, T)
    elif region is RegionLabel.A2_MINUS:
        lone = lone + _restricted(3, x, z, p, T)
    return lone, pair


def offspring_probabilities(x: float, p: Params, T: "TypeSpace") -> Tuple[float, float, float]:
    """
    (P(one child), P(two children), P(no child)) in T by exact integration.

    These are the integrals of h1 and half of h2 over T; the third entry
    closes the total probability.
    """
    m1, m2, m3, m4 = (float(mass_on_T(i, x, p, T)) for i in range(1, 5))
    region = region_of(x, p)
    if region is RegionLabel.OUTSIDE:
        return 0.0, 0.0, 1.0
    if region is RegionLabel.A1_PLUS:
        one, two = m1, 0.0
    elif region is RegionLabel.A1_MINUS:
        one, two = m3, 0.0
    else:
        one = m2 * (1.0 - m4) + m4 * (1.0 - m2)
        two = m2 * m4
        if region is RegionLabel.A2_PLUS:
            one += m1
        elif region is RegionLabel.A2_MINUS:
            one += m3
    return one, two, 1.0 - one - two


def kernel_rows(p: Params, T: "TypeSpace", n: int = 101) -> List[Dict[str, float]]:
    """m(x, y) on an n x n grid of [-1, 1]^2 as (x, y, m) rows."""
    axis = np.linspace(-1.0, 1.0, n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    values = np.asarray(kernel_m(xx, yy, p, T))
    return [
        {"x": float(x), "y": float(y), "m": float(m)}
        for x, y, m in zip(xx.ravel(), yy.ravel(), values.ravel())
    ]
