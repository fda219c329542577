"""
Nystrom discretisation of the kernel operator and its Perron-Frobenius pair.

``M[i, j] = m(x_i, x_j) w_j`` on a per-component midpoint grid. The dominant
eigenvalue and both eigenvectors come from power iteration on M and M^T.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import NoConvergence, NotPositiveBy64, ReducibleKernel, StepTooCoarse
from .kernel import kernel_m
from .params import Params
from .typespace import TypeSpace, build, epsilon_bound

logger = logging.getLogger(__name__)

MIN_NODES = 16
POWER_TOL = 1e-12
MAX_ITER = 100_000
MAX_POSITIVITY_POWER = 64
ERROR_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    component: np.ndarray

    def __len__(self) -> int:
        return int(self.nodes.size)

    def reflect_index(self) -> np.ndarray:
        """Index of the mirror node -x_i (the grid is symmetric)."""
        return np.arange(len(self))[::-1]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray
    grid: QuadratureGrid

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def density(self, power: np.ndarray) -> np.ndarray:
        """Undo the quadrature weights: m_n(x_i, x_j) from (M^n)[i, j]."""
        return power / self.weights[None, :]


@dataclass(frozen=True, eq=False)
class SpectralResult:
    rho: float
    rho_left: float
    mu: np.ndarray
    nu: np.ndarray
    residual: float
    iterations: int
    delta_estimate: float = float("nan")

    def summary(self) -> Dict[str, float]:
        return {
            "rho": self.rho,
            "rho_left": self.rho_left,
            "residual": self.residual,
            "iterations": self.iterations,
            "mu_ratio": float(self.mu.max() / self.mu.min()),
            "nu_ratio": float(self.nu.max() / self.nu.min()),
            "delta_estimate": self.delta_estimate,
        }


def build_grid(T: TypeSpace, step: float) -> QuadratureGrid:
    """
    Uniform midpoint grid on every component of T with cell width <= step.

    Raises:
        StepTooCoarse: if a component would get fewer than 16 nodes.
    """
    if not step > 0.0:
        raise StepTooCoarse(f"grid step must be positive, got {step}")
    nodes, weights, comp = [], [], []
    for k, (lo, hi) in enumerate(T.components):
        count = int(math.ceil((hi - lo) / step - 1e-12))
        if count < MIN_NODES:
            raise StepTooCoarse(
                f"component {k} of length {hi - lo:.6g} gets {count} < {MIN_NODES} nodes",
                data={"step": step, "length": hi - lo},
            )
        width = (hi - lo) / count
        nodes.append(lo + width * (np.arange(count) + 0.5))
        weights.append(np.full(count, width))
        comp.append(np.full(count, k))
    x = np.concatenate(nodes)
    # mirror the negative half exactly so that reflections are index reversals
    x = 0.5 * (x - x[::-1])
    return QuadratureGrid(nodes=x, weights=np.concatenate(weights), component=np.concatenate(comp))


def assemble(g: QuadratureGrid, p: Params, T: TypeSpace) -> KernelMatrix:
    values = kernel_m(g.nodes[:, None], g.nodes[None, :], p, T) * g.weights[None, :]
    return KernelMatrix(values=np.asarray(values), grid=g)


def _power(A: np.ndarray, tol: float, max_iter: int) -> Tuple[float, np.ndarray, int]:
    v = np.full(A.shape[0], 1.0 / A.shape[0])
    rho = 0.0
    for it in range(1, max_iter + 1):
        y = A @ v
        total = float(y.sum())
        if total <= 0.0:
            raise ReducibleKernel("power iterate vanished", data={"iteration": it})
        y /= total
        change = float(np.abs(y - v).max() / y.max())
        rho_new = total
        v = y
        if change <= tol and abs(rho_new - rho) <= tol * rho_new:
            return rho_new, v, it
        rho = rho_new
        if it % 1000 == 0:
            logger.debug(f"power iteration {it}: rho={rho:.15f} change={change:.3e}")
    raise NoConvergence(
        f"power iteration did not converge in {max_iter} iterations", data={"rho": rho}
    )


def dominant_eigen(
    M: KernelMatrix, tol: float = POWER_TOL, max_iter: int = MAX_ITER
) -> SpectralResult:
    """
    Dominant eigenvalue with right (mu) and left (nu) eigenfunctions.

    nu is the left eigenvector of M divided by the weights; the pair is
    scaled so that sum(mu * nu * w) = 1.

    Raises:
        NoConvergence: if either iteration hits ``max_iter``.
        ReducibleKernel: if a row of M is identically zero.
    """
    A = M.values
    if not (A.sum(axis=1) > 0.0).all() or not (A.sum(axis=0) > 0.0).all():
        raise ReducibleKernel("kernel matrix has an empty row or column")
    rho, mu, it_r = _power(A, tol, max_iter)
    rho_left, phi, it_l = _power(A.T, tol, max_iter)
    if abs(rho - rho_left) > 1e-8 * rho:
        raise NoConvergence(
            "left and right eigenvalues disagree", data={"right": rho, "left": rho_left}
        )
    w = M.weights
    nu = phi / w
    scale = float((mu * nu * w).sum())
    mu = mu / math.sqrt(scale)
    nu = nu / math.sqrt(scale)
    residual = float(np.abs(A @ mu - rho * mu).max() / mu.max())
    logger.info(f"rho={rho:.12f} after {it_r}/{it_l} iterations, residual {residual:.2e}")
    return SpectralResult(
        rho=rho, rho_left=rho_left, mu=mu, nu=nu, residual=residual, iterations=max(it_r, it_l)
    )


def uniform_positivity(M: KernelMatrix) -> Tuple[int, float, float]:
    """
    Smallest n0 <= 64 with every entry of M^n0 positive, with min/max of m_n0.

    Raises:
        NotPositiveBy64: when no such power exists.
    """
    A = M.values
    P = A.copy()
    scale = 1.0
    for n in range(1, MAX_POSITIVITY_POWER + 1):
        if (P > 0.0).all():
            dens = M.density(P) * scale
            return n, float(dens.min()), float(dens.max())
        P = P @ A
        # keep entries representable; positivity does not depend on scale
        peak = float(P.max())
        P /= peak
        scale *= peak
    raise NotPositiveBy64("no power of the kernel up to 64 is uniformly positive")


def harris_check(
    M: KernelMatrix, s: SpectralResult, nmax: int
) -> Tuple[List[float], float]:
    """
    Relative errors of m_n against rho^n mu(x) nu(y) for n = 1..nmax.

    Returns the error sequence and the fitted geometric decay rate.
    """
    A = M.values
    target = np.outer(s.mu, s.nu)
    P = np.eye(A.shape[0])
    errors: List[float] = []
    for _ in range(nmax):
        P = (P @ A) / s.rho
        dens = M.density(P)
        errors.append(float(np.abs(dens / target - 1.0).max()))
    return errors, decay_rate(errors)


def decay_rate(errors: Sequence[float]) -> float:
    """Geometric rate fitted to the errors above the floating-point floor."""
    err = np.asarray(errors, dtype=float)
    n = np.arange(1, err.size + 1)
    start = int(np.argmax(err < 1.0)) if (err < 1.0).any() else 0
    mask = (n > start) & (err > ERROR_FLOOR)
    if mask.sum() >= 2:
        slope = np.polyfit(n[mask], np.log(err[mask]), 1)[0]
        return float(math.exp(slope))
    tail = err[start:]
    if tail.size >= 2 and tail[0] > 0.0:
        return float(max(tail[1], 1e-300) / tail[0])
    return float("nan")


def with_delta(s: SpectralResult, delta: float) -> SpectralResult:
    return SpectralResult(
        rho=s.rho,
        rho_left=s.rho_left,
        mu=s.mu,
        nu=s.nu,
        residual=s.residual,
        iterations=s.iterations,
        delta_estimate=delta,
    )


def spectrum(p: Params, T: TypeSpace, step: float) -> Tuple[KernelMatrix, SpectralResult]:
    M = assemble(build_grid(T, step), p, T)
    return M, dominant_eigen(M)


def refinement_delta(p: Params, T: TypeSpace, step: float) -> float:
    """|rho(step) - rho(step/2)|."""
    _, coarse = spectrum(p, T, step)
    _, fine = spectrum(p, T, step / 2.0)
    return abs(coarse.rho - fine.rho)


def epsilon_sweep(
    p: Params, step: float, fractions: Sequence[float] = (0.2, 0.4, 0.6, 0.8)
) -> List[Dict[str, float]]:
    """rho at eps = fraction * bound for each fraction."""
    bound = epsilon_bound(p)
    rows = []
    for frac in fractions:
        eps = frac * bound
        _, s = spectrum(p, build(p, eps), step)
        rows.append({"epsilon": eps, "step": step, "rho": s.rho})
    return rows


def interpolate(nodes: np.ndarray, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of an eigenfunction off the grid."""
    return np.interp(x, nodes, values)


def integrate_nu(grid: QuadratureGrid, nu: np.ndarray, lo: float, hi: float) -> float:
    """Midpoint-rule integral of nu over [lo, hi]."""
    mask = (grid.nodes >= lo) & (grid.nodes <= hi)
    return float((nu[mask] * grid.weights[mask]).sum())
