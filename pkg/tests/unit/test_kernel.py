import numpy as np
import pytest
from scipy import integrate, stats

from src.cantor import offspring_matrix
from src.errors import BadIndex
from src.kernel import (
    RegionLabel,
    atom_prob,
    intercepts,
    kernel_m,
    kernel_rows,
    line_eval,
    mass_on_T,
    offspring_densities,
    offspring_probabilities,
    phi_density,
    phi_mass,
    region_of,
    stripe_bounds,
    triangular,
    triangular_cdf,
)
from src.utils import derive_rng


def test_line_examples(general_params):
    """Test line values at x = 0."""
    assert line_eval(3, 0.0, general_params) == pytest.approx(0.1071429, abs=1e-7)
    assert line_eval(2, 0.0, general_params) == 2.0


@pytest.mark.parametrize("j", [1, 2, 3, 4, 5, 6])
def test_line_reflection(simple_params, j):
    """Test l_j(x) = -l_{7-j}(-x)."""
    x = np.linspace(-1, 1, 21)
    assert np.allclose(line_eval(j, x, simple_params), -line_eval(7 - j, -x, simple_params))


@pytest.mark.parametrize("j", [0, 7])
def test_line_bad_index(simple_params, j):
    """Test line indices outside 1..6 are rejected."""
    with pytest.raises(BadIndex):
        line_eval(j, 0.0, simple_params)


def test_intercepts(simple_params):
    """Test the intercepts are antisymmetric."""
    icp = intercepts(simple_params)
    assert np.allclose(icp, -icp[::-1])


def test_triangular():
    """Test peak, support edge and normalisation of the base density."""
    assert triangular(0.0, 0.03) == pytest.approx(1 / 0.03)
    assert triangular(0.03, 0.03) == 0.0
    assert triangular(-0.05, 0.03) == 0.0
    assert triangular_cdf(0.03, 0.03) - triangular_cdf(-0.03, 0.03) == pytest.approx(1.0, abs=1e-10)


def test_phi_density_examples(general_params):
    """Test the child-2 density at the origin and off its support."""
    p = general_params
    assert phi_density(2, 0.0, 0.0, p) == pytest.approx(0.28 / 0.03)
    assert phi_density(2, 0.0, p.t / p.a + 1e-9, p) == 0.0
    with pytest.raises(BadIndex):
        phi_density(5, 0.0, 0.0, p)


def test_phi_mass_is_exact_integral(simple_params):
    """Test the exact interval mass against a fine trapezoid rule."""
    p = simple_params
    y = np.linspace(-0.2, 0.5, 200_001)
    dens = phi_density(2, 0.1, y, p)
    assert phi_mass(2, 0.1, -0.2, 0.5, p) == pytest.approx(integrate.trapezoid(dens, y), abs=1e-7)


def test_atom_examples(simple_params, simple_T, general_params, general_T):
    """Test the atom of child 2 at x = 0 vanishes and child 1 is always absent there."""
    assert atom_prob(2, 0.0, simple_params, simple_T) == pytest.approx(0.0, abs=1e-12)
    assert atom_prob(1, 0.0, simple_params, simple_T) == pytest.approx(1.0)
    assert atom_prob(1, 0.0, general_params, general_T) == pytest.approx(1.0)
    x = np.linspace(-0.8, 0.8, 41)
    for i in range(1, 5):
        values = atom_prob(i, x, general_params, general_T)
        assert ((values >= 0) & (values <= 1)).all()


def test_kernel_symmetry(general_params, general_T):
    """Test m(x, y) = m(-x, -y) on a grid."""
    axis = np.linspace(-1, 1, 100)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    m = kernel_m(xx, yy, general_params, general_T)
    mirrored = kernel_m(-xx, -yy, general_params, general_T)
    assert np.abs(m - mirrored).max() <= 1e-12


def test_kernel_zero_off_T(general_params, general_T):
    """Test m vanishes for y in a hole of T."""
    hole = 0.5 * (general_T.components.hi[0] + general_T.components.lo[1])
    assert kernel_m(0.5, hole, general_params, general_T) == 0.0


def test_kernel_row_and_column_mass(simple_params, simple_T):
    """Test row masses are at most 2 and column masses at most 4a."""
    p, T = simple_params, simple_T
    xs = np.linspace(-0.85, 0.85, 35)
    rows = sum(mass_on_T(i, xs, p, T) for i in range(1, 5))
    assert (rows <= 2 + 1e-6).all()
    grid = np.linspace(-1, 1, 40_001)
    for y in (-0.5, 0.0, 0.3, 0.8):
        column = integrate.trapezoid(kernel_m(grid, y, p, T), grid)
        assert column <= 4 * p.a + 1e-6


@pytest.mark.parametrize(
    "x, label",
    [
        (0.0, RegionLabel.A3),
        (0.26, RegionLabel.A3),
        (-0.26, RegionLabel.A3),
        (0.30, RegionLabel.A2_PLUS),
        (0.35, RegionLabel.A2_PLUS),
        (-0.30, RegionLabel.A2_MINUS),
        (0.5, RegionLabel.A1_PLUS),
        (-0.5, RegionLabel.A1_MINUS),
        (0.99, RegionLabel.OUTSIDE),
    ],
)
def test_region_of(simple_params, x, label):
    """Test the five-set partition with its closed and half-open ends."""
    assert region_of(x, simple_params) is label


def test_region_outside_T(general_params, general_T):
    """Test points in a hole of T are outside."""
    hole = 0.5 * (general_T.components.hi[0] + general_T.components.lo[1])
    assert region_of(hole, general_params, general_T) is RegionLabel.OUTSIDE


def test_stripe_confinement(general_params):
    """Test every present child lies in one of the three stripes."""
    p = general_params
    rng = derive_rng(5, 5)
    n = 100_000
    x = rng.uniform(-1, 1, size=n)
    types = offspring_matrix(x, rng.uniform(0, p.t, size=(n, 4)), p)
    lo, hi = stripe_bounds(x, p)
    for i in range(4):
        present = ~np.isnan(types[:, i])
        y = types[present, i][:, None]
        inside = ((y >= lo[present] - 1e-12) & (y <= hi[present] + 1e-12)).any(axis=1)
        assert inside.all()


@pytest.mark.slow
@pytest.mark.parametrize("fixture", ["simple_params", "general_params"])
@pytest.mark.parametrize("which", range(5))
def test_child_two_law(request, fixture, which):
    """Test simulated child-2 types follow the closed-form law given presence (KS at 1%)."""
    p = request.getfixturevalue(fixture)
    edge = (0.5 - p.a / 2 - p.b) / 2
    x = (0.0, p.a / 2, -p.a / 2, edge, -edge)[which]
    rng = derive_rng(17, which)
    draws = rng.uniform(0, p.t, size=(100_000, 4))
    samples = offspring_matrix(np.full(draws.shape[0], x), draws, p)[:, 1]
    samples = samples[~np.isnan(samples)]
    assert samples.size > 50_000
    lo, hi = triangular_cdf(-p.a - x, p.t), triangular_cdf(p.a - x, p.t)
    result = stats.kstest(samples, lambda y: (triangular_cdf(p.a * y - x, p.t) - lo) / (hi - lo))
    assert result.pvalue > 0.01


def test_h1_vanishes_at_origin(simple_params, simple_T):
    """Test a lone child is impossible at x = 0 in the Simple region."""
    z = np.linspace(-0.8, 0.8, 81)
    h1, h2 = offspring_densities(0.0, z, z, z[::-1], simple_params, simple_T)
    assert np.allclose(h1, 0.0)
    assert h2.max() > 0


def test_h2_vanishes_in_A1(simple_params, simple_T):
    """Test pairs are impossible in A1+."""
    z = np.linspace(-0.8, 0.8, 81)
    h1, h2 = offspring_densities(0.5, z, z, z, simple_params, simple_T)
    assert np.allclose(h2, 0.0)
    assert h1.max() > 0


@pytest.mark.parametrize("x", [0.0, 0.2, 0.3, -0.3, 0.5, -0.6])
def test_offspring_probabilities_against_simulation(general_params, general_T, x):
    """Test one/two/no-child probabilities against simulated offspring within 4 sigma."""
    p, T = general_params, general_T
    if not T.contains(np.array([x]))[0]:
        x = float(T.components.lo[-1]) + 0.01
    one, two, none = offspring_probabilities(x, p, T)
    assert one + two + none == pytest.approx(1.0)
    n = 200_000
    rng = derive_rng(23, 1)
    types = offspring_matrix(np.full(n, x), rng.uniform(0, p.t, size=(n, 4)), p)
    in_T = np.zeros(types.shape, dtype=bool)
    present = ~np.isnan(types)
    in_T[present] = T.contains(types[present])
    counts = in_T.sum(axis=1)
    for k, prob in ((1, one), (2, two)):
        sigma = np.sqrt(max(prob * (1 - prob), 1e-12) / n)
        assert abs((counts == k).mean() - prob) < 4 * sigma + 1e-9


def test_h1_integrates_to_one_child(simple_params, simple_T):
    """Test the lone-child density integrates to P(one child)."""
    p, T = simple_params, simple_T
    x = 0.3
    z = np.linspace(-1, 1, 200_001)
    h1, _ = offspring_densities(x, z, 0.0, 0.0, p, T)
    one, _, _ = offspring_probabilities(x, p, T)
    assert integrate.trapezoid(h1, z) == pytest.approx(one, abs=1e-4)


def test_kernel_rows(simple_params, simple_T):
    """Test the heatmap export covers the grid."""
    rows = kernel_rows(simple_params, simple_T, n=11)
    assert len(rows) == 121
    assert rows[0] == {"x": -1.0, "y": -1.0, "m": 0.0}
