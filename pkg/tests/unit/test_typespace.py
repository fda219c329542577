import numpy as np
import pytest

from src import typespace
from src.errors import EpsilonTooLarge, InternalInconsistency, XOutsideT
from src.params import Region, validate
from src.typespace import (
    LENGTH_TOL,
    RemovedInterval,
    build,
    covers_T,
    default_epsilon,
    endpoint_recursion,
    epsilon_bound,
    iterate_support,
    kappa,
    kappa_closed_forms,
    kappa_grid,
    mirror_gap,
    support_bound,
    support_E1,
)
from src.utils import derive_rng


def test_endpoint_recursion_general(general_params):
    """Test the gap sequence and round count in the General region."""
    rho_seq, level_l = endpoint_recursion(general_params)
    assert level_l == 1
    assert rho_seq[0] == pytest.approx(0.0477778, abs=1e-7)
    assert rho_seq[1] == pytest.approx(-0.0466222, abs=1e-7)


def test_endpoint_recursion_simple(simple_params):
    """Test the Simple region performs no removal rounds."""
    assert endpoint_recursion(simple_params) == ((), 0)


@pytest.mark.parametrize("a", np.linspace(0.26, 0.33, 8))
def test_endpoint_recursion_terminates(a):
    """Test the recursion terminates along the top edge of the family."""
    p = validate(float(a), (1 - 3 * a) / 2 * 0.95)
    rho_seq, level_l = endpoint_recursion(p)
    assert level_l == (len(rho_seq) - 1 if rho_seq else 0)


@pytest.mark.parametrize(
    "fixture, epsilon, bound",
    [("simple_params", 0.0826403, 0.1652805), ("general_params", 0.015, 0.03)],
)
def test_default_epsilon(request, fixture, epsilon, bound):
    """Test the default epsilon is half of its bound."""
    p = request.getfixturevalue(fixture)
    assert epsilon_bound(p) == pytest.approx(bound, abs=1e-7)
    assert default_epsilon(p) == pytest.approx(epsilon, abs=1e-7)
    assert 0 < default_epsilon(p) < epsilon_bound(p)


def test_build_general_components(general_params, general_T):
    """Test the three unshrunk components and their shrunk versions."""
    expected = [
        (-0.8611111, -0.3188889),
        (-0.2711111, 0.2711111),
        (0.3188889, 0.8611111),
    ]
    assert general_T.level_l == 1
    assert general_T.region is Region.GENERAL
    assert np.allclose(general_T.unshrunk.array, expected, atol=1e-7)
    assert np.allclose(general_T.unshrunk.lengths(), 0.5422222, atol=1e-7)
    assert np.allclose(general_T.components.lengths(), 0.5422222 - 0.03, atol=1e-7)
    assert len(general_T.ledger) == 2
    for hole in general_T.ledger:
        assert hole.length == pytest.approx(general_T.rho_seq[0], abs=1e-12)


def test_build_simple(simple_params):
    """Test the Simple type space is one symmetric interval."""
    p = simple_params
    T = build(p, 0.0826)
    assert len(T.components) == 1
    assert T.total_length() == pytest.approx(2 * (1 - p.c - 0.0826))
    assert T.middle() == pytest.approx((-(1 - p.c - 0.0826), 1 - p.c - 0.0826))


@pytest.mark.parametrize("a, b", [(0.3, 0.049), (0.29, 0.04), (0.32, 0.015), (0.27, 0.03)])
def test_build_structure_holds(a, b):
    """Test 3^l equal symmetric components across parameters."""
    p = validate(a, b)
    T = build(p, default_epsilon(p))
    assert len(T.components) == 3**T.level_l
    assert np.ptp(T.unshrunk.lengths()) <= LENGTH_TOL
    assert T.reflect().isclose(T.components, 1e-12)
    for hole, rho in zip(T.ledger, typespace._ledger_rhos(T)):
        assert abs(hole.length - rho) <= LENGTH_TOL
    lo, hi = T.middle()
    assert lo < 0 < hi


def test_three_round_parameters():
    """Test parameters needing three removal rounds give 27 components."""
    p = validate(0.3, 0.049)
    T = build(p, default_epsilon(p))
    assert T.level_l == 3
    assert len(T.components) == 27
    assert len(T.ledger) == 2 + 6 + 18


@pytest.mark.parametrize("eps_factor", [0.0, 1.0, 1.5, -0.2])
def test_build_rejects_epsilon(general_params, eps_factor):
    """Test epsilon outside (0, bound) is rejected."""
    eps = eps_factor * epsilon_bound(general_params)
    with pytest.raises(EpsilonTooLarge):
        build(general_params, eps)


def test_support_E1_simple_origin(simple_params, simple_T):
    """Test E_1(0) is the middle stripe slice."""
    E = support_E1(0.0, simple_params, simple_T)
    width = simple_params.t / simple_params.a
    assert np.allclose(E.array, [[-width, width]])


def test_support_E1_outside(general_params, general_T):
    """Test types outside T are rejected."""
    with pytest.raises(XOutsideT):
        support_E1(0.3, general_params, general_T)


@pytest.mark.parametrize("fixture", ["simple", "general"])
def test_kappa_bounds_longest_piece(request, fixture):
    """Test the scanned kappa is positive, at most the stripe width and a lower bound."""
    p = request.getfixturevalue(f"{fixture}_params")
    T = request.getfixturevalue(f"{fixture}_T")
    k = kappa(p, T)
    assert 0 < k <= (1 - 3 * p.a - 2 * p.b) / p.a
    xs = np.concatenate([np.linspace(lo, hi, 2000) for lo, hi in T.components])
    for x in xs[::20]:
        E = support_E1(float(x), p, T)
        assert (E.lengths() > 0).all()
        assert E.longest() >= k - 1e-3


def test_kappa_grid_spacing(general_T):
    """Test the scan grid is at most 1e-4 apart inside each component."""
    xs = kappa_grid(general_T)
    steps = np.diff(xs)
    within = steps[steps < 0.01]
    assert within.max() <= 1e-4 + 1e-15


def test_kappa_closed_forms(simple_params, simple_T, general_params, general_T):
    """Test the advisory closed forms are reported per region."""
    simple = kappa_closed_forms(simple_params, simple_T)
    assert set(simple) == {"kappa1", "kappa2", "stripe_width"}
    general = kappa_closed_forms(general_params, general_T)
    eps = general_T.epsilon
    assert general["kappa_boundary"] == pytest.approx(eps / general_params.a - eps)


@pytest.mark.parametrize("fixture", ["simple", "general"])
def test_support_bound_reaches_T(request, fixture):
    """Test E_n(x) equals T from the support bound on, for random x."""
    p = request.getfixturevalue(f"{fixture}_params")
    T = request.getfixturevalue(f"{fixture}_T")
    n_star = support_bound(p, T)
    assert 1 <= n_star <= 20
    rng = derive_rng(0, 31)
    lo, hi = T.components.lo, T.components.hi
    for _ in range(100):
        k = int(rng.integers(len(T.components)))
        x = float(rng.uniform(lo[k], hi[k]))
        assert covers_T(iterate_support(x, n_star, p, T), T)
        assert covers_T(iterate_support(x, n_star + 2, p, T), T)


def test_support_bound_simple_is_small(simple_params, simple_T):
    """Test the Simple reference bound is a small integer."""
    assert support_bound(simple_params, simple_T) <= 10


def test_iterate_support_first_step(general_params, general_T):
    """Test one iteration is E_1."""
    E = iterate_support(0.1, 1, general_params, general_T)
    assert E.isclose(support_E1(0.1, general_params, general_T))


def test_first_step_does_not_cover(general_params, general_T):
    """Test a single step is narrower than T in the General region."""
    E = support_E1(0.05, general_params, general_T)
    assert not covers_T(E, general_T)
    assert E.total_length() < general_T.total_length()


def test_mirror_gap():
    """Test the mirror gap is zero for a symmetric array and the offset otherwise."""
    data = np.array([[-0.8, -0.3], [-0.2, 0.2], [0.3, 0.8]])
    assert mirror_gap(data) == 0.0
    data[0] += 1e-3
    assert mirror_gap(data) == pytest.approx(1e-3)
    assert mirror_gap(np.empty((0, 2))) == 0.0


def _patched_rounds(monkeypatch, edit):
    original = typespace._removal_rounds

    def rounds(p, count):
        return edit(original(p, count))

    monkeypatch.setattr(typespace, "_removal_rounds", rounds)


def test_build_rejects_asymmetric_removal(monkeypatch, general_params):
    """Test a hole shifted on one side only is caught before symmetrisation."""

    def shift(ledger):
        first = ledger[0]
        return [RemovedInterval(first.address, first.lo + 1e-10, first.hi + 1e-10)] + ledger[1:]

    _patched_rounds(monkeypatch, shift)
    with pytest.raises(InternalInconsistency, match="not symmetric"):
        build(general_params, default_epsilon(general_params))


def test_build_rejects_unequal_components(monkeypatch, general_params):
    """Test components differing in length by 1e-10 are rejected."""

    def widen(ledger):
        left, right = ledger[0], ledger[1]
        return [
            RemovedInterval(left.address, left.lo - 1e-10, left.hi),
            RemovedInterval(right.address, right.lo, right.hi + 1e-10),
        ] + ledger[2:]

    _patched_rounds(monkeypatch, widen)
    with pytest.raises(InternalInconsistency, match="differ in length"):
        build(general_params, default_epsilon(general_params))
