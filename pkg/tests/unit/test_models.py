from pathlib import Path

import pytest
from pydantic import ValidationError

from src.models import (
    CoverageRow,
    IntervalEstimate,
    MainLemmaCell,
    MainLemmaEstimate,
    ProbabilityEstimate,
    RatioCheck,
    RunConfig,
)


def test_run_config_defaults():
    """Test the defaults of an otherwise empty config."""
    cfg = RunConfig(a=0.26, b=0.01)
    assert cfg.mode == "shared"
    assert cfg.out == Path("out")
    assert cfg.workers >= 1
    assert cfg.K is None and cfg.delta is None
    assert cfg.nproxy is None


@pytest.mark.parametrize(
    "field, value",
    [
        ("a", float("nan")),
        ("b", float("inf")),
        ("trials", 0),
        ("q", -0.1),
        ("mode", "x"),
        ("nproxy", 0),
    ],
)
def test_run_config_rejects(field, value):
    """Test invalid option values are rejected."""
    with pytest.raises(ValidationError):
        RunConfig(**{"a": 0.26, "b": 0.01, field: value})


def test_run_config_frozen():
    """Test configs are immutable."""
    cfg = RunConfig(a=0.26, b=0.01)
    with pytest.raises(ValidationError):
        cfg.seed = 3  # type: ignore[misc]


def test_main_lemma_lookup():
    """Test cells are found by (x, n)."""
    cell = MainLemmaCell(x=0.1, n=4, probability=0.3, ci_low=0.2, ci_high=0.4, trials=100)
    est = MainLemmaEstimate(
        K=0.1, delta=0.2, N=4, rho=1.1, table=[cell], qhat=0.3, ci=0.1, ci_low=0.2
    )
    assert est.probability(0.1, 4) == 0.3
    with pytest.raises(KeyError):
        est.probability(0.1, 5)


def test_main_lemma_rejects_large_K():
    """Test K must stay below 1/8."""
    with pytest.raises(ValidationError):
        MainLemmaEstimate(K=0.2, delta=0.2, N=4, rho=1.1, table=[], qhat=0.3, ci=0.1, ci_low=0.2)


def test_ratio_relative_error():
    """Test the relative error of the ratio check."""
    check = RatioCheck(empirical=1.1, predicted=1.0, surviving_trials=10)
    assert check.relative_error == pytest.approx(0.1)


def _row(depth: int) -> CoverageRow:
    return CoverageRow(
        depth=depth,
        covered=1,
        trials=2,
        probability=0.5,
        ci_low=0.1,
        ci_high=0.9,
        mean_union_length=1.0,
        length_bound=2.0,
    )


def test_interval_estimate_curve_depth():
    """Test the coverage curve must end at the requested depth."""
    estimate = ProbabilityEstimate(probability=0.5, ci_low=0.1, ci_high=0.9, successes=1, trials=2)
    fields = dict(K=0.1, N=2, mode="shared", half_width=0.01, estimate=estimate)
    IntervalEstimate(depth=2, curve=[_row(1), _row(2)], monotonicity_violations=0, **fields)
    with pytest.raises(ValidationError):
        IntervalEstimate(depth=3, curve=[_row(1), _row(2)], monotonicity_violations=0, **fields)
