"""
Pydantic models for run configuration and JSON result summaries.

Numerical cores work with numpy arrays and frozen dataclasses; anything
that is written to disk as JSON goes through one of these models.
"""

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Mode = Literal["shared", "iid"]
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class RunConfig(BaseModel):
    """Resolved configuration of one CLI run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    a: float = Field(..., description="Contraction ratio of one construction step")
    b: float = Field(..., description="Edge gap of one construction step")
    epsilon: Optional[float] = Field(
        default=None, description="Type-space shrink; default half the bound"
    )
    grid_step: Optional[float] = Field(
        default=None, description="Quadrature cell width; default t/10"
    )
    seed: int = Field(default=0, ge=0, description="Master seed")
    trials: int = Field(default=1000, ge=1, description="Monte Carlo trials")
    depth: int = Field(default=10, ge=1, description="Construction depth for diffset")
    K: Optional[float] = Field(default=None, description="Nice-intersection half width")
    delta: Optional[float] = Field(default=None, description="Main Lemma threshold factor")
    N: Optional[int] = Field(default=None, ge=1, description="Main Lemma generation")
    nproxy: Optional[int] = Field(
        default=None, ge=1, description="Generation standing in for W; default n0 + 30"
    )
    x: float = Field(default=0.0, description="Ancestor type / line offset")
    generations: int = Field(default=6, ge=0, description="Generations for branching runs")
    nmax: int = Field(default=50, ge=1, description="Extra powers checked by harris")
    kmax: int = Field(default=60, ge=1, description="Factors in the lower-bound product")
    q: Optional[float] = Field(default=None, description="Probability fed to the bound evaluator")
    rho: Optional[float] = Field(default=None, description="Eigenvalue fed to the bound evaluator")
    mode: Mode = Field(default="shared", description="Product semantics for diffset")
    out: Path = Field(default=Path("out"), description="Output directory")
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    population_cap: int = Field(default=10_000_000, ge=1)
    log_level: LogLevel = "WARNING"

    @field_validator("a", "b")
    @classmethod
    def finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    @field_validator("q")
    @classmethod
    def probability(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("must lie in [0, 1]")
        return v


class RegionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    region: str
    polynomial: float
    t: float
    c: float
    fourA: float
    dimSum: float
    rho1: float


class MainLemmaCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    n: int
    probability: float = Field(..., ge=0.0, le=1.0)
    ci_low: float
    ci_high: float
    trials: int


class MainLemmaEstimate(BaseModel):
    """Empirical two-sided nice-count probabilities over an (x, n) grid."""

    model_config = ConfigDict(frozen=True)

    K: float = Field(..., gt=0.0, lt=0.125)
    delta: float = Field(..., gt=0.0)
    N: int
    rho: float
    table: List[MainLemmaCell]
    qhat: float = Field(..., ge=0.0, le=1.0)
    ci: float = Field(..., ge=0.0, description="Half width of the 95% interval at the minimum")
    ci_low: float
    capped_trials: int = 0

    def probability(self, x: float, n: int) -> float:
        for cell in self.table:
            if cell.n == n and math.isclose(cell.x, x, abs_tol=1e-12):
                return cell.probability
        raise KeyError((x, n))


class SurvivalFloor(BaseModel):
    model_config = ConfigDict(frozen=True)

    rhat: float = Field(..., ge=0.0, le=1.0)
    per_x: Dict[str, float]
    y: float
    nproxy: int
    stabilisation: float = Field(..., description="L1 relative change of the W histogram")
    stabilised: bool


class RatioCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    empirical: float
    predicted: float
    surviving_trials: int

    @property
    def relative_error(self) -> float:
        return abs(self.empirical - self.predicted) / self.predicted


class ProbabilityEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    probability: float = Field(..., ge=0.0, le=1.0)
    ci_low: float
    ci_high: float
    successes: int
    trials: int


class CoverageRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    depth: int
    covered: int
    trials: int
    probability: float
    ci_low: float
    ci_high: float
    mean_union_length: float
    length_bound: float


class IntervalEstimate(BaseModel):
    """Difference-set coverage of I = [-K a^N, K a^N]."""

    model_config = ConfigDict(frozen=True)

    K: float
    N: int
    depth: int
    mode: str
    half_width: float
    estimate: ProbabilityEstimate
    curve: List[CoverageRow]
    monotonicity_violations: int

    @model_validator(mode="after")
    def curve_matches(self) -> "IntervalEstimate":
        if self.curve and self.curve[-1].depth != self.depth:
            raise ValueError("coverage curve must end at the requested depth")
        return self


class BoundResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., ge=0.0)
    factors: List[float]
    converged_at: Optional[int] = Field(
        default=None, description="First k whose factor exceeds 1 - 1e-12"
    )
    divergent: bool


@dataclass
class OutputBundle:
    """What a dispatched command produced: written files, a summary and render inputs."""

    command: str
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    data: Dict[str, Any] = field(default_factory=dict)
