"""
Command-line entry point.

Every command resolves a ``RunConfig`` (defaults, then ``--config`` JSON,
then flags), runs one pipeline through ``dispatch`` and writes its CSV, JSON
and SVG artifacts plus the resolved ``config.json`` into ``--out``.
"""

import json
import logging
import sys
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import tyro
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from tyro.extras import SubcommandApp
from typing_extensions import Annotated

from .branching import (
    STABILISATION_LAG,
    calibrate_delta,
    default_K,
    estimate_main_lemma,
    estimate_p24,
    estimate_survival_floor,
    estimate_w_ratio,
    expected_count,
    simulate_counts,
    w_stabilisation,
)
from .cantor import sample_offset_tree
from .diffset import estimate_interval_prob, palis_lower_bound, subdivision, trees_for_trial
from .errors import LarssonError, ParseError, SubdivisionOverflow, UnknownCommand
from .kernel import kernel_rows, offspring_probabilities
from .models import LogLevel, MainLemmaEstimate, Mode, OutputBundle, RegionReport, RunConfig
from .params import Params, classify, derive, region_polynomial, validate
from .render import render
from .spectral import (
    KernelMatrix,
    SpectralResult,
    epsilon_sweep,
    harris_check,
    refinement_delta,
    spectrum,
    uniform_positivity,
)
from .typespace import (
    TypeSpace,
    build,
    default_epsilon,
    epsilon_bound,
    kappa,
    kappa_closed_forms,
    support_bound,
)
from .utils import write_csv, write_json, write_text

logging.basicConfig(
    level=logging.WARNING,
    format="%(message)s",
    handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
)
logger = logging.getLogger(__name__)

console = Console()

app = SubcommandApp()

SQUARES_MAX_LEVEL = 4
SUBDIVISION_LEVELS = 3
XGRID_POINTS = 11
NRANGE_WIDTH = 4
NPROXY_OFFSET = 30


def parse_config(
    path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Merge a JSON config file with flag overrides into a validated ``RunConfig``.

    ``None``-valued overrides are ignored.

    Raises:
        ParseError: for malformed JSON, a missing ``a``/``b`` or a field that
            fails validation; the message carries the location.
        InvalidParams: if ``(a, b)`` is outside the admissible family.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ParseError(f"cannot read config {path}: {e.strerror}") from e
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(
                f"{path}:{e.lineno}:{e.colno}: {e.msg}",
                data={"line": e.lineno, "column": e.colno},
            ) from e
        if not isinstance(loaded, dict):
            raise ParseError(f"{path}: top level must be a JSON object")
        data.update(loaded)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for name in ("a", "b"):
        if name not in data:
            raise ParseError(f"missing required field '{name}'", data={"field": name})
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = ".".join(str(part) for part in first["loc"])
        raise ParseError(f"{loc}: {first['msg']}", data={"errors": len(e.errors())}) from e
    validate(cfg.a, cfg.b)
    return cfg


class Pipeline:
    """Inputs shared by the commands of one run, resolved on first use."""

    def __init__(self, cfg: RunConfig) -> None:
        self.cfg = cfg
        self.resolved: Dict[str, Any] = {}
        self.files: List[Path] = []

    @cached_property
    def params(self) -> Params:
        return validate(self.cfg.a, self.cfg.b)

    @cached_property
    def epsilon(self) -> float:
        eps = self.cfg.epsilon if self.cfg.epsilon is not None else default_epsilon(self.params)
        self.resolved["epsilon"] = eps
        return eps

    @cached_property
    def typespace(self) -> TypeSpace:
        return build(self.params, self.epsilon)

    @cached_property
    def grid_step(self) -> float:
        step = self.cfg.grid_step if self.cfg.grid_step is not None else self.params.t / 10.0
        self.resolved["grid_step"] = step
        return step

    @cached_property
    def kernel(self) -> Tuple[KernelMatrix, SpectralResult]:
        return spectrum(self.params, self.typespace, self.grid_step)

    @cached_property
    def positivity(self) -> Tuple[int, float, float]:
        return uniform_positivity(self.kernel[0])

    @cached_property
    def N(self) -> int:
        n = self.cfg.N if self.cfg.N is not None else self.positivity[0]
        self.resolved["N"] = n
        return n

    @cached_property
    def nproxy(self) -> int:
        n = self.cfg.nproxy if self.cfg.nproxy is not None else self.positivity[0] + NPROXY_OFFSET
        self.resolved["nproxy"] = n
        return n

    @cached_property
    def K(self) -> float:
        k = self.cfg.K if self.cfg.K is not None else default_K(self.typespace)
        self.resolved["K"] = k
        return k

    @cached_property
    def delta(self) -> float:
        if self.cfg.delta is not None:
            return self.cfg.delta
        _, s = self.kernel
        # pilot trials use a separate stream
        d = calibrate_delta(
            self.params,
            self.typespace,
            s,
            self.K,
            self.N,
            self.cfg.trials,
            seed=self.cfg.seed + 1,
            x=self.cfg.x,
            workers=self.cfg.workers,
            cap=self.cfg.population_cap,
        )
        self.resolved["delta"] = d
        return d

    @cached_property
    def rho(self) -> float:
        rho = self.cfg.rho if self.cfg.rho is not None else self.kernel[1].rho
        self.resolved["rho"] = rho
        return rho

    @cached_property
    def xgrid(self) -> List[float]:
        """Equally spaced ancestor types across [-K, K]."""
        return np.linspace(-self.K, self.K, XGRID_POINTS).tolist()

    @cached_property
    def main_lemma(self) -> MainLemmaEstimate:
        _, s = self.kernel
        return estimate_main_lemma(
            self.params,
            self.typespace,
            s,
            self.K,
            self.delta,
            list(range(self.N, self.N + NRANGE_WIDTH)),
            self.xgrid,
            self.cfg.trials,
            seed=self.cfg.seed,
            workers=self.cfg.workers,
            cap=self.cfg.population_cap,
        )

    def csv(self, name: str, rows: List[Dict[str, Any]]) -> None:
        self.files.append(write_csv(rows, self.cfg.out / name))

    def json(self, name: str, payload: Any) -> None:
        self.files.append(write_json(payload, self.cfg.out / name))

    def svg(self, name: str, text: str) -> None:
        self.files.append(write_text(text, self.cfg.out / name))

    def finish(
        self, command: str, summary: Dict[str, Any], data: Optional[Dict[str, Any]] = None
    ) -> OutputBundle:
        resolved = self.cfg.model_copy(update=self.resolved)
        self.files.insert(0, write_json(resolved, self.cfg.out / "config.json"))
        return OutputBundle(command=command, files=self.files, summary=summary, data=data or {})


def _summary(model: BaseModel) -> Dict[str, Any]:
    return {k: v for k, v in model.model_dump().items() if not isinstance(v, (list, dict))}


def cmd_classify(run: Pipeline) -> OutputBundle:
    """Classify (a, b) and print the derived constants."""
    p = run.params
    d = derive(p)
    report = RegionReport(
        a=p.a,
        b=p.b,
        region=classify(p).value,
        polynomial=region_polynomial(p),
        t=d.t,
        c=d.c,
        fourA=d.four_a,
        dimSum=d.dim_sum,
        rho1=d.rho1,
    )
    run.json("region.json", report)
    return run.finish("classify", report.model_dump(), {"params": p})


def cmd_typespace(run: Pipeline) -> OutputBundle:
    """Build the type space T(eps) and its support constants."""
    p, T = run.params, run.typespace
    k = kappa(p, T)
    summary: Dict[str, Any] = {
        "region": T.region.value,
        "level_l": T.level_l,
        "epsilon": T.epsilon,
        "epsilon_bound": epsilon_bound(p),
        "components": len(T.components),
        "component_length": float(T.components.lengths()[0]),
        "total_length": T.total_length(),
        "kappa": k,
        "support_bound": support_bound(p, T, k),
    }
    summary.update(kappa_closed_forms(p, T))
    run.csv("typespace.csv", T.to_rows())
    run.json("typespace.json", summary)
    return run.finish("typespace", summary, {"params": p, "typespace": T})


def cmd_spectrum(run: Pipeline) -> OutputBundle:
    """Discretise the kernel, find rho with its eigenfunctions and check uniform positivity."""
    p, T = run.params, run.typespace
    M, s = run.kernel
    n0, m_min, m_max = run.positivity
    errors, rate = harris_check(M, s, run.cfg.nmax)
    summary: Dict[str, Any] = dict(s.summary())
    summary.update(
        {
            "grid_step": run.grid_step,
            "nodes": len(M.grid),
            "n0": n0,
            "m_min": m_min,
            "m_max": m_max,
            "harris_rate": rate,
            "harris_last": errors[-1],
            "refinement_delta": refinement_delta(p, T, run.grid_step),
        }
    )
    run.csv(
        "spectrum.csv",
        [
            {"x": x, "weight": w, "component": int(c), "mu": mu, "nu": nu}
            for x, w, c, mu, nu in zip(M.grid.nodes, M.weights, M.grid.component, s.mu, s.nu)
        ],
    )
    run.csv("harris.csv", [{"n": n, "error": e} for n, e in enumerate(errors, start=1)])
    run.csv("epsilon_sweep.csv", epsilon_sweep(p, run.grid_step))
    run.json("spectrum.json", summary)
    return run.finish("spectrum", summary, {"params": p, "typespace": T})


def cmd_branching(run: Pipeline) -> OutputBundle:
    """Simulate the branching process from type x and compare with the kernel expectation."""
    cfg, p, T = run.cfg, run.params, run.typespace
    M, s = run.kernel
    K = run.K
    left, right = (-K, 0.0), (0.0, K)
    n = cfg.generations
    stats = simulate_counts(
        cfg.x, n, [left, right], cfg.trials, cfg.seed, p, T, s, cfg.population_cap, cfg.workers
    )
    extinct = stats.extinction()
    rows = []
    for k in range(n + 1):
        mean = stats.mean(k)
        rows.append(
            {
                "generation": k,
                "mean_left": mean[0],
                "mean_right": mean[1],
                "expected_left": expected_count(cfg.x, left, k, M, p),
                "expected_right": expected_count(cfg.x, right, k, M, p),
                "extinct": extinct[k],
            }
        )
    one, two, none = offspring_probabilities(cfg.x, p, T)
    summary: Dict[str, Any] = {
        "x": cfg.x,
        "K": K,
        "rho": s.rho,
        "p_one": one,
        "p_two": two,
        "p_none": none,
        "capped_trials": stats.capped_trials,
        "ties": stats.ties,
    }
    if n > STABILISATION_LAG:
        summary["w_stabilisation"] = w_stabilisation(stats, n - STABILISATION_LAG)
    if n >= 1:
        ratio = estimate_w_ratio(
            cfg.x,
            left,
            right,
            n,
            cfg.trials,
            p,
            T,
            M,
            s,
            seed=cfg.seed,
            workers=cfg.workers,
            cap=cfg.population_cap,
        )
        summary.update({f"ratio_{k}": v for k, v in ratio.model_dump().items()})
    run.csv("branching.csv", rows)
    run.json("branching.json", summary)
    return run.finish("branching", summary)


def cmd_mainlemma(run: Pipeline) -> OutputBundle:
    """Estimate the two-sided nice-count probability over a grid of ancestor types."""
    cfg = run.cfg
    est = run.main_lemma
    _, s = run.kernel
    floor = estimate_survival_floor(
        run.xgrid,
        (-run.K, run.K),
        run.delta,
        cfg.trials,
        run.nproxy,
        run.params,
        run.typespace,
        s,
        seed=cfg.seed,
        workers=cfg.workers,
        cap=cfg.population_cap,
    )
    run.csv("mainlemma.csv", [cell.model_dump() for cell in est.table])
    run.json("mainlemma.json", est)
    run.json("survival_floor.json", floor)
    summary = _summary(est)
    summary["survival_floor"] = floor.rhat
    return run.finish("mainlemma", summary)


def cmd_diffset(run: Pipeline) -> OutputBundle:
    """Monte Carlo coverage of I = [-K a^N, K a^N] by C2 - C1."""
    cfg, p = run.cfg, run.params
    K, N = run.K, run.N
    est = estimate_interval_prob(p, K, N, cfg.depth, cfg.trials, cfg.seed, cfg.mode, cfg.workers)
    run.csv("coverage.csv", [row.model_dump() for row in est.curve])
    run.json("diffset.json", est)
    summary = _summary(est)
    summary.update({f"estimate_{k}": v for k, v in est.estimate.model_dump().items()})
    if -K <= cfg.x <= K:
        summary["p24"] = estimate_p24(cfg.x, K, cfg.trials, cfg.seed, p).probability
    level = min(cfg.depth, SQUARES_MAX_LEVEL)
    data = {
        "params": p,
        "trees": trees_for_trial(p, level, cfg.seed, 0),
        "level": level,
        "x": cfg.x,
    }
    return run.finish("diffset", summary, data)


def cmd_bound(run: Pipeline) -> OutputBundle:
    """Evaluate the product lower bound on P(C2 - C1 contains I)."""
    cfg = run.cfg
    q = cfg.q if cfg.q is not None else run.main_lemma.qhat
    run.resolved["q"] = q
    result = palis_lower_bound(q, run.delta, run.rho, run.N, cfg.kmax)
    rows = []
    for k in range(1, SUBDIVISION_LEVELS + 1):
        try:
            scheme = subdivision(run.K, run.N, run.params.a, k)
        except SubdivisionOverflow:
            logger.info(f"subdivision stops at level {k - 1}")
            break
        rows.append(
            {
                "k": k,
                "count": float(scheme.count),
                "length": scheme.length,
                "length_bound": scheme.length_bound,
                "g_k": scheme.g_k,
            }
        )
    run.csv("bound_factors.csv", [{"k": k, "factor": f} for k, f in enumerate(result.factors, 1)])
    if rows:
        run.csv("subdivision.csv", rows)
    run.json("bound.json", result)
    summary = _summary(result)
    summary.update({"q": q, "delta": run.delta, "rho": run.rho, "N": run.N})
    return run.finish("bound", summary)


def _rendered(
    kind: str, filename: str, build_bundle: Callable[[Pipeline], OutputBundle]
) -> Callable[[Pipeline], OutputBundle]:
    def command(run: Pipeline) -> OutputBundle:
        bundle = build_bundle(run)
        run.svg(filename, render(bundle, kind))
        return bundle

    command.__doc__ = f"Write {filename}."
    return command


def _region_data(run: Pipeline) -> OutputBundle:
    p = run.params
    return run.finish("render-region", {"a": p.a, "b": p.b}, {"points": [(p.a, p.b)]})


def _cantor_data(run: Pipeline) -> OutputBundle:
    cfg, p = run.cfg, run.params
    tree = sample_offset_tree(p, cfg.depth, cfg.seed, 0)
    run.json("tree.json", tree.to_json())
    summary = {"depth": cfg.depth, "seed": cfg.seed}
    return run.finish("render-cantor", summary, {"tree": tree, "params": p, "depth": cfg.depth})


def _squares_data(run: Pipeline) -> OutputBundle:
    cfg, p = run.cfg, run.params
    level = min(cfg.depth, SQUARES_MAX_LEVEL)
    if level < cfg.depth:
        logger.info(f"drawing level {level} squares instead of {cfg.depth}")
    trees = trees_for_trial(p, level, cfg.seed, 0)
    data = {"trees": trees, "params": p, "level": level, "x": cfg.x}
    return run.finish("render-squares", {"level": level, "x": cfg.x}, data)


def _kernel_data(run: Pipeline) -> OutputBundle:
    p, T = run.params, run.typespace
    run.csv("kernel.csv", kernel_rows(p, T))
    summary = {"epsilon": T.epsilon, "components": len(T.components)}
    return run.finish("render-kernel", summary, {"params": p, "typespace": T})


COMMANDS: Dict[str, Callable[[Pipeline], OutputBundle]] = {
    "classify": cmd_classify,
    "typespace": cmd_typespace,
    "spectrum": cmd_spectrum,
    "branching": cmd_branching,
    "mainlemma": cmd_mainlemma,
    "diffset": cmd_diffset,
    "bound": cmd_bound,
    "render-region": _rendered("region", "region.svg", _region_data),
    "render-cantor": _rendered("cantor", "cantor.svg", _cantor_data),
    "render-squares": _rendered("squares", "squares.svg", _squares_data),
    "render-kernel": _rendered("kernel", "kernel.svg", _kernel_data),
}


def dispatch(cfg: RunConfig, command: str) -> OutputBundle:
    """
    Run ``command`` on ``cfg`` and write its artifacts.

    Raises:
        UnknownCommand: if ``command`` is not registered.
    """
    if command not in COMMANDS:
        raise UnknownCommand(f"unknown command {command!r}", data={"commands": sorted(COMMANDS)})
    cfg.out.mkdir(parents=True, exist_ok=True)
    logger.info(f"{command}: a={cfg.a} b={cfg.b} -> {cfg.out}")
    return COMMANDS[command](Pipeline(cfg))


def show(bundle: OutputBundle) -> None:
    table = Table(title=bundle.command)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="white")
    for key, value in bundle.summary.items():
        if isinstance(value, float):
            text = f"{value:.10g}"
        else:
            text = str(value)
        table.add_row(key, text)
    console.print(table)
    for path in bundle.files:
        console.print(f"[dim]wrote {path}[/dim]")


@dataclass
class RunFlags:
    """Flags shared by every command. Unset flags fall back to --config, then to defaults."""

    config: Optional[Path] = None
    a: Optional[float] = None
    b: Optional[float] = None
    epsilon: Optional[float] = None
    grid_step: Optional[float] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    depth: Optional[int] = None
    K: Optional[float] = None
    delta: Optional[float] = None
    N: Optional[int] = None
    x: Optional[float] = None
    generations: Optional[int] = None
    nmax: Optional[int] = None
    kmax: Optional[int] = None
    q: Optional[float] = None
    rho: Optional[float] = None
    mode: Optional[Mode] = None
    out: Optional[Path] = None
    workers: Optional[int] = None
    log_level: Optional[LogLevel] = None
    verbose: bool = False

    def overrides(self) -> Dict[str, Any]:
        values = asdict(self)
        values.pop("config")
        values.pop("verbose")
        if self.verbose:
            values["log_level"] = "DEBUG"
        return values


def run(command: str, flags: RunFlags) -> OutputBundle:
    """Parse, dispatch and print; library errors exit with their exit code."""
    out = flags.out or Path("out")
    try:
        cfg = parse_config(flags.config, flags.overrides())
        logging.getLogger().setLevel(cfg.log_level)
        out = cfg.out
        bundle = dispatch(cfg, command)
    except LarssonError as err:
        console.print(f"[red]{type(err).__name__}:[/red] {err.message}")
        write_json(err.to_dict(), out / "error.json")
        sys.exit(err.exit_code)
    show(bundle)
    return bundle


Flags = Annotated[RunFlags, tyro.conf.arg(name="")]


@app.command(name="classify")
def classify_cmd(flags: Flags) -> None:
    """Classify (a, b) as Simple or General and print the derived constants."""
    run("classify", flags)


@app.command(name="typespace")
def typespace_cmd(flags: Flags) -> None:
    """Build T(eps), its removal ledger and kappa."""
    run("typespace", flags)


@app.command(name="spectrum")
def spectrum_cmd(flags: Flags) -> None:
    """Dominant eigenvalue, eigenfunctions, uniform positivity and Harris convergence."""
    run("spectrum", flags)


@app.command(name="branching")
def branching_cmd(flags: Flags) -> None:
    """Simulate the branching process from type --x."""
    run("branching", flags)


@app.command(name="mainlemma")
def mainlemma_cmd(flags: Flags) -> None:
    """Estimate the two-sided nice-count probability."""
    run("mainlemma", flags)


@app.command(name="diffset")
def diffset_cmd(flags: Flags) -> None:
    """Estimate P(C2 - C1 contains I) by Monte Carlo."""
    run("diffset", flags)


@app.command(name="bound")
def bound_cmd(flags: Flags) -> None:
    """Evaluate the product lower bound from q, delta, rho and N."""
    run("bound", flags)


@app.command(name="render-region")
def render_region_cmd(flags: Flags) -> None:
    """SVG of the admissible (a, b) region."""
    run("render-region", flags)


@app.command(name="render-cantor")
def render_cantor_cmd(flags: Flags) -> None:
    """SVG of the construction levels of one random Cantor set."""
    run("render-cantor", flags)


@app.command(name="render-squares")
def render_squares_cmd(flags: Flags) -> None:
    """SVG of labelled product squares with the line e(x)."""
    run("render-squares", flags)


@app.command(name="render-kernel")
def render_kernel_cmd(flags: Flags) -> None:
    """SVG of the kernel support stripes with T x T."""
    run("render-kernel", flags)


def main() -> None:
    app.cli(description="Random Cantor sets, their type branching process and difference sets")


if __name__ == "__main__":
    main()
