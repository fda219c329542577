"""Shared helpers: counter-based random streams, binomial intervals, artifact writers."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel
from scipy import stats

logger = logging.getLogger(__name__)

T = TypeVar("T")

CSV_FLOAT_FORMAT = "%.17g"


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *keys)``; insensitive to call order."""
    sequence = np.random.SeedSequence([int(seed), *map(int, keys)])
    return np.random.Generator(np.random.Philox(sequence))


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(
        confidence_level=confidence, method="wilson"
    )
    return float(ci.low), float(ci.high)


def trial_blocks(trials: int, workers: int) -> List[range]:
    """Split ``range(trials)`` into at most ``workers`` contiguous blocks."""
    workers = max(1, min(int(workers), int(trials)))
    edges = np.linspace(0, trials, workers + 1).astype(int)
    return [range(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def write_csv(rows: Sequence[Dict[str, Any]], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows)).to_csv(path, float_format=CSV_FLOAT_FORMAT, index=False)
    logger.info(f"wrote {path}")
    return path


def write_json(payload: Any, path: Path) -> Path:
    """Write a pydantic model or plain JSON-serialisable object."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        text = payload.model_dump_json(indent=2)
    else:
        text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    path.write_text(text + "\n")
    logger.info(f"wrote {path}")
    return path


def write_text(text: str, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"wrote {path}")
    return path


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def flatten(chunks: Iterable[Iterable[T]]) -> List[T]:
    return [item for chunk in chunks for item in chunk]
