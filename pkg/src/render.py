"""
Deterministic SVG figures.

Every figure is built by a small command-list writer: elements are
appended as text with fixed-precision coordinates and the view box is the
bounding box of everything that was ``require``d, so the same inputs give
byte-identical documents.
"""

import logging
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cantor import OffsetTree, level_intervals, product_squares
from .errors import MissingData
from .kernel import stripe_bounds
from .models import OutputBundle
from .params import Params, region_grid
from .typespace import TypeSpace

logger = logging.getLogger(__name__)

Point = Tuple[float, float]

PREAMBLE = """\
<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" \
width="%(width).2f" height="%(height).2f" viewBox="%(x0).2f %(y0).2f %(width).2f %(height).2f">
<title>%(title)s</title>
<style>
rect.cell { fill: #9ecae1; stroke: none; }
rect.square { fill: #deebf7; stroke: #08519c; stroke-width: 0.5; }
rect.T { fill: #fdae6b; fill-opacity: 0.45; stroke: none; }
polygon.stripe { fill: #74c476; fill-opacity: 0.55; stroke: #238b45; stroke-width: 0.5; }
polygon.admissible, rect.frame { fill: none; stroke: #000000; stroke-width: 0.75; }
polyline.boundary, polyline.line { fill: none; stroke: #cb181d; stroke-width: 1; }
text { font-family: monospace; font-size: 9px; fill: #444444; }
</style>
"""

POSTAMBLE = "</svg>\n"

PAD = 12.0


def _fmt(value: float) -> str:
    # -0.00 and 0.00 must print alike
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


class SVG:
    """
    Command-list SVG writer over a fixed data frame.

    Data coordinates ``[x0, x1] x [y0, y1]`` map onto a ``width`` by
    ``height`` canvas with y pointing up.
    """

    def __init__(
        self,
        frame: Tuple[float, float, float, float],
        width: float = 400.0,
        height: float = 400.0,
        title: str = "",
    ) -> None:
        self.x0, self.x1, self.y0, self.y1 = frame
        self.width = width
        self.height = height
        self.title = title
        self.min_x: Optional[float] = None
        self.max_x: Optional[float] = None
        self.min_y: Optional[float] = None
        self.max_y: Optional[float] = None
        self.commands: List[str] = []
        self.defs: List[str] = []

    def point(self, x: float, y: float) -> Point:
        px = (x - self.x0) / (self.x1 - self.x0) * self.width
        py = (self.y1 - y) / (self.y1 - self.y0) * self.height
        return px, py

    def require(self, px: float, py: float) -> None:
        if self.min_x is None or self.max_x is None or self.min_y is None or self.max_y is None:
            self.min_x = self.max_x = px
            self.min_y = self.max_y = py
            return
        self.min_x = min(self.min_x, px)
        self.max_x = max(self.max_x, px)
        self.min_y = min(self.min_y, py)
        self.max_y = max(self.max_y, py)

    def _points(self, points: Iterable[Point]) -> str:
        out = []
        for x, y in points:
            px, py = self.point(x, y)
            self.require(px, py)
            out.append(f"{_fmt(px)},{_fmt(py)}")
        return " ".join(out)

    def rect(self, x: float, y: float, w: float, h: float, cls: str, clip: str = "") -> None:
        """Axis-aligned box with lower-left data corner ``(x, y)``."""
        px, py = self.point(x, y + h)
        qx, qy = self.point(x + w, y)
        self.require(px, py)
        self.require(qx, qy)
        extra = f' clip-path="url(#{clip})"' if clip else ""
        self.commands.append(
            f'<rect class="{cls}" x="{_fmt(px)}" y="{_fmt(py)}" '
            f'width="{_fmt(qx - px)}" height="{_fmt(qy - py)}"{extra}/>'
        )

    def polyline(self, points: Sequence[Point], cls: str) -> None:
        self.commands.append(f'<polyline class="{cls}" points="{self._points(points)}"/>')

    def polygon(self, points: Sequence[Point], cls: str, clip: str = "") -> None:
        extra = f' clip-path="url(#{clip})"' if clip else ""
        self.commands.append(f'<polygon class="{cls}" points="{self._points(points)}"{extra}/>')

    def text(self, x: float, y: float, text: str, anchor: str = "middle") -> None:
        px, py = self.point(x, y)
        self.require(px, py)
        self.commands.append(
            f'<text x="{_fmt(px)}" y="{_fmt(py)}" text-anchor="{anchor}">{text}</text>'
        )

    def clip_box(self, name: str, x: float, y: float, w: float, h: float) -> None:
        px, py = self.point(x, y + h)
        qx, qy = self.point(x + w, y)
        self.defs.append(
            f'<clipPath id="{name}"><rect x="{_fmt(px)}" y="{_fmt(py)}" '
            f'width="{_fmt(qx - px)}" height="{_fmt(qy - py)}"/></clipPath>'
        )

    def document(self) -> str:
        if self.min_x is None or self.max_x is None or self.min_y is None or self.max_y is None:
            self.require(0.0, 0.0)
            self.require(self.width, self.height)
        assert self.min_x is not None and self.max_x is not None
        assert self.min_y is not None and self.max_y is not None
        values = {
            "x0": self.min_x - PAD,
            "y0": self.min_y - PAD,
            "width": self.max_x - self.min_x + 2 * PAD,
            "height": self.max_y - self.min_y + 2 * PAD,
            "title": self.title,
        }
        parts = [PREAMBLE % values]
        if self.defs:
            parts.append("<defs>\n" + "\n".join(self.defs) + "\n</defs>\n")
        parts.extend(cmd + "\n" for cmd in self.commands)
        parts.append(POSTAMBLE)
        return "".join(parts)


def boundary_curve(a: np.ndarray) -> np.ndarray:
    """b on the curve 1 - 4a - 2b + 3a^2 - 6ab = 0."""
    return (1.0 - a) * (1.0 - 3.0 * a) / (2.0 * (1.0 + 3.0 * a))


def render_region(data: Dict[str, object]) -> str:
    """Admissible (a, b) triangle, Simple cells and the region boundary curve."""
    n = int(data.get("grid", 40))  # type: ignore[call-overload]
    a_vals, b_vals, simple, _ = region_grid(n)
    a_lo, a_hi, b_hi = 0.25, 1.0 / 3.0, 0.125
    fig = SVG((a_lo, a_hi, 0.0, b_hi), width=400.0, height=600.0, title="Parameter regions")
    da = (a_hi - a_lo) / (n + 1)
    db = b_hi / (n + 1)
    for i, j in zip(*np.nonzero(simple)):
        fig.rect(float(a_vals[i]) - da / 2, float(b_vals[j]) - db / 2, da, db, "cell")
    fig.polygon([(a_lo, 0.0), (a_hi, 0.0), (a_lo, b_hi)], "admissible")
    curve_a = np.linspace(a_lo, a_hi, 101)
    fig.polyline(list(zip(curve_a.tolist(), boundary_curve(curve_a).tolist())), "boundary")
    points = data.get("points", [])
    for a, b in points:  # type: ignore[attr-defined]
        fig.text(float(a), float(b), "+")
    fig.text(a_lo, -0.006, "a=1/4", anchor="start")
    fig.text(a_hi, -0.006, "a=1/3", anchor="end")
    return fig.document()


def render_cantor(data: Dict[str, object]) -> str:
    """One row of intervals per construction level, level 0 on top."""
    tree = data["tree"]
    p = data["params"]
    assert isinstance(tree, OffsetTree) and isinstance(p, Params)
    depth = int(data.get("depth", tree.depth))  # type: ignore[call-overload]
    row = 1.0 / (depth + 1)
    fig = SVG((0.0, 1.0, 0.0, 1.0), width=600.0, height=40.0 * (depth + 1), title="Cantor levels")
    for n in range(depth + 1):
        y = 1.0 - (n + 1) * row
        if n == 0:
            fig.rect(0.0, y + 0.25 * row, 1.0, 0.5 * row, "level-0")
            continue
        for lo, hi in level_intervals(tree, p, n):
            fig.rect(lo, y + 0.25 * row, hi - lo, 0.5 * row, f"level-{n}")
    return fig.document()


def render_squares(data: Dict[str, object]) -> str:
    """Level-n squares of C1 x C2 with their clockwise labels and the line e(x)."""
    t1, t2 = data["trees"]  # type: ignore[misc]
    p = data["params"]
    assert isinstance(p, Params)
    level = int(data["level"])  # type: ignore[call-overload]
    fig = SVG((0.0, 1.0, 0.0, 1.0), title=f"Level-{level} squares")
    fig.rect(0.0, 0.0, 1.0, 1.0, "frame")
    for q in product_squares(t1, t2, p, level):
        u, v = q.corner
        fig.rect(u, v, q.side, q.side, "square")
        if level <= 2:
            fig.text(u + q.side / 2, v + q.side / 2, q.label)
    x = data.get("x")
    if x is not None:
        x = float(x)  # type: ignore[arg-type]
        lo, hi = max(0.0, -x), min(1.0, 1.0 - x)
        if lo < hi:
            fig.polyline([(lo, lo + x), (hi, hi + x)], "line")
    return fig.document()


def render_kernel(data: Dict[str, object]) -> str:
    """The three support stripes of m on [-1, 1]^2 with T x T on top."""
    p = data["params"]
    T = data["typespace"]
    assert isinstance(p, Params) and isinstance(T, TypeSpace)
    fig = SVG((-1.0, 1.0, -1.0, 1.0), title="Kernel support")
    fig.clip_box("square", -1.0, -1.0, 2.0, 2.0)
    fig.rect(-1.0, -1.0, 2.0, 2.0, "frame")
    ends = np.array([-1.0, 1.0])
    lo, hi = stripe_bounds(ends, p)
    for k in range(3):
        fig.polygon(
            [
                (-1.0, float(lo[0, k])),
                (1.0, float(lo[1, k])),
                (1.0, float(hi[1, k])),
                (-1.0, float(hi[0, k])),
            ],
            "stripe",
            clip="square",
        )
    for x_lo, x_hi in T.components:
        for y_lo, y_hi in T.components:
            fig.rect(x_lo, y_lo, x_hi - x_lo, y_hi - y_lo, "T")
    return fig.document()


RENDERERS: Dict[str, Tuple[Tuple[str, ...], Callable[[Dict[str, object]], str]]] = {
    "region": ((), render_region),
    "cantor": (("tree", "params"), render_cantor),
    "squares": (("trees", "params", "level"), render_squares),
    "kernel": (("params", "typespace"), render_kernel),
}


def render(bundle: OutputBundle, kind: str) -> str:
    """
    SVG document of ``kind`` built from ``bundle.data``.

    Raises:
        MissingData: for an unknown kind or when a required entry is absent.
    """
    if kind not in RENDERERS:
        raise MissingData(f"no renderer for {kind!r}", data={"kinds": sorted(RENDERERS)})
    required, fn = RENDERERS[kind]
    missing = [key for key in required if bundle.data.get(key) is None]
    if missing:
        raise MissingData(
            f"{kind} render needs {', '.join(missing)}", data={"missing": missing}
        )
    logger.debug(f"rendering {kind} for {bundle.command}")
    return fn(bundle.data)
