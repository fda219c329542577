import numpy as np
import pytest

from src.cantor import sample_offset_tree
from src.diffset import trees_for_trial
from src.errors import MissingData
from src.models import OutputBundle
from src.params import Params, region_polynomial
from src.render import SVG, _fmt, boundary_curve, render


def _bundle(**data) -> OutputBundle:
    return OutputBundle(command="test", data=data)


def test_document_is_deterministic(simple_params):
    """Test equal inputs give byte-identical documents."""
    tree = sample_offset_tree(simple_params, 3, 0, 0)
    first = render(_bundle(tree=tree, params=simple_params), "cantor")
    again = sample_offset_tree(simple_params, 3, 0, 0)
    second = render(_bundle(tree=again, params=simple_params), "cantor")
    assert first == second
    assert first.startswith("<?xml")
    assert first.rstrip().endswith("</svg>")


def test_cantor_levels(simple_params):
    """Test one rectangle per construction interval."""
    tree = sample_offset_tree(simple_params, 4, 2, 0)
    text = render(_bundle(tree=tree, params=simple_params), "cantor")
    assert text.count('class="level-0"') == 1
    assert text.count('class="level-1"') == 2
    assert text.count('class="level-4"') == 16


def test_cantor_shallower_depth(simple_params):
    """Test an explicit depth limits the rows drawn."""
    tree = sample_offset_tree(simple_params, 5, 2, 0)
    text = render(_bundle(tree=tree, params=simple_params, depth=2), "cantor")
    assert text.count('class="level-2"') == 4
    assert 'class="level-3"' not in text


def test_squares(general_params):
    """Test level-2 squares are drawn and labelled with the line e(x)."""
    trees = trees_for_trial(general_params, 2, 0, 0)
    text = render(_bundle(trees=trees, params=general_params, level=2, x=0.1), "squares")
    assert text.count('class="square"') == 16
    assert text.count("<text") == 16
    assert "Q1Q1" in text and "Q4Q4" in text
    assert text.count('class="line"') == 1


def test_squares_line_outside(general_params):
    """Test no line is drawn when e(x) misses the unit square."""
    trees = trees_for_trial(general_params, 1, 0, 0)
    text = render(_bundle(trees=trees, params=general_params, level=1, x=1.5), "squares")
    assert 'class="line"' not in text


def test_kernel(general_params, general_T):
    """Test three stripes and the T x T blocks."""
    text = render(_bundle(params=general_params, typespace=general_T), "kernel")
    assert text.count('class="stripe"') == 3
    assert text.count('class="T"') == 9
    assert '<clipPath id="square">' in text


def test_region():
    """Test the region figure shades Simple cells under the boundary curve."""
    text = render(_bundle(points=[(0.26, 0.01)], grid=20), "region")
    assert text.count('class="cell"') > 0
    assert text.count('class="boundary"') == 1
    assert text.count('class="admissible"') == 1
    assert text.count(">+</text>") == 1


@pytest.mark.parametrize("a", np.linspace(0.26, 0.33, 8))
def test_boundary_curve(a):
    """Test the boundary curve is the zero set of the region polynomial."""
    b = float(boundary_curve(np.array(a)))
    assert region_polynomial(Params.unchecked(a, b)) == pytest.approx(0.0, abs=1e-12)


def test_missing_data(simple_params):
    """Test unknown kinds and missing entries are reported."""
    with pytest.raises(MissingData, match="no renderer"):
        render(_bundle(), "heatmap")
    with pytest.raises(MissingData, match="tree"):
        render(_bundle(params=simple_params), "cantor")
    with pytest.raises(MissingData, match="typespace"):
        render(_bundle(params=simple_params, typespace=None), "kernel")


def test_fmt_negative_zero():
    """Test -0 prints as 0."""
    assert _fmt(-0.0001) == "0.000"
    assert _fmt(1.23456) == "1.235"


def test_view_box_follows_content():
    """Test the view box is the padded bounding box of the drawn elements."""
    fig = SVG((0.0, 1.0, 0.0, 1.0), width=100.0, height=100.0)
    fig.rect(0.0, 0.0, 0.5, 0.5, "square")
    text = fig.document()
    assert 'viewBox="-12.00 38.00 74.00 74.00"' in text
