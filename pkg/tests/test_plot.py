import xml.etree.ElementTree as ET

import numpy as np
import pytest

from anomtypes.data import Dataset, Schema
from anomtypes.errors import ParameterError
from anomtypes.plot import scatter_svg
from anomtypes.taxonomy import AnomalyType as T

XYC = Schema.of(("x", "continuous"), ("y", "continuous"), ("color", "categorical"))


def _ds():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(30, 2))
    return Dataset(XYC, {"x": pts[:, 0], "y": pts[:, 1], "color": ["blue", "pink", "gold"] * 10})


def test_legend_and_markers():
    svg = scatter_svg(_ds(), "x", "y", {3: T.MULTIDIM_MIXED, 4: T.EXTREME_VALUE}, class_attr="color")
    root = ET.fromstring(svg)
    classes = [el.get("class", "") for el in root.iter()]
    assert sum(c == "legend-type" for c in classes) == 6
    assert sum(c == "legend-class" for c in classes) == 3
    assert sum(c.startswith("anomaly ") for c in classes) == 2
    assert "anomaly type-VI" in classes


def test_without_truth_still_lists_all_types():
    svg = scatter_svg(_ds(), "x", "y", None)
    classes = [el.get("class", "") for el in ET.fromstring(svg).iter()]
    assert sum(c == "legend-type" for c in classes) == 6
    assert not any(c.startswith("anomaly ") for c in classes)


def test_byte_stable():
    args = (_ds(), "x", "y", {1: T.RARE_CLASS})
    assert scatter_svg(*args, class_attr="color") == scatter_svg(*args, class_attr="color")


@pytest.mark.parametrize("x, y, cls", [("z", "y", None), ("x", "color", None), ("x", "y", "shape")])
def test_bad_attributes(x, y, cls):
    with pytest.raises(ParameterError):
        scatter_svg(_ds(), x, y, None, class_attr=cls)
