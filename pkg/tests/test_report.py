import json
import math

import numpy as np
import pytest

from exitwalk.harness import PlotData
from exitwalk.report import csv_text, fmt, jsonable, plot_text, provenance, summary_text


def test_fmt_is_repr_exact():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(np.float64(1e-300)) == "1e-300"
    assert fmt(True) == "1" and fmt(None) == "" and fmt(float("nan")) == "nan"


def test_csv_header_and_column_union():
    text = csv_text([{"a": 1, "b": 0.5}, {"a": 2, "c": "x"}], provenance("9", "h", 3))
    lines = text.splitlines()
    assert lines[:3] == ["# tool_version: 9", "# config_hash: h", "# seed: 3"]
    assert lines[3:] == ["a,b,c", "1,0.5,", "2,,x"]


def test_plot_blocks_are_gnuplot_indexable():
    plot = PlotData("t", ["x", "y"], [("one", [[1, 2.0]]), ("two", [[3, 4.0]])])
    text = plot_text(plot, ["# h"])
    assert "\n\n\n# index 1: two\n3 4.0\n" in text


def test_summary_json_has_no_nan():
    text = summary_text({"v": float("nan"), "w": np.array([1.0, np.inf]), "z": np.int64(3)})
    assert json.loads(text) == {"v": None, "w": [1.0, None], "z": 3}
    with pytest.raises(ValueError):
        json.dumps({"v": math.nan}, allow_nan=False)
    assert jsonable((np.bool_(True),)) == [True]
