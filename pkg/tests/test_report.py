import re
import xml.etree.ElementTree as ET

import pytest

from pipeattrib.attribution import ECReport, ECRow, aggregate, ec_level
from pipeattrib.report import (
    _nice_max,
    bar_chart_svg,
    ec_chart_svg,
    split_by_chart,
    summary_table,
    timing_chart_svg,
    timing_rows,
)

NS = "{http://www.w3.org/2000/svg}"


def rows():
    return [
        ECRow("step", "S1", "", "random", "filter", 0.025, 0.01, 0.2, 5),
        ECRow("step", "S2", "", "random", "filter", 0.0, 0.0, 0.2, 5),
        ECRow("step", "S1", "", "smbo", "filter", 0.03, 0.0, 0.2, 5),
    ]


SUMMARY = {
    "runs": [
        {"optimizer": "grid", "mode": "cash", "elapsed_s": 5.0},
        {"optimizer": "random", "mode": "cash", "elapsed_s": 1.0},
        {"optimizer": "random", "mode": "cash", "elapsed_s": 3.0},
        {"optimizer": "smbo", "mode": "hpo", "elapsed_s": 2.0},
    ]
}


def test_nice_max():
    assert _nice_max(0.0) == 1.0
    assert _nice_max(0.031) == pytest.approx(0.04)
    assert _nice_max(7.0) == pytest.approx(8.0)
    assert _nice_max(1.0) == pytest.approx(1.0)


def test_ec_chart_is_valid_svg_with_one_bar_per_row():
    svg = ec_chart_svg(rows())
    root = ET.fromstring(svg)
    assert root.tag == NS + "svg"
    bars = [r for r in root.iter(NS + "rect") if r.get("class") == "bar"]
    assert len(bars) == 3
    texts = [t.text for t in root.iter(NS + "text")]
    assert "0.0250" in texts and "0.0300" in texts
    assert "random" in texts and "smbo" in texts  # legend


def test_whiskers_only_with_spread():
    svg = ec_chart_svg(rows())
    assert svg.count('class="whisker"') == 1


def test_single_series_has_no_legend():
    svg = bar_chart_svg(["a", "b"], ["only"], {("a", "only"): (1.0, 0.0), ("b", "only"): (2.0, 0.5)}, "t", "y")
    assert "only" not in re.sub(r"<title>.*?</title>", "", svg)


def test_chart_is_deterministic():
    assert ec_chart_svg(rows()) == ec_chart_svg(rows())


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        ec_chart_svg([])
    with pytest.raises(ValueError):
        bar_chart_svg([], ["s"], {}, "t", "y")
    with pytest.raises(ValueError):
        timing_chart_svg({"runs": []})


def test_split_by_chart():
    extra = ECRow("algorithm", "A", "A->C", "grid", "filter", 0.1, 0.0, 0.2, 1)
    groups = split_by_chart(rows() + [extra])
    assert list(groups) == ["step", "algorithm_A->C"]
    assert len(groups["step"]) == 3


def test_timing_rows_and_chart():
    got = timing_rows(SUMMARY)
    assert got == [("grid", 5.0, 0.0, 1), ("random", 2.0, 1.0, 2), ("smbo (hpo)", 2.0, 0.0, 1)]
    root = ET.fromstring(timing_chart_svg(SUMMARY))
    assert len([r for r in root.iter(NS + "rect") if r.get("class") == "bar"]) == 3


def test_summary_table(fix6_grid):
    space, store = fix6_grid
    rep = aggregate(ec_level(store, space, "step"))
    text = summary_table([rep], [SUMMARY])
    lines = text.splitlines()
    assert lines[0].split() == ["level", "target", "path", "optimizer", "mean", "std", "runs"]
    assert any(line.split()[:2] == ["step", "S1"] and "0.0250" in line for line in lines)
    assert any(line.startswith("random") and "2.000" in line for line in lines)


def test_report_from_csv_renders(tmp_path, fix6_grid):
    space, store = fix6_grid
    rep = aggregate(ec_level(store, space, "hyperparameter", "A->C"))
    back = ECReport.from_csv(rep.to_csv())
    assert ec_chart_svg(back.rows) == ec_chart_svg(rep.rows)
