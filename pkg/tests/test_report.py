import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from amput import MarketModel
from amput.report import dumps, emit_report, fmt, read_csv, render_svg, write_csv
from amput.study import ConvergenceReport, ConvergenceRow, StoppingRow, StoppingStudy

SVG = "{http://www.w3.org/2000/svg}"


def _report(rows):
    m = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)
    fits = {"alpha": 1.25, "alpha_bar": 1.5, "upper_c": 0.2, "lower_c": 0.1}
    return ConvergenceReport(m, rows, None, fits=fits)


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for v in rng.normal(size=200) * 10.0 ** rng.integers(-12, 12, 200):
        assert float(fmt(v)) == v
    assert fmt(np.nan) == "none"
    assert fmt(7) == "7"
    assert fmt(True) == "true"


def test_empty_report_has_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report(_report([]), "csv", path)
    assert path.read_text() == "n,price,error,lnn\n"
    emit_report(_report([]), "svg", tmp_path / "empty.svg")
    ET.parse(tmp_path / "empty.svg")
    emit_report(_report([]), "json", tmp_path / "empty.json")
    assert json.loads((tmp_path / "empty.json").read_text())["rows"] == []


def test_csv_round_trip_is_exact(tmp_path):
    rows = [ConvergenceRow(n, 6.97 + 1.0 / (3 * n), 1.0 / (3 * n) - 1e-7 * n, math.log(n))
            for n in (128, 256, 512)]
    path = tmp_path / "c.csv"
    emit_report(_report(rows), "csv", path)
    header, back = read_csv(path)
    assert header == ["n", "price", "error", "lnn"]
    assert back == [tuple(float(v) for v in row) for row in _report(rows).table()]


def test_csv_none_round_trip(tmp_path):
    path = tmp_path / "b.csv"
    write_csv(path, ("a", "b"), [(1.5, math.nan)])
    header, rows = read_csv(path)
    assert rows[0][0] == 1.5 and math.isnan(rows[0][1])


def test_svg_polyline_per_series(tmp_path):
    rows = [ConvergenceRow(n, 0.0, 1.0 / n, math.log(n)) for n in (128, 256, 512, 1024)]
    rep = _report(rows)
    path = tmp_path / "c.svg"
    emit_report(rep, "svg", path)
    lines = ET.parse(path).getroot().findall(f"{SVG}polyline")
    assert len(lines) == len(rep.series()) == 3


def test_svg_stopping_series(tmp_path):
    m = MarketModel(0.05, 0.03, 0.2, 100.0, 100.0, 1.0)
    rows = [StoppingRow(n, 1.0 / n, 6.9, 0.1 / n, 1.0 + 0.01 * n, 1.0) for n in (128, 256)]
    study = StoppingStudy(m, rows, 1.5, "d<=r")
    svg = render_svg(study.series())
    assert svg.count("<polyline") == 2


def test_json_mirrors_report(tmp_path):
    rows = [ConvergenceRow(128, 7.0, 0.003, math.log(128))]
    path = tmp_path / "c.json"
    emit_report(_report(rows), "json", path)
    doc = json.loads(path.read_text())
    assert doc["rows"] == [{"n": 128, "price": 7.0, "error": 0.003, "lnn": math.log(128)}]
    assert doc["model"]["s0"] == 100.0
    assert doc["fits"]["upper_c"] == 0.2


def test_dumps_handles_non_finite():
    assert json.loads(dumps({"a": math.inf, "b": np.float64(1.5), "c": np.int64(2)})) == \
        {"a": "inf", "b": 1.5, "c": 2}


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(_report([]), "xlsx", tmp_path / "x")


def test_io_errors_surface(tmp_path):
    with pytest.raises(FileNotFoundError):
        emit_report(_report([]), "csv", tmp_path / "missing" / "x.csv")
