import json
import subprocess
import sys
from fractions import Fraction

import pytest

from mpeccert import corpus
from mpeccert.cli import main
from mpeccert.pipeline import Flags, emit, run_file, run_pipeline

F = Fraction
O = (F(0), F(0))


@pytest.fixture(scope="module")
def ex4_report():
    return run_pipeline(corpus.load("example4"), O, label="origin")


def test_text_report(ex4_report):
    text = emit({"reports": [ex4_report]}, "text").decode()
    assert "GS-stationary: YES (λ_ell=1, λ_G=1, λ_H=1)" in text
    assert "GS-ACQ: holds-exact" in text
    assert "ell1 pseudoconcave refuted: t = (0, 1), xi = (0, 1)" in text


def test_json_round_trip(ex4_report):
    data = emit({"reports": [ex4_report]}, "json")
    doc = json.loads(data)
    assert doc["reports"][0]["index_sets"]["Omega"] == [1]
    assert emit(doc, "json") == data


def test_infeasible_point_stops_early():
    report = run_pipeline(corpus.load("example4"), (F(1), F(1)))
    assert not report["feasibility"]["feasible"]
    assert "stationarity" not in report and "constraint_qualifications" not in report


def test_section_flags():
    doc = run_file(corpus.load("example4"), Flags(sections=("stationarity",), kind="gs"))
    assert len(doc["reports"]) == 3
    first = doc["reports"][0]
    assert "GA" not in first["stationarity"] and "convexity" not in first


@pytest.fixture
def blocked_file(tmp_path):
    doc = {"format": 1, "dimension": 2, "name": "blocked",
           "objective": {"neg": {"abs": {"var": 0}}},
           "points": [{"label": "origin", "point": ["0", "0"]}]}
    path = tmp_path / "blocked.json"
    path.write_text(json.dumps(doc))
    return path


def test_blocked_message(blocked_file, capsys):
    assert main(["stationarity", str(blocked_file)]) == 0
    out = capsys.readouterr().out
    assert "blocked: supply manual subdifferential for J" in out


def test_exit_codes(tmp_path, capsys):
    ex4 = str(corpus.path("example4"))
    assert main(["check", ex4, "--point", "0,0"]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", str(bad)]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["check", ex4, "--point", "0,0,0"]) == 1
    assert main(["check", ex4, "--label", "nowhere"]) == 1
    assert main(["check", str(tmp_path / "missing.json")]) == 1


def test_internal_error_exit_code(monkeypatch, capsys):
    import mpeccert.cli as cli

    def boom(*a, **k):
        raise RuntimeError("kaboom")

    monkeypatch.setattr(cli, "run_file", boom)
    assert main(["check", str(corpus.path("example4"))]) == 2
    assert "kaboom" in capsys.readouterr().err


def test_output_file_and_subprocess(tmp_path):
    out = tmp_path / "r.json"
    res = subprocess.run([sys.executable, "-m", "mpeccert.cli", "cq", str(corpus.path("affine_pair")),
                          "--format", "json", "-o", str(out)], capture_output=True, check=True)
    assert res.stdout == b""
    cq = json.loads(out.read_bytes())["reports"][0]["constraint_qualifications"]
    assert cq["GS-ACQ"]["status"] == "refuted" and cq["GS-ACQ"]["witness"]


def test_refuted_cq_witness_in_text(capsys):
    assert main(["cq", str(corpus.path("affine_pair"))]) == 0
    out = capsys.readouterr().out
    assert "GS-ACQ: refuted witness (" in out
