import csv
import json

from curlspec.eigensolve import Spectrum
from curlspec.oracle import interlace_check
from curlspec.report import (
    CheckReport, ConvergenceTable, artifact_stem, render_markdown, report_json, write_report,
    write_spectra_csv, write_spectrum,
)


def _interlace():
    report = interlace_check([2.0, 2.0, 2.0, 3.0, 3.0], [3.0, 6.0], 2, domain="box(3,3,3)")
    report.provenance = {"alpha": "oracle", "lambda": "oracle"}
    return report


def test_markdown_verdicts():
    md = render_markdown(_interlace())
    assert md.startswith("# interlace: box(3,3,3)")
    assert "verdict: **PASS**" in md
    assert "| k | alpha_2k1 | lambda_k | margin | tol | verdict | strict | resolved |" in md
    assert "- alpha: oracle" in md
    assert "verdict: **FAIL**" in render_markdown(CheckReport(check="union", passed=False))
    assert "exploratory (not gated)" in render_markdown(CheckReport(check="neumann"))
    assert "(no records)" in render_markdown(CheckReport(check="neumann"))


def test_markdown_uses_17_digits_and_convergence():
    report = CheckReport(check="convergence-dirichlet", domain="box", passed=None)
    report.records = [{"track": 1, "value": 1.0 / 3.0, "rate": None}]
    report.convergence = [ConvergenceTable(operator="dirichlet", levels=[4, 8], h=[0.5, 0.25], dofs=[27, 343],
                                           tracks=[[3.1, 3.02]], extrapolated=[3.0], uncertainty=[0.02],
                                           rates=[None])]
    md = render_markdown(report)
    assert "0.33333333333333331" in md
    assert "| track | n=4 | n=8 | extrapolated | uncertainty | rate |" in md
    assert "dofs: [27, 343]" in md


def test_report_json_is_deterministic():
    a, b = report_json(_interlace()), report_json(_interlace())
    assert a == b
    data = json.loads(a)
    assert data["passed"] is True
    assert data["records"][0]["k"] == 1
    assert "raw_spectra" not in data


def test_artifact_stem():
    assert artifact_stem("interlace", "box(3.14159,3.14159,3.14159)") == "interlace-box-3-14159-3-14159-3-14159"
    assert artifact_stem("trial", "lshape", "0123456789abcdef").endswith("-01234567")


def test_write_report_and_csv(tmp_path):
    report = _interlace()
    report.config_hash = "feedbeef" * 5
    md, js = write_report(report, out_dir=tmp_path)
    assert md.exists() and js.exists()
    assert md.stem.endswith("-feedbeef")
    assert "config: `feedbeef" in md.read_text(encoding="utf-8")

    spectra = [Spectrum.from_values("dirichlet", [3.1, 6.2], h=0.5, dofs=27, mesh="box4"),
               Spectrum.from_values("dirichlet", [3.02, 6.05], h=0.25, dofs=343, mesh="box8")]
    path = write_spectra_csv(spectra, tmp_path / "spectra.csv", config_hash="feedbeef")
    with path.open(encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["level", "operator", "mesh", "h", "dofs", "k", "value", "residual", "converged", "config_hash"]
    assert len(rows) == 5
    assert rows[3][:3] == ["1", "dirichlet", "box8"]
    assert rows[3][-1] == "feedbeef"


def test_write_spectrum_extra(tmp_path):
    spec = Spectrum.from_values("neumann", [1.0, 0.0])
    path = write_spectrum(spec, tmp_path / "sub" / "s.json", extra={"config_hash": "abc"})
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["values"] == [0.0, 1.0]
    assert data["config_hash"] == "abc"
