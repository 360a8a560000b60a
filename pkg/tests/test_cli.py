import json

import pytest

from curlspec import cli, db
from curlspec.cli import RunConfig, build_parser, main
from curlspec.report import CheckReport


def _run(tmp_path, *argv):
    return main(list(argv) + ["--no-catalog", "--out", str(tmp_path)])


def test_mesh_box_prints_counts(tmp_path, capsys):
    assert _run(tmp_path, "mesh", "box", "--a", "pi", "--n", "8") == 0
    out = capsys.readouterr().out
    assert "V=729" in out and "T=3072" in out
    written = list(tmp_path.glob("*.json"))
    assert len(written) == 1
    data = json.loads(written[0].read_text(encoding="utf-8"))
    assert data["run_config"]["command"] == "mesh"
    assert data["run_config"]["action"] == "box"
    assert len(data["config_hash"]) == 40


def test_invalid_box_exits_2(tmp_path, capsys):
    assert _run(tmp_path, "mesh", "box", "--n", "0") == 2
    assert "invalid parameters" in capsys.readouterr().err


def test_export_and_import_msh(tmp_path, capsys):
    src = tmp_path / "box2.json"
    assert _run(tmp_path, "mesh", "box", "--n", "2", "-o", str(src)) == 0
    msh = tmp_path / "box2.msh"
    assert _run(tmp_path, "mesh", "export", str(src), "-o", str(msh)) == 0
    text = msh.read_text(encoding="utf-8")
    assert "$Comments\ncurlspec " in text
    back = tmp_path / "back.json"
    assert _run(tmp_path, "mesh", "import", str(msh), "-o", str(back)) == 0
    assert "V=27" in capsys.readouterr().out
    assert json.loads(back.read_text(encoding="utf-8"))["run_config"]["action"] == "import"


def test_export_to_unknown_suffix(tmp_path, capsys):
    src = tmp_path / "box1.json"
    assert _run(tmp_path, "mesh", "box", "--n", "1", "-o", str(src)) == 0
    assert _run(tmp_path, "mesh", "export", str(src), "-o", str(tmp_path / "box1.vtk")) == 2
    assert "no mesh reader" in capsys.readouterr().err


def test_solve_dirichlet(tmp_path):
    path = tmp_path / "dir.json"
    assert _run(tmp_path, "solve", "--op", "dirichlet", "--box", "pi", "--n", "3", "--nev", "3",
                "-o", str(path)) == 0
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["operator"] == "dirichlet"
    assert len(data["values"]) == 3
    # 协调元给出上界
    assert min(data["values"]) > 3.0
    assert data["config_hash"]


def test_solve_bform_on_lshape_is_refused(tmp_path, capsys):
    assert _run(tmp_path, "solve", "--op", "bform", "--fixture", "lshape", "--n", "1", "--nev", "2") == 2
    assert "BForm requires convex domain" in capsys.readouterr().err


def test_solve_unknown_operator(tmp_path):
    assert _run(tmp_path, "solve", "--op", "stokes", "--n", "2") == 2


def test_solve_dump_matrices(tmp_path):
    assert _run(tmp_path, "solve", "--op", "curlcurl", "--n", "2", "--nev", "2", "--dump-matrices") == 0
    mtx = sorted(tmp_path.glob("*.mtx"))
    assert [p.name[-6:] for p in mtx] == ["-K.mtx", "-M.mtx"]
    spectrum = next(tmp_path.glob("*.json"))
    h = json.loads(spectrum.read_text(encoding="utf-8"))["config_hash"]
    assert h in mtx[0].read_text()


def test_oracle_maxwell(tmp_path, capsys):
    path = tmp_path / "maxwell.json"
    assert _run(tmp_path, "oracle", "--family", "maxwell", "--box", "pi", "--count", "7", "-o", str(path)) == 0
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["values"] == pytest.approx([2, 2, 2, 3, 3, 5, 5])
    assert data["operator"] == "oracle:maxwell"
    assert "   7  5" in capsys.readouterr().out


@pytest.mark.parametrize("check", ["interlace", "neumann", "union"])
def test_verify_oracle_only(tmp_path, capsys, check):
    assert _run(tmp_path, "verify", check, "--box", "pi", "--oracle-only", "--kmax", "5") == 0
    out = capsys.readouterr().out
    assert ("exploratory" if check == "neumann" else "pass") in out
    md = next(tmp_path.glob("*.md"))
    text = md.read_text(encoding="utf-8")
    assert text.startswith(f"# {check}: box(")
    assert "```json" in text


def test_verify_failure_exits_1(tmp_path, monkeypatch):
    def failing(spec, on_report=None):
        return [CheckReport(check="interlace", domain=spec.descriptor, passed=False)]

    monkeypatch.setattr(cli, "run_checks", failing)
    assert _run(tmp_path, "verify", "interlace", "--oracle-only") == 1


def test_verify_nonbox_oracle_only_exits_2(tmp_path, capsys):
    assert _run(tmp_path, "verify", "interlace", "--fixture", "lshape", "--oracle-only") == 2
    assert "requires a box domain" in capsys.readouterr().err


def test_config_hash_ignores_output_location():
    parser = build_parser()
    base = ["solve", "--op", "dirichlet", "--n", "4"]
    a = RunConfig.from_args(parser.parse_args(base + ["--out", "/tmp/a", "--threads", "2"]))
    b = RunConfig.from_args(parser.parse_args(base + ["--out", "/tmp/b"]))
    c = RunConfig.from_args(parser.parse_args(base + ["--nev", "9"]))
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert a.params["out"] == "/tmp/a"
    assert a.comment().startswith(f"curlspec {a.config_hash} ")


def test_config_hash_follows_mesh_file_content(tmp_path):
    mesh = tmp_path / "box.json"
    assert _run(tmp_path, "mesh", "box", "--n", "2", "-o", str(mesh)) == 0
    parser = build_parser()
    argv = ["solve", "--op", "dirichlet", "--mesh", str(mesh)]
    before = RunConfig.from_args(parser.parse_args(argv))
    assert set(before.input_digests) == {"mesh"}
    assert RunConfig.from_args(parser.parse_args(argv)).config_hash == before.config_hash
    data = json.loads(mesh.read_text(encoding="utf-8"))
    data["vertices"][0][0] += 1e-3
    mesh.write_text(json.dumps(data), encoding="utf-8")
    after = RunConfig.from_args(parser.parse_args(argv))
    assert after.params == before.params
    assert after.config_hash != before.config_hash


def test_solver_runtime_error_exits_2(tmp_path, monkeypatch, capsys):
    def boom(args, cfg):
        raise RuntimeError("ARPACK error -1: No convergence")

    monkeypatch.setattr(cli, "cmd_solve", boom)
    assert _run(tmp_path, "solve", "--op", "dirichlet", "--n", "2") == 2
    assert "solver failed" in capsys.readouterr().err


def test_levels_argument():
    args = build_parser().parse_args(["verify", "interlace", "--levels", "4,8,16"])
    assert args.levels == [4, 8, 16]
    with pytest.raises(SystemExit):
        build_parser().parse_args(["verify", "interlace", "--levels", "4,x"])


def test_catalog_lists_runs(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(db, "DB_PATH", tmp_path / "runs.db")
    assert main(["mesh", "box", "--n", "1", "--out", str(tmp_path)]) == 0
    assert main(["mesh", "box", "--n", "0", "--out", str(tmp_path)]) == 2
    capsys.readouterr()
    assert main(["catalog"]) == 0
    out = capsys.readouterr().out
    assert "exit=2" in out and "exit=0" in out
    assert "mesh" in out
    runs = db.list_runs()
    assert runs[0]["verdict"] == "error"
    assert runs[1]["artifacts"][0][0] == "mesh"
    assert runs[1]["artifacts"][0][2] is not None
