# curlspec/cli.py
"""
命令行入口：
    curlspec mesh box --a pi --n 8
    curlspec mesh fixture lshape --n 4
    curlspec mesh import cube.msh
    curlspec mesh export box8.json -o box8.msh
    curlspec solve --op curlcurl --nev 7 --mesh box8.json
    curlspec oracle --family maxwell --box pi --count 10
    curlspec verify interlace --box pi --kmax 3 --levels 4,8,16
    curlspec catalog

退出码：0 通过（或探索性报告），1 门控检查失败，2 输入或执行错误。
每个输出文件都带完整 RunConfig 与其哈希。
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from sqlalchemy.exc import SQLAlchemyError

from . import __version__
from .assembly import OperatorKind
from .config import DEFAULT_SEED, OUTPUT_DIR, SOLVER_TOL
from .db import list_runs, record_run
from .eigensolve import PRECONDITIONERS, Spectrum
from .errors import CurlSpecError
from .mesh import FIXTURES, BoxSpec, TetMesh, build_box_mesh, build_fixture_mesh, save_mesh_json
from .oracle import box_te_tm_spectrum, oracle_spectrum
from .readers import read_mesh, reader_for, write_gmsh
from .report import artifact_stem, write_report, write_spectra_csv, write_spectrum
from .utils import canonical_json, content_hash, parse_length, resolve_threads, sha1_file
from .verify import CHECKS, StudySpec, run_checks, run_convergence_study, solve_operator

log = logging.getLogger("curlspec")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2

# 不影响结果的参数，不进哈希
_NON_INPUT_KEYS = ("out", "output", "threads", "verbose", "no_catalog")

# 输入文件：内容摘要进哈希
_FILE_KEYS = ("mesh", "file")


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: str
    action: str = ""
    params: Dict[str, Any] = Field(default_factory=dict)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    version: str = __version__

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        params, digests = {}, {}
        for k, v in sorted(vars(args).items()):
            if k in ("func", "command", "action", "verbose", "no_catalog"):
                continue
            params[k] = str(v) if isinstance(v, Path) else v
            if k in _FILE_KEYS and v is not None and Path(v).is_file():
                digests[k] = sha1_file(v)
        return cls(command=args.command, action=getattr(args, "action", "") or "",
                   params=params, input_digests=digests)

    @property
    def config_hash(self) -> str:
        inputs = {k: v for k, v in self.params.items() if k not in _NON_INPUT_KEYS}
        return content_hash({"command": self.command, "action": self.action,
                             "params": inputs, "files": self.input_digests, "version": self.version})

    def to_json(self) -> str:
        return canonical_json(self.model_dump())

    def embed(self) -> Dict[str, Any]:
        """并入 JSON 产物顶层的键"""
        return {"run_config": self.model_dump(), "config_hash": self.config_hash}

    def comment(self) -> str:
        return f"curlspec {self.config_hash} {self.to_json()}"


class RunOutcome(BaseModel):
    exit_code: int = EXIT_OK
    verdict: Optional[str] = None
    domain: Optional[str] = None
    artifacts: List[Tuple[str, str]] = Field(default_factory=list)


# ---------- 参数 ----------
def _levels(token: str) -> List[int]:
    try:
        return [int(x) for x in token.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma separated integers, got {token!r}")


def _length(token: str) -> float:
    try:
        return parse_length(token)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a length: {token!r}")


def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("--threads", type=int, default=None, help="assembly workers (fallback: CURLSPEC_THREADS)")
    p.add_argument("--no-catalog", action="store_true", help="do not record the run in the catalog")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default {OUTPUT_DIR})")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized start blocks")
    return p


def _add_domain(p: argparse.ArgumentParser, with_mesh: bool = True):
    g = p.add_argument_group("domain")
    g.add_argument("--box", type=_length, default=None, help='box side a ("pi", "2pi", "pi/2" accepted)')
    g.add_argument("--b", type=_length, default=None, help="second side (default: --box)")
    g.add_argument("--c", type=_length, default=None, help="third side (default: --box)")
    if with_mesh:
        g.add_argument("--fixture", choices=FIXTURES, default=None)
        g.add_argument("--mesh", type=Path, default=None, help="mesh file (.json or .msh)")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parent()
    parser = argparse.ArgumentParser(
        prog="curlspec",
        description="Finite element spectra of Dirichlet, Neumann and Maxwell operators on tetrahedral meshes.",
    )
    parser.add_argument("--version", action="version", version=f"curlspec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    # mesh
    p_mesh = sub.add_parser("mesh", help="build, import or export meshes")
    msub = p_mesh.add_subparsers(dest="action", required=True)
    p = msub.add_parser("box", parents=[common], help="Kuhn-split box mesh")
    p.add_argument("--a", type=_length, default="pi")
    p.add_argument("--b", type=_length, default=None)
    p.add_argument("--c", type=_length, default=None)
    p.add_argument("--n", type=int, default=8, help="cells per direction")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--nz", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.set_defaults(func=cmd_mesh)
    p = msub.add_parser("fixture", parents=[common], help="built-in fixture mesh")
    p.add_argument("name", choices=FIXTURES)
    p.add_argument("--n", type=int, default=4, help="cells per unit length")
    p.add_argument("-o", "--output", type=Path, default=None)
    p.set_defaults(func=cmd_mesh)
    p = msub.add_parser("import", parents=[common], help="read and validate a Gmsh/JSON mesh")
    p.add_argument("file", type=Path)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.set_defaults(func=cmd_mesh)
    p = msub.add_parser("export", parents=[common], help="write a mesh as Gmsh MSH 2.2")
    p.add_argument("file", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_mesh)

    # solve
    p = sub.add_parser("solve", parents=[common], help="discrete spectrum of one operator")
    _add_domain(p)
    p.add_argument("--n", type=int, default=8, help="cells per direction for --box/--fixture")
    p.add_argument("--op", required=True, help=f"one of {[o.value for o in OperatorKind]}")
    p.add_argument("--nev", type=int, default=6)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--sigma", type=float, default=None, help="shift-invert around sigma instead of LOBPCG")
    p.add_argument("--precond", choices=PRECONDITIONERS, default=None)
    p.add_argument("--tol", type=float, default=SOLVER_TOL)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.add_argument("--dump-matrices", action="store_true", help="also write K and M as Matrix Market")
    p.set_defaults(func=cmd_solve)

    # oracle
    p = sub.add_parser("oracle", parents=[common], help="analytic box spectra")
    _add_domain(p, with_mesh=False)
    p.add_argument("--family", choices=("dirichlet", "neumann", "maxwell", "te-tm"), required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("-o", "--output", type=Path, default=None)
    p.set_defaults(func=cmd_oracle)

    # verify
    p = sub.add_parser("verify", parents=[common], help="run a check and write its report")
    p.add_argument("action", choices=CHECKS)
    _add_domain(p)
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--levels", type=_levels, default=[4, 8, 16], help='refinement levels, e.g. "4,8,16"')
    p.add_argument("--nev", type=int, default=None)
    p.add_argument("--order", type=int, choices=(1, 2), default=1)
    p.add_argument("--oracle-only", action="store_true", help="skip FEM, use enumerated spectra")
    p.add_argument("--precond", choices=PRECONDITIONERS, default=None)
    p.add_argument("--tol", type=float, default=SOLVER_TOL)
    p.add_argument("--op", default="dirichlet", help="operator for the convergence check")
    p.set_defaults(func=cmd_verify)

    # catalog
    p = sub.add_parser("catalog", parents=[common], help="list recorded runs")
    p.add_argument("--limit", type=int, default=20)
    p.set_defaults(func=cmd_catalog)
    return parser


# ---------- 辅助 ----------
def _out_dir(args) -> Path:
    out = Path(args.out) if args.out is not None else OUTPUT_DIR
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sides(args) -> Tuple[float, float, float]:
    a = args.box if args.box is not None else parse_length("pi")
    b = args.b if args.b is not None else a
    c = args.c if args.c is not None else a
    return a, b, c


def _mesh_from_args(args) -> TetMesh:
    if args.mesh is not None:
        return read_mesh(args.mesh)
    if args.fixture is not None and args.fixture != "box":
        return build_fixture_mesh(args.fixture, args.n)
    a, b, c = _sides(args)
    return build_box_mesh(BoxSpec(a=a, b=b, c=c, nx=args.n, ny=args.n, nz=args.n))


def _write_mesh(mesh: TetMesh, path: Path, cfg: RunConfig) -> Path:
    reader_for(path)
    if path.suffix.lower() == ".msh":
        return write_gmsh(mesh, path, comment=cfg.comment())
    return save_mesh_json(mesh, path, extra=cfg.embed())


def _print_summary(mesh: TetMesh):
    s = mesh.summary()
    print(f"{mesh.name}: " + " ".join(f"{k}={v}" for k, v in s.items()))


def _print_spectrum(spec: Spectrum):
    for k, (v, r) in enumerate(zip(spec.values, spec.residuals), start=1):
        flag = "" if spec.converged[k - 1] else "  (not converged)"
        print(f"{k:4d}  {v:.12g}  res={r:.2e}{flag}")


# ---------- 子命令 ----------
def cmd_mesh(args, cfg: RunConfig) -> RunOutcome:
    if args.action == "box":
        b = args.b if args.b is not None else args.a
        c = args.c if args.c is not None else args.a
        spec = BoxSpec(a=args.a, b=b, c=c, nx=args.nx or args.n, ny=args.ny or args.n, nz=args.nz or args.n)
        mesh = build_box_mesh(spec)
    elif args.action == "fixture":
        mesh = build_fixture_mesh(args.name, args.n)
    else:
        mesh = read_mesh(args.file)
    _print_summary(mesh)
    if args.action == "export":
        path = _write_mesh(mesh, Path(args.output), cfg)
    else:
        path = Path(args.output) if args.output else _out_dir(args) / f"{artifact_stem('mesh', mesh.name)}.json"
        path = _write_mesh(mesh, path, cfg)
    print(f"mesh written: {path}")
    return RunOutcome(domain=mesh.name, artifacts=[("mesh", str(path))])


def cmd_solve(args, cfg: RunConfig) -> RunOutcome:
    mesh = _mesh_from_args(args)
    op = OperatorKind.parse(args.op)
    kw = {"preconditioner": args.precond} if args.precond else {}
    res = solve_operator(mesh, op, args.nev, order=args.order, tol=args.tol, threads=args.threads,
                         seed=args.seed if args.seed is not None else DEFAULT_SEED, sigma=args.sigma, **kw)
    spec = res.spectrum
    out = _out_dir(args)
    stem = artifact_stem(op.value, mesh.name, cfg.config_hash)
    path = write_spectrum(spec, Path(args.output) if args.output else out / f"{stem}.json", extra=cfg.embed())
    artifacts = [("spectrum", str(path))]
    if args.dump_matrices:
        for name, mat in (("K", res.K), ("M", res.M)):
            p = mat.write_matrix_market(out / f"{stem}-{name}.mtx", comment=cfg.comment())
            artifacts.append(("matrix", str(p)))
    _print_spectrum(spec)
    if not spec.all_converged:
        log.warning("%d of %d eigenpairs not converged", spec.converged.count(False), len(spec))
    print(f"spectrum written: {path}")
    return RunOutcome(domain=mesh.name, artifacts=artifacts)


def cmd_oracle(args, cfg: RunConfig) -> RunOutcome:
    a, b, c = _sides(args)
    if args.family == "te-tm":
        spec = Spectrum.from_values("oracle:te-tm", box_te_tm_spectrum(a, b, c, args.count),
                                    mesh=f"box({a:.6g},{b:.6g},{c:.6g})")
    else:
        spec = oracle_spectrum(args.family, a, b, c, args.count)
    stem = artifact_stem(spec.operator, spec.mesh, cfg.config_hash)
    path = write_spectrum(spec, Path(args.output) if args.output else _out_dir(args) / f"{stem}.json",
                          extra=cfg.embed())
    _print_spectrum(spec)
    return RunOutcome(domain=spec.mesh, artifacts=[("spectrum", str(path))])


def _study_spec(args) -> StudySpec:
    a, b, c = _sides(args)
    kw: Dict[str, Any] = dict(
        a=a, b=b, c=c, fixture=args.fixture, mesh_file=args.mesh, levels=args.levels, kmax=args.kmax,
        nev=args.nev, order=args.order, tol=args.tol, threads=args.threads,
        oracle_only=args.oracle_only, checks=[args.action],
    )
    if args.precond:
        kw["preconditioner"] = args.precond
    if args.seed is not None:
        kw["seed"] = args.seed
    return StudySpec(**kw)


def cmd_verify(args, cfg: RunConfig) -> RunOutcome:
    spec = _study_spec(args)
    if args.action == "convergence":
        report = run_convergence_study(spec, args.op)
    else:
        report = run_checks(spec)[0]
    report.config_hash = cfg.config_hash
    report.run_config = cfg.model_dump()
    out = _out_dir(args)
    md, js = write_report(report, out_dir=out)
    artifacts = [("report-md", str(md)), ("report-json", str(js))]
    if report.raw_spectra:
        csv_path = write_spectra_csv(report.raw_spectra, out / f"{md.stem}-spectra.csv", cfg.config_hash)
        artifacts.append(("csv", str(csv_path)))
    if report.passed is None:
        verdict, code = "exploratory", EXIT_OK
    else:
        verdict, code = ("pass", EXIT_OK) if report.passed else ("fail", EXIT_FAILED)
    print(f"{report.check} {report.domain}: {verdict}")
    print(f"report written: {md}")
    return RunOutcome(exit_code=code, verdict=verdict, domain=report.domain, artifacts=artifacts)


def cmd_catalog(args, cfg: RunConfig) -> RunOutcome:
    for r in list_runs(args.limit):
        print(f"#{r['id']:<5d} {r['created_at']}  {r['command']:<8s} {r['config_hash'][:8]}  "
              f"exit={r['exit_code']}  {r['verdict'] or '-':<11s} {r['domain'] or ''}")
        for kind, path, _ in r["artifacts"]:
            print(f"        {kind:<12s} {path}")
    return RunOutcome()


def _record(cfg: RunConfig, outcome: RunOutcome):
    try:
        rid = record_run(cfg.command, cfg.to_json(), cfg.config_hash, outcome.exit_code,
                         artifacts=[(k, Path(p)) for k, p in outcome.artifacts],
                         domain=outcome.domain, verdict=outcome.verdict)
        log.debug("catalog run #%d", rid)
    except (SQLAlchemyError, OSError) as e:
        log.warning("catalog not updated: %s", e)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="[%(name)s] %(message)s",
        force=True,
    )
    args.threads = resolve_threads(args.threads) if args.threads is not None else None
    cfg = RunConfig.from_args(args)
    try:
        outcome = args.func(args, cfg)
    except ValidationError as e:
        print(f"error: invalid parameters\n{e}", file=sys.stderr)
        outcome = RunOutcome(exit_code=EXIT_ERROR, verdict="error")
    except (CurlSpecError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        outcome = RunOutcome(exit_code=EXIT_ERROR, verdict="error")
    except RuntimeError as e:
        # ARPACK 不收敛、splu 奇异等
        log.debug("solver failure", exc_info=True)
        print(f"error: solver failed: {e}", file=sys.stderr)
        outcome = RunOutcome(exit_code=EXIT_ERROR, verdict="error")
    if args.command != "catalog" and not args.no_catalog:
        _record(cfg, outcome)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
