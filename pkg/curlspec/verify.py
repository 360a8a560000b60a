# curlspec/verify.py
"""
端到端研究：逐层求离散谱 -> Richardson 外推 -> 各项检查 -> 报告。

轨道匹配：每层的值升序排列，第 i 条轨道取每层第 i 个值
（等长有序列表上，按下标匹配与按值就近匹配等价，平局按升序）。
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import LinAlgError, eigh
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .assembly import DofMap, OperatorKind, SymSparse, assemble, assemble_full, gradient_embedding
from .config import (
    DEFAULT_PRECONDITIONER, DEFAULT_SEED, INTERLACE_REL_FLOOR, RICHARDSON_DEFAULT_RATE,
    RICHARDSON_RATE_BOUNDS, SOLVER_TOL, STUDY_PRECONDITIONER, TRIAL_SUBSPACE_SLACK, UNION_REL_TOL,
)
from .eigensolve import PRECONDITIONERS, EigenPair, Spectrum, solve_lowest, solve_shift_invert
from .elements import barycentric_gradients
from .errors import CurlSpecError, InvalidSpecError, NonConvexDomainError, SolverError, SpectrumLengthError
from .mesh import FIXTURES, BoxSpec, TetMesh, build_box_mesh, build_fixture_mesh
from .oracle import (
    box_dirichlet_spectrum, box_maxwell_spectrum, box_neumann_spectrum, convex_neumann_curl_check,
    counting_function, interlace_check, union_index_check, union_spectrum,
)
from .readers import read_mesh
from .report import CheckReport, ConvergenceTable, InterlaceReport

log = logging.getLogger(__name__)

CHECKS = ("interlace", "union", "trial", "neumann", "divtrace", "convergence")


class StudySpec(BaseModel):
    """区域三选一：长方体 (a, b, c)、内置夹具 fixture、或网格文件 mesh_file"""
    model_config = ConfigDict(frozen=True)

    a: float = Field(default=math.pi, gt=0)
    b: float = Field(default=math.pi, gt=0)
    c: float = Field(default=math.pi, gt=0)
    fixture: Optional[str] = None
    mesh_file: Optional[Path] = None
    levels: List[int] = Field(default_factory=lambda: [4, 8, 16])
    kmax: int = Field(default=3, ge=1)
    nev: Optional[int] = Field(default=None, ge=1)
    order: int = Field(default=1, ge=1, le=2)
    tol: float = Field(default=SOLVER_TOL, gt=0)
    preconditioner: str = STUDY_PRECONDITIONER
    threads: Optional[int] = Field(default=None, ge=1)
    seed: int = DEFAULT_SEED
    oracle_only: bool = False
    checks: List[str] = Field(default_factory=lambda: ["interlace"])

    @field_validator("levels")
    @classmethod
    def _levels(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("at least one refinement level is required")
        if min(v) < 1:
            raise ValueError("refinement levels must be >= 1")
        return sorted(set(v))

    @field_validator("fixture")
    @classmethod
    def _fixture(cls, v: Optional[str]) -> Optional[str]:
        if v is not None and v not in FIXTURES:
            raise ValueError(f"unknown fixture {v!r}; choose from {FIXTURES}")
        return v

    @field_validator("preconditioner")
    @classmethod
    def _precond(cls, v: str) -> str:
        if v not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {v!r}; choose from {PRECONDITIONERS}")
        return v

    @field_validator("checks")
    @classmethod
    def _checks(cls, v: List[str]) -> List[str]:
        bad = [c for c in v if c not in CHECKS]
        if bad:
            raise ValueError(f"unknown checks {bad}; choose from {CHECKS}")
        return v

    @property
    def is_box(self) -> bool:
        return self.mesh_file is None and self.fixture in (None, "box")

    @property
    def sides(self) -> Tuple[float, float, float]:
        if self.fixture == "box":
            return (math.pi, math.pi, math.pi)
        return (self.a, self.b, self.c)

    @property
    def descriptor(self) -> str:
        if self.mesh_file is not None:
            return f"file:{Path(self.mesh_file).name}"
        if self.fixture is not None and self.fixture != "box":
            return self.fixture
        a, b, c = self.sides
        return f"box({a:.6g},{b:.6g},{c:.6g})"

    @property
    def effective_levels(self) -> List[int]:
        return [0] if self.mesh_file is not None else list(self.levels)

    def mesh_at(self, n: int) -> TetMesh:
        if self.mesh_file is not None:
            return read_mesh(self.mesh_file)
        if self.fixture is not None and self.fixture != "box":
            return build_fixture_mesh(self.fixture, n)
        a, b, c = self.sides
        return build_box_mesh(BoxSpec(a=a, b=b, c=c, nx=n, ny=n, nz=n))


# ---------- 单次求解 ----------
@dataclass
class SolveResult:
    spectrum: Spectrum
    pairs: List[EigenPair]
    dofs: DofMap
    K: SymSparse
    M: SymSparse


def solve_operator(
    mesh: TetMesh, op, nev: int, order: int = 1,
    tol: float = SOLVER_TOL, preconditioner: str = DEFAULT_PRECONDITIONER,
    threads: Optional[int] = None, seed: int = DEFAULT_SEED, sigma: Optional[float] = None,
) -> SolveResult:
    """组装 + 求解；旋度束自动以梯度嵌入放气，kernel_dim 记为内部顶点数"""
    op = OperatorKind.parse(op)
    order = order if op in (OperatorKind.DIRICHLET, OperatorKind.NEUMANN) else 1
    K, M, dofs = assemble(mesh, op, order, threads)
    deflation = None
    kernel_dim = 0
    if op is OperatorKind.CURL_CURL:
        G = gradient_embedding(mesh, curl_dofs=dofs)
        kernel_dim = int(G.shape[1])
        deflation = G if kernel_dim else None
    if sigma is not None:
        pairs = solve_shift_invert(K, M, sigma, nev, tol, drop_zero_modes=op is OperatorKind.CURL_CURL, seed=seed)
    else:
        pairs = solve_lowest(K, M, nev, deflation, tol, preconditioner=preconditioner, seed=seed)
    spectrum = Spectrum.from_pairs(op, pairs, h=mesh.h, order=order, dofs=dofs.free_count,
                                   mesh=mesh.name, kernel_dim=kernel_dim)
    if spectrum.extra_kernel:
        log.warning("%s: %d near-zero curl-curl values beyond the gradient kernel", mesh.name, spectrum.extra_kernel)
    return SolveResult(spectrum=spectrum, pairs=pairs, dofs=dofs, K=K, M=M)


def compute_spectrum(mesh: TetMesh, op, nev: int, **kw) -> Spectrum:
    return solve_operator(mesh, op, nev, **kw).spectrum


def _level_results(spec: StudySpec, op: OperatorKind, nev: int) -> List[SolveResult]:
    out = []
    for n in spec.effective_levels:
        mesh = spec.mesh_at(n)
        log.info("level n=%d: %s (%d tets) %s nev=%d", n, mesh.name, mesh.n_tets, op.value, nev)
        out.append(solve_operator(mesh, op, nev, order=spec.order, tol=spec.tol,
                                  preconditioner=spec.preconditioner, threads=spec.threads, seed=spec.seed))
    return out


# ---------- Richardson ----------
def fit_rate(values: Sequence[float], h: Sequence[float]) -> Optional[float]:
    """由最细三层拟合收敛阶 p：(v1−v2)/(v2−v3) = (h1^p−h2^p)/(h2^p−h3^p)；失败返回 None"""
    if len(values) < 3:
        return None
    v1, v2, v3 = (float(x) for x in values[-3:])
    h1, h2, h3 = (float(x) for x in h[-3:])
    d12, d23 = v1 - v2, v2 - v3
    if d23 == 0.0 or d12 == 0.0:
        return None
    q = d12 / d23
    if q <= 0.0:
        return None

    def f(p):
        return (h1 ** p - h2 ** p) / (h2 ** p - h3 ** p) - q

    lo, hi = 0.05, 10.0
    try:
        if f(lo) * f(hi) > 0:
            return None
        p = brentq(f, lo, hi, xtol=1e-12)
    except (ValueError, ZeroDivisionError, OverflowError):
        return None
    return float(p)


def richardson(values: Sequence[float], h: Sequence[float]) -> Tuple[float, float, Optional[float]]:
    """
    返回 (外推值, 不确定度, 拟合阶)。
    两层用默认阶 2；三层以上拟合并截到 [1, 4]；单层直接返回原值。
    不确定度取 |外推值 − 最细层值|。
    """
    values = [float(v) for v in values]
    if len(values) == 1:
        return values[0], 0.0, None
    rate = fit_rate(values, h)
    p = RICHARDSON_DEFAULT_RATE if rate is None else min(max(rate, RICHARDSON_RATE_BOUNDS[0]), RICHARDSON_RATE_BOUNDS[1])
    vc, vf = values[-2], values[-1]
    ratio = (float(h[-2]) / float(h[-1])) ** p
    est = vf + (vf - vc) / (ratio - 1.0)
    return est, abs(est - vf), rate


def track_table(results: Sequence, ntracks: int, levels: Sequence[int], operator: str = "") -> ConvergenceTable:
    """results 为 Spectrum 或 SolveResult 列表；按下标组成轨道并外推"""
    spectra = [r.spectrum if isinstance(r, SolveResult) else r for r in results]
    for s in spectra:
        if len(s) < ntracks:
            raise SpectrumLengthError(f"{s.mesh}: {len(s)} values, {ntracks} tracks requested")
    h = [float(s.h) for s in spectra]
    table = ConvergenceTable(
        operator=operator or spectra[0].operator,
        provenance=_provenance(levels),
        levels=list(levels), h=h, dofs=[int(s.dofs) for s in spectra],
    )
    for i in range(ntracks):
        vals = [float(s.values[i]) for s in spectra]
        est, unc, rate = richardson(vals, h)
        table.tracks.append(vals)
        table.extrapolated.append(est)
        table.uncertainty.append(unc)
        table.rates.append(rate if len(spectra) >= 3 else None)
        table.resolved.append(all(s.converged[i] for s in spectra))
    return table


def _provenance(levels: Sequence[int]) -> str:
    if len(levels) == 1:
        return f"fem(n={levels[0]})"
    return "richardson(n=" + ",".join(str(n) for n in levels) + ")"


def _require_box(spec: StudySpec, what: str):
    if not spec.is_box:
        raise InvalidSpecError(f"{what} requires a box domain (got {spec.descriptor})")


# ---------- 交错 ----------
def run_interlace_study(spec: StudySpec) -> InterlaceReport:
    """α_{2k+1} <= λ_k：在外推值上判定，容差 max(2(δα + δλ), 1e-6·λ_k)"""
    k = spec.kmax
    if spec.oracle_only:
        _require_box(spec, "oracle-only mode")
        a, b, c = spec.sides
        alpha = box_maxwell_spectrum(a, b, c, 2 * k + 1)
        lam = box_dirichlet_spectrum(a, b, c, k)
        report = interlace_check(alpha, lam, k, 0.0, domain=spec.descriptor)
        report.provenance = {"alpha": "oracle", "lambda": "oracle"}
    else:
        levels = spec.effective_levels
        curl = _level_results(spec, OperatorKind.CURL_CURL, 2 * k + 1)
        dir_ = _level_results(spec, OperatorKind.DIRICHLET, k)
        t_a = track_table(curl, 2 * k + 1, levels)
        t_l = track_table(dir_, k, levels)
        tols = [
            max(2.0 * (t_a.uncertainty[2 * j] + t_l.uncertainty[j]), INTERLACE_REL_FLOOR * abs(t_l.extrapolated[j]))
            for j in range(k)
        ]
        resolved = [t_a.resolved[2 * j] and t_l.resolved[j] for j in range(k)]
        report = interlace_check(t_a.extrapolated, t_l.extrapolated, k, tols, resolved, domain=spec.descriptor)
        report.provenance = {"alpha": t_a.provenance, "lambda": t_l.provenance}
        report.convergence = [t_a, t_l]
        report.raw_spectra = [r.spectrum for r in curl + dir_]
        kernel = [r.spectrum.kernel_dim for r in curl]
        extra = [r.spectrum.extra_kernel for r in curl]
        report.summary["kernel_dim"] = kernel
        if any(extra):
            report.notes.append(f"extra curl-curl kernel detected per level: {extra}")
        if spec.is_box:
            a, b, c = spec.sides
            report.summary["oracle_alpha"] = [float(x) for x in box_maxwell_spectrum(a, b, c, 2 * k + 1)]
            report.summary["oracle_lambda"] = [float(x) for x in box_dirichlet_spectrum(a, b, c, k)]
        unresolved = [r.k for r in report.records if not r.resolved]
        if unresolved:
            report.notes.append(f"unresolved eigenvalues (residual above tol) at k = {unresolved}")
    report.summary["min_margin"] = min(r.margin for r in report.records)
    report.summary["all_strict"] = all(r.strict for r in report.records)
    log.info("interlace %s: %s", spec.descriptor, "pass" if report.passed else "FAIL")
    return report


# ---------- 并谱 ----------
def union_count_identity(dirichlet: Sequence[float], maxwell: Sequence[float], ceiling: float) -> dict:
    union = union_spectrum(dirichlet, maxwell)
    nu = counting_function(union, ceiling)
    nd = counting_function(dirichlet, ceiling)
    nm = counting_function(maxwell, ceiling)
    return {"ceiling": float(ceiling), "union": nu, "dirichlet": nd, "maxwell": nm, "holds": nu == nd + nm}


def run_union_check(spec: StudySpec) -> CheckReport:
    """B 的前 nev 个值 vs Dirichlet 与 Maxwell 解析谱的有序并"""
    _require_box(spec, "union check")
    nev = spec.nev or 6
    a, b, c = spec.sides
    dirichlet = box_dirichlet_spectrum(a, b, c, nev)
    maxwell = box_maxwell_spectrum(a, b, c, nev)
    union = union_spectrum(dirichlet, maxwell)[:nev]
    ceiling = float(union[-1]) * (1.0 + 1e-9)
    ident = union_count_identity(dirichlet, maxwell, ceiling)
    kidx = max(1, min(spec.kmax, nev // 3))
    report = CheckReport(check="union", domain=spec.descriptor)
    report.summary["oracle_union"] = [float(x) for x in union]
    report.summary["count_identity"] = ident
    try:
        report.summary["index_check"] = union_index_check(
            box_dirichlet_spectrum(a, b, c, kidx + 64), box_maxwell_spectrum(a, b, c, 3 * kidx + 64), kidx)
    except SpectrumLengthError as e:
        report.notes.append(f"index check skipped: {e}")
    passed = bool(ident["holds"]) and all(r["verdict"] for r in report.summary.get("index_check", []))

    if spec.oracle_only:
        report.provenance = {"bform": "oracle"}
        report.records = [{"k": i + 1, "eta_oracle": float(v)} for i, v in enumerate(union)]
    else:
        levels = spec.effective_levels
        results = _level_results(spec, OperatorKind.B_FORM, nev)
        table = track_table(results, nev, levels)
        report.convergence = [table]
        report.raw_spectra = [r.spectrum for r in results]
        report.provenance = {"bform": table.provenance, "union": "oracle"}
        for i in range(nev):
            est, unc = table.extrapolated[i], table.uncertainty[i]
            tol = max(2.0 * unc, UNION_REL_TOL * abs(float(union[i])))
            dev = est - float(union[i])
            ok = abs(dev) <= tol and table.resolved[i]
            report.records.append({"k": i + 1, "eta_oracle": float(union[i]), "eta_fem": est,
                                   "deviation": dev, "tol": tol, "verdict": bool(ok)})
        mismatches = [r["k"] for r in report.records if not r["verdict"]]
        if mismatches:
            report.notes.append(f"mismatched tracks: {mismatches}")
        passed = passed and not mismatches
    report.passed = passed
    return report


# ---------- 3k 维试探子空间 ----------
def _vector_trial_basis(mesh: TetMesh, dofs: DofMap, pairs: Sequence[EigenPair]) -> np.ndarray:
    """每个标量特征向量放到三个分量之一：列顺序 (l, c)"""
    nv = mesh.n_vertices
    cols = []
    for p in pairs:
        phi = np.asarray(dofs.extend(p.vector)).ravel()
        for c in range(3):
            u = np.zeros(3 * nv)
            u[c::3] = phi
            cols.append(u)
    return np.stack(cols, axis=1)


def run_trial_subspace_check(mesh: TetMesh, k: int, tol: float = SOLVER_TOL,
                             preconditioner: str = DEFAULT_PRECONDITIONER,
                             threads: Optional[int] = None, seed: int = DEFAULT_SEED) -> CheckReport:
    """
    前 k 个离散 Dirichlet 特征向量各自放进一个分量，得到 3k 维向量 P1 子空间；
    在其上取 B 形式的最大广义 Rayleigh 商，要求 <= λ_k·(1 + slack)。
    B 形式矩阵不加边界条件：试探场迹为 0，本身就在任何边界条件的空间里。
    """
    dres = solve_operator(mesh, OperatorKind.DIRICHLET, k, tol=tol, preconditioner=preconditioner,
                          threads=threads, seed=seed)
    lam_k = float(dres.spectrum.values[k - 1])
    K_full, M_full = assemble_full(mesh, OperatorKind.B_FORM, threads=threads)
    U = _vector_trial_basis(mesh, dres.dofs, dres.pairs)
    A = U.T @ (K_full @ U)
    B = U.T @ (M_full @ U)
    A, B = 0.5 * (A + A.T), 0.5 * (B + B.T)
    try:
        q = eigh(A, B, eigvals_only=True)
    except LinAlgError as e:
        raise SolverError(f"trial Gram matrix is rank deficient: {e}")
    q_max = float(q[-1])

    # 分解：sb(u,u) = Σ_c ∫|∇u_c|² − 交叉项
    grad = np.array([float(p.vector @ (dres.K @ p.vector)) for p in dres.pairs])
    records = []
    for j in range(3 * k):
        l, c = divmod(j, 3)
        sb = float(A[j, j])
        records.append({"l": l + 1, "component": "xyz"[c], "grad_energy": float(grad[l]),
                        "sb": sb, "cross": float(grad[l]) - sb, "mass": float(B[j, j])})
    off = A - np.diag(np.diag(A))
    lower = _random_span_bound(mesh, 3 * k, tol, preconditioner, threads, seed)
    report = CheckReport(check="trial", domain=mesh.name)
    report.records = records
    report.summary = {
        "k": k,
        "lambda_k": lam_k,
        "q_max": q_max,
        "ratio": q_max / lam_k,
        "slack": TRIAL_SUBSPACE_SLACK,
        "max_offdiag": float(np.abs(off).max()) if off.size else 0.0,
    }
    report.provenance = {"lambda": f"fem({mesh.name})"}
    report.raw_spectra = [dres.spectrum]
    report.summary.update(lower)
    report.passed = bool(q_max <= lam_k * (1.0 + TRIAL_SUBSPACE_SLACK)) and lower["random_span_ok"] is not False
    log.info("trial subspace k=%d: q_max=%.12g lambda_k=%.12g", k, q_max, lam_k)
    return report


def random_span_quotient(K, M, dim: int, seed: int = DEFAULT_SEED) -> float:
    """随机 dim 维子空间上的最大广义 Rayleigh 商（min-max 的下界对照）"""
    K = K.matrix if isinstance(K, SymSparse) else K
    M = M.matrix if isinstance(M, SymSparse) else M
    X = np.random.default_rng(seed).standard_normal((K.shape[0], dim))
    A = X.T @ (K @ X)
    B = X.T @ (M @ X)
    return float(eigh(0.5 * (A + A.T), 0.5 * (B + B.T), eigvals_only=True)[-1])


def _random_span_bound(mesh: TetMesh, dim: int, tol: float, preconditioner: str,
                       threads: Optional[int], seed: int) -> dict:
    """随机 dim 维向量 P1 场张成的子空间：最大商应 >= B 形式的 η₁"""
    try:
        res = solve_operator(mesh, OperatorKind.B_FORM, 1, tol=tol, preconditioner=preconditioner,
                             threads=threads, seed=seed)
    except NonConvexDomainError:
        return {"eta1": None, "random_span_dim": dim, "random_span_quotient": None, "random_span_ok": None}
    eta1 = float(res.spectrum.values[0])
    dim = min(dim, res.K.dimension)
    q = random_span_quotient(res.K, res.M, dim, seed)
    return {"eta1": eta1, "random_span_dim": dim, "random_span_quotient": q,
            "random_span_ok": bool(q >= eta1 * (1.0 - TRIAL_SUBSPACE_SLACK))}


# ---------- Neumann 探索 ----------
def neumann_shift_table(mu: Sequence[float], lam: Sequence[float], kmax: int, shift: int = 3) -> List[dict]:
    """μ_{k+3} 与 λ_k 的逐 k 对照（1 起）"""
    if len(mu) < kmax + shift or len(lam) < kmax:
        raise SpectrumLengthError(f"need {kmax + shift} Neumann and {kmax} Dirichlet values "
                                  f"(got {len(mu)}, {len(lam)})")
    out = []
    for k in range(1, kmax + 1):
        m, l_ = float(mu[k + shift - 1]), float(lam[k - 1])
        out.append({"k": k, "mu_k3": m, "lambda_k": l_, "margin": l_ - m, "holds": bool(m <= l_)})
    return out


def run_neumann_exploration(spec: StudySpec) -> CheckReport:
    """探索性：不做门控，只报告反例是否出现"""
    k = spec.kmax
    report = CheckReport(check="neumann", domain=spec.descriptor)
    if spec.oracle_only:
        _require_box(spec, "oracle-only mode")
        a, b, c = spec.sides
        mu = box_neumann_spectrum(a, b, c, k + 3)
        lam = box_dirichlet_spectrum(a, b, c, k)
        alpha = box_maxwell_spectrum(a, b, c, 1)
        report.provenance = {"mu": "oracle", "lambda": "oracle", "alpha": "oracle"}
    else:
        levels = spec.effective_levels
        neu = _level_results(spec, OperatorKind.NEUMANN, k + 3)
        dir_ = _level_results(spec, OperatorKind.DIRICHLET, k)
        t_m = track_table(neu, k + 3, levels)
        t_l = track_table(dir_, k, levels)
        mu, lam = t_m.extrapolated, t_l.extrapolated
        report.convergence = [t_m, t_l]
        report.raw_spectra = [r.spectrum for r in neu + dir_]
        report.provenance = {"mu": t_m.provenance, "lambda": t_l.provenance}
        alpha = None
        if spec.is_box:
            a, b, c = spec.sides
            alpha = box_maxwell_spectrum(a, b, c, 1)
            report.provenance["alpha"] = "oracle"
    report.records = neumann_shift_table(mu, lam, k)
    bad = [r["k"] for r in report.records if not r["holds"]]
    report.summary["status"] = "no counterexample" if not bad else f"counterexample at k = {bad}"
    if alpha is not None:
        mu2, a1, holds = convex_neumann_curl_check(mu, alpha)
        report.summary["convex_mu2_le_alpha1"] = {"mu2": mu2, "alpha1": a1, "holds": holds}
    report.notes.append("exploratory comparison; not gated")
    return report


# ---------- div 迹诊断 ----------
def _p1_mass_solver(mesh: TetMesh):
    """全 P1 一致质量矩阵（无边界条件）的 LU"""
    _, M = assemble_full(mesh, OperatorKind.NEUMANN)
    return splu(M.tocsc())


def div_trace_ratio(mesh: TetMesh, field: np.ndarray, solver=None) -> dict:
    """
    field: (V, 3) 顶点上的向量 P1 场。
    逐单元常数散度 -> L² 投影到 P1 -> 边界顶点 RMS / 内部顶点 RMS。
    """
    U = np.asarray(field, dtype=np.float64).reshape(mesh.n_vertices, 3)
    grads, vol = barycentric_gradients(mesh.vertices[mesh.tets])
    div = np.einsum("tic,tic->t", grads, U[mesh.tets])
    load = np.zeros(mesh.n_vertices)
    np.add.at(load, mesh.tets.ravel(), np.repeat(div * vol / 4.0, 4))
    solver = solver or _p1_mass_solver(mesh)
    d = solver.solve(load)
    bmask = mesh.boundary_vertex_flags
    b_rms = float(np.sqrt(np.mean(d[bmask] ** 2))) if bmask.any() else 0.0
    i_rms = float(np.sqrt(np.mean(d[~bmask] ** 2))) if (~bmask).any() else 0.0
    return {
        "div_boundary_rms": b_rms,
        "div_interior_rms": i_rms,
        "ratio": b_rms / i_rms if i_rms > 0.0 else None,
    }


def run_div_trace_diagnostic(pairs: Sequence[EigenPair], mesh: TetMesh, dofs: DofMap) -> CheckReport:
    """B 的特征向量：div u 的迹应趋于 0（梯度型轨道），无散轨道内部散度本身趋于 0"""
    solver = _p1_mass_solver(mesh)
    report = CheckReport(check="divtrace", domain=mesh.name)
    for i, p in enumerate(pairs, start=1):
        u = np.asarray(dofs.extend(p.vector)).ravel()
        rec = {"index": i, "eta": float(p.value)}
        rec.update(div_trace_ratio(mesh, u.reshape(-1, 3), solver))
        report.records.append(rec)
    report.notes.append("diagnostic only; boundary/interior divergence ratio should decrease under refinement")
    return report


def run_div_trace_study(spec: StudySpec) -> CheckReport:
    nev = spec.nev or 6
    report = CheckReport(check="divtrace", domain=spec.descriptor)
    for n in spec.effective_levels:
        mesh = spec.mesh_at(n)
        res = solve_operator(mesh, OperatorKind.B_FORM, nev, tol=spec.tol, preconditioner=spec.preconditioner,
                             threads=spec.threads, seed=spec.seed)
        sub = run_div_trace_diagnostic(res.pairs, mesh, res.dofs)
        for rec in sub.records:
            report.records.append({"level": n, **rec})
        report.raw_spectra.append(res.spectrum)
    report.provenance = {"bform": "fem(n=" + ",".join(str(n) for n in spec.effective_levels) + ")"}
    report.notes.extend(sub.notes)
    report.summary = {"tracks": div_trace_trend(report.records)}
    return report


def _decreasing(xs: Sequence[Optional[float]]) -> Optional[bool]:
    if len(xs) < 2 or any(x is None for x in xs):
        return None
    return bool(all(b < a for a, b in zip(xs, xs[1:])))


def div_trace_trend(records: Sequence[dict]) -> List[dict]:
    """按特征值序号汇总各层的比值与内部散度，判断是否随加密单调下降"""
    tracks: dict = {}
    for rec in sorted(records, key=lambda r: (r["index"], r["level"])):
        tracks.setdefault(rec["index"], []).append(rec)
    out = []
    for index, recs in tracks.items():
        ratios = [r["ratio"] for r in recs]
        interior = [r["div_interior_rms"] for r in recs]
        out.append({
            "index": index,
            "levels": [r["level"] for r in recs],
            "eta": [r["eta"] for r in recs],
            "ratio": ratios,
            "div_interior_rms": interior,
            "ratio_decreasing": _decreasing(ratios),
            "interior_decreasing": _decreasing(interior),
        })
    return out


# ---------- 收敛表 ----------
_ORACLES: dict = {
    OperatorKind.DIRICHLET: lambda a, b, c, n: box_dirichlet_spectrum(a, b, c, n),
    OperatorKind.NEUMANN: lambda a, b, c, n: box_neumann_spectrum(a, b, c, n),
    OperatorKind.CURL_CURL: lambda a, b, c, n: box_maxwell_spectrum(a, b, c, n),
    OperatorKind.B_FORM: lambda a, b, c, n: union_spectrum(box_dirichlet_spectrum(a, b, c, n),
                                                           box_maxwell_spectrum(a, b, c, n))[:n],
}


def run_convergence_study(spec: StudySpec, op) -> CheckReport:
    """任意算子的逐层收敛表；长方体上附解析值与误差，重入角夹具报告退化的观测阶"""
    op = OperatorKind.parse(op)
    nev = spec.nev or spec.kmax
    levels = spec.effective_levels
    results = _level_results(spec, op, nev)
    table = track_table(results, nev, levels)
    oracle: Optional[np.ndarray] = None
    if spec.is_box:
        a, b, c = spec.sides
        oracle = _ORACLES[op](a, b, c, nev)
    report = CheckReport(check=f"convergence-{op.value}", domain=spec.descriptor)
    for i in range(nev):
        rec = {"track": i + 1, "finest": table.tracks[i][-1], "extrapolated": table.extrapolated[i],
               "rate": table.rates[i]}
        if oracle is not None:
            exact = float(oracle[i])
            rec["oracle"] = exact
            rec["error_finest"] = table.tracks[i][-1] - exact
        report.records.append(rec)
    report.convergence = [table]
    report.raw_spectra = [r.spectrum for r in results]
    report.provenance = {op.value: table.provenance}
    if oracle is not None:
        report.provenance["oracle"] = "box enumeration"
    rates = [r for r in table.rates if r is not None]
    if rates:
        report.summary["median_rate"] = float(np.median(rates))
    return report


STUDIES: dict = {
    "interlace": run_interlace_study,
    "union": run_union_check,
    "neumann": run_neumann_exploration,
    "divtrace": run_div_trace_study,
}


def run_checks(spec: StudySpec, on_report: Optional[Callable[[CheckReport], None]] = None) -> List[CheckReport]:
    """按 spec.checks 顺序执行；trial 在最细层网格上做，convergence 对 Dirichlet"""
    out: List[CheckReport] = []
    for name in spec.checks:
        if name == "trial":
            rep = run_trial_subspace_check(spec.mesh_at(spec.effective_levels[-1]), spec.kmax, spec.tol,
                                           spec.preconditioner, spec.threads, spec.seed)
        elif name == "convergence":
            rep = run_convergence_study(spec, OperatorKind.DIRICHLET)
        elif name in STUDIES:
            rep = STUDIES[name](spec)
        else:
            raise CurlSpecError(f"unknown check {name!r}")
        out.append(rep)
        if on_report:
            on_report(rep)
    return out
