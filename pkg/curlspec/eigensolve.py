# curlspec/eigensolve.py
"""
对称广义特征问题 K x = η M x 的最低 nev 个特征对。

- solve_lowest: scipy.sparse.linalg.lobpcg，可选核放气：
  对给定的核基 G 做 M-正交投影 Πv = v − G (GᵀMG)⁻¹ GᵀM v，GᵀMG 直接稀疏分解。
  规模太小时退回稠密 eigh。
- solve_shift_invert: eigsh + 稀疏 LU 的 shift-invert。
- Spectrum: 升序特征值 + 残差 + 重数分组，可序列化为 JSON。
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, eigh, null_space
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg, spilu, splu

from .assembly import OperatorKind, SymSparse
from .config import (
    CLUSTER_GAP, DEFAULT_PRECONDITIONER, DEFAULT_SEED, DENSE_CONSTRAINT_LIMIT, DENSE_FALLBACK_FACTOR,
    KERNEL_REL_TOL, MAX_ITER, SOLVER_TOL, ZERO_THRESHOLD,
)
from .errors import CholeskyError, SingularShiftError, SolverError, SpectrumLengthError

log = logging.getLogger(__name__)

PRECONDITIONERS = ("jacobi", "ilu", "lu")


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray = field(repr=False)
    residual: float = 0.0
    converged: bool = True


@dataclass
class Spectrum:
    operator: str
    values: np.ndarray
    residuals: np.ndarray
    clusters: List[Tuple[int, int]]
    h: float = 0.0
    order: int = 1
    dofs: int = 0
    mesh: str = ""
    converged: List[bool] = field(default_factory=list)
    kernel_dim: int = 0
    extra_kernel: int = 0

    @classmethod
    def from_values(cls, operator, values, residuals=None, **kw) -> "Spectrum":
        values = np.asarray(values, dtype=np.float64)
        order = np.argsort(values, kind="stable")
        values = values[order]
        res = np.zeros(len(values)) if residuals is None else np.asarray(residuals, dtype=np.float64)[order]
        op = operator.value if isinstance(operator, OperatorKind) else str(operator)
        conv = kw.pop("converged", None)
        conv = [True] * len(values) if conv is None else [bool(conv[i]) for i in order]
        spec = cls(operator=op, values=values, residuals=res,
                   clusters=cluster_values(values), converged=conv, **kw)
        if spec.operator == OperatorKind.CURL_CURL.value:
            spec.extra_kernel = count_extra_kernel(spec)
        return spec

    @classmethod
    def from_pairs(cls, operator, pairs: Sequence[EigenPair], **kw) -> "Spectrum":
        return cls.from_values(
            operator, [p.value for p in pairs], [p.residual for p in pairs],
            converged=[p.converged for p in pairs], **kw,
        )

    def __len__(self) -> int:
        return len(self.values)

    @property
    def all_converged(self) -> bool:
        return all(self.converged)

    @property
    def multiplicities(self) -> List[int]:
        return [j - i + 1 for i, j in self.clusters]

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "mesh": self.mesh,
            "h": float(self.h),
            "order": int(self.order),
            "dofs": int(self.dofs),
            "values": [float(v) for v in self.values],
            "residuals": [float(r) for r in self.residuals],
            "converged": list(self.converged),
            "clusters": [[int(i), int(j)] for i, j in self.clusters],
            "kernel_dim": int(self.kernel_dim),
            "extra_kernel": int(self.extra_kernel),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "Spectrum":
        return cls(
            operator=data["operator"],
            values=np.asarray(data["values"], dtype=np.float64),
            residuals=np.asarray(data.get("residuals") or [0.0] * len(data["values"]), dtype=np.float64),
            clusters=[(int(i), int(j)) for i, j in data.get("clusters", [])] or cluster_values(data["values"]),
            h=float(data.get("h", 0.0)),
            order=int(data.get("order", 1)),
            dofs=int(data.get("dofs", 0)),
            mesh=data.get("mesh", ""),
            converged=list(data.get("converged") or [True] * len(data["values"])),
            kernel_dim=int(data.get("kernel_dim", 0)),
            extra_kernel=int(data.get("extra_kernel", 0)),
        )


# ---------- 工具 ----------
def cluster_values(values, gap: float = CLUSTER_GAP) -> List[Tuple[int, int]]:
    """相邻值相对间隙 <= gap 归为一组，返回闭区间 [first, last]（0 起）"""
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        return []
    out = []
    first = 0
    for i in range(1, len(v)):
        scale = max(abs(v[i]), abs(v[i - 1]), ZERO_THRESHOLD)
        if abs(v[i] - v[i - 1]) > gap * scale:
            out.append((first, i - 1))
            first = i
    out.append((first, len(v) - 1))
    return out


def count_extra_kernel(spectrum: "Spectrum", rel_tol: float = KERNEL_REL_TOL) -> int:
    """放气后仍接近 0 的值（有洞区域上的调和场）"""
    v = np.asarray(spectrum.values)
    if len(v) == 0:
        return 0
    top = max(float(np.abs(v).max()), 1.0)
    return int((np.abs(v) < rel_tol * top).sum())


def _csr(A) -> sp.csr_matrix:
    if isinstance(A, SymSparse):
        return A.matrix
    return sp.csr_matrix(A)


def rayleigh_quotient(K, M, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        raise ValueError("Rayleigh quotient of the zero vector")
    K, M = _csr(K), _csr(M)
    return float(x @ (K @ x)) / float(x @ (M @ x))


def _residual_norms(R: np.ndarray, dM: np.ndarray) -> np.ndarray:
    """‖r‖_{M⁻¹} 的对角近似"""
    return np.sqrt(np.maximum((R * R / dM[:, None]).sum(axis=0), 0.0))


def _pairs(values, X, K, M, tol) -> List[EigenPair]:
    dM = M.diagonal()
    R = K @ X - (M @ X) * values
    res = _residual_norms(R, dM)
    return [
        EigenPair(value=float(values[i]), vector=X[:, i].copy(), residual=float(res[i]),
                  converged=bool(res[i] <= tol * (abs(values[i]) + 1.0)))
        for i in range(len(values))
    ]


def _check_mass(M: sp.csr_matrix) -> np.ndarray:
    d = M.diagonal()
    if (d <= 0).any():
        raise CholeskyError("mass matrix is not positive definite (non-positive diagonal)")
    return d


# ---------- 放气 ----------
class Deflation:
    """核基 G 的 M-正交投影"""

    def __init__(self, G, M):
        self.G = sp.csr_matrix(G)
        self.MG = sp.csr_matrix(_csr(M) @ self.G)
        gram = sp.csc_matrix(self.G.T @ self.MG)
        try:
            self._lu = splu(gram)
        except RuntimeError as e:
            raise SolverError(f"deflation basis is rank deficient: {e}")

    @property
    def rank(self) -> int:
        return int(self.G.shape[1])

    def __call__(self, V: np.ndarray) -> np.ndarray:
        coef = self._lu.solve(np.asarray(self.MG.T @ V))
        return V - self.G @ coef

    def leakage(self, V: np.ndarray) -> np.ndarray:
        """每列 |GᵀMv| 的最大值"""
        return np.abs(np.asarray(self.MG.T @ V)).max(axis=0)


# ---------- 稠密 ----------
def solve_dense(K, M, nev: Optional[int] = None, deflation=None, tol: float = SOLVER_TOL) -> List[EigenPair]:
    """稠密对称束求解；带放气时先限制到 M-正交补上"""
    K, M = _csr(K), _csr(M)
    n = K.shape[0]
    _check_mass(M)
    Kd, Md = K.toarray(), M.toarray()
    Q = None
    if deflation is not None:
        defl = deflation if isinstance(deflation, Deflation) else Deflation(deflation, M)
        Q = null_space(np.asarray(defl.MG.todense()).T)
        Kd, Md = Q.T @ Kd @ Q, Q.T @ Md @ Q
    dim = Kd.shape[0]
    nev = dim if nev is None else nev
    if nev > dim:
        raise SpectrumLengthError(f"requested {nev} eigenpairs but the space has dimension {dim}")
    try:
        w, V = eigh(Kd, Md, subset_by_index=[0, nev - 1])
    except LinAlgError as e:
        raise CholeskyError(f"mass matrix is not positive definite: {e}")
    if Q is not None:
        V = Q @ V
    log.debug("dense solve: n=%d, dim=%d, nev=%d", n, dim, nev)
    return _pairs(w, V, K, M, tol)


# ---------- LOBPCG ----------
def make_preconditioner(K, M, kind: str = DEFAULT_PRECONDITIONER):
    """作用于残差块的预条件子，基于 K + M"""
    A = sp.csr_matrix(_csr(K) + _csr(M))
    if kind == "jacobi":
        d = A.diagonal()
        return lambda R: R / d[:, None]
    if kind == "ilu":
        ilu = spilu(A.tocsc(), drop_tol=1e-4, fill_factor=10)
        return lambda R: ilu.solve(np.asfortranarray(R))
    if kind == "lu":
        lu = splu(A.tocsc())
        return lambda R: lu.solve(np.asfortranarray(R))
    raise SolverError(f"unknown preconditioner {kind!r}; choose from {PRECONDITIONERS}")


def _block_operator(n: int, fn) -> LinearOperator:
    def matvec(v):
        v = np.asarray(v)
        return fn(v.reshape(n, 1)).reshape(v.shape)
    return LinearOperator((n, n), matvec=matvec, matmat=fn, dtype=np.float64)


def _ritz(K, M, X: np.ndarray, nev: int):
    """投影后的块上再做一次 Rayleigh-Ritz，返回前 nev 个"""
    KX, MX = K @ X, M @ X
    gK, gM = X.T @ KX, X.T @ MX
    try:
        w, C = eigh(0.5 * (gK + gK.T), 0.5 * (gM + gM.T), subset_by_index=[0, nev - 1])
    except LinAlgError as e:
        raise CholeskyError(f"Rayleigh-Ritz Gram matrix not positive definite: {e}")
    return w, X @ C


def solve_lowest(
    K, M, nev: int,
    deflation=None,
    tol: float = SOLVER_TOL,
    maxiter: int = MAX_ITER,
    preconditioner: str = DEFAULT_PRECONDITIONER,
    seed: int = DEFAULT_SEED,
) -> List[EigenPair]:
    """
    最低 nev 个特征对（升序、M-正交归一），用 scipy 的 lobpcg。
    deflation 可以是稀疏核基矩阵或 Deflation：预条件子后接 M-正交投影，
    核基不大时再作为 Y 约束传入；返回向量与核 M-正交。
    未收敛不抛异常：对应 EigenPair.converged=False。
    """
    K, M = _csr(K), _csr(M)
    n = K.shape[0]
    if nev < 1:
        raise SpectrumLengthError("nev must be >= 1")
    _check_mass(M)
    defl = None
    if deflation is not None:
        defl = deflation if isinstance(deflation, Deflation) else Deflation(deflation, M)
    dim = n - (defl.rank if defl else 0)
    if nev > dim:
        raise SpectrumLengthError(f"requested {nev} eigenpairs but only {dim} free dofs remain")

    block = nev + min(nev, 10)
    if dim < DENSE_FALLBACK_FACTOR * block:
        return solve_dense(K, M, nev, defl, tol)

    project = defl if defl is not None else (lambda V: V)
    precond = make_preconditioner(K, M, preconditioner)
    T = _block_operator(n, lambda R: project(precond(R)))
    Y = None
    if defl is not None and n * defl.rank <= DENSE_CONSTRAINT_LIMIT:
        Y = defl.G.toarray()
    X0 = project(np.random.default_rng(seed).standard_normal((n, block)))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        _, X = lobpcg(K, X0, B=M, M=T, Y=Y, tol=tol, maxiter=maxiter, largest=False)
    for w in caught:
        log.debug("lobpcg: %s", w.message)

    # 再投影一次，消掉累积的核分量
    values, X = _ritz(K, M, project(X), nev)
    pairs = _pairs(values, X, K, M, tol)
    n_bad = sum(not p.converged for p in pairs)
    if n_bad:
        log.warning("lobpcg: %d of %d eigenpairs not converged (maxiter=%d)", n_bad, nev, maxiter)
    else:
        log.info("lobpcg converged (n=%d, nev=%d, precond=%s, constraints=%s)",
                 n, nev, preconditioner, "dense" if Y is not None else "projected" if defl else "none")
    return pairs


# ---------- shift-invert ----------
def solve_shift_invert(
    K, M, sigma: float, nev: int,
    tol: float = SOLVER_TOL,
    drop_zero_modes: bool = False,
    seed: int = DEFAULT_SEED,
) -> List[EigenPair]:
    """
    σ 附近的 nev 个特征对（按值升序返回）。
    K − σM 奇异时抛 SingularShiftError，并给出扰动后的 σ。
    drop_zero_modes=True 时过滤掉 < ZERO_THRESHOLD·max(1, σ) 的值（旋度束的梯度核）。
    """
    K, M = _csr(K), _csr(M)
    n = K.shape[0]
    _check_mass(M)
    if nev < 1 or nev > n:
        raise SpectrumLengthError(f"nev must be in [1, {n}], got {nev}")
    A = sp.csc_matrix(K - sigma * M)
    hint = sigma * (1.0 + 1e-6) + 1e-9
    try:
        lu = splu(A)
    except RuntimeError:
        raise SingularShiftError(sigma, hint)
    udiag = np.abs(lu.U.diagonal())
    if udiag.min() <= 1e-14 * float(udiag.max()):
        raise SingularShiftError(sigma, hint)

    if n <= max(2 * nev + 1, 20):
        pairs = solve_dense(K, M, None, None, tol)
        pairs = sorted(pairs, key=lambda p: abs(p.value - sigma))[:nev]
    else:
        op = LinearOperator((n, n), matvec=lu.solve, dtype=np.float64)
        v0 = np.random.default_rng(seed).standard_normal(n)
        w, V = eigsh(K, k=nev, M=M, sigma=sigma, which="LM", OPinv=op, v0=v0, tol=tol * 1e-2)
        V = V / np.sqrt(np.einsum("ij,ij->j", V, M @ V))[None, :]
        pairs = _pairs(w, V, K, M, tol)
    pairs.sort(key=lambda p: p.value)
    if drop_zero_modes:
        cut = ZERO_THRESHOLD * max(1.0, sigma)
        pairs = [p for p in pairs if p.value >= cut]
    log.info("shift-invert at sigma=%g: %d pairs", sigma, len(pairs))
    return pairs
