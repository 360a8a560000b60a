# curlspec/assembly.py
"""
全局组装：每个算子一对 (K, M) 稀疏矩阵，本质边界条件通过消去自由度施加。

- DirichletLaplacian: P1/P2，边界顶点（P2 再加边界棱）消去
- NeumannLaplacian:   P1/P2，不消去
- CurlCurl:           最低阶 Nédélec，边界棱消去；梯度核不在空间里去掉，交给 eigensolve 放气
- BForm:              向量 P1；只在一个边界平面上的顶点保留法向分量，多平面顶点全部消去，仅限凸域

单元循环按固定大小的四面体分块并发执行，各块产生独立的 COO 缓冲，
最后按 (row, col) 稳定排序归约，结果与线程数无关。
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.io
import scipy.sparse as sp

from .config import ASSEMBLY_CHUNK
from .elements import lagrange_batch, nedelec_batch, vector_p1_batch
from .errors import AssemblyError, NoFreeDofsError, NonConvexDomainError
from .mesh import TetMesh, boundary_planes, is_convex, vertex_planes
from .utils import resolve_threads

log = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    CURL_CURL = "curlcurl"
    B_FORM = "bform"

    @classmethod
    def parse(cls, value) -> "OperatorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("-", "").replace("_", ""))
        except ValueError:
            raise AssemblyError(f"unknown operator {value!r}; choose from {[o.value for o in cls]}")

    @property
    def family(self) -> str:
        return {
            OperatorKind.DIRICHLET: "lagrange",
            OperatorKind.NEUMANN: "lagrange",
            OperatorKind.CURL_CURL: "nedelec",
            OperatorKind.B_FORM: "vector-p1",
        }[self]


class DofKind(str, Enum):
    P1 = "vertex-P1"
    P2 = "vertex+edge-P2"
    NEDELEC = "edge-Nedelec"
    VECTOR_P1 = "vector-P1"


@dataclass(frozen=True)
class DofMap:
    """
    entity_dof[i] 为实体（或 顶点x分量）i 的自由编号，-1 表示被消去。
    向量 P1 里只保留法向的顶点不对应单个分量，entity_dof 记 -1，
    其基函数 φ_v ν 只体现在 prolongation 中。
    prolongation (n_full x free_count) 把自由向量延拓为全空间向量（被消去处为 0）。
    """
    kind: DofKind
    entity_dof: np.ndarray
    free_count: int
    prolongation: sp.csr_matrix

    @property
    def n_full(self) -> int:
        return int(self.prolongation.shape[0])

    @property
    def constrained_count(self) -> int:
        return self.n_full - self.free_count

    @property
    def free_entities(self) -> np.ndarray:
        return np.flatnonzero(self.entity_dof >= 0)

    def extend(self, x: np.ndarray) -> np.ndarray:
        return self.prolongation @ x

    def restrict(self, y: np.ndarray) -> np.ndarray:
        return self.prolongation.T @ y

    @classmethod
    def from_mask(cls, kind: DofKind, constrained: np.ndarray) -> "DofMap":
        constrained = np.asarray(constrained, dtype=bool)
        n = len(constrained)
        entity_dof = np.full(n, -1, dtype=np.int64)
        free = np.flatnonzero(~constrained)
        entity_dof[free] = np.arange(len(free))
        P = sp.csr_matrix((np.ones(len(free)), (free, np.arange(len(free)))), shape=(n, len(free)))
        return cls(kind=kind, entity_dof=entity_dof, free_count=int(len(free)), prolongation=P)


@dataclass(frozen=True)
class SymSparse:
    """CSR 对称矩阵（全存储，行列结构对称）"""
    matrix: sp.csr_matrix

    @classmethod
    def from_csr(cls, m, symmetrize: bool = False) -> "SymSparse":
        m = sp.csr_matrix(m)
        if symmetrize:
            m = sp.csr_matrix((m + m.T) * 0.5)
        m.sort_indices()
        return cls(matrix=m)

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def __matmul__(self, other):
        return self.matrix @ other

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def max_abs(self) -> float:
        return float(np.abs(self.matrix.data).max()) if self.matrix.nnz else 0.0

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def asymmetry(self) -> float:
        """max |A - A^T| / max |A|"""
        d = self.matrix - self.matrix.T
        top = float(np.abs(d.data).max()) if d.nnz else 0.0
        return top / max(self.max_abs(), np.finfo(float).tiny)

    def write_matrix_market(self, path, comment: str = "") -> Path:
        path = Path(path)
        if path.suffix != ".mtx":
            path = path.with_name(path.name + ".mtx")
        path.parent.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(str(path), self.matrix.tocoo(), comment=comment, symmetry="symmetric", precision=17)
        return path


# ---------- 局部自由度编号 ----------
def _local_dofs(mesh: TetMesh, kind: DofKind) -> np.ndarray:
    if kind is DofKind.P1:
        return mesh.tets
    if kind is DofKind.P2:
        return np.concatenate([mesh.tets, mesh.n_vertices + mesh.tet_edges], axis=1)
    if kind is DofKind.NEDELEC:
        return mesh.tet_edges
    # 向量 P1：(顶点 i, 分量 c) -> 3 v_i + c，与 vector_p1_batch 的局部顺序一致
    return (3 * mesh.tets[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 12)


def _local_kernel(mesh: TetMesh, kind: DofKind) -> Callable[[slice], Tuple[np.ndarray, np.ndarray]]:
    coords = mesh.vertices[mesh.tets]
    if kind is DofKind.P1:
        return lambda s: lagrange_batch(coords[s], 1)
    if kind is DofKind.P2:
        return lambda s: lagrange_batch(coords[s], 2)
    if kind is DofKind.NEDELEC:
        return lambda s: nedelec_batch(coords[s], mesh.tet_edge_signs[s])
    return lambda s: vector_p1_batch(coords[s])


def _coo_reduce(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray, n: int) -> sp.csr_matrix:
    """按 (row, col) 稳定排序后分段求和；同一位置的贡献总按单元顺序相加"""
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    keys = rows * np.int64(n) + cols
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    data = np.add.reduceat(vals, starts)
    r = rows[starts]
    c = cols[starts]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, r + 1, 1)
    indptr = np.cumsum(indptr)
    return sp.csr_matrix((data, c, indptr), shape=(n, n))


def _scatter(mesh: TetMesh, kind: DofKind, n_full: int, threads: int) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    ldofs = _local_dofs(mesh, kind)
    kernel = _local_kernel(mesh, kind)
    chunks = [slice(s, min(s + ASSEMBLY_CHUNK, mesh.n_tets)) for s in range(0, mesh.n_tets, ASSEMBLY_CHUNK)]

    def work(s: slice):
        Ke, Me = kernel(s)
        d = ldofs[s]
        nl = d.shape[1]
        r = np.repeat(d, nl, axis=1).ravel()
        c = np.tile(d, (1, nl)).ravel()
        return r, c, Ke.ravel(), Me.ravel()

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(s) for s in chunks]

    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    K = _coo_reduce(rows, cols, np.concatenate([p[2] for p in parts]), n_full)
    M = _coo_reduce(rows, cols, np.concatenate([p[3] for p in parts]), n_full)
    return K, M


# ---------- 自由度映射 ----------
def _vector_p1_dofs(mesh: TetMesh) -> DofMap:
    planes = boundary_planes(mesh)
    vp = vertex_planes(mesh, planes)
    nv = mesh.n_vertices
    entity_dof = np.full(3 * nv, -1, dtype=np.int64)
    rows, cols, vals = [], [], []
    k = 0
    for v in range(nv):
        on = vp[v]
        if not on:
            for c in range(3):
                entity_dof[3 * v + c] = k
                rows.append(3 * v + c)
                cols.append(k)
                vals.append(1.0)
                k += 1
        elif len(on) == 1:
            nu = planes[on[0]].normal
            for c in range(3):
                if nu[c] != 0.0:
                    rows.append(3 * v + c)
                    cols.append(k)
                    vals.append(float(nu[c]))
            k += 1
    P = sp.csr_matrix((vals, (rows, cols)), shape=(3 * nv, k))
    return DofMap(kind=DofKind.VECTOR_P1, entity_dof=entity_dof, free_count=k, prolongation=P)


def build_dofmap(mesh: TetMesh, op: OperatorKind, order: int = 1) -> DofMap:
    op = OperatorKind.parse(op)
    if op in (OperatorKind.DIRICHLET, OperatorKind.NEUMANN):
        if order not in (1, 2):
            raise AssemblyError(f"Lagrange order must be 1 or 2, got {order}")
        if order == 1:
            kind = DofKind.P1
            constrained = mesh.boundary_vertex_flags.copy()
        else:
            kind = DofKind.P2
            constrained = np.concatenate([mesh.boundary_vertex_flags, mesh.boundary_edge_flags])
        if op is OperatorKind.NEUMANN:
            constrained[:] = False
        return DofMap.from_mask(kind, constrained)
    if order != 1:
        raise AssemblyError(f"{op.value} is only available for order 1")
    if op is OperatorKind.CURL_CURL:
        return DofMap.from_mask(DofKind.NEDELEC, mesh.boundary_edge_flags)
    return _vector_p1_dofs(mesh)


# ---------- 主接口 ----------
def assemble_full(mesh: TetMesh, op: OperatorKind, order: int = 1,
                  threads: Optional[int] = None) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """不施加任何边界条件的全空间 (K, M)"""
    op = OperatorKind.parse(op)
    if op in (OperatorKind.DIRICHLET, OperatorKind.NEUMANN):
        kind = DofKind.P1 if order == 1 else DofKind.P2
        n = mesh.n_vertices + (mesh.n_edges if order == 2 else 0)
    elif op is OperatorKind.CURL_CURL:
        kind, n = DofKind.NEDELEC, mesh.n_edges
    else:
        kind, n = DofKind.VECTOR_P1, 3 * mesh.n_vertices
    return _scatter(mesh, kind, n, resolve_threads(threads))


def assemble(mesh: TetMesh, op, order: int = 1,
             threads: Optional[int] = None) -> Tuple[SymSparse, SymSparse, DofMap]:
    """
    组装 (K, M, dofs)。K 半正定、M 在自由度上正定。
    自由度为空时抛 NoFreeDofsError；BForm 在非凸域上抛 NonConvexDomainError。
    """
    op = OperatorKind.parse(op)
    if op is OperatorKind.B_FORM and not is_convex(mesh):
        raise NonConvexDomainError()
    dofs = build_dofmap(mesh, op, order)
    if dofs.free_count == 0:
        raise NoFreeDofsError()
    K_full, M_full = assemble_full(mesh, op, order, threads)
    P = dofs.prolongation
    if dofs.kind is DofKind.VECTOR_P1:
        # 法向基下 P^T K P 只在舍入意义下对称
        K = SymSparse.from_csr(P.T @ K_full @ P, symmetrize=True)
        M = SymSparse.from_csr(P.T @ M_full @ P, symmetrize=True)
    else:
        # 纯选取：直接取子矩阵，保持逐位对称
        free = dofs.free_entities
        K = SymSparse.from_csr(K_full[free][:, free])
        M = SymSparse.from_csr(M_full[free][:, free])
    log.info("assembled %s on %s: %d free / %d constrained dofs, nnz(K)=%d",
             op.value, mesh.name, dofs.free_count, dofs.constrained_count, K.nnz)
    return K, M, dofs


# ---------- 梯度嵌入 ----------
def discrete_gradient(mesh: TetMesh) -> sp.csr_matrix:
    """全空间 (E x V)：棱 (lo, hi) 在 hi 处 +1、lo 处 -1"""
    E = mesh.n_edges
    rows = np.repeat(np.arange(E), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], E)
    return sp.csr_matrix((vals, (rows, cols)), shape=(E, mesh.n_vertices))


def gradient_embedding(mesh: TetMesh, curl_dofs: Optional[DofMap] = None,
                       p1_dofs: Optional[DofMap] = None) -> sp.csr_matrix:
    """P1 Dirichlet 自由度 -> Nédélec 自由度；内部顶点的所有关联棱都是自由棱"""
    curl_dofs = curl_dofs or build_dofmap(mesh, OperatorKind.CURL_CURL)
    p1_dofs = p1_dofs or build_dofmap(mesh, OperatorKind.DIRICHLET)
    G = discrete_gradient(mesh)[curl_dofs.free_entities][:, p1_dofs.free_entities]
    return sp.csr_matrix(G)
