# curlspec/mesh.py
"""
四面体网格：构建（Kuhn 剖分的长方体及其派生夹具）、边编号、边界分类与外法向。

TetMesh 构造完成后不可变，其它模块可以并发只读。
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import DEGENERATE_VOLUME_FACTOR, NORMAL_TOL, PLANE_TOL
from .errors import (
    DegenerateElementError, InvalidSpecError, MeshValidationError,
    NonConformingMeshError, NoTetrahedraError,
)

log = logging.getLogger(__name__)

# 局部边 / 局部面（面 i 与顶点 i 相对）
LOCAL_EDGES: Tuple[Tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_FACES: Tuple[Tuple[int, int, int], ...] = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))

# Kuhn 剖分：单元立方体沿主对角线 000 -> 111 拆成 6 个四面体，按轴的排列走路径
_KUHN_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


class BoxSpec(BaseModel):
    """长方体 (0,a)x(0,b)x(0,c)，每个方向 nx/ny/nz 个格子"""
    model_config = ConfigDict(frozen=True)

    a: float = Field(gt=0)
    b: float = Field(gt=0)
    c: float = Field(gt=0)
    nx: int = Field(ge=1)
    ny: int = Field(ge=1)
    nz: int = Field(ge=1)

    @classmethod
    def cube(cls, side: float, n: int) -> "BoxSpec":
        return cls(a=side, b=side, c=side, nx=n, ny=n, nz=n)

    def refined(self, factor: int = 2) -> "BoxSpec":
        return self.model_copy(update={"nx": self.nx * factor, "ny": self.ny * factor, "nz": self.nz * factor})

    @property
    def descriptor(self) -> str:
        return f"box({self.a:.6g},{self.b:.6g},{self.c:.6g};{self.nx}x{self.ny}x{self.nz})"


@dataclass(frozen=True)
class TetMesh:
    """
    四面体网格。所有数组按全局编号索引：
    - tets 的有向体积全部为正；
    - edges 按 (lo, hi) 字典序排列且无重复；
    - tet_edge_signs[t, i] = +1 当且仅当局部边 LOCAL_EDGES[i] 的走向为 lo -> hi；
    - boundary_faces 的顶点顺序使得右手法则给出外法向。
    """
    vertices: np.ndarray
    tets: np.ndarray
    edges: np.ndarray
    tet_edges: np.ndarray
    tet_edge_signs: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    boundary_tags: np.ndarray
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    n_faces: int
    name: str = "mesh"

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_tets(self) -> int:
        return int(self.tets.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def n_boundary_faces(self) -> int:
        return int(self.boundary_faces.shape[0])

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces - self.n_tets

    @property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_vertex_flags)

    @property
    def volumes(self) -> np.ndarray:
        return signed_volumes(self.vertices, self.tets)

    @property
    def h(self) -> float:
        """最长边长"""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return float(np.sqrt((d * d).sum(axis=1)).max())

    def boundary_face_records(self) -> List[Tuple[Tuple[int, int, int], Tuple[float, float, float], int]]:
        return [
            (tuple(int(v) for v in f), tuple(float(x) for x in nrm), int(tag))
            for f, nrm, tag in zip(self.boundary_faces, self.boundary_normals, self.boundary_tags)
        ]

    def summary(self) -> Dict[str, int]:
        return {
            "V": self.n_vertices,
            "E": self.n_edges,
            "F": self.n_faces,
            "T": self.n_tets,
            "boundary_faces": self.n_boundary_faces,
            "boundary_vertices": int(self.boundary_vertex_flags.sum()),
            "boundary_edges": int(self.boundary_edge_flags.sum()),
            "interior_vertices": int((~self.boundary_vertex_flags).sum()),
        }


@dataclass(frozen=True)
class Plane:
    normal: np.ndarray
    offset: float
    faces: np.ndarray = field(repr=False)


# ---------- 几何 ----------
def signed_volumes(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    d = p[:, 1:, :] - p[:, :1, :]
    return np.linalg.det(d) / 6.0


def _max_edge_lengths(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    p = vertices[tets]
    out = np.zeros(tets.shape[0])
    for i, j in LOCAL_EDGES:
        out = np.maximum(out, np.linalg.norm(p[:, i] - p[:, j], axis=1))
    return out


# ---------- 边编号 ----------
def index_edges(tets: np.ndarray, n_vertices: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    返回 (edges, tet_edges, tet_edge_signs)。
    edges 按 (lo, hi) 字典序；符号 +1 表示局部走向 lo -> hi。对同一网格输出确定。
    """
    tets = np.asarray(tets, dtype=np.int64)
    if tets.ndim != 2 or tets.shape[1] != 4:
        raise MeshValidationError(f"tets must have shape (T, 4), got {tets.shape}")
    li = np.array([e[0] for e in LOCAL_EDGES])
    lj = np.array([e[1] for e in LOCAL_EDGES])
    a = tets[:, li]
    b = tets[:, lj]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    keys = lo * np.int64(n_vertices) + hi
    uniq, inv = np.unique(keys.ravel(), return_inverse=True)
    edges = np.stack([uniq // n_vertices, uniq % n_vertices], axis=1)
    tet_edges = inv.reshape(tets.shape[0], 6)
    signs = np.where(a < b, 1, -1).astype(np.int8)
    return edges, tet_edges, signs


def edge_ids(edges: np.ndarray, pairs: np.ndarray, n_vertices: int) -> np.ndarray:
    """(lo, hi) 对 -> 全局边号；要求每一对都存在"""
    pairs = np.sort(np.asarray(pairs, dtype=np.int64), axis=-1)
    keys = pairs[..., 0] * np.int64(n_vertices) + pairs[..., 1]
    table = edges[:, 0] * np.int64(n_vertices) + edges[:, 1]
    pos = np.searchsorted(table, keys)
    pos = np.clip(pos, 0, len(table) - 1)
    if not np.all(table[pos] == keys):
        raise MeshValidationError("edge lookup failed: pair not in edge table")
    return pos


# ---------- 主构造 ----------
def build_mesh(
    vertices,
    tets,
    face_tags: Optional[Dict[Tuple[int, int, int], int]] = None,
    name: str = "mesh",
    expect_ball: bool = False,
) -> TetMesh:
    """
    由顶点与四面体构造 TetMesh：
    1) 负体积的单元交换最后两个顶点；
    2) 体积 < 1e-14 * h^3 的退化单元直接拒绝；
    3) 编号边、找出边界面并定向外法向；
    4) 校验全部不变量。
    face_tags 以排序后的三元组为键（如 Gmsh 物理组）。
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    tets = np.array(tets, dtype=np.int64, copy=True)
    if tets.size == 0:
        raise NoTetrahedraError()
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshValidationError(f"vertices must have shape (V, 3), got {vertices.shape}")
    if tets.ndim != 2 or tets.shape[1] != 4:
        raise MeshValidationError(f"tets must have shape (T, 4), got {tets.shape}")
    nv = vertices.shape[0]
    if tets.min() < 0 or tets.max() >= nv:
        raise MeshValidationError("tet references a vertex id out of range")

    vol = signed_volumes(vertices, tets)
    h = _max_edge_lengths(vertices, tets)
    bad = np.abs(vol) < DEGENERATE_VOLUME_FACTOR * h ** 3
    if bad.any():
        raise DegenerateElementError(f"{int(bad.sum())} degenerate tets (first: {int(np.flatnonzero(bad)[0])})")
    neg = vol < 0
    if neg.any():
        # ★ 方向修正：交换 2/3 号顶点
        tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()
        log.debug("reoriented %d tets", int(neg.sum()))

    edges, tet_edges, signs = index_edges(tets, nv)

    # ---- 面 ----
    lf = np.array(LOCAL_FACES)
    faces = tets[:, lf]                                   # (T, 4, 3)
    fkeys = np.sort(faces, axis=2).reshape(-1, 3)
    uniq_faces, inv, counts = np.unique(fkeys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if (counts > 2).any():
        raise NonConformingMeshError(f"{int((counts > 2).sum())} faces shared by more than 2 tets")

    bmask = counts[inv] == 1                              # 每个 (tet, 局部面) 是否在边界上
    flat = np.flatnonzero(bmask)
    owner = flat // 4
    local = flat % 4
    bfaces = faces[owner, local].copy()                   # (F_b, 3)
    p = vertices[bfaces]
    nrm = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    opposite = vertices[tets[owner, local]]
    inward = (nrm * (opposite - p.mean(axis=1))).sum(axis=1) > 0
    if inward.any():
        bfaces[inward, 1], bfaces[inward, 2] = bfaces[inward, 2].copy(), bfaces[inward, 1].copy()
        nrm[inward] *= -1.0

    # 确定性顺序：按排序后的顶点三元组
    order = np.lexsort(np.sort(bfaces, axis=1).T[::-1])
    bfaces = bfaces[order]
    nrm = nrm[order]

    tags = np.zeros(len(bfaces), dtype=np.int64)
    if face_tags:
        for i, f in enumerate(np.sort(bfaces, axis=1)):
            tags[i] = face_tags.get((int(f[0]), int(f[1]), int(f[2])), 0)

    bverts = np.zeros(nv, dtype=bool)
    bverts[bfaces.ravel()] = True
    bedges = np.zeros(len(edges), dtype=bool)
    if len(bfaces):
        pairs = np.concatenate([bfaces[:, [0, 1]], bfaces[:, [1, 2]], bfaces[:, [0, 2]]])
        bedges[edge_ids(edges, pairs, nv)] = True

    mesh = TetMesh(
        vertices=vertices, tets=tets, edges=edges, tet_edges=tet_edges, tet_edge_signs=signs,
        boundary_faces=bfaces, boundary_normals=nrm, boundary_tags=tags,
        boundary_vertex_flags=bverts, boundary_edge_flags=bedges,
        n_faces=int(len(uniq_faces)), name=name,
    )
    check_mesh(mesh, expect_ball=expect_ball)
    return mesh


def check_mesh(mesh: TetMesh, expect_ball: bool = False) -> None:
    """断言 TetMesh 的全部不变量；失败抛 MeshValidationError"""
    if (mesh.volumes <= 0).any():
        raise MeshValidationError("tet with non-positive signed volume")
    e = mesh.edges
    if (e[:, 0] >= e[:, 1]).any():
        raise MeshValidationError("edge with lo >= hi")
    if len(e) > 1:
        d = np.diff(e, axis=0)
        if not np.all((d[:, 0] > 0) | ((d[:, 0] == 0) & (d[:, 1] > 0))):
            raise MeshValidationError("edge list not strictly lexicographically sorted")
    lf = np.array(LOCAL_FACES)
    fkeys = np.sort(mesh.tets[:, lf], axis=2).reshape(-1, 3)
    uniq, first, counts = np.unique(fkeys, axis=0, return_index=True, return_counts=True)
    if (counts > 2).any():
        raise NonConformingMeshError("face shared by more than 2 tets")
    if int((counts == 1).sum()) != mesh.n_boundary_faces:
        raise MeshValidationError("boundary face count mismatch")
    if mesh.n_faces != len(uniq):
        raise MeshValidationError("face count mismatch")
    if mesh.n_boundary_faces:
        norms = np.linalg.norm(mesh.boundary_normals, axis=1)
        if np.abs(norms - 1.0).max() > NORMAL_TOL:
            raise MeshValidationError("boundary normal not of unit length")
        # 边界面与 unique 结果同为字典序，可逐一对应
        if not np.array_equal(np.sort(mesh.boundary_faces, axis=1), uniq[counts == 1]):
            raise MeshValidationError("boundary faces do not match the tet faces")
        idx = first[counts == 1]
        opp = mesh.vertices[mesh.tets[idx // 4, idx % 4]]
        cen = mesh.vertices[mesh.boundary_faces].mean(axis=1)
        if ((mesh.boundary_normals * (opp - cen)).sum(axis=1) >= 0).any():
            raise MeshValidationError("boundary normal points into the domain")
    if expect_ball and mesh.euler_characteristic != 1:
        raise MeshValidationError(f"Euler characteristic {mesh.euler_characteristic} != 1 for a ball")


# ---------- Kuhn 剖分 ----------
def _kuhn_cells(lengths: Sequence[float], counts: Sequence[int], keep=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    规则格子 -> Kuhn 6 四面体剖分。所有格子沿同一主对角线切分，
    因此 (nx, ny, nz) 加倍得到嵌套加密。keep(centers) 返回保留格子的掩码。
    """
    nx, ny, nz = counts
    a, b, c = lengths
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    zs = np.linspace(0.0, c, nz + 1)
    # x 变化最快
    Z, Y, X = np.meshgrid(zs, ys, xs, indexing="ij")
    vertices = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    K, J, I = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    if keep is not None:
        centers = np.stack([(I + 0.5) * a / nx, (J + 0.5) * b / ny, (K + 0.5) * c / nz], axis=1)
        m = np.asarray(keep(centers), dtype=bool)
        I, J, K = I[m], J[m], K[m]

    tets = []
    for perm in _KUHN_PERMS:
        step = np.zeros((4, 3), dtype=np.int64)
        for s in range(1, 4):
            step[s] = step[s - 1]
            step[s, perm[s - 1]] += 1
        tets.append(np.stack([vid(I + d[0], J + d[1], K + d[2]) for d in step], axis=1))
    # 逐格子排列：格子 g 的 6 个四面体相邻
    tets = np.stack(tets, axis=1).reshape(-1, 4)
    return vertices, tets


def _compact(vertices: np.ndarray, tets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    used, inv = np.unique(tets.ravel(), return_inverse=True)
    return vertices[used], inv.reshape(tets.shape)


def _plane_tags(mesh: TetMesh) -> np.ndarray:
    """长方体类夹具的区域号：按 boundary_planes 的顺序编号 1.."""
    tags = np.zeros(mesh.n_boundary_faces, dtype=np.int64)
    for k, plane in enumerate(boundary_planes(mesh), start=1):
        tags[plane.faces] = k
    return tags


def build_box_mesh(spec: BoxSpec) -> TetMesh:
    """
    Kuhn/Freudenthal 剖分：(nx+1)(ny+1)(nz+1) 个顶点，6*nx*ny*nz 个四面体。
    区域号：x=0 ->1, x=a ->2, y=0 ->3, y=b ->4, z=0 ->5, z=c ->6。
    """
    if not isinstance(spec, BoxSpec):
        raise InvalidSpecError(f"expected BoxSpec, got {type(spec).__name__}")
    vertices, tets = _kuhn_cells((spec.a, spec.b, spec.c), (spec.nx, spec.ny, spec.nz))
    mesh = build_mesh(vertices, tets, name=spec.descriptor, expect_ball=True)
    nrm = mesh.boundary_normals
    axis = np.abs(nrm).argmax(axis=1)
    tags = 2 * axis + 1 + (nrm[np.arange(len(nrm)), axis] > 0)
    return replace(mesh, boundary_tags=tags.astype(np.int64))


FIXTURES = ("box", "lshape", "fichera")


def build_fixture_mesh(name: str, n: int) -> TetMesh:
    """
    内置夹具（n 为每单位长度的格子数）：
    - box:     (0,pi)^3，每边 n 格
    - lshape:  [0,2]^2 x [0,1] 去掉 [1,2]^2 x [0,1]（非凸，重入棱）
    - fichera: [0,2]^3 去掉 [1,2]^3（非凸，重入角）
    """
    if n < 1:
        raise InvalidSpecError("fixture refinement n must be >= 1")
    if name == "box":
        return build_box_mesh(BoxSpec.cube(np.pi, n))
    if name == "lshape":
        vertices, tets = _kuhn_cells((2.0, 2.0, 1.0), (2 * n, 2 * n, n),
                                     keep=lambda c: ~((c[:, 0] > 1.0) & (c[:, 1] > 1.0)))
    elif name == "fichera":
        vertices, tets = _kuhn_cells((2.0, 2.0, 2.0), (2 * n, 2 * n, 2 * n),
                                     keep=lambda c: ~((c[:, 0] > 1.0) & (c[:, 1] > 1.0) & (c[:, 2] > 1.0)))
    else:
        raise InvalidSpecError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    vertices, tets = _compact(vertices, tets)
    mesh = build_mesh(vertices, tets, name=f"{name}(n={n})", expect_ball=True)
    return replace(mesh, boundary_tags=_plane_tags(mesh))


# ---------- 边界平面 / 凸性 ----------
def boundary_planes(mesh: TetMesh) -> List[Plane]:
    """把边界面按 (法向, 偏移) 归并成平面；顺序由首个出现的面决定（确定性）"""
    nrm = mesh.boundary_normals
    cen = mesh.vertices[mesh.boundary_faces].mean(axis=1)
    off = (nrm * cen).sum(axis=1)
    scale = max(1.0, float(np.abs(mesh.vertices).max()))
    left = np.ones(len(nrm), dtype=bool)
    planes: List[Plane] = []
    while left.any():
        i = int(np.flatnonzero(left)[0])
        same = left & (np.abs(nrm - nrm[i]).max(axis=1) < PLANE_TOL * 1e3) \
                    & (np.abs(off - off[i]) < PLANE_TOL * scale)
        planes.append(Plane(normal=nrm[i].copy(), offset=float(off[i]), faces=np.flatnonzero(same)))
        left &= ~same
    return planes


def vertex_planes(mesh: TetMesh, planes: Optional[List[Plane]] = None) -> List[List[int]]:
    """每个顶点所在的边界平面编号列表（内部顶点为空）"""
    planes = boundary_planes(mesh) if planes is None else planes
    out: List[List[int]] = [[] for _ in range(mesh.n_vertices)]
    for k, plane in enumerate(planes):
        for v in np.unique(mesh.boundary_faces[plane.faces].ravel()):
            out[int(v)].append(k)
    return out


def is_convex(mesh: TetMesh, planes: Optional[List[Plane]] = None) -> bool:
    """多面体凸 <=> 所有顶点都在每个边界平面的内侧"""
    planes = boundary_planes(mesh) if planes is None else planes
    scale = max(1.0, float(np.abs(mesh.vertices).max()))
    for plane in planes:
        if ((mesh.vertices @ plane.normal) - plane.offset).max() > PLANE_TOL * scale:
            return False
    return True


# ---------- JSON 序列化 ----------
def mesh_to_dict(mesh: TetMesh) -> dict:
    return {
        "name": mesh.name,
        "vertices": mesh.vertices.tolist(),
        "tets": mesh.tets.tolist(),
        "boundary_faces": [
            {"vertices": list(f), "normal": list(nrm), "tag": tag}
            for f, nrm, tag in mesh.boundary_face_records()
        ],
    }


def mesh_from_dict(data: dict) -> TetMesh:
    face_tags = {
        tuple(sorted(int(v) for v in f["vertices"])): int(f.get("tag", 0))
        for f in data.get("boundary_faces", [])
    }
    return build_mesh(data["vertices"], data["tets"], face_tags=face_tags, name=data.get("name", "mesh"))


def dumps_mesh(mesh: TetMesh, extra: Optional[dict] = None) -> str:
    data = mesh_to_dict(mesh)
    if extra:
        data.update(extra)
    return json.dumps(data, separators=(",", ":"))


def save_mesh_json(mesh: TetMesh, path, extra: Optional[dict] = None) -> Path:
    """extra 中的键（如运行配置）并入顶层，读取时忽略"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_mesh(mesh, extra), encoding="utf-8")
    return path


def load_mesh_json(path) -> TetMesh:
    return mesh_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
