# curlspec/readers/gmsh.py
"""
Gmsh MSH ASCII 读取（2.2 与 4.1 子集）：
节点、4 节点四面体（type 4）、3 节点三角形（type 2）以及三角形的物理组号。
二进制文件、其它版本一律拒绝。
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import GmshFormatError, NoTetrahedraError, NonConformingMeshError
from ..mesh import LOCAL_FACES, TetMesh, build_mesh
from .base import MeshReader

log = logging.getLogger(__name__)

TRI3 = 2
TET4 = 4
SUPPORTED_VERSIONS = ("2.2", "4.1")


def _sections(text: str) -> Dict[str, List[str]]:
    """$Name ... $EndName -> {Name: [行...]}；同名段取第一个"""
    out: Dict[str, List[str]] = {}
    cur = None
    buf: List[str] = []
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("$"):
            tag = line[1:]
            if cur is None:
                cur, buf = tag, []
            elif tag == "End" + cur:
                out.setdefault(cur, buf)
                cur = None
            else:
                raise GmshFormatError(f"unterminated section ${cur} (found {line})")
        elif cur is not None:
            buf.append(line)
    if cur is not None:
        raise GmshFormatError(f"unterminated section ${cur}")
    return out


def _header(sections: Dict[str, List[str]]) -> str:
    fmt = sections.get("MeshFormat")
    if not fmt:
        raise GmshFormatError("missing $MeshFormat section")
    parts = fmt[0].split()
    if len(parts) < 3:
        raise GmshFormatError(f"malformed $MeshFormat line: {fmt[0]!r}")
    version, file_type = parts[0], parts[1]
    if file_type != "0":
        raise GmshFormatError("binary MSH files are not supported")
    if version not in SUPPORTED_VERSIONS:
        raise GmshFormatError(f"unsupported MSH version {version} (supported: {', '.join(SUPPORTED_VERSIONS)})")
    return version


# ---------- 2.2 ----------
def _parse_v22(sections) -> Tuple[Dict[int, np.ndarray], List[List[int]], List[Tuple[List[int], int]]]:
    nodes: Dict[int, np.ndarray] = {}
    lines = sections.get("Nodes") or []
    if not lines:
        raise GmshFormatError("missing $Nodes section")
    try:
        n = int(lines[0].split()[0])
        for ln in lines[1:1 + n]:
            d = ln.split()
            nodes[int(d[0])] = np.array([float(x) for x in d[1:4]])
    except (ValueError, IndexError) as e:
        raise GmshFormatError(f"malformed $Nodes section: {e}")

    tets: List[List[int]] = []
    tris: List[Tuple[List[int], int]] = []
    lines = sections.get("Elements")
    if lines is None:
        raise GmshFormatError("missing $Elements section")
    try:
        m = int(lines[0].split()[0]) if lines else 0
        for ln in lines[1:1 + m]:
            d = [int(x) for x in ln.split()]
            etype, ntags = d[1], d[2]
            tags, conn = d[3:3 + ntags], d[3 + ntags:]
            if etype == TET4:
                tets.append(conn[:4])
            elif etype == TRI3:
                tris.append((conn[:3], tags[0] if tags else 0))
    except (ValueError, IndexError) as e:
        raise GmshFormatError(f"malformed $Elements section: {e}")
    return nodes, tets, tris


# ---------- 4.1 ----------
def _surface_physicals(sections) -> Dict[int, int]:
    """$Entities 中 surface tag -> 第一个物理组号"""
    lines = sections.get("Entities")
    if not lines:
        return {}
    tok = " ".join(lines).split()
    pos = 0

    def take(k=1):
        nonlocal pos
        vals = tok[pos:pos + k]
        pos += k
        return vals

    n_pts, n_cur, n_surf, _ = (int(x) for x in take(4))
    for _ in range(n_pts):
        take(4)
        nphys = int(take()[0])
        take(nphys)
    for _ in range(n_cur):
        take(7)
        nphys = int(take()[0])
        take(nphys)
        nb = int(take()[0])
        take(nb)
    out: Dict[int, int] = {}
    for _ in range(n_surf):
        head = take(7)
        nphys = int(take()[0])
        phys = [int(x) for x in take(nphys)]
        nb = int(take()[0])
        take(nb)
        out[int(head[0])] = phys[0] if phys else 0
    return out


def _parse_v41(sections):
    tok = " ".join(sections.get("Nodes") or []).split()
    if not tok:
        raise GmshFormatError("missing $Nodes section")
    nodes: Dict[int, np.ndarray] = {}
    try:
        pos = 0
        n_blocks = int(tok[0])
        pos = 4
        for _ in range(n_blocks):
            _dim, _etag, parametric, nin = (int(x) for x in tok[pos:pos + 4])
            pos += 4
            ids = [int(x) for x in tok[pos:pos + nin]]
            pos += nin
            width = 3 + (_dim if parametric else 0)
            for nid in ids:
                nodes[nid] = np.array([float(x) for x in tok[pos:pos + 3]])
                pos += width
    except (ValueError, IndexError) as e:
        raise GmshFormatError(f"malformed $Nodes section: {e}")

    phys = _surface_physicals(sections)
    if sections.get("Elements") is None:
        raise GmshFormatError("missing $Elements section")
    tok = " ".join(sections["Elements"]).split()
    tets: List[List[int]] = []
    tris: List[Tuple[List[int], int]] = []
    try:
        pos = 0
        n_blocks = int(tok[0]) if tok else 0
        pos = 4
        for _ in range(n_blocks):
            dim, etag, etype, nin = (int(x) for x in tok[pos:pos + 4])
            pos += 4
            npe = {TRI3: 3, TET4: 4}.get(etype)
            if npe is None:
                # 其它单元类型：按行跳过（行长未知，只能借助类型表）
                npe = _NODES_PER_TYPE.get(etype)
                if npe is None:
                    raise GmshFormatError(f"unsupported element type {etype} in 4.1 file")
                pos += nin * (1 + npe)
                continue
            for _ in range(nin):
                conn = [int(x) for x in tok[pos + 1:pos + 1 + npe]]
                pos += 1 + npe
                if etype == TET4:
                    tets.append(conn)
                else:
                    tris.append((conn, phys.get(etag, 0) if dim == 2 else 0))
    except (ValueError, IndexError) as e:
        raise GmshFormatError(f"malformed $Elements section: {e}")
    return nodes, tets, tris


# 点 / 线 / 四边形 / 六面体 / 棱柱 / 金字塔 / 二阶线 / 二阶三角形 / 二阶四面体
_NODES_PER_TYPE = {15: 1, 1: 2, 3: 4, 5: 8, 6: 6, 7: 5, 8: 3, 9: 6, 11: 10}


def read_gmsh(path) -> TetMesh:
    """
    读取 MSH 2.2 / 4.1 ASCII：
    - 只保留被四面体引用的节点（按节点号升序重新编号）；
    - 负体积四面体由 build_mesh 自动换向；
    - 三角形必须是某个四面体的面，否则视为悬挂面（NonConformingMeshError）；
    - 边界三角形的物理组号保留为区域号。
    """
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise GmshFormatError("binary MSH files are not supported")
    sections = _sections(text)
    version = _header(sections)
    nodes, tets, tris = _parse_v22(sections) if version == "2.2" else _parse_v41(sections)
    if not tets:
        raise NoTetrahedraError()

    tet_ids = np.array(tets, dtype=np.int64)
    used = np.unique(tet_ids)
    missing = [int(t) for t in used if int(t) not in nodes]
    if missing:
        raise GmshFormatError(f"tets reference undefined nodes, e.g. {missing[:3]}")
    remap = {int(t): i for i, t in enumerate(used)}
    vertices = np.array([nodes[int(t)] for t in used])
    tets_local = np.searchsorted(used, tet_ids)

    lf = np.array(LOCAL_FACES)
    all_faces = {tuple(f) for f in np.sort(tets_local[:, lf], axis=2).reshape(-1, 3).tolist()}
    face_tags: Dict[Tuple[int, int, int], int] = {}
    for conn, tag in tris:
        try:
            key = tuple(sorted(remap[c] for c in conn))
        except KeyError:
            raise NonConformingMeshError(f"dangling face {conn}: node not part of any tet")
        if key not in all_faces:
            raise NonConformingMeshError(f"dangling face {conn}: not a face of any tet")
        face_tags[key] = int(tag)

    log.info("read %s (MSH %s): %d nodes, %d tets, %d triangles", path.name, version, len(used), len(tets), len(tris))
    return build_mesh(vertices, tets_local, face_tags=face_tags, name=path.stem)


def write_gmsh(mesh: TetMesh, path, comment: Optional[str] = None) -> Path:
    """
    写 MSH 2.2 ASCII：边界三角形带区域号（物理组 = 几何实体 = tag），四面体物理组 1。
    comment（单行）写进 $Comments 段，读取时忽略。
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat"]
    if comment:
        out += ["$Comments", comment.replace("\n", " "), "$EndComments"]
    out += ["$Nodes", str(mesh.n_vertices)]
    out += [f"{i + 1} {x!r} {y!r} {z!r}" for i, (x, y, z) in enumerate(mesh.vertices.tolist())]
    out += ["$EndNodes", "$Elements", str(mesh.n_boundary_faces + mesh.n_tets)]
    eid = 0
    for f, tag in zip(mesh.boundary_faces.tolist(), mesh.boundary_tags.tolist()):
        eid += 1
        out.append(f"{eid} {TRI3} 2 {tag} {tag} {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    for t in mesh.tets.tolist():
        eid += 1
        out.append(f"{eid} {TET4} 2 1 1 {t[0] + 1} {t[1] + 1} {t[2] + 1} {t[3] + 1}")
    out.append("$EndElements")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


class GmshReader(MeshReader):
    name = "gmsh"
    suffixes = (".msh",)

    def read(self, path: Path) -> TetMesh:
        return read_gmsh(path)

    def write(self, mesh: TetMesh, path: Path) -> Path:
        return write_gmsh(mesh, path)
