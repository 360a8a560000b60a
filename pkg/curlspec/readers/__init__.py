# curlspec/readers/__init__.py
import logging
from pathlib import Path
from typing import List

from ..errors import GmshFormatError
from ..mesh import TetMesh
from .base import MeshReader
from .gmsh import GmshReader, read_gmsh, write_gmsh
from .jsonmesh import JSONMeshReader

log = logging.getLogger(__name__)


def get_readers() -> List[MeshReader]:
    """按顺序装载可用的网格来源"""
    return [GmshReader(), JSONMeshReader()]


def reader_for(path) -> MeshReader:
    suffix = Path(path).suffix.lower()
    for r in get_readers():
        if suffix in r.suffixes:
            return r
    raise GmshFormatError(f"no mesh reader for suffix {suffix!r} (known: .msh, .json)")


def read_mesh(path) -> TetMesh:
    r = reader_for(path)
    log.debug("reading %s via %s", path, r.name)
    return r.read(Path(path))


def write_mesh(mesh: TetMesh, path) -> Path:
    return reader_for(path).write(mesh, Path(path))


__all__ = ["MeshReader", "GmshReader", "JSONMeshReader", "get_readers", "reader_for",
           "read_mesh", "write_mesh", "read_gmsh", "write_gmsh"]
