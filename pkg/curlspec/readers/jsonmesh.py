# curlspec/readers/jsonmesh.py
from pathlib import Path

from ..mesh import TetMesh, load_mesh_json, save_mesh_json
from .base import MeshReader


class JSONMeshReader(MeshReader):
    """内部 JSON 格式：{vertices, tets, boundary_faces}"""
    name = "json"
    suffixes = (".json",)

    def read(self, path: Path) -> TetMesh:
        return load_mesh_json(path)

    def write(self, mesh: TetMesh, path: Path) -> Path:
        return save_mesh_json(mesh, path)
