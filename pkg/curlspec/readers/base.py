# curlspec/readers/base.py
from __future__ import annotations
from pathlib import Path
from typing import Protocol, Tuple

from ..mesh import TetMesh


class MeshReader(Protocol):
    """
    网格来源接口约定：按文件后缀认领，read 返回校验过不变量的 TetMesh。
    - suffixes: 认领的后缀（小写，含点）
    - read: 解析失败抛 GmshFormatError / MeshError 子类，不返回 None
    - write: 可选，把 TetMesh 写回同一格式
    """
    name: str
    suffixes: Tuple[str, ...]

    def read(self, path: Path) -> TetMesh:
        ...

    def write(self, mesh: TetMesh, path: Path) -> Path:
        ...
