# curlspec/errors.py
"""
异常层级。CLI 把 CurlSpecError（以及 pydantic 的 ValidationError）统一映射为退出码 2。
未收敛不是异常：在 EigenPair.converged 上逐个标记。
"""
from __future__ import annotations

from typing import Optional


class CurlSpecError(Exception):
    """所有库内错误的基类"""


# ---------- mesh ----------
class MeshError(CurlSpecError):
    pass


class InvalidSpecError(MeshError, ValueError):
    pass


class DegenerateElementError(MeshError):
    pass


class MeshValidationError(MeshError):
    pass


class NonConformingMeshError(MeshValidationError):
    pass


class NoTetrahedraError(MeshError):
    def __init__(self, msg: str = "no tetrahedra"):
        super().__init__(msg)


class GmshFormatError(CurlSpecError):
    pass


# ---------- elements ----------
class QuadratureError(CurlSpecError, ValueError):
    pass


# ---------- assembly ----------
class AssemblyError(CurlSpecError):
    pass


class NoFreeDofsError(AssemblyError):
    def __init__(self, msg: str = "no free dofs"):
        super().__init__(msg)


class NonConvexDomainError(AssemblyError):
    def __init__(self, msg: str = "BForm requires convex domain"):
        super().__init__(msg)


# ---------- eigensolve ----------
class SolverError(CurlSpecError):
    pass


class CholeskyError(SolverError):
    pass


class SingularShiftError(SolverError):
    """shift 恰好落在特征值上；hint 给出一个扰动后的 sigma"""

    def __init__(self, sigma: float, hint: Optional[float] = None):
        self.sigma = sigma
        self.hint = hint
        msg = f"K - sigma*M is singular at sigma={sigma!r}"
        if hint is not None:
            msg += f"; retry with sigma={hint!r}"
        super().__init__(msg)


class SpectrumLengthError(CurlSpecError, ValueError):
    pass
