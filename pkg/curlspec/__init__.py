# curlspec/__init__.py
"""四面体有限元谱计算：Dirichlet / Neumann Laplace、Maxwell 腔与 B 形式，以及交错不等式的校验"""
__version__ = "0.3.0"

from .assembly import OperatorKind, assemble, discrete_gradient, gradient_embedding  # noqa: E402
from .eigensolve import EigenPair, Spectrum, solve_lowest, solve_shift_invert  # noqa: E402
from .mesh import BoxSpec, TetMesh, build_box_mesh, build_fixture_mesh  # noqa: E402
from .oracle import box_dirichlet_spectrum, box_maxwell_spectrum, interlace_check  # noqa: E402

__all__ = [
    "__version__",
    "OperatorKind", "assemble", "discrete_gradient", "gradient_embedding",
    "EigenPair", "Spectrum", "solve_lowest", "solve_shift_invert",
    "BoxSpec", "TetMesh", "build_box_mesh", "build_fixture_mesh",
    "box_dirichlet_spectrum", "box_maxwell_spectrum", "interlace_check",
]
