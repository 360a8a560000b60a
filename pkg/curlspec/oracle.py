# curlspec/oracle.py
"""
长方体 (0,a)x(0,b)x(0,c) 的解析谱：Dirichlet / Neumann Laplace 与 Maxwell 腔模。
特征值按重数重复列出，下标运算与“计重数”的约定一致。

值 = π²(l²/a² + m²/b² + n²/c²)：
- Dirichlet: l, m, n >= 1
- Neumann:   l, m, n >= 0
- Maxwell:   至多一个下标为 0 且不全为 0；三个都为正时重数 2，否则 1
- TE: n >= 1, (l, m) != (0, 0)；TM: l, m >= 1, n >= 0（两者合并应与 Maxwell 相同）
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import CLUSTER_GAP
from .eigensolve import Spectrum
from .errors import SpectrumLengthError
from .report import InterlaceRecord, InterlaceReport


class ModeFamily(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    MAXWELL = "maxwell"
    TE = "te"
    TM = "tm"


def _admissible(l, m, n, family: ModeFamily):
    l, m, n = np.asarray(l), np.asarray(m), np.asarray(n)
    zeros = (l == 0).astype(int) + (m == 0) + (n == 0)
    if family is ModeFamily.DIRICHLET:
        return zeros == 0
    if family is ModeFamily.NEUMANN:
        return np.ones_like(zeros, dtype=bool)
    if family is ModeFamily.MAXWELL:
        return zeros <= 1
    if family is ModeFamily.TE:
        return (n >= 1) & ((l > 0) | (m > 0))
    return (l >= 1) & (m >= 1)


def _multiplicity(l, m, n, family: ModeFamily):
    if family is ModeFamily.MAXWELL:
        return np.where((np.asarray(l) > 0) & (np.asarray(m) > 0) & (np.asarray(n) > 0), 2, 1)
    return np.ones(np.shape(l), dtype=int)


@dataclass(frozen=True)
class ModeIndex:
    l: int
    m: int
    n: int
    family: ModeFamily

    def __post_init__(self):
        if min(self.l, self.m, self.n) < 0:
            raise ValueError(f"mode indices must be non-negative: {(self.l, self.m, self.n)}")
        if not bool(_admissible(self.l, self.m, self.n, self.family)):
            raise ValueError(f"({self.l},{self.m},{self.n}) is not an admissible {self.family.value} mode")

    @property
    def multiplicity(self) -> int:
        return int(_multiplicity(self.l, self.m, self.n, self.family))

    def value(self, a: float, b: float, c: float) -> float:
        return float(np.pi ** 2 * (self.l ** 2 / a ** 2 + self.m ** 2 / b ** 2 + self.n ** 2 / c ** 2))


def index_bounds(a: float, b: float, c: float, ceiling: float) -> Tuple[int, int, int]:
    """值 <= ceiling 的下标上界：l <= a·sqrt(V)/π"""
    r = np.sqrt(max(ceiling, 0.0)) / np.pi
    return tuple(int(np.floor(s * r * (1.0 + 1e-12))) for s in (a, b, c))


def _check_sides(a, b, c):
    if min(a, b, c) <= 0:
        raise ValueError(f"box sides must be positive, got {(a, b, c)}")


def enumerate_modes(a: float, b: float, c: float, ceiling: float, family) -> List[Tuple[float, ModeIndex]]:
    """所有值 <= ceiling 的可容许模态，按 (值, l, m, n) 排序；等边时用整数键精确排序"""
    family = ModeFamily(family)
    _check_sides(a, b, c)
    L, M, N = index_bounds(a, b, c, ceiling)
    I, J, K = np.meshgrid(np.arange(L + 1), np.arange(M + 1), np.arange(N + 1), indexing="ij")
    I, J, K = I.ravel(), J.ravel(), K.ravel()
    keep = _admissible(I, J, K, family)
    I, J, K = I[keep], J[keep], K[keep]
    if a == b == c:
        q = I * I + J * J + K * K
        vals = q * (np.pi / a) ** 2
        order = np.lexsort((K, J, I, q))
    else:
        vals = np.pi ** 2 * (I ** 2 / a ** 2 + J ** 2 / b ** 2 + K ** 2 / c ** 2)
        order = np.lexsort((K, J, I, vals))
    inside = vals[order] <= ceiling * (1.0 + 1e-12)
    order = order[inside]
    return [(float(vals[i]), ModeIndex(int(I[i]), int(J[i]), int(K[i]), family)) for i in order]


def box_spectrum(a: float, b: float, c: float, count: int, family) -> np.ndarray:
    """前 count 个值（按重数重复，升序）；上界不断加倍直到覆盖 count 个"""
    family = ModeFamily(family)
    _check_sides(a, b, c)
    if count < 1:
        raise ValueError("count must be >= 1")
    ceiling = np.pi ** 2 * 3.0 / min(a, b, c) ** 2
    while True:
        modes = enumerate_modes(a, b, c, ceiling, family)
        total = sum(mi.multiplicity for _, mi in modes)
        if total >= count:
            break
        ceiling *= 2.0
    vals = np.repeat([v for v, _ in modes], [mi.multiplicity for _, mi in modes])
    return vals[:count]


def box_dirichlet_spectrum(a: float, b: float, c: float, count: int) -> np.ndarray:
    return box_spectrum(a, b, c, count, ModeFamily.DIRICHLET)


def box_neumann_spectrum(a: float, b: float, c: float, count: int) -> np.ndarray:
    return box_spectrum(a, b, c, count, ModeFamily.NEUMANN)


def box_maxwell_spectrum(a: float, b: float, c: float, count: int) -> np.ndarray:
    return box_spectrum(a, b, c, count, ModeFamily.MAXWELL)


def box_te_tm_spectrum(a: float, b: float, c: float, count: int) -> np.ndarray:
    """TE 与 TM 分别枚举后合并（Maxwell 重数规则的独立对照）"""
    te = box_spectrum(a, b, c, count, ModeFamily.TE)
    tm = box_spectrum(a, b, c, count, ModeFamily.TM)
    return np.sort(np.concatenate([te, tm]), kind="stable")[:count]


def cube_integer_spectrum(count: int, family) -> List[int]:
    """π-立方体上的精确整数谱 l²+m²+n²"""
    vals = box_spectrum(np.pi, np.pi, np.pi, count, family)
    return [int(round(v)) for v in vals]


def oracle_spectrum(family, a: float, b: float, c: float, count: int) -> Spectrum:
    family = ModeFamily(family)
    vals = box_spectrum(a, b, c, count, family)
    return Spectrum.from_values(f"oracle:{family.value}", vals, mesh=f"box({a:.6g},{b:.6g},{c:.6g})")


# ---------- 计数 ----------
def counting_function(values: Sequence[float], ceiling: float) -> int:
    return int(np.searchsorted(np.asarray(values), ceiling * (1.0 + 1e-12), side="right"))


def weyl_estimate(ceiling: float, volume: float) -> float:
    """Dirichlet 计数函数主项 vol·V^{3/2} / (6π²)"""
    return volume * ceiling ** 1.5 / (6.0 * np.pi ** 2)


def union_spectrum(dirichlet: Sequence[float], maxwell: Sequence[float]) -> np.ndarray:
    """B 的谱：Dirichlet 与 Maxwell 的有序并（按重数）"""
    return np.sort(np.concatenate([np.asarray(dirichlet, float), np.asarray(maxwell, float)]), kind="stable")


def _multiplicity_in(values: np.ndarray, x: float, gap: float = CLUSTER_GAP) -> int:
    return int((np.abs(values - x) <= gap * max(abs(x), 1e-300)).sum())


def union_index_check(dirichlet: Sequence[float], maxwell: Sequence[float], kmax: int) -> List[dict]:
    """
    η 为并谱，m_k 为 λ_k 在 Dirichlet 谱中的重数：η_{3k+m_k} <= λ_k（1 起）。
    """
    lam = np.asarray(dirichlet, float)
    eta = union_spectrum(dirichlet, maxwell)
    if len(lam) < kmax:
        raise SpectrumLengthError(f"need {kmax} Dirichlet values, got {len(lam)}")
    out = []
    for k in range(1, kmax + 1):
        lk = float(lam[k - 1])
        mk = _multiplicity_in(lam, lk)
        idx = 3 * k + mk
        if idx > len(eta):
            raise SpectrumLengthError(f"need {idx} union values for k={k}, got {len(eta)}")
        e = float(eta[idx - 1])
        out.append({"k": k, "m_k": mk, "index": idx, "eta": e, "lambda_k": lk,
                    "margin": lk - e, "verdict": bool(e <= lk)})
    return out


def convex_neumann_curl_check(neumann: Sequence[float], maxwell: Sequence[float], tol: float = 0.0):
    """凸域上的经典界 μ₂ <= α₁；返回 (μ₂, α₁, holds)"""
    if len(neumann) < 2 or len(maxwell) < 1:
        raise SpectrumLengthError("need at least 2 Neumann and 1 Maxwell values")
    mu2, a1 = float(neumann[1]), float(maxwell[0])
    return mu2, a1, bool(mu2 <= a1 + tol)


# ---------- 交错检查 ----------
def interlace_check(
    alpha: Sequence[float],
    lam: Sequence[float],
    kmax: int,
    tol: Union[float, Sequence[float]] = 0.0,
    resolved: Optional[Sequence[bool]] = None,
    domain: str = "",
) -> InterlaceReport:
    """
    逐 k 比较 α_{2k+1} 与 λ_k（1 起，计重数）：margin = λ_k − α_{2k+1}，
    margin >= −tol 通过；margin > tol 记为 strict（只报告）。
    resolved[k-1] 为 False 的条目即使数值通过也判为失败。
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if kmax < 1:
        raise SpectrumLengthError("kmax must be >= 1")
    if len(alpha) < 2 * kmax + 1:
        raise SpectrumLengthError(f"alpha needs {2 * kmax + 1} values, got {len(alpha)}")
    if len(lam) < kmax:
        raise SpectrumLengthError(f"lambda needs {kmax} values, got {len(lam)}")
    tols = np.broadcast_to(np.asarray(tol, dtype=np.float64), (kmax,)) if np.ndim(tol) == 0 \
        else np.asarray(tol, dtype=np.float64)[:kmax]
    records = []
    for k in range(1, kmax + 1):
        a, l_ = float(alpha[2 * k]), float(lam[k - 1])
        margin = l_ - a
        t = float(tols[k - 1])
        ok = True if resolved is None else bool(resolved[k - 1])
        records.append(InterlaceRecord(
            k=k, alpha_2k1=a, lambda_k=l_, margin=margin, tol=t,
            verdict=bool(ok and margin >= -t), strict=bool(margin > t), resolved=ok,
        ))
    return InterlaceReport(domain=domain, records=records, passed=all(r.verdict for r in records))
