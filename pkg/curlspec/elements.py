# curlspec/elements.py
"""
参考单元、求积与单元矩阵：P1/P2 Lagrange 标量元、最低阶第一类 Nédélec 棱元，
以及 B 形式用的向量 P1 元。

所有函数都是纯函数，可并发调用。*_batch 版本对 (T, 4, 3) 的顶点坐标整批计算，
单个四面体的接口（lagrange_local / nedelec_local）只是它们的薄包装。
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .config import DEGENERATE_VOLUME_FACTOR
from .errors import DegenerateElementError, QuadratureError
from .mesh import LOCAL_EDGES

# 参考四面体上重心坐标的梯度（行 = λ0..λ3）
REF_GRADS = np.array([[-1.0, -1.0, -1.0],
                      [1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0],
                      [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class QuadratureRule:
    """points 为重心坐标 (Q, 4)，weights 之和为 1（使用时乘以体积）"""
    degree: int
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray, volume: float = 1.0) -> float:
        return float(volume * (self.weights * values).sum())


@dataclass(frozen=True)
class LocalMatrices:
    stiffness: np.ndarray
    mass: np.ndarray

    @property
    def n(self) -> int:
        return int(self.stiffness.shape[0])


# ---------- 求积 ----------
def monomial_integral(a: int, b: int, c: int, d: int, volume: float = 1.0) -> float:
    """∫_T λ1^a λ2^b λ3^c λ4^d = a!b!c!d! · 6V / (a+b+c+d+3)!"""
    num = factorial(a) * factorial(b) * factorial(c) * factorial(d) * 6
    return volume * num / factorial(a + b + c + d + 3)


def _conical_rule(n: int):
    """Stroud 锥积公式：Gauss–Jacobi x Gauss–Jacobi x Gauss–Legendre，权全正"""
    x0, w0 = roots_jacobi(n, 2.0, 0.0)
    x1, w1 = roots_jacobi(n, 1.0, 0.0)
    x2, w2 = roots_legendre(n)
    u, wu = (x0 + 1.0) / 2.0, w0 / 8.0
    v, wv = (x1 + 1.0) / 2.0, w1 / 4.0
    t, wt = (x2 + 1.0) / 2.0, w2 / 2.0
    U, V, W = np.meshgrid(u, v, t, indexing="ij")
    WU, WV, WT = np.meshgrid(wu, wv, wt, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    z = (W * (1.0 - U) * (1.0 - V)).ravel()
    pts = np.stack([1.0 - x - y - z, x, y, z], axis=1)
    wts = 6.0 * (WU * WV * WT).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def quadrature(degree: int) -> QuadratureRule:
    """
    四面体求积（重心坐标，权和为 1）：
    1 -> 形心一点；2 -> 4 点；3 -> 4 顶点 + 4 面心（权 1/40, 9/40）；
    4 -> 27 点锥积公式。全部权为正。
    """
    if degree == 1:
        pts = np.full((1, 4), 0.25)
        wts = np.ones(1)
    elif degree == 2:
        a = (5.0 - np.sqrt(5.0)) / 20.0
        b = 1.0 - 3.0 * a
        pts = np.full((4, 4), a)
        np.fill_diagonal(pts, b)
        wts = np.full(4, 0.25)
    elif degree == 3:
        verts = np.eye(4)
        faces = (1.0 - np.eye(4)) / 3.0
        pts = np.vstack([verts, faces])
        wts = np.concatenate([np.full(4, 1.0 / 40.0), np.full(4, 9.0 / 40.0)])
    elif degree == 4:
        pts, wts = _conical_rule(3)
    else:
        raise QuadratureError(f"unsupported quadrature degree {degree} (1..4)")
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(degree=degree, points=pts, weights=wts)


# ---------- 几何 ----------
def _as_batch(coords) -> np.ndarray:
    p = np.asarray(coords, dtype=np.float64)
    if p.ndim == 2:
        p = p[None]
    if p.shape[1:] != (4, 3):
        raise ValueError(f"tet coordinates must have shape (4, 3) or (T, 4, 3), got {p.shape}")
    return p


def barycentric_gradients(coords):
    """
    参考单元映射：x = x0 + J ξ，∇λ = ∇̂λ · J^{-1}。
    返回 (grads (T,4,3), vol (T,))；退化单元抛 DegenerateElementError。
    """
    p = _as_batch(coords)
    J = np.transpose(p[:, 1:, :] - p[:, :1, :], (0, 2, 1))   # 列为棱向量
    det = np.linalg.det(J)
    h = np.zeros(len(p))
    for i, j in LOCAL_EDGES:
        h = np.maximum(h, np.linalg.norm(p[:, i] - p[:, j], axis=1))
    vol = det / 6.0
    if (np.abs(vol) < DEGENERATE_VOLUME_FACTOR * h ** 3).any():
        raise DegenerateElementError("degenerate tet in local matrix computation")
    grads = REF_GRADS[None] @ np.linalg.inv(J)
    return grads, np.abs(vol)


def barycentric_gradients_direct(coords):
    """直接公式：∇λ_i = 对面面积向量 / (3V)，朝向 i"""
    p = _as_batch(coords)
    grads = np.empty_like(p)
    for i in range(4):
        j, k, l = [m for m in range(4) if m != i]
        n = np.cross(p[:, k] - p[:, j], p[:, l] - p[:, j])
        s = np.sign(np.einsum("ti,ti->t", n, p[:, i] - p[:, j]))
        grads[:, i] = s[:, None] * n / np.einsum("ti,ti->t", n, s[:, None] * (p[:, i] - p[:, j]))[:, None]
    vol = np.abs(np.linalg.det(p[:, 1:, :] - p[:, :1, :])) / 6.0
    return grads, vol


# ---------- Lagrange ----------
def _p2_values(bary: np.ndarray) -> np.ndarray:
    """P2 基函数在求积点的值 (Q, 10)：4 个顶点函数 + 6 个棱函数"""
    vals = [bary[:, i] * (2.0 * bary[:, i] - 1.0) for i in range(4)]
    vals += [4.0 * bary[:, i] * bary[:, j] for i, j in LOCAL_EDGES]
    return np.stack(vals, axis=1)


def _p2_gradients(bary: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """P2 基函数梯度 (T, Q, 10, 3)"""
    lam = bary[None, :, :, None]                  # (1, Q, 4, 1)
    g = grads[:, None, :, :]                      # (T, 1, 4, 3)
    out = [(4.0 * lam[:, :, i] - 1.0) * g[:, :, i] for i in range(4)]
    out += [4.0 * (lam[:, :, j] * g[:, :, i] + lam[:, :, i] * g[:, :, j]) for i, j in LOCAL_EDGES]
    return np.stack(out, axis=2)


def lagrange_batch(coords, order: int = 1):
    """返回 (stiffness (T,n,n), mass (T,n,n))，n = 4 (P1) 或 10 (P2)"""
    grads, vol = barycentric_gradients(coords)
    if order == 1:
        K = vol[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
        M = vol[:, None, None] * ((np.ones((4, 4)) + np.eye(4)) / 20.0)[None]
        return K, M
    if order == 2:
        q2 = quadrature(2)
        dphi = _p2_gradients(q2.points, grads)
        K = vol[:, None, None] * np.einsum("q,tqik,tqjk->tij", q2.weights, dphi, dphi)
        q4 = quadrature(4)
        phi = _p2_values(q4.points)
        Mref = np.einsum("q,qi,qj->ij", q4.weights, phi, phi)
        M = vol[:, None, None] * Mref[None]
        return K, M
    raise ValueError(f"Lagrange order must be 1 or 2, got {order}")


def lagrange_local(coords, order: int = 1) -> LocalMatrices:
    K, M = lagrange_batch(coords, order)
    return LocalMatrices(stiffness=K[0], mass=M[0])


# ---------- Nédélec ----------
def nedelec_batch(coords, signs: Optional[np.ndarray] = None):
    """
    最低阶 Nédélec：w_ij = λi∇λj − λj∇λi，curl w_ij = 2∇λi×∇λj（常量）。
    旋度矩阵精确；质量矩阵用 2 阶求积（被积函数二次，精确）。
    signs (T,6) 为全局棱走向符号，行列同时乘以符号。
    """
    grads, vol = barycentric_gradients(coords)
    ii = [e[0] for e in LOCAL_EDGES]
    jj = [e[1] for e in LOCAL_EDGES]
    curls = 2.0 * np.cross(grads[:, ii], grads[:, jj])             # (T, 6, 3)
    K = vol[:, None, None] * np.einsum("tak,tbk->tab", curls, curls)

    q = quadrature(2)
    lam = q.points                                                   # (Q, 4)
    # w (T, Q, 6, 3)
    w = lam[None, :, ii, None] * grads[:, None, jj, :] - lam[None, :, jj, None] * grads[:, None, ii, :]
    M = vol[:, None, None] * np.einsum("q,tqak,tqbk->tab", q.weights, w, w)
    if signs is not None:
        s = np.asarray(signs, dtype=np.float64).reshape(-1, 6)
        ss = s[:, :, None] * s[:, None, :]
        K = K * ss
        M = M * ss
    return K, M


def nedelec_local(coords, signs: Optional[Sequence[int]] = None) -> LocalMatrices:
    K, M = nedelec_batch(coords, None if signs is None else np.asarray(signs)[None])
    return LocalMatrices(stiffness=K[0], mass=M[0])


def local_gradient_embedding(signs: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    局部梯度嵌入 (6, 4)：∇λ_p 在棱基下的系数，
    棱 (i, j) 进入 p (p == j) 为 +1，离开 p (p == i) 为 −1，再乘棱符号。
    """
    G = np.zeros((6, 4))
    for a, (i, j) in enumerate(LOCAL_EDGES):
        G[a, j] = 1.0
        G[a, i] = -1.0
    if signs is not None:
        G *= np.asarray(signs, dtype=np.float64)[:, None]
    return G


# ---------- 向量 P1（B 形式）----------
def vector_p1_batch(coords):
    """
    向量 P1 元，局部自由度 (顶点 i, 分量 c) -> 3i + c。
    sb(φ_i e_c, φ_j e_d) = ∫ ∂_c φ_i ∂_d φ_j + δ_cd ∇φ_i·∇φ_j − ∂_d φ_i ∂_c φ_j
    （div·div + curl·curl；(a×e_c)·(b×e_d) = δ_cd a·b − a_d b_c）。
    质量为 P1 质量 ⊗ I3。
    """
    grads, vol = barycentric_gradients(coords)
    T = len(vol)
    gg = np.einsum("tik,tjk->tij", grads, grads)                    # (T,4,4)
    div = np.einsum("tic,tjd->ticjd", grads, grads)                 # ∂_c φ_i ∂_d φ_j
    eye = np.eye(3)
    K = div + eye[None, None, :, None, :] * gg[:, :, None, :, None] - np.transpose(div, (0, 1, 4, 3, 2))
    K = vol[:, None, None] * K.reshape(T, 12, 12)
    Mp1 = (np.ones((4, 4)) + np.eye(4)) / 20.0
    M = vol[:, None, None] * np.kron(Mp1, eye)[None]
    return K, M
