import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from curlspec.elements import (
    barycentric_gradients, barycentric_gradients_direct, lagrange_local, local_gradient_embedding,
    monomial_integral, nedelec_batch, nedelec_local, quadrature, vector_p1_batch,
)
from curlspec.errors import DegenerateElementError, QuadratureError


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_quadrature_rule_basics(degree):
    q = quadrature(degree)
    assert q.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert (q.weights > 0).all()
    assert_allclose(q.points.sum(axis=1), 1.0, atol=1e-14)
    assert (q.points >= -1e-14).all()


@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_quadrature_exact_on_monomials(degree):
    q = quadrature(degree)
    for a, b, c, d in itertools.product(range(degree + 1), repeat=4):
        if a + b + c + d > degree:
            continue
        vals = q.points[:, 0] ** a * q.points[:, 1] ** b * q.points[:, 2] ** c * q.points[:, 3] ** d
        assert q.integrate(vals, 2.5) == pytest.approx(monomial_integral(a, b, c, d, 2.5), rel=1e-12)


def test_unsupported_degree():
    with pytest.raises(QuadratureError):
        quadrature(5)
    with pytest.raises(QuadratureError):
        quadrature(0)


def test_barycentric_gradients(skew_tet):
    grads, vol = barycentric_gradients(skew_tet)
    g = grads[0]
    assert_allclose(g.sum(axis=0), 0.0, atol=1e-13)
    # ∇λ_i · (x_j − x_0) = δ_ij − δ_i0
    for i in range(4):
        for j in range(1, 4):
            expect = (1.0 if i == j else 0.0) - (1.0 if i == 0 else 0.0)
            assert g[i] @ (skew_tet[j] - skew_tet[0]) == pytest.approx(expect, abs=1e-13)
    g2, vol2 = barycentric_gradients_direct(skew_tet)
    assert_allclose(g2[0], g, atol=1e-12)
    assert vol[0] == pytest.approx(vol2[0])


def test_degenerate_local_tet():
    flat = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]])
    with pytest.raises(DegenerateElementError):
        barycentric_gradients(flat)


@pytest.mark.parametrize("order,n", [(1, 4), (2, 10)])
def test_lagrange_local(skew_tet, order, n):
    lm = lagrange_local(skew_tet, order)
    _, vol = barycentric_gradients(skew_tet)
    assert lm.n == n
    assert_allclose(lm.stiffness, lm.stiffness.T, atol=1e-13)
    assert_allclose(lm.mass, lm.mass.T, atol=1e-14)
    # 常数在核中，且质量矩阵对常数积分给出体积
    assert_allclose(lm.stiffness.sum(axis=1), 0.0, atol=1e-12)
    assert lm.mass.sum() == pytest.approx(vol[0], rel=1e-12)
    assert np.linalg.eigvalsh(lm.mass).min() > 0


def test_p1_reference_values(unit_tet):
    lm = lagrange_local(unit_tet, 1)
    assert lm.mass[0, 0] == pytest.approx(1.0 / 60.0)
    assert lm.mass[0, 1] == pytest.approx(1.0 / 120.0)
    assert lm.stiffness[1, 1] == pytest.approx(1.0 / 6.0)
    assert lm.stiffness[0, 0] == pytest.approx(0.5)


def test_p2_reproduces_quadratic_energy(skew_tet):
    # u = x²：节点插值精确，∫|∇u|² = ∫ 4x²
    lm = lagrange_local(skew_tet, 2)
    nodes = list(skew_tet) + [(skew_tet[i] + skew_tet[j]) / 2.0 for i, j in
                              ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))]
    u = np.array([p[0] ** 2 for p in nodes])
    q = quadrature(4)
    pts = q.points @ skew_tet
    _, vol = barycentric_gradients(skew_tet)
    exact = q.integrate(4.0 * pts[:, 0] ** 2, vol[0])
    assert u @ lm.stiffness @ u == pytest.approx(exact, rel=1e-12)


def test_nedelec_kernel_contains_gradients(skew_tet):
    signs = np.array([1, -1, 1, 1, -1, 1])
    lm = nedelec_local(skew_tet, signs)
    G = local_gradient_embedding(signs)
    assert_allclose(lm.stiffness @ G, 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(lm.mass).min() > 0
    assert np.linalg.matrix_rank(lm.stiffness, tol=1e-10) == 3


def test_nedelec_sign_flip(skew_tet):
    K0, M0 = nedelec_batch(skew_tet[None])
    s = np.array([[1, -1, 1, -1, 1, 1]])
    K1, M1 = nedelec_batch(skew_tet[None], s)
    ss = np.outer(s[0], s[0])
    assert_allclose(K1[0], K0[0] * ss)
    assert_allclose(M1[0], M0[0] * ss)


def test_vector_p1_local(skew_tet):
    K, M = vector_p1_batch(skew_tet[None])
    K, M = K[0], M[0]
    assert K.shape == (12, 12)
    assert_allclose(K, K.T, atol=1e-12)
    # 常向量场：div = curl = 0
    for c in range(3):
        u = np.zeros(12)
        u[c::3] = 1.0
        assert_allclose(K @ u, 0.0, atol=1e-12)
    _, vol = barycentric_gradients(skew_tet)
    assert M.sum() == pytest.approx(3.0 * vol[0], rel=1e-12)
    assert np.linalg.eigvalsh(K).min() > -1e-12


def test_vector_p1_energy_is_div_plus_curl(skew_tet):
    # 线性场 u = A x：div = tr A，curl 由 A 的反对称部分给出
    A = np.array([[0.3, -1.2, 0.5], [0.7, 0.1, -0.4], [0.2, 0.9, -0.6]])
    u = (skew_tet @ A.T).ravel()
    K, _ = vector_p1_batch(skew_tet[None])
    _, vol = barycentric_gradients(skew_tet)
    curl = np.array([A[2, 1] - A[1, 2], A[0, 2] - A[2, 0], A[1, 0] - A[0, 1]])
    expect = vol[0] * (np.trace(A) ** 2 + curl @ curl)
    assert u @ K[0] @ u == pytest.approx(expect, rel=1e-12)


def test_degree3_rule_misses_quartic():
    q = quadrature(3)
    vals = q.points[:, 0] ** 4
    assert abs(q.integrate(vals, 1.0) - monomial_integral(4, 0, 0, 0, 1.0)) > 1e-6


def _random_tets(count, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = rng.uniform(-1.0, 1.0, size=(4, 3))
        if abs(np.linalg.det(p[1:] - p[0])) > 0.05:
            out.append(p)
    return np.array(out)


def test_nedelec_kernel_on_random_tets():
    tets = _random_tets(100)
    K, _ = nedelec_batch(tets)
    G = local_gradient_embedding()
    scale = np.abs(K).max(axis=(1, 2))
    assert (np.abs(K @ G).max(axis=(1, 2)) <= 1e-13 * scale).all()


def test_gradients_pushforward_matches_direct():
    tets = _random_tets(50, seed=5)
    g1, v1 = barycentric_gradients(tets)
    g2, v2 = barycentric_gradients_direct(tets)
    assert_allclose(g1, g2, rtol=1e-12, atol=1e-12)
    assert_allclose(v1, v2, rtol=1e-12)
