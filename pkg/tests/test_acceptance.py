"""逐层加密的端到端验收；较慢，默认跳过（pytest -m slow）"""
import numpy as np
import pytest

from curlspec.assembly import assemble, gradient_embedding
from curlspec.eigensolve import Deflation, solve_dense
from curlspec.mesh import BoxSpec, build_box_mesh
from curlspec.oracle import box_dirichlet_spectrum, box_maxwell_spectrum
from curlspec.verify import (
    StudySpec, run_convergence_study, run_div_trace_study, run_interlace_study, run_trial_subspace_check,
    run_union_check, solve_operator, track_table,
)

pytestmark = pytest.mark.slow

LEVELS = [4, 8, 16]


def test_dirichlet_second_order_convergence():
    report = run_convergence_study(StudySpec(levels=LEVELS, nev=1, preconditioner="lu"), "dirichlet")
    rec = report.records[0]
    assert 1.8 <= rec["rate"] <= 2.2
    assert rec["extrapolated"] == pytest.approx(3.0, rel=5e-3)
    assert rec["error_finest"] > 0


def test_maxwell_clusters():
    results = []
    for n in LEVELS:
        mesh = build_box_mesh(BoxSpec.cube(np.pi, n))
        res = solve_operator(mesh, "curlcurl", 5, preconditioner="lu")
        # 梯度像满秩且在核里，补空间上最低值远离 0：核恰好是内部顶点数维
        G = gradient_embedding(mesh, curl_dofs=res.dofs)
        assert G.shape[1] == len(mesh.interior_vertices)
        Deflation(G, res.M)
        KG = res.K.matrix @ G
        assert (np.abs(KG.data).max() if KG.nnz else 0.0) <= 1e-11 * res.K.max_abs()
        assert res.spectrum.extra_kernel == 0
        assert res.spectrum.values[0] > 1.5
        results.append(res)
    table = track_table(results, 5, LEVELS)
    exact = box_maxwell_spectrum(np.pi, np.pi, np.pi, 5)
    assert table.extrapolated[:3] == pytest.approx(exact[:3], rel=1e-2)
    assert table.extrapolated[3:5] == pytest.approx(exact[3:5], rel=1.5e-2)


@pytest.mark.parametrize("n", [4, 8])
def test_undeflated_pencil_zero_modes_match_interior_vertices(n):
    mesh = build_box_mesh(BoxSpec.cube(np.pi, n))
    K, M, _ = assemble(mesh, "curlcurl")
    kernel = len(mesh.interior_vertices)
    values = np.array([p.value for p in solve_dense(K, M, kernel + 3)])
    assert int((np.abs(values) < 1e-8).sum()) == kernel
    assert values[kernel] > 1.5


def test_fem_interlace_matches_oracle_margins():
    report = run_interlace_study(StudySpec(levels=LEVELS, kmax=3, preconditioner="lu"))
    assert report.passed
    assert report.summary["kernel_dim"] == [27, 343, 3375]
    alpha = box_maxwell_spectrum(np.pi, np.pi, np.pi, 7)
    lam = box_dirichlet_spectrum(np.pi, np.pi, np.pi, 3)
    oracle_margins = [lam[k] - alpha[2 * k + 2] for k in range(3)]
    assert oracle_margins == pytest.approx([1.0, 3.0, 1.0])
    margins = [r.margin for r in report.records]
    assert all(m > 0 for m in margins)
    assert margins == pytest.approx(oracle_margins, rel=0.1)


def test_union_matches_bform():
    report = run_union_check(StudySpec(levels=LEVELS, nev=6, preconditioner="lu"))
    assert report.passed
    assert [r["verdict"] for r in report.records] == [True] * 6
    for r in report.records:
        assert r["eta_fem"] == pytest.approx(r["eta_oracle"], rel=0.02)
    assert report.summary["count_identity"]["holds"]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_trial_subspace_fine_mesh(k):
    mesh = build_box_mesh(BoxSpec.cube(np.pi, 8))
    report = run_trial_subspace_check(mesh, k, preconditioner="lu")
    s = report.summary
    assert report.passed
    assert s["q_max"] <= s["lambda_k"] * (1 + 1e-8)
    if k == 1:
        assert s["q_max"] == pytest.approx(s["lambda_k"], rel=1e-10)
    assert s["random_span_quotient"] >= s["eta1"]


def test_divergence_free_tracks_lose_interior_divergence():
    report = run_div_trace_study(StudySpec(levels=[4, 8], nev=3, preconditioner="lu", checks=["divtrace"]))
    tracks = report.summary["tracks"]
    # η ≈ 2 的三重簇全部来自 Maxwell 谱
    assert all(t["eta"][-1] == pytest.approx(2.0, rel=0.02) for t in tracks)
    assert all(t["interior_decreasing"] for t in tracks)
