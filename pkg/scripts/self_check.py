# scripts/self_check.py
import sys, traceback
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

def ok(msg):  print("✅", msg)
def warn(msg):print("⚠️ ", msg)
def err(msg): print("❌", msg)

def check_imports():
    try:
        import curlspec, curlspec.mesh, curlspec.assembly, curlspec.eigensolve, curlspec.verify
        ok(f"包路径与导入正常（curlspec {curlspec.__version__}）")
    except Exception as e:
        err(f"导入失败：{e}")
        traceback.print_exc()

def check_config():
    from curlspec import config
    must = ["DATA_DIR", "DB_PATH", "OUTPUT_DIR", "SOLVER_TOL", "MAX_ITER", "CLUSTER_GAP", "ASSEMBLY_CHUNK"]
    miss = [k for k in must if not hasattr(config, k)]
    if miss:
        err(f"config 缺少字段：{miss}")
    else:
        ok("config 字段完整")
    print("DATA_DIR =", config.DATA_DIR)

def check_db():
    from sqlalchemy import inspect as sa_inspect
    from curlspec.db import init_db, _engine
    from curlspec.config import DB_PATH
    init_db()
    insp = sa_inspect(_engine(str(DB_PATH)))
    for table in ("runs", "artifacts"):
        if insp.has_table(table):
            ok(f"数据库表 {table} 存在")
        else:
            err(f"数据库表 {table} 不存在")

def check_kernel_identity():
    import numpy as np
    from curlspec.assembly import assemble, gradient_embedding
    from curlspec.mesh import build_fixture_mesh
    for name in ("box", "lshape", "fichera"):
        mesh = build_fixture_mesh(name, 2)
        K, _, dofs = assemble(mesh, "curlcurl")
        G = gradient_embedding(mesh, curl_dofs=dofs)
        KG = K.matrix @ G
        top = float(np.abs(KG.data).max()) if KG.nnz else 0.0
        if top <= 1e-11 * K.max_abs():
            ok(f"{mesh.name}: K_curl·G = 0（max {top:.1e}，内部顶点 {G.shape[1]}）")
        else:
            err(f"{mesh.name}: K_curl·G 偏离 0（max {top:.1e}）")

def check_oracle_interlace():
    from math import pi
    from curlspec.oracle import box_dirichlet_spectrum, box_maxwell_spectrum, interlace_check
    rep = interlace_check(box_maxwell_spectrum(pi, pi, pi, 101), box_dirichlet_spectrum(pi, pi, pi, 50), 50)
    if rep.passed:
        ok(f"π-立方体解析谱交错 k<=50 成立（最小 margin {min(r.margin for r in rep.records):.3g}）")
    else:
        err(f"π-立方体解析谱交错失败：k = {[r.k for r in rep.violations]}")

def check_solver():
    from math import pi
    from curlspec.mesh import BoxSpec, build_box_mesh
    from curlspec.verify import compute_spectrum
    spec = compute_spectrum(build_box_mesh(BoxSpec.cube(pi, 4)), "dirichlet", 1, preconditioner="lu")
    lam = float(spec.values[0])
    if 3.0 < lam < 3.5:
        ok(f"Dirichlet λ1 (n=4) = {lam:.6f}（上界收敛到 3）")
    else:
        warn(f"Dirichlet λ1 (n=4) = {lam:.6f}，超出预期区间 (3, 3.5)")

def main():
    print("== 自检开始 ==")
    check_imports()
    check_config()
    check_db()
    check_kernel_identity()
    check_oracle_interlace()
    try:
        check_solver()
    except Exception as e:
        err(f"求解失败：{e}")
    print("== 自检结束 ==")

if __name__ == "__main__":
    main()
