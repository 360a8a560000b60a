# curlspec/config.py
import os
from pathlib import Path

# 项目与数据目录（可用环境变量覆盖数据目录）
ROOT_DIR = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("CURLSPEC_DATA_DIR", ROOT_DIR / "data"))

# SQLite 运行目录（db.py 需要）
DB_PATH = DATA_DIR / "curlspec.db"

# 报告 / 谱文件默认输出目录
OUTPUT_DIR = DATA_DIR / "out"

# ---- 网格 ----
DEGENERATE_VOLUME_FACTOR = 1e-14   # vol < factor * h^3 视为退化单元
NORMAL_TOL = 1e-12                 # 边界法向单位长度容差
PLANE_TOL = 1e-9                   # 边界面归并为平面时的相对容差

# ---- 组装 ----
ASSEMBLY_CHUNK = 4096              # 固定分块：结果与线程数无关
THREADS_ENV = "CURLSPEC_THREADS"

# ---- 特征值求解 ----
SOLVER_TOL = 1e-8
MAX_ITER = 500
CLUSTER_GAP = 1e-6                 # 相对间隙，用于重数分组
ZERO_THRESHOLD = 1e-8              # shift-invert 过滤：ZERO_THRESHOLD * max(1, sigma)
KERNEL_REL_TOL = 1e-6               # 放气后仍 < 1e-6 * max|值| 记为额外核
DEFAULT_PRECONDITIONER = "jacobi"  # jacobi / ilu / lu
STUDY_PRECONDITIONER = "lu"
DENSE_FALLBACK_FACTOR = 5          # n_free < factor * block 时直接稠密求解
DENSE_CONSTRAINT_LIMIT = 20_000_000  # 核基稠密化后元素数上限，超过则只用投影预条件

# ---- 验证 ----
RICHARDSON_DEFAULT_RATE = 2.0
RICHARDSON_RATE_BOUNDS = (1.0, 4.0)
UNION_REL_TOL = 0.02
TRIAL_SUBSPACE_SLACK = 1e-8
INTERLACE_REL_FLOOR = 1e-6         # 容差下限：1e-6 * lambda_k

# 随机测试默认种子
DEFAULT_SEED = 20240601
