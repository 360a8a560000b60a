# scripts/export_fixtures.py
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from curlspec.config import DATA_DIR
from curlspec.mesh import FIXTURES, build_fixture_mesh
from curlspec.readers import write_gmsh

def main(n: int = 2, out_dir: Path = DATA_DIR / "fixtures"):
    for name in FIXTURES:
        mesh = build_fixture_mesh(name, n)
        path = write_gmsh(mesh, out_dir / f"{name}-n{n}.msh", comment=f"fixture {name} n={n}")
        s = mesh.summary()
        print(f">>> {path.name}: V={s['V']} T={s['T']} boundary_faces={s['boundary_faces']}")

if __name__ == "__main__":
    if len(sys.argv) > 2:
        print("用法: python scripts/export_fixtures.py [每单位长度的单元数，默认 2]")
        sys.exit(1)
    main(int(sys.argv[1]) if len(sys.argv) == 2 else 2)
