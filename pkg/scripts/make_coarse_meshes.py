"""Regenerate the packaged coarse unstructured meshes with Triangle.

Requires the ``triangle`` Python bindings (``pip install triangle``); the
package itself only reads the resulting ``.node``/``.ele`` files.

    python scripts/make_coarse_meshes.py
"""
from pathlib import Path

import numpy as np
import triangle

from fetoep.mesh import HEX_CENTER, HEX_SIDE, import_triangle, write_triangle

DATA = Path(__file__).resolve().parents[1] / "src" / "fetoep" / "data"

_SIDE = np.linspace(0.0, 1.0, 5)[:-1]

# (boundary vertices, Triangle switches): quality mesh with a 30 degree
# minimum angle. The square boundary is pre-split into four segments per
# side and "Y" keeps Triangle from adding boundary points, which gives 24
# interior and 16 boundary nodes.
DOMAINS = {
    "hexagon": (
        np.array(HEX_CENTER)
        + HEX_SIDE * np.column_stack([np.cos(np.arange(6) * np.pi / 3), np.sin(np.arange(6) * np.pi / 3)]),
        "pq30a0.0134",
    ),
    "square": (
        np.concatenate([
            np.column_stack([_SIDE, 0.0 * _SIDE]),
            np.column_stack([1.0 + 0.0 * _SIDE, _SIDE]),
            np.column_stack([1.0 - _SIDE, 1.0 + 0.0 * _SIDE]),
            np.column_stack([0.0 * _SIDE, 1.0 - _SIDE]),
        ]),
        "pq30a0.025Y",
    ),
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for name, (verts, switches) in DOMAINS.items():
        k = len(verts)
        segs = np.column_stack([np.arange(k), (np.arange(k) + 1) % k])
        out = triangle.triangulate({"vertices": verts, "segments": segs}, switches)
        node = [f"{len(out['vertices'])} 2 0 1"]
        for i, ((x, y), mk) in enumerate(zip(out["vertices"], out["vertex_markers"].ravel()), start=1):
            node.append(f"{i} {float(x)!r} {float(y)!r} {int(mk)}")
        ele = [f"{len(out['triangles'])} 3 0"]
        for i, (a, b, c) in enumerate(out["triangles"], start=1):
            ele.append(f"{i} {a + 1} {b + 1} {c + 1}")
        mesh = import_triangle("\n".join(node) + "\n", "\n".join(ele) + "\n")
        write_triangle(mesh, DATA / f"{name}_coarse")
        print(f"{name}: {mesh}")


if __name__ == "__main__":
    main()
