"""Linked annuli: two centers give two rectangles, one center gives four.

Prints the rectangle extents.  ``linkedtwist link`` writes the polygons
as CSV for plotting.
"""
from linkedtwist import annuli, catalog

for name in ("ex18", "bio-k"):
    ex = catalog.get(name)
    cert = annuli.link_check(annuli.Annulus(ex.sys1, *ex.e), annuli.Annulus(ex.sys2, *ex.h))
    print(f"{name}: {cert.kind.value}, {len(cert.rectangles)} rectangles: {', '.join(cert.names)}")
    for r in cert.rectangles:
        v = r.vertex_array.reshape(-1, 2)
        print(f"  {r.name}: vertices x in [{v[:, 0].min():.4f}, {v[:, 0].max():.4f}],"
              f" y in [{v[:, 1].min():.4f}, {v[:, 1].max():.4f}], area {r.shape().area:.3e}")
