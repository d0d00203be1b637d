"""Realize the symbol sequence A, B, B, A by an actual orbit.

Nested refinement of crossing intervals finds a starting point whose
iterates under the period map visit the named rectangles in order.
This takes about a minute: the final intervals are narrow enough that the
integration runs at tight tolerance.
"""
from linkedtwist import annuli, catalog, ltm

ex = catalog.get("ex18")
cert = annuli.link_check(annuli.Annulus(ex.sys1, *ex.e), annuli.Annulus(ex.sys2, *ex.h))
sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, *ex.T)

res = ltm.itinerary_demo(sched, cert, ["A", "B", "B", "A"])
print("x0 =", res.x0, " verified:", res.verified)
for k, (sym, p) in enumerate(zip(res.symbols, res.iterates)):
    print(f"  Psi^{k}(x0) = ({p[0]:.10f}, {p[1]:.10f})  in {sym}: {bool(cert.rectangle(sym).contains(p, tol=1e-8))}")
