"""Stretching along paths: long phases stretch, short phases do not.

A path across rectangle A is pushed through one phase.  Its image winds
around the center many times and crosses B repeatedly.  With a one-unit
phase the image barely turns.
"""
import math

from linkedtwist import annuli, catalog, ltm

ex = catalog.get("ex18")
cert = annuli.link_check(annuli.Annulus(ex.sys1, *ex.e), annuli.Annulus(ex.sys2, *ex.h))
A, B = cert.rectangle("A"), cert.rectangle("B")

for T in (182.5, 1.0):
    sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, T, T)
    c = ltm.verify_stretch(sched, cert, A, B)
    print(f"T = {T:6.1f}: span {c.span / math.pi:6.2f} pi, {c.n_crossings} crossings ->"
          f" {'pass' if c.passed else 'fail'}")
    for lo, hi in c.crossings[:3]:
        print(f"    crossing for path parameter in [{lo:.6f}, {hi:.6f}]")

# every pair, both phases, at the reported durations
sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, *ex.T)
for c in ltm.verify_all(sched, cert, workers=4):
    print(" ", c.summary())
