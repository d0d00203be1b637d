"""Centers, minimum energies and the period-energy curve of one example.

The orbits around each center are closed level curves of a first integral.
Their period grows with the energy, and that growth is what makes a long
phase twist an annulus.
"""
import numpy as np

from linkedtwist import catalog, ltm, models, orbitlib

ex = catalog.get("ex18")

# exact centers (rational parameters give rational centers)
for k, s in enumerate((ex.sys1, ex.sys2), start=1):
    c = models.center(s)
    print(f"phase {k}: center = ({c[0]}, {c[1]}) ~ ({float(c[0]):.4f}, {float(c[1]):.4f})")
    print(f"         e0 = {models.min_energy(s):.10f}, small-cycle period = {models.linear_period(s):.5f}")

# period sweep for the first system across its annulus
s = ex.sys1
energies = np.linspace(ex.e[0], ex.e[1], 9)
taus = np.array([orbitlib.period(s, e) for e in energies])
for e, t in zip(energies, taus):
    print(f"  e = {e:7.3f}  tau = {t:.6f}")
print("strictly increasing:", bool(np.all(np.diff(taus) > 0)))

# minimal phase durations from the boundary periods
t1a, t1b = orbitlib.period(ex.sys1, ex.e[0]), orbitlib.period(ex.sys1, ex.e[1])
t2a, t2b = orbitlib.period(ex.sys2, ex.h[0]), orbitlib.period(ex.sys2, ex.h[1])
rep = ltm.thresholds(t1a, t1b, t2a, t2b, ex.sys1.variant)
print(f"T1_min = {rep.T1_min:.2f}, T2_min = {rep.T2_min:.2f}  (constants c1={rep.c1}, c2={rep.c2})")
