"""The four worked examples: parameters, energies, schedules and reported values.

Reported values are the rounded figures printed with each example; they are
used as golden references by ``reproduce`` and by the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as Fr

from . import models

__all__ = ["Example", "EXAMPLES", "get"]


@dataclass(frozen=True)
class Example:
    name: str
    title: str
    sys1: models.SystemSpec
    sys2: models.SystemSpec
    e: tuple  # energies of the first system's annulus
    h: tuple  # energies of the second system's annulus
    T: tuple = (182.5, 182.5)
    raw1: object = None
    raw2: object = None
    centers: tuple = ()  # printed centers (rounded), one per distinct center
    taus: tuple = ()  # printed periods (tau1(e1), tau1(e2), tau2(h1), tau2(h2)) as strings
    thresholds: tuple = ()  # printed thresholds (T1_min, T2_min) as strings
    notes: dict = field(default_factory=dict)


def _ex18() -> Example:
    raw1 = models.RawGameParamsNeg(Fr(9, 10), Fr(1, 10), Fr(1, 10), Fr(2, 10), 6, 140, 90)
    raw2 = models.RawGameParamsNeg(Fr(9, 10), Fr(1, 10), Fr(1, 10), Fr(3, 10), 6, 140, 90)
    return Example(
        "ex18", "negative defensive medicine, seasonal q_ND",
        models.SystemSpec(models.derive_neg(raw1)), models.SystemSpec(models.derive_neg(raw2)),
        (16.9, 18.5), (16.9, 18.4), raw1=raw1, raw2=raw2,
        centers=(("0.809", "0.612"), ("0.864", "0.714")),
        taus=("3.2", "3.8", "3", "3.3"), thresholds=("111.467", "148.500"),
    )


def _ex16() -> Example:
    raw1 = models.RawGameParamsPos(Fr(1, 10), Fr(4, 10), Fr(6, 10), 130, 70, 18, 15, 30)
    raw2 = models.RawGameParamsPos(Fr(2, 10), Fr(4, 10), Fr(6, 10), 130, 70, 18, 15, 30)
    return Example(
        "ex16", "positive defensive medicine, seasonal p",
        models.SystemSpec(models.derive_pos(raw1)), models.SystemSpec(models.derive_pos(raw2)),
        (5.4, 8.3), (12.1, 16.2), raw1=raw1, raw2=raw2,
        centers=(("0.5", "0.75"), ("0.5", "0.375")),
        taus=("7.8", "11.3", "3.6", "4.5"), thresholds=("138.5", "81"),
    )


def _bio_r() -> Example:
    return Example(
        "bio-r", "predator-prey, seasonal growth rates",
        models.SystemSpec.bio(16, 32, 24, 30, 2, Fr(1, 2)),
        models.SystemSpec.bio(16, 32, 24, 30, Fr(1, 2), 2),
        (53.0, 56.9), (43.0, 44.4),
        centers=(("0.8", "0.5"),),
        taus=("1.055", "1.195", "1.06", "1.095"), thresholds=("40.52", "116.07"),
    )


def _bio_k() -> Example:
    return Example(
        "bio-k", "predator-prey, seasonal carrying capacities",
        models.SystemSpec.bio(64, 128, 96, 112, 1, 1, Fr(99, 100), Fr(9, 10)),
        models.SystemSpec.bio(64, 128, 96, 112, 1, 1, Fr(9, 10), Fr(99, 100)),
        (145.3, 146.7), (129.4, 131.1),
        centers=(("0.857", "0.5"),),
        taus=(".355", ".360", ".635", ".650"), thresholds=("115.02", "96.31"),
        notes={"center_print": "0.86"},
    )


EXAMPLES = {ex.name: ex for ex in (_ex18(), _ex16(), _bio_r(), _bio_k())}


def get(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(EXAMPLES)}") from None
