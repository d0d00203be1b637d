import dataclasses
import math

import numpy as np
import pytest

from linkedtwist import catalog, integrate, ltm, models, orbitlib
from linkedtwist.errors import MonotonicityError, PreconditionError, RegimeError, ScheduleError

from conftest import setup_for

# scipy DOP853 (rtol 1e-13) image of one point of A under the 18ex schedule; frozen
PSI_X0 = (0.8862845704514561, 0.37027040703149716)
PSI_IMAGE = (0.9388872265039838, 0.5531720109353675)


def test_thresholds_formula():
    rep = ltm.thresholds(3.2, 3.8, 3.0, 3.3, "NegMed")
    assert (rep.c1, rep.c2) == (11, 9)
    assert rep.T1_min == pytest.approx(11 * 3.2 * 3.8 / (2 * 0.6), rel=1e-12)
    assert rep.T2_min == pytest.approx(9 * 3.0 * 3.3 / (2 * 0.3), rel=1e-12)
    bio = ltm.thresholds(1.055, 1.195, 1.06, 1.095, "Bio")
    assert (bio.c1, bio.c2) == (9, 7)
    assert bio.satisfied_by(182.5, 182.5) and not bio.satisfied_by(30, 182.5)


def test_thresholds_need_increasing_periods():
    with pytest.raises(MonotonicityError):
        ltm.thresholds(3.8, 3.2, 3.0, 3.3, "NegMed")
    with pytest.raises(MonotonicityError):
        ltm.thresholds(3.2, 3.8, 3.0, 3.0, "PosMed")


def test_schedule_validation():
    ex = catalog.get("ex18")
    with pytest.raises(ScheduleError):
        ltm.SwitchSchedule(ex.sys1, ex.sys1, 1, 1)
    with pytest.raises(ScheduleError):
        ltm.SwitchSchedule(ex.sys1, ex.sys2, 0, 0)
    with pytest.raises(ScheduleError):
        ltm.SwitchSchedule(ex.sys1, catalog.get("ex16").sys1, 1, 1)
    odd = models.SystemSpec.neg(7, 9.8, 15.2, 18.8)  # zeta does not follow q_ND
    with pytest.raises(ScheduleError):
        ltm.SwitchSchedule(ex.sys1, odd, 1, 1)
    sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, 182.5, 182.5)
    assert sched.T == 365.0 and set(sched.switched()) == {"eta", "theta", "kappa"}


def test_bio_schedule_switches_one_family():
    a = models.SystemSpec.bio(16, 32, 24, 30, 2, 0.5, 1, 1)
    b = models.SystemSpec.bio(16, 32, 24, 30, 0.5, 2, 0.9, 1)
    with pytest.raises(ScheduleError):
        ltm.SwitchSchedule(a, b, 1, 1)


def test_poincare_matches_oracle(ex18):
    y = ltm.poincare(ex18.sched, np.array(PSI_X0))
    assert np.linalg.norm(y - np.array(PSI_IMAGE)) < 1e-6


def test_poincare_full_periods_returns():
    ex = catalog.get("ex16")
    x0 = orbitlib.section_points(ex.sys1, 6.0)[1]
    T1 = orbitlib.period(ex.sys1, 6.0)
    x_mid = integrate.flow_points(ex.sys1, x0, T1)
    h = float(models.hamiltonian(ex.sys2, x_mid))
    line = orbitlib.SectionLine(tuple(models.center_array(ex.sys2)), tuple(x_mid - models.center_array(ex.sys2)),
                                orbitlib.Ordering.BY_ABSCISSA)
    T2 = orbitlib.period(ex.sys2, h, line)
    sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, T1, T2)
    assert np.linalg.norm(ltm.poincare(sched, x0) - x0) < 1e-5


def test_phase_one_fixes_its_center(ex18):
    c = models.center_array(ex18.ex.sys1)
    y = ltm.poincare(ex18.sched, c)
    assert not np.allclose(y, c)
    h2 = float(models.hamiltonian(ex18.ex.sys2, c))
    assert float(models.hamiltonian(ex18.ex.sys2, y)) == pytest.approx(h2, abs=1e-6)  # about 60 turns of drift


def test_phase_annulus_invariance(ex18):
    sched = ex18.sched.with_durations(182.5, 0.0)
    rng = np.random.default_rng(3)
    A = ex18.cert.rectangle("A")
    X = A.chart(rng.random(20), rng.random(20))
    Y = ltm.poincare(sched, X)
    H0 = models.hamiltonian(ex18.ex.sys1, X)
    H1 = models.hamiltonian(ex18.ex.sys1, Y)
    assert np.max(np.abs(H1 - H0)) < 1e-8
    assert np.all(ex18.ann1.contains(Y, tol=1e-8))


def test_stretch_zero_duration_fails(ex18):
    sched = ex18.sched.with_durations(0.0, 182.5)
    A, B = ex18.cert.rectangle("A"), ex18.cert.rectangle("B")
    c = ltm.verify_stretch(sched, ex18.cert, A, B)
    assert not c.passed and c.n_crossings == 0 and abs(c.span) < math.pi


def test_stretch_path_resolution_oracle():
    # bioer, one source: a 4x denser initial path agrees on crossing counts
    s = setup_for("bio-r")
    src = s.cert.rectangle("R1")
    others = [s.cert.rectangle(n) for n in ("R2", "R3", "R4")]
    base = ltm._stretch_from(s.sched, src, others, 256, integrate.DEFAULT_CONFIG)
    dense = ltm._stretch_from(s.sched, src, others, 1024, integrate.DEFAULT_CONFIG)
    assert [c.n_crossings for c in base] == [c.n_crossings for c in dense]
    assert base[0].span == pytest.approx(dense[0].span, abs=1e-6)


def test_crossings_nondecreasing_in_duration(ex18):
    A, B = ex18.cert.rectangle("A"), ex18.cert.rectangle("B")
    rep = ltm.schedule_thresholds(ex18.sched, ex18.cert)
    counts = []
    for f in (1.0, 1.5, 2.0):
        sched = ex18.sched.with_durations(rep.T1_min * f, 182.5)
        counts.append(ltm.verify_stretch(sched, ex18.cert, A, B).n_crossings)
    assert counts == sorted(counts) and counts[0] >= 2


def test_clockwise_pass_structure_matches():
    # PosMed turns clockwise; its certificates pass with positive spans like NegMed
    for name in ("ex16", "ex18"):
        s = setup_for(name)
        certs = ltm.verify_all(s.sched, s.cert)
        assert [c.passed for c in certs] == [True] * 4
        assert all(c.span > 0 for c in certs)


def test_verify_all_threads_deterministic(ex18):
    one = ltm.verify_all(ex18.sched, ex18.cert, workers=1)
    many = ltm.verify_all(ex18.sched, ex18.cert, workers=4)
    assert one == many


def test_required_pairs_cover_both_phases(any_example):
    pairs = ltm.required_pairs(any_example.sched, any_example.cert)
    n = len(any_example.cert.rectangles)
    assert len(pairs) == 2 * n * (n - 1)


def test_perturbation_budget():
    for shape in ("square", "bump"):
        p = ltm.Perturbation(0.365, shape)
        assert p.l1_distance(365.0) == pytest.approx(0.365 / 2, rel=1e-12)
    with pytest.raises(ValueError):
        ltm.Perturbation(0.1, "saw")


def test_perturbation_large_eps_breaks_regime(ex18):
    A, B = ex18.cert.rectangle("A"), ex18.cert.rectangle("B")
    with pytest.raises(RegimeError):
        ltm.perturb_and_recheck(ex18.sched, ex18.cert, A, B, eps=2000.0)


def test_bump_perturbation_small_effect(ex18):
    sched = ex18.sched.with_durations(20.0, 20.0)
    A, B = ex18.cert.rectangle("A"), ex18.cert.rectangle("B")
    base = ltm.verify_stretch(sched, ex18.cert, A, B)
    bumped = ltm.perturb_and_recheck(sched, ex18.cert, A, B, eps=1e-4 * sched.T, shape="bump")
    assert bumped.perturbation.startswith("bump")
    assert bumped.span == pytest.approx(base.span, abs=1e-2)


def test_itinerary_single_symbol(ex18):
    res = ltm.itinerary_demo(ex18.sched, ex18.cert, ["A"])
    assert res.verified and ex18.cert.rectangle("A").contains(np.array(res.x0))


def test_itinerary_precondition(ex18):
    short = ex18.sched.with_durations(1.0, 1.0)
    with pytest.raises(PreconditionError):
        ltm.itinerary_demo(short, ex18.cert, ["A", "B"])
    with pytest.raises(ValueError):
        ltm.itinerary_demo(ex18.sched, ex18.cert, ["A"] * 7)


def test_certificate_summary_and_trace(ex18):
    A, B = ex18.cert.rectangle("A"), ex18.cert.rectangle("B")
    c = ltm.verify_stretch(ex18.sched, ex18.cert, A, B)
    assert "pass" in c.summary() and c.span_ok and c.crossings_ok
    lam = [t[0] for t in c.trace]
    assert lam[0] == 0.0 and lam[-1] == 1.0 and lam == sorted(lam)
    h0, h1 = c.witnesses
    assert h0[1] < h1[0]  # disjoint
    assert c.span > 5 * math.pi
    assert dataclasses.replace(c) == c
