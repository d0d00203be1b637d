"""Command-line front end.

Every command reads a scenario (``--scenario PATH`` or ``--example NAME``),
prints a short report and writes CSV/text artifacts to the output directory.
Exit codes: 0 pass, 2 certificate failure, 3 validation error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
import time
from typing import Iterable, Optional

import numpy as np

from . import annuli, catalog, integrate, ltm, models, orbitlib
from . import scenario as scn
from .errors import (
    DegeneracyError,
    DepthExceededError,
    IntegrationError,
    LinkedTwistError,
    NotLinkedError,
    PreconditionError,
    ResolutionError,
    ScenarioError,
)

__all__ = ["main", "EXIT_OK", "EXIT_FAIL", "EXIT_INVALID", "EXIT_NUMERIC"]

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("centers", "periods", "link", "thresholds", "stretch", "itinerary", "portrait", "reproduce")


def fmt(x) -> str:
    return "%.17g" % float(x)


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def threads() -> int:
    raw = os.environ.get("LTM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ScenarioError(f"LTM_THREADS must be a positive integer, got {raw!r}") from None


class Context:
    def __init__(self, sc: scn.Scenario, args):
        self.sc = sc
        self.args = args
        self.cfg = sc.integrator
        self.out = sc.out_dir
        self.n_path = args.path_samples

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def write(self, name: str, text: str) -> None:
        write_atomic(self.path(name), text)


# -- commands ------------------------------------------------------------------


def cmd_centers(ctx: Context) -> int:
    rows = []
    for ph in (1, 2):
        sys_ = ctx.sc.system(ph)
        cx, cy = models.center(sys_)
        e0 = models.min_energy(sys_)
        w = models.linearized_frequency(sys_)
        d = models.rotation_direction(sys_).value
        print(f"phase {ph}: center ({cx}, {cy}) = ({fmt(cx)}, {fmt(cy)})  e0 = {fmt(e0)}  {d}  "
              f"omega = {fmt(w)}  2pi/omega = {fmt(2 * math.pi / w)}")
        rows.append((str(ph), cx, cy, e0, d, w))
    ctx.write("centers.csv", csv_text(("phase", "x", "y", "e0", "direction", "omega"), rows))
    return EXIT_OK


def _period_grid(sc: scn.Scenario) -> dict:
    e1, e2, h1, h2 = sc.energies
    grid = {1: tuple(np.linspace(e1, e2, sc.period_points)), 2: tuple(np.linspace(h1, h2, sc.period_points))}
    grid.update(dict(sc.period_grid))
    return grid


def cmd_periods(ctx: Context) -> int:
    grid = _period_grid(ctx.sc)
    bad = []
    for ph, es in grid.items():
        e0 = models.min_energy(ctx.sc.system(ph))
        bad += [f"phase{ph}: {fmt(e)} <= e0 = {fmt(e0)}" for e in es if not e > e0]
    if bad:
        raise ScenarioError("energies not above the minimum energy: " + "; ".join(bad),
                            *ctx.sc.lines.get(("periods", None), (None, None)))
    for ph, es in sorted(grid.items()):
        sys_ = ctx.sc.system(ph)
        taus = [orbitlib.period(sys_, e, cfg=ctx.cfg) for e in es]
        ctx.write(f"periods_phase{ph}.csv", csv_text(("e", "tau"), zip(es, taus)))
        print(f"phase {ph}: {len(es)} levels, tau from {fmt(taus[0])} to {fmt(taus[-1])}")
    return EXIT_OK


def _link(ctx: Context) -> annuli.LinkCertificate:
    a, b = ctx.sc.annuli()
    return annuli.link_check(a, b)


def cmd_link(ctx: Context) -> int:
    try:
        cert = _link(ctx)
    except (NotLinkedError, DegeneracyError) as exc:
        print(f"not linked: {exc}")
        ctx.write("link.txt", f"linked = no\nreason = {exc}\n")
        return EXIT_FAIL
    text = cert.describe()
    print(text)
    ctx.write("link.txt", "linked = yes\n" + text + "\n")
    rows = []
    for r in cert.rectangles:
        for k, (x, y) in enumerate(r.polygon_array):
            rows.append((r.name, str(k), x, y))
    ctx.write("rectangles.csv", csv_text(("rect", "k", "x", "y"), rows))
    return EXIT_OK


def cmd_thresholds(ctx: Context) -> int:
    sched = ctx.sc.schedule()
    cert = _link(ctx)
    rep = ltm.schedule_thresholds(sched, cert, ctx.cfg)
    lines = _threshold_lines(rep)
    ok = rep.satisfied_by(sched.T1, sched.T2)
    lines.append(f"T1 = {fmt(sched.T1)}, T2 = {fmt(sched.T2)}: {'above' if ok else 'not above'} both thresholds")
    print("\n".join(lines))
    ctx.write("thresholds.txt", "\n".join(lines) + "\n")
    return EXIT_OK


def _threshold_lines(rep: ltm.ThresholdReport) -> list:
    t = rep.taus
    return [
        f"tau1 = ({fmt(t[0])}, {fmt(t[1])})  tau2 = ({fmt(t[2])}, {fmt(t[3])})",
        f"T1_min = {fmt(rep.T1_min)}  (c1 = {rep.c1})",
        f"T2_min = {fmt(rep.T2_min)}  (c2 = {rep.c2})",
    ]


def _stretch_report(ctx: Context, certs: list) -> tuple:
    lines = []
    for c in certs:
        lines.append(c.summary())
        for k, (a, b) in enumerate(c.witnesses):
            lines.append(f"    H{k} = [{fmt(a)}, {fmt(b)}]")
        name = f"stretch_phase{c.phase}_{c.source.split('@')[0]}_{c.target.split('@')[0]}.csv"
        rows = ((lam, th, "1" if inside else "0") for lam, th, inside in c.trace)
        ctx.write(name, csv_text(("lambda", "theta", "in_target"), rows))
    passed = all(c.passed for c in certs)
    return lines, passed


def cmd_stretch(ctx: Context) -> int:
    sched = ctx.sc.schedule()
    cert = _link(ctx)
    certs = ltm.verify_all(sched, cert, ctx.n_path, ctx.cfg, workers=threads())
    lines, passed = _stretch_report(ctx, certs)
    lines.append(f"stretch = {'pass' if passed else 'FAIL'}")
    print("\n".join(lines))
    ctx.write("stretch.txt", "\n".join(lines) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_itinerary(ctx: Context) -> int:
    sched = ctx.sc.schedule()
    cert = _link(ctx)
    symbols = ctx.args.symbols.split(",") if ctx.args.symbols else list(ctx.sc.symbols or cert.names[:1])
    symbols = [s.strip() for s in symbols if s.strip()]
    try:
        res = ltm.itinerary_demo(sched, cert, symbols, ctx.n_path, ctx.cfg)
    except PreconditionError as exc:
        print(f"itinerary precondition failed: {exc}")
        return EXIT_FAIL
    print(f"symbols {' '.join(res.symbols)} via {' '.join(res.via) or '-'}")
    print(f"x0 = ({fmt(res.x0[0])}, {fmt(res.x0[1])})  verified = {'yes' if res.verified else 'no'}")
    rows = []
    for k, (s, p) in enumerate(zip(res.symbols, res.iterates)):
        inside = bool(cert.rectangle(s).contains(np.array(p), tol=ltm.SIDE_TOL))
        rows.append((str(k), s, p[0], p[1], "1" if inside else "0"))
    ctx.write("itinerary.csv", csv_text(("k", "symbol", "x", "y", "inside"), rows))
    return EXIT_OK if res.verified else EXIT_FAIL


def cmd_portrait(ctx: Context) -> int:
    e1, e2, h1, h2 = ctx.sc.energies
    rows = []
    for ph, levels in ((1, (e1, e2)), (2, (h1, h2))):
        sys_ = ctx.sc.system(ph)
        for e in levels:
            pts = orbitlib.orbit_samples(sys_, e, ctx.sc.portrait_points)
            H = models.hamiltonian(sys_, pts)
            rows += [(str(ph), e, x, y, h) for (x, y), h in zip(pts, H)]
        # one period of the inner orbit, densely sampled
        _, p_plus = orbitlib.section_points(sys_, levels[0], orbitlib.default_line(sys_))
        cfg = integrate.IntegratorConfig(ctx.cfg.rel_tol, ctx.cfg.abs_tol, ctx.cfg.max_step,
                                         max(ctx.cfg.dense_resolution, 64.0))
        traj = integrate.flow(sys_, p_plus, orbitlib.period(sys_, levels[0], cfg=ctx.cfg), cfg)
        H = models.hamiltonian(sys_, traj.states)
        ctx.write(f"trajectory_phase{ph}.csv",
                  csv_text(("t", "x", "y", "H"), ((t, x, y, h) for t, (x, y), h in zip(traj.times, traj.states, H))))
        print(f"phase {ph}: {len(levels)} orbits, trajectory of {len(traj.times)} samples, drift {traj.energy_drift:.3g}")
    ctx.write("orbits.csv", csv_text(("phase", "e", "x", "y", "H"), rows))
    return EXIT_OK


# -- reproduce -------------------------------------------------------------------


def _decimals(printed: str) -> int:
    return len(printed.split(".")[1]) if "." in printed else 0


def period_tolerance(printed: str) -> float:
    """Larger of 3 % and half a unit of the last printed digit."""
    return max(0.03 * float(printed), 0.5 * 10.0 ** -_decimals(printed))


def threshold_matches(value: float, printed: str) -> bool:
    """Rounds to the printed figure and lies within 5e-3 relative of it."""
    d = _decimals(printed)
    return round(value, d) == round(float(printed), d) and abs(value - float(printed)) <= 5e-3 * abs(float(printed))


def cmd_reproduce(ctx: Context) -> int:
    ex = catalog.get(ctx.args.name)
    started = time.perf_counter()
    lines, failures = [f"reproduce {ex.name}: {ex.title}"], []

    def check(label, ok, detail):
        lines.append(f"  {label:<28} {detail}  [{'ok' if ok else 'MISMATCH'}]")
        if not ok:
            failures.append(label)

    lines.append("centers")
    seen = []
    for ph, s in ((1, ex.sys1), (2, ex.sys2)):
        c = models.center(s)
        if c not in seen:
            seen.append(c)
    for k, (c, printed) in enumerate(zip(seen, ex.centers)):
        ok = all(abs(float(v) - float(p)) <= 0.5 * 10.0 ** -_decimals(p) for v, p in zip(c, printed))
        check(f"center {k + 1}", ok, f"({float(c[0]):.6f}, {float(c[1]):.6f}) vs ({printed[0]}, {printed[1]})")

    lines.append("periods")
    levels = [(ex.sys1, ex.e[0]), (ex.sys1, ex.e[1]), (ex.sys2, ex.h[0]), (ex.sys2, ex.h[1])]
    taus = []
    for k, ((s, e), printed) in enumerate(zip(levels, ex.taus)):
        tau = orbitlib.period(s, e, cfg=ctx.cfg)
        taus.append(tau)
        tol = period_tolerance(printed)
        check(f"tau{1 + k // 2}({e:g})", abs(tau - float(printed)) <= tol,
              f"{tau:.5f} vs {printed} (tol {tol:.3g})")
    ctx.write("periods.csv", csv_text(("phase", "e", "tau"), ((str(1 + k // 2), e, t) for k, ((_, e), t) in enumerate(zip(levels, taus)))))

    lines.append("thresholds from the printed periods")
    rep = ltm.thresholds(*map(float, ex.taus), ex.sys1.variant)
    for label, v, printed in (("T1_min", rep.T1_min, ex.thresholds[0]), ("T2_min", rep.T2_min, ex.thresholds[1])):
        check(label, threshold_matches(v, printed), f"{v:.4f} vs {printed}")
    try:
        own = ltm.thresholds(*taus, ex.sys1.variant)
        lines.append(f"  from computed periods: T1_min = {own.T1_min:.3f}, T2_min = {own.T2_min:.3f}")
    except LinkedTwistError as exc:
        lines.append(f"  from computed periods: {exc}")

    lines.append("linkage")
    expected = 2 if ex.sys1.variant is not models.Variant.BIO else 4
    try:
        cert = annuli.link_check(annuli.Annulus(ex.sys1, *ex.e), annuli.Annulus(ex.sys2, *ex.h))
        check("linked", len(cert.rectangles) == expected, f"yes, {len(cert.rectangles)} rectangles (expect {expected})")
    except (NotLinkedError, DegeneracyError) as exc:
        check("linked", False, f"no: {exc}")
        cert = None

    if cert is not None and not ctx.args.skip_stretch:
        lines.append(f"stretching at T1 = {ex.T[0]:g}, T2 = {ex.T[1]:g}")
        sched = ltm.SwitchSchedule(ex.sys1, ex.sys2, *ex.T)
        certs = ltm.verify_all(sched, cert, ctx.n_path, ctx.cfg, workers=threads())
        extra, passed = _stretch_report(ctx, certs)
        lines += ["  " + s for s in extra]
        check("stretch", passed, f"{sum(c.passed for c in certs)}/{len(certs)} pairs pass")

    lines.append(f"result: {'all checks ok' if not failures else 'mismatch in ' + ', '.join(failures)}"
                 f"  ({time.perf_counter() - started:.1f} s)")
    print("\n".join(lines))
    ctx.write(f"reproduce_{ex.name}.txt", "\n".join(lines[:-1]) + "\n")
    return EXIT_OK if not failures else EXIT_FAIL


HANDLERS = {
    "centers": cmd_centers,
    "periods": cmd_periods,
    "link": cmd_link,
    "thresholds": cmd_thresholds,
    "stretch": cmd_stretch,
    "itinerary": cmd_itinerary,
    "portrait": cmd_portrait,
    "reproduce": cmd_reproduce,
}


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", metavar="PATH", help="scenario file")
    common.add_argument("--example", metavar="NAME", choices=sorted(catalog.EXAMPLES),
                        help="use a built-in example instead of a scenario file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides the scenario)")
    common.add_argument("--tol-rel", type=float, metavar="TOL", help="integrator relative tolerance")
    common.add_argument("--path-samples", type=int, default=ltm.MIN_PATH, metavar="N",
                        help="initial samples along each stretching path (default %(default)s)")
    common.add_argument("--dump-canonical", action="store_true",
                        help="print the scenario in canonical form and exit")

    parser = argparse.ArgumentParser(
        prog="linkedtwist",
        description="Certify linked-twist chaos in periodically switched planar Hamiltonian systems.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    helps = {
        "centers": "print centers, minimum energies and small-cycle frequencies",
        "periods": "period sweep CSV (e,tau)",
        "link": "linkage certificate and rectangle polygons",
        "thresholds": "minimal switching durations from computed periods",
        "stretch": "stretching certificates with CSV traces",
        "itinerary": "point realizing a finite symbol sequence",
        "portrait": "orbit polylines and one-period trajectories",
        "reproduce": "run a built-in example end to end and compare with reported values",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], parents=[common])
        if name == "reproduce":
            p.add_argument("name", choices=sorted(catalog.EXAMPLES))
            p.add_argument("--skip-stretch", action="store_true", help="skip the stretching stage")
        if name == "itinerary":
            p.add_argument("--symbols", help="comma-separated rectangle names, e.g. A,B,B,A")
    return parser


def _scenario(args) -> scn.Scenario:
    if args.command == "reproduce":
        sc = scn.from_example(args.name)
    elif args.scenario:
        sc = scn.load(args.scenario)
    elif args.example:
        sc = scn.from_example(args.example)
    else:
        raise ScenarioError("give --scenario PATH or --example NAME")
    if args.tol_rel is not None:
        try:
            sc = sc.with_overrides(rel_tol=args.tol_rel)
        except ValueError as exc:
            raise ScenarioError(f"--tol-rel: {exc}") from None
    if args.out is not None:
        sc = sc.with_overrides(out_dir=args.out)
    elif args.command == "reproduce":
        sc = sc.with_overrides(out_dir=os.path.join(sc.out_dir, sc.name))
    return sc


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_INVALID
    try:
        if args.path_samples < ltm.MIN_PATH:
            raise ScenarioError(f"--path-samples must be at least {ltm.MIN_PATH}")
        sc = _scenario(args)
        if args.dump_canonical:
            sys.stdout.write(scn.dump(sc))
            return EXIT_OK
        return HANDLERS[args.command](Context(sc, args))
    except (IntegrationError, ResolutionError, DepthExceededError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NotLinkedError, DegeneracyError) as exc:
        print(f"certificate failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, KeyError) as exc:
        where = f"{args.scenario}: " if getattr(args, "scenario", None) else ""
        print(f"invalid input: {where}{exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
