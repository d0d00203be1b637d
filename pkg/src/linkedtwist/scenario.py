"""Scenario files: INI-style ``key = value`` text describing one switched system.

Layout::

    [scenario]
    name = ex18
    variant = NegMed

    [phase1]
    form = raw            # or canonical
    p_D = 9/10
    ...

    [phase2]
    ...

    [annuli]
    e1 = 16.9
    e2 = 18.5
    h1 = 16.9
    h2 = 18.4

    [schedule]
    T1 = 182.5
    T2 = 182.5

    [integrator]          # optional
    rel_tol = 1e-10

    [output]              # optional
    dir = out

Optional command sections: ``[periods]`` (``phase1``/``phase2`` energy lists or
``n`` grid points), ``[itinerary]`` (``symbols``) and ``[portrait]``
(``n`` samples per orbit).  Parameter values accept fractions such as
``9/10``; they are kept exact so centers come out as exact rationals.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import catalog, models
from .annuli import Annulus
from .errors import LinkedTwistError, ScenarioError
from .integrate import IntegratorConfig
from .ltm import SwitchSchedule

__all__ = ["Scenario", "parse", "load", "dump", "from_example"]

RAW_KEYS = {
    models.Variant.NEG_MED: ("p_D", "p_ND", "q_D", "q_ND", "B_PH", "E", "C_L"),
    models.Variant.POS_MED: ("p", "q_D", "q_ND", "R", "K", "C_D", "C_ND", "C_L"),
}
CANONICAL_KEYS = {
    models.Variant.NEG_MED: ("zeta", "eta", "theta", "kappa"),
    models.Variant.POS_MED: ("p", "lam", "mu", "nu"),
    models.Variant.BIO: ("alpha", "beta", "gamma", "delta", "r_x", "r_y", "K_x", "K_y"),
}
_BIO_DEFAULTS = {"K_x": Fraction(1), "K_y": Fraction(1)}
_RAW_CLS = {models.Variant.NEG_MED: models.RawGameParamsNeg, models.Variant.POS_MED: models.RawGameParamsPos}
_CANON_CLS = {
    models.Variant.NEG_MED: models.ParamsNeg,
    models.Variant.POS_MED: models.ParamsPos,
    models.Variant.BIO: models.ParamsBio,
}
_INTEGRATOR_KEYS = ("rel_tol", "abs_tol", "max_step", "dense_resolution")
SECTIONS = ("scenario", "phase1", "phase2", "annuli", "schedule", "integrator", "output",
            "periods", "itinerary", "portrait")


@dataclass(frozen=True)
class Scenario:
    name: str
    variant: models.Variant
    form1: str
    phase1: tuple  # ((key, Fraction), ...) in canonical key order
    form2: str
    phase2: tuple
    energies: tuple  # (e1, e2, h1, h2)
    T1: float
    T2: float
    integrator: IntegratorConfig = IntegratorConfig()
    out_dir: str = "out"
    period_grid: tuple = ()  # ((phase, (e, ...)), ...) explicit energies
    period_points: int = 20
    symbols: tuple = ()
    portrait_points: int = 512
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    # -- derived objects --------------------------------------------------

    def system(self, phase: int) -> models.SystemSpec:
        form, values = (self.form1, self.phase1) if phase == 1 else (self.form2, self.phase2)
        try:
            return _build_system(self.variant, form, dict(values))
        except LinkedTwistError as exc:
            raise ScenarioError(f"[phase{phase}]: {exc}", *self.lines.get((f"phase{phase}", None), (None, None))) from exc

    def systems(self) -> tuple:
        return self.system(1), self.system(2)

    def annuli(self) -> tuple:
        e1, e2, h1, h2 = self.energies
        s1, s2 = self.systems()
        try:
            return Annulus(s1, e1, e2), Annulus(s2, h1, h2)
        except LinkedTwistError as exc:
            raise ScenarioError(f"[annuli]: {exc}", *self.lines.get(("annuli", None), (None, None))) from exc

    def schedule(self) -> SwitchSchedule:
        s1, s2 = self.systems()
        try:
            return SwitchSchedule(s1, s2, self.T1, self.T2)
        except LinkedTwistError as exc:
            raise ScenarioError(f"[schedule]: {exc}", *self.lines.get(("schedule", None), (None, None))) from exc

    def with_overrides(self, rel_tol: Optional[float] = None, out_dir: Optional[str] = None) -> "Scenario":
        import dataclasses

        kw = {}
        if rel_tol is not None:
            kw["integrator"] = self.integrator.with_rel_tol(rel_tol)
        if out_dir is not None:
            kw["out_dir"] = out_dir
        return dataclasses.replace(self, **kw)


def _build_system(variant, form, values) -> models.SystemSpec:
    if form == "raw":
        raw = _RAW_CLS[variant](**values)
        derive = models.derive_neg if variant is models.Variant.NEG_MED else models.derive_pos
        return models.SystemSpec(derive(raw))
    return models.SystemSpec(_CANON_CLS[variant](**values))


# -- parsing ----------------------------------------------------------------

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]\s*(.*)$")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _locate(text: str) -> dict:
    """(section, key) -> (line, column of the value); (section, None) -> header line."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = (lineno, m.start(1) + 1)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = (lineno, m.start(2) + 1)
    return where


def _number(text: str, where, exact: bool):
    text = text.strip()
    if not exact:
        try:
            return float(text)
        except ValueError:
            pass
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ScenarioError(f"not a number: {text!r}", *where) from None
    return value if exact else float(value)


def _numbers(text: str, where) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return tuple(_number(p, where, exact=False) for p in parts)


def parse(text: str, source: str = "<scenario>") -> Scenario:
    """Parse scenario text.

    Raises
    ------
    ScenarioError
        With the line (and column where meaningful) of the offending entry.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("entries before the first [section] header", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ScenarioError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ScenarioError(f"cannot parse {line.strip()!r}", lineno, 1) from None
    where = _locate(text)

    def loc(section, key=None):
        return where.get((section, key.lower() if key else None), (None, None))

    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ScenarioError(f"unknown section [{sec}]", *loc(sec))
    for sec in ("scenario", "phase1", "phase2", "annuli", "schedule"):
        if not cp.has_section(sec):
            raise ScenarioError(f"missing section [{sec}]")

    def take(sec, allowed):
        items = dict(cp.items(sec))
        for k in items:
            if k not in allowed:
                raise ScenarioError(f"unknown key {k!r} in [{sec}]", *loc(sec, k))
        return items

    def need(items, sec, key):
        if key not in items:
            raise ScenarioError(f"missing key {key!r} in [{sec}]", *loc(sec))
        return items[key]

    head = take("scenario", ("name", "variant"))
    vtext = need(head, "scenario", "variant")
    try:
        variant = models.Variant(vtext)
    except ValueError:
        choices = ", ".join(v.value for v in models.Variant)
        raise ScenarioError(f"unknown variant {vtext!r}; choose from {choices}", *loc("scenario", "variant")) from None
    name = head.get("name", "scenario")

    phases = []
    for sec in ("phase1", "phase2"):
        raw_items = dict(cp.items(sec))
        form = raw_items.pop("form", "canonical")
        if form not in ("raw", "canonical") or (form == "raw" and variant is models.Variant.BIO):
            allowed = "canonical" if variant is models.Variant.BIO else "raw or canonical"
            raise ScenarioError(f"form must be {allowed}", *loc(sec, "form"))
        keys = RAW_KEYS[variant] if form == "raw" else CANONICAL_KEYS[variant]
        take(sec, keys + ("form",))
        values = []
        for k in keys:
            if k in raw_items:
                values.append((k, _number(raw_items[k], loc(sec, k), exact=True)))
            elif variant is models.Variant.BIO and k in _BIO_DEFAULTS:
                values.append((k, _BIO_DEFAULTS[k]))
            else:
                raise ScenarioError(f"missing key {k!r} in [{sec}]", *loc(sec))
        phases.append((form, tuple(values)))

    ann = take("annuli", ("e1", "e2", "h1", "h2"))
    energies = tuple(_number(need(ann, "annuli", k), loc("annuli", k), exact=False) for k in ("e1", "e2", "h1", "h2"))
    sch = take("schedule", ("T1", "T2"))
    T1 = _number(need(sch, "schedule", "T1"), loc("schedule", "T1"), exact=False)
    T2 = _number(need(sch, "schedule", "T2"), loc("schedule", "T2"), exact=False)

    cfg = IntegratorConfig()
    if cp.has_section("integrator"):
        items = take("integrator", _INTEGRATOR_KEYS)
        kw = {k: _number(v, loc("integrator", k), exact=False) for k, v in items.items()}
        try:
            cfg = IntegratorConfig(**kw)
        except ValueError as exc:
            raise ScenarioError(f"[integrator]: {exc}", *loc("integrator")) from None

    out_dir = "out"
    if cp.has_section("output"):
        out_dir = take("output", ("dir",)).get("dir", out_dir)

    grid, n_points = [], 20
    if cp.has_section("periods"):
        items = take("periods", ("phase1", "phase2", "n"))
        for ph in ("phase1", "phase2"):
            if ph in items:
                grid.append((int(ph[-1]), _numbers(items[ph], loc("periods", ph))))
        if "n" in items:
            n_points = _int(items["n"], loc("periods", "n"), minimum=2)

    symbols = ()
    if cp.has_section("itinerary"):
        items = take("itinerary", ("symbols",))
        symbols = tuple(s for s in re.split(r"[,\s]+", items.get("symbols", "")) if s)

    portrait_points = 512
    if cp.has_section("portrait"):
        items = take("portrait", ("n",))
        if "n" in items:
            portrait_points = _int(items["n"], loc("portrait", "n"), minimum=8)

    sc = Scenario(
        name, variant, phases[0][0], phases[0][1], phases[1][0], phases[1][1], energies,
        T1, T2, cfg, out_dir, tuple(grid), n_points, symbols, portrait_points, where,
    )
    # validate eagerly so errors point at the file
    sc.annuli()
    sc.schedule()
    return sc


def _int(text, where, minimum):
    try:
        v = int(text)
    except ValueError:
        raise ScenarioError(f"not an integer: {text!r}", *where) from None
    if v < minimum:
        raise ScenarioError(f"must be at least {minimum}", *where)
    return v


def load(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path!r}: {exc.strerror}") from None
    return parse(text, source=path)


# -- canonical output ---------------------------------------------------------


def _fmt_exact(v: Fraction) -> str:
    return str(v)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def dump(sc: Scenario) -> str:
    """Canonical text: fixed section and key order, every default spelled out."""
    out = [f"[scenario]\nname = {sc.name}\nvariant = {sc.variant.value}\n"]
    for ph, form, values in ((1, sc.form1, sc.phase1), (2, sc.form2, sc.phase2)):
        body = "".join(f"{k} = {_fmt_exact(v)}\n" for k, v in values)
        out.append(f"[phase{ph}]\nform = {form}\n{body}")
    e1, e2, h1, h2 = sc.energies
    out.append(
        f"[annuli]\ne1 = {_fmt_float(e1)}\ne2 = {_fmt_float(e2)}\nh1 = {_fmt_float(h1)}\nh2 = {_fmt_float(h2)}\n"
    )
    out.append(f"[schedule]\nT1 = {_fmt_float(sc.T1)}\nT2 = {_fmt_float(sc.T2)}\n")
    cfg = sc.integrator
    out.append(
        "[integrator]\n"
        + "".join(f"{k} = {_fmt_float(getattr(cfg, k))}\n" for k in _INTEGRATOR_KEYS)
    )
    out.append(f"[output]\ndir = {sc.out_dir}\n")
    body = "".join(f"phase{ph} = {', '.join(map(_fmt_float, es))}\n" for ph, es in sc.period_grid)
    out.append(f"[periods]\n{body}n = {sc.period_points}\n")
    if sc.symbols:
        out.append(f"[itinerary]\nsymbols = {', '.join(sc.symbols)}\n")
    out.append(f"[portrait]\nn = {sc.portrait_points}\n")
    return "\n".join(out)


def _as_pairs(obj, keys) -> tuple:
    return tuple((k, Fraction(getattr(obj, k))) for k in keys)


def from_example(name: str) -> Scenario:
    """Scenario for one of the built-in examples."""
    ex = catalog.get(name)
    variant = ex.sys1.variant
    phases = []
    for raw, sys in ((ex.raw1, ex.sys1), (ex.raw2, ex.sys2)):
        if raw is not None:
            phases.append(("raw", _as_pairs(raw, RAW_KEYS[variant])))
        else:
            phases.append(("canonical", _as_pairs(sys.params, CANONICAL_KEYS[variant])))
    symbols = ("A", "B", "B", "A") if variant is not models.Variant.BIO else ("R1", "R2", "R3", "R4")
    return Scenario(
        ex.name, variant, phases[0][0], phases[0][1], phases[1][0], phases[1][1],
        tuple(map(float, ex.e + ex.h)), float(ex.T[0]), float(ex.T[1]), symbols=symbols,
    )
