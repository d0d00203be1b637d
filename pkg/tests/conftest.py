import pytest

from linkedtwist import annuli, catalog, ltm

EXAMPLE_NAMES = ("ex18", "ex16", "bio-r", "bio-k")


class Setup:
    def __init__(self, name):
        self.ex = catalog.get(name)
        self.ann1 = annuli.Annulus(self.ex.sys1, *self.ex.e)
        self.ann2 = annuli.Annulus(self.ex.sys2, *self.ex.h)
        self.cert = annuli.link_check(self.ann1, self.ann2)
        self.sched = ltm.SwitchSchedule(self.ex.sys1, self.ex.sys2, *self.ex.T)


_CACHE = {}


def setup_for(name) -> Setup:
    if name not in _CACHE:
        _CACHE[name] = Setup(name)
    return _CACHE[name]


@pytest.fixture(scope="session")
def ex18():
    return setup_for("ex18")


@pytest.fixture(scope="session", params=EXAMPLE_NAMES)
def any_example(request):
    return setup_for(request.param)


def all_systems():
    """(label, SystemSpec, (e1, e2)) for the eight systems of the examples."""
    out = []
    for name in EXAMPLE_NAMES:
        ex = catalog.get(name)
        out.append((f"{name}/1", ex.sys1, ex.e))
        out.append((f"{name}/2", ex.sys2, ex.h))
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
