import subprocess
import sys

import pytest

from linkedtwist import catalog, cli, scenario
from linkedtwist.errors import ScenarioError

BASE = scenario.dump(scenario.from_example("ex18"))


def _write(tmp_path, text, name="s.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


@pytest.mark.parametrize("name", sorted(catalog.EXAMPLES))
def test_round_trip(name):
    sc = scenario.from_example(name)
    text = scenario.dump(sc)
    again = scenario.parse(text)
    assert again == sc
    assert scenario.dump(again) == text


def test_shipped_scenarios_match_examples():
    for name in sorted(catalog.EXAMPLES):
        assert scenario.load(f"scenarios/{name}.ini") == scenario.from_example(name)


def test_schedule_and_annuli_from_scenario():
    sc = scenario.from_example("ex16")
    sched = sc.schedule()
    assert (sched.T1, sched.T2) == (182.5, 182.5)
    a1, a2 = sc.annuli()
    assert (a1.e1, a1.e2) == catalog.get("ex16").e


@pytest.mark.parametrize(
    "old,new,hit",
    [
        ("variant = NegMed", "variant = Neg", "variant = Neg"),
        ("q_ND = 3/10", "q_ND = three", "q_ND = three"),
        ("T1 = 182.5", "T1 = 182.5\nT1 = 1", "T1 = 1"),
        ("[portrait]", "[pictures]", "[pictures]"),
    ],
)
def test_parse_errors_carry_line(old, new, hit):
    text = BASE.replace(old, new)
    line = text.splitlines().index(hit) + 1
    with pytest.raises(ScenarioError) as info:
        scenario.parse(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_unknown_key_and_missing_section():
    with pytest.raises(ScenarioError, match="unknown key 'q_X'"):
        scenario.parse(BASE.replace("q_ND = 1/5", "q_X = 1/5"))
    with pytest.raises(ScenarioError, match=r"missing section \[schedule\]"):
        scenario.parse(BASE.replace("[schedule]\nT1 = 182.5\nT2 = 182.5\n", ""))


def test_bio_rejects_raw_form():
    text = scenario.dump(scenario.from_example("bio-r")).replace("form = canonical", "form = raw", 1)
    with pytest.raises(ScenarioError, match="form must be canonical"):
        scenario.parse(text)


def test_canonical_form_equivalent_to_raw():
    sc = scenario.from_example("ex18")
    canon = scenario.parse(
        BASE.replace(
            "form = raw\np_D = 9/10\np_ND = 1/10\nq_D = 1/10\nq_ND = 1/5\nB_PH = 6\nE = 140\nC_L = 90",
            "form = canonical\nzeta = 6\neta = 49/5\ntheta = 76/5\nkappa = 94/5",
        )
    )
    assert canon.system(1) == sc.system(1)


def test_dump_canonical_flag(tmp_path, capsys):
    path = _write(tmp_path, "# comment\n" + BASE)
    assert cli.main(["centers", "--scenario", path, "--dump-canonical"]) == 0
    assert capsys.readouterr().out == BASE


def test_centers_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["centers", "--example", "ex16", "--out", str(out1)]) == 0
    assert cli.main(["centers", "--example", "ex16", "--out", str(out2)]) == 0
    text = (out1 / "centers.csv").read_text()
    assert text == (out2 / "centers.csv").read_text()
    assert text.splitlines()[1].startswith("1,0.5,0.75")


def test_periods_csv(tmp_path):
    path = _write(tmp_path, BASE.replace("[periods]\nn = 20", "[periods]\nphase1 = 16.9, 17.5\nn = 3"))
    assert cli.main(["periods", "--scenario", path, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "periods_phase1.csv").read_text().splitlines()
    assert rows[0] == "e,tau" and len(rows) == 3
    assert float(rows[1].split(",")[1]) == pytest.approx(2.56278519961, rel=1e-8)
    assert len((tmp_path / "periods_phase2.csv").read_text().splitlines()) == 4


def test_periods_below_minimum_is_invalid(tmp_path, capsys):
    path = _write(tmp_path, BASE.replace("[periods]\nn = 20", "[periods]\nphase1 = 10, 16.9"))
    assert cli.main(["periods", "--scenario", path, "--out", str(tmp_path)]) == 3
    assert "10" in capsys.readouterr().err


def test_link_and_thresholds(tmp_path):
    assert cli.main(["link", "--example", "ex18", "--out", str(tmp_path)]) == 0
    assert "rectangles: A[d], B[u]" in (tmp_path / "link.txt").read_text()
    assert (tmp_path / "rectangles.csv").read_text().startswith("rect,k,x,y")
    assert cli.main(["thresholds", "--example", "ex18", "--out", str(tmp_path)]) == 0
    assert "c1 = " in (tmp_path / "thresholds.txt").read_text()


def test_stretch_pass_and_fail(tmp_path):
    assert cli.main(["stretch", "--example", "ex18", "--out", str(tmp_path / "ok")]) == 0
    trace = (tmp_path / "ok" / "stretch_phase1_A_B.csv").read_text().splitlines()
    assert trace[0] == "lambda,theta,in_target" and len(trace) > 256
    short = _write(tmp_path, BASE.replace("T1 = 182.5\nT2 = 182.5", "T1 = 1\nT2 = 1"))
    assert cli.main(["stretch", "--scenario", short, "--out", str(tmp_path / "bad")]) == 2
    assert "FAIL" in (tmp_path / "bad" / "stretch.txt").read_text()


def test_stretch_output_thread_independent(tmp_path, monkeypatch):
    monkeypatch.setenv("LTM_THREADS", "1")
    assert cli.main(["stretch", "--example", "ex18", "--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("LTM_THREADS", "4")
    assert cli.main(["stretch", "--example", "ex18", "--out", str(tmp_path / "four")]) == 0
    for f in sorted((tmp_path / "one").iterdir()):
        assert f.read_bytes() == (tmp_path / "four" / f.name).read_bytes()


def test_portrait(tmp_path):
    path = _write(tmp_path, BASE.replace("[portrait]\nn = 512", "[portrait]\nn = 16"))
    assert cli.main(["portrait", "--scenario", path, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "orbits.csv").read_text().splitlines()
    assert rows[0] == "phase,e,x,y,H" and len(rows) == 1 + 4 * 16
    assert (tmp_path / "trajectory_phase2.csv").exists()


def test_reproduce_reports_mismatch(tmp_path):
    # two printed 18ex periods are not reproduced; the run says so and exits 2
    assert cli.main(["reproduce", "ex18", "--skip-stretch", "--out", str(tmp_path)]) == 2
    report = (tmp_path / "reproduce_ex18.txt").read_text()
    assert "MISMATCH" in report and "centers" in report


def test_invalid_inputs(tmp_path):
    assert cli.main(["centers"]) == 3
    assert cli.main(["stretch", "--example", "ex18", "--path-samples", "10"]) == 3
    assert cli.main(["stretch", "--example", "ex18", "--tol-rel", "0.5"]) == 3
    bad = _write(tmp_path, BASE.replace("e1 = 16.9", "e1 = 19"))
    assert cli.main(["link", "--scenario", bad, "--out", str(tmp_path)]) == 3
    assert cli.main([]) == 3


def test_tolerance_helpers():
    assert cli.period_tolerance("3.2") == pytest.approx(0.096)
    assert cli.period_tolerance("0.35") == pytest.approx(0.0105)
    assert cli.threshold_matches(138.506, "138.5")
    assert not cli.threshold_matches(139.2, "138.5")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "linkedtwist", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "reproduce" in res.stdout
