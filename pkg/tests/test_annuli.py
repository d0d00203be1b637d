import numpy as np
import pytest

from linkedtwist import annuli, catalog, models
from linkedtwist.errors import DegeneracyError, LinkModeError, NoLevelError, NotLinkedError

from conftest import setup_for

EXPECTED = {"ex18": 2, "ex16": 2, "bio-r": 4, "bio-k": 4}


def test_annulus_validation():
    s = catalog.get("ex18").sys1
    with pytest.raises(NoLevelError):
        annuli.Annulus(s, 10.0, 18.0)
    with pytest.raises(ValueError):
        annuli.Annulus(s, 18.0, 17.0)


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_examples_link(name):
    cert = setup_for(name).cert
    assert len(annuli.intersection_rectangles(cert)) == EXPECTED[name]
    kind = annuli.LinkKind.TWO_CENTERS if EXPECTED[name] == 2 else annuli.LinkKind.ONE_CENTER_FOUR
    assert cert.kind is kind
    assert len(cert.points) == 8
    assert not cert.tangent


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_vertices_solve_both_levels(name):
    cert = setup_for(name).cert
    for r in cert.rectangles:
        for i, ea in enumerate(r.ea):
            for j, eb in enumerate(r.eb):
                v = np.array(r.vertices[i][j])
                assert abs(float(models.hamiltonian(r.sys_a, v)) - ea) < 1e-8
                assert abs(float(models.hamiltonian(r.sys_b, v)) - eb) < 1e-8


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_rectangles_disjoint_and_sides_alternate(name):
    cert = setup_for(name).cert
    shapes = [r.shape() for r in cert.rectangles]
    for p in range(len(shapes)):
        assert shapes[p].is_valid and shapes[p].area > 0
        for q in range(p + 1, len(shapes)):
            assert not shapes[p].intersects(shapes[q])
    for r in cert.rectangles:
        owners = [who for who, _, _ in r.sides(32)]
        assert owners == ["b", "a", "b", "a"]
        # boundary points lie on the advertised level curves
        for who, level, pts in r.sides(32):
            sys_ = r.sys_a if who == "a" else r.sys_b
            assert np.max(np.abs(models.hamiltonian(sys_, pts) - level)) < 1e-8


def test_side_labels_use_one_system():
    r = setup_for("ex18").cert.rectangle("A")
    assert r.side_levels == tuple(r.ea)
    rb = r.oriented("b")
    assert rb.side_levels == tuple(r.eb) and rb.label == "A@b"


def test_ex18_half_planes():
    cert = setup_for("ex18").cert
    line = cert.line
    a, b = cert.rectangle("A"), cert.rectangle("B")
    assert np.all(line.height(a.vertex_array.reshape(-1, 2)) < 0)
    assert np.all(line.height(b.vertex_array.reshape(-1, 2)) > 0)


def test_bioek_quadrants():
    cert = setup_for("bio-k").cert
    assert cert.names == ["R1", "R2", "R3", "R4"]
    c = models.center_array(cert.first.sys)
    signs = {"R1": (1, 1), "R2": (-1, 1), "R3": (-1, -1), "R4": (1, -1)}
    for r in cert.rectangles:
        rel = r.vertex_array.reshape(-1, 2) - c
        sx, sy = signs[r.name]
        assert np.all(sx * rel[:, 0] > 0) and np.all(sy * rel[:, 1] > 0)


def test_same_annulus_is_mode_error():
    s = setup_for("ex18")
    with pytest.raises(LinkModeError):
        annuli.link_check(s.ann1, s.ann1)


def test_two_center_swap_reverses_chain():
    s = setup_for("ex18")
    cert = annuli.link_check(s.ann2, s.ann1)
    assert cert.reversed
    assert cert.names == ["A", "B"]


def test_one_center_symmetric():
    s = setup_for("bio-r")
    other = annuli.link_check(s.ann2, s.ann1)
    assert other.swapped and not s.cert.swapped
    assert other.rectangles == s.cert.rectangles


def test_disjoint_annuli_not_linked():
    s = setup_for("ex18")
    with pytest.raises(NotLinkedError) as info:
        annuli.link_check(s.ann1, annuli.Annulus(s.ex.sys2, 15.6, 15.7))
    assert "fails" in info.value.witness


def test_shrunk_annulus_degenerates():
    s = setup_for("ex18")
    cert = annuli.link_check(annuli.Annulus(s.ex.sys1, 16.9, 16.9 + 1e-5), s.ann2)
    assert len(cert.rectangles) == 2
    with pytest.raises(DegeneracyError, match="nearly tangent"):
        annuli.link_check(annuli.Annulus(s.ex.sys1, 16.9, 16.9 + 1e-9), s.ann2)


def test_unsupported_bio_switch():
    a = models.SystemSpec.bio(16, 32, 24, 30, 2, 2)
    b = models.SystemSpec.bio(16, 32, 24, 30, 1, 1)
    with pytest.raises(LinkModeError):
        annuli.link_check(annuli.Annulus(a, 54, 55), annuli.Annulus(b, 54, 55))


def test_rectangle_chart_and_contains():
    r = setup_for("bio-k").cert.rectangle("R2")
    u = np.linspace(0, 1, 5)
    pts = r.chart(u, np.full(5, 0.5))
    assert np.all(r.contains(pts, tol=1e-9))
    H = r.energies(pts)
    assert H[0, 0] == pytest.approx(r.ea[0], abs=1e-8)
    assert H[-1, 0] == pytest.approx(r.ea[1], abs=1e-8)
