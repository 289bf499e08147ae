import numpy as np
import pytest

from qfrob.calculus import anticonformal_part, divergence
from qfrob.catalog import load_catalog
from qfrob.errors import DegenerateFrameError, SpecError
from qfrob.fields import ConstantField, DomainBox, parse_field
from qfrob.grids import cube_grid, domain_grid
from qfrob.planefield import (PlaneField, bump_profile, coordinate_lift, involutivity_residual, lift, make_bump,
                              normal_component, orthonormal_frame, select_split)

CUBE3 = DomainBox.cube(3, 1.0)


def _frame(texts, n=3, dom=CUBE3):
    return PlaneField(n, len(texts), tuple(parse_field(t, n, dom) for t in texts), dom)


def _bump(k, inner=0.5, outer=1.0, center=None):
    return make_bump(DomainBox.cube(k, inner, center), DomainBox.cube(k, outer, center))


def test_plane_field_validation():
    e1 = ConstantField((1.0, 0.0, 0.0))
    with pytest.raises(SpecError):
        PlaneField(3, 3, (e1, e1, e1), CUBE3)
    with pytest.raises(SpecError):
        PlaneField(3, 2, (e1,), CUBE3)


def test_select_split_examples():
    s = select_split(load_catalog("coords(2,3)"), np.zeros(3))
    assert s.tangent == (0, 1) and s.normal == (2,) and s.margin == pytest.approx(1.0)
    assert s.to_dict()["tangent_indices"] == [1, 2]
    s = select_split(_frame(["1; 0; 1", "0; 1; 0"]), np.zeros(3))
    assert s.tangent == (0, 1)
    with pytest.raises(DegenerateFrameError):
        select_split(_frame(["0; 0; 0", "0; 1; 0"]), np.zeros(3))


def test_select_split_prefers_best_conditioned():
    # span(e3, e2 + 0.1 e1): projecting onto (x2, x3) is best
    s = select_split(_frame(["0; 0; 1", "0.1; 1; 0"]), np.zeros(3))
    assert s.tangent == (1, 2) and s.normal == (0,)


def test_bump_examples():
    b = _bump(2, 0.5, 1.0)
    assert b(np.zeros(2)) == 1.0
    assert b(np.array([0.5, -0.5])) == 1.0
    assert b(np.array([1.0, 0.0])) == 0.0 and b(np.array([3.0, 0.0])) == 0.0
    mid = float(b(np.array([0.75, 0.0])))
    assert 0.0 < mid < 1.0 and mid == pytest.approx(0.5)
    # smooth profile: second differences are O(h^2) through the shell
    h = 1e-3
    t = np.linspace(0.9, 2.1, 1201)
    d2 = bump_profile(t[2:]) - 2 * bump_profile(t[1:-1]) + bump_profile(t[:-2])
    assert np.max(np.abs(d2)) < 50 * h**2 and np.max(np.abs(np.diff(d2))) < 500 * h**3
    vals = b(np.random.default_rng(0).uniform(-2, 2, (500, 2)))
    assert np.all((vals >= 0) & (vals <= 1))
    with pytest.raises(SpecError):
        make_bump(DomainBox.cube(2, 1.0), DomainBox.cube(2, 1.0))


def test_lift_examples():
    E = load_catalog("coords(2,3)")
    s = select_split(E, np.zeros(3))
    b = _bump(2)
    X = coordinate_lift(E, s, 1, b)
    np.testing.assert_array_equal(X(np.array([0.2, -0.3, 0.7])), [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(X(np.array([1.0, 0.0, 0.0])), [0.0, 0.0, 0.0])
    G = load_catalog("graph-parabola3d")
    sg = select_split(G, np.zeros(3))
    Xg = coordinate_lift(G, sg, 0, b)
    q = np.array([0.3, -0.2, 1.1])
    np.testing.assert_allclose(Xg(q), [1.0, 0.0, 0.3], atol=1e-15)
    assert np.all(Xg(np.array([[1.5, 0.0, 0.0], [0.0, -1.2, 0.4]])) == 0.0)


def test_lift_invariants(rng):
    G = load_catalog("graph-rough3d")
    p = np.array([1.0, 1.0, 0.0])
    s = select_split(G, p)
    b = _bump(2, 0.3, 0.6, center=p[:2])
    V1 = parse_field("x2; -x1", 2, DomainBox.cube(2, 4.0))
    V2 = parse_field("1 + x1^2; sin(x2)", 2, DomainBox.cube(2, 4.0))
    a = -1.7
    Q = rng.uniform([0.45, 0.45, -1], [1.55, 1.55, 1], (200, 3))
    L1, L2 = lift(G, s, V1, b)(Q), lift(G, s, V2, b)(Q)
    Lsum = lift(G, s, a * V1 + V2, b)(Q)
    np.testing.assert_allclose(Lsum, a * L1 + L2, atol=1e-12, rtol=0)
    # projection consistency: pi_* lift(V) = beta V
    beta = b(Q[:, :2])
    np.testing.assert_allclose(L1[:, :2], beta[:, None] * V1(Q[:, :2]), atol=1e-12, rtol=0)
    # sections of E
    basis = orthonormal_frame(G.frame_matrix(Q))
    perp = np.linalg.norm(normal_component(basis, L2), axis=1)
    assert np.all(perp <= 1e-12 * np.maximum(np.linalg.norm(L2, axis=1), 1e-300) + 1e-300)


def test_involutivity_examples():
    grid = domain_grid(CUBE3, 10, margin=1e-3)
    assert len(grid) >= 1000
    r = involutivity_residual(load_catalog("coords(2,3)"), grid)
    assert r["max"] == 0.0 and r["involutive"]
    c = involutivity_residual(load_catalog("contact3d"), grid)
    # bracket e3, residual 1 / (2 sqrt(1 + x1^2))
    x1 = grid[:, 0]
    expect = 1 / (2 * np.sqrt(1 + x1**2))
    assert c["p99"] >= 0.4 and c["max"] == pytest.approx(expect.max(), abs=1e-8) and not c["involutive"]
    g = involutivity_residual(load_catalog("graph-xy3d"), domain_grid(DomainBox.cube(3, 2.0), 10, 1e-3))
    assert g["max"] <= 1e-6 and g["involutive"]
    rough = involutivity_residual(load_catalog("graph-rough3d"),
                                  domain_grid(load_catalog("graph-rough3d").domain, 10, 1e-3))
    assert rough["involutive"]


@pytest.mark.parametrize("k,n", [(1, 2), (2, 3), (2, 4), (3, 4)])
def test_coordinate_frames_exactly_involutive(k, n):
    E = load_catalog(f"coords({k},{n})")
    r = involutivity_residual(E, cube_grid(np.zeros(n), 0.9, 3))
    assert r["max"] == 0.0


def test_involutivity_rejects_degenerate_frame():
    E = _frame(["1; 0; 0", "x1; 0; 0"])
    with pytest.raises(DegenerateFrameError):
        involutivity_residual(E, cube_grid(np.zeros(3), 0.5, 3))


def test_divergence_lemma_on_plateau(rng):
    G = load_catalog("graph-parabola3d")
    s = select_split(G, np.zeros(3))
    b = _bump(2, 0.6, 1.2)
    P = rng.uniform([-0.5, -0.5, -1], [0.5, 0.5, 1], (100, 3))
    for i in range(2):
        X = coordinate_lift(G, s, i, b)
        for q in P:
            S = anticonformal_part(X, q)
            d = divergence(X, q)
            for j in range(2):
                assert abs(S[j, j] + d / 3) <= 1e-6
            assert abs(d) <= 3 * np.linalg.norm(S, 2) + 1e-9
