import csv
import itertools

import numpy as np
import pytest

from qfrob.catalog import load_catalog
from qfrob.chart import (ChartConfig, build_chart, c1_regularity_probe, chart_forward, chart_inverse,
                         injectivity_radius, residual_trend_ok, trace_slice, write_slice_csv)
from qfrob.errors import InvolutivityError, NotInImageError, SpecError
from qfrob.grids import cube_grid


@pytest.fixture(scope="module")
def parabola():
    return build_chart(load_catalog("graph-parabola3d"), np.zeros(3))


@pytest.fixture(scope="module")
def coords():
    return build_chart(load_catalog("coords(2,3)"), np.zeros(3), ChartConfig(eps0=0.4))


def g(x, y):
    return 0.5 * (x**2 + y**2)


def test_coordinate_chart_is_translation(coords):
    assert coords.eps == 0.4
    X = cube_grid(np.zeros(3), coords.eps, 5)
    np.testing.assert_allclose(chart_forward(coords, X), X, atol=1e-8, rtol=0)
    np.testing.assert_allclose(chart_inverse(coords, X), X, atol=1e-8, rtol=0)


def test_coordinate_chart_off_origin():
    p = np.array([0.1, -0.2, 0.3])
    C = build_chart(load_catalog("coords(2,3)"), p, ChartConfig(eps0=0.2))
    x = np.array([0.15, -0.1, 0.05])
    np.testing.assert_allclose(chart_forward(C, x), p + x, atol=1e-8)
    np.testing.assert_allclose(chart_inverse(C, p + x), x, atol=1e-8)


def test_parabola_examples(parabola):
    assert parabola.eps >= 0.1
    np.testing.assert_allclose(chart_forward(parabola, np.zeros(3)), np.zeros(3), atol=1e-12)
    q = chart_forward(parabola, [0.1, 0.0, 0.0])
    np.testing.assert_allclose(q, [0.1, 0.0, 0.005], atol=1e-9)
    np.testing.assert_allclose(chart_inverse(parabola, [0.1, 0.0, 0.005]), [0.1, 0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(chart_inverse(parabola, np.zeros(3)), np.zeros(3), atol=1e-12)


def test_closed_form_chart(parabola, rng):
    X = rng.uniform(-parabola.eps, parabola.eps, (50, 3))
    exact = np.stack([X[:, 0], X[:, 1], X[:, 2] + g(X[:, 0], X[:, 1])], axis=1)
    np.testing.assert_allclose(chart_forward(parabola, X), exact, atol=1e-8)


def test_round_trip_and_base_points(parabola):
    X = cube_grid(np.zeros(3), parabola.eps * 0.999, 7)
    back = chart_inverse(parabola, chart_forward(parabola, X))
    assert np.all(np.linalg.norm(back - X, axis=1) <= 1e-6 * (1 + np.linalg.norm(X, axis=1)))
    Z = X.copy()
    Z[:, :2] = 0.0
    np.testing.assert_allclose(chart_forward(parabola, Z), Z, atol=1e-15)


def test_order_independence(parabola, rng):
    X = rng.uniform(-parabola.eps, parabola.eps, (40, 3))
    a = chart_forward(parabola, X)
    b = chart_forward(parabola, X, order=(1, 0))
    assert np.max(np.linalg.norm(a - b, axis=1)) <= 1e-4


def test_forward_rejects_points_outside_cube(parabola):
    with pytest.raises(SpecError):
        chart_forward(parabola, [parabola.eps * 1.1, 0.0, 0.0])


def test_not_in_image(parabola):
    with pytest.raises(NotInImageError):
        chart_inverse(parabola, [1.0, 0.0, 0.0])  # transition shell of the bump
    with pytest.raises(NotInImageError):
        chart_inverse(parabola, [1.5, 0.5, 0.0])  # outside the bump support


def test_slices_lie_on_graph_translates(parabola):
    for c in (-0.2, 0.0, 0.2):
        M = trace_slice(parabola, [c], 33)
        P = M.points
        assert P.shape == (33 * 33, 3) and M.u.shape == (33 * 33, 2)
        np.testing.assert_allclose(P[:, 2], g(P[:, 0], P[:, 1]) + c, atol=1e-6)
        assert M.residual.max() <= 1e-4 and np.all(M.residual >= 0)


def test_slice_separation(parabola):
    cs = [-0.2, 0.05, 0.2]
    meshes = {c: trace_slice(parabola, [c], 9).points for c in cs}
    for a, b in itertools.combinations(cs, 2):
        d = np.linalg.norm(meshes[a] - meshes[b], axis=1)
        assert np.all(d >= 1e-3 * abs(a - b))


def test_slice_argument_checks(parabola):
    with pytest.raises(SpecError):
        trace_slice(parabola, [parabola.eps], 5)
    with pytest.raises(SpecError):
        trace_slice(parabola, [0.0, 0.0], 5)
    corners = trace_slice(parabola, [0.1], 2)
    assert corners.points.shape == (4, 3) and np.all(np.isfinite(corners.residual))


@pytest.mark.parametrize("name,p", [
    ("coords(2,3)", (0.0, 0.0, 0.0)),
    ("graph-parabola3d", (0.0, 0.0, 0.0)),
    ("graph-xy3d", (0.2, -0.1, 0.0)),
    ("graph-rough3d", (1.0, 1.0, 0.0)),
    ("coords(1,2)", (0.0, 0.0)),
])
def test_tangency_on_catalog_examples(name, p):
    C = build_chart(load_catalog(name), np.array(p))
    M = trace_slice(C, np.zeros(C.n - C.k), 33)
    assert M.residual.max() <= 1e-3


def test_c1_probe(parabola):
    M = trace_slice(parabola, [0.2], 9)
    seq = c1_regularity_probe(M, [9, 17, 33])
    assert [h for h, _ in seq] == pytest.approx([2 * parabola.eps / 8, 2 * parabola.eps / 16, 2 * parabola.eps / 32])
    assert residual_trend_ok(seq, parabola)
    single = c1_regularity_probe(M, [5])
    assert len(single) == 1 and residual_trend_ok(single)
    assert not residual_trend_ok([(0.1, 1e-3), (0.05, 2e-3)])


def test_contact_frame_fails_gate():
    with pytest.raises(InvolutivityError):
        build_chart(load_catalog("contact3d"), np.zeros(3))


def test_injectivity_search_shrinks_on_fold():
    C = build_chart(load_catalog("squeeze2d"), np.zeros(2))
    assert 1e-4 <= C.eps <= 0.05
    assert injectivity_radius(C, C.eps) == C.eps


def test_chart_metadata_and_csv(parabola, tmp_path):
    meta = parabola.to_dict()
    assert meta["split"]["tangent_indices"] == [1, 2] and meta["eps"] == parabola.eps
    M = trace_slice(parabola, [0.1], 3)
    path = write_slice_csv(M, tmp_path / "s.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["u1", "u2", "x1", "x2", "x3", "residual"]
    assert len(rows) == 10
    assert [float(v) for v in rows[1][2:5]] == pytest.approx(M.points[0].tolist())


def test_c1_probe_converges_on_rough_graph():
    C = build_chart(load_catalog("graph-rough3d"), np.array([1.0, 1.0, 0.0]))
    seq = c1_regularity_probe(trace_slice(C, [0.1], 5), [5, 9, 17, 33])
    res = [r for _, r in seq]
    assert all(b < 0.3 * a for a, b in zip(res, res[1:]))  # second-order mesh differences
    assert residual_trend_ok(seq, C)
