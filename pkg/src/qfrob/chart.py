"""Frobenius charts of involutive plane fields.

A chart straightens the plane field near p: the k lifted coordinate fields
commute on the plateau of the bump, and composing their flows from the
transversal p + (0, x_normal) gives Phi.  Slices x_normal = c map to
integral manifolds.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .calculus import bracket_batch
from .errors import InjectivityError, InvolutivityError, NotInImageError, NumericalError, SpecError
from .fields import DomainBox
from .flow import FlowMap, flow
from .grids import box_grid, cube_grid
from .planefield import (
    BumpFunction,
    PlaneField,
    TransverseSplit,
    coordinate_lift,
    make_bump,
    normal_component,
    orthonormal_frame,
    select_split,
)

__all__ = [
    "ChartConfig",
    "Chart",
    "SliceMesh",
    "build_chart",
    "chart_forward",
    "chart_inverse",
    "injectivity_radius",
    "trace_slice",
    "c1_regularity_probe",
    "residual_trend_ok",
    "write_slice_csv",
]

LIPSCHITZ_FLOOR = 1e-3
ROUNDTRIP_TOL = 1e-6
MIN_EPS = 1e-4


@dataclass(frozen=True)
class ChartConfig:
    eps0: float = 0.3
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.1
    bracket_gate: float = 1e-4
    gate_points: int = 5
    injectivity_points: int = 5
    bisection_steps: int = 8
    fd_step: float | None = None


@dataclass(frozen=True, eq=False)
class Chart:
    plane: PlaneField
    p: np.ndarray
    eps: float
    split: TransverseSplit
    fields: tuple
    bump: BumpFunction
    config: ChartConfig

    @property
    def n(self) -> int:
        return self.plane.n

    @property
    def k(self) -> int:
        return self.plane.k

    def flow_map(self, i: int) -> FlowMap:
        c = self.config
        return FlowMap(self.fields[i], c.rtol, c.atol, c.max_step)

    def to_dict(self) -> dict:
        return {
            "p": self.p.tolist(),
            "eps": self.eps,
            "eps0": self.config.eps0,
            "split": self.split.to_dict(),
            "bump": self.bump.to_dict(),
            "flow_tolerance": {"rtol": self.config.rtol, "atol": self.config.atol,
                               "max_step": self.config.max_step},
        }


def build_chart(E: PlaneField, p, config: ChartConfig = ChartConfig()) -> Chart:
    p = np.asarray(p, dtype=float)
    eps0 = float(config.eps0)
    split = select_split(E, p)
    T = list(split.tangent)
    k = E.k
    inner = DomainBox.cube(k, 2.0 * eps0, center=p[T])
    outer = DomainBox.cube(k, 4.0 * eps0, center=p[T])
    bump = make_bump(inner, outer)
    fields = tuple(coordinate_lift(E, split, i, bump) for i in range(k))

    # lifted frame must commute on the plateau
    probe = cube_grid(p, eps0, config.gate_points)
    probe = probe[E.domain.contains(probe)]
    worst = 0.0
    for i, j in itertools.combinations(range(k), 2):
        br, ok = bracket_batch(fields[i], fields[j], probe, config.fd_step)
        norms = np.linalg.norm(br[ok], axis=1)
        if norms.size:
            worst = max(worst, float(np.percentile(norms, 99)))
    if worst > config.bracket_gate:
        raise InvolutivityError(
            f"lifted frame brackets reach {worst:.3g} > {config.bracket_gate:g}; plane field is not involutive near p"
        )
    chart = Chart(E, p, eps0, split, fields, bump, config)
    eps = injectivity_radius(chart, eps0)
    return replace(chart, eps=eps)


def _base_points(C: Chart, X) -> np.ndarray:
    Q = np.broadcast_to(C.p, X.shape).copy()
    N = list(C.split.normal)
    Q[:, N] += X[:, C.k:]
    return Q


def _forward(C: Chart, X, order=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    order = tuple(range(C.k)) if order is None else tuple(order)
    Q = _base_points(C, X)
    # Phi = phi^{order[0]} o ... o phi^{order[-1]}: innermost flow first
    for i in reversed(order):
        Q = flow(C.flow_map(i), Q, X[:, i])
    return Q


def _inverse(C: Chart, Q, order=None) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    order = tuple(range(C.k)) if order is None else tuple(order)
    T, N = list(C.split.tangent), list(C.split.normal)
    X = np.empty_like(Q)
    # projected flows are translations on the plateau
    X[:, : C.k] = Q[:, T] - C.p[T]
    R = Q
    for i in order:
        R = flow(C.flow_map(i), R, -X[:, i])
    X[:, C.k:] = R[:, N] - C.p[N]
    return X


def chart_forward(C: Chart, x, order=None) -> np.ndarray:
    """Phi(x) for x in the closed cube of radius C.eps; ``order`` permutes the flow composition."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > C.eps * (1.0 + 1e-12)):
        raise SpecError(f"chart coordinates must lie in [-{C.eps:g}, {C.eps:g}]^{C.n}")
    out = _forward(C, x, order)
    return out[0] if x.ndim == 1 else out


def chart_inverse(C: Chart, q) -> np.ndarray:
    """Psi(q); raises NotInImageError when Phi(Psi(q)) misses q."""
    q = np.asarray(q, dtype=float)
    Q = np.atleast_2d(q)
    X = _inverse(C, Q)
    back = _forward(C, X)
    resid = np.linalg.norm(back - Q, axis=1)
    bad = resid > ROUNDTRIP_TOL * (1.0 + np.linalg.norm(Q, axis=1))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NotInImageError(f"q={Q[i].tolist()} is not in the chart image (round-trip residual {resid[i]:.3g})")
    return X[0] if q.ndim == 1 else X


def _injective_on(C: Chart, eps: float) -> bool:
    X = cube_grid(np.zeros(C.n), eps, C.config.injectivity_points)
    try:
        Y = _forward(C, X)
        Xr = _inverse(C, Y)
    except NumericalError:
        return False
    if not np.all(pdist(Y) >= LIPSCHITZ_FLOOR * pdist(X)):
        return False
    err = np.linalg.norm(Xr - X, axis=1)
    return bool(np.all(err <= ROUNDTRIP_TOL * (1.0 + np.linalg.norm(X, axis=1))))


def injectivity_radius(C: Chart, eps0: float) -> float:
    """Largest eps (bisection from eps0) on which Phi passes the grid injectivity test."""
    if _injective_on(C, eps0):
        return float(eps0)
    lo, hi = 0.0, float(eps0)
    for _ in range(C.config.bisection_steps):
        mid = 0.5 * (lo + hi)
        if _injective_on(C, mid):
            lo = mid
        else:
            hi = mid
    if lo < MIN_EPS:
        raise InjectivityError(f"no chart radius >= {MIN_EPS:g} passes the injectivity test")
    return lo


@dataclass(frozen=True, eq=False)
class SliceMesh:
    chart: Chart
    c: np.ndarray
    resolution: int
    u: np.ndarray  # (res^k, k) slice parameters
    points: np.ndarray  # (res^k, n) images
    residual: np.ndarray  # (res^k,)

    @property
    def spacing(self) -> float:
        return 2.0 * self.chart.eps / max(self.resolution - 1, 1)


def trace_slice(C: Chart, c, resolution: int = 33) -> SliceMesh:
    """Image of the slice x_normal = c on a resolution^k grid, with tangency residuals."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if c.size != C.n - C.k:
        raise SpecError(f"slice parameter needs {C.n - C.k} entries")
    if np.any(np.abs(c) >= C.eps):
        raise SpecError(f"|c| must be below the chart radius {C.eps:g}")
    if resolution < 2:
        raise SpecError("resolution must be at least 2")
    k, n = C.k, C.n
    U = box_grid(-C.eps * np.ones(k), C.eps * np.ones(k), resolution)
    X = np.concatenate([U, np.broadcast_to(c, (len(U), c.size))], axis=1)
    Q = _forward(C, X)
    mesh = Q.reshape((resolution,) * k + (n,))
    h = 2.0 * C.eps / (resolution - 1)
    edge = 2 if resolution >= 3 else 1
    basis = orthonormal_frame(C.plane.frame_matrix(Q))
    resid = np.zeros(len(Q))
    for ax in range(k):
        T = np.gradient(mesh, h, axis=ax, edge_order=edge).reshape(-1, n)
        r = np.linalg.norm(normal_component(basis, T), axis=1) / np.linalg.norm(T, axis=1)
        resid = np.maximum(resid, r)
    return SliceMesh(C, c, resolution, U, Q, resid)


def c1_regularity_probe(M: SliceMesh, levels) -> list:
    """(mesh spacing, max tangency residual) for each resolution in ``levels``."""
    out = []
    for res in levels:
        m = trace_slice(M.chart, M.c, int(res))
        out.append((m.spacing, float(np.max(m.residual))))
    return out


def residual_trend_ok(seq, chart: Chart | None = None, noise: float = 0.2) -> bool:
    """Residuals non-increasing under refinement, up to ``noise`` relative jitter.

    A residual below the integration noise floor (position error divided by
    mesh spacing) counts as converged.
    """
    if len(seq) < 2:
        return True
    scale = 1.0
    if chart is not None:
        scale = chart.config.atol + chart.config.rtol * (1.0 + float(np.linalg.norm(chart.p)) + chart.eps * chart.n)
    for (h0, r0), (h1, r1) in zip(seq, seq[1:]):
        floor = 10.0 * scale / h1 if chart is not None else 0.0
        if r1 > max((1.0 + noise) * r0, floor):
            return False
    return True


def write_slice_csv(M: SliceMesh, path) -> Path:
    path = Path(path)
    k, n = M.chart.k, M.chart.n
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{i + 1}" for i in range(k)] + [f"x{i + 1}" for i in range(n)] + ["residual"])
        for u, q, r in zip(M.u, M.points, M.residual):
            w.writerow([repr(float(v)) for v in u] + [repr(float(v)) for v in q] + [repr(float(r))])
    return path
