"""Flows of vector fields and their distortion diagnostics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .calculus import check_singular_fraction, jacobian_batch
from .errors import DomainExitError
from .fields import MollifiedField, VectorField
from .integrate import Tolerance, integrate

__all__ = [
    "FlowMap",
    "DistortionReport",
    "flow",
    "trajectory",
    "flow_jacobian",
    "flow_jacobian_batch",
    "liouville_check",
    "qc_growth_profile",
    "commutation_defect",
    "mollification_stability",
    "sampled_divergence_bound",
]

SINGULAR_DET = 1e-12


@dataclass(frozen=True, eq=False)
class FlowMap:
    field: VectorField
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = 0.1

    def __post_init__(self):
        Tolerance(self.rtol, self.atol, self.max_step)  # validates

    @property
    def tol(self) -> Tolerance:
        return Tolerance(self.rtol, self.atol, self.max_step)

    def __call__(self, x0, t):
        return flow(self, x0, t)


def flow(F: FlowMap, x0, t) -> np.ndarray:
    """Time-t flow of ``F.field``; ``x0`` may be one point or a stack, ``t`` per point."""
    x0 = np.asarray(x0, dtype=float)
    single = x0.ndim == 1
    X = np.atleast_2d(x0)
    if not np.all(F.field.domain.contains(X)):
        bad = X[~F.field.domain.contains(X)][0]
        raise DomainExitError(0.0, bad, "start point outside the domain")
    sol = integrate(F.field, X, t, F.tol, F.field.domain)
    return sol.y[0] if single else sol.y


def trajectory(F: FlowMap, x0, t: float):
    """Accepted integrator states of one trajectory: (times, points)."""
    X = np.atleast_2d(np.asarray(x0, dtype=float))
    sol = integrate(F.field, X, t, F.tol, F.field.domain, record=True)
    times = np.array(sol.s) * t
    pts = np.array([y[0] for y in sol.ys])
    return times, pts


@dataclass
class DistortionReport:
    point: np.ndarray
    time: float
    jacobian: np.ndarray
    opnorm: float
    min_norm: float
    det: float
    K_estimate: float
    singular: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["point"] = self.point.tolist()
        d["jacobian"] = self.jacobian.tolist()
        return d


def _reports_from(D, points, t) -> list:
    n = D.shape[-1]
    sv = np.linalg.svd(D, compute_uv=False)
    det = np.linalg.det(D)
    out = []
    for i in range(D.shape[0]):
        big, small, d = float(sv[i, 0]), float(sv[i, -1]), float(det[i])
        singular = abs(d) < SINGULAR_DET
        if singular:
            K = float("inf")
        else:
            K = max(big**n / abs(d), abs(d) / small**n)
        out.append(DistortionReport(points[i].copy(), float(t), D[i], big, small, d, K, singular))
    return out


def flow_jacobian_batch(F: FlowMap, points, t: float, h: float = 1e-5) -> list:
    """Distortion reports at each point; one batched integration of all stencils."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    eye = np.eye(n)
    xp = (P[:, None, :] + h * eye[None]).reshape(-1, n)
    xm = (P[:, None, :] - h * eye[None]).reshape(-1, n)
    Y = flow(F, np.concatenate([xp, xm]), t)
    yp = Y[: m * n].reshape(m, n, n)
    ym = Y[m * n :].reshape(m, n, n)
    # divide by the realized step so that t = 0 gives the identity exactly
    dx = (xp - xm).reshape(m, n, n)[:, np.arange(n), np.arange(n)]
    D = np.swapaxes(yp - ym, 1, 2) / dx[:, None, :]
    return _reports_from(D, P, t)


def flow_jacobian(F: FlowMap, x0, t: float, h: float = 1e-5) -> DistortionReport:
    return flow_jacobian_batch(F, np.asarray(x0, dtype=float)[None, :], t, h)[0]


def sampled_divergence_bound(field: VectorField, points, h=None) -> float:
    J, _, ok = jacobian_batch(field, points, h)
    check_singular_fraction(ok)
    div = np.trace(J[ok], axis1=1, axis2=2)
    return float(np.max(np.abs(div)))


def liouville_check(F: FlowMap, grid, t_values, div_bound: float, tol: float = 1e-3,
                    h: float = 1e-5) -> dict:
    """Check exp(-|t| B)(1 - tol) <= det D phi_t <= exp(|t| B)(1 + tol) on the grid."""
    rows, violations = [], []
    for t in t_values:
        reports = flow_jacobian_batch(F, grid, t, h)
        lower = np.exp(-abs(t) * div_bound) * (1.0 - tol)
        upper = np.exp(abs(t) * div_bound) * (1.0 + tol)
        dets = np.array([r.det for r in reports])
        for r in reports:
            if not lower <= r.det <= upper:
                violations.append({"t": float(t), "point": r.point.tolist(), "det": r.det})
        rows.append({
            "t": float(t), "lower": float(lower), "upper": float(upper),
            "det_min": float(dets.min()), "det_max": float(dets.max()),
        })
    return {
        "div_bound": float(div_bound),
        "tol": tol,
        "rows": rows,
        "violations": violations,
        "passed": not violations,
    }


def qc_growth_profile(F: FlowMap, grid, t_values, h: float = 1e-5) -> dict:
    """Max distortion per time and a least-squares fit log K = c |t|."""
    profile = []
    for t in t_values:
        reports = flow_jacobian_batch(F, grid, t, h)
        profile.append((float(t), max(r.K_estimate for r in reports)))
    ts = np.abs(np.array([p[0] for p in profile]))
    logK = np.log(np.array([p[1] for p in profile]))
    denom = float(np.sum(ts**2))
    c = float(np.sum(ts * logK) / denom) if denom > 0 else 0.0
    resid = float(np.sqrt(np.mean((logK - c * ts) ** 2)))
    return {"profile": profile, "c": c, "residual": resid}


def commutation_defect(F: FlowMap, G: FlowMap, grid, s: float, t: float) -> float:
    """max |phi_t(psi_s(x)) - psi_s(phi_t(x))| with phi from F, psi from G."""
    P = np.atleast_2d(np.asarray(grid, dtype=float))
    a = flow(F, flow(G, P, s), t)
    b = flow(G, flow(F, P, t), s)
    return float(np.max(np.linalg.norm(a - b, axis=1)))


def mollification_stability(X: VectorField, eps_list, grid, t: float, rtol: float = 1e-9,
                            atol: float = 1e-12, max_step: float = 0.1) -> list:
    """Grid-mean distance between the flows of X^eps and X at time t."""
    P = np.atleast_2d(np.asarray(grid, dtype=float))
    ref = flow(FlowMap(X, rtol, atol, max_step), P, t)
    out = []
    for eps in eps_list:
        Fe = FlowMap(MollifiedField(X, eps), rtol, atol, max_step)
        ye = flow(Fe, P, t)
        out.append((float(eps), float(np.mean(np.linalg.norm(ye - ref, axis=1)))))
    return out
