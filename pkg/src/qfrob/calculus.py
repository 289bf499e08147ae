"""Finite-difference calculus for vector fields.

Central differences with a scale-aware default step ``1e-5 * max(1, |x|)``.
The ``*_batch`` functions work on stacks of points, mark points whose
stencils hit a singularity instead of raising, and are what the sampling
code uses.  The scalar functions raise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EvaluationSingularity
from .fields import VectorField

__all__ = [
    "JacobianEstimate",
    "default_step",
    "jacobian",
    "jacobian_batch",
    "divergence",
    "anticonformal_part",
    "anticonformal_from_jacobian",
    "lie_bracket",
    "bracket_batch",
    "growth_ratio",
    "check_singular_fraction",
]

MAX_HALVINGS = 4
SINGULAR_FRACTION = 0.01


@dataclass(frozen=True)
class JacobianEstimate:
    matrix: np.ndarray
    point: np.ndarray
    step: float


def default_step(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 1e-5 * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def jacobian_batch(f: VectorField, points, h=None):
    """Central-difference Jacobians at each row of ``points``.

    Returns ``(J, steps, ok)`` with ``J`` of shape (m, n, n).  A stencil
    with non-finite values is retried with the step halved, up to four
    times; rows that still fail have ``ok`` False and NaN entries.
    """
    X = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = X.shape
    steps = default_step(X) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (m,)).copy()
    J = np.full((m, n, n), np.nan)
    pending = np.arange(m)
    eye = np.eye(n)
    for _ in range(MAX_HALVINGS + 1):
        if pending.size == 0:
            break
        hp = steps[pending][:, None, None]
        xp = X[pending][:, None, :] + hp * eye[None]
        xm = X[pending][:, None, :] - hp * eye[None]
        with np.errstate(all="ignore"):
            fp = f(xp)
            fm = f(xm)
        # fp[:, j, i] = f_i(x + h e_j)
        Jp = np.swapaxes(fp - fm, 1, 2) / (2.0 * hp)
        good = np.all(np.isfinite(Jp), axis=(1, 2))
        J[pending[good]] = Jp[good]
        pending = pending[~good]
        steps[pending] *= 0.5
    ok = np.ones(m, dtype=bool)
    ok[pending] = False
    return J, steps, ok


def check_singular_fraction(ok, what: str = "stencil points") -> int:
    """Raise if more than 1% of the requested points were singular."""
    ok = np.asarray(ok, dtype=bool)
    bad = int(ok.size - np.count_nonzero(ok))
    if ok.size and bad > SINGULAR_FRACTION * ok.size:
        raise EvaluationSingularity(f"{bad} of {ok.size} {what} are singular")
    return bad


def _single(f: VectorField, x, h):
    x = np.asarray(x, dtype=float).reshape(-1)
    step = float(default_step(x)) if h is None else float(h)
    if not f.domain.contains(x, margin=step):
        raise DomainError("finite-difference stencil leaves the domain")
    J, steps, ok = jacobian_batch(f, x[None, :], step)
    if not ok[0]:
        raise EvaluationSingularity(f"singular stencil at x={x.tolist()} after {MAX_HALVINGS} step halvings")
    return J[0], float(steps[0]), x


def jacobian(f: VectorField, x, h=None) -> JacobianEstimate:
    J, step, x = _single(f, x, h)
    return JacobianEstimate(J, x, step)


def divergence(f: VectorField, x, h=None) -> float:
    J, _, _ = _single(f, x, h)
    return float(np.trace(J))


def anticonformal_from_jacobian(J) -> np.ndarray:
    """Symmetric trace-free part 1/2 (J + J^T) - tr(J)/n I, batched over leading axes."""
    J = np.asarray(J, dtype=float)
    n = J.shape[-1]
    S = 0.5 * (J + np.swapaxes(J, -1, -2))
    tr = np.trace(J, axis1=-2, axis2=-1)
    return S - (tr / n)[..., None, None] * np.eye(n)


def anticonformal_part(f: VectorField, x, h=None) -> np.ndarray:
    J, _, _ = _single(f, x, h)
    return anticonformal_from_jacobian(J)


def bracket_batch(X: VectorField, Y: VectorField, points, h=None):
    """[X, Y] = DX(Y) - DY(X) at each row; returns (values, ok)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    JX, _, okx = jacobian_batch(X, P, h)
    JY, _, oky = jacobian_batch(Y, P, h)
    with np.errstate(all="ignore"):
        xv = X(P)
        yv = Y(P)
    out = np.einsum("mij,mj->mi", JX, yv) - np.einsum("mij,mj->mi", JY, xv)
    ok = okx & oky & np.all(np.isfinite(out), axis=1)
    return out, ok


def lie_bracket(X: VectorField, Y: VectorField, x, h=None) -> np.ndarray:
    JX, _, x = _single(X, x, h)
    JY, _, _ = _single(Y, x, h)
    xv = X.evaluate(x)
    yv = Y.evaluate(x)
    return JX @ yv - JY @ xv


def _sphere_directions(n: int, count: int, seed: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    g = np.random.default_rng(seed).standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def growth_ratio(f: VectorField, radii, samples_per_radius: int = 64, seed: int = 0):
    """For each R, max over sampled |x| = R of |f(x)| / (R log R)."""
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("empty radius list")
    if any(r <= 1.0 for r in radii):
        raise ValueError("radii must exceed 1 so that log R > 0")
    U = _sphere_directions(f.n, samples_per_radius, seed)
    out = []
    for R in radii:
        pts = R * U
        if not np.all(f.domain.contains(pts)):
            raise DomainError(f"sphere of radius {R:g} leaves the domain")
        with np.errstate(all="ignore"):
            norms = np.linalg.norm(f(pts), axis=1)
        finite = np.isfinite(norms)
        check_singular_fraction(finite, "sphere samples")
        out.append((R, float(np.max(norms[finite])) / (R * np.log(R))))
    return out
