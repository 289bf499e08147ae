"""Plane fields given by frames: transverse splits, bumps, lifts, involutivity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .calculus import bracket_batch, check_singular_fraction
from .errors import DegenerateFrameError, SpecError
from .fields import ConstantField, DomainBox, VectorField
from .grids import cube_grid

__all__ = [
    "PlaneField",
    "TransverseSplit",
    "BumpFunction",
    "LiftedField",
    "make_bump",
    "bump_profile",
    "select_split",
    "lift",
    "coordinate_lift",
    "orthonormal_frame",
    "normal_component",
    "involutivity_residual",
    "INVOLUTIVITY_GATE",
]

MIN_MARGIN = 1e-6
RANK_TOL = 1e-8
INVOLUTIVITY_GATE = 1e-4


@dataclass(frozen=True, eq=False)
class PlaneField:
    """A k-plane field spanned at each point by the columns of its frame."""

    n: int
    k: int
    frame: tuple
    domain: DomainBox

    def __post_init__(self):
        frame = tuple(self.frame)
        if not 1 <= self.k < self.n:
            raise SpecError(f"rank must satisfy 1 <= k < n, got k={self.k}, n={self.n}")
        if len(frame) != self.k:
            raise SpecError(f"frame has {len(frame)} fields, rank is {self.k}")
        if any(f.n != self.n for f in frame):
            raise SpecError("frame fields must all have the ambient dimension")
        object.__setattr__(self, "frame", frame)

    def frame_matrix(self, q) -> np.ndarray:
        """Frame at points q: shape (..., n, k), columns are the frame fields."""
        q = np.asarray(q, dtype=float)
        with np.errstate(all="ignore"):
            return np.stack([f(q) for f in self.frame], axis=-1)

    def min_singular(self, q) -> np.ndarray:
        return np.linalg.svd(self.frame_matrix(q), compute_uv=False)[..., -1]

    def describe(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "frame": [f.describe() for f in self.frame],
            "domain": self.domain.to_dict(),
        }


@dataclass(frozen=True)
class TransverseSplit:
    tangent: tuple  # 0-based coordinate indices spanning K_p
    normal: tuple  # complementary indices spanning H_p
    margin: float

    def to_dict(self) -> dict:
        # reported 1-based, like the variable names x1..xn
        return {
            "tangent_indices": [i + 1 for i in self.tangent],
            "normal_indices": [i + 1 for i in self.normal],
            "margin": self.margin,
        }


def bump_profile(t):
    """1 for |t| <= 1, 0 for |t| >= 2, C-infinity in between."""
    t = np.abs(np.asarray(t, dtype=float))

    def e(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a = e(2.0 - t)
    b = e(t - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpFunction:
    inner_lo: tuple
    inner_hi: tuple
    outer_lo: tuple
    outer_hi: tuple

    @property
    def k(self) -> int:
        return len(self.inner_lo)

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        ilo, ihi = np.array(self.inner_lo), np.array(self.inner_hi)
        olo, ohi = np.array(self.outer_lo), np.array(self.outer_hi)
        t = np.zeros_like(u)
        below = u < ilo
        above = u > ihi
        t = np.where(below, 1.0 + (ilo - u) / (ilo - olo), t)
        t = np.where(above, 1.0 + (u - ihi) / (ohi - ihi), t)
        return np.prod(bump_profile(t), axis=-1)

    def to_dict(self) -> dict:
        return {
            "inner": {"lo": list(self.inner_lo), "hi": list(self.inner_hi)},
            "outer": {"lo": list(self.outer_lo), "hi": list(self.outer_hi)},
        }


def make_bump(inner: DomainBox, outer: DomainBox) -> BumpFunction:
    """Tensor-product bump equal to 1 on ``inner`` and 0 outside ``outer``."""
    if inner.n != outer.n:
        raise SpecError("inner and outer boxes differ in dimension")
    if not (np.all(outer.lo_array < inner.lo_array) and np.all(inner.hi_array < outer.hi_array)):
        raise SpecError("inner box must lie strictly inside the outer box")
    return BumpFunction(inner.lo, inner.hi, outer.lo, outer.hi)


def _projected_sigma(E: PlaneField, q, idx) -> np.ndarray:
    B = E.frame_matrix(q)[..., list(idx), :]
    return np.linalg.svd(B, compute_uv=False)[..., -1]


def select_split(E: PlaneField, p, probe_half: float = 0.05, probe_points: int = 3) -> TransverseSplit:
    """Coordinate splitting with the best-conditioned projected frame at p.

    Ties go to the lexicographically first tangent index set.  The margin is
    the smallest projected singular value over a probe cube around p.
    """
    p = np.asarray(p, dtype=float)
    if not E.domain.contains(p):
        raise SpecError("base point outside the plane-field domain")
    best, best_sigma = None, -np.inf
    for idx in itertools.combinations(range(E.n), E.k):
        s = float(_projected_sigma(E, p[None, :], idx)[0])
        if np.isfinite(s) and s > best_sigma * (1.0 + 1e-12) + 1e-15:
            best, best_sigma = idx, s
    if best is None or best_sigma < MIN_MARGIN:
        raise DegenerateFrameError(f"no transverse coordinate splitting at p={p.tolist()}")
    probe = cube_grid(p, probe_half, probe_points)
    probe = probe[E.domain.contains(probe)]
    margin = float(np.min(_projected_sigma(E, probe, best)))
    if not margin >= MIN_MARGIN:
        raise DegenerateFrameError(f"projected frame degenerates near p (margin {margin:g})")
    normal = tuple(i for i in range(E.n) if i not in best)
    return TransverseSplit(tuple(best), normal, margin)


@dataclass(frozen=True, eq=False)
class LiftedField(VectorField):
    """q -> B(q) (pi B(q))^{-1} (beta V)(pi q) on the support of beta, else 0."""

    plane: PlaneField
    split: TransverseSplit
    base: VectorField  # field on the k tangent coordinates
    bump: BumpFunction

    @property
    def n(self) -> int:
        return self.plane.n

    @property
    def domain(self) -> DomainBox:
        return self.plane.domain

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        shape = q.shape
        Q = q.reshape(-1, self.n)
        T = list(self.split.tangent)
        u = Q[:, T]
        beta = self.bump(u)
        out = np.zeros_like(Q)
        live = beta > 0
        if np.any(live):
            B = self.plane.frame_matrix(Q[live])
            rhs = beta[live, None] * self.base(u[live])
            try:
                coef = np.linalg.solve(B[:, T, :], rhs[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise DegenerateFrameError("projected frame singular inside the bump support") from exc
            out[live] = np.einsum("mnk,mk->mn", B, coef)
        return out.reshape(shape)

    def describe(self):
        return {
            "kind": "LiftedField",
            "split": self.split.to_dict(),
            "base": self.base.describe(),
            "bump": self.bump.to_dict(),
        }


def lift(E: PlaneField, split: TransverseSplit, V: VectorField, bump: BumpFunction) -> LiftedField:
    if V.n != E.k or bump.k != E.k:
        raise SpecError("base field and bump must live on the k tangent coordinates")
    if split.margin < MIN_MARGIN:
        raise DegenerateFrameError(f"split margin {split.margin:g} below {MIN_MARGIN:g}")
    return LiftedField(E, split, V, bump)


def coordinate_lift(E: PlaneField, split: TransverseSplit, i: int, bump: BumpFunction) -> LiftedField:
    """Lift of beta * d/du_i, the i-th tangent coordinate field (0-based)."""
    e = np.zeros(E.k)
    e[i] = 1.0
    lo = [bump.outer_lo[j] for j in range(E.k)]
    hi = [bump.outer_hi[j] for j in range(E.k)]
    return lift(E, split, ConstantField(tuple(e), DomainBox(tuple(lo), tuple(hi))), bump)


def orthonormal_frame(B) -> np.ndarray:
    """Orthonormal basis of the column span, batched; (..., n, k)."""
    Q, _ = np.linalg.qr(B)
    return Q


def normal_component(Q, v) -> np.ndarray:
    """(I - P_E) v, with P_E = Q Q^T."""
    return v - np.einsum("...nk,...k->...n", Q, np.einsum("...nk,...n->...k", Q, v))


def involutivity_residual(E: PlaneField, grid, h=None, gate: float = INVOLUTIVITY_GATE) -> dict:
    """Normalized distance of frame brackets from the plane field.

    r = |(I - P_E)[X_i, X_j]| / (1 + |[X_i, X_j]|) over all pairs and grid
    points; the 99th percentile decides involutivity, the max is reported.
    """
    P = np.atleast_2d(np.asarray(grid, dtype=float))
    sig = E.min_singular(P)
    if not np.all(sig >= RANK_TOL):
        raise DegenerateFrameError(f"frame rank drops on the grid (min singular value {np.nanmin(sig):g})")
    Q = orthonormal_frame(E.frame_matrix(P))
    res, pts, oks = [], [], []
    for i, j in itertools.combinations(range(E.k), 2):
        br, ok = bracket_batch(E.frame[i], E.frame[j], P, h)
        perp = normal_component(Q, br)
        r = np.linalg.norm(perp, axis=1) / (1.0 + np.linalg.norm(br, axis=1))
        res.append(r)
        pts.append(P)
        oks.append(ok)
    if not res:
        # rank one: a single field is always involutive
        return {
            "max": 0.0, "p99": 0.0, "worst_point": P[0].tolist(), "points": len(P),
            "pairs": 0, "skipped": 0, "gate": gate, "involutive": True,
        }
    r = np.concatenate(res)
    ok = np.concatenate(oks)
    skipped = check_singular_fraction(ok, "bracket stencils")
    allpts = np.concatenate(pts)
    rv = r[ok]
    worst = int(np.argmax(rv))
    p99 = float(np.percentile(rv, 99))
    return {
        "max": float(rv[worst]),
        "p99": p99,
        "worst_point": allpts[ok][worst].tolist(),
        "points": len(P),
        "pairs": len(res),
        "skipped": skipped,
        "gate": gate,
        "involutive": bool(p99 <= gate),
    }
