"""Sampled lower bounds for the Q, Zygmund, Lipschitz and |Sf| sup-seminorms.

Sampling is nested: the first B base points and first P direction pairs of
a larger configuration coincide with the smaller one, so raising the effort
never lowers an estimate.  Local refinement runs from the best sample of
every dyadic prefix (B/2^l, P/2^l) for the same reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .calculus import anticonformal_from_jacobian, check_singular_fraction, jacobian_batch
from .errors import SpecError
from .fields import DomainBox, VectorField
from .grids import chunk_slices, map_chunks

__all__ = [
    "SamplingConfig",
    "SeminormEstimate",
    "geometric_radii",
    "estimate_q",
    "estimate_zygmund",
    "estimate_lipschitz",
    "estimate_sf_esssup",
    "q_oracle_linear",
    "q_quotient",
    "zygmund_quotient",
    "lipschitz_quotient",
    "chain_verdict",
]

CHUNK = 16  # base points per work unit; fixed so results do not depend on threads


def geometric_radii(domain: DomainBox, count: int = 8, largest: float = 0.25, ratio: float = 100.0):
    """``count`` radii from w*largest/ratio up to w*largest, w the narrowest box width."""
    top = largest * float(np.min(domain.widths))
    return tuple(float(r) for r in np.geomspace(top / ratio, top, count))


@dataclass(frozen=True)
class SamplingConfig:
    base_points: int = 200
    direction_pairs: int = 400
    radii: tuple | None = None
    rng_seed: int = 0
    refine_steps: int = 20
    threads: int = 1

    def __post_init__(self):
        if self.base_points < 1 or self.direction_pairs < 1 or self.refine_steps < 0:
            raise SpecError("sampling counts must be >= 1")
        if self.radii is not None:
            r = tuple(float(v) for v in self.radii)
            if not r or min(r) <= 0:
                raise SpecError("radii must be positive")
            object.__setattr__(self, "radii", r)

    def resolved_radii(self, domain: DomainBox) -> tuple:
        return self.radii if self.radii is not None else geometric_radii(domain)

    def to_dict(self) -> dict:
        return {
            "base_points": self.base_points,
            "direction_pairs": self.direction_pairs,
            "radii": None if self.radii is None else list(self.radii),
            "rng_seed": self.rng_seed,
            "refine_steps": self.refine_steps,
        }


@dataclass
class SeminormEstimate:
    kind: str
    value: float
    witness: dict
    config: SamplingConfig
    samples: int = 0
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "witness": self.witness,
            "config": self.config.to_dict(),
            "samples": self.samples,
            "skipped": self.skipped,
            **self.extra,
        }


# ---------------------------------------------------------------- quotients


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def zygmund_quotient(f: VectorField, x, y):
    """|f(x+y) + f(x-y) - 2 f(x)| / |y|, written as a sum of two increments."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    fx = f(x)
    d = (f(x + y) - fx) + (f(x - y) - fx)
    return np.linalg.norm(d, axis=-1) / np.linalg.norm(y, axis=-1)


def q_quotient(f: VectorField, x, a, b=None):
    """|<a, f(x+a)-f(x)>/|a|^2 - <b, f(x+b)-f(x)>/|b|^2|.

    In one dimension the only nontrivial choice is b = -a, and the quotient
    collapses to the Zygmund quotient at y = a; ``b`` is ignored there.
    """
    x, a = np.asarray(x, dtype=float), np.asarray(a, dtype=float)
    if x.shape[-1] == 1:
        return zygmund_quotient(f, x, a)
    b = np.asarray(b, dtype=float)
    fx = f(x)
    qa = _dot(a, f(x + a) - fx) / _dot(a, a)
    qb = _dot(b, f(x + b) - fx) / _dot(b, b)
    return np.abs(qa - qb)


def lipschitz_quotient(f: VectorField, x, a):
    """|f(x+a) - f(x)| / |a|."""
    x, a = np.asarray(x, dtype=float), np.asarray(a, dtype=float)
    return np.linalg.norm(f(x + a) - f(x), axis=-1) / np.linalg.norm(a, axis=-1)


# ---------------------------------------------------------------- sampling


def _base_points(box: DomainBox, count: int, seed: int) -> np.ndarray:
    u = qmc.Halton(d=box.n, scramble=True, seed=seed).random(count)
    return box.lo_array + u * box.widths


def _directions(seed: int, i: int, pairs: int, n: int) -> np.ndarray:
    """Unit directions for base point i, shape (pairs, 2, n); prefix-stable in ``pairs``."""
    g = np.random.default_rng([seed, i]).standard_normal((pairs, 2, n))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


class _Problem:
    """One sup-estimation problem over parameters theta = (x, v1[, v2])."""

    def __init__(self, kind, f, cfg: SamplingConfig, n_vec: int, quotient):
        self.kind = kind
        self.f = f
        self.cfg = cfg
        self.n = f.n
        self.n_vec = n_vec
        self.quotient = quotient
        self.radii = np.array(cfg.resolved_radii(f.domain))
        try:
            self.box = f.domain.shrink(float(self.radii.max()))
        except SpecError as exc:
            raise SpecError(f"degenerate domain for radius {self.radii.max():g}: {exc}") from exc

    def split(self, theta):
        n = self.n
        parts = [theta[..., k * n:(k + 1) * n] for k in range(1 + self.n_vec)]
        return parts

    def value(self, theta):
        with np.errstate(all="ignore"):
            return self.quotient(self.f, *self.split(theta))

    def samples_for_chunk(self, X, idx):
        B = len(idx)
        P = self.cfg.direction_pairs
        R = len(self.radii)
        r = self.radii[np.arange(P) % R]
        thetas = np.empty((B, P, self.n * (1 + self.n_vec)))
        for row, i in enumerate(idx):
            d = _directions(self.cfg.rng_seed, int(i), P, self.n)
            parts = [np.broadcast_to(X[row], (P, self.n))]
            for k in range(self.n_vec):
                parts.append(r[:, None] * d[:, k, :])
            thetas[row] = np.concatenate(parts, axis=1)
        return thetas, self.value(thetas)

    def clamp(self, theta):
        n = self.n
        x = np.clip(theta[:n], self.box.lo_array, self.box.hi_array)
        out = [x]
        if self.n_vec:
            a = theta[n:2 * n]
            ra = np.linalg.norm(a)
            rc = min(max(ra, self.radii.min()), self.radii.max())
            a = a * (rc / ra)
            out.append(a)
            if self.n_vec == 2:
                b = theta[2 * n:]
                out.append(b * (rc / np.linalg.norm(b)))
        return np.concatenate(out)

    def refine(self, theta, val, stream):
        """Multiplicative hill-climbing: 1 +- 0.3 decaying geometrically."""
        rng = np.random.default_rng([self.cfg.rng_seed, 7919, *stream])
        best, best_val = theta.copy(), val
        scale = 0.3
        for _ in range(self.cfg.refine_steps):
            u = rng.uniform(-1.0, 1.0, size=(4, theta.size))
            cands = np.array([self.clamp(best * (1.0 + scale * ui)) for ui in u])
            vals = self.value(cands)
            vals = np.where(np.isfinite(vals), vals, -np.inf)
            j = int(np.argmax(vals))
            if vals[j] > best_val:
                best, best_val = cands[j], float(vals[j])
            scale *= 0.85
        return best, best_val

    def witness(self, theta) -> dict:
        names = ["x", "a", "b"] if self.kind == "Q" else ["x", "y"]
        if self.kind == "Q" and self.n == 1:
            names = ["x", "a"]
        return {nm: p.tolist() for nm, p in zip(names, self.split(theta))}

    def run(self) -> SeminormEstimate:
        cfg = self.cfg
        B, P = cfg.base_points, cfg.direction_pairs
        X = _base_points(self.box, B, cfg.rng_seed)
        chunks = chunk_slices(B, CHUNK)

        def work(sl):
            return self.samples_for_chunk(X[sl], np.arange(B)[sl])

        parts = map_chunks(work, chunks, cfg.threads)
        thetas = np.concatenate([p[0] for p in parts])
        vals = np.concatenate([p[1] for p in parts])
        finite = np.isfinite(vals)
        skipped = check_singular_fraction(finite, "samples")
        vals = np.where(finite, vals, -np.inf)

        best_theta, best_val = None, -np.inf
        b, p = B, P
        levels = []
        while True:
            levels.append((b, p))
            if b == 1 and p == 1:
                break
            b, p = math.ceil(b / 2), math.ceil(p / 2)
        for b, p in levels:
            sub = vals[:b, :p]
            i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
            start, start_val = thetas[i, j], float(sub[i, j])
            if start_val > best_val:
                best_theta, best_val = start, start_val
            if cfg.refine_steps and np.isfinite(start_val):
                th, v = self.refine(start, start_val, (b, p))
                if v > best_val:
                    best_theta, best_val = th, v
        value = float(self.value(best_theta[None, :])[0])
        return SeminormEstimate(self.kind, value, self.witness(best_theta), cfg,
                                samples=int(vals.size), skipped=skipped)


def estimate_q(f: VectorField, cfg: SamplingConfig = SamplingConfig()) -> SeminormEstimate:
    if f.n == 1:
        # b = -a; share the Zygmund sampler bit for bit
        return _Problem("Q", f, cfg, 1, q_quotient).run()
    return _Problem("Q", f, cfg, 2, q_quotient).run()


def estimate_zygmund(f: VectorField, cfg: SamplingConfig = SamplingConfig()) -> SeminormEstimate:
    return _Problem("Zygmund", f, cfg, 1, zygmund_quotient).run()


def estimate_lipschitz(f: VectorField, cfg: SamplingConfig = SamplingConfig()) -> SeminormEstimate:
    return _Problem("Lipschitz", f, cfg, 1, lipschitz_quotient).run()


def q_oracle_linear(A) -> float:
    """Exact Q seminorm of x -> Ax: spread of the eigenvalues of sym(A)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(w[-1] - w[0])


def estimate_sf_esssup(f: VectorField, cfg: SamplingConfig = SamplingConfig(), h=None) -> SeminormEstimate:
    """Max (and 99th percentile) of |Sf(x)|_op over sampled x."""
    margin = 2e-5 * max(1.0, float(np.max(np.abs(np.concatenate([f.domain.lo_array, f.domain.hi_array])))))
    box = f.domain.shrink(margin if h is None else 2.0 * float(h))
    X = _base_points(box, cfg.base_points, cfg.rng_seed)

    def norms(P):
        J, _, ok = jacobian_batch(f, P, h)
        S = anticonformal_from_jacobian(np.where(ok[:, None, None], J, 0.0))
        v = np.linalg.norm(S, ord=2, axis=(1, 2))
        return np.where(ok, v, np.nan)

    vals = np.concatenate(map_chunks(norms, [X[sl] for sl in chunk_slices(len(X), 256)], cfg.threads))
    finite = np.isfinite(vals)
    skipped = check_singular_fraction(finite, "base points")
    i = int(np.nanargmax(vals))
    best_x, best = X[i], float(vals[i])
    if cfg.refine_steps:
        rng = np.random.default_rng([cfg.rng_seed, 104729])
        scale = 0.3
        for _ in range(cfg.refine_steps):
            cands = np.clip(best_x * (1.0 + scale * rng.uniform(-1, 1, (4, f.n))), box.lo_array, box.hi_array)
            cv = norms(cands)
            j = int(np.nanargmax(np.where(np.isfinite(cv), cv, -np.inf)))
            if np.isfinite(cv[j]) and cv[j] > best:
                best_x, best = cands[j], float(cv[j])
            scale *= 0.85
    value = float(norms(best_x[None, :])[0])
    p99 = float(np.percentile(vals[finite], 99))
    return SeminormEstimate("Sf-esssup", value, {"x": best_x.tolist()}, cfg,
                            samples=int(vals.size), skipped=skipped, extra={"p99": p99})


def chain_verdict(z: float, q: float, l: float, slack: float = 0.05, atol: float = 1e-12) -> dict:
    """Check Z <= 4Q <= 8L on estimates.

    ``slack`` absorbs sampling noise; ``atol`` absorbs rounding in quotients
    that vanish identically (e.g. Z of a linear field).
    """
    first = z <= 4.0 * q * (1.0 + slack) + atol
    second = 4.0 * q <= 8.0 * l * (1.0 + slack) + atol
    return {
        "Z<=4Q": bool(first),
        "4Q<=8L": bool(second),
        "slack": slack,
        "atol": atol,
        "verdict": "PASS" if first and second else "FAIL",
    }
