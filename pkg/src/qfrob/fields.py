"""Vector fields on boxes in R^n.

Every field is callable on arrays of points with shape (..., n) and returns
values of the same shape.  Calling a field directly performs no checks;
:meth:`VectorField.evaluate` enforces the domain and finiteness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import expr as _expr
from .errors import DomainError, EvaluationSingularity, SpecError

__all__ = [
    "DomainBox",
    "VectorField",
    "ConstantField",
    "LinearField",
    "ExpressionField",
    "SumField",
    "ScaledField",
    "MollifiedField",
    "CatalogField",
    "parse_field",
    "evaluate",
]


@dataclass(frozen=True)
class DomainBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) == 0 or len(lo) != len(hi):
            raise SpecError("domain bounds must be non-empty and of equal length")
        if not all(a < b for a, b in zip(lo, hi)):
            raise SpecError(f"degenerate domain box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, n: int, half: float, center=None) -> "DomainBox":
        c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
        return cls(tuple(c - half), tuple(c + half))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi_array - self.lo_array

    def contains(self, x, margin: float = 0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo_array + margin) & (x <= self.hi_array - margin), axis=-1)

    def shrink(self, r: float) -> "DomainBox":
        lo, hi = self.lo_array + r, self.hi_array - r
        if np.any(lo >= hi):
            raise SpecError(f"margin {r:g} exceeds half-width of the domain box")
        return DomainBox(tuple(lo), tuple(hi))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


class VectorField:
    """Base class.  Subclasses define ``n``, ``domain`` and ``__call__``."""

    n: int
    domain: DomainBox

    def __call__(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise SpecError(f"point has dimension {x.shape[-1]}, field has {self.n}")
        inside = self.domain.contains(x)
        if not np.all(inside):
            raise DomainError(f"point outside domain {self.domain.to_dict()}")
        with np.errstate(all="ignore"):
            v = self(x)
        if not np.all(np.isfinite(v)):
            raise EvaluationSingularity("non-finite field value")
        return v

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "n": self.n, "domain": self.domain.to_dict()}

    def __add__(self, other: "VectorField") -> "SumField":
        if not isinstance(other, VectorField):
            return NotImplemented
        return SumField((self, other))

    def __mul__(self, s: float) -> "ScaledField":
        return ScaledField(float(s), self)

    __rmul__ = __mul__

    def __neg__(self) -> "ScaledField":
        return ScaledField(-1.0, self)

    def __sub__(self, other: "VectorField") -> "SumField":
        return SumField((self, ScaledField(-1.0, other)))


def _default_domain(n: int) -> DomainBox:
    return DomainBox.cube(n, 4.0)


@dataclass(frozen=True, eq=False)
class ConstantField(VectorField):
    vector: tuple
    domain: DomainBox = None

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(v) for v in self.vector))
        if self.domain is None:
            object.__setattr__(self, "domain", _default_domain(len(self.vector)))

    @property
    def n(self) -> int:
        return len(self.vector)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.array(self.vector), x.shape).copy()

    def describe(self):
        return {**super().describe(), "vector": list(self.vector)}


@dataclass(frozen=True, eq=False)
class LinearField(VectorField):
    """x -> A x."""

    matrix: tuple
    domain: DomainBox = None
    _A: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise SpecError(f"linear field needs a square matrix, got shape {A.shape}")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", tuple(map(tuple, A.tolist())))
        object.__setattr__(self, "_A", A)
        if self.domain is None:
            object.__setattr__(self, "domain", _default_domain(A.shape[0]))

    @property
    def n(self) -> int:
        return self._A.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self._A

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self._A.T

    def describe(self):
        return {**super().describe(), "matrix": [list(r) for r in self.matrix]}


@dataclass(frozen=True, eq=False)
class ExpressionField(VectorField):
    components: tuple
    domain: DomainBox = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.domain is None:
            object.__setattr__(self, "domain", _default_domain(len(self.components)))

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def text(self) -> str:
        return "; ".join(_expr.to_text(c) for c in self.components)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            cols = [np.broadcast_to(_expr.evaluate_node(c, x), x.shape[:-1]) for c in self.components]
        return np.stack(cols, axis=-1)

    def describe(self):
        return {**super().describe(), "expression": self.text}


@dataclass(frozen=True, eq=False)
class SumField(VectorField):
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms or len({t.n for t in terms}) != 1:
            raise SpecError("sum of fields needs at least one term and equal dimensions")
        object.__setattr__(self, "terms", terms)

    @property
    def n(self) -> int:
        return self.terms[0].n

    @property
    def domain(self) -> DomainBox:
        lo = np.max([t.domain.lo_array for t in self.terms], axis=0)
        hi = np.min([t.domain.hi_array for t in self.terms], axis=0)
        return DomainBox(tuple(lo), tuple(hi))

    def __call__(self, x):
        out = self.terms[0](x)
        for t in self.terms[1:]:
            out = out + t(x)
        return out

    def describe(self):
        return {"kind": "SumField", "n": self.n, "terms": [t.describe() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class ScaledField(VectorField):
    scale: float
    inner: VectorField

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def domain(self) -> DomainBox:
        return self.inner.domain

    def __call__(self, x):
        return self.scale * self.inner(x)

    def describe(self):
        return {"kind": "ScaledField", "scale": self.scale, "inner": self.inner.describe()}


_GAUSS_POINTS = 7
_gl_x, _gl_w = leggauss(_GAUSS_POINTS)
# nodes/weights on the unit cell [0, 1]
_CELL_NODES = 0.5 * (_gl_x + 1.0)
_CELL_WEIGHTS = 0.5 * _gl_w
# three consecutive cells cover [x - eps, x + eps] for any x
_AXIS_OFFSETS = (np.arange(3)[:, None] + _CELL_NODES[None, :]).ravel()
_AXIS_WEIGHTS = np.tile(_CELL_WEIGHTS, 3)


def bump_kernel(u2):
    """Unnormalized radial mollifier exp(-1/(1-|u|^2)) given |u|^2."""
    u2 = np.asarray(u2, dtype=float)
    out = np.zeros_like(u2)
    inside = u2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - u2[inside]))
    return out


@dataclass(frozen=True, eq=False)
class MollifiedField(VectorField):
    """Convolution of ``inner`` with the bump kernel at scale ``eps``.

    Quadrature nodes live on the fixed lattice of eps-cells (7 Gauss points
    per axis per cell), so the result is a smooth function of x even when
    ``inner`` has kinks.  Weights are normalized to unit discrete mass.
    """

    inner: VectorField
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise SpecError("mollification scale must be positive")
        object.__setattr__(self, "eps", float(self.eps))
        grid = np.indices((_AXIS_OFFSETS.size,) * self.inner.n).reshape(self.inner.n, -1).T
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_grid_w", np.prod(_AXIS_WEIGHTS[grid], axis=1))

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def domain(self) -> DomainBox:
        return self.inner.domain.shrink(self.eps)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        pts = x.reshape(-1, self.n)
        m, n = pts.shape
        eps = self.eps
        base = np.floor(pts / eps) - 1.0
        axis_nodes = (base[:, :, None] + _AXIS_OFFSETS[None, None, :]) * eps  # (m, n, 21)
        du2 = ((pts[:, :, None] - axis_nodes) / eps) ** 2
        grid = self._grid
        u2 = du2[:, 0, grid[:, 0]]
        for d in range(1, n):
            u2 = u2 + du2[:, d, grid[:, d]]
        w = bump_kernel(u2) * self._grid_w[None, :]
        rows, cols = np.nonzero(w > 0)
        nodes = np.stack([axis_nodes[rows, d, grid[cols, d]] for d in range(n)], axis=-1)
        with np.errstate(all="ignore"):
            vals = self.inner(nodes)
        wk = w[rows, cols]
        out = np.stack([np.bincount(rows, weights=wk * vals[:, c], minlength=m) for c in range(n)], axis=-1)
        out /= np.sum(w, axis=1)[:, None]
        return out.reshape(shape)

    def describe(self):
        return {"kind": "MollifiedField", "eps": self.eps, "inner": self.inner.describe()}


@dataclass(frozen=True, eq=False)
class CatalogField(VectorField):
    """Named built-in field backed by a vectorized numpy function."""

    name: str
    params: tuple
    dim: int
    fn: Callable
    domain: DomainBox = None

    def __post_init__(self):
        if self.domain is None:
            object.__setattr__(self, "domain", _default_domain(self.dim))

    @property
    def n(self) -> int:
        return self.dim

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return self.fn(x)

    def describe(self):
        return {**super().describe(), "name": self.name, "params": list(self.params)}


def parse_field(text: str, n: int, domain: DomainBox | None = None) -> ExpressionField:
    """Build a field from ``"expr; expr; ..."`` with variables x1..xn."""
    if n < 1:
        raise SpecError("dimension must be at least 1")
    comps = _expr.parse_components(text, n=n)
    return ExpressionField(tuple(comps), domain if domain is not None else _default_domain(n))


def evaluate(f: VectorField, x) -> np.ndarray:
    return f.evaluate(x)
