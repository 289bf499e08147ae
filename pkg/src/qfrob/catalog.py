"""Built-in example fields and plane fields.

Names may carry parameters in parentheses, e.g. ``identity(3)``,
``coords(2,3)``, ``constant(2,3)`` (e_2 in R^3) or ``linear(2,0,0,-1)``
(row-major entries of a square matrix).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import SpecError
from .expr import parse_components
from .fields import CatalogField, ConstantField, DomainBox, ExpressionField, LinearField, VectorField, parse_field
from .planefield import PlaneField

__all__ = ["CATALOG", "load_catalog", "catalog_entries", "load_spec", "VECTOR_FIELD_NAMES", "PLANE_FIELD_NAMES"]

SQUEEZE_RATE = 200.0


def _xlogx(x):
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    with np.errstate(all="ignore"):
        out = x * np.log(r)
    # continuous extension by 0 at the origin
    return np.where(r > 0, out, 0.0)


def _identity(n=2):
    return CatalogField("identity", (n,), n, lambda x: np.array(x, dtype=float, copy=True))


def _zero(n=2):
    return CatalogField("zero", (n,), n, lambda x: np.zeros_like(x))


def _rotation2d():
    return CatalogField("rotation2d", (), 2, lambda x: np.stack([-x[..., 1], x[..., 0]], axis=-1))


def _xloga(n=2):
    return CatalogField("xloga", (n,), n, _xlogx)


def _abskink():
    def fn(x):
        return np.abs(x)

    return CatalogField("abskink", (), 2, fn)


def _shear2d():
    return CatalogField("shear2d", (), 2, lambda x: np.stack([np.zeros_like(x[..., 0]), x[..., 0]], axis=-1))


def _linear(*entries):
    if not entries:
        entries = (2.0, 0.0, 0.0, -1.0)
    n = math.isqrt(len(entries))
    if n * n != len(entries):
        raise SpecError(f"linear(...) needs n*n entries, got {len(entries)}")
    return LinearField(np.array(entries, dtype=float).reshape(n, n))


def _constant(i=1, n=2):
    i, n = int(i), int(n)
    if not 1 <= i <= n:
        raise SpecError(f"constant({i},{n}): index out of range")
    e = np.zeros(n)
    e[i - 1] = 1.0
    return ConstantField(tuple(e))


def _frame(texts, n, domain):
    return tuple(ExpressionField(tuple(parse_components(t, n)), domain) for t in texts)


def _contact3d():
    dom = DomainBox.cube(3, 1.0)
    return PlaneField(3, 2, _frame(["1; 0; 0", "0; 1; x1"], 3, dom), dom)


def _coords(k=2, n=3):
    k, n = int(k), int(n)
    dom = DomainBox.cube(n, 1.0)
    frame = []
    for i in range(k):
        e = np.zeros(n)
        e[i] = 1.0
        frame.append(ConstantField(tuple(e), dom))
    return PlaneField(n, k, tuple(frame), dom)


def _graph(gx: str, gy: str, domain: DomainBox):
    return PlaneField(3, 2, _frame([f"1; 0; {gx}", f"0; 1; {gy}"], 3, domain), domain)


def _graph_parabola3d():
    return _graph("x1", "x2", DomainBox.cube(3, 2.0))


def _graph_xy3d():
    return _graph("x2", "x1", DomainBox.cube(3, 2.0))


def _graph_rough3d():
    # g = xy log(x^2 + y^2); the box keeps away from the origin
    gx = "x2*log(x1^2 + x2^2) + 2*x1^2*x2/(x1^2 + x2^2)"
    gy = "x1*log(x1^2 + x2^2) + 2*x1*x2^2/(x1^2 + x2^2)"
    return _graph(gx, gy, DomainBox((0.1, 0.1, -2.0), (2.0, 2.0, 2.0)))


def _squeeze2d(rate=SQUEEZE_RATE):
    # line field whose flow contracts x2 at an exponential rate; used to
    # exercise the injectivity-radius search
    dom = DomainBox.cube(2, 1.0)
    return PlaneField(2, 1, _frame([f"1; -{float(rate)!r}*x2"], 2, dom), dom)


@dataclass(frozen=True)
class Entry:
    name: str
    kind: str  # "field" or "plane"
    builder: Callable
    description: str


CATALOG = {
    e.name: e
    for e in [
        Entry("identity", "field", _identity, "f(x) = x in R^n; identity(n), default n=2"),
        Entry("zero", "field", _zero, "f = 0 in R^n; zero(n)"),
        Entry("rotation2d", "field", _rotation2d, "f(x) = (-x2, x1), skew and conformal"),
        Entry("linear", "field", _linear, "f(x) = A x; linear(a11,a12,...), default diag(2,-1)"),
        Entry("xloga", "field", _xloga, "f(x) = x log|x|, borderline growth; xloga(n), default n=2"),
        Entry("xloga1d", "field", lambda: _xloga(1), "f(x) = x log|x| in R^1"),
        Entry("abskink", "field", _abskink, "f(x) = (|x1|, |x2|), Lipschitz with kinks on the axes"),
        Entry("constant", "field", _constant, "f = e_i in R^n; constant(i,n)"),
        Entry("shear2d", "field", _shear2d, "f(x) = (0, x1)"),
        Entry("contact3d", "plane", _contact3d, "frame {e1, e2 + x1 e3}, not involutive"),
        Entry("coords", "plane", _coords, "frame {e1..ek} in R^n; coords(k,n)"),
        Entry("graph-parabola3d", "plane", _graph_parabola3d, "tangents of z = (x^2+y^2)/2: {e1 + x1 e3, e2 + x2 e3}"),
        Entry("graph-xy3d", "plane", _graph_xy3d, "tangents of z = xy: {e1 + x2 e3, e2 + x1 e3}"),
        Entry("graph-rough3d", "plane", _graph_rough3d, "tangents of z = xy log(x^2+y^2), origin excluded"),
        Entry("squeeze2d", "plane", _squeeze2d, "line field {e1 - 200 x2 e2}; strongly contracting flow"),
    ]
}

VECTOR_FIELD_NAMES = [n for n, e in CATALOG.items() if e.kind == "field"]
PLANE_FIELD_NAMES = [n for n, e in CATALOG.items() if e.kind == "plane"]

_NAME_RE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*(?:\((.*)\))?\s*$")


def catalog_entries() -> list:
    return [{"name": e.name, "kind": e.kind, "description": e.description} for e in CATALOG.values()]


def load_catalog(name: str, domain: DomainBox | None = None) -> VectorField | PlaneField:
    """Instantiate a catalog entry, optionally replacing its domain box."""
    m = _NAME_RE.match(name)
    if not m or m.group(1) not in CATALOG:
        raise SpecError(f"unknown catalog entry '{name}'")
    entry = CATALOG[m.group(1)]
    args = []
    if m.group(2):
        try:
            args = [float(a) for a in m.group(2).split(",") if a.strip()]
        except ValueError as exc:
            raise SpecError(f"bad parameters in '{name}'") from exc
        if entry.name in ("identity", "zero", "xloga", "coords", "constant"):
            args = [int(a) for a in args]
    try:
        obj = entry.builder(*args)
    except TypeError as exc:
        raise SpecError(f"wrong parameters for '{entry.name}': {exc}") from exc
    if domain is not None:
        obj = with_domain(obj, domain)
    return obj


def with_domain(obj, domain: DomainBox):
    if domain.n != obj.n:
        raise SpecError("domain dimension does not match")
    if isinstance(obj, PlaneField):
        frame = tuple(with_domain(f, domain) for f in obj.frame)
        return PlaneField(obj.n, obj.k, frame, domain)
    if isinstance(obj, CatalogField):
        return CatalogField(obj.name, obj.params, obj.dim, obj.fn, domain)
    if isinstance(obj, LinearField):
        return LinearField(obj.matrix, domain)
    if isinstance(obj, ConstantField):
        return ConstantField(obj.vector, domain)
    if isinstance(obj, ExpressionField):
        return ExpressionField(obj.components, domain)
    raise SpecError(f"cannot rebox {type(obj).__name__}")


def _domain_from(d, n):
    if d is None:
        return None
    try:
        return DomainBox(tuple(d["lo"]), tuple(d["hi"]))
    except (KeyError, TypeError) as exc:
        raise SpecError("domain must be {\"lo\": [...], \"hi\": [...]}") from exc


def load_spec(path) -> VectorField | PlaneField:
    """Read a field spec file.

    ``{"n": 2, "field": "-x2; x1"}`` gives a vector field;
    ``{"n": 3, "k": 2, "frame": ["1;0;0", "0;1;x1"]}`` a plane field.
    An optional ``"domain": {"lo": [...], "hi": [...]}`` sets the box.
    """
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    if not isinstance(spec, dict) or "n" not in spec:
        raise SpecError("spec file needs an object with key 'n'")
    n = int(spec["n"])
    domain = _domain_from(spec.get("domain"), n)
    if "field" in spec:
        return parse_field(spec["field"], n, domain)
    if "frame" in spec:
        k = int(spec.get("k", len(spec["frame"])))
        dom = domain or DomainBox.cube(n, 1.0)
        frame = tuple(parse_field(t, n, dom) for t in spec["frame"])
        return PlaneField(n, k, frame, dom)
    raise SpecError("spec file needs 'field' or 'frame'")
