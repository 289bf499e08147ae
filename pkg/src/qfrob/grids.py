"""Point-set helpers shared by the analyses."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fields import DomainBox


def box_grid(lo, hi, per_axis: int) -> np.ndarray:
    """Tensor grid with ``per_axis`` points per axis, endpoints included."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(a, b, per_axis) if per_axis > 1 else np.array([0.5 * (a + b)]) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def domain_grid(domain: DomainBox, per_axis: int, margin: float = 0.0) -> np.ndarray:
    return box_grid(domain.lo_array + margin, domain.hi_array - margin, per_axis)


def cube_grid(center, half: float, per_axis: int) -> np.ndarray:
    c = np.asarray(center, dtype=float)
    return box_grid(c - half, c + half, per_axis)


def map_chunks(fn, items, threads: int = 1):
    """Apply ``fn`` to each item, optionally on a thread pool; order is kept."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def chunk_slices(total: int, size: int):
    return [slice(i, min(i + size, total)) for i in range(0, total, size)]
