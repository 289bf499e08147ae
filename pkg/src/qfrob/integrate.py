"""Batched Dormand-Prince 5(4) integrator with PI step control.

All points in a batch share one step-size sequence.  Each point may carry its
own flow time ``tau``: we solve dy/ds = tau * f(y) for s in [0, 1], which
puts y(1) at the time-``tau`` flow of f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainExitError, StepUnderflowError
from .fields import DomainBox

# Dormand & Prince (1980) coefficients
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
LOCAL_FRACTION = 1.0
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson), order 5 pair
ALPHA = 0.7 / 5
BETA = 0.4 / 5


@dataclass(frozen=True)
class Tolerance:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = 0.1

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0 and self.max_step > 0):
            raise ValueError("tolerances and max step must be positive")


@dataclass
class Solution:
    y: np.ndarray
    steps: int
    rejected: int
    evaluations: int
    s: list | None = None
    ys: list | None = None


def integrate(rhs, y0, tau, tol: Tolerance = Tolerance(), domain: DomainBox | None = None,
              record: bool = False) -> Solution:
    """Flow each row of ``y0`` for its own time ``tau``.

    ``rhs`` maps (m, n) arrays to (m, n) arrays.  If ``domain`` is given,
    every accepted state is checked against it and an exit raises
    :class:`DomainExitError` with the exit time of the offending point.
    """
    y = np.array(np.atleast_2d(y0), dtype=float)
    m, n = y.shape
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (m,)).copy()
    span = float(np.max(np.abs(tau))) if m else 0.0
    sol = Solution(y=y, steps=0, rejected=0, evaluations=0)
    if record:
        sol.s, sol.ys = [0.0], [y.copy()]
    if span == 0.0:
        return sol
    if domain is not None:
        _check_domain(domain, y, 0.0, tau)

    def f(z):
        with np.errstate(all="ignore"):
            return tau[:, None] * rhs(z)

    hmax = tol.max_step / span
    k0 = f(y)
    sol.evaluations += 1
    h = min(hmax, _initial_step(f, y, k0, tol), 1.0)
    s = 0.0
    err_prev = 1.0
    hmin = 1e-14
    while s < 1.0:
        if 1.0 - s <= 1e-15:
            break
        h = min(h, 1.0 - s)
        K = [k0]
        for i in range(1, 7):
            yi = y + h * sum(a * K[j] for j, a in enumerate(_A[i]) if a != 0.0)
            K.append(f(yi))
        sol.evaluations += 6
        y_new = y + h * sum(b * K[j] for j, b in enumerate(_B5) if b != 0.0)
        err_vec = h * sum(e * K[j] for j, e in enumerate(_E))
        scale = (tol.atol + tol.rtol * np.maximum(np.abs(y), np.abs(y_new))) * LOCAL_FRACTION
        with np.errstate(all="ignore"):
            ratio = np.abs(err_vec) / scale
            row_err = np.sqrt(np.mean(ratio**2, axis=1))
        row_err[~np.all(np.isfinite(y_new), axis=1)] = np.inf
        row_err[~np.isfinite(row_err)] = np.inf
        err = float(np.max(row_err))
        if err <= 1.0:
            s_new = 1.0 if h >= 1.0 - s - 1e-15 else s + h
            if domain is not None:
                _check_domain(domain, y_new, s_new, tau)
            s, y = s_new, y_new
            k0 = K[6]  # first-same-as-last
            sol.steps += 1
            if record:
                sol.s.append(s)
                sol.ys.append(y.copy())
            err = max(err, 1e-10)
            factor = SAFETY * err ** (-ALPHA) * err_prev**BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            h = min(hmax, h * factor)
            err_prev = err
        else:
            sol.rejected += 1
            if np.isfinite(err):
                factor = max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
            else:
                factor = 0.25
            h *= factor
            if h < hmin:
                bad = int(np.argmax(row_err))
                raise StepUnderflowError(s * tau[bad], y[bad])
    sol.y = y
    return sol


def _initial_step(f, y, k0, tol: Tolerance) -> float:
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = tol.atol + tol.rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((k0 / scale) ** 2))
    if not (np.isfinite(d0) and np.isfinite(d1)):
        return 1e-6
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, 1.0)
    k1 = f(y + h0 * k0)
    d2 = np.sqrt(np.mean(((k1 - k0) / scale) ** 2)) / h0
    if not np.isfinite(d2):
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def _check_domain(domain: DomainBox, y, s, tau):
    inside = domain.contains(y)
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise DomainExitError(s * tau[i], y[i])
