"""Dormand-Prince 5(4) integrator with exact stops at requested output times.

The state may be any numpy array; the step size is shared across all of its
entries and controlled by the max-norm of the scaled local error estimate.
"""
from __future__ import annotations

import numpy as np

from .errors import SolverError

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# difference between the 5th and embedded 4th order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
MAX_STEPS = 2_000_000


def integrate(fun, t0, y0, t_out, *, atol, rtol, max_step=np.inf, first_step=None, project=None):
    """Integrate ``dy/dt = fun(t, y)`` from ``t0`` and return ``y`` at each of ``t_out``.

    ``t_out`` must be non-decreasing and ``>= t0``.  ``project(t, y)``, when
    given, is applied to every accepted state (used to clamp into the
    invariant domain).  Returns a list of arrays, one per output time.
    """
    t_out = [float(t) for t in t_out]
    if any(b < a for a, b in zip(t_out, t_out[1:])) or (t_out and t_out[0] < t0):
        raise ValueError("output times must be sorted and not precede t0")
    t = float(t0)
    y = np.array(y0, dtype=float)
    if project is not None:
        y = project(t, y)
    results = []
    if not t_out:
        return results
    h = first_step if first_step is not None else min(max_step, 1e-3)
    k1 = fun(t, y)
    steps = 0
    for target in t_out:
        while t < target:
            if steps >= MAX_STEPS:
                raise SolverError("step budget exhausted", t_reached=t)
            h = min(h, max_step)
            proposed = h
            last = t + h >= target
            if last:
                h = target - t
            if h <= 1e-14 * max(1.0, abs(t)):
                if last:
                    t = target
                    break
                raise SolverError("step size underflow", t_reached=t)
            ks = [k1]
            for i in range(1, 7):
                yi = y.copy()
                for aij, kj in zip(_A[i], ks):
                    if aij:
                        yi += (h * aij) * kj
                ks.append(fun(t + _C[i] * h, yi))
            y_new = yi  # stage 7 evaluates at the 5th order solution (FSAL)
            err = np.zeros_like(y)
            for ei, ki in zip(_E, ks):
                if ei:
                    err += ei * ki
            err *= h
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = float(np.max(np.abs(err) / scale)) if err.size else 0.0
            steps += 1
            if not np.isfinite(err_norm):
                h *= MIN_FACTOR
                continue
            if err_norm <= 1.0:
                t = target if last else t + h
                if project is not None:
                    projected = project(t, y_new)
                    k1 = ks[6] if np.array_equal(projected, y_new) else fun(t, projected)
                    y = projected
                else:
                    y, k1 = y_new, ks[6]
                factor = MAX_FACTOR if err_norm == 0.0 else min(MAX_FACTOR, SAFETY * err_norm**-0.2)
                h = max(proposed, h * factor) if last else h * factor
            else:
                h *= max(MIN_FACTOR, SAFETY * err_norm**-0.2)
        results.append(y.copy())
    return results
