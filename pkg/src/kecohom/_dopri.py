"""Dormand-Prince 5(4) stepper for small scalar systems, in plain floats.

Written for the two-component systems of the Einstein ODE, where a
per-step overhead of numpy arrays would dominate.  Steps are clipped to land
exactly on requested output abscissae, and every accepted step records its
embedded local error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th and embedded 4th order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

Rhs = Callable[[float, Sequence[float]], Sequence[float]]


class StepSizeUnderflow(RuntimeError):
    pass


@dataclass
class Trajectory:
    t: list[float] = field(default_factory=list)
    y: list[tuple[float, ...]] = field(default_factory=list)
    dy: list[tuple[float, ...]] = field(default_factory=list)
    stopped: bool = False
    stop_reason: str = ""
    steps: int = 0
    rejected: int = 0
    max_local_error: float = 0.0
    sum_local_error: float = 0.0


def _step(f: Rhs, t: float, y: Sequence[float], k1: Sequence[float], h: float):
    n = len(y)
    r = range(n)
    k2 = f(t + C2 * h, [y[i] + h * A21 * k1[i] for i in r])
    k3 = f(t + C3 * h, [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in r])
    k4 = f(t + C4 * h, [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in r])
    k5 = f(
        t + C5 * h,
        [y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) for i in r],
    )
    k6 = f(
        t + h,
        [y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) for i in r],
    )
    y_new = [y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]) for i in r]
    k7 = f(t + h, y_new)
    err = [
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        for i in r
    ]
    return y_new, k7, err


def hermite(t0: float, y0: float, d0: float, t1: float, y1: float, d1: float, t: float) -> float:
    """Cubic Hermite interpolant through (t0, y0, d0) and (t1, y1, d1)."""
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def integrate(
    f: Rhs,
    t0: float,
    y0: Sequence[float],
    t_end: float,
    *,
    rtol: float,
    atol: Sequence[float],
    outputs: Sequence[float] | None = None,
    stop: Callable[[float, Sequence[float]], str] | None = None,
    h0: float | None = None,
    h_min: float = 1e-14,
    max_steps: int = 200_000,
) -> Trajectory:
    """Integrate y' = f(t, y) from t0 to t_end (t_end > t0).

    ``stop(t, y)`` is called after every accepted step and returns a non-empty
    reason string to end integration early.  When ``outputs`` is given, only
    those abscissae (plus the start and any stop point) are recorded; otherwise
    every accepted step is.
    """
    traj = Trajectory()
    y = [float(v) for v in y0]
    t = float(t0)
    k1 = list(f(t, y))
    traj.t.append(t)
    traj.y.append(tuple(y))
    traj.dy.append(tuple(k1))
    targets = [float(o) for o in outputs if t0 < o <= t_end] if outputs is not None else []
    if outputs is not None and (not targets or targets[-1] < t_end):
        targets.append(float(t_end))
    ti = 0
    span = t_end - t0
    h = h0 if h0 is not None else span * 1e-3
    n = len(y)
    h_prop = 0.0
    while t < t_end:
        if traj.steps >= max_steps:
            raise StepSizeUnderflow(f"step budget exhausted at t={t}")
        next_stop = targets[ti] if outputs is not None else t_end
        land = False
        if t + h >= next_stop:
            h_prop = h
            h = next_stop - t
            land = True
        y_new, k7, err = _step(f, t, y, k1, h)
        en = 0.0
        ok = True
        for i in range(n):
            if not math.isfinite(y_new[i]) or not math.isfinite(err[i]):
                ok = False
                break
            sc = atol[i] + rtol * max(abs(y[i]), abs(y_new[i]))
            en = max(en, abs(err[i]) / sc)
        if not ok:
            en = float("inf")
        if en <= 1.0:
            t = next_stop if land else t + h
            y = y_new
            k1 = list(k7)
            traj.steps += 1
            local = max(abs(e) for e in err)
            traj.max_local_error = max(traj.max_local_error, local)
            traj.sum_local_error += local
            record = outputs is None or land
            reason = stop(t, y) if stop is not None else ""
            if record or reason:
                traj.t.append(t)
                traj.y.append(tuple(y))
                traj.dy.append(tuple(k1))
            if land and outputs is not None:
                ti += 1
            if reason:
                traj.stopped = True
                traj.stop_reason = reason
                return traj
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            # a step clipped to hit an output keeps the earlier proposal alive
            h = max(h * fac, h_prop) if land else h * fac
            h_prop = 0.0
        else:
            traj.rejected += 1
            fac = 0.2 if not math.isfinite(en) else max(0.1, 0.9 * en ** -0.25)
            h *= fac
            h_prop = 0.0
            if h < h_min * max(1.0, abs(t)):
                raise StepSizeUnderflow(f"step size underflow at t={t}")
    return traj

