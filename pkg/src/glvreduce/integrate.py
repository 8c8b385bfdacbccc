"""Fixed-step RK4 integration with cubic Hermite dense output."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError, UsageError
from .model import check_valid


def uniform_steps(t_end, dt):
    """Number of steps N with N * dt == t_end (to rounding)."""
    if not (dt > 0 and t_end > 0):
        raise UsageError("t_end and dt must be positive")
    if dt > t_end:
        raise UsageError(f"dt={dt} exceeds t_end={t_end}")
    n = round(t_end / dt)
    if abs(n * dt - t_end) > 1e-9 * t_end:
        raise UsageError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return n


def time_grid(n, dt):
    return np.arange(n + 1, dtype=float) * dt


@dataclass(frozen=True, eq=False)
class Trajectory:
    t: np.ndarray
    x: np.ndarray   # (N+1, S)
    dx: np.ndarray  # (N+1, S), rhs evaluated at x
    dt: float
    labels: tuple = ()

    @property
    def t_end(self):
        return float(self.t[-1])

    def sample(self, t):
        return sample(self, t)

    def to_csv(self):
        return trajectory_csv(self.t, self.x, self.labels)


def rk4(f, x0, n, dt, *, positive=False, t0=0.0):
    """Classical RK4 on a uniform grid.

    Returns (x, dx) with dx[k] = f(x[k]).  With ``positive`` every stage
    argument must be strictly positive; a breach raises IntegrationError.
    """
    x0 = np.array(x0, dtype=float)
    xs = np.empty((n + 1, x0.size))
    dxs = np.empty_like(xs)
    x = x0
    xs[0] = x
    k1 = f(x)
    dxs[0] = k1
    half = 0.5 * dt
    with np.errstate(over="ignore", invalid="ignore"):
        _rk4_loop(f, x, k1, xs, dxs, n, dt, half, positive, t0)
    return xs, dxs


def _rk4_loop(f, x, k1, xs, dxs, n, dt, half, positive, t0):
    for k in range(n):
        t = t0 + k * dt
        y2 = x + half * k1
        _check(y2, t + half, positive)
        k2 = f(y2)
        y3 = x + half * k2
        _check(y3, t + half, positive)
        k3 = f(y3)
        y4 = x + dt * k3
        _check(y4, t + dt, positive)
        k4 = f(y4)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check(x, t + dt, positive)
        k1 = f(x)
        xs[k + 1] = x
        dxs[k + 1] = k1


def _check(x, t, positive):
    if not np.all(np.isfinite(x)):
        i = int(np.flatnonzero(~np.isfinite(x))[0])
        raise IntegrationError(f"non-finite value in species {i + 1} at t={t:.6g}", t, i)
    if positive and np.any(x <= 0):
        i = int(np.flatnonzero(x <= 0)[0])
        raise IntegrationError(f"positivity breach in species {i + 1} at t={t:.6g}", t, i)


def integrate_fixed(model, t_end, dt):
    """Integrate the detailed GLV system from x0 with fixed-step RK4."""
    check_valid(model)
    n = uniform_steps(t_end, dt)
    b, A = model.b, model.A

    def f(x):
        return x * (b + A @ x)

    x, dx = rk4(f, model.x0, n, dt, positive=True)
    return Trajectory(time_grid(n, dt), x, dx, float(dt), tuple(model.species_labels))


def sample(traj, t):
    """Cubic Hermite interpolation of the stored states and derivatives."""
    t_end = traj.t_end
    if not (0.0 <= t <= t_end):
        raise ValueError(f"t={t} outside [0, {t_end}]")
    k = min(int(np.searchsorted(traj.t, t, side="right")) - 1, len(traj.t) - 2)
    if t == traj.t[k]:
        return traj.x[k].copy()
    if t == traj.t[k + 1]:
        return traj.x[k + 1].copy()
    h = traj.t[k + 1] - traj.t[k]
    s = (t - traj.t[k]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return (h00 * traj.x[k] + h10 * h * traj.dx[k]
            + h01 * traj.x[k + 1] + h11 * h * traj.dx[k + 1])


def logistic_exact(b, a, x0, t):
    """Closed-form solution of dx/dt = x (b + a x)."""
    if not (b > 0 and a < 0 and x0 > 0):
        raise ValueError("logistic_exact needs b > 0, a < 0, x0 > 0")
    e = math.expm1(b * t)
    return b * x0 * (e + 1.0) / (b - a * x0 * e)


def trajectory_csv(t, x, labels, extra=()):
    """CSV text with a 't' column then one column per label.

    ``extra`` is a sequence of (name, column) pairs appended after the state.
    Values use repr() so they round-trip exactly.
    """
    header = ["t", *labels, *(name for name, _ in extra)]
    cols = [np.asarray(t)] + [np.asarray(x)[:, i] for i in range(len(labels))]
    cols += [np.asarray(c) for _, c in extra]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_csv(text):
    """Parse a trajectory-style CSV into (header, 2-D float array)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty CSV")
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(len(lines) - 1, len(header))
