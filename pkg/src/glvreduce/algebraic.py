"""Algebraic-method reduction checked through residuals.

For S=2 the second species is traded for derivatives of the first:

    y    = ((x1' - b1 x1) / x1 - a11 x1) / a12                      (= x2)
    y'   = (-(x1'/x1^2)(x1' - b1 x1) + (x1'' - b1 x1')/x1 - a11 x1') / a12
    0    = y' - [b2 y + (a21 x1 + a22 y) y]

Along the exact flow the residual vanishes identically.  The Lorenz system
x' = al (y - x), y' = x (be - z) - y, z' = x y - ga z reduces the same way
to a single third-order equation in x.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleReductionError, SingularityError


@dataclass(frozen=True)
class DerivativeJet:
    x: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray | None = None


def _require_two(model):
    if model.S != 2:
        raise ValueError(f"algebraic S=2 reduction needs S=2, got S={model.S}")


def analytic_jet(model, x):
    """State, first and second time derivatives along the flow."""
    _require_two(model)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("state must be strictly positive")
    g = model.b + model.A @ x
    d1 = x * g
    d2 = d1 * g + x * (model.A @ d1)
    return DerivativeJet(x, d1, d2)


def finite_difference_jet(t, x, k):
    """Jet at grid index k from centred differences of sampled x (cross-check only)."""
    h = t[k + 1] - t[k]
    d1 = (x[k + 1] - x[k - 1]) / (2 * h)
    d2 = (x[k + 1] - 2 * x[k] + x[k - 1]) / (h * h)
    return DerivativeJet(np.asarray(x[k], dtype=float), d1, d2)


@dataclass(frozen=True)
class AlgebraicReduction2:
    """Coefficient bookkeeping for the S=2 algebraic equation.

    ``auxiliary`` holds the constants used to express x2 and its derivative
    through x1; ``final`` holds those of the resulting equation itself.
    """

    b1: float
    a11: float
    a12: float
    b2: float
    a21: float
    a22: float

    @classmethod
    def from_model(cls, model):
        _require_two(model)
        (a11, a12), (a21, a22) = model.A
        if a12 == 0.0:
            raise InfeasibleReductionError("a(1,2) = 0: x2 cannot be expressed through x1")
        return cls(float(model.b[0]), float(a11), float(a12),
                   float(model.b[1]), float(a21), float(a22))

    @property
    def auxiliary_provenance(self):
        return {("b", 0), ("A", 0, 0), ("A", 0, 1)}

    @property
    def final_provenance(self):
        return {("b", 1), ("A", 1, 0), ("A", 1, 1)}

    def y(self, x1, dx1):
        if not x1 > 0:
            raise SingularityError(f"x1 = {x1!r} must be positive", species=0)
        return ((dx1 - self.b1 * x1) / x1 - self.a11 * x1) / self.a12

    def dy(self, x1, dx1, ddx1):
        if not x1 > 0:
            raise SingularityError(f"x1 = {x1!r} must be positive", species=0)
        return (
            -dx1 / (x1 * x1) * (dx1 - self.b1 * x1)
            + (ddx1 - self.b1 * dx1) / x1
            - self.a11 * dx1
        ) / self.a12

    def terms(self, jet):
        """Additive terms (y', -b2 y, -a21 x1 y, -a22 y^2) of the residual."""
        x1, dx1, ddx1 = float(jet.x[0]), float(jet.d1[0]), float(jet.d2[0])
        y = self.y(x1, dx1)
        return (self.dy(x1, dx1, ddx1), -self.b2 * y, -self.a21 * x1 * y, -self.a22 * y * y)


def algebraic_residual_2(model, jet):
    """y' - [b2 y + (a21 x1 + a22 y) y] from x1 and its first two derivatives."""
    red = AlgebraicReduction2.from_model(model)
    x1, dx1, ddx1 = float(jet.x[0]), float(jet.d1[0]), float(jet.d2[0])
    y = red.y(x1, dx1)
    return red.dy(x1, dx1, ddx1) - (red.b2 * y + (red.a21 * x1 + red.a22 * y) * y)


def residual_scale_2(model, jet):
    return max(abs(t) for t in AlgebraicReduction2.from_model(model).terms(jet))


def second_order_pair(model):
    """First-order (x1, y) right-hand side equivalent to the second-order equation.

    With y standing for x2 and y' given by the reduced equation, this is the
    original system written in the reduced variables.
    """
    red = AlgebraicReduction2.from_model(model)

    def f(state):
        x1, y = state
        return np.array([
            x1 * (red.b1 + red.a11 * x1 + red.a12 * y),
            red.b2 * y + (red.a21 * x1 + red.a22 * y) * y,
        ])

    return f


def residual_along(model, states):
    """(residuals, scales) with analytic jets at each state of a trajectory."""
    red = AlgebraicReduction2.from_model(model)
    res = np.empty(len(states))
    scale = np.empty(len(states))
    for i, x in enumerate(states):
        jet = analytic_jet(model, x)
        terms = red.terms(jet)
        res[i] = algebraic_residual_2(model, jet)
        scale[i] = max(abs(t) for t in terms)
    return res, scale


# -- Lorenz -----------------------------------------------------------------

def lorenz_rhs(alpha, beta, gamma):
    def f(s):
        x, y, z = s
        return np.array([alpha * (y - x), x * (beta - z) - y, x * y - gamma * z])
    return f


def lorenz_jet(alpha, beta, gamma, state):
    """Derivatives of (x, y, z) through third order by the chain rule."""
    x, y, z = (float(v) for v in state)
    dx = alpha * (y - x)
    dy = x * (beta - z) - y
    dz = x * y - gamma * z
    ddx = alpha * (dy - dx)
    ddy = dx * (beta - z) - x * dz - dy
    ddz = dx * y + x * dy - gamma * dz
    dddx = alpha * (ddy - ddx)
    dddy = ddx * (beta - z) - 2 * dx * dz - x * ddz - ddy
    dddz = ddx * y + 2 * dx * dy + x * ddy - gamma * ddz
    return DerivativeJet(
        np.array([x, y, z]), np.array([dx, dy, dz]),
        np.array([ddx, ddy, ddz]), np.array([dddx, dddy, dddz]),
    )


def lorenz_residual_3rd(alpha, beta, gamma, jet):
    """Residuals of the third-order equation in x, by two routes.

    Returns (rederived, printed).  The rederived route rebuilds y and z
    from the x-jet (y = x + x'/al, z = be - (y' + y)/x) and checks
    z' = x y - ga z.  The printed route evaluates

        (d/dt + ga)(be - (x'' + (1 + al) x' + al x)/(al x)) - x (x'/al + x)

    term by term.
    """
    rederived, printed, _ = _lorenz_parts(alpha, beta, gamma, jet)
    return rederived, printed


def lorenz_residual_scale(alpha, beta, gamma, jet):
    """Largest additive term of the rederived residual, before cancellation."""
    return _lorenz_parts(alpha, beta, gamma, jet)[2]


def _lorenz_parts(alpha, beta, gamma, jet):
    x, dx, ddx, dddx = (float(jet.x[0]), float(jet.d1[0]), float(jet.d2[0]), float(jet.d3[0]))
    if x == 0.0:
        raise SingularityError("x = 0: the third-order equation divides by x", species=0)

    y = x + dx / alpha
    dy = dx + ddx / alpha
    ddy = ddx + dddx / alpha
    z = beta - (dy + y) / x
    dz_a = -(ddy + dy) / x
    dz_b = (dy + y) * dx / (x * x)
    dz = dz_a + dz_b
    rederived = dz - x * y + gamma * z
    scale = max(abs(dz_a), abs(dz_b), abs(x * y), abs(gamma * z), abs(beta * gamma))

    w = ddx + (1.0 + alpha) * dx + alpha * x
    dw = dddx + (1.0 + alpha) * ddx + alpha * dx
    bracket = beta - w / (alpha * x)
    d_bracket = -dw / (alpha * x) + w * dx / (alpha * x * x)
    printed = d_bracket + gamma * bracket - x * (dx / alpha + x)
    return rederived, printed, scale
