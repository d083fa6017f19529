"""The limit master equation: a coupled pair of 2D reaction-diffusion
equations on the two sides of the membrane, with killing terms from the Robin
data and node-wise jump exchange from the permeability rates; plus the
full-vs-limit comparison harness.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import NumericalFailure, ValidationError
from .grids import BaseGrid2D
from .layer import LayerOperator, NeumannLaplacian2D, layer_evolve, project_P, project_Ppq3d, semilinear_evolve


@dataclass(frozen=True)
class LimitState:
    """Pair (u-, u+) of base-grid functions (lower/upper membrane sides)."""

    base: BaseGrid2D
    u_minus: np.ndarray
    u_plus: np.ndarray

    def __post_init__(self):
        shape = (self.base.nx + 1, self.base.ny + 1)
        if self.u_minus.shape != shape or self.u_plus.shape != shape:
            raise ValidationError("state", f"component shapes must be {shape}")

    def sup_norm(self):
        return float(max(np.max(np.abs(self.u_minus)), np.max(np.abs(self.u_plus))))

    def l2_norm(self):
        w = self.base.trapezoid_weights()
        return float(np.sqrt(np.sum(w * self.u_minus**2) + np.sum(w * self.u_plus**2)))


@dataclass(frozen=True)
class LimitGenerator:
    """Block generator: componentwise Neumann Laplacian minus killing, plus
    the node-local jump matrix [[-alpha, alpha], [beta, -beta]]."""

    lap: NeumannLaplacian2D
    coeff: object  # CoefficientFields

    def apply(self, s):
        c = self.coeff
        return LimitState(
            s.base,
            self.lap.apply(s.u_minus) - c.c_minus * s.u_minus + c.alpha * (s.u_plus - s.u_minus),
            self.lap.apply(s.u_plus) - c.c_plus * s.u_plus + c.beta * (s.u_minus - s.u_plus),
        )


def _coupling_exp(coeff, dt):
    """Node-wise exact exponential of [[-a-cm, a], [b, -b-cp]] * dt.

    Returns the four entry fields (e11, e12, e21, e22)."""
    a = coeff.alpha
    b = coeff.beta
    m11 = -a - coeff.c_minus
    m22 = -b - coeff.c_plus
    tr2 = (m11 + m22) / 2
    # eigen-split: e^{tM} = e^{m t}(cosh(d t) I + sinh(d t)/d (M - m I))
    d2 = ((m11 - m22) / 2) ** 2 + a * b
    d = np.sqrt(np.maximum(d2, 0.0))
    dt_d = dt * d
    sinhc = np.where(dt_d > 1e-8, np.sinh(dt_d) / np.where(dt_d == 0, 1.0, dt_d), 1.0 + dt_d**2 / 6)
    base = np.exp(tr2 * dt)
    ch = np.cosh(dt_d)
    e11 = base * (ch + dt * sinhc * (m11 - tr2))
    e12 = base * dt * sinhc * a
    e21 = base * dt * sinhc * b
    e22 = base * (ch + dt * sinhc * (m22 - tr2))
    return e11, e12, e21, e22


def _apply_coupling(coeff, dt, um, up):
    e11, e12, e21, e22 = _coupling_exp(coeff, dt)
    return e11 * um + e12 * up, e21 * um + e22 * up


def _reaction(F, dt, um, up):
    if F is None:
        return um, up
    if F.affine_slope is not None:
        f = math.exp(F.affine_slope * dt)
        return f * um, f * up

    def rk4(V):
        k1 = F(V)
        k2 = F(V + dt / 2 * k1)
        k3 = F(V + dt / 2 * k2)
        k4 = F(V + dt * k3)
        return V + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    return rk4(um), rk4(up)


def limit_evolve(gen, s0, t, dt, F=None):
    """Strang-split evolution of the limit pair: half coupling/killing, half
    reaction, exact separable diffusion, half reaction, half coupling."""
    if t < 0:
        raise ValidationError("t", "time must be nonnegative")
    if t == 0:
        return s0
    if dt <= 0:
        raise ValidationError("dt", "step must be positive")
    n_steps = max(1, math.ceil(t / dt - 1e-12))
    tau = t / n_steps
    Ex = la.expm(tau * gen.lap.Dx)
    Ey = la.expm(tau * gen.lap.Dy)
    um = s0.u_minus.copy()
    up = s0.u_plus.copy()
    for _ in range(n_steps):
        um, up = _apply_coupling(gen.coeff, tau / 2, um, up)
        um, up = _reaction(F, tau / 2, um, up)
        um = Ex @ um @ Ey.T
        up = Ex @ up @ Ey.T
        um, up = _reaction(F, tau / 2, um, up)
        um, up = _apply_coupling(gen.coeff, tau / 2, um, up)
        if not (np.all(np.isfinite(um)) and np.all(np.isfinite(up))):
            raise NumericalFailure("non-finite values in limit stepping")
    return LimitState(s0.base, um, up)


def state_gap(s1, s2):
    """(sup gap, trapezoid L2 gap) between two LimitStates."""
    if s1.base != s2.base:
        raise ValidationError("base", "states live on different base grids")
    diff = LimitState(s1.base, s1.u_minus - s2.u_minus, s1.u_plus - s2.u_plus)
    return diff.sup_norm(), diff.l2_norm()


def compare_full_vs_limit(
    base_lap,
    vertical,
    coeff,
    u0,
    t,
    eps_list,
    p=0.0,
    q=0.0,
    mu=None,
    nu=None,
    dt=1e-3,
    F=None,
    mode=None,
):
    """For each eps run the full layer solver, project the final field, and
    compare with the limit system started from the projected initial state.

    p = q = 0 uses the plain vertical-average projection (the L2 pipeline);
    otherwise the sticky projection with traces.  Returns a list of
    (eps, sup_gap, l2_gap, runtime_ms).
    """
    if mode is None:
        mode = "factored" if (
            coeff.is_constant() and np.all(coeff.c_minus == 0) and np.all(coeff.c_plus == 0)
            and F is None
        ) else "strang"
    gen = LimitGenerator(base_lap, coeff)

    def project(u):
        if p == 0.0 and q == 0.0:
            return project_P(u)
        return project_Ppq3d(p, q, u)

    s0 = LimitState(u0.base, *project(u0))
    s_limit = limit_evolve(gen, s0, t, dt, F)
    out = []
    for eps in eps_list:
        t0 = time.perf_counter()
        op = LayerOperator(base_lap, vertical, eps, p, q, coeff, mu, nu)
        u_full = semilinear_evolve(op, u0, t, dt, F, mode) if F is not None else layer_evolve(
            op, u0, t, dt, mode
        )
        s_full = LimitState(u0.base, *project(u_full))
        sup_gap, l2_gap = state_gap(s_full, s_limit)
        out.append((eps, sup_gap, l2_gap, (time.perf_counter() - t0) * 1e3))
    return out
