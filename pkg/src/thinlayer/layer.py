"""Rescaled thin-layer solver: 2D Neumann Laplacian on the base, per-column
vertical membrane generators with Robin killing at the outer faces, tensor
(factored) and Strang evolution, and the semilinear wrapper.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import NumericalFailure, ValidationError
from .grids import BaseGrid2D, LayerField, SplitGrid
from .membrane import MembraneParams, assemble_APhi


def neumann_1d(n, h):
    """1D second-difference matrix with ghost-reflected (Neumann) ends."""
    D = np.zeros((n + 1, n + 1))
    for i in range(1, n):
        D[i, i - 1] = D[i, i + 1] = 1.0 / h**2
        D[i, i] = -2.0 / h**2
    D[0, 0] = D[n, n] = -2.0 / h**2
    D[0, 1] = D[n, n - 1] = 2.0 / h**2
    return D


@dataclass(frozen=True)
class NeumannLaplacian2D:
    """Separable 5-point Neumann Laplacian on the base rectangle."""

    grid: BaseGrid2D
    Dx: np.ndarray = field(init=False, repr=False, compare=False)
    Dy: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "Dx", neumann_1d(self.grid.nx, self.grid.hx))
        object.__setattr__(self, "Dy", neumann_1d(self.grid.ny, self.grid.hy))

    def apply(self, U):
        """U has shape (nx+1, ny+1)."""
        return self.Dx @ U + U @ self.Dy.T


def evolve2d(lap, f0, t, dt):
    """e^{t Lap} f0 by Peaceman-Rachford ADI on the separable factors;
    preserves constants exactly."""
    if t < 0:
        raise ValidationError("t", "time must be nonnegative")
    if dt <= 0:
        raise ValidationError("dt", "step must be positive")
    n_steps = max(1, math.ceil(t / dt - 1e-12))
    tau = t / n_steps
    nx1 = lap.grid.nx + 1
    ny1 = lap.grid.ny + 1
    Ax = np.eye(nx1) - (tau / 2) * lap.Dx
    Ay = np.eye(ny1) - (tau / 2) * lap.Dy
    Bx = np.eye(nx1) + (tau / 2) * lap.Dx
    By = np.eye(ny1) + (tau / 2) * lap.Dy
    lux = la.lu_factor(Ax)
    luy = la.lu_factor(Ay)
    U = np.array(f0, dtype=float)
    for _ in range(n_steps):
        U = la.lu_solve(lux, U @ By.T)
        U = la.lu_solve(luy, (Bx @ U).T).T
        if not np.all(np.isfinite(U)):
            raise NumericalFailure("non-finite values in 2D stepping")
    return U


@dataclass(frozen=True)
class CoefficientFields:
    """Base-grid coefficient fields: Robin killing rates c-/c+ and membrane
    permeabilities alpha/beta, all shaped (nx+1, ny+1)."""

    c_minus: np.ndarray
    c_plus: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        if np.any(self.alpha < 0) or np.any(self.beta < 0):
            raise ValidationError("alpha/beta", "permeability fields must be nonnegative")

    @classmethod
    def constant(cls, grid, c_minus=0.0, c_plus=0.0, alpha=0.0, beta=0.0):
        shape = (grid.nx + 1, grid.ny + 1)
        return cls(
            np.full(shape, float(c_minus)),
            np.full(shape, float(c_plus)),
            np.full(shape, float(alpha)),
            np.full(shape, float(beta)),
        )

    def is_constant(self):
        return all(
            np.ptp(a) == 0.0 for a in (self.c_minus, self.c_plus, self.alpha, self.beta)
        )


@dataclass(frozen=True)
class ReactionTerm:
    """Pointwise reaction F with a declared global Lipschitz constant and
    F(0)=0; affine_slope marks F(u) = slope * u for the exact substep."""

    evaluator: object
    lipschitz: float
    affine_slope: float = None

    def __post_init__(self):
        if abs(self.evaluator(0.0)) > 1e-14:
            raise ValidationError("reaction", "F(0) = 0 is required")
        rng = np.random.default_rng(0)
        a = rng.uniform(-3, 3, 64)
        b = rng.uniform(-3, 3, 64)
        fa = np.array([self.evaluator(x) for x in a])
        fb = np.array([self.evaluator(x) for x in b])
        bad = np.abs(fa - fb) > self.lipschitz * np.abs(a - b) + 1e-12
        if bad.any():
            raise ValidationError("lipschitz", "declared constant violated on spot checks")

    def __call__(self, u):
        if self.affine_slope is not None:
            return self.affine_slope * u
        return np.vectorize(self.evaluator)(u)


def vertical_generator(grid, eps, p, q, alpha, beta, mu, nu, c_minus=0.0, c_plus=0.0):
    """Dense vertical generator eps^{-2} d_z^2 with membrane transmission rows
    (rates eps^2 alpha, eps^2 beta) and Robin killing at z = -1, 1."""
    params = MembraneParams(p, q, alpha, beta, mu, nu)
    M = assemble_APhi(params, grid, eps).matrix.toarray()
    h_l = grid.left.h
    h_r = grid.right.h
    # finite-volume Robin rows at the outer faces; positive c kills mass
    e2 = eps**2
    i_lo = 0
    i_up = grid.n_nodes - 1
    M[i_lo, :] = 0.0
    M[i_lo, i_lo + 1] = 2.0 / h_l**2
    M[i_lo, i_lo] = -2.0 / h_l**2 - 2.0 * e2 * c_minus / h_l
    M[i_up, :] = 0.0
    M[i_up, i_up - 1] = 2.0 / h_r**2
    M[i_up, i_up] = -2.0 / h_r**2 - 2.0 * e2 * c_plus / h_r
    return M / e2


@dataclass(frozen=True)
class LayerOperator:
    """Full rescaled generator Delta_2D + eps^{-2} d_z^2 with transmission and
    Robin rows, represented through its separable/per-column factors."""

    base: NeumannLaplacian2D
    vertical: SplitGrid
    eps: float
    p: float
    q: float
    coeff: CoefficientFields
    mu: object = None
    nu: object = None

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValidationError("eps", f"must lie in (0,1], got {self.eps}")

    def column_matrix(self, ix, iy, cache=None):
        key = (
            float(self.coeff.alpha[ix, iy]),
            float(self.coeff.beta[ix, iy]),
            float(self.coeff.c_minus[ix, iy]),
            float(self.coeff.c_plus[ix, iy]),
        )
        if cache is not None and key in cache:
            return cache[key]
        M = vertical_generator(
            self.vertical, self.eps, self.p, self.q, key[0], key[1], self.mu, self.nu,
            c_minus=key[2], c_plus=key[3],
        )
        if cache is not None:
            cache[key] = M
        return M

    def has_constant_coefficients(self):
        return self.coeff.is_constant()

    def apply(self, u):
        """Action of the full generator on a LayerField (dense assembly of the
        per-column vertical rows plus the separable horizontal part)."""
        V = u.values
        out = np.einsum("ij,jkl->ikl", self.base.Dx, V) + np.einsum(
            "ij,kjl->kil", self.base.Dy, V
        )
        cache = {}
        for ix in range(u.base.nx + 1):
            for iy in range(u.base.ny + 1):
                M = self.column_matrix(ix, iy, cache)
                out[ix, iy, :] += M @ V[ix, iy, :]
        return LayerField(u.base, u.vertical, out)


def _column_propagators(op, dt, cache):
    """expm(dt * M) per distinct column coefficient tuple."""
    props = {}
    for key, M in cache.items():
        props[key] = la.expm(dt * M)
    return props


def layer_evolve(op, u0, t, dt=None, mode="factored"):
    """Evolve the linear layer equation to time t.

    factored: exact tensor splitting (requires spatially constant
    coefficients and no Robin killing); time-exact sub-propagators, so the
    only error is the spatial discretization.
    strang: half vertical, full horizontal, half vertical per step; handles
    coefficient fields and Robin rows with O(dt^2) splitting error.
    """
    if t < 0:
        raise ValidationError("t", "time must be nonnegative")
    if t == 0:
        return u0
    nx1, ny1 = u0.base.nx + 1, u0.base.ny + 1
    if mode == "factored":
        if not op.has_constant_coefficients():
            raise ValidationError("mode", "factored mode requires constant coefficients")
        if np.any(op.coeff.c_minus != 0) or np.any(op.coeff.c_plus != 0):
            raise ValidationError("mode", "factored mode requires c- = c+ = 0")
        Mv = op.column_matrix(0, 0)
        Ev = la.expm(t * Mv)
        Ex = la.expm(t * op.base.Dx)
        Ey = la.expm(t * op.base.Dy)
        V = np.einsum("jkl,ml->jkm", u0.values, Ev)
        V = np.einsum("ij,jkl->ikl", Ex, V)
        V = np.einsum("ij,kjl->kil", Ey, V)
        return LayerField(u0.base, u0.vertical, V)
    if mode != "strang":
        raise ValidationError("mode", f"unknown mode {mode}")
    if dt is None or dt <= 0:
        raise ValidationError("dt", "strang mode needs a positive dt")
    n_steps = max(1, math.ceil(t / dt - 1e-12))
    tau = t / n_steps
    cache = {}
    for ix in range(nx1):
        for iy in range(ny1):
            op.column_matrix(ix, iy, cache)
    half = {k: la.expm((tau / 2) * M) for k, M in cache.items()}
    Ex = la.expm(tau * op.base.Dx)
    Ey = la.expm(tau * op.base.Dy)
    keymap = np.empty((nx1, ny1), dtype=object)
    for ix in range(nx1):
        for iy in range(ny1):
            keymap[ix, iy] = (
                float(op.coeff.alpha[ix, iy]),
                float(op.coeff.beta[ix, iy]),
                float(op.coeff.c_minus[ix, iy]),
                float(op.coeff.c_plus[ix, iy]),
            )

    def vertical_half(V):
        out = np.empty_like(V)
        for ix in range(nx1):
            for iy in range(ny1):
                out[ix, iy, :] = half[keymap[ix, iy]] @ V[ix, iy, :]
        return out

    V = u0.values.copy()
    for _ in range(n_steps):
        V = vertical_half(V)
        V = np.einsum("ij,jkl->ikl", Ex, V)
        V = np.einsum("ij,kjl->kil", Ey, V)
        V = vertical_half(V)
        if not np.all(np.isfinite(V)):
            raise NumericalFailure("non-finite values in layer stepping")
    return LayerField(u0.base, u0.vertical, V)


def _reaction_substep(V, F, dt):
    if F.affine_slope is not None:
        return V * math.exp(F.affine_slope * dt)
    # single RK4 step on u' = F(u), pointwise
    k1 = F(V)
    k2 = F(V + dt / 2 * k1)
    k3 = F(V + dt / 2 * k2)
    k4 = F(V + dt * k3)
    out = V + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("reaction substep diverged")
    return out


def semilinear_evolve(op, u0, t, dt, F, mode="strang"):
    """Strang splitting around the linear layer evolution with a pointwise
    reaction substep (exact for affine F, RK4 otherwise)."""
    if F is None:
        return layer_evolve(op, u0, t, dt, mode)
    n_steps = max(1, math.ceil(t / dt - 1e-12))
    tau = t / n_steps
    u = u0
    for _ in range(n_steps):
        V = _reaction_substep(u.values, F, tau / 2)
        u = layer_evolve(op, LayerField(u.base, u.vertical, V), tau, tau, mode)
        V = _reaction_substep(u.values, F, tau / 2)
        u = LayerField(u.base, u.vertical, V)
    return u


def project_P(u0):
    """Vertical averages over each side: the inadhesive-membrane projection."""
    wl = u0.vertical.left.trapezoid_weights()
    wr = u0.vertical.right.trapezoid_weights()
    sl = u0.vertical.left_slice()
    sr = u0.vertical.right_slice()
    return (
        np.tensordot(u0.values[:, :, sl], wl, axes=([2], [0])),
        np.tensordot(u0.values[:, :, sr], wr, axes=([2], [0])),
    )


def project_Ppq3d(p, q, u0):
    """Sticky-membrane projection: p * trace at 0- + (1-p) * average, per
    column, and the q analog on the upper side."""
    avg_m, avg_p = project_P(u0)
    im, ip = u0.vertical.i_minus, u0.vertical.i_plus
    return (
        p * u0.values[:, :, im] + (1 - p) * avg_m,
        q * u0.values[:, :, ip] + (1 - q) * avg_p,
    )
