"""Two-interval membrane operators on [-1,0-] u [0+,1]: the decoupled sticky
pair, its domain perturbation coupling the intervals through jump functionals,
the rank-2 closed-form resolvent, the fast-diffusion scaling, and the
two-state limit generator with its projection.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalFailure, ResolventThresholdError, ValidationError
from .grids import GridFunction, SplitGrid, sup_norm, trapezoid_integral
from .sticky import evolve_matrix, resolvent_closed_form

_COTH1 = math.cosh(1.0) / math.sinh(1.0)


@dataclass(frozen=True)
class MeasureSpec:
    """Borel probability measure on an interval: atoms plus an optional
    piecewise-linear density, total mass 1."""

    interval: tuple
    atoms: tuple = ()
    density: object = None  # GridFunction on the interval, nonnegative

    def __post_init__(self):
        a, b = self.interval
        for loc, w in self.atoms:
            if w < 0:
                raise ValidationError("atoms", f"negative weight {w}")
            if not a <= loc <= b:
                raise ValidationError("atoms", f"atom at {loc} outside [{a},{b}]")
        if self.density is not None and np.any(self.density.values < 0):
            raise ValidationError("density", "must be nonnegative")
        if abs(self.total_mass() - 1.0) > 1e-12:
            raise ValidationError("measure", f"total mass {self.total_mass()} != 1")

    def total_mass(self):
        m = sum(w for _, w in self.atoms)
        if self.density is not None:
            m += trapezoid_integral(self.density)
        return m

    @classmethod
    def dirac(cls, interval, at):
        return cls(interval, atoms=((at, 1.0),))

    @classmethod
    def uniform(cls, interval, n=64):
        from .grids import IntervalGrid

        a, b = interval
        grid = IntervalGrid(a, b, n)
        dens = GridFunction(grid, np.full(n + 1, 1.0 / (b - a)))
        return cls(interval, density=dens)

    def integrate(self, f):
        """Integral of a GridFunction against the measure (atoms by linear
        interpolation, density by trapezoid quadrature)."""
        total = 0.0
        for loc, w in self.atoms:
            total += w * float(np.interp(loc, f.grid.nodes, f.values))
        if self.density is not None:
            dens = np.interp(f.grid.nodes, self.density.grid.nodes, self.density.values)
            total += float(np.dot(f.grid.trapezoid_weights(), dens * f.values))
        return total

    def quadrature_vector(self, grid):
        """Row vector v with v . f ~ integral of f dmeasure on the grid."""
        v = np.zeros(grid.n + 1)
        nodes = grid.nodes
        for loc, w in self.atoms:
            j = min(int((loc - grid.a) / grid.h), grid.n - 1)
            theta = (loc - nodes[j]) / grid.h
            v[j] += w * (1 - theta)
            v[j + 1] += w * theta
        if self.density is not None:
            dens = np.interp(nodes, self.density.grid.nodes, self.density.values)
            v += grid.trapezoid_weights() * dens
        return v


@dataclass(frozen=True)
class MembraneParams:
    """Stickiness (p,q), permeability rates (alpha,beta), jump-destination
    measures mu on [-1,0] and nu on [0,1]."""

    p: float
    q: float
    alpha: float
    beta: float
    mu: MeasureSpec = None
    nu: MeasureSpec = None

    def __post_init__(self):
        for name, v in (("p", self.p), ("q", self.q)):
            if not 0.0 <= v <= 1.0:
                raise ValidationError(name, f"must lie in [0,1], got {v}")
        for name, v in (("alpha", self.alpha), ("beta", self.beta)):
            if v < 0:
                raise ValidationError(name, f"must be nonnegative, got {v}")
        if self.mu is None:
            object.__setattr__(self, "mu", MeasureSpec.dirac((-1.0, 0.0), 0.0))
        if self.nu is None:
            object.__setattr__(self, "nu", MeasureSpec.dirac((0.0, 1.0), 0.0))


@dataclass(frozen=True)
class MembraneOperator:
    params: MembraneParams
    grid: SplitGrid
    eps: float
    kind: str  # "A0" | "APhi" | "Aeps"
    matrix: sp.csr_matrix = field(repr=False, compare=False)


@dataclass(frozen=True)
class TwoStateGenerator:
    """Zero-row-sum 2x2 jump generator [[-alpha, alpha], [beta, -beta]]."""

    alpha: float
    beta: float

    def matrix(self):
        return np.array([[-self.alpha, self.alpha], [self.beta, -self.beta]])


def phi_functional(params, f):
    """Jump functional (alpha [nu(f) - f(0-)], beta [mu(f) - f(0+)])."""
    g = f.grid
    f1, f2 = f.left_part(), f.right_part()
    return (
        params.alpha * (params.nu.integrate(f2) - f.values[g.i_minus]),
        params.beta * (params.mu.integrate(f1) - f.values[g.i_plus]),
    )


def m_lambda(r, lam):
    """m_lambda(r) = r lam cosh(s) + (1-r) s sinh(s), s = sqrt(lam)."""
    if lam <= 0:
        raise ValidationError("lambda", f"must be positive, got {lam}")
    s = math.sqrt(lam)
    if s <= 30.0:
        return r * lam * math.cosh(s) + (1 - r) * s * math.sinh(s)
    return math.exp(s) * _m_lambda_scaled(r, lam)


def _m_lambda_scaled(r, lam):
    """m_lambda(r) * e^{-sqrt(lam)} (overflow-free)."""
    s = math.sqrt(lam)
    e2 = math.exp(-2 * s)
    return r * lam * (1 + e2) / 2 + (1 - r) * s * (1 - e2) / 2


def assemble_APhi(params, grid, eps=1.0):
    """Discrete two-interval generator with membrane transmission rows.

    Permeability rates are scaled by eps^2 (the domain condition of the
    eps-scaled family); eps=1 gives the unscaled operator.  Metzler with
    zero row sums by construction.
    """
    if not 0.0 < eps <= 1.0:
        raise ValidationError("eps", f"must lie in (0,1], got {eps}")
    at = eps**2 * params.alpha
    bt = eps**2 * params.beta
    nvert = grid.n_nodes
    rows, cols, vals = [], [], []

    def add(i, j, v):
        if v != 0.0:
            rows.append(i)
            cols.append(j)
            vals.append(v)

    for side, r, rate, meas in (
        ("left", params.p, at, params.nu),
        ("right", params.q, bt, params.mu),
    ):
        g = grid.left if side == "left" else grid.right
        h = g.h
        off = 0 if side == "left" else grid.i_plus
        i_mem = grid.i_minus if side == "left" else grid.i_plus
        i_out = 0 if side == "left" else grid.n_nodes - 1
        i_nb = i_mem - 1 if side == "left" else i_mem + 1
        j_in = 1 if side == "left" else grid.n_nodes - 2
        # interior second differences
        idx = range(off + 1, off + g.n) if side == "left" else range(off + 1, off + g.n)
        for i in idx:
            if i in (i_mem, i_out):
                continue
            add(i, i - 1, 1.0 / h**2)
            add(i, i, -2.0 / h**2)
            add(i, i + 1, 1.0 / h**2)
        # outer reflecting end (ghost reflection)
        add(i_out, j_in, 2.0 / h**2)
        add(i_out, i_out, -2.0 / h**2)
        # membrane row; the measure integrates the *other* interval
        other = grid.right if side == "left" else grid.left
        qv = meas.quadrature_vector(other)
        other_off = grid.i_plus if side == "left" else 0
        if r > 0:
            scale = 1.0 / r
            add(i_mem, i_nb, scale * (1 - r) / h)
            add(i_mem, i_mem, -scale * ((1 - r) / h + rate))
            for j, w in enumerate(qv):
                add(i_mem, other_off + j, scale * rate * w)
        else:
            scale = 2.0 / h
            add(i_mem, i_nb, scale / h)
            add(i_mem, i_mem, -scale * (1.0 / h + rate))
            for j, w in enumerate(qv):
                add(i_mem, other_off + j, scale * rate * w)

    m = sp.csr_matrix((vals, (rows, cols)), shape=(nvert, nvert))
    kind = "A0" if params.alpha == 0 and params.beta == 0 else "APhi"
    return MembraneOperator(params, grid, eps, kind, m)


def assemble_Aeps(params, grid, eps):
    """A^eps = eps^{-2} A_{eps^2 Phi}: fast diffusion, slow permeability."""
    base = assemble_APhi(params, grid, eps)
    return MembraneOperator(params, grid, eps, "Aeps", (base.matrix / eps**2).tocsr())


def _contraction_bound(r, lam):
    """Upper bound for cosh(s)/m_lambda(r), uniform in the eps-scaling."""
    if r > 0:
        return 1.0 / (r * lam)
    return max(_COTH1 / math.sqrt(lam), _COTH1 / lam)


def greiner_threshold(params, lam):
    """Bound for ||L_lambda Phi||; the rank-2 resolvent requires < 1."""
    rate = 2.0 * max(params.alpha, params.beta)
    return rate * max(_contraction_bound(params.p, lam), _contraction_bound(params.q, lam))


def a0_resolvent(params, lam, g):
    """(lambda - A0)^{-1} g: two decoupled closed-form sticky resolvents."""
    fl = resolvent_closed_form(params.p, lam, g.left_part(), side="left")
    fr = resolvent_closed_form(params.q, lam, g.right_part(), side="right")
    return GridFunction(g.grid, np.concatenate([fl.values, fr.values]))


def greiner_resolvent(params, lam, g, eps_scale=None):
    """(lambda - A_Phi)^{-1} g via the rank-2 domain-perturbation formula:
    f = L_lambda Phi f + (lambda - A0)^{-1} g, reduced to a 2x2 system for
    the coefficients of the kernel functions cosh(s(x+1)), cosh(s(x-1)).

    With eps_scale=eps the operator resolved is A^eps = eps^{-2} A_{eps^2 Phi}.
    """
    if lam <= 0:
        raise ValidationError("lambda", f"must be positive, got {lam}")
    if eps_scale is not None:
        if not 0.0 < eps_scale <= 1.0:
            raise ValidationError("eps_scale", f"must lie in (0,1], got {eps_scale}")
        e2 = eps_scale**2
        scaled = MembraneParams(
            params.p, params.q, e2 * params.alpha, e2 * params.beta, params.mu, params.nu
        )
        gs = GridFunction(g.grid, e2 * g.values)
        inner = greiner_resolvent(scaled, e2 * lam, gs)
        return inner

    if greiner_threshold(params, lam) >= 1.0:
        raise ResolventThresholdError(
            f"||L_lambda Phi|| bound {greiner_threshold(params, lam):.3g} >= 1 at lambda={lam}"
        )

    grid = g.grid
    s = math.sqrt(lam)
    mp = m_lambda(params.p, lam)
    mq = m_lambda(params.q, lam)
    cosh_s = math.cosh(s)
    k1 = GridFunction(grid.left, np.cosh(s * (grid.left.nodes + 1)))
    k2 = GridFunction(grid.right, np.cosh(s * (grid.right.nodes - 1)))
    f0 = a0_resolvent(params, lam, g)
    f0l, f0r = f0.left_part(), f0.right_part()
    al, be = params.alpha, params.beta

    # unknowns: f = a*k1 (left) + b*k2 (right) + f0
    M = np.array(
        [
            [mp + al * cosh_s, -al * params.nu.integrate(k2)],
            [-be * params.mu.integrate(k1), mq + be * cosh_s],
        ]
    )
    rhs = np.array(
        [
            al * (params.nu.integrate(f0r) - f0l.values[-1]),
            be * (params.mu.integrate(f0l) - f0r.values[0]),
        ]
    )
    try:
        a, b = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ResolventThresholdError(f"rank-2 system singular at lambda={lam}") from exc
    vals = f0.values.copy()
    vals[grid.left_slice()] += a * k1.values
    vals[grid.right_slice()] += b * k2.values
    return GridFunction(grid, vals)


def projection_Ppq(p, q, f):
    """Equilibrium projection of the decoupled pair: returns the two limit
    constants (p f(0-) + (1-p) int_left f, q f(0+) + (1-q) int_right f)."""
    g = f.grid
    return (
        p * f.values[g.i_minus] + (1 - p) * trapezoid_integral(f.left_part()),
        q * f.values[g.i_plus] + (1 - q) * trapezoid_integral(f.right_part()),
    )


def expm_B(B, t):
    """Closed-form e^{tB} = Pi + e^{-(alpha+beta) t}(I - Pi)."""
    if t < 0:
        raise ValidationError("t", "time must be nonnegative")
    tot = B.alpha + B.beta
    if tot == 0:
        return np.eye(2)
    Pi = np.array([[B.beta, B.alpha], [B.beta, B.alpha]]) / tot
    return Pi + math.exp(-tot * t) * (np.eye(2) - Pi)


def lift_pair(grid, pair):
    """Piecewise-constant lift of a two-state value onto the split grid."""
    vals = np.empty(grid.n_nodes)
    vals[grid.left_slice()] = pair[0]
    vals[grid.right_slice()] = pair[1]
    return GridFunction(grid, vals)


def kurtz_sweep(params, f, t, eps_list, stepper="expm"):
    """Empirical singular-limit errors: for each eps evolve the fast-scaled
    membrane generator and compare against the lifted two-state evolution of
    the projected data.  Returns a list of (eps, error, runtime_ms).

    stepper="expm" evaluates the discrete semigroup exactly (dense matrix
    exponential), so the reported error is purely the singular-limit gap plus
    quadrature; "euler" uses implicit Euler with eps^2-refined steps across
    the fast initial layer (first 10% of the horizon) and t/1000 afterwards.
    """
    if t <= 0:
        raise ValidationError("t", "horizon must be positive")
    if stepper not in ("expm", "euler"):
        raise ValidationError("stepper", f"must be 'expm' or 'euler', got {stepper}")
    grid = f.grid
    B = TwoStateGenerator(params.alpha, params.beta)
    target = lift_pair(grid, expm_B(B, t) @ np.array(projection_Ppq(params.p, params.q, f)))
    out = []
    for eps in eps_list:
        t0 = time.perf_counter()
        op = assemble_Aeps(params, grid, eps)
        try:
            if stepper == "expm":
                vals = la.expm(t * op.matrix.toarray()) @ f.values
                if not np.all(np.isfinite(vals)):
                    raise NumericalFailure("matrix exponential overflowed")
            else:
                dt1 = min(eps**2, t / 100.0)
                vals = evolve_matrix(op.matrix, f.values, 0.1 * t, dt1)
                vals = evolve_matrix(op.matrix, vals, 0.9 * t, t / 1000.0)
        except NumericalFailure as exc:
            raise NumericalFailure(f"kurtz sweep unstable at eps={eps}: {exc}") from exc
        err = float(np.max(np.abs(vals - target.values)))
        out.append((eps, err, (time.perf_counter() - t0) * 1e3))
    return out


def aeps_resolvent_limit_check(params, lam, g, eps_list):
    """Resolvent-level limit gaps: (lambda - A^eps)^{-1} g against the lifted
    two-state resolvent of the projection, and the slow-scale hypothesis
    (lambda - eps^2 A^eps)^{-1} g -> (lambda - A0)^{-1} g."""
    grid = g.grid
    B = TwoStateGenerator(params.alpha, params.beta).matrix()
    pair = np.linalg.solve(lam * np.eye(2) - B, np.array(projection_Ppq(params.p, params.q, g)))
    target_fast = lift_pair(grid, pair)
    a0 = assemble_APhi(
        MembraneParams(params.p, params.q, 0.0, 0.0, params.mu, params.nu), grid
    )
    I = sp.identity(grid.n_nodes, format="csc")
    target_slow = spla.spsolve((lam * I - a0.matrix).tocsc(), g.values)
    out = []
    for eps in eps_list:
        fast = assemble_Aeps(params, grid, eps).matrix
        slow = assemble_APhi(params, grid, eps).matrix  # eps^2 A^eps
        f_fast = spla.spsolve((lam * I - fast).tocsc(), g.values)
        f_slow = spla.spsolve((lam * I - slow).tocsc(), g.values)
        out.append(
            (
                eps,
                float(np.max(np.abs(f_fast - target_fast.values))),
                float(np.max(np.abs(f_slow - target_slow))),
            )
        )
    return out
