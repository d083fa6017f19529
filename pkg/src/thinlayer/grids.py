"""Grids, grid functions, norms, quadrature, and tensor packing.

The vertical direction is discretized on a split grid over [-1,0-] u [0+,1]
with the two membrane nodes 0- and 0+ kept as distinct degrees of freedom.
The horizontal base is a uniform rectangle grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class IntervalGrid:
    """Uniform grid of n cells on [a, b]."""

    a: float
    b: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n", "cell count must be positive")
        if not self.b > self.a:
            raise ValidationError("b", "interval must have positive length")
        object.__setattr__(self, "nodes", _freeze(np.linspace(self.a, self.b, self.n + 1)))

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @property
    def n_nodes(self):
        return self.n + 1

    def trapezoid_weights(self):
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = self.h / 2
        return w


@dataclass(frozen=True)
class SplitGrid:
    """Two intervals [-1,0] and [0,1] with doubled membrane node at 0.

    Node layout: left nodes 0..left.n (node left.n is 0-), then right nodes
    (node left.n+1 is 0+).  0- and 0+ are never aliased.
    """

    left: IntervalGrid
    right: IntervalGrid

    def __post_init__(self):
        if self.left.b != 0.0 or self.right.a != 0.0:
            raise ValidationError("grid", "membrane must sit at 0 (left.b = right.a = 0)")

    @classmethod
    def symmetric(cls, n):
        return cls(IntervalGrid(-1.0, 0.0, n), IntervalGrid(0.0, 1.0, n))

    @property
    def n_nodes(self):
        return self.left.n + self.right.n + 2

    @property
    def i_minus(self):
        """Index of the 0- node."""
        return self.left.n

    @property
    def i_plus(self):
        """Index of the 0+ node."""
        return self.left.n + 1

    @property
    def nodes(self):
        return np.concatenate([self.left.nodes, self.right.nodes])

    def left_slice(self):
        return slice(0, self.left.n + 1)

    def right_slice(self):
        return slice(self.left.n + 1, self.n_nodes)

    def trapezoid_weights(self):
        return np.concatenate([self.left.trapezoid_weights(), self.right.trapezoid_weights()])


@dataclass(frozen=True)
class GridFunction:
    """Node values on an IntervalGrid or SplitGrid."""

    grid: object
    values: np.ndarray = None

    def __post_init__(self):
        v = _freeze(self.values)
        if v.shape != (self.grid.n_nodes,):
            raise ValidationError("values", f"expected {self.grid.n_nodes} node values, got {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid, f):
        return cls(grid, np.vectorize(f)(grid.nodes).astype(float))

    def left_part(self):
        """Restriction to [-1, 0-] (SplitGrid only)."""
        return GridFunction(self.grid.left, self.values[self.grid.left_slice()])

    def right_part(self):
        """Restriction to [0+, 1] (SplitGrid only)."""
        return GridFunction(self.grid.right, self.values[self.grid.right_slice()])


def trapezoid_integral(f):
    """Composite trapezoid rule over the grid interval(s)."""
    return float(np.dot(f.grid.trapezoid_weights(), f.values))


def sup_norm(f):
    """Max of absolute node values of a GridFunction or LayerField."""
    return float(np.max(np.abs(f.values)))


def l2_norm(f):
    """Trapezoid-weighted L2 norm."""
    if isinstance(f, LayerField):
        w = np.outer(f.base.trapezoid_weights().ravel(), f.vertical.trapezoid_weights())
        return float(np.sqrt(np.sum(w * f.values**2)))
    return float(np.sqrt(np.dot(f.grid.trapezoid_weights(), f.values**2)))


@dataclass(frozen=True)
class BaseGrid2D:
    """Uniform rectangle grid on [0,Lx] x [0,Ly]."""

    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValidationError("Lx/Ly", "side lengths must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValidationError("nx/ny", "cell counts must be positive")

    @property
    def hx(self):
        return self.Lx / self.nx

    @property
    def hy(self):
        return self.Ly / self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def xs(self):
        return np.linspace(0.0, self.Lx, self.nx + 1)

    @property
    def ys(self):
        return np.linspace(0.0, self.Ly, self.ny + 1)

    def trapezoid_weights(self):
        wx = np.full(self.nx + 1, self.hx)
        wx[0] = wx[-1] = self.hx / 2
        wy = np.full(self.ny + 1, self.hy)
        wy[0] = wy[-1] = self.hy / 2
        return np.outer(wx, wy)


@dataclass(frozen=True)
class LayerField:
    """Tensor-grid function u(x,y,z) over base x vertical, base-major layout.

    values has shape (nx+1, ny+1, n_vert) so that pack() flattens base-major.
    """

    base: BaseGrid2D
    vertical: SplitGrid
    values: np.ndarray = None

    def __post_init__(self):
        v = _freeze(self.values)
        shape = (self.base.nx + 1, self.base.ny + 1, self.vertical.n_nodes)
        if v.shape != shape:
            raise ValidationError("values", f"expected shape {shape}, got {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, base, vertical, f):
        X = base.xs[:, None, None]
        Y = base.ys[None, :, None]
        Z = vertical.nodes[None, None, :]
        return cls(base, vertical, (f(X, Y, Z) * np.ones_like(X + Y + Z)).astype(float))

    def pack(self):
        """Flatten to a single vector, base-major (vertical index fastest)."""
        return self.values.reshape(-1).copy()

    @classmethod
    def unpack(cls, base, vertical, flat):
        shape = (base.nx + 1, base.ny + 1, vertical.n_nodes)
        return cls(base, vertical, np.asarray(flat, dtype=float).reshape(shape))


def tensor_apply(op_h, op_v, u, mode="sum"):
    """Apply (op_h (x) I + I (x) op_v) or (op_h (x) op_v) to a LayerField.

    op_h acts on the flattened base index, op_v on the vertical index; the
    Kronecker product is never materialized.
    """
    op_h = np.asarray(op_h, dtype=float)
    op_v = np.asarray(op_v, dtype=float)
    nb = u.base.n_nodes
    nv = u.vertical.n_nodes
    if op_h.shape != (nb, nb):
        raise ValidationError("op_h", f"expected shape {(nb, nb)}, got {op_h.shape}")
    if op_v.shape != (nv, nv):
        raise ValidationError("op_v", f"expected shape {(nv, nv)}, got {op_v.shape}")
    U = u.values.reshape(nb, nv)
    if mode == "sum":
        out = op_h @ U + U @ op_v.T
    elif mode == "product":
        out = op_h @ U @ op_v.T
    else:
        raise ValidationError("mode", "must be 'sum' or 'product'")
    return LayerField(u.base, u.vertical, out.reshape(u.values.shape))


# CSV serialization; all floats written with 17 significant digits.

def _fmt(x):
    return format(float(x), ".17g")


def write_vertical_csv(path, f):
    lines = ["index,coordinate,value"]
    for i, (x, v) in enumerate(zip(f.grid.nodes, f.values)):
        lines.append(f"{i},{_fmt(x)},{_fmt(v)}")
    path.write_text("\n".join(lines) + "\n")


def write_base_csv(path, grid, values):
    lines = ["ix,iy,x,y,value"]
    xs, ys = grid.xs, grid.ys
    for ix in range(grid.nx + 1):
        for iy in range(grid.ny + 1):
            lines.append(f"{ix},{iy},{_fmt(xs[ix])},{_fmt(ys[iy])},{_fmt(values[ix, iy])}")
    path.write_text("\n".join(lines) + "\n")


def write_layer_csv(path, u):
    lines = ["ix,iy,iz,x,y,z,value"]
    xs, ys = u.base.xs, u.base.ys
    zs = u.vertical.nodes
    for ix in range(u.base.nx + 1):
        for iy in range(u.base.ny + 1):
            for iz in range(u.vertical.n_nodes):
                lines.append(
                    f"{ix},{iy},{iz},{_fmt(xs[ix])},{_fmt(ys[iy])},{_fmt(zs[iz])},{_fmt(u.values[ix, iy, iz])}"
                )
    path.write_text("\n".join(lines) + "\n")
