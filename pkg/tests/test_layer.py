import numpy as np
import pytest

from thinlayer.errors import ValidationError
from thinlayer.grids import BaseGrid2D, LayerField, SplitGrid
from thinlayer.layer import (
    CoefficientFields,
    LayerOperator,
    NeumannLaplacian2D,
    ReactionTerm,
    evolve2d,
    layer_evolve,
    neumann_1d,
    project_P,
    project_Ppq3d,
    semilinear_evolve,
    vertical_generator,
)


@pytest.fixture
def setup():
    base = BaseGrid2D(1.0, 1.0, 5, 4)
    vert = SplitGrid.symmetric(8)
    lap = NeumannLaplacian2D(base)
    return base, vert, lap


def test_neumann_1d_row_sums():
    D = neumann_1d(6, 0.25)
    np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-10)
    off = D - np.diag(np.diag(D))
    assert off.min() >= 0.0


def test_evolve2d_preserves_constants(setup):
    base, _, lap = setup
    U = np.full((6, 5), 2.5)
    out = evolve2d(lap, U, 0.3, 0.01)
    np.testing.assert_allclose(out, 2.5, atol=1e-12)


def test_evolve2d_decays_modes(setup):
    base, _, lap = setup
    X, Y = np.meshgrid(base.xs, base.ys, indexing="ij")
    U = np.cos(np.pi * X)
    out = evolve2d(lap, U, 0.2, 1e-3)
    # discrete eigenvalue of cos(pi x) mode under the 1D Neumann matrix
    mu = 2.0 * (np.cos(np.pi * base.hx) - 1.0) / base.hx**2
    np.testing.assert_allclose(out, np.exp(0.2 * mu) * U, atol=1e-4)


def test_coefficient_fields_validation(setup):
    base, _, _ = setup
    shape = (6, 5)
    with pytest.raises(ValidationError):
        CoefficientFields(np.zeros(shape), np.zeros(shape), -np.ones(shape), np.zeros(shape))


def test_reaction_term_validation():
    with pytest.raises(ValidationError):
        ReactionTerm(lambda u: u + 1.0, lipschitz=1.0)  # F(0) != 0
    with pytest.raises(ValidationError):
        ReactionTerm(lambda u: u**3, lipschitz=0.1)  # constant too small
    F = ReactionTerm(lambda u: np.sin(u), lipschitz=1.0)
    assert F(np.array([0.0])) == 0.0


def test_vertical_generator_conservative_without_killing():
    vert = SplitGrid.symmetric(10)
    M = vertical_generator(vert, 0.5, 0.3, 0.7, 1.0, 0.5, None, None)
    np.testing.assert_allclose(M.sum(axis=1), 0.0, atol=1e-8)


def test_vertical_generator_robin_kills_constants():
    vert = SplitGrid.symmetric(10)
    c = 0.7
    M = vertical_generator(vert, 0.5, 0.0, 0.0, 0.0, 0.0, None, None, c_minus=c, c_plus=c)
    one = np.ones(vert.n_nodes)
    out = M @ one
    h = vert.left.h
    # outer rows lose mass at rate 2c/h (finite-volume surface sink)
    assert out[0] == pytest.approx(-2.0 * c / h, rel=1e-12)
    assert out[-1] == pytest.approx(-2.0 * c / h, rel=1e-12)
    assert np.max(np.abs(out[1:-1])) < 1e-9


def test_apply_matches_kronecker(setup):
    base, vert, lap = setup
    coeff = CoefficientFields.constant(base, 0.2, 0.1, 0.8, 0.5)
    op = LayerOperator(lap, vert, 0.5, 0.3, 0.7, coeff)
    rng = np.random.default_rng(0)
    u = LayerField(base, vert, rng.standard_normal((6, 5, vert.n_nodes)))
    out = op.apply(u)
    Mv = op.column_matrix(0, 0)
    nv = vert.n_nodes
    A = (
        np.kron(np.kron(lap.Dx, np.eye(5)), np.eye(nv))
        + np.kron(np.kron(np.eye(6), lap.Dy), np.eye(nv))
        + np.kron(np.eye(30), Mv)
    )
    np.testing.assert_allclose(out.pack(), A @ u.pack(), atol=1e-9)


def test_factored_requires_constant_and_no_killing(setup):
    base, vert, lap = setup
    coeff = CoefficientFields.constant(base, 0.5, 0.0, 0.0, 0.0)
    op = LayerOperator(lap, vert, 0.5, 0.0, 0.0, coeff)
    u0 = LayerField.from_callable(base, vert, lambda x, y, z: np.ones_like(x + y + z))
    with pytest.raises(ValidationError):
        layer_evolve(op, u0, 0.1, mode="factored")


def test_factored_vs_strang_constant_coefficients(setup):
    base, vert, lap = setup
    coeff = CoefficientFields.constant(base, 0.0, 0.0, 0.9, 0.4)
    op = LayerOperator(lap, vert, 0.3, 0.2, 0.6, coeff)
    u0 = LayerField.from_callable(
        base, vert, lambda x, y, z: (1 + 0.5 * np.cos(np.pi * x)) * (1 + 0.3 * z)
    )
    uf = layer_evolve(op, u0, 0.3, mode="factored")
    us = layer_evolve(op, u0, 0.3, dt=0.01, mode="strang")
    assert np.max(np.abs(uf.values - us.values)) < 1e-9


def test_layer_conservative_without_killing(setup):
    base, vert, lap = setup
    coeff = CoefficientFields.constant(base, 0.0, 0.0, 1.0, 0.7)
    op = LayerOperator(lap, vert, 0.4, 0.5, 0.5, coeff)
    u0 = LayerField.from_callable(base, vert, lambda x, y, z: np.ones_like(x + y + z))
    out = layer_evolve(op, u0, 0.2, mode="factored")
    np.testing.assert_allclose(out.values, 1.0, atol=1e-11)


def test_variable_coefficients_strang(setup):
    base, vert, lap = setup
    alpha = np.where(np.add.outer(base.xs, np.zeros(5)) < 0.5, 2.0, 0.0)
    coeff = CoefficientFields(np.zeros((6, 5)), np.zeros((6, 5)), alpha, np.full((6, 5), 0.5))
    assert not coeff.is_constant()
    op = LayerOperator(lap, vert, 0.5, 0.0, 0.0, coeff)
    u0 = LayerField.from_callable(base, vert, lambda x, y, z: 1.0 + 0.5 * np.sign(z) + 0.0 * x)
    out = layer_evolve(op, u0, 0.1, dt=0.01, mode="strang")
    assert np.all(np.isfinite(out.values))
    # still conservative: row sums vanish columnwise
    one = LayerField.from_callable(base, vert, lambda x, y, z: np.ones_like(x + y + z))
    np.testing.assert_allclose(layer_evolve(op, one, 0.1, dt=0.01, mode="strang").values, 1.0, atol=1e-11)


def test_semilinear_affine_envelope(setup):
    base, vert, lap = setup
    coeff = CoefficientFields.constant(base, 0.0, 0.0, 0.6, 0.4)
    op = LayerOperator(lap, vert, 0.5, 0.2, 0.8, coeff)
    u0 = LayerField.from_callable(base, vert, lambda x, y, z: 1 + 0.2 * np.cos(np.pi * x) + 0.1 * z)
    F = ReactionTerm(lambda u: -u, lipschitz=1.0, affine_slope=-1.0)
    t = 0.3
    ua = semilinear_evolve(op, u0, t, 0.01, F)
    ub = layer_evolve(op, u0, t, 0.01, mode="strang")
    assert np.max(np.abs(ua.values - np.exp(-t) * ub.values)) < 1e-12


def test_projections(setup):
    base, vert, _ = setup
    u = LayerField.from_callable(base, vert, lambda x, y, z: x + 0.0 * z)
    avg_m, avg_p = project_P(u)
    X = np.add.outer(base.xs, np.zeros(5))
    np.testing.assert_allclose(avg_m, X, atol=1e-12)
    np.testing.assert_allclose(avg_p, X, atol=1e-12)
    uz = LayerField.from_callable(base, vert, lambda x, y, z: z)
    pm, pp = project_Ppq3d(1.0, 1.0, uz)
    np.testing.assert_allclose(pm, 0.0, atol=1e-14)
    np.testing.assert_allclose(pp, 0.0, atol=1e-14)
    pm, pp = project_Ppq3d(0.0, 0.0, uz)
    np.testing.assert_allclose(pm, -0.5, atol=1e-10)
    np.testing.assert_allclose(pp, 0.5, atol=1e-10)
