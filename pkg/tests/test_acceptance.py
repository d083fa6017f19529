"""End-to-end acceptance checks, one per headline guarantee.  Each test
prints a single pass/fail line; tolerances and runtime budgets are asserted.
"""

import time

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from thinlayer.grids import BaseGrid2D, GridFunction, IntervalGrid, LayerField, SplitGrid
from thinlayer.layer import (
    CoefficientFields,
    LayerOperator,
    NeumannLaplacian2D,
    ReactionTerm,
    layer_evolve,
    semilinear_evolve,
)
from thinlayer.limit import LimitGenerator, LimitState, compare_full_vs_limit, limit_evolve
from thinlayer.forms import FormContext, duality_check, form_a_eps, sectoriality_scan
from thinlayer.mc import CtmcRun, estimate_semigroup, membrane_occupation
from thinlayer.membrane import (
    MeasureSpec,
    MembraneParams,
    assemble_APhi,
    assemble_Aeps,
    greiner_resolvent,
    kurtz_sweep,
    lift_pair,
)
from thinlayer.sticky import (
    assemble_sticky,
    decay_to_equilibrium,
    evolve_matrix,
    resolvent_closed_form,
    resolvent_discrete,
    spectral_gap,
)


def _report(num, name, ok, detail):
    print(f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


def _smooth_interval(grid):
    return GridFunction(grid, np.cos(np.pi * grid.nodes) + 0.5 * grid.nodes**2)


def test_criterion_01_resolvent_oracle():
    t0 = time.perf_counter()
    grid = IntervalGrid(0.0, 1.0, 2000)
    g = _smooth_interval(grid)
    worst = 0.0
    for r in (0.0, 0.25, 0.5, 0.75, 1.0):
        op = assemble_sticky(r, grid)
        for lam in (0.5, 1.0, 10.0):
            cf = resolvent_closed_form(r, lam, g)
            dd = resolvent_discrete(op, lam, g)
            worst = max(worst, float(np.max(np.abs(cf.values - dd.values))))
    errs = []
    for n in (500, 1000):
        gr = IntervalGrid(0.0, 1.0, n)
        gg = _smooth_interval(gr)
        cf = resolvent_closed_form(0.5, 1.0, gg)
        dd = resolvent_discrete(assemble_sticky(0.5, gr), 1.0, gg)
        errs.append(float(np.max(np.abs(cf.values - dd.values))))
    order = float(np.log2(errs[0] / errs[1]))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-4 and order >= 1.8 and elapsed < 5.0
    _report(1, "resolvent-oracle", ok, f"sup-gap={worst:.2e} order={order:.2f} {elapsed:.1f}s")


def test_criterion_02_conservativity_positivity():
    grid = IntervalGrid(0.0, 1.0, 120)
    rng = np.random.default_rng(0)
    worst_cons, worst_neg = 0.0, 0.0
    for r in (0.0, 0.3, 0.7, 1.0):
        op = assemble_sticky(r, grid)
        for t in (0.1, 0.7):
            out = evolve_matrix(op.matrix, np.ones(121), t, 0.01, "implicit-euler")
            worst_cons = max(worst_cons, float(np.max(np.abs(out - 1.0))))
            f0 = rng.uniform(0.0, 2.0, 121)
            out = evolve_matrix(op.matrix, f0, t, 0.01, "implicit-euler")
            worst_neg = max(worst_neg, float(-min(out.min(), 0.0)))
    ok = worst_cons <= 1e-12 and worst_neg <= 1e-12
    _report(2, "conservativity-positivity", ok, f"|e^(tG)1-1|={worst_cons:.1e} neg={worst_neg:.1e}")


def test_criterion_03_equilibrium_decay():
    t0 = time.perf_counter()
    worst_rel = 0.0
    for r in (0.0, 0.5, 1.0):
        grid = IntervalGrid(0.0, 1.0, 400)
        op = assemble_sticky(r, grid)
        fit = decay_to_equilibrium(op, _smooth_interval(grid), np.linspace(0.05, 1.2, 25))
        gap = spectral_gap(op)
        worst_rel = max(worst_rel, abs(fit.omega - gap) / gap)
    gaps = [spectral_gap(assemble_sticky(0.0, IntervalGrid(0.0, 1.0, n))) for n in (100, 200, 400)]
    extrap = gaps[2] + (gaps[2] - gaps[1]) / 3.0  # second-order Richardson
    pi2_rel = abs(extrap - np.pi**2) / np.pi**2
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 0.05 and pi2_rel <= 0.01 and elapsed < 30.0
    _report(3, "equilibrium-decay", ok, f"omega-rel={worst_rel:.2e} pi2-rel={pi2_rel:.2e} {elapsed:.1f}s")


def test_criterion_04_rank2_resolvent_identity():
    grid = SplitGrid.symmetric(2000)
    g = GridFunction(grid, np.cos(np.pi * grid.nodes) + 0.3 * grid.nodes)
    uni_l = MeasureSpec.uniform((-1.0, 0.0))
    uni_r = MeasureSpec.uniform((0.0, 1.0))
    sets = [
        MembraneParams(1.0, 1.0, 2.0, 2.0),
        MembraneParams(0.0, 0.0, 1.5, 0.8),
        MembraneParams(0.3, 0.7, 1.0, 0.5, uni_l, None),
        MembraneParams(0.6, 0.2, 0.7, 1.2, None, uni_r),
        MembraneParams(0.5, 0.5, 1.0, 2.0),
    ]
    lam = 30.0
    I = sp.identity(grid.n_nodes, format="csc")
    worst = 0.0
    for params in sets:
        f = greiner_resolvent(params, lam, g)
        A = assemble_APhi(params, grid).matrix
        fd = spla.spsolve((lam * I - A).tocsc(), g.values)
        worst = max(worst, float(np.max(np.abs(f.values - fd))))
    ok = worst <= 1e-3
    _report(4, "rank2-resolvent", ok, f"sup-gap={worst:.2e} over {len(sets)} parameter sets")


_KURTZ_SETS = [
    MembraneParams(0.4, 0.6, 0.3, 0.2),
    MembraneParams(0.0, 0.0, 0.5, 0.25),
    MembraneParams(
        1.0, 1.0, 0.25, 0.3, MeasureSpec.uniform((-1.0, 0.0)), MeasureSpec.uniform((0.0, 1.0))
    ),
]


def test_criterion_05_singular_limit_sweep():
    t0 = time.perf_counter()
    grid = SplitGrid.symmetric(400)
    f = GridFunction(grid, np.cos(np.pi * grid.nodes) + 0.3 * grid.nodes)
    fe = lift_pair(grid, (0.6, 0.4))  # already a pair of side-constants
    eps_list = [0.2, 0.1, 0.05, 0.025]
    t = 0.5
    ok = True
    details = []
    for params in _KURTZ_SETS:
        errs = [e for _, e, _ in kurtz_sweep(params, f, t, eps_list)]
        dec = all(a > b for a, b in zip(errs, errs[1:]))
        ratio = errs[0] / errs[-1]
        errs0 = [e for _, e, _ in kurtz_sweep(params, fe, t, eps_list)]
        flat = max(errs0) <= 1e-3
        ok = ok and dec and ratio > 4.0 and flat
        details.append(f"{errs[-1]:.1e}/{ratio:.1f}x/{max(errs0):.1e}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120.0
    _report(5, "singular-limit", ok, f"final/ratio/flat per set: {' '.join(details)} {elapsed:.0f}s")


def test_criterion_06_measure_robustness():
    grid = SplitGrid.symmetric(400)
    f = GridFunction(grid, np.cos(np.pi * grid.nodes) + 0.3 * grid.nodes)
    eps, t = 0.025, 0.5
    pa = MembraneParams(0.4, 0.6, 0.3, 0.2)  # redistribution measures default to point mass at 0
    pb = MembraneParams(0.4, 0.6, 0.3, 0.2, MeasureSpec.uniform((-1.0, 0.0)), None)
    fields = [
        la.expm(t * assemble_Aeps(p, grid, eps).matrix.toarray()) @ f.values for p in (pa, pb)
    ]
    diff = float(np.max(np.abs(fields[0] - fields[1])))
    bound = 3.0 * max(kurtz_sweep(p, f, t, [eps])[0][1] for p in (pa, pb))
    ok = diff <= bound
    _report(6, "measure-robustness", ok, f"field-diff={diff:.2e} <= 3x-limit-err={bound:.2e}")


def test_criterion_07_tensor_factorization():
    base = BaseGrid2D(1.0, 1.0, 8, 8)
    vert = SplitGrid.symmetric(30)
    lap = NeumannLaplacian2D(base)
    coeff = CoefficientFields.constant(base, 0.0, 0.0, 0.8, 0.5)
    u0 = LayerField.from_callable(
        base, vert, lambda x, y, z: (1 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y)) * (1 + 0.25 * z)
    )
    table = compare_full_vs_limit(lap, vert, coeff, u0, 0.5, [0.2, 0.1, 0.05], p=0.3, q=0.7, dt=1e-3)
    sups = [row[1] for row in table]
    dec = all(a > b for a, b in zip(sups, sups[1:]))
    op = LayerOperator(lap, vert, 0.3, 0.2, 0.6, CoefficientFields.constant(base, 0.0, 0.0, 0.9, 0.4))
    uf = layer_evolve(op, u0, 0.3, mode="factored")
    us = layer_evolve(op, u0, 0.3, dt=1e-3, mode="strang")
    split = float(np.max(np.abs(uf.values - us.values)))
    ok = dec and split <= 1e-6
    _report(7, "tensor-factorization", ok, f"gaps={[f'{s:.1e}' for s in sups]} split={split:.1e}")


def test_criterion_08_forms():
    base = BaseGrid2D(1.0, 1.0, 6, 6)
    vert = SplitGrid.symmetric(14)
    coeff = CoefficientFields.constant(base, 0.3, 0.2, 0.8, 0.5)
    eps_list = [1.0, 0.5, 0.1]
    rng = np.random.default_rng(0)
    shape = (7, 7, vert.n_nodes)
    ur = LayerField(base, vert, rng.standard_normal(shape))
    ui = LayerField(base, vert, rng.standard_normal(shape))
    ims = [form_a_eps(FormContext(base, vert, coeff, e), (ur, ui), (ur, ui)).imag for e in eps_list]
    im_exact = all(im == ims[0] for im in ims)
    u = LayerField.from_callable(base, vert, lambda x, y, z: np.cos(np.pi * x) * (1 + 0.4 * z))
    res = [form_a_eps(FormContext(base, vert, coeff, e), u, u) for e in eps_list]
    re_mono = all(a < b for a, b in zip(res, res[1:]))

    duals = []
    for nb, nz in ((4, 10), (8, 20), (16, 40)):
        b = BaseGrid2D(1.0, 1.0, nb, nb)
        v = SplitGrid.symmetric(nz)
        uu = LayerField.from_callable(
            b, v, lambda x, y, z: np.sin(1.3 * x + 0.2) * np.exp(0.3 * y) * (1 + 0.3 * np.sin(2 * z))
        )
        vv = LayerField.from_callable(b, v, lambda x, y, z: np.cos(0.7 * x) * (1 + 0.2 * y**2) * np.exp(0.2 * z))
        cc = CoefficientFields.constant(b, 0.3, 0.2, 0.8, 0.5)
        duals.append(duality_check(FormContext(b, v, cc, 0.5), uu, vv))
    orders = [np.log2(a / b) for a, b in zip(duals, duals[1:])]
    dual_ok = all(o >= 1.0 for o in orders)

    report = sectoriality_scan(base, vert, coeff, eps_list, samples=200, seed=0)
    ok = im_exact and re_mono and dual_ok and report.uniform and np.isfinite(report.gamma)
    _report(
        8,
        "forms",
        ok,
        f"Im-exact={im_exact} Re-mono={re_mono} dual-orders={[f'{o:.1f}' for o in orders]} gamma={report.gamma:.2e}",
    )


def test_criterion_09_monte_carlo():
    t0 = time.perf_counter()
    N = 100_000
    zs = []
    # two-state
    A = np.array([[-2.0, 2.0], [1.0, -1.0]])
    run = CtmcRun(A, 0, 0.7, N, seed=7)
    f = np.array([1.0, -1.0])
    est = estimate_semigroup(run, f)
    exact = float((la.expm(0.7 * A) @ f)[0])
    zs.append(abs(est.mean - exact) / max(est.stderr, 1e-12))
    # sticky
    grid = IntervalGrid(0.0, 1.0, 200)
    m = assemble_sticky(0.4, grid).matrix
    run = CtmcRun(m, 5, 0.02, N, seed=11)
    f = np.cos(np.pi * grid.nodes)
    est = estimate_semigroup(run, f)
    exact = float((la.expm(0.02 * m.toarray()) @ f)[5])
    zs.append(abs(est.mean - exact) / max(est.stderr, 1e-12))
    # two-sided membrane chain
    sgrid = SplitGrid.symmetric(50)
    mm = assemble_APhi(MembraneParams(0.5, 0.5, 1.0, 0.5), sgrid).matrix
    run = CtmcRun(mm, sgrid.i_minus, 0.05, N, seed=13)
    f = (sgrid.nodes >= 0).astype(float)
    f[sgrid.i_minus] = 0.0
    est = estimate_semigroup(run, f)
    exact = float((la.expm(0.05 * mm.toarray()) @ f)[sgrid.i_minus])
    zs.append(abs(est.mean - exact) / max(est.stderr, 1e-12))
    # occupation monotone in stickiness
    occ = []
    for r in (0.3, 0.6):
        run = CtmcRun(assemble_sticky(r, IntervalGrid(0.0, 1.0, 40)).matrix, 0, 0.3, 20_000, seed=5)
        occ.append(membrane_occupation(run, [0]).mean)
    elapsed = time.perf_counter() - t0
    ok = max(zs) <= 3.0 and occ[1] > occ[0] and elapsed < 120.0
    _report(9, "monte-carlo", ok, f"z-scores={[f'{z:.2f}' for z in zs]} occ={occ[0]:.3f}<{occ[1]:.3f} {elapsed:.0f}s")


def test_criterion_10_semilinear_transfer():
    base = BaseGrid2D(1.0, 1.0, 4, 4)
    vert = SplitGrid.symmetric(10)
    lap = NeumannLaplacian2D(base)
    coeff = CoefficientFields.constant(base, 0.0, 0.0, 0.6, 0.4)
    op = LayerOperator(lap, vert, 0.5, 0.2, 0.8, coeff)
    u0 = LayerField.from_callable(base, vert, lambda x, y, z: 1 + 0.2 * np.cos(np.pi * x) + 0.1 * z)
    T, dt = 0.3, 0.01
    Fd = ReactionTerm(lambda u: -u, lipschitz=1.0, affine_slope=-1.0)
    env_full = float(
        np.max(
            np.abs(
                semilinear_evolve(op, u0, T, dt, Fd).values
                - np.exp(-T) * layer_evolve(op, u0, T, dt, mode="strang").values
            )
        )
    )
    gen = LimitGenerator(lap, coeff)
    ones = np.ones((5, 5))
    s_r = limit_evolve(gen, LimitState(base, ones, ones), T, dt, Fd)
    s_0 = limit_evolve(gen, LimitState(base, ones, ones), T, dt)
    env_limit = float(np.max(np.abs(s_r.u_minus - np.exp(-T) * s_0.u_minus)))

    # mild-solution oracle: Picard iteration of the variation-of-constants
    # formula on the full Kronecker matrix, trapezoid in the time convolution
    F = ReactionTerm(lambda u: 0.8 * np.sin(u), lipschitz=0.8)
    nv = vert.n_nodes
    nb = (base.nx + 1) * (base.ny + 1)
    Mv = op.column_matrix(0, 0)
    A = (
        np.kron(np.kron(lap.Dx, np.eye(base.ny + 1)), np.eye(nv))
        + np.kron(np.kron(np.eye(base.nx + 1), lap.Dy), np.eye(nv))
        + np.kron(np.eye(nb), Mv)
    )
    m = 20
    step = T / m
    E = la.expm(step * A)
    props = [np.eye(A.shape[0])]
    for _ in range(m):
        props.append(props[-1] @ E)
    u0v = u0.pack()
    hom = [props[j] @ u0v for j in range(m + 1)]
    U = [h.copy() for h in hom]
    for _ in range(3):
        Fv = [F(u) for u in U]
        newU = []
        for j in range(m + 1):
            integ = np.zeros_like(u0v)
            if j > 0:
                w = np.full(j + 1, step)
                w[0] = w[-1] = step / 2.0
                for s in range(j + 1):
                    integ += w[s] * (props[j - s] @ Fv[s])
            newU.append(hom[j] + integ)
        U = newU
    picard_gap = float(np.max(np.abs(semilinear_evolve(op, u0, T, 1e-3, F).pack() - U[-1])))
    ok = env_full <= 10.0 * dt**2 and env_limit <= 10.0 * dt**2 and picard_gap <= 1e-3
    _report(
        10,
        "semilinear-transfer",
        ok,
        f"envelope full={env_full:.1e} limit={env_limit:.1e} picard-gap={picard_gap:.1e}",
    )
