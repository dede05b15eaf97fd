import json
import warnings

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from mirrorbias.densities import BiasDensity
from mirrorbias.potentials import Potential
from mirrorbias.shallow_net import Dataset
from mirrorbias.variational import (DiscreteFunction, Grid, NonConvergenceError,
                                    SingularKKTError, SubquadraticPower, VariationalSpec,
                                    eval_G1, eval_G2, eval_G3, kkt_system, second_diff,
                                    solve, solve_scaled, solve_spline, solve_unscaled)
from mirrorbias.variational import _BregmanObjective

from oracles import kkt_oracle, natural_spline

U1 = BiasDensity.uniform(1.0)
G600 = Grid(-1.5, 1.5, 600)


def snapped(grid, xs):
    return grid.t[[grid.nearest(x) for x in xs]]


def test_grid_defaults_and_validation():
    g = Grid()
    assert (g.lo, g.hi, g.N) == (-1.5, 1.5, 500)
    assert g.t.size == 501
    with pytest.raises(ValueError):
        Grid(1.0, 0.0)
    with pytest.raises(ValueError):
        Grid(N=3)
    with pytest.warns(UserWarning, match="snapped"):
        g.nearest(-0.2)
    with pytest.raises(ValueError):
        g.nearest(2.0)


def test_second_diff_exactness():
    g = Grid(-1.5, 1.5, 30)
    t = g.t[1:-1]
    sq = DiscreteFunction.from_callable(lambda x: x * x, g)
    np.testing.assert_allclose(second_diff(sq, g), 2.0, rtol=1e-12)
    cube = DiscreteFunction.from_callable(lambda x: x ** 3, g)
    np.testing.assert_allclose(second_diff(cube, g), 6 * t, atol=1e-12)
    aff = DiscreteFunction.from_callable(lambda x: 3 * x - 1, g)
    np.testing.assert_allclose(second_diff(aff, g), 0.0, atol=1e-12)


def test_functional_examples():
    zero = DiscreteFunction(np.zeros(G600.N + 1))
    assert eval_G1(zero, U1, G600) == eval_G2(zero) == eval_G3(zero, U1, G600) == 0.0
    s = 0.7
    f = DiscreteFunction(np.zeros(G600.N + 1), s, s)
    assert eval_G2(f) == pytest.approx(4 * s * s)
    # |x| = integral of |x - b| h''/2 db with h'' a unit mass at 0: G2 = G3 = 0
    absf = DiscreteFunction.from_callable(np.abs, G600, -1.0, 1.0)
    assert eval_G2(absf) == 0.0
    assert eval_G3(absf, U1, G600) == pytest.approx(0.0, abs=1e-24)
    # h = x**2 on the support: G1 = sum dt * 4 / p over nodes in [-1, 1]
    sq = DiscreteFunction.from_callable(lambda x: x * x, G600)
    nodes = np.count_nonzero(np.abs(G600.t[1:-1]) <= 1 + 1e-9)
    assert eval_G1(sq, U1, G600) == pytest.approx(nodes * G600.dt * 4 / 0.5, rel=1e-10)


def test_zero_labels_give_zero(fig1, fig2):
    z1 = Dataset(fig1.xs, np.zeros(fig1.m))
    h = solve_unscaled(VariationalSpec(z1, U1, G600))
    assert np.max(np.abs(h.h)) <= 1e-14 and h.info["objective"] <= 1e-26
    z2 = Dataset(fig2.xs, np.zeros(fig2.m))
    h = solve_scaled(VariationalSpec(z2, U1, G600, "scaled_abs", Potential.power(3, 1, True)))
    assert np.max(np.abs(h.h)) <= 1e-14


@pytest.mark.parametrize("N", [500, 600])
def test_unscaled_matches_independent_kkt(fig1, N):
    grid = Grid(-1.5, 1.5, N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = solve_unscaled(VariationalSpec(fig1, U1, grid))
    ho, sn, sp, res = kkt_oracle(fig1.xs[:, 0], fig1.ys, -1.5, 1.5, N, 1.0, U1.pdf,
                                 U1.second_moment())
    assert np.max(np.abs(h.h - ho)) <= 1e-8
    assert abs(h.slope_neg - sn) <= 1e-8 and abs(h.slope_pos - sp) <= 1e-8
    assert h.info["constraint_residual"] <= 1e-9
    assert h.info["kkt_residual"] <= 1e-8


def test_truncgauss_density_matches_oracle(fig1):
    dens = BiasDensity.truncgauss(0.6, 1.0)
    h = solve_unscaled(VariationalSpec(fig1, dens, G600))
    ho, *_ = kkt_oracle(fig1.xs[:, 0], fig1.ys, -1.5, 1.5, 600, 1.0, dens.pdf,
                        dens.second_moment())
    assert np.max(np.abs(h.h - ho)) <= 1e-8


def test_symmetric_data_even_solution():
    data = Dataset(np.array([-0.5, 0.5]), np.array([0.3, 0.3]))
    h = solve_unscaled(VariationalSpec(data, U1, G600))
    assert np.max(np.abs(h.h - h.h[::-1])) <= 1e-9
    assert abs(h.slope_neg + h.slope_pos) <= 1e-9
    ho, *_ = kkt_oracle(data.xs[:, 0], data.ys, -1.5, 1.5, 600, 1.0, U1.pdf, U1.second_moment())
    assert np.max(np.abs(h.h - ho)) <= 1e-8


def test_duplicate_nodes_rejected():
    data = Dataset(np.array([0.1, 0.1001]), np.array([0.0, 1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(SingularKKTError):
            solve_unscaled(VariationalSpec(data, U1, G600))


def test_spec_validation(fig1):
    with pytest.raises(ValueError):
        VariationalSpec(Dataset(np.array([1.2]), np.array([0.0])), U1, G600)
    with pytest.raises(ValueError):
        VariationalSpec(fig1, U1, G600, "scaled_abs")
    with pytest.raises(ValueError):
        solve_scaled(VariationalSpec(fig1, U1, G600))


# -- spline -----------------------------------------------------------------------

def test_spline_two_points_affine():
    data = Dataset(np.array([-0.4, 0.6]), np.array([1.0, -1.0]))
    h = solve_spline(VariationalSpec(data, U1, G600, "spline"))
    line = 1.0 - 2.0 * (G600.t + 0.4)
    assert np.max(np.abs(h.h - line)) <= 1e-10
    assert eval_G1(h, U1, G600) <= 1e-16


@pytest.mark.parametrize("N", [500, 600])
def test_spline_matches_tridiagonal_oracle_fig2(fig2, N):
    grid = Grid(-1.5, 1.5, N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = solve_spline(VariationalSpec(fig2, U1, grid, "spline"))
        xk = snapped(grid, fig2.xs[:, 0])
    hull = (grid.t >= xk[0] - 1e-12) & (grid.t <= xk[-1] + 1e-12)
    oracle = natural_spline(xk, fig2.ys, grid.t)
    assert np.max(np.abs(h.h - oracle)[hull]) <= 1e-4


def test_spline_error_is_second_order(fig1):
    errs = []
    for N in (600, 1200, 2400):
        grid = Grid(-1.5, 1.5, N)
        h = solve_spline(VariationalSpec(fig1, U1, grid, "spline"))
        hull = np.abs(grid.t) <= 1 + 1e-12
        errs.append(np.max(np.abs(h.h - natural_spline(fig1.xs[:, 0], fig1.ys, grid.t))[hull]))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5
    assert errs[-1] <= 1e-4


def test_thomas_oracle_matches_scipy(fig1, fig2):
    t = np.linspace(-1, 1, 101)
    for d in (fig1, fig2):
        ref = CubicSpline(d.xs[:, 0], d.ys, bc_type="natural")(t)
        assert np.max(np.abs(natural_spline(d.xs[:, 0], d.ys, t) - ref)) <= 1e-13


def test_spline_symmetric_data_even():
    data = Dataset(np.array([-1.0, -0.3, 0.3, 1.0]), np.array([0.2, -0.1, -0.1, 0.2]))
    h = solve_spline(VariationalSpec(data, U1, G600, "spline"))
    assert np.max(np.abs(h.h - h.h[::-1])) <= 1e-9


def test_spline_ignores_density(fig2):
    a = solve_spline(VariationalSpec(fig2, U1, G600, "spline"))
    b = solve_spline(VariationalSpec(fig2, BiasDensity.truncgauss(0.3, 1.0), G600, "spline"))
    np.testing.assert_array_equal(a.h, b.h)


# -- scaled (Bregman) problem ------------------------------------------------------

SCALED = [Potential.quadratic(True), Potential.power(3, 1, True), Potential.power(4, 1, True)]


@pytest.fixture(scope="module")
def scaled_solutions():
    data = Dataset(np.array([-1.0, 0.35, 0.65, 1.0]), np.array([0.15, 0.15, -0.15, 0.15]))
    return data, [solve_scaled(VariationalSpec(data, U1, G600, "scaled_abs", p)) for p in SCALED]


def test_scaled_constraints(scaled_solutions):
    _, sols = scaled_solutions
    for h in sols:
        assert h.info["constraint_residual"] <= 1e-9
        assert h.info["G2"] <= 1e-12 and h.info["G3"] <= 1e-12


def test_scaled_quadratic_is_curvature_minimizer(scaled_solutions):
    data, sols = scaled_solutions
    ho, *_ = kkt_oracle(data.xs[:, 0], data.ys, -1.5, 1.5, 600, 1.0, U1.pdf,
                        U1.second_moment(), boundary=False, abs_class=True)
    assert np.max(np.abs(sols[0].h - ho)) <= 1e-7


def test_scaled_local_optimality(scaled_solutions):
    data, sols = scaled_solutions
    rng = np.random.default_rng(8)
    for pot, h in zip(SCALED, sols):
        spec = VariationalSpec(data, U1, G600, "scaled_abs", pot)
        K, r, Q, A, c, idx = kkt_system(spec, with_boundary=False, abs_class=True)
        Z = np.linalg.svd(A)[2][A.shape[0]:].T
        F0 = h.info["objective"]
        obj = _BregmanObjective(spec)
        for _ in range(100):
            du = Z @ rng.standard_normal(Z.shape[1])
            du *= 1e-3 / np.max(np.abs(du))
            assert obj.value(h.u + du) >= F0 - 1e-12 * max(1.0, F0)


def test_curvature_ordering(scaled_solutions):
    _, sols = scaled_solutions
    peaks = [np.max(np.abs(second_diff(h, G600))) for h in sols]
    assert peaks[0] >= peaks[1] >= peaks[2]


def test_unscaled_local_optimality(fig1):
    spec = VariationalSpec(fig1, U1, G600)
    h = solve_unscaled(spec)
    K, r, Q, A, c, idx = kkt_system(spec)
    Z = np.linalg.svd(A)[2][A.shape[0]:].T
    F0 = h.u @ Q @ h.u
    rng = np.random.default_rng(9)
    for _ in range(100):
        du = Z @ rng.standard_normal(Z.shape[1])
        du *= 1e-3 / np.max(np.abs(du))
        assert (h.u + du) @ Q @ (h.u + du) >= F0 - 1e-12 * F0


def test_grid_refinement_stability(fig1, fig2):
    fine = Grid(-1.5, 1.5, 1200)
    for spec_of in (lambda g: VariationalSpec(fig1, U1, g),
                    lambda g: VariationalSpec(fig2, U1, g, "scaled_abs", Potential.power(3, 1, True))):
        a, b = solve(spec_of(G600)), solve(spec_of(fine))
        assert np.max(np.abs(a.h - b.h[::2])) <= 5e-3


def test_subquadratic_power_mode(fig2):
    pot = SubquadraticPower(1.5, 0.1)
    h = solve_scaled(VariationalSpec(fig2, U1, Grid(-1.5, 1.5, 300), "scaled_abs", pot))
    assert h.info["constraint_residual"] <= 1e-9
    assert h.info["newton_gap"] <= 1e-6 * max(1.0, h.info["objective"])
    with pytest.raises(ValueError):
        SubquadraticPower(2.0)


def test_nonconvergence_is_reported(fig2):
    spec = VariationalSpec(fig2, U1, G600, "scaled_abs", Potential.power(4, 1, True))
    with pytest.raises(NonConvergenceError, match="gap"):
        solve_scaled(spec, tol=1e-30, max_iter=2)


def test_write_sidecar(tmp_path, fig1):
    h = solve_unscaled(VariationalSpec(fig1, U1, G600))
    h.write(tmp_path / "v", G600)
    rows = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:, 1], h.h)
    meta = json.loads((tmp_path / "v.json").read_text())
    assert meta["slope_pos"] == h.slope_pos and "kkt_residual" in meta
