"""
Discretized variational problems on a uniform grid.

The unknown is ``u = [h_0, ..., h_N, s_neg, s_pos]``: node values of ``h`` and
its asymptotic slopes. Three problems are solved:

* ``solve_unscaled``: minimize ``G1 + G2 + G3`` (ReLU networks, unscaled
  potentials), a convex quadratic program solved through its KKT system.
* ``solve_scaled``: minimize ``sum dt p D_phi(h''/(2p), 0)`` with the extra
  linear constraints ``G2 = G3 = 0`` (absolute-value networks, scaled
  potentials), by damped Newton in the null space of the constraints.
* ``solve_spline``: minimize ``G1`` alone with linear tails (natural spline).

Data abscissae are snapped to the nearest grid node.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .densities import BiasDensity
from .potentials import Kind, Potential, phi_eval, phi_grad, phi_hess
from .shallow_net import Dataset

__all__ = [
    "Grid",
    "DiscreteFunction",
    "VariationalMode",
    "VariationalSpec",
    "SubquadraticPower",
    "SingularKKTError",
    "NonConvergenceError",
    "second_diff",
    "eval_G1",
    "eval_G2",
    "eval_G3",
    "solve_unscaled",
    "solve_scaled",
    "solve_spline",
    "solve",
    "kkt_system",
]

_SNAP_REL = 1e-6


class SingularKKTError(np.linalg.LinAlgError):
    pass


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``lo = t_0 < ... < t_N = hi``."""

    lo: float = -1.5
    hi: float = 1.5
    N: int = 500

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.N < 4:
            raise ValueError(f"need N >= 4, got {self.N}")

    @property
    def dt(self) -> float:
        return (self.hi - self.lo) / self.N

    @property
    def t(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.N + 1)

    def nearest(self, x: float, what: str = "point") -> int:
        """Index of the node nearest to ``x``; warns if ``x`` is off-grid."""
        if x < self.lo - 0.5 * self.dt or x > self.hi + 0.5 * self.dt:
            raise ValueError(f"{what} {x} lies outside the grid [{self.lo}, {self.hi}]")
        i = int(round((x - self.lo) / self.dt))
        i = min(max(i, 0), self.N)
        gap = abs(self.t[i] - x)
        if gap > 0.5 * self.dt * _SNAP_REL:
            warnings.warn(f"{what} {x} snapped to grid node t[{i}] = {self.t[i]:.6g} "
                          f"(distance {gap:.3g})", stacklevel=3)
        return i

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "N": self.N}


@dataclass
class DiscreteFunction:
    """Node values ``h`` and asymptotic slopes ``h'(-inf)``, ``h'(+inf)``."""

    h: np.ndarray
    slope_neg: float = 0.0
    slope_pos: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if not np.all(np.isfinite(self.h)):
            raise ValueError("non-finite node values")

    @property
    def u(self) -> np.ndarray:
        return np.concatenate([self.h, [self.slope_neg, self.slope_pos]])

    @classmethod
    def from_u(cls, u, info=None) -> "DiscreteFunction":
        return cls(u[:-2].copy(), float(u[-2]), float(u[-1]), dict(info or {}))

    @classmethod
    def from_callable(cls, fn, grid: Grid, slope_neg=0.0, slope_pos=0.0):
        return cls(np.asarray(fn(grid.t), dtype=float), slope_neg, slope_pos)

    def write(self, stem, grid: Grid) -> None:
        """``<stem>.csv`` with ``t, h`` and a ``<stem>.json`` sidecar."""
        with open(f"{stem}.csv", "w") as fh:
            fh.write("t,h\n")
            for t, h in zip(grid.t, self.h):
                fh.write(f"{t:.17g},{h:.17g}\n")
        meta = {"slope_neg": self.slope_neg, "slope_pos": self.slope_pos,
                "grid": grid.to_dict()}
        meta.update(self.info)
        with open(f"{stem}.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=float)


class VariationalMode(enum.Enum):
    UNSCALED_RELU = "unscaled_relu"
    SCALED_ABS = "scaled_abs"
    SPLINE_G1_ONLY = "spline"


@dataclass(frozen=True)
class SubquadraticPower:
    """``|x|**p + omega * x**2`` with ``1 <= p < 2``.

    Only usable as a variational objective; it has no second derivative at 0
    and is rejected by the trainer.
    """

    p: float
    omega: float = 0.1

    def __post_init__(self):
        if not (1.0 <= self.p < 2.0):
            raise ValueError(f"SubquadraticPower needs 1 <= p < 2, got {self.p}")
        if not self.omega > 0:
            raise ValueError("omega must be > 0 for strict convexity")

    def value(self, x):
        return np.abs(x) ** self.p + self.omega * x * x

    def grad(self, x):
        return self.p * np.sign(x) * np.abs(x) ** (self.p - 1.0) + 2.0 * self.omega * x

    def hess(self, x, floor: float = 1e-8):
        ax = np.maximum(np.abs(x), floor)
        if self.p == 1.0:
            return np.full_like(x, 2.0 * self.omega)
        return self.p * (self.p - 1.0) * ax ** (self.p - 2.0) + 2.0 * self.omega


@dataclass
class VariationalSpec:
    data: Dataset
    density: BiasDensity = field(default_factory=BiasDensity.uniform)
    grid: Grid = field(default_factory=Grid)
    mode: VariationalMode = VariationalMode.UNSCALED_RELU
    potential: Potential | SubquadraticPower | None = None
    init_outputs: np.ndarray | None = None

    def __post_init__(self):
        self.mode = VariationalMode(self.mode)
        if self.data.dim != 1:
            raise ValueError("variational problems are univariate")
        x = self.data.xs[:, 0]
        if self.mode is not VariationalMode.SPLINE_G1_ONLY and np.any(np.abs(x) > self.density.B):
            raise ValueError(f"data outside the bias support [-{self.density.B}, {self.density.B}]")
        if np.any(x < self.grid.lo) or np.any(x > self.grid.hi):
            raise ValueError("data outside the grid")
        if self.mode is VariationalMode.SCALED_ABS and self.potential is None:
            raise ValueError("scaled problem needs a potential")

    @property
    def targets(self) -> np.ndarray:
        """``y_i - f(x_i, initial parameters)``."""
        off = 0.0 if self.init_outputs is None else np.asarray(self.init_outputs, dtype=float)
        return self.data.ys - off

    def data_indices(self) -> np.ndarray:
        idx = np.array([self.grid.nearest(x, "data point") for x in self.data.xs[:, 0]])
        if np.unique(idx).size != idx.size:
            raise SingularKKTError("two data points snap to the same grid node")
        return idx


# ---------------------------------------------------------------------------
# discrete functionals
# ---------------------------------------------------------------------------


def second_diff(f: DiscreteFunction, grid: Grid) -> np.ndarray:
    """``(h_{i+1} - 2 h_i + h_{i-1}) / dt**2`` for ``i = 1 .. N-1``."""
    h = f.h
    return (h[2:] - 2.0 * h[1:-1] + h[:-2]) / grid.dt ** 2


def _curvature_weights(density: BiasDensity, grid: Grid) -> np.ndarray:
    """Quadrature weight ``dt / p(t_i)`` on interior nodes in ``[-B, B]``."""
    t = grid.t[1:-1]
    tol = 0.5 * grid.dt * _SNAP_REL
    inside = np.abs(t) <= density.B + tol
    p = density.pdf(np.clip(t, -density.B, density.B))
    w = np.zeros_like(t)
    w[inside] = grid.dt / p[inside]
    return w


def _second_diff_matrix(grid: Grid) -> np.ndarray:
    N = grid.N
    D = np.zeros((N - 1, N + 3))
    r = np.arange(N - 1)
    D[r, r] = 1.0
    D[r, r + 1] = -2.0
    D[r, r + 2] = 1.0
    return D / grid.dt ** 2


def _g3_row(density: BiasDensity, grid: Grid) -> np.ndarray:
    """Row vector ``v`` with ``G3 = (v . u)**2 / E[B**2]``."""
    B = density.B
    v = np.zeros(grid.N + 3)
    v[grid.nearest(-B, "support edge -B")] -= 1.0
    v[grid.nearest(B, "support edge B")] -= 1.0
    v[-1] += B
    v[-2] -= B
    return v


def eval_G1(f: DiscreteFunction, density: BiasDensity, grid: Grid) -> float:
    """Curvature penalty ``sum dt h''_i**2 / p(t_i)`` over the support."""
    return float(np.sum(_curvature_weights(density, grid) * second_diff(f, grid) ** 2))


def eval_G2(f: DiscreteFunction) -> float:
    return (f.slope_pos + f.slope_neg) ** 2


def eval_G3(f: DiscreteFunction, density: BiasDensity, grid: Grid) -> float:
    """``(B (h'(+inf) - h'(-inf)) - h(B) - h(-B))**2 / E[B**2]``."""
    v = _g3_row(density, grid)
    return float((v @ f.u) ** 2 / density.second_moment())


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


def _constraints(spec: VariationalSpec, abs_class: bool):
    grid = spec.grid
    N = grid.N
    idx = spec.data_indices()
    rows, rhs = [], []
    for i, target in zip(idx, spec.targets):
        r = np.zeros(N + 3)
        r[i] = 1.0
        rows.append(r)
        rhs.append(target)
    i_first, i_last = int(idx.min()), int(idx.max())
    dt = grid.dt
    for j in range(1, i_first + 1):
        r = np.zeros(N + 3)
        r[j], r[j - 1], r[N + 1] = 1.0, -1.0, -dt
        rows.append(r)
        rhs.append(0.0)
    for j in range(i_last + 1, N + 1):
        r = np.zeros(N + 3)
        r[j], r[j - 1], r[N + 2] = 1.0, -1.0, -dt
        rows.append(r)
        rhs.append(0.0)
    if abs_class:
        r = np.zeros(N + 3)
        r[N + 1] = r[N + 2] = 1.0
        rows.append(r)
        rhs.append(0.0)
        rows.append(_g3_row(spec.density, grid))
        rhs.append(0.0)
    return np.array(rows), np.array(rhs), idx


def _residuals(spec: VariationalSpec, u: np.ndarray, A, c, idx) -> dict:
    m = spec.data.m
    res = np.abs(A @ u - c)
    out = {"interp_residual": float(res[:m].max()),
           "constraint_residual": float(res.max())}
    return out


# ---------------------------------------------------------------------------
# quadratic problems
# ---------------------------------------------------------------------------


def _quadratic_form(spec: VariationalSpec, with_boundary: bool) -> np.ndarray:
    grid = spec.grid
    D = _second_diff_matrix(grid)
    if spec.mode is VariationalMode.SPLINE_G1_ONLY:
        # plain integral of h''**2 over the whole grid
        w = np.full(grid.N - 1, grid.dt)
    else:
        w = _curvature_weights(spec.density, grid)
    Q = D.T @ (w[:, None] * D)
    if with_boundary:
        e2 = np.zeros(grid.N + 3)
        e2[-2:] = 1.0
        Q += np.outer(e2, e2)
        v = _g3_row(spec.density, grid)
        Q += np.outer(v, v) / spec.density.second_moment()
    return Q


def kkt_system(spec: VariationalSpec, with_boundary: bool = True, abs_class: bool = False):
    """Assemble ``K [u; lam] = r`` for ``min u^T Q u  s.t.  A u = c``.

    Returns ``(K, r, Q, A, c, idx)``.
    """
    Q = _quadratic_form(spec, with_boundary)
    A, c, idx = _constraints(spec, abs_class)
    n, k = Q.shape[0], A.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = 2.0 * Q
    K[:n, n:] = A.T
    K[n:, :n] = A
    r = np.concatenate([np.zeros(n), c])
    return K, r, Q, A, c, idx


def _solve_kkt(spec: VariationalSpec, with_boundary: bool, abs_class: bool = False):
    K, r, Q, A, c, idx = kkt_system(spec, with_boundary, abs_class)
    # row/column equilibration keeps the curvature block (~dt**-3) and the
    # constraint rows (~1) on comparable scales
    s = 1.0 / np.sqrt(np.maximum(np.max(np.abs(K), axis=1), 1e-300))
    Ks = K * s[:, None] * s[None, :]
    try:
        z = np.linalg.solve(Ks, r * s)
    except np.linalg.LinAlgError as exc:
        raise SingularKKTError(f"singular KKT system: {exc}") from exc
    z = z * s
    if not np.all(np.isfinite(z)):
        raise SingularKKTError("KKT solve produced non-finite values")
    # Iterative refinement with residuals in extended precision. K z sums
    # terms of size ~dt**-3, so a float64 residual is rounding noise at the
    # 1e-8 level; long double (80-bit on x86) resolves it.
    KL, rL = K.astype(np.longdouble), r.astype(np.longdouble)
    res = rL - KL @ z.astype(np.longdouble)
    best = float(np.max(np.abs(res)))
    for _ in range(3):
        dz = np.linalg.solve(Ks, res.astype(float) * s) * s
        zn = z + dz
        rn = rL - KL @ zn.astype(np.longdouble)
        bn = float(np.max(np.abs(rn)))
        if not bn < best:
            break
        z, res, best = zn, rn, bn
    n = Q.shape[0]
    u = z[:n]
    info = _residuals(spec, u, A, c, idx)
    info["kkt_residual"] = best
    info["kkt_residual_scaled"] = float(np.max(np.abs(res.astype(float) * s)))
    info["objective"] = float(u @ Q @ u)
    return u, info


def solve_unscaled(spec: VariationalSpec) -> DiscreteFunction:
    """Minimize ``G1 + G2 + G3`` subject to interpolation and linear tails."""
    if spec.mode is not VariationalMode.UNSCALED_RELU:
        raise ValueError(f"solve_unscaled needs mode UNSCALED_RELU, got {spec.mode}")
    u, info = _solve_kkt(spec, with_boundary=True)
    f = DiscreteFunction.from_u(u, info)
    info.update(G1=eval_G1(f, spec.density, spec.grid), G2=eval_G2(f),
                G3=eval_G3(f, spec.density, spec.grid))
    return f


def solve_spline(spec: VariationalSpec) -> DiscreteFunction:
    """Minimize ``sum dt h''_i**2`` over all interior nodes with linear tails.

    This is the natural cubic spline through the data; the bias density is
    not used.
    """
    if spec.mode is not VariationalMode.SPLINE_G1_ONLY:
        raise ValueError(f"solve_spline needs mode SPLINE_G1_ONLY, got {spec.mode}")
    if spec.data.m < 2:
        raise SingularKKTError("a spline needs at least two data points")
    u, info = _solve_kkt(spec, with_boundary=False)
    return DiscreteFunction.from_u(u, info)


# ---------------------------------------------------------------------------
# Bregman objective
# ---------------------------------------------------------------------------


class _BregmanObjective:
    """``F(u) = sum_i dt p_i D_phi(h''_i / (2 p_i), 0)`` over the support."""

    def __init__(self, spec: VariationalSpec):
        grid, dens = spec.grid, spec.density
        self.D = _second_diff_matrix(grid)
        t = grid.t[1:-1]
        inside = np.abs(t) <= dens.B + 0.5 * grid.dt * _SNAP_REL
        self.rows = np.flatnonzero(inside)
        self.p = dens.pdf(np.clip(t[inside], -dens.B, dens.B))
        self.dt = grid.dt
        pot = spec.potential
        if isinstance(pot, SubquadraticPower):
            self._val, self._grad, self._hess = pot.value, pot.grad, pot.hess
        else:
            self._val = lambda x: phi_eval(pot, x)
            self._grad = lambda x: phi_grad(pot, x)
            self._hess = lambda x: phi_hess(pot, x)
        self.phi0 = float(self._val(np.zeros(1))[0])
        self.dphi0 = float(self._grad(np.zeros(1))[0])
        self.Dsub = self.D[self.rows]

    def z(self, u):
        return (self.Dsub @ u) / (2.0 * self.p)

    def value(self, u) -> float:
        z = self.z(u)
        D = self._val(z) - self.phi0 - self.dphi0 * z
        return float(np.sum(self.dt * self.p * D))

    def gradient(self, u) -> np.ndarray:
        z = self.z(u)
        g = 0.5 * self.dt * (self._grad(z) - self.dphi0)
        return self.Dsub.T @ g

    def hessian(self, u) -> np.ndarray:
        z = self.z(u)
        w = self.dt * self._hess(z) / (4.0 * self.p)
        return self.Dsub.T @ (w[:, None] * self.Dsub)


def _null_space(A: np.ndarray, c: np.ndarray):
    """Particular solution and orthonormal null-space basis of ``A u = c``."""
    k, n = A.shape
    Qf, R = np.linalg.qr(A.T, mode="complete")
    diag = np.abs(np.diag(R[:k, :k]))
    if diag.min() <= 1e-12 * diag.max():
        raise SingularKKTError("constraint matrix is rank deficient "
                               "(duplicate or conflicting data)")
    Y = Qf[:, :k]
    Z = Qf[:, k:]
    u0 = Y @ np.linalg.solve(R[:k, :k].T, c)
    return u0, Z


def solve_scaled(spec: VariationalSpec, tol: float = 1e-9,
                 max_iter: int = 100_000) -> DiscreteFunction:
    """Minimize the Bregman curvature objective over abs-network functions.

    Constraints (interpolation, linear tails, ``G2 = 0``, ``G3 = 0``) are
    eliminated with an orthonormal null-space basis; the reduced problem is
    solved by damped Newton with Armijo backtracking, falling back to a
    gradient step when the reduced Hessian is near-singular. Iteration stops
    once half the Newton decrement (an estimate of ``F - F*``) is at most
    ``tol * max(1, |F|)``; the raw gradient is not used because the
    second-difference operator puts its floating-point floor near ``dt**-2``. For
    :class:`SubquadraticPower` objectives the Hessian is evaluated with a
    floor on ``|z|`` (modified Newton) and the tolerance is relaxed to 1e-6.
    """
    if spec.mode is not VariationalMode.SCALED_ABS:
        raise ValueError(f"solve_scaled needs mode SCALED_ABS, got {spec.mode}")
    A, c, idx = _constraints(spec, abs_class=True)
    u0, Z = _null_space(A, c)
    obj = _BregmanObjective(spec)
    experimental = isinstance(spec.potential, SubquadraticPower)
    if experimental:
        tol = max(tol, 1e-6)

    # warm start: the quadratic-potential solution on the same constraint set
    Q = _quadratic_form(spec, with_boundary=False)
    Hq = Z.T @ Q @ Z
    v = -np.linalg.solve(Hq, Z.T @ (Q @ u0))

    F = obj.value(u0 + Z @ v)
    it = 0
    gnorm = math.inf
    gap = math.inf
    for it in range(1, max_iter + 1):
        u = u0 + Z @ v
        g = Z.T @ obj.gradient(u)
        gnorm = float(np.max(np.abs(g)))
        Hr = Z.T @ obj.hessian(u) @ Z
        try:
            step = -np.linalg.solve(Hr, g)
            if not np.all(np.isfinite(step)) or step @ g >= 0:
                raise np.linalg.LinAlgError
            # half the Newton decrement estimates F - F*
            gap = -0.5 * float(step @ g)
        except np.linalg.LinAlgError:
            step = -g
            gap = math.inf
        if gap <= tol * max(1.0, abs(F)) or gnorm == 0.0:
            if math.isfinite(gap):
                v = v + step
            break
        slope = float(step @ g)
        alpha = 1.0
        while True:
            Fn = obj.value(u0 + Z @ (v + alpha * step))
            if Fn <= F + 1e-4 * alpha * slope or alpha < 1e-14:
                break
            alpha *= 0.5
        if alpha < 1e-14:
            raise NonConvergenceError(
                f"line search failed at iteration {it}; estimated gap {gap:.3e}")
        v = v + alpha * step
        F = Fn
    else:
        raise NonConvergenceError(
            f"no convergence in {max_iter} iterations; estimated gap {gap:.3e}")
    u = u0 + Z @ v
    f = DiscreteFunction.from_u(u)
    info = _residuals(spec, u, A, c, idx)
    info.update(objective=obj.value(u), iterations=it, reduced_grad=gnorm,
                newton_gap=gap,
                G2=eval_G2(f), G3=eval_G3(f, spec.density, spec.grid),
                G1=eval_G1(f, spec.density, spec.grid))
    f.info = info
    return f


def solve(spec: VariationalSpec) -> DiscreteFunction:
    """Dispatch on ``spec.mode``."""
    return {VariationalMode.UNSCALED_RELU: solve_unscaled,
            VariationalMode.SCALED_ABS: solve_scaled,
            VariationalMode.SPLINE_G1_ONLY: solve_spline}[spec.mode](spec)
