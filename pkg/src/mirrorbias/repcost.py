"""
Infinite-width networks and their minimal representation cost.

An infinite-width univariate network is described by a coefficient function
``alpha(w, b)`` on ``{-1, +1} x [-B, B]`` and evaluates to

    g(x) = 1/2 * int [alpha(1, b) s(x - b) + alpha(-1, b) s(-x - b)] p(b) db.

Coefficient functions are stored as two slices on a symmetric ``b`` grid. The
grid is built from one half and its mirror image, so reflecting ``b -> -b`` is
an exact index reversal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .densities import BiasDensity
from .potentials import Potential, bregman
from .shallow_net import Activation
from .variational import (_SNAP_REL, DiscreteFunction, Grid, _g3_row, second_diff)

__all__ = [
    "OutputWeightFunction",
    "InfeasibleFunctionError",
    "b_grid",
    "decompose_even_odd",
    "repcost_quadratic",
    "repcost_abs",
    "eval_infinite_network",
    "cost_quadratic",
    "cost_bregman",
    "trapezoid_weights",
]

PARITY_TOL = 1e-12


class InfeasibleFunctionError(ValueError):
    pass


def b_grid(B: float, nodes: int = 2001) -> np.ndarray:
    """Symmetric grid on ``[-B, B]`` with ``b[::-1] == -b`` exactly."""
    if nodes < 3 or nodes % 2 == 0:
        raise ValueError(f"need an odd number of nodes >= 3, got {nodes}")
    half = np.linspace(0.0, B, (nodes + 1) // 2)
    return np.concatenate([-half[:0:-1], half])


def trapezoid_weights(b: np.ndarray) -> np.ndarray:
    w = np.empty_like(b)
    db = np.diff(b)
    w[0] = 0.5 * db[0]
    w[-1] = 0.5 * db[-1]
    w[1:-1] = 0.5 * (db[:-1] + db[1:])
    return w


@dataclass
class OutputWeightFunction:
    """``alpha_pos[j] = alpha(+1, b[j])`` and ``alpha_neg[j] = alpha(-1, b[j])``."""

    b: np.ndarray
    alpha_pos: np.ndarray
    alpha_neg: np.ndarray

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.alpha_pos = np.asarray(self.alpha_pos, dtype=float)
        self.alpha_neg = np.asarray(self.alpha_neg, dtype=float)
        if not (self.b.shape == self.alpha_pos.shape == self.alpha_neg.shape):
            raise ValueError("b, alpha_pos and alpha_neg must have equal length")
        if not np.array_equal(self.b[::-1], -self.b):
            raise ValueError("b grid must be symmetric about 0")
        if not (np.all(np.isfinite(self.alpha_pos)) and np.all(np.isfinite(self.alpha_neg))):
            raise ValueError("non-finite coefficients")

    @classmethod
    def zeros(cls, B: float = 1.0, nodes: int = 2001) -> "OutputWeightFunction":
        b = b_grid(B, nodes)
        return cls(b, np.zeros_like(b), np.zeros_like(b))

    @classmethod
    def from_callable(cls, fn, B: float = 1.0, nodes: int = 2001):
        """Sample ``fn(w, b)`` for ``w = +1`` and ``w = -1``."""
        b = b_grid(B, nodes)
        return cls(b, np.broadcast_to(fn(1.0, b), b.shape).astype(float),
                   np.broadcast_to(fn(-1.0, b), b.shape).astype(float))

    @property
    def B(self) -> float:
        return float(self.b[-1])

    def parity_defect(self, sign: int = 1) -> float:
        """``max |alpha(1, b) - sign * alpha(-1, -b)|``; 0 for even (+1) or odd (-1)."""
        return float(np.max(np.abs(self.alpha_pos - sign * self.alpha_neg[::-1])))

    def is_even(self, tol: float = PARITY_TOL) -> bool:
        return self.parity_defect(1) <= tol

    def is_odd(self, tol: float = PARITY_TOL) -> bool:
        return self.parity_defect(-1) <= tol

    def __add__(self, other: "OutputWeightFunction") -> "OutputWeightFunction":
        if not np.array_equal(self.b, other.b):
            raise ValueError("grids differ")
        return OutputWeightFunction(self.b, self.alpha_pos + other.alpha_pos,
                                    self.alpha_neg + other.alpha_neg)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b", "alpha_pos", "alpha_neg"])
            for row in zip(self.b, self.alpha_pos, self.alpha_neg):
                w.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def read_csv(cls, path) -> "OutputWeightFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def decompose_even_odd(alpha: OutputWeightFunction):
    """Split ``alpha`` into parts even and odd under ``(w, b) -> (-w, -b)``."""
    pos, neg = alpha.alpha_pos, alpha.alpha_neg
    refl_neg = neg[::-1]
    refl_pos = pos[::-1]
    even = OutputWeightFunction(alpha.b, 0.5 * (pos + refl_neg), 0.5 * (neg + refl_pos))
    odd = OutputWeightFunction(alpha.b, 0.5 * (pos - refl_neg), 0.5 * (neg - refl_pos))
    return even, odd


def _curvature_on_b(h: DiscreteFunction, grid: Grid, b: np.ndarray) -> np.ndarray:
    """Node-wise ``h''`` carried over to the coefficient grid ``b``.

    The discrete function has curvature mass ``dt * h''_i`` at each node. A
    node on the support edge ``+-B`` holds a whole cell of mass, while the
    linear interpolant of ``h''`` gives it only half a cell. The missing half
    is added as a linear ramp that ends at the edge and whose kink falls on a
    ``b`` node, so the trapezoid rule integrates it exactly.
    """
    t = grid.t[1:-1]
    h2 = second_diff(h, grid)
    out = np.interp(b, t, h2)
    B, db = b[-1], b[1] - b[0]
    J = min(int(np.ceil(grid.dt / db - 1e-9)), b.size - 1)
    ramp = np.linspace(0.0, 1.0, J + 1)
    for sign, sl in ((1.0, slice(b.size - J - 1, None)), (-1.0, slice(0, J + 1))):
        edge = np.flatnonzero(np.abs(t - sign * B) <= 0.5 * grid.dt * _SNAP_REL)
        if edge.size == 0:
            continue
        v = grid.dt * h2[edge[0]] / (J * db)
        out[sl] += v * (ramp if sign > 0 else ramp[::-1])
    return out


def _density_on(density: BiasDensity, b: np.ndarray) -> np.ndarray:
    p = density.pdf(b)
    if np.any(p <= 0.0):
        raise ValueError("density vanishes inside [-B, B]; coefficient is undefined")
    return p


def _support_sum(h: DiscreteFunction, grid: Grid, density: BiasDensity, values) -> float:
    """``sum dt * values_i`` over interior nodes in ``[-B, B]``."""
    t = grid.t[1:-1]
    inside = np.abs(t) <= density.B + 0.5e-6 * grid.dt
    return float(grid.dt * np.sum(values[inside]))


def repcost_quadratic(h: DiscreteFunction, grid: Grid, density: BiasDensity,
                      nodes: int = 2001) -> OutputWeightFunction:
    """Minimal quadratic-cost coefficients of a ReLU network realizing ``h``.

    Even part ``h''(b) / p(b)``; odd part ``C_h b / E[B**2] + S_h`` with
    ``S_h = h'(+inf) + h'(-inf)`` and ``C_h = int h''(b) |b| db - 2 h(0)``.
    """
    b = b_grid(density.B, nodes)
    p = _density_on(density, b)
    h2 = second_diff(h, grid)
    S = h.slope_pos + h.slope_neg
    C = _support_sum(h, grid, density, h2 * np.abs(grid.t[1:-1])) - 2.0 * h.h[grid.nearest(0.0, "origin")]
    even = _curvature_on_b(h, grid, b) / p
    odd = C / density.second_moment() * b + S
    # alpha(-1, b) = alpha+(1, -b) - alpha-(1, -b)
    return OutputWeightFunction(b, even + odd, even[::-1] - odd[::-1])


def repcost_abs(h: DiscreteFunction, grid: Grid, density: BiasDensity,
                nodes: int = 2001, tol: float = 1e-6) -> OutputWeightFunction:
    """Coefficients ``h''(b) / (2 p(b))`` of an absolute-value network realizing ``h``.

    Only functions with zero slope sum and zero boundary term are
    representable; other inputs raise :class:`InfeasibleFunctionError`.
    The result does not depend on the potential.
    """
    slope_sum = abs(h.slope_pos + h.slope_neg)
    boundary = abs(float(_g3_row(density, grid) @ h.u)) / np.sqrt(density.second_moment())
    if slope_sum > tol or boundary > tol:
        raise InfeasibleFunctionError(
            f"function is not realizable by an abs network: |h'(+inf) + h'(-inf)| = "
            f"{slope_sum:.3e}, boundary residual {boundary:.3e}")
    b = b_grid(density.B, nodes)
    p = _density_on(density, b)
    pos = _curvature_on_b(h, grid, b) / (2.0 * p)
    return OutputWeightFunction(b, pos, pos[::-1].copy())


def _sigma(z, activation):
    if activation == "linear":
        return z
    if Activation(activation) is Activation.RELU:
        return np.maximum(z, 0.0)
    return np.abs(z)


def eval_infinite_network(alpha: OutputWeightFunction, density: BiasDensity,
                          activation="relu", x=0.0):
    """Evaluate ``g(x)`` by the trapezoid rule on the coefficient grid.

    ``activation`` is ``"relu"``, ``"abs"`` or ``"linear"`` (identity, used
    to evaluate the affine part of odd coefficients).
    """
    if activation != "linear":
        activation = Activation(activation).value
    x = np.asarray(x, dtype=float)
    b = alpha.b
    wq = 0.5 * trapezoid_weights(b) * density.pdf(b)
    xs = np.atleast_1d(x).ravel()
    out = (_sigma(xs[:, None] - b[None, :], activation) @ (wq * alpha.alpha_pos)
           + _sigma(-xs[:, None] - b[None, :], activation) @ (wq * alpha.alpha_neg))
    return float(out[0]) if x.ndim == 0 else out.reshape(x.shape)


def _integrate(values_pos, values_neg, alpha, density) -> float:
    wq = 0.5 * trapezoid_weights(alpha.b) * density.pdf(alpha.b)
    return float(wq @ values_pos + wq @ values_neg)


def cost_quadratic(alpha: OutputWeightFunction, density: BiasDensity) -> float:
    """``int alpha(w, b)**2 dmu`` with ``w`` a fair sign."""
    return _integrate(alpha.alpha_pos ** 2, alpha.alpha_neg ** 2, alpha, density)


def cost_bregman(alpha: OutputWeightFunction, density: BiasDensity, pot: Potential) -> float:
    """``int D_phi(alpha(w, b), 0) dmu``."""
    return _integrate(bregman(pot, alpha.alpha_pos, 0.0), bregman(pot, alpha.alpha_neg, 0.0),
                      alpha, density)
