"""
Two-layer networks ``f(x) = sum_k a_k sigma(w_k . x - b_k) + d``.

Parameters live in one flat vector ordered ``(W row-major, b, a, d)``; every
other module (Hessian diagonals, Jacobians, trajectory dumps) relies on this
ordering.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numba
import numpy as np

from .densities import BiasDensity

__all__ = [
    "Activation",
    "Dataset",
    "InitSpec",
    "NetParams",
    "init_params",
    "forward",
    "predict",
    "jacobian",
    "loss",
    "loss_grad",
    "write_params_csv",
    "read_params_csv",
]

RELU = 0
ABS = 1


class Activation(enum.Enum):
    RELU = "relu"
    ABS = "abs"

    @property
    def code(self) -> int:
        return RELU if self is Activation.RELU else ABS


@dataclass(frozen=True)
class Dataset:
    """Training points ``xs`` (shape ``(m, d)``) and labels ``ys``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape[0] != ys.shape[0]:
            raise ValueError(f"{xs.shape[0]} inputs but {ys.shape[0]} labels")
        if xs.shape[0] == 0:
            raise ValueError("empty dataset")
        if np.unique(xs, axis=0).shape[0] != xs.shape[0]:
            raise ValueError("training inputs must be distinct")
        object.__setattr__(self, "xs", np.ascontiguousarray(xs))
        object.__setattr__(self, "ys", np.ascontiguousarray(ys))

    @property
    def m(self) -> int:
        return self.xs.shape[0]

    @property
    def dim(self) -> int:
        return self.xs.shape[1]


@dataclass(frozen=True)
class InitSpec:
    """Initialization distribution.

    Output weights are ``a_scale * N(0, 1) / sqrt(n)``; ``a_scale = 0`` gives
    zero output weights.
    """

    bias_density: BiasDensity = field(default_factory=BiasDensity.uniform)
    a_scale: float = 0.0
    d_init: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {"bias_density": self.bias_density.to_dict(), "a_scale": self.a_scale,
                "d_init": self.d_init, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "InitSpec":
        extra = set(d) - {"bias_density", "a_scale", "d_init", "seed"}
        if extra:
            raise ValueError(f"unexpected init fields {sorted(extra)}")
        return cls(BiasDensity.from_dict(d.get("bias_density", {})),
                   float(d.get("a_scale", 0.0)), float(d.get("d_init", 0.0)),
                   int(d.get("seed", 0)))


class NetParams:
    """Current parameters ``theta`` plus the frozen initialization anchor."""

    def __init__(self, theta, anchor, n: int, d: int, activation: Activation):
        theta = np.array(theta, dtype=float)
        anchor = np.array(anchor, dtype=float)
        p = n * (d + 2) + 1
        if theta.shape != (p,) or anchor.shape != (p,):
            raise ValueError(f"expected {p} parameters for n={n}, d={d}")
        anchor.flags.writeable = False
        self.theta = theta
        self.anchor = anchor
        self.n = int(n)
        self.d = int(d)
        self.activation = Activation(activation)

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def W(self) -> np.ndarray:
        return self.theta[: self.n * self.d].reshape(self.n, self.d)

    @property
    def b(self) -> np.ndarray:
        o = self.n * self.d
        return self.theta[o: o + self.n]

    @property
    def a(self) -> np.ndarray:
        o = self.n * self.d + self.n
        return self.theta[o: o + self.n]

    @property
    def d_out(self) -> float:
        return float(self.theta[-1])

    def blocks(self) -> dict:
        """Index slices of the W, b, a and d blocks."""
        nd, n = self.n * self.d, self.n
        return {"W": slice(0, nd), "b": slice(nd, nd + n),
                "a": slice(nd + n, nd + 2 * n), "d": slice(nd + 2 * n, nd + 2 * n + 1)}

    def with_theta(self, theta) -> "NetParams":
        return NetParams(theta, self.anchor, self.n, self.d, self.activation)

    def initial(self) -> "NetParams":
        return NetParams(self.anchor, self.anchor, self.n, self.d, self.activation)

    def copy(self) -> "NetParams":
        return self.with_theta(self.theta.copy())

    @classmethod
    def from_blocks(cls, W, b, a, d_out, activation=Activation.RELU) -> "NetParams":
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if W.shape[0] != np.size(b):
            W = W.T
        n, d = W.shape
        theta = np.concatenate([W.ravel(), np.ravel(b), np.ravel(a), [float(d_out)]])
        return cls(theta, theta, n, d, activation)


def init_params(n: int, d: int, spec: InitSpec,
                activation: Activation = Activation.RELU) -> NetParams:
    """Draw an initial network; deterministic in ``spec.seed``.

    Input weights are uniform on the unit sphere (a fair sign when ``d = 1``).
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    if d == 1:
        W = (2.0 * rng.integers(0, 2, size=n) - 1.0)[:, None]
    else:
        G = rng.standard_normal((n, d))
        W = G / np.linalg.norm(G, axis=1, keepdims=True)
    b = spec.bias_density.sample(rng, n)
    if spec.a_scale == 0.0:
        a = np.zeros(n)
    else:
        a = spec.a_scale * rng.standard_normal(n) / np.sqrt(n)
    theta = np.concatenate([W.ravel(), b, a, [spec.d_init]])
    return NetParams(theta, theta.copy(), n, d, activation)


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _predict_into(theta, n, d, X, act, out):
    ob = n * d
    oa = ob + n
    od = oa + n
    for i in range(X.shape[0]):
        acc = 0.0
        for k in range(n):
            z = -theta[ob + k]
            for j in range(d):
                z += theta[k * d + j] * X[i, j]
            if act == RELU:
                s = z if z > 0.0 else 0.0
            else:
                s = abs(z)
            acc += theta[oa + k] * s
        out[i] = acc + theta[od]


@numba.njit(cache=True)
def _loss_grad_into(theta, n, d, X, y, act, f, grad, S, DS):
    """Fill predictions ``f`` and ``grad = J^T r / m``; return the loss.

    ``S`` and ``DS`` are ``(m, n)`` work arrays for the activations and their
    derivatives.
    """
    m = X.shape[0]
    ob = n * d
    oa = ob + n
    od = oa + n
    for i in range(m):
        acc = 0.0
        for k in range(n):
            if d == 1:
                z = theta[k] * X[i, 0] - theta[ob + k]
            else:
                z = -theta[ob + k]
                for j in range(d):
                    z += theta[k * d + j] * X[i, j]
            if act == RELU:
                if z > 0.0:
                    s = z
                    ds = 1.0
                else:
                    s = 0.0
                    ds = 0.0
            else:
                s = abs(z)
                ds = 1.0 if z > 0.0 else (-1.0 if z < 0.0 else 0.0)
            S[i, k] = s
            DS[i, k] = ds
            acc += theta[oa + k] * s
        f[i] = acc + theta[od]
    for q in range(grad.size):
        grad[q] = 0.0
    total = 0.0
    for i in range(m):
        r = f[i] - y[i]
        total += r * r
        ri = r / m
        for k in range(n):
            g = theta[oa + k] * DS[i, k] * ri
            if d == 1:
                grad[k] += g * X[i, 0]
            else:
                for j in range(d):
                    grad[k * d + j] += g * X[i, j]
            grad[ob + k] -= g
            grad[oa + k] += S[i, k] * ri
        grad[od] += ri
    return total / (2.0 * m)


def _xs(params: NetParams, x) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None] if params.d == 1 else X[None, :]
    if X.shape[1] != params.d:
        raise ValueError(f"input dimension {X.shape[1]} != network dimension {params.d}")
    return np.ascontiguousarray(X)


def predict(params: NetParams, x) -> np.ndarray:
    """Network outputs at a batch of points (shape ``(k,)`` or ``(k, d)``)."""
    X = _xs(params, x)
    out = np.empty(X.shape[0])
    _predict_into(params.theta, params.n, params.d, X, params.activation.code, out)
    return out


def forward(params: NetParams, x) -> float:
    """Network output at a single point."""
    X = _xs(params, x)
    if X.shape[0] != 1:
        raise ValueError("forward takes one point; use predict for batches")
    return float(predict(params, X)[0])


def _act(params: NetParams, Z):
    if params.activation is Activation.RELU:
        return np.maximum(Z, 0.0), (Z > 0).astype(float)
    return np.abs(Z), np.sign(Z)


def jacobian(params: NetParams, data: Dataset) -> np.ndarray:
    """Rows are ``grad_theta f(x_i)`` in the ``(W, b, a, d)`` ordering.

    The activation derivative at 0 is taken as 0.
    """
    X = data.xs
    n, d, m = params.n, params.d, data.m
    Z = X @ params.W.T - params.b[None, :]
    S, dS = _act(params, Z)
    coef = dS * params.a[None, :]
    J = np.empty((m, params.size))
    J[:, : n * d] = (coef[:, :, None] * X[:, None, :]).reshape(m, n * d)
    J[:, n * d: n * d + n] = -coef
    J[:, n * d + n: n * d + 2 * n] = S
    J[:, -1] = 1.0
    return J


def loss(params: NetParams, data: Dataset) -> float:
    """Mean squared error ``(1/2m) sum (f(x_i) - y_i)**2``."""
    r = predict(params, data.xs) - data.ys
    return float(r @ r / (2.0 * data.m))


def loss_grad(params: NetParams, data: Dataset) -> np.ndarray:
    """Gradient of :func:`loss`, ``J^T r / m``; same kernel the trainer uses."""
    f = np.empty(data.m)
    g = np.empty(params.size)
    S = np.empty((data.m, params.n))
    _loss_grad_into(params.theta, params.n, params.d, data.xs, data.ys,
                    params.activation.code, f, g, S, np.empty_like(S))
    return g


def _block_names(params: NetParams):
    names = []
    for name, sl in params.blocks().items():
        names.extend([name] * (sl.stop - sl.start))
    return names


def write_params_csv(params: NetParams, path, which: str = "theta") -> None:
    """One row per coordinate: ``index, block, value`` (17 significant digits)."""
    vec = params.theta if which == "theta" else params.anchor
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "block", "value"])
        for k, (name, v) in enumerate(zip(_block_names(params), vec)):
            w.writerow([k, name, f"{v:.17g}"])


def read_params_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["value"]) for r in rows])
