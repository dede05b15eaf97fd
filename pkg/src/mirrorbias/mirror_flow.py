"""
Discretized mirror flow for two-layer networks.

Two step rules are provided:

* ``PRECONDITIONED``: explicit Euler on the mirror flow,
  ``theta_k -= eta * g_k / Phi''_kk``.
* ``EXACT_MIRROR``: the mirror-descent update, solving
  ``phi'(s * (theta'_k - anchor_k)) = phi'(s * (theta_k - anchor_k)) - c * eta * g_k``
  with ``(s, c) = (1, 1)`` for unscaled and ``(n, n)`` for scaled potentials.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .potentials import (Potential, InverseGradError, _d2phi, _dphi, _inv_dphi,
                         hessian_diag, inverse_grad, phi_grad)
from .shallow_net import Dataset, NetParams, _loss_grad_into, loss, loss_grad, predict

__all__ = [
    "StepMode",
    "Scope",
    "TrainConfig",
    "Snapshot",
    "Trajectory",
    "TrainingDiverged",
    "md_step",
    "train",
    "default_eta0",
    "train_gd",
    "read_trajectory",
]


class StepMode(enum.Enum):
    PRECONDITIONED = "preconditioned"
    EXACT_MIRROR = "exact_mirror"


class Scope(enum.Enum):
    ALL_PARAMS = "all"
    OUTPUT_ONLY = "output_only"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Full-batch training settings; the step size is ``eta0 / n``.

    ``record_stride = 0`` records steps 0, 1, 2, 4, 8, ... plus the final
    step; a positive stride records every ``record_stride`` steps.
    """

    eta0: float = 1.0
    max_steps: int = 2_000_000
    loss_threshold: float = 1e-7
    step_mode: StepMode = StepMode.PRECONDITIONED
    scope: Scope = Scope.ALL_PARAMS
    record_stride: int = 0

    def __post_init__(self):
        self.step_mode = StepMode(self.step_mode)
        self.scope = Scope(self.scope)
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if not self.loss_threshold > 0:
            raise ValueError(f"loss_threshold must be > 0, got {self.loss_threshold}")
        if self.max_steps < 0 or self.record_stride < 0:
            raise ValueError("max_steps and record_stride must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["step_mode"] = self.step_mode.value
        d["scope"] = self.scope.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        extra = set(d) - {"eta0", "max_steps", "loss_threshold", "step_mode",
                          "scope", "record_stride"}
        if extra:
            raise ValueError(f"unexpected train fields {sorted(extra)}")
        return cls(**d)


def default_eta0(pot: Potential) -> float:
    """Step-size constant used by the reference experiments.

    ``eta = 1/n`` everywhere except the scaled quartic-plus-quadratic
    potential, which converges slowly and gets ``2/n``.
    """
    if pot.scaled and pot.kind.value == "pow" and pot.p >= 4.0:
        return 2.0
    return 1.0


@dataclass
class Snapshot:
    step: int
    theta: np.ndarray
    loss: float
    preds: np.ndarray


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    status: str = "BudgetExhausted"
    n: int = 0
    d: int = 1
    activation: str = "relu"
    anchor: np.ndarray | None = None

    @property
    def final(self) -> Snapshot:
        return self.snapshots[-1]

    @property
    def converged(self) -> bool:
        return self.status == "Converged"

    @property
    def steps(self) -> int:
        return self.final.step

    def params(self, k: int = -1) -> NetParams:
        from .shallow_net import Activation
        return NetParams(self.snapshots[k].theta, self.anchor, self.n, self.d,
                         Activation(self.activation))

    def write_csv(self, path) -> None:
        """One row per recorded step: ``step, loss, theta_0, ..., theta_{p-1}``."""
        p = self.anchor.size
        with open(path, "w") as fh:
            fh.write(",".join(["step", "loss"] + [f"theta_{k}" for k in range(p)]) + "\n")
            for s in self.snapshots:
                row = [str(s.step), f"{s.loss:.17g}"] + [f"{v:.17g}" for v in s.theta]
                fh.write(",".join(row) + "\n")

    def write_meta(self, path, **extra) -> None:
        meta = {"status": self.status, "n": self.n, "d": self.d,
                "activation": self.activation, "steps": self.steps,
                "final_loss": self.final.loss,
                "recorded_steps": [s.step for s in self.snapshots]}
        meta.update(extra)
        with open(path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------


def md_step(params: NetParams, pot: Potential, grad, eta: float,
            mode: StepMode = StepMode.PRECONDITIONED, mask=None) -> NetParams:
    """One mirror-descent step from ``params`` along ``grad``.

    ``mask`` (boolean, optional) restricts the update to selected coordinates.
    """
    grad = np.asarray(grad, dtype=float)
    theta = params.theta
    mode = StepMode(mode)
    if mode is StepMode.PRECONDITIONED:
        H = hessian_diag(pot, theta, params.anchor, params.n)
        new = theta - eta * grad / H
    else:
        s = float(params.n) if pot.scaled else 1.0
        dual = phi_grad(pot, s * (theta - params.anchor)) - s * eta * grad
        new = params.anchor + inverse_grad(pot, dual) / s
    if mask is not None:
        new = np.where(mask, new, theta)
    return params.with_theta(new)


# ---------------------------------------------------------------------------
# compiled training loop
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _advance(theta, anchor, n, d, X, y, act, kind, p, omega, beta, c, s, eta,
             exact, lo, hi, k0, k1, threshold, f, grad, S, DS):
    """Run from step ``k0`` towards ``k1``; the loss is checked at every step.

    Only coordinates ``lo <= q < hi`` move. Returns ``(k, loss, status)`` with
    status 0 = reached ``k1`` (not updated there), 1 = converged at ``k``,
    2 = non-finite loss at ``k``, 3 = mirror-map inversion failed at ``k``.
    """
    k = k0
    while True:
        L = _loss_grad_into(theta, n, d, X, y, act, f, grad, S, DS)
        if not math.isfinite(L):
            return k, L, 2
        if L <= threshold:
            return k, L, 1
        if k >= k1:
            return k, L, 0
        if exact:
            for q in range(lo, hi):
                dual = _dphi(kind, p, omega, beta, c, s * (theta[q] - anchor[q])) - s * eta * grad[q]
                x, ok = _inv_dphi(kind, p, omega, beta, c, dual)
                if not ok:
                    return k, L, 3
                theta[q] = anchor[q] + x / s
        else:
            for q in range(lo, hi):
                theta[q] = theta[q] - eta * grad[q] / _d2phi(kind, p, omega, beta, c, s * (theta[q] - anchor[q]))
        k += 1


def _record_steps(cfg: TrainConfig):
    if cfg.record_stride > 0:
        k = 0
        while True:
            yield k
            k += cfg.record_stride
    else:
        yield 0
        k = 1
        while True:
            yield k
            k *= 2


def train(params: NetParams, data: Dataset, pot: Potential,
          cfg: TrainConfig | None = None) -> Trajectory:
    """Full-batch mirror descent until ``loss <= cfg.loss_threshold``.

    The step size is ``cfg.eta0 / n``. With ``Scope.OUTPUT_ONLY`` only the
    output weights move.
    """
    cfg = cfg or TrainConfig()
    n = params.n
    eta = cfg.eta0 / n
    theta = params.theta.copy()
    anchor = np.ascontiguousarray(params.anchor)
    X, y = data.xs, data.ys
    if X.shape[1] != params.d:
        raise ValueError("dataset dimension does not match the network")
    if cfg.scope is Scope.OUTPUT_ONLY:
        sl = params.blocks()["a"]
        lo, hi = sl.start, sl.stop
    else:
        lo, hi = 0, theta.size
    s = float(n) if pot.scaled else 1.0
    exact = cfg.step_mode is StepMode.EXACT_MIRROR
    f = np.empty(data.m)
    grad = np.empty(theta.size)
    S = np.empty((data.m, n))
    DS = np.empty_like(S)
    traj = Trajectory(n=n, d=params.d, activation=params.activation.value,
                      anchor=params.anchor.copy())

    marks = _record_steps(cfg)
    target = next(marks)
    k = 0
    while True:
        stop = min(target, cfg.max_steps)
        k, L, status = _advance(theta, anchor, n, params.d, X, y, params.activation.code,
                                *pot.codes, s, eta, exact, lo, hi, k, stop,
                                cfg.loss_threshold, f, grad, S, DS)
        if status == 2:
            raise TrainingDiverged(f"non-finite loss at step {k} ({pot}, n={n})")
        if status == 3:
            raise InverseGradError(f"mirror map inversion failed at step {k} ({pot}, n={n})")
        traj.snapshots.append(Snapshot(k, theta.copy(), float(L), f.copy()))
        if status == 1:
            traj.status = "Converged"
            break
        if k >= cfg.max_steps:
            traj.status = "BudgetExhausted"
            break
        while target <= k:
            target = next(marks)
    return traj


def train_gd(params: NetParams, data: Dataset, lr: float, max_steps: int,
             loss_threshold: float = 1e-7, record_stride: int = 1) -> Trajectory:
    """Plain full-batch gradient descent ``theta -= lr * grad``.

    A reference implementation in numpy, independent of the compiled loop,
    with the same stopping rule as :func:`train`. Every ``record_stride``-th
    step and the last step are recorded.
    """
    theta = params.theta.copy()
    traj = Trajectory(n=params.n, d=params.d, activation=params.activation.value,
                      anchor=params.anchor.copy())
    cur = params.with_theta(theta)
    for k in range(max_steps + 1):
        L = loss(cur, data)
        last = L <= loss_threshold or k == max_steps
        if k % record_stride == 0 or last:
            traj.snapshots.append(Snapshot(k, cur.theta.copy(), L, predict(cur, data.xs)))
        if L <= loss_threshold:
            traj.status = "Converged"
            break
        if last:
            break
        cur = cur.with_theta(cur.theta - lr * loss_grad(cur, data))
    return traj


def read_trajectory(path, n: int, d: int = 1, activation: str = "relu") -> Trajectory:
    """Load a trajectory written by :meth:`Trajectory.write_csv`.

    The first row must be step 0, which supplies the anchor.
    """
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[0] == 0 or rows[0, 0] != 0:
        raise ValueError(f"{path}: trajectory must start at step 0")
    anchor = rows[0, 2:].copy()
    snaps = [Snapshot(int(r[0]), r[2:].copy(), float(r[1]), np.empty(0)) for r in rows]
    return Trajectory(snapshots=snaps, n=n, d=d, activation=activation, anchor=anchor)
