"""
Kernel-regime diagnostics.

``kernel_matrix`` is the prediction-dynamics kernel
``H = n^-1 J diag(1 / Phi'') J^T``; ``analytic_kernel`` its infinite-width
limit (for the quadratic potential, up to the factor ``1/phi''(0)``) at
initialization. ``drift_report`` summarizes how far parameters and kernel move
during a training run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .densities import BiasDensity
from .linalg import jacobi_eigh, min_eigenvalue, spectral_norm_sym
from .mirror_flow import Trajectory
from .potentials import Potential, hessian_diag
from .shallow_net import Activation, Dataset, NetParams, jacobian

__all__ = ["KernelReport", "kernel_matrix", "analytic_kernel", "drift_report",
           "min_eigenvalue"]


def kernel_matrix(params: NetParams, pot: Potential, data: Dataset,
                  hdiag: np.ndarray | None = None) -> np.ndarray:
    """Empirical kernel ``(1/n) J diag(1/h) J^T`` at the current parameters.

    ``hdiag`` overrides the Hessian diagonal of ``pot`` (used for testing
    the preconditioner scaling).
    """
    J = jacobian(params, data)
    if hdiag is None:
        hdiag = hessian_diag(pot, params.theta, params.anchor, params.n)
    H = (J / hdiag[None, :]) @ J.T / params.n
    return 0.5 * (H + H.T)


def analytic_kernel(data: Dataset, density: BiasDensity,
                    activation: Activation = Activation.RELU,
                    nodes: int = 2001):
    """Limiting Gram matrix ``G_ij = E[sigma(W x_i - B) sigma(W x_j - B)]``.

    ``W`` is a fair sign and ``B`` has the given density; the expectation over
    ``B`` uses the composite trapezoid rule with ``nodes`` points on
    ``[-B, B]`` for each sign.

    Returns ``(G, lambda0)`` with ``lambda0`` the smallest eigenvalue of ``G``.
    """
    if data.dim != 1:
        raise ValueError("analytic kernel is only available for univariate inputs")
    if data.m == 0:
        raise ValueError("empty dataset")
    x = data.xs[:, 0]
    if np.unique(x).size != x.size:
        raise ValueError("training inputs must be distinct")
    if nodes < 2001:
        raise ValueError("use at least 2001 quadrature nodes")
    b = np.linspace(-density.B, density.B, nodes)
    wq = np.full(nodes, b[1] - b[0])
    wq[0] = wq[-1] = 0.5 * (b[1] - b[0])
    wq = wq * density.pdf(b)
    G = np.zeros((data.m, data.m))
    for w in (1.0, -1.0):
        Z = w * x[:, None] - b[None, :]
        S = np.maximum(Z, 0.0) if Activation(activation) is Activation.RELU else np.abs(Z)
        G += 0.5 * (S * wq[None, :]) @ S.T
    G = 0.5 * (G + G.T)
    return G, min_eigenvalue(G)


@dataclass
class KernelReport:
    H0: np.ndarray
    H_final: np.ndarray
    lambda_min_series: list = field(default_factory=list)
    param_drift_sup: float = 0.0
    kernel_drift_spectral: float = 0.0

    def to_dict(self) -> dict:
        return {"H0": self.H0.tolist(), "H_final": self.H_final.tolist(),
                "lambda_min_series": [[int(s), float(v)] for s, v in self.lambda_min_series],
                "param_drift_sup": self.param_drift_sup,
                "kernel_drift_spectral": self.kernel_drift_spectral}

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_lambda_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "lambda_min"])
            for s, v in self.lambda_min_series:
                w.writerow([s, f"{v:.17g}"])


def drift_report(traj: Trajectory, pot: Potential, data: Dataset) -> KernelReport:
    """Parameter drift, kernel drift and the ``lambda_min(H(t))`` series.

    Drift is measured from the anchor; the kernel drift is the spectral norm
    of ``H(final) - H(0)``.
    """
    if not traj.snapshots:
        raise ValueError("empty trajectory")
    series = []
    sup = 0.0
    H0 = kernel_matrix(traj.params(0).initial(), pot, data)
    Hk = H0
    for k, snap in enumerate(traj.snapshots):
        params = traj.params(k)
        Hk = kernel_matrix(params, pot, data)
        series.append((snap.step, min_eigenvalue(Hk)))
        sup = max(sup, float(np.max(np.abs(snap.theta - traj.anchor))))
    return KernelReport(H0=H0, H_final=Hk, lambda_min_series=series,
                        param_drift_sup=sup,
                        kernel_drift_spectral=spectral_norm_sym(Hk - H0))
