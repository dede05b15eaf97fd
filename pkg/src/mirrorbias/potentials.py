"""
Separable convex potentials for mirror descent.

A potential is a univariate strictly convex function ``phi`` together with a
deployment mode. In unscaled mode the network potential is
``Phi(theta) = sum_k phi(theta_k - anchor_k)``; in scaled mode it is
``Phi(theta) = n**-2 * sum_k phi(n * (theta_k - anchor_k))``.

The scalar kernels below are compiled with numba so that the training loop in
:mod:`mirrorbias.mirror_flow` evaluates exactly the same arithmetic as the
public functions of this module.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "Kind",
    "Mode",
    "Potential",
    "InverseGradError",
    "phi_eval",
    "phi_grad",
    "phi_hess",
    "bregman",
    "inverse_grad",
    "hessian_diag",
    "parse_potential",
]

QUADRATIC = 0
POWER = 1
HYPENTROPY = 2

_MAX_DOUBLINGS = 200


class Kind(enum.Enum):
    QUADRATIC = "quadratic"
    POWER = "pow"
    HYPENTROPY = "hypentropy"


class Mode(enum.Enum):
    UNSCALED = "unscaled"
    SCALED = "scaled"


class InverseGradError(RuntimeError):
    """Raised when the mirror map cannot be inverted."""


# ---------------------------------------------------------------------------
# compiled scalar kernels; ``c`` is the overall constant factor of phi
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _phi(kind, p, omega, beta, c, x):
    if kind == QUADRATIC:
        return c * x * x
    if kind == POWER:
        if p == 3.0:
            return c * (abs(x) * x * x + omega * x * x)
        if p == 4.0:
            return c * (x * x * x * x + omega * x * x)
        return c * (abs(x) ** p + omega * x * x)
    return c * (x * math.asinh(x / beta) - math.sqrt(x * x + beta * beta))


@numba.njit(cache=True)
def _dphi(kind, p, omega, beta, c, x):
    if kind == QUADRATIC:
        return c * 2.0 * x
    if kind == POWER:
        if p == 3.0:
            return c * (3.0 * x * abs(x) + 2.0 * omega * x)
        if p == 4.0:
            return c * (4.0 * x * x * x + 2.0 * omega * x)
        ax = abs(x)
        s = 1.0 if x > 0 else (-1.0 if x < 0 else 0.0)
        return c * (p * ax ** (p - 1.0) * s + 2.0 * omega * x)
    return c * math.asinh(x / beta)


@numba.njit(cache=True)
def _d2phi(kind, p, omega, beta, c, x):
    if kind == QUADRATIC:
        return c * 2.0
    if kind == POWER:
        if p == 2.0:
            return c * (2.0 + 2.0 * omega)
        if p == 3.0:
            return c * (6.0 * abs(x) + 2.0 * omega)
        if p == 4.0:
            return c * (12.0 * x * x + 2.0 * omega)
        return c * (p * (p - 1.0) * abs(x) ** (p - 2.0) + 2.0 * omega)
    return c / math.sqrt(x * x + beta * beta)


@numba.njit(cache=True)
def _inv_dphi(kind, p, omega, beta, c, y):
    """Solve phi'(x) = y. Returns (x, ok)."""
    if kind == QUADRATIC:
        return y / (2.0 * c), True
    if kind == HYPENTROPY:
        return beta * math.sinh(y / c), True
    tol = 1e-12 * max(1.0, abs(y))
    if y == 0.0:
        return 0.0, True
    # phi' is odd for the power family; bracket on the sign of y
    lo = 0.0
    hi = 1.0 if y > 0 else -1.0
    k = 0
    while (_dphi(kind, p, omega, beta, c, hi) - y) * (1.0 if y > 0 else -1.0) < 0.0:
        lo = hi
        hi *= 2.0
        k += 1
        if k > _MAX_DOUBLINGS:
            return hi, False
    if hi < lo:
        lo, hi = hi, lo
    # a few bisection halvings to land in Newton's basin
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if _dphi(kind, p, omega, beta, c, mid) < y:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(100):
        r = _dphi(kind, p, omega, beta, c, x) - y
        if abs(r) <= tol:
            return x, True
        if r < 0:
            lo = x
        else:
            hi = x
        h = _d2phi(kind, p, omega, beta, c, x)
        xn = x - r / h
        if not (lo < xn < hi):
            xn = 0.5 * (lo + hi)
        x = xn
    r = _dphi(kind, p, omega, beta, c, x) - y
    return x, abs(r) <= tol


@numba.njit(cache=True)
def _hess_diag_into(kind, p, omega, beta, c, theta, anchor, s, out):
    for k in range(theta.size):
        out[k] = _d2phi(kind, p, omega, beta, c, s * (theta[k] - anchor[k]))


@numba.njit(cache=True)
def _map_scalar(which, kind, p, omega, beta, c, xs, out):
    for k in range(xs.size):
        if which == 0:
            out[k] = _phi(kind, p, omega, beta, c, xs[k])
        elif which == 1:
            out[k] = _dphi(kind, p, omega, beta, c, xs[k])
        else:
            out[k] = _d2phi(kind, p, omega, beta, c, xs[k])


@dataclass(frozen=True)
class Potential:
    """A univariate convex potential and its deployment mode.

    Parameters
    ----------
    kind : Kind
        ``QUADRATIC`` is ``x**2``; ``POWER`` is ``|x|**p + omega * x**2``;
        ``HYPENTROPY`` is ``x * asinh(x / beta) - sqrt(x**2 + beta**2)``.
    mode : Mode
        Unscaled or width-scaled deployment.
    normalized : bool
        Divide the power family by ``1 + omega``. The reference experiments
        use the un-normalized form; normalizing only rescales phi by a
        constant and leaves every Bregman minimizer unchanged.
    """

    kind: Kind = Kind.QUADRATIC
    mode: Mode = Mode.UNSCALED
    p: float = 2.0
    omega: float = 0.0
    beta: float = 1.0
    normalized: bool = False

    def __post_init__(self):
        if self.kind is Kind.POWER:
            if not (self.p >= 2.0):
                raise ValueError(f"power potential needs p >= 2, got p={self.p}")
            if not (self.omega >= 0.0):
                raise ValueError(f"omega must be >= 0, got {self.omega}")
        if self.kind is Kind.HYPENTROPY and not (self.beta > 0.0):
            raise ValueError(f"hypentropy needs beta > 0, got {self.beta}")

    # constructors -----------------------------------------------------------
    @classmethod
    def quadratic(cls, scaled: bool = False) -> "Potential":
        return cls(Kind.QUADRATIC, Mode.SCALED if scaled else Mode.UNSCALED)

    @classmethod
    def power(cls, p: float, omega: float = 1.0, scaled: bool = False,
              normalized: bool = False) -> "Potential":
        return cls(Kind.POWER, Mode.SCALED if scaled else Mode.UNSCALED,
                   p=float(p), omega=float(omega), normalized=normalized)

    @classmethod
    def hypentropy(cls, beta: float, scaled: bool = False) -> "Potential":
        return cls(Kind.HYPENTROPY, Mode.SCALED if scaled else Mode.UNSCALED,
                   beta=float(beta))

    @property
    def scaled(self) -> bool:
        return self.mode is Mode.SCALED

    @property
    def codes(self):
        """Argument tuple ``(kind, p, omega, beta, c)`` for compiled kernels."""
        kind = {Kind.QUADRATIC: QUADRATIC, Kind.POWER: POWER,
                Kind.HYPENTROPY: HYPENTROPY}[self.kind]
        c = 1.0 / (1.0 + self.omega) if (self.normalized and self.kind is Kind.POWER) else 1.0
        return kind, float(self.p), float(self.omega), float(self.beta), c

    def __str__(self) -> str:
        prefix = "scaled:" if self.scaled else ""
        if self.kind is Kind.QUADRATIC:
            body = "quadratic"
        elif self.kind is Kind.POWER:
            body = f"pow:p={self.p:.17g},omega={self.omega:.17g}"
            if self.normalized:
                body += ",normalized=1"
        else:
            body = f"hypentropy:beta={self.beta:.17g}"
        return prefix + body

    # convenience methods ----------------------------------------------------
    def __call__(self, x):
        return phi_eval(self, x)

    def grad(self, x):
        return phi_grad(self, x)

    def hess(self, x):
        return phi_hess(self, x)


_ARG_RE = re.compile(r"^\s*([a-z_]+)\s*=\s*([-+0-9.eE]+)\s*$")


def parse_potential(text: str) -> Potential:
    """Parse ``quadratic``, ``pow:p=3,omega=1`` or ``hypentropy:beta=2``.

    A leading ``scaled:`` selects scaled mode. ``pow`` accepts an optional
    ``normalized=1``.

    >>> str(parse_potential("scaled:pow:p=4,omega=1"))
    'scaled:pow:p=4,omega=1'
    """
    s = text.strip().lower()
    scaled = False
    if s.startswith("scaled:"):
        scaled = True
        s = s[len("scaled:"):]
    name, _, rest = s.partition(":")
    args = {}
    if rest:
        for item in rest.split(","):
            m = _ARG_RE.match(item)
            if not m:
                raise ValueError(f"bad potential argument {item!r} in {text!r}")
            args[m.group(1)] = float(m.group(2))
    if name == "quadratic":
        if args:
            raise ValueError(f"quadratic takes no arguments: {text!r}")
        return Potential.quadratic(scaled)
    if name == "pow":
        unknown = set(args) - {"p", "omega", "normalized"}
        if unknown or "p" not in args:
            raise ValueError(f"pow needs p=<real>[,omega=<real>]: {text!r}")
        return Potential.power(args["p"], args.get("omega", 0.0), scaled,
                               bool(args.get("normalized", 0.0)))
    if name == "hypentropy":
        if set(args) != {"beta"}:
            raise ValueError(f"hypentropy needs beta=<real>: {text!r}")
        return Potential.hypentropy(args["beta"], scaled)
    raise ValueError(f"unknown potential {text!r}")


def _apply(which: int, pot: Potential, x):
    arr = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty_like(flat)
    _map_scalar(which, *pot.codes, flat, out)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def phi_eval(pot: Potential, x):
    """Value of phi at ``x`` (scalar or array)."""
    return _apply(0, pot, x)


def phi_grad(pot: Potential, x):
    """First derivative of phi."""
    return _apply(1, pot, x)


def phi_hess(pot: Potential, x):
    """Second derivative of phi."""
    return _apply(2, pot, x)


def bregman(pot: Potential, x, y):
    """Bregman divergence ``phi(x) - phi(y) - phi'(y) (x - y)``.

    Round-off can push mathematically nonnegative values slightly below
    zero; those are clipped.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if pot.kind is Kind.QUADRATIC:
        c = pot.codes[-1]
        d = c * (x - y) ** 2
    else:
        d = phi_eval(pot, x) - phi_eval(pot, y) - phi_grad(pot, y) * (x - y)
        d = np.maximum(d, 0.0)
    if d.ndim == 0:
        return float(d)
    return d


def inverse_grad(pot: Potential, y):
    """Return ``x`` with ``phi'(x) = y``.

    Closed forms are used for the quadratic and hypentropy potentials; the
    power family uses bracket doubling, bisection, then safeguarded Newton
    to ``|phi'(x) - y| <= 1e-12 * max(1, |y|)``.
    """
    arr = np.asarray(y, dtype=float)
    flat = arr.ravel()
    out = np.empty_like(flat)
    codes = pot.codes
    for k, v in enumerate(flat):
        if not math.isfinite(v):
            raise InverseGradError(f"non-finite argument {v}")
        x, ok = _inv_dphi(*codes, float(v))
        if not ok:
            raise InverseGradError(
                f"could not invert phi' = {v!r} for {pot} "
                f"(bracket expansion or Newton failed)")
        out[k] = x
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def hessian_diag(pot: Potential, theta, anchor, n: int) -> np.ndarray:
    """Diagonal of the Hessian of the separable network potential.

    Unscaled mode gives ``phi''(theta - anchor)``; scaled mode gives
    ``phi''(n * (theta - anchor))`` since the ``1/n**2`` prefactor cancels
    the chain-rule factor.
    """
    theta = np.ascontiguousarray(theta, dtype=float)
    anchor = np.ascontiguousarray(anchor, dtype=float)
    if theta.shape != anchor.shape:
        raise ValueError(f"theta/anchor length mismatch: {theta.shape} vs {anchor.shape}")
    out = np.empty_like(theta)
    s = float(n) if pot.scaled else 1.0
    _hess_diag_into(*pot.codes, theta, anchor, s, out)
    return out
