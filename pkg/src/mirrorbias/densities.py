"""Bias distributions with compact support ``[-B, B]``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BiasDensity"]


@dataclass(frozen=True)
class BiasDensity:
    """Symmetric density of the input biases.

    ``kind`` is ``"uniform"`` (flat on ``[-B, B]``) or ``"truncgauss"``
    (a centred Gaussian of scale ``sigma`` restricted to ``[-B, B]`` and
    renormalized).
    """

    kind: str = "uniform"
    B: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "truncgauss"):
            raise ValueError(f"unknown bias density {self.kind!r}")
        if not (self.B > 0):
            raise ValueError(f"support half-width B must be > 0, got {self.B}")
        if self.kind == "truncgauss" and not (self.sigma > 0):
            raise ValueError(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def uniform(cls, B: float = 1.0) -> "BiasDensity":
        return cls("uniform", float(B))

    @classmethod
    def truncgauss(cls, sigma: float, B: float) -> "BiasDensity":
        return cls("truncgauss", float(B), float(sigma))

    def _mass(self) -> float:
        return math.erf(self.B / (self.sigma * math.sqrt(2.0)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) <= self.B
        if self.kind == "uniform":
            val = np.full(x.shape, 0.5 / self.B)
        else:
            z = x / self.sigma
            val = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi) * self._mass())
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    def second_moment(self) -> float:
        """E[B**2] in closed form."""
        if self.kind == "uniform":
            return self.B ** 2 / 3.0
        beta = self.B / self.sigma
        dens = math.exp(-0.5 * beta * beta) / math.sqrt(2 * math.pi)
        return self.sigma ** 2 * (1.0 - 2.0 * beta * dens / self._mass())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(-self.B, self.B, size)
        out = np.empty(size)
        filled = 0
        while filled < size:
            draw = self.sigma * rng.standard_normal(max(2 * (size - filled), 16))
            keep = draw[np.abs(draw) <= self.B]
            take = min(keep.size, size - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "B": self.B}
        if self.kind == "truncgauss":
            d["sigma"] = self.sigma
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BiasDensity":
        kind = d.get("kind", "uniform")
        allowed = {"kind", "B"} | ({"sigma"} if kind == "truncgauss" else set())
        extra = set(d) - allowed
        if extra:
            raise ValueError(f"unexpected bias-density fields {sorted(extra)}")
        return cls(kind, float(d.get("B", 1.0)), float(d.get("sigma", 1.0)))
