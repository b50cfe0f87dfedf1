"""Finite-dimensional l^p spaces and their duality mapping.

Vectors are plain 1-D numpy arrays; a :class:`PNormSpace` carries the
dimension and exponent and provides the norm-related operations.  Only
exponents strictly between 1 and infinity are accepted, where the space is
smooth and strictly convex: the duality mapping is single valued and every
subspace has a unique nearest point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# below this magnitude a coordinate is treated as exactly zero in |t|**a
_UNDERFLOW = 1e-300


def conjugate_exponent(p: float) -> float:
    """Return p' with 1/p + 1/p' = 1."""
    p = float(p)
    if not (1.0 < p < math.inf):
        raise ValueError(f"exponent must lie in (1, inf), got {p}")
    if p == 2.0:
        return 2.0
    return p / (p - 1.0)


def signed_power(t: np.ndarray, a: float) -> np.ndarray:
    """Elementwise ``sign(t) * |t|**a`` with exact zeros for tiny entries."""
    t = np.asarray(t, dtype=float)
    if a == 1.0:
        return t.copy()
    mag = np.abs(t)
    out = np.zeros_like(t)
    nz = mag >= _UNDERFLOW
    out[nz] = np.sign(t[nz]) * np.exp(a * np.log(mag[nz]))
    return out


def abs_power(t: np.ndarray, a: float) -> np.ndarray:
    """Elementwise ``|t|**a`` (a >= 0) with the same underflow guard."""
    mag = np.abs(np.asarray(t, dtype=float))
    if a == 1.0:
        return mag
    if a == 0.0:
        return np.ones_like(mag)
    out = np.zeros_like(mag)
    nz = mag >= _UNDERFLOW
    out[nz] = np.exp(a * np.log(mag[nz]))
    return out


def lp_norm(x: np.ndarray, p: float) -> float:
    """(sum |x_i|^p)^(1/p), computed with max-scaling against overflow."""
    x = np.asarray(x, dtype=float)
    if p == 2.0:
        return float(np.linalg.norm(x))
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum(abs_power(x / scale, p))) ** (1.0 / p)


def norm_gradient(x: np.ndarray, p: float) -> np.ndarray:
    """Gradient of ``x -> ||x||_p`` at x != 0 (zero vector at x = 0)."""
    nx = lp_norm(x, p)
    if nx == 0.0:
        return np.zeros_like(np.asarray(x, dtype=float))
    if p == 2.0:
        return np.asarray(x, dtype=float) / nx
    return signed_power(np.asarray(x, dtype=float) / nx, p - 1.0)


@dataclass(frozen=True)
class PNormSpace:
    """R^dim with the l^p norm, 1 < p < inf.

    Attributes
    ----------
    dim : int
        Number of coordinates.
    p : float
        Norm exponent.
    """

    dim: int
    p: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim}")
        if not (1.0 < float(self.p) < math.inf):
            raise ValueError(
                f"p must exceed 1 and be finite (got {self.p}); "
                "p = 1 and p = inf give set-valued projections"
            )
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "p", float(self.p))

    @property
    def dual_p(self) -> float:
        return conjugate_exponent(self.p)

    def check(self, x) -> np.ndarray:
        """Validate a coordinate vector for this space and return it as floats."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("vector has non-finite entries")
        return x

    def norm(self, x) -> float:
        return lp_norm(self.check(x), self.p)

    def dual_norm(self, f) -> float:
        """Norm of a functional acting by the coordinate dot product."""
        return lp_norm(self.check(f), self.dual_p)

    def dual_map(self, x) -> np.ndarray:
        """The duality mapping F(x).

        Returns the unique functional f with ``f(x) = ||x||^2 = ||f||^2``,
        namely ``f_i = ||x||^(2-p) |x_i|^(p-1) sign(x_i)``.
        """
        return dual_map(self.check(x), self.p)

    def random_vector(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.dim)


def pnorm(x, p: float) -> float:
    """The l^p norm of x; thin wrapper validating the exponent."""
    conjugate_exponent(p)
    return lp_norm(x, p)


def dual_map(x, p: float) -> np.ndarray:
    """Duality mapping of l^p evaluated at x (see :meth:`PNormSpace.dual_map`)."""
    conjugate_exponent(p)
    x = np.asarray(x, dtype=float)
    if p == 2.0:
        return x.copy()
    nx = lp_norm(x, p)
    if nx == 0.0:
        return np.zeros_like(x)
    # ||x||^(2-p) |x_i|^(p-1) = ||x|| * |x_i / ||x|| |^(p-1)
    return nx * signed_power(x / nx, p - 1.0)
