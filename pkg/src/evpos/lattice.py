"""Order structure of R^n viewed as a Banach lattice.

Vectors and functionals are plain 1-D float arrays; :func:`as_vector` and
:func:`as_functional` validate them. Band projections are coordinate masks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, PreconditionError
from .tolerances import Tolerances, resolve

__all__ = [
    "BandProjection",
    "Margin",
    "as_functional",
    "as_vector",
    "decompose",
    "dist_to_positive_cone",
    "gauge_norm",
    "is_quasi_interior",
    "is_strictly_positive_functional",
    "phi_norm",
    "strong_positivity_margin",
]


def as_vector(f, name="f") -> np.ndarray:
    """Return ``f`` as a finite, non-empty 1-D float array."""
    v = np.array(f, dtype=float, copy=True)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise PreconditionError(f"{name} has non-finite entries")
    v.setflags(write=False)
    return v


as_functional = as_vector


def _same_dim(f, g, names=("f", "u")):
    if f.shape != g.shape:
        raise DimensionError(f"dimension mismatch: {names[0]} has {f.size}, {names[1]} has {g.size}")


def _check_weight(u, name="u"):
    if np.any(u < 0) or not np.any(u > 0):
        raise PreconditionError(f"{name} must be positive and non-zero")


class Parts(NamedTuple):
    positive: np.ndarray
    negative: np.ndarray
    modulus: np.ndarray


def decompose(f) -> Parts:
    """Split ``f`` into positive part, negative part and modulus."""
    f = as_vector(f)
    pos = np.maximum(f, 0.0)
    neg = np.maximum(-f, 0.0)
    return Parts(pos, neg, np.abs(f))


def gauge_norm(f, u) -> float:
    """Gauge norm ``||f||_u``; ``inf`` when ``f`` is not in the ideal ``E_u``."""
    f, u = as_vector(f), as_vector(u, "u")
    _same_dim(f, u)
    _check_weight(u)
    on = u > 0
    if np.any(f[~on] != 0.0):
        return float("inf")
    return float(np.max(np.abs(f[on]) / u[on]))


class Margin(NamedTuple):
    """Witness ``c*`` of ``f >= c* u`` together with the strict-positivity verdict."""

    value: float
    positive: bool


def strong_positivity_margin(f, u, tol: Tolerances | None = None) -> Margin:
    """Largest ``c`` with ``f >= c u`` on the support of ``u``.

    The witness may be negative. ``f >>_u 0`` is declared when it exceeds the
    positivity floor of ``f``.
    """
    tol = resolve(tol)
    f, u = as_vector(f), as_vector(u, "u")
    _same_dim(f, u)
    _check_weight(u)
    on = u > 0
    c = float(np.min(f[on] / u[on]))
    return Margin(c, c > tol.pos_floor(f))


def is_quasi_interior(f, tol: Tolerances | None = None) -> bool:
    """Quasi-interior points of R^n are the entrywise strictly positive vectors."""
    tol = resolve(tol)
    f = as_vector(f)
    return bool(np.all(f > tol.pos_floor(f)))


def is_strictly_positive_functional(phi, tol: Tolerances | None = None) -> bool:
    tol = resolve(tol)
    phi = as_functional(phi, "phi")
    return bool(np.all(phi > tol.pos_floor(phi)))


def phi_norm(f, phi, tol: Tolerances | None = None) -> float:
    """Weighted l1 norm ``<phi, |f|>``, the AL-norm generated by ``phi``."""
    f, phi = as_vector(f), as_functional(phi, "phi")
    _same_dim(f, phi, ("f", "phi"))
    if not is_strictly_positive_functional(phi, tol):
        raise PreconditionError("phi must be a strictly positive functional")
    return float(np.dot(phi, np.abs(f)))


def dist_to_positive_cone(f) -> float:
    """Sup-norm distance to the positive cone, i.e. ``||f^-||_inf``."""
    f = as_vector(f)
    return float(np.max(np.maximum(-f, 0.0)))


@dataclass(frozen=True, eq=False)
class BandProjection:
    """Diagonal 0/1 projection onto a set of coordinates."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True).reshape(-1)
        if m.size == 0:
            raise DimensionError("band projection needs dimension >= 1")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @classmethod
    def full(cls, n: int) -> "BandProjection":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def from_indices(cls, n: int, indices) -> "BandProjection":
        m = np.zeros(n, dtype=bool)
        m[np.asarray(list(indices), dtype=int)] = True
        return cls(m)

    @classmethod
    def central(cls, n: int, fraction: float) -> "BandProjection":
        """The middle ``round(fraction * n)`` coordinates (at least one)."""
        if not 0.0 < fraction <= 1.0:
            raise PreconditionError("fraction must lie in (0, 1]")
        k = max(1, int(round(fraction * n)))
        start = (n - k) // 2
        return cls.from_indices(n, range(start, start + k))

    @property
    def n(self) -> int:
        return self.mask.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.mask.astype(float))

    def __call__(self, f):
        f = np.asarray(f)
        if f.shape[0] != self.n:
            raise DimensionError(f"mask has dimension {self.n}, operand has {f.shape[0]}")
        out = np.zeros_like(f)
        out[self.mask] = f[self.mask]
        return out

    apply = __call__

    def complement(self) -> "BandProjection":
        return BandProjection(~self.mask)

    def __and__(self, other: "BandProjection") -> "BandProjection":
        return BandProjection(self.mask & other.mask)

    def __or__(self, other: "BandProjection") -> "BandProjection":
        return BandProjection(self.mask | other.mask)

    def __le__(self, other: "BandProjection") -> bool:
        return bool(np.all(other.mask[self.mask]))

    def __eq__(self, other):
        if not isinstance(other, BandProjection):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self.mask, other.mask))

    def __hash__(self):
        return hash(self.mask.tobytes())

    def __repr__(self):
        return f"BandProjection(n={self.n}, support={self.support.size})"
