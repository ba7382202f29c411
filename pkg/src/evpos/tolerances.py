"""Numerical tolerances used across the package.

Every verdict produced by :mod:`evpos.positivity` records the
:class:`Tolerances` instance it was computed with, so a report can always be
re-derived.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Configurable floors and thresholds.

    Attributes
    ----------
    eps_pos : float
        Relative positivity floor. A margin counts as strictly positive when it
        exceeds ``eps_pos * (1 + ||v||_inf)`` for the vector ``v`` under test.
    tol_eig : float
        Relative backward-error bound for computed eigenpairs.
    tol_cluster : float
        Relative eigenvalue clustering radius (multiplied by ``||A||``).
    tol_rank : float
        Relative singular-value threshold for rank decisions.
    tol_proj : float
        Agreement bound for spectral projections (idempotence, commutation,
        contour vs rank-one).
    tol_quad : float
        Absolute tolerance of the Laplace-transform quadrature.
    tol_sing : float
        Relative distance to the spectrum below which a resolvent is refused.
    max_dim : int
        Largest matrix accepted by the dense eigensolver.
    n_quad : int
        Initial node count of the contour trapezoid rule.
    """

    eps_pos: float = 1e-10
    tol_eig: float = 1e-8
    tol_cluster: float = 1e-8
    tol_rank: float = 1e-8
    tol_proj: float = 1e-8
    tol_quad: float = 1e-8
    tol_sing: float = 1e-14
    max_dim: int = 2000
    n_quad: int = 64

    def pos_floor(self, v) -> float:
        """Absolute positivity floor for the vector (or matrix) ``v``."""
        v = np.asarray(v)
        scale = float(np.max(np.abs(v))) if v.size else 0.0
        return self.eps_pos * (1.0 + scale)

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT = Tolerances()


def resolve(tol: Tolerances | None) -> Tolerances:
    return DEFAULT if tol is None else tol
