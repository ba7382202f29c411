"""Shared result types and helpers for the positivity checks."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .. import evolution, spectral
from ..errors import DimensionError, PreconditionError
from ..lattice import BandProjection, as_vector
from ..tolerances import Tolerances, resolve

VERDICTS = ("certified_individual", "certified_uniform", "hypotheses_fail")
DETECTION_KINDS = ("semigroup_t0", "resolvent_right", "resolvent_left")

# hypothesis -> the witness that quantifies it
WITNESS_OF = {
    "Sx_strongly_pos_Su": "c1",
    "Tpsi_strongly_pos_Tphi": "c2",
    "kerpsi_decay": "gap",
    "dominant": "gap",
}


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True)
class Certificate:
    """Outcome of a hypothesis check.

    ``hypotheses`` maps each checked condition to its truth value;
    conditions that hold automatically for matrices are listed in
    ``auto_true`` as well. ``predicted`` carries constructive by-products
    such as the gap-predicted uniform ``t0``.
    """

    kind: str
    hypotheses: dict[str, bool]
    witnesses: dict[str, float]
    verdict: str
    failed: tuple[str, ...]
    auto_true: tuple[str, ...] = ()
    tolerances: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict != "hypotheses_fail"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass(frozen=True)
class DetectionResult:
    """Outcome of an empirical sweep over a time or spectral-parameter grid.

    ``samples`` holds ``(parameter, margin)`` for every checked node;
    ``margin`` is the uniform witness over the verified range (zero when
    the verdict is negative). ``tail_certified`` is only ever set by an
    analytic bound, never by sampling.
    """

    kind: str
    positive: bool
    threshold: float | None
    margin: float
    samples: tuple[tuple[float, float], ...]
    tail_certified: bool
    tail_margin: float | None = None
    limit_margin: float | None = None
    extra: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def make_certificate(kind, hypotheses, witnesses, auto_true, tol, success, predicted=None, extra_failed=()):
    failed = tuple(k for k, v in hypotheses.items() if not v) + tuple(extra_failed)
    return Certificate(
        kind=kind,
        hypotheses=dict(hypotheses),
        witnesses={k: float(v) for k, v in witnesses.items()},
        verdict=success if not failed else "hypotheses_fail",
        failed=failed,
        auto_true=tuple(auto_true),
        tolerances=tol.as_dict(),
        predicted=dict(predicted or {}),
    )


def as_mask(S, n, name="S") -> BandProjection:
    if S is None:
        return BandProjection.full(n)
    if not isinstance(S, BandProjection):
        S = BandProjection(np.asarray(S, dtype=bool))
    if S.n != n:
        raise DimensionError(f"{name} has dimension {S.n}, operator has {n}")
    return S


def as_weight(u, n, name="u") -> np.ndarray:
    if u is None:
        return np.ones(n)
    u = as_vector(u, name)
    if u.size != n:
        raise DimensionError(f"{name} has dimension {u.size}, operator has {n}")
    if np.any(u < 0):
        raise PreconditionError(f"{name} must be positive")
    return u


def column_margins(V, w, tol: Tolerances):
    """Per-column witness ``min_{w_i > 0} V_i / w_i`` and the positivity floor."""
    V = np.asarray(V, dtype=float)
    V2 = V[:, None] if V.ndim == 1 else V
    on = w > 0
    if not np.any(on):
        raise PreconditionError("Su vanishes; strong positivity with respect to it is undefined")
    vals = np.min(V2[on] / w[on][:, None], axis=0)
    floors = tol.eps_pos * (1.0 + np.max(np.abs(V2), axis=0))
    if V.ndim == 1:
        return float(vals[0]), float(floors[0])
    return vals, floors


class Bound(NamedTuple):
    """``c`` with ``SPT >= c Su (x) T'phi`` on the mask rectangle, and whether it is strictly positive."""

    value: float
    positive: bool
    argmin: tuple[int, int]


def rectangle(S: BandProjection, T: BandProjection, u, phi):
    """Row and column indices where ``Su`` and ``T'phi`` are positive, with those weights."""
    Su, Tphi = S(u), T(phi)
    rows = np.flatnonzero(Su > 0)
    cols = T.support
    if rows.size == 0:
        raise PreconditionError("Su = 0")
    if np.any(Tphi[cols] <= 0):
        raise PreconditionError("T'phi is not strictly positive on the support of T")
    return rows, cols, Su[rows], Tphi[cols]


def projection_lower_bound(S, P, T, u=None, phi=None, tol: Tolerances | None = None) -> Bound:
    """Largest ``c`` with ``(SPT)_ij >= c (Su)_i (T'phi)_j`` over the mask rectangle.

    ``P`` may be any matrix (a projection, or a scaled resolvent). Rows where
    ``Su`` vanishes carry no constraint of this form and are skipped.
    """
    tol = resolve(tol)
    P = spectral.as_operator(P, "P")
    n = P.shape[0]
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u, phi = as_weight(u, n), as_weight(phi, n, "phi")
    rows, cols, su, tp = rectangle(S, T, u, phi)
    block = P[np.ix_(rows, cols)]
    ratio = block / np.outer(su, tp)
    k = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
    c = float(ratio[k])
    floor = tol.eps_pos * (1.0 + float(np.max(np.abs(block))))
    return Bound(c, c > floor, (int(rows[k[0]]), int(cols[k[1]])))


def f_panel(n: int, T: BandProjection | None = None, size: int = 20, seed: int = 0) -> np.ndarray:
    """Test vectors ``f > 0`` as columns of an ``n x size`` array.

    Canonical basis vectors spread over the support of ``T``, seeded
    uniform-random positive vectors, and one adversarial vector: the basis
    vector at the first index of the support of ``T`` (its boundary).
    """
    T = as_mask(T, n, "T")
    if size < 2:
        raise PreconditionError("panel size must be >= 2")
    supp = T.support
    nb = min(max(1, size // 4), supp.size, size - 1)
    pick = supp[np.linspace(0, supp.size - 1, nb + 2).round().astype(int)[1:-1]] if supp.size > 2 else supp[:nb]
    pick = pick[:nb]
    nr = size - pick.size - 1
    rng = np.random.default_rng(seed)
    F = np.zeros((n, size))
    F[pick, np.arange(pick.size)] = 1.0
    F[:, pick.size:pick.size + nr] = rng.uniform(0.0, 1.0, (n, nr)) + 1e-3
    F[supp[0], -1] = 1.0
    return F


def check_positive_panel(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    F2 = F[:, None] if F.ndim == 1 else F
    if np.any(F2 < 0) or np.any(np.max(F2, axis=0) <= 0) or not np.all(np.isfinite(F2)):
        raise PreconditionError("every f must satisfy f >= 0 and f != 0")
    return F2


class SpectralContext:
    """Spectral data, projection and decay bound of ``A`` at ``s(A)``, computed once."""

    def __init__(self, A, tol: Tolerances | None = None):
        self.tol = resolve(tol)
        self.A = spectral.as_operator(A)
        self.n = self.A.shape[0]
        self.data = spectral.analyze(self.A, self.tol)
        self.s = self.data.spectral_bound
        self._cl = spectral.spectrum_clusters(self.A, self.tol)
        self._P = {}
        self._bound = {}

    @property
    def simple_dominant(self) -> bool:
        d = self.data
        return d.dominant and d.pole_order == 1 and d.alg_mult == 1 and d.x is not None

    def isolation(self, lam0) -> float:
        c = spectral._cluster_of(self._cl, lam0)
        others = [abs(o.center - c.center) for o in self._cl if o is not c]
        return float(min(others)) if others else float("inf")

    def pole(self, lam0):
        return spectral.pole_order(self.A, lam0, self.tol)

    def projection(self, lam0):
        key = complex(lam0)
        if key not in self._P:
            self._P[key] = spectral.spectral_projection(self.A, lam0, self.tol)
        return self._P[key]

    def decay(self, lam0):
        """Bound off the spectral subspace of ``lam0`` (``None`` if unavailable).

        At ``s(A)`` this is a semigroup decay bound; below ``s(A)`` only the
        eigenbasis construction applies and the result serves resolvent
        tails alone.
        """
        key = complex(lam0)
        if key not in self._bound:
            top = abs(np.real(lam0) - self.s) <= self.tol.tol_cluster * max(spectral.norm(self.A), 1.0)
            self._bound[key] = evolution.decay_bound(self.A, float(np.real(lam0)), self.projection(lam0),
                                                     center=lam0, tol=self.tol, decaying=top)
        return self._bound[key]

    def time_scale(self) -> float:
        """Relaxation scale for default grids: the spectral gap, else the spread of real parts."""
        g = self.data.gap
        if np.isfinite(g) and g > 0:
            return float(g)
        re = np.array([c.center.real for c in self._cl])
        spread = self.s - re
        spread = spread[spread > self.tol.tol_cluster * max(spectral.norm(self.A), 1.0)]
        return float(np.min(spread)) if spread.size else 1.0


def oriented_pair(x, psi, S: BandProjection, u, tol):
    """Flip ``(x, psi)`` jointly so that ``Sx`` has the better margin against ``Su``."""
    Su = S(u)
    m_plus, _ = column_margins(S(x), Su, tol)
    m_minus, _ = column_margins(S(-x), Su, tol)
    if m_minus > m_plus:
        return -x, -psi
    return x, psi
