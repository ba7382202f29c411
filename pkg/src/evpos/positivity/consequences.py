"""Converse statements: what eventual positivity forces on the spectrum and the projection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import evolution, spectral
from ..errors import NumericalFailure, PreconditionError
from ..lattice import BandProjection
from ..tolerances import Tolerances, resolve
from ._core import (
    SpectralContext,
    _jsonable,
    as_mask,
    as_weight,
    check_positive_panel,
    f_panel,
    oriented_pair,
)
from .certificates import _real_eigenvalue
from .detectors import resolvent_ladder, resolvent_scan

__all__ = [
    "AsymptoticReport",
    "Claim",
    "ExtractionResult",
    "LadderReport",
    "SemigroupPositivityReport",
    "check_asymptotic_resolvent",
    "is_positive_semigroup",
    "krein_rutman_extract",
    "ladder_consequences",
    "semigroup_positivity",
]


@dataclass(frozen=True)
class AsymptoticReport:
    """Three independent checks of ``SPT >= 0`` at a simple pole.

    ``projection``: the smallest entry of ``SPT`` is above ``-eps_pos``.
    ``scaled_distance``: ``(lambda - lam0) dist(S R(lambda) T f, E_+)``
    extrapolates to zero as ``lambda`` decreases to ``lam0``.
    ``bounded_distance``: ``dist(S R(lambda) T f, E_+) / ||f||`` stays
    bounded along the ladder.
    """

    projection: bool
    scaled_distance: bool
    bounded_distance: bool
    min_entry: float
    scaled_limit: float
    growth: float
    ladder: tuple[float, ...]
    distances: tuple[float, ...]

    @property
    def legs(self) -> tuple[bool, bool, bool]:
        return self.projection, self.scaled_distance, self.bounded_distance

    @property
    def agree(self) -> bool:
        return len(set(self.legs)) == 1

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["agree"] = self.agree
        return _jsonable(d)


def _columns(T: BandProjection):
    cols = T.support
    E = np.zeros((T.n, cols.size))
    E[cols, np.arange(cols.size)] = 1.0
    return E


def check_asymptotic_resolvent(A, lam0, S=None, T=None, F=None, K: int = 20,
                               tol: Tolerances | None = None) -> AsymptoticReport:
    """Evaluate the three equivalent forms of ``SPT >= 0`` and insist that they agree.

    The test vectors are the basis vectors on the support of ``T`` plus the
    columns of ``F``. The ladder is ``lam0 + (d/2) 2^{-k}``, ``k = 0..K``.
    Disagreement raises :class:`NumericalFailure`.
    """
    tol = resolve(tol)
    A = spectral.as_operator(A)
    n = A.shape[0]
    S, T = as_mask(S, n), as_mask(T, n, "T")
    lam0 = _real_eigenvalue(A, lam0, tol)
    po = spectral.pole_order(A, lam0, tol)
    if po.order != 1:
        raise PreconditionError(f"lambda0={lam0} is a pole of order {po.order}, not simple")
    G = _columns(T)
    if F is not None:
        G = np.hstack([G, T(check_positive_panel(F))])
    G = G[:, np.max(G, axis=0) > 0]
    fn = np.max(G, axis=0)
    rows = S.support

    P = spectral.spectral_projection(A, lam0, tol)
    SPT = P[np.ix_(rows, T.support)]
    min_entry = float(np.min(SPT))
    leg1 = min_entry >= -tol.eps_pos * (1.0 + float(np.max(np.abs(SPT))))

    d = spectral.isolation_distance(A, lam0, tol)
    reach = 0.5 * (d if np.isfinite(d) else max(1.0, abs(lam0)))
    lams = resolvent_ladder(lam0, reach, "right", K)
    w = spectral.full_spectrum(A, tol)
    dist = np.empty(lams.size)
    for i, lam in enumerate(lams):
        V = evolution.resolvent_apply(A, lam, G, tol, spectrum=w)[rows]
        neg = np.maximum(-V, 0.0).max(axis=0)
        # negative parts below the rounding floor of the solve are not counted
        neg[neg <= tol.eps_pos * (1.0 + np.abs(V).max(axis=0))] = 0.0
        dist[i] = float(np.max(neg / fn))
    delta = lams - lam0
    g = delta * dist
    limit = float(2 * g[-1] - g[-2])
    leg2 = limit <= 10 * tol.eps_pos * (1.0 + float(np.max(fn)))
    half = lams.size // 2
    first, second = float(np.max(dist[:half])), float(np.max(dist[half:]))
    growth = second / first if first > 0 else (math.inf if second > 0 else 1.0)
    leg3 = second <= 4.0 * first or second == 0.0
    rep = AsymptoticReport(bool(leg1), bool(leg2), bool(leg3), min_entry, limit, growth,
                           tuple(lams.tolist()), tuple(dist.tolist()))
    if not rep.agree:
        raise NumericalFailure("the three forms of SPT >= 0 disagree; review the tolerances", rep.to_dict())
    return rep


@dataclass(frozen=True)
class ExtractionResult:
    """Positive vectors read off the leading Laurent coefficient ``U_{-m}``.

    ``status`` is ``"ok"``, ``"not_guaranteed"`` (``S U_{-m} T = 0``) or
    ``"failed"`` (no admissible basis vector or pair was found).
    """

    status: str
    order: int
    x: np.ndarray | None = None
    psi: np.ndarray | None = None
    v: np.ndarray | None = None
    w: np.ndarray | None = None
    norm_SUT: float = 0.0
    message: str = ""

    def to_dict(self) -> dict:
        return _jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})


def _best_positive(M, support, floor):
    """Nonnegative ``v`` (basis vector or pair sum on ``support``) maximising ``||Mv||`` with ``Mv >= 0``."""
    n = M.shape[1]
    best, best_norm = None, floor
    for j in support:
        col = M[:, j]
        nrm = float(np.max(np.abs(col)))
        if np.min(col) >= -floor and nrm > best_norm:
            best, best_norm = np.eye(n)[j], nrm
    if best is not None:
        return best
    for a in range(support.size):
        for b in range(a + 1, support.size):
            i, j = support[a], support[b]
            col = M[:, i] + M[:, j]
            nrm = float(np.max(np.abs(col)))
            if np.min(col) >= -floor and nrm > best_norm:
                best = np.zeros(n)
                best[[i, j]] = 1.0
                best_norm = nrm
    return best


def krein_rutman_extract(A, lam0, S=None, T=None, tol: Tolerances | None = None) -> ExtractionResult:
    """Find ``x = U_{-m} T v`` with ``S x >= 0``, ``Sx != 0`` and dually ``psi`` from the transpose.

    ``m`` is the pole order at ``lam0`` and ``U_{-m}`` the leading Laurent
    coefficient. Candidates ``v`` are the basis vectors on the support of
    ``T`` and then their pairwise sums; vectors are normalised in the sup
    norm.
    """
    tol = resolve(tol)
    A = spectral.as_operator(A)
    n = A.shape[0]
    S, T = as_mask(S, n), as_mask(T, n, "T")
    lam0 = _real_eigenvalue(A, lam0, tol)
    m = spectral.pole_order(A, lam0, tol).order
    U = np.real_if_close(spectral.laurent_coefficient(A, lam0, m, tol), tol=1e6)
    if np.iscomplexobj(U):
        raise NumericalFailure("leading Laurent coefficient at a real eigenvalue is not real", {"lam0": lam0})
    SUT = S.matrix @ U @ T.matrix
    nrm = float(np.max(np.abs(SUT)))
    floor = tol.eps_pos * (1.0 + float(np.max(np.abs(U))))
    if nrm <= floor:
        return ExtractionResult("not_guaranteed", m, norm_SUT=nrm,
                                message="S U_{-m} T = 0, extraction not guaranteed")
    v = _best_positive(SUT, T.support, floor)
    w = _best_positive(SUT.T, S.support, floor)
    if v is None or w is None:
        which = "x" if v is None else "psi"
        return ExtractionResult("failed", m, v=v, w=w, norm_SUT=nrm,
                                message=f"no nonnegative basis vector or pair gives a positive image for {which}")
    x = U @ T(v)
    psi = U.T @ S(w)
    return ExtractionResult("ok", m, x / np.max(np.abs(x)), psi / np.max(np.abs(psi)), v, w, nrm)


@dataclass(frozen=True)
class Claim:
    passed: bool
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LadderReport:
    """Rung detector outcomes and the directly verified consequences.

    ``falsification_candidate`` is set when every rung supports eventual
    positivity but a consequence fails when checked directly.
    """

    lam0: float
    rungs: tuple[dict, ...]
    rungs_positive: bool
    claims: dict[str, Claim]
    falsification_candidate: bool

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.claims.values())

    def to_dict(self) -> dict:
        return _jsonable({
            "lam0": self.lam0,
            "rungs": list(self.rungs),
            "rungs_positive": self.rungs_positive,
            "claims": {k: {"passed": c.passed, "witness": c.witness} for k, c in self.claims.items()},
            "falsification_candidate": self.falsification_candidate,
        })


def _check_ladder(ladder, n):
    pairs = []
    for rung in ladder:
        S, T = (rung, rung) if isinstance(rung, BandProjection) else rung
        pairs.append((as_mask(S, n), as_mask(T, n, "T")))
    if not pairs:
        raise PreconditionError("the ladder needs at least one rung")
    for (S0, T0), (S1, T1) in zip(pairs, pairs[1:]):
        if not (S0 <= S1 and T0 <= T1):
            raise PreconditionError("ladder masks must increase")
    return pairs


def _convergence_claim(ctx, P, lam0, gap):
    B = ctx.A - lam0 * np.eye(ctx.n)
    if not (np.isfinite(gap) and gap > 0):
        return Claim(False, {"reason": "no spectral gap at s(A)"})
    ts = np.linspace(2.0 / gap, 8.0 / gap, 13)
    errs = np.array([np.linalg.norm(E - P, np.inf) for _, E in evolution.propagators(B, ts, s=0.0)])
    if np.any(errs <= 0):
        return Claim(False, {"reason": "exact convergence; no rate to fit"})
    rate = -float(np.polyfit(ts, np.log(errs), 1)[0])
    db = ctx.decay(lam0)
    bound_ok = None
    kappa = None
    if db is not None:
        if db.method == "eigenbasis":
            kappa = float(np.max(np.sum(np.abs(db.V), axis=1)) * np.max(np.sum(np.abs(db.W), axis=0)) + db.slack)
            envelope = kappa * np.exp(-db.rate * ts)
        else:
            kappa = float(db.K)
            envelope = np.array([db.entry_bound(t) for t in ts])
        bound_ok = bool(np.all(errs <= envelope))
    rel = abs(rate - gap) / gap
    return Claim(bool(rel <= 0.15 and bound_ok is not False), {
        "fitted_rate": rate, "gap": float(gap), "relative_error": rel, "kappa": kappa,
        "bound_holds": bound_ok, "times": ts.tolist(), "errors": errs.tolist(),
    })


def ladder_consequences(A, ladder, lam0=None, u=None, F=None, K: int = 20,
                        tol: Tolerances | None = None) -> LadderReport:
    """Run right-side resolvent detectors on every rung and verify the consequences directly.

    ``ladder`` lists ``(S_n, T_n)`` pairs, or single masks used for both.

    Claims: ``simple_pole``; ``projection_positive`` (``P >= 0``, and
    ``P > 0`` entrywise when the rungs are positive);
    ``kernel_quasi_interior``; ``operator_norm_convergence``
    (``||e^{t(A-s)} - P||_inf`` decays at the gap rate, fitted over
    ``t`` in ``[2, 8]/gap``); ``peripheral_orders`` (no peripheral pole order
    exceeds the order at ``s(A)``).
    """
    tol = resolve(tol)
    ctx = SpectralContext(A, tol)
    n = ctx.n
    pairs = _check_ladder(ladder, n)
    u = as_weight(u, n)
    lam0 = ctx.s if lam0 is None else _real_eigenvalue(ctx.A, lam0, tol)
    rungs = []
    rungs_positive = True
    for i, (S, T) in enumerate(pairs):
        Fi = f_panel(n, T, 8, seed=i) if F is None else check_positive_panel(F)
        res = resolvent_scan(ctx.A, lam0, S, T, u, Fi, "right", K, tol, ctx)
        floor = tol.eps_pos
        ok = all(r.positive and r.margin > floor and r.extra["stabilized"] for r in res)
        rungs_positive &= ok
        rungs.append({
            "rung": i, "support_S": int(S.support.size), "support_T": int(T.support.size), "positive": ok,
            "min_margin": float(min(r.margin for r in res)),
            "tail_certified": all(r.tail_certified for r in res),
        })

    claims = {}
    po = ctx.pole(lam0)
    claims["simple_pole"] = Claim(po.order == 1, {"pole_order": po.order, "alg_mult": po.alg_mult})
    ep = spectral.eigen_pair(ctx.A, lam0, tol)
    P = np.real(ctx.projection(lam0))
    pfloor = tol.pos_floor(P)
    pmin = float(np.min(P))
    claims["projection_positive"] = Claim(bool(pmin >= -pfloor and pmin > pfloor), {
        "min_entry": pmin, "nonnegative": bool(pmin >= -pfloor), "strictly_positive": bool(pmin > pfloor),
    })
    x, psi = oriented_pair(np.real(ep.x), np.real(ep.psi), BandProjection.full(n), np.ones(n), tol)
    xmin = float(np.min(x) / np.max(np.abs(x)))
    claims["kernel_quasi_interior"] = Claim(bool(ep.geo_mult == 1 and xmin > tol.eps_pos), {
        "geo_mult": ep.geo_mult, "min_x": xmin,
        # positivity of the left eigenvector is not implied; reported only
        "min_psi": float(np.min(psi) / np.max(np.abs(psi))),
    })
    is_top = abs(lam0 - ctx.s) <= tol.tol_cluster * max(spectral.norm(ctx.A), 1.0)
    gap = ctx.data.gap if is_top else 0.0
    claims["operator_norm_convergence"] = _convergence_claim(ctx, P, lam0, gap)
    periph = spectral.peripheral_spectrum(ctx.A, tol=tol)
    orders = {repr(complex(z)): ctx.pole(z).order for z in periph}
    top_order = ctx.pole(ctx.s).order
    claims["peripheral_orders"] = Claim(all(o <= top_order for o in orders.values()),
                                        {"orders": orders, "order_at_s": top_order})

    direct = ("simple_pole", "projection_positive", "kernel_quasi_interior")
    falsified = rungs_positive and not all(claims[k].passed for k in direct)
    return LadderReport(float(lam0), tuple(rungs), bool(rungs_positive), claims, bool(falsified))


@dataclass(frozen=True)
class SemigroupPositivityReport:
    """Metzler test of ``A`` cross-checked by sampling ``e^{tA}``.

    ``witness`` is the most negative off-diagonal entry ``(i, j, A_ij)``.
    """

    positive: bool
    witness: tuple[int, int, float] | None
    sampled_min: float
    sample_times: tuple[float, ...]

    def to_dict(self) -> dict:
        return _jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})


def semigroup_positivity(A, tol: Tolerances | None = None) -> SemigroupPositivityReport:
    """Metzler criterion with a negative-entry witness and an ``expm`` cross-check."""
    tol = resolve(tol)
    A = spectral.as_operator(A)
    n = A.shape[0]
    off = A.copy()
    np.fill_diagonal(off, np.inf)
    k = np.unravel_index(int(np.argmin(off)), off.shape) if n > 1 else None
    low = float(off[k]) if k is not None else math.inf
    metzler = low >= -tol.eps_pos
    scale = max(spectral.norm(A), 1.0)
    ts = tuple((np.geomspace(1e-3, 1.0, 7) / scale).tolist())
    sampled = math.inf
    sampled_neg = False
    for t in ts:
        E = evolution.expm(A, t)
        sampled = min(sampled, float(np.min(E)))
        sampled_neg |= bool(np.min(E) < -tol.pos_floor(E))
    if metzler and sampled_neg:
        raise NumericalFailure("Metzler matrix produced a negative exponential", {"sampled_min": sampled})
    witness = None if metzler or k is None else (int(k[0]), int(k[1]), low)
    return SemigroupPositivityReport(bool(metzler), witness, sampled, ts)


def is_positive_semigroup(A, tol: Tolerances | None = None) -> bool:
    """True iff ``e^{tA} >= 0`` for all ``t >= 0``, i.e. ``A`` is Metzler."""
    return semigroup_positivity(A, tol).positive
