"""Sufficient conditions for local eventual positivity, checked on a matrix."""
from __future__ import annotations

import math

import numpy as np

from .. import spectral
from ..errors import PreconditionError
from ..tolerances import Tolerances, resolve
from ._core import (
    Certificate,
    SpectralContext,
    as_mask,
    as_weight,
    column_margins,
    make_certificate,
    oriented_pair,
    projection_lower_bound,
    rectangle,
)

__all__ = ["certify_individual", "certify_uniform", "eigen_hypotheses", "predict_uniform_t0"]


def _real_eigenvalue(A, lam0, tol):
    if abs(np.imag(lam0)) > 0:
        raise PreconditionError("a real spectral value is required")
    lam = spectral.snap(A, float(np.real(lam0)), tol)
    if isinstance(lam, complex):
        raise PreconditionError(f"lambda0={lam0} belongs to a non-real eigenvalue cluster")
    return float(lam)


def eigen_hypotheses(A, lam0, S, T, u, phi, tol: Tolerances):
    """Pole, kernel and eigenvector conditions at ``lam0`` plus their witnesses.

    Returns ``(hypotheses, witnesses, x, psi, P)``; ``P`` is ``None`` unless
    the pole is simple.
    """
    po = spectral.pole_order(A, lam0, tol)
    ep = spectral.eigen_pair(A, lam0, tol)
    x, psi = np.real(ep.x), np.real(ep.psi)
    x, psi = oriented_pair(x, psi, S, u, tol)
    c1, f1 = column_margins(S(x), S(u), tol)
    c2, f2 = column_margins(T(psi), T(phi), tol)
    hyp = {
        "simple_pole": po.order == 1,
        "ker_dim_1": ep.geo_mult == 1,
        "Sx_strongly_pos_Su": c1 > f1,
        "Tpsi_strongly_pos_Tphi": c2 > f2,
    }
    wit = {"c1": c1, "c2": c2, "pole_order": po.order, "alg_mult": po.alg_mult, "geo_mult": ep.geo_mult}
    P = None
    if po.order == 1 and po.alg_mult == 1 and ep.simple:
        P = np.outer(x, psi)
        wit["c_proj"] = projection_lower_bound(S, P, T, u, phi, tol).value
    return hyp, wit, x, psi, P


def _gap_at(cl, lam0):
    c = spectral._cluster_of(cl, lam0)
    rest = [o.center.real for o in cl if o is not c]
    return float(lam0 - max(rest)) if rest else math.inf, c


def certify_individual(A, lam0, S=None, T=None, u=None, phi=None, variant: str = "semigroup",
                       tol: Tolerances | None = None) -> Certificate:
    """Check the sufficient conditions for individual local eventual strong positivity.

    ``variant="resolvent"`` checks the conditions for ``S R(., A) T`` at
    ``lam0``; ``"semigroup"`` adds ``kerpsi_decay``: ``lam0 = s(A)``, every
    other eigenvalue has real part below ``lam0`` and the pairing of the
    eigenvectors is non-zero, so that ``e^{t(A - lam0)}`` tends to zero on
    ``ker psi``.
    """
    tol = resolve(tol)
    if variant not in ("semigroup", "resolvent"):
        raise ValueError(f"unknown variant {variant!r}")
    A = spectral.as_operator(A)
    n = A.shape[0]
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u, phi = as_weight(u, n), as_weight(phi, n, "phi")
    rectangle(S, T, u, phi)
    lam0 = _real_eigenvalue(A, lam0, tol)
    hyp, wit, _, _, _ = eigen_hypotheses(A, lam0, S, T, u, phi, tol)
    auto = ["domination"]
    if variant == "semigroup":
        auto.append("smoothing")
        cl = spectral.spectrum_clusters(A, tol)
        gap, c = _gap_at(cl, lam0)
        s = max(o.center.real for o in cl)
        thresh = tol.tol_cluster * max(spectral.norm(A), 1.0)
        ep = spectral.eigen_pair(A, lam0, tol)
        hyp["kerpsi_decay"] = bool(abs(lam0 - s) <= c.radius and gap > thresh and ep.simple)
        wit["gap"] = gap
    for k in auto:
        hyp[k] = True
    kind = f"individual_{variant}"
    return make_certificate(kind, hyp, wit, auto, tol, "certified_individual")


def _mixed_norm(entries, su, tp):
    return float(np.max(entries / np.outer(su, tp)))


def predict_uniform_t0(ctx: SpectralContext, S, T, u, phi, c_proj: float) -> dict:
    """Smallest ``t`` at which the decay bound keeps ``S e^{t(A-s)} T`` above ``(c'/2) Su (x) T'phi``.

    ``c'`` is the projection lower bound. From that time on every ``f > 0``
    satisfies ``S e^{t(A-s)} T f >= (c'/2) <T'phi, f> Su``.
    """
    db = ctx.decay(ctx.s)
    if db is None or not c_proj > 0:
        return {"t0_pred": math.inf, "bound_method": None}
    rows, cols, su, tp = rectangle(S, T, u, phi)

    def excess(t):
        if db.method == "eigenbasis":
            return _mixed_norm(db.entry_bound(t, rows, cols), su, tp)
        return db.entry_bound(t) / (np.min(su) * np.min(tp))

    target = 0.5 * c_proj
    if excess(0.0) <= target:
        return {"t0_pred": 0.0, "bound_method": db.method, "decay_rate": db.rate}
    hi = 1.0 / db.rate if np.isfinite(db.rate) and db.rate > 0 else 1.0
    for _ in range(200):
        if excess(hi) <= target:
            break
        hi *= 2.0
    else:
        return {"t0_pred": math.inf, "bound_method": db.method}
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-6 * hi:
            break
    out = {"t0_pred": hi, "bound_method": db.method, "decay_rate": db.rate}
    if db.method == "eigenbasis":
        out["kappa"] = float(np.linalg.norm(np.abs(db.V), np.inf) * np.linalg.norm(np.abs(db.W), np.inf))
    return out


def certify_uniform(A, S=None, T=None, u=None, phi=None, tol: Tolerances | None = None,
                    context: SpectralContext | None = None) -> Certificate:
    """Check the sufficient conditions for uniform local eventual strong positivity at ``s(A)``.

    Besides the verdict, ``predicted`` holds ``t0_pred``: a time after
    which ``S e^{t(A - s(A))} T >= (c'/2) Su (x) T'phi`` holds entrywise,
    derived from the decay bound off the dominant eigenvector.
    """
    tol = resolve(tol)
    ctx = context or SpectralContext(A, tol)
    A = ctx.A
    n = ctx.n
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u, phi = as_weight(u, n), as_weight(phi, n, "phi")
    rectangle(S, T, u, phi)
    d = ctx.data
    auto = ["norm_continuity_at_infinity", "smoothing", "dual_smoothing"]
    if d.rightmost_is_real:
        hyp, wit, _, _, _ = eigen_hypotheses(A, d.lam0, S, T, u, phi, tol)
    else:
        hyp = dict.fromkeys(["simple_pole", "ker_dim_1", "Sx_strongly_pos_Su", "Tpsi_strongly_pos_Tphi"], False)
        wit = {}
    hyp["dominant"] = bool(d.dominant)
    wit["gap"] = d.gap
    for k in auto:
        hyp[k] = True
    predicted = {}
    if all(hyp.values()):
        predicted = predict_uniform_t0(ctx, S, T, u, phi, wit["c_proj"])
        predicted["c_proj"] = wit["c_proj"]
    return make_certificate("uniform", hyp, wit, auto, tol, "certified_uniform", predicted)
