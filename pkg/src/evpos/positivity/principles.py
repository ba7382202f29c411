"""Uniform anti-maximum and maximum principles near a simple real eigenvalue."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .. import evolution, spectral
from ..errors import PreconditionError
from ..tolerances import Tolerances, resolve
from ._core import (
    Certificate,
    DetectionResult,
    SpectralContext,
    _jsonable,
    as_mask,
    as_weight,
    check_positive_panel,
    f_panel,
    make_certificate,
    rectangle,
)
from .certificates import _real_eigenvalue, eigen_hypotheses

__all__ = ["AntiMaxResult", "anti_maximum", "maximum_principle"]


@dataclass(frozen=True)
class AntiMaxResult:
    """Certificate for the hypotheses plus the detected uniform interval.

    ``probe_bound`` is the smallest ``c`` with ``S R(probe, A) T <= c SPT``
    on the mask rectangle (``nan`` when it does not exist).
    """

    certificate: Certificate
    detection: DetectionResult
    probe_bound: float
    interval: tuple[float, float] | None

    def to_dict(self) -> dict:
        return _jsonable({
            "certificate": self.certificate.to_dict(),
            "detection": self.detection.to_dict(),
            "probe_bound": self.probe_bound,
            "interval": self.interval,
        })


def _probe_bound(SRT, SPT, tol):
    """Smallest ``c`` with ``SRT <= c SPT`` entrywise, or ``nan`` if none exists."""
    floor_p = tol.eps_pos * (1.0 + float(np.max(np.abs(SPT))))
    floor_r = tol.eps_pos * (1.0 + float(np.max(np.abs(SRT))))
    pos = SPT > floor_p
    if np.any(~pos & (SRT > floor_r)):
        return math.nan
    return float(np.max(SRT[pos] / SPT[pos])) if np.any(pos) else 0.0


def _block(A, lam, rows, cols, tol, w):
    rhs = np.zeros((A.shape[0], cols.size))
    rhs[cols, np.arange(cols.size)] = 1.0
    return evolution.resolvent_apply(A, lam, rhs, tol, spectrum=w)[rows]


def anti_maximum(A, lam0, S=None, T=None, u=None, phi=None, probe=None, F=None, K: int = 20,
                 tol: Tolerances | None = None, context: SpectralContext | None = None,
                 bisect_steps: int = 30) -> AntiMaxResult:
    """Verify uniform eventual strong negativity of ``S R(lambda, A) T`` left of ``lam0``.

    Checks the pole, kernel and eigenvector hypotheses, bounds
    ``S R(probe, A) T`` by a multiple of ``SPT``, then searches the ladder
    ``lam0 - (lam0 - probe) 2^{-k}`` for the farthest node ``lambda2`` such
    that ``(lambda - lam0) S R(lambda, A) T >= c Su (x) T'phi`` holds at
    every node in ``[lambda2, lam0)``; the gap between the first failing and
    first passing node is refined by bisection. Per-``f`` constants are
    reported for the panel ``F``. The region closer to ``lam0`` than the
    last node is covered by the resolvent bound off the eigenvector.
    """
    tol = resolve(tol)
    ctx = context or SpectralContext(A, tol)
    A = ctx.A
    n = ctx.n
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u, phi = as_weight(u, n), as_weight(phi, n, "phi")
    rows, cols, su, tp = rectangle(S, T, u, phi)
    lam0 = _real_eigenvalue(A, lam0, tol)
    if probe is None:
        raise PreconditionError("a probe point left of lambda0 is required")
    probe = float(probe)
    if not probe < lam0:
        raise PreconditionError(f"probe={probe} must lie left of lambda0={lam0}")
    w = ctx.data.spectrum
    F = f_panel(n, T, 10, seed=0) if F is None else check_positive_panel(F)

    hyp, wit, _, _, P = eigen_hypotheses(A, lam0, S, T, u, phi, tol)
    auto = ["domination_S", "domination_T"]
    for k in auto:
        hyp[k] = True
    extra_failed = []
    R_probe = _block(A, probe, rows, cols, tol, w)
    cbound = math.nan
    weight = np.outer(su, tp)
    samples, per_f, lam2, tail_ok, tail_m, limit_m = [], None, None, False, None, None
    lams = lam0 - (lam0 - probe) * 2.0 ** -np.arange(K + 1)
    if P is not None:
        SPT = P[np.ix_(rows, cols)]
        cbound = _probe_bound(R_probe, SPT, tol)
        if math.isnan(cbound):
            extra_failed.append("probe_bound_fail")
        limit_m = float(np.min(SPT / weight))

        def matrix_margin(lam):
            M = (lam - lam0) * _block(A, lam, rows, cols, tol, w)
            floor = tol.eps_pos * (1.0 + float(np.max(np.abs(M))))
            return float(np.min(M / weight)), floor, M

        blocks = []
        ok = np.zeros(lams.size, dtype=bool)
        for i, lam in enumerate(lams):
            c, floor, M = matrix_margin(lam)
            samples.append((float(lam), c))
            blocks.append(M)
            ok[i] = c > floor
        bad = np.flatnonzero(~ok)
        kstar = None if not ok[-1] else (int(bad[-1]) + 1 if bad.size else 0)
        if kstar is not None:
            lam2 = float(lams[kstar])
            verified = list(blocks[kstar:])
            if kstar > 0:
                lo, hi = float(lams[kstar - 1]), lam2
                for _ in range(bisect_steps):
                    mid = 0.5 * (lo + hi)
                    c, floor, M = matrix_margin(mid)
                    if c > floor:
                        hi = mid
                        verified.append(M)
                        samples.append((mid, c))
                    else:
                        lo = mid
                lam2 = hi
            Fc = F[cols]
            su_col = su[:, None]
            per_f = np.min(np.array([np.min((M @ Fc) / su_col, axis=0) for M in verified]), axis=0)
            db = ctx.decay(lam0)
            delta = lam0 - float(lams[-1])
            bound = None
            if db is not None:
                eye = np.zeros((n, cols.size))
                eye[cols, np.arange(cols.size)] = 1.0
                full = db.resolvent_tail(eye, lam0, delta, "left")
                bound = None if full is None else full[rows]
            if bound is not None:
                tail_m = float(np.min((SPT - bound) / weight))
                tail_ok = tail_m > tol.eps_pos * (1.0 + float(np.max(np.abs(SPT))))
        else:
            extra_failed.append("no_interval")
    cert = make_certificate("anti_maximum", hyp, wit | ({"probe_bound": cbound} if not math.isnan(cbound) else {}),
                            auto, tol, "certified_uniform", extra_failed=extra_failed)
    positive = lam2 is not None
    margin = float(np.min(per_f)) if positive else 0.0
    if positive and not margin > 0:
        positive, margin = False, 0.0
    det = DetectionResult(
        kind="resolvent_left",
        positive=positive,
        threshold=lam2,
        margin=margin,
        samples=tuple(sorted(samples)),
        tail_certified=bool(tail_ok),
        tail_margin=tail_m,
        limit_margin=limit_m,
        extra={"lam0": lam0, "probe": probe, "per_f_margin": [] if per_f is None else per_f.tolist()},
    )
    interval = (lam2, lam0) if positive else None
    return AntiMaxResult(cert, det, cbound, interval)


def maximum_principle(A, lam0, S=None, T=None, u=None, phi=None, probe=None, F=None, K: int = 20,
                      tol: Tolerances | None = None, bisect_steps: int = 30) -> AntiMaxResult:
    """Uniform eventual strong positivity of ``S R(lambda, A) T`` right of ``lam0``.

    Runs :func:`anti_maximum` on ``-A`` at ``-lam0`` with probe ``-probe``
    and maps the parameter axis back.
    """
    if probe is None:
        raise PreconditionError("a probe point right of lambda0 is required")
    A = spectral.as_operator(A)
    r = anti_maximum(-A, -float(np.real(lam0)), S, T, u, phi, -float(probe), F, K, tol, None, bisect_steps)
    d = r.detection
    det = replace(
        d,
        kind="resolvent_right",
        threshold=None if d.threshold is None else -d.threshold,
        samples=tuple(sorted((-lam, m) for lam, m in d.samples)),
        extra=d.extra | {"lam0": -d.extra["lam0"], "probe": -d.extra["probe"]},
    )
    cert = replace(r.certificate, kind="maximum_principle")
    interval = None if r.interval is None else (-r.interval[1], -r.interval[0])
    return AntiMaxResult(cert, det, r.probe_bound, interval)
