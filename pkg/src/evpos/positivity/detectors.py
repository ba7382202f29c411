"""Empirical detection of eventual positivity along time and resolvent ladders.

Sampling alone never sets ``tail_certified``: the region beyond the last
sample (``t`` past the grid, or ``lambda`` closer to ``lambda0`` than the
ladder) is covered by an analytic bound from :mod:`evpos.evolution`.
"""
from __future__ import annotations

import math

import numpy as np

from .. import evolution, spectral
from ..errors import PreconditionError, SpectrumError
from ..tolerances import Tolerances, resolve
from ._core import (
    DetectionResult,
    SpectralContext,
    as_mask,
    as_weight,
    check_positive_panel,
    column_margins,
)

__all__ = [
    "default_time_grid",
    "detect_resolvent_interval",
    "detect_semigroup_t0",
    "resolvent_ladder",
    "resolvent_scan",
    "semigroup_scan",
]


def default_time_grid(scale: float, nodes: int = 64, span=(1e-3, 50.0)) -> np.ndarray:
    """Geometric grid over ``span / scale``."""
    return np.geomspace(span[0] / scale, span[1] / scale, nodes)


def _first_stable(ok):
    """Smallest index from which every entry of ``ok`` is true, or ``None``."""
    if not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    return int(bad[-1]) + 1 if bad.size else 0


def semigroup_scan(A, S, T, u, F, grid=None, require_tail: bool = True, tol: Tolerances | None = None,
                   context: SpectralContext | None = None, extra_times=()) -> list[DetectionResult]:
    """Run :func:`detect_semigroup_t0` for every column of ``F`` sharing the propagators.

    Works with the rescaled semigroup ``e^{t(A - s(A))}``, whose positivity
    is that of ``e^{tA}``; reported margins are those of the rescaled orbit.
    """
    tol = resolve(tol)
    ctx = context or SpectralContext(A, tol)
    n = ctx.n
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u = as_weight(u, n)
    F = check_positive_panel(F)
    if F.shape[0] != n:
        raise PreconditionError(f"f has dimension {F.shape[0]}, operator has {n}")
    if grid is None:
        grid = default_time_grid(ctx.time_scale())
    grid = np.unique(np.concatenate([np.asarray(grid, dtype=float), np.asarray(extra_times, dtype=float)]))
    grid = grid[np.isfinite(grid)]
    B = ctx.A - ctx.s * np.eye(n)
    Su = S(u)
    TF = T(F)
    k = F.shape[1]
    margins = np.empty((grid.size, k))
    floors = np.empty((grid.size, k))
    lows = np.empty((grid.size, k))
    on = S.mask
    E_last = None
    for i, (t, E) in enumerate(evolution.propagators(B, grid, s=0.0)):
        V = S(E @ TF)
        margins[i], floors[i] = column_margins(V, Su, tol)
        lows[i] = np.min(V[on], axis=0)
        E_last = E
    ok = margins > floors

    tail_ok = np.zeros(k, dtype=bool)
    tail_m = np.full(k, np.nan)
    limit_m = np.full(k, np.nan)
    notes = []
    if require_tail:
        if not ctx.simple_dominant:
            notes.append("tail not certifiable: s(A) is not a dominant simple pole")
        else:
            P = ctx.projection(ctx.s)
            db = ctx.decay(ctx.s)
            SPTF = S(P @ TF)
            limit_m, _ = column_margins(SPTF, Su, tol)
            if db is None:
                notes.append("tail not certifiable: no decay bound")
            else:
                state = E_last @ (TF - P @ TF) if db.method == "stepping" else None
                env = db.envelope(TF, float(grid[-1]), state=state)
                tail_m, tail_floor = column_margins(SPTF - env, Su, tol)
                tail_ok = tail_m > tail_floor

    out = []
    for c in range(k):
        i0 = _first_stable(ok[:, c])
        samples = tuple((float(t), float(m)) for t, m in zip(grid, margins[:, c]))
        extra = {"min_masked_value": lows[:, c].tolist(), "floors": floors[:, c].tolist(), "times": grid.tolist()}
        if i0 is None:
            out.append(DetectionResult("semigroup_t0", False, None, 0.0, samples, False,
                                       None if math.isnan(tail_m[c]) else float(tail_m[c]),
                                       None if math.isnan(limit_m[c]) else float(limit_m[c]),
                                       extra, tuple(notes)))
            continue
        m = float(np.min(margins[i0:, c]))
        out.append(DetectionResult(
            "semigroup_t0", True, float(grid[i0]), m, samples, bool(tail_ok[c]),
            None if math.isnan(tail_m[c]) else float(tail_m[c]),
            None if math.isnan(limit_m[c]) else float(limit_m[c]),
            extra, tuple(notes),
        ))
    return out


def detect_semigroup_t0(A, S=None, T=None, u=None, f=None, grid=None, require_tail: bool = True,
                        tol: Tolerances | None = None, context: SpectralContext | None = None,
                        extra_times=()) -> DetectionResult:
    """Smallest grid time after which ``S e^{tA} T f >>_{Su} 0`` at every sample.

    With ``require_tail`` the times beyond the grid are certified from the
    limit ``S P T f`` and the decay bound of ``e^{t(A - s)}(I - P)``.
    """
    if f is None:
        raise PreconditionError("f is required")
    return semigroup_scan(A, S, T, u, np.asarray(f, dtype=float)[:, None], grid, require_tail, tol,
                          context, extra_times)[0]


def resolvent_ladder(lam0: float, reach: float, side: str, K: int = 20) -> np.ndarray:
    """``lam0 +- reach 2^{-k}``, k = 0..K (farthest first)."""
    if side not in ("right", "left"):
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")
    sign = 1.0 if side == "right" else -1.0
    return lam0 + sign * reach * 2.0 ** -np.arange(K + 1)


def _solve_all(ctx, lams, rhs, tol, notes):
    w = ctx.data.spectrum
    out = []
    for lam in lams:
        try:
            out.append(evolution.resolvent_apply(ctx.A, lam, rhs, tol, spectrum=w))
        except SpectrumError as exc:
            notes.append(f"skipped lambda={lam!r}: {exc}")
            out.append(None)
    return out


def resolvent_scan(A, lam0, S, T, u, F, side: str = "right", K: int = 20, tol: Tolerances | None = None,
                   context: SpectralContext | None = None, reach: float | None = None) -> list[DetectionResult]:
    """Run :func:`detect_resolvent_interval` for every column of ``F`` sharing the solves."""
    tol = resolve(tol)
    ctx = context or SpectralContext(A, tol)
    n = ctx.n
    S, T = as_mask(S, n), as_mask(T, n, "T")
    u = as_weight(u, n)
    F = check_positive_panel(F)
    lam0 = spectral.snap(ctx.A, lam0, tol)
    if isinstance(lam0, complex):
        raise PreconditionError("resolvent scans need a real lambda0")
    d = ctx.isolation(lam0)
    if reach is None:
        reach = 0.5 * (d if np.isfinite(d) else max(1.0, abs(lam0)))
    lams = resolvent_ladder(lam0, reach, side, K)
    sign = 1.0 if side == "right" else -1.0
    Su = S(u)
    TF = T(F)
    k = F.shape[1]
    notes = []
    sols = _solve_all(ctx, lams, TF, tol, notes)
    raw = np.full((lams.size, k), np.nan)
    scaled = np.full((lams.size, k), np.nan)
    ok = np.zeros((lams.size, k), dtype=bool)
    for i, (lam, G) in enumerate(zip(lams, sols)):
        if G is None:
            continue
        SG = S(G)
        raw[i], _ = column_margins(SG, Su, tol)
        scaled[i], _ = column_margins((lam - lam0) * SG, Su, tol)
        signed, fl = column_margins(sign * SG, Su, tol)
        ok[i] = signed > fl

    # limit region (lam0, lam_K): P T f plus a bound on (lam - lam0) R(lam)(I - P) T f
    tail_ok = np.zeros(k, dtype=bool)
    tail_m = np.full(k, np.nan)
    limit_m = np.full(k, np.nan)
    po = ctx.pole(lam0)
    ep = spectral.eigen_pair(ctx.A, lam0, tol)
    if po.order == 1 and po.alg_mult == 1 and ep.simple:
        P = ctx.projection(lam0)
        SPTF = S(P @ TF)
        limit_m, _ = column_margins(SPTF, Su, tol)
        db = ctx.decay(lam0)
        bound = None if db is None else db.resolvent_tail(TF, lam0, abs(lams[-1] - lam0), side)
        if bound is None:
            notes.append("limit region not certifiable: no resolvent bound on this side")
        else:
            tail_m, tail_floor = column_margins(SPTF - bound, Su, tol)
            tail_ok = tail_m > tail_floor
    else:
        notes.append("limit region not certifiable: lambda0 is not a simple pole")

    kind = "resolvent_right" if side == "right" else "resolvent_left"
    out = []
    for c in range(k):
        # verified range grows outward from the node nearest lam0
        good = ok[::-1, c]
        run = int(np.argmin(good)) if not np.all(good) else good.size
        samples = tuple((float(l), float(m)) for l, m in zip(lams, scaled[:, c]))
        seq = scaled[::-1, c][:run]
        stabilized = bool(run >= 2 and np.all(seq[:-1] >= seq[1:] - 0.1 * np.abs(seq[1:])))
        extra = {
            "lambda": lams.tolist(),
            "margin_raw": raw[:, c].tolist(),
            "margin_scaled": scaled[:, c].tolist(),
            "stabilized": stabilized,
            "lam0": float(lam0),
        }
        tm = None if math.isnan(tail_m[c]) else float(tail_m[c])
        lm = None if math.isnan(limit_m[c]) else float(limit_m[c])
        if run == 0:
            out.append(DetectionResult(kind, False, None, 0.0, samples, False, tm, lm, extra, tuple(notes)))
            continue
        verified = slice(lams.size - run, lams.size)
        m = float(np.min(scaled[verified, c]))
        out.append(DetectionResult(kind, True, float(lams[lams.size - run]), m, samples, bool(tail_ok[c]),
                                   tm, lm, extra, tuple(notes)))
    return out


def detect_resolvent_interval(A, lam0, S=None, T=None, u=None, f=None, side: str = "right", K: int = 20,
                              tol: Tolerances | None = None, context: SpectralContext | None = None) -> DetectionResult:
    """Largest ``lambda1`` with ``+-S R(lambda, A) T f >>_{Su} 0`` on the sampled ladder toward ``lam0``.

    ``side="right"`` tests positivity for ``lambda > lam0``; ``"left"``
    tests negativity for ``lambda < lam0``. The ladder is
    ``lam0 +- (d/2) 2^{-k}``, ``k = 0..K``, with ``d`` the isolation
    distance of ``lam0``. ``margin`` is the infimum over the verified nodes
    of the margin of ``(lambda - lam0) S R(lambda, A) T f`` against ``Su``.
    """
    if f is None:
        raise PreconditionError("f is required")
    return resolvent_scan(A, lam0, S, T, u, np.asarray(f, dtype=float)[:, None], side, K, tol, context)[0]
