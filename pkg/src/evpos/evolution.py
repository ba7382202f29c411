"""Resolvents, matrix exponentials and the Laplace transform linking them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from . import spectral
from .errors import NumericalFailure, PreconditionError, SpectrumError
from .lattice import BandProjection
from .tolerances import Tolerances, resolve

__all__ = [
    "DecayBound",
    "LaplaceResult",
    "Trajectory",
    "decay_bound",
    "expm",
    "growth_constant",
    "laplace_transform",
    "log_norm_inf",
    "resolvent_apply",
    "resolvent_matrix",
    "sample_trajectory",
    "semigroup_apply",
]

_EPS = np.finfo(float).eps
_OVERFLOW_EXPONENT = 700.0


def _shifted(A, lam):
    n = A.shape[0]
    dtype = complex if np.iscomplexobj(lam) or isinstance(lam, complex) else float
    M = -np.asarray(A, dtype=dtype)
    M[np.diag_indices(n)] += lam
    return M


def _solve_shifted(A, lam, rhs, spectrum, tol):
    A = spectral.as_operator(A)
    scale = max(spectral.norm(A), 1.0)
    if spectrum is not None:
        d = float(np.min(np.abs(np.asarray(spectrum) - lam)))
        if d <= tol.tol_sing * scale:
            raise SpectrumError(f"lambda={lam} lies in the spectrum (distance {d:.3g})")
    M = _shifted(A, lam)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu, piv = sla.lu_factor(M, check_finite=False)
        except (sla.LinAlgWarning, np.linalg.LinAlgError, ValueError) as exc:
            raise SpectrumError(f"lambda={lam} is numerically in the spectrum: {exc}") from exc
    if np.any(np.diag(lu) == 0):
        raise SpectrumError(f"lambda={lam} is an eigenvalue (singular factorization)")
    gecon = sla.get_lapack_funcs("gecon", (lu,))
    anorm = float(np.max(np.sum(np.abs(M), axis=0)))
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond <= 4 * _EPS:
        raise SpectrumError(f"lambda={lam} is numerically in the spectrum (rcond={rcond:.2e})")
    g = sla.lu_solve((lu, piv), rhs, check_finite=False)
    resid = np.max(np.abs(M @ g - rhs))
    bound = 1e3 * _EPS * (anorm * np.max(np.abs(g)) + np.max(np.abs(rhs)))
    if resid > bound:
        raise NumericalFailure("resolvent residual too large", {"residual": float(resid), "bound": float(bound)})
    if rcond < _REFINE_RCOND:
        g = _refine(A, lam, (lu, piv), rhs, g)
    return g


_REFINE_RCOND = 1e-6


def _refine(A, lam, factors, rhs, g, steps=2):
    """Iterative refinement with residuals in extended precision.

    A backward-stable solve leaves a forward error of order ``eps * cond``,
    and on stiff generators (``||A||`` near 1e10) forming ``lam - A`` in
    double already rounds the shift away. The residual is therefore built
    from ``A`` and ``lam`` directly in extended precision.
    """
    cplx = np.iscomplexobj(g) or isinstance(lam, complex) or np.iscomplexobj(lam)
    wide = np.clongdouble if cplx else np.longdouble
    Mw = -A.astype(wide)
    Mw[np.diag_indices(A.shape[0])] += wide(lam)
    bw = np.asarray(rhs).astype(wide)
    for _ in range(steps):
        r = bw - Mw @ g.astype(wide)
        g = g + sla.lu_solve(factors, r.astype(complex if cplx else float), check_finite=False)
    return g


def resolvent_apply(A, lam, f, tol: Tolerances | None = None, spectrum=None):
    """``R(lam, A) f = (lam - A)^{-1} f`` for a vector or a column panel ``f``.

    ``spectrum`` (computed eigenvalues) enables the distance check; without
    it singularity is detected from the LU condition estimate.
    """
    tol = resolve(tol)
    return _solve_shifted(A, lam, np.asarray(f), spectrum, tol)


def resolvent_matrix(A, lam, tol: Tolerances | None = None, spectrum=None) -> np.ndarray:
    tol = resolve(tol)
    n = np.asarray(A).shape[0]
    return _solve_shifted(A, lam, np.eye(n), spectrum, tol)


def log_norm_inf(A) -> float:
    """Logarithmic infinity-norm ``max_i (a_ii + sum_{j != i} |a_ij|)``; bounds ``||e^{tA}||_inf <= e^{t mu}``."""
    A = np.asarray(A, dtype=float)
    d = np.diag(A)
    off = np.sum(np.abs(A), axis=1) - np.abs(d)
    return float(np.max(d + off))


def expm(A, t: float = 1.0, s: float | None = None) -> np.ndarray:
    """``e^{tA}`` by scaling and squaring with a diagonal Pade approximant.

    Refuses when ``t * s(A) > 700``. ``s`` may be supplied to skip the
    eigenvalue computation; it is only needed when the logarithmic norm does
    not already rule out overflow.
    """
    A = spectral.as_operator(A)
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise PreconditionError("t must be finite and >= 0")
    if t == 0.0:
        return np.eye(A.shape[0])
    if t * log_norm_inf(A) > _OVERFLOW_EXPONENT:
        if s is None:
            s = spectral.spectral_bound(A)
        if t * s > _OVERFLOW_EXPONENT:
            raise NumericalFailure(
                "e^{tA} overflows; rescale the generator by its spectral bound first",
                {"t": t, "spectral_bound": s},
            )
    E = sla.expm(t * A)
    if not np.all(np.isfinite(E)):
        raise NumericalFailure("e^{tA} is not finite; rescale by the spectral bound", {"t": t})
    return E


def semigroup_apply(A, t: float, f, s: float | None = None) -> np.ndarray:
    """``e^{tA} f``; with ``s`` given, evaluated as ``e^{st} e^{t(A - s)} f``."""
    A = spectral.as_operator(A)
    f = np.asarray(f, dtype=float)
    if s is None:
        return expm(A, t) @ f
    E = expm(A - s * np.eye(A.shape[0]), t, s=0.0)
    return math.exp(s * t) * (E @ f)


class Trajectory(NamedTuple):
    times: np.ndarray
    states: np.ndarray


def _check_grid(grid):
    g = np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0 or np.any(g < 0) or np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
        raise PreconditionError("time grid must be non-empty, finite, nonnegative and strictly increasing")
    return g


def propagators(A, grid, s: float | None = None):
    """Yield ``(t, e^{tA})`` along ``grid``; doubling steps reuse a squaring."""
    A = spectral.as_operator(A)
    prev_t, prev_E = None, None
    for t in _check_grid(grid):
        if prev_t is not None and prev_t > 0 and t == 2 * prev_t:
            E = prev_E @ prev_E
        else:
            E = expm(A, t, s=s)
        prev_t, prev_E = t, E
        yield t, E


def sample_trajectory(A, f, grid, post_map: BandProjection | None = None, s: float | None = None) -> Trajectory:
    """States ``post_map(e^{t_k A} f)`` on every grid node."""
    f = np.asarray(f, dtype=float)
    times, states = [], []
    for t, E in propagators(A, grid, s=s):
        v = E @ f
        if post_map is not None:
            v = post_map(v)
        times.append(t)
        states.append(v)
    return Trajectory(np.array(times), np.array(states))


@dataclass(frozen=True)
class DecayBound:
    """Certified decay of ``e^{tB}(I - P)`` with ``B = A - shift``.

    Two constructions are available. ``eigenbasis`` (diagonalizable ``A``
    with a well-conditioned eigenvector matrix ``V``) gives the entrywise
    bound ``|e^{tB}(I-P)|_{ij} <= sum_k |V_ik| |W_kj| e^{-g_k t}`` with
    ``W = V^{-1}`` and per-mode rates ``g_k``, plus a slack term covering the
    backward error of the eigendecomposition. ``stepping`` (any ``A``)
    finds ``tau`` with ``q = ||e^{tau B}(I-P)||_inf <= 1/2``; with
    ``K = sup_{0<=t<=tau} ||e^{tB}(I-P)||_inf`` (bounded through the
    logarithmic norm between sample points) one has
    ``||e^{tB}(I-P)||_inf <= K q^{floor(t/tau)}``.
    """

    method: str
    shift: float
    rate: float
    V: np.ndarray | None = None
    W: np.ndarray | None = None
    modes: np.ndarray | None = None
    K: float = float("nan")
    q: float = float("nan")
    tau: float = float("nan")
    slack: float = 0.0

    @property
    def mode_rates(self):
        return self.shift - self.modes.real

    @staticmethod
    def _sup(g):
        g = np.abs(np.asarray(g))
        return g.max(axis=0) if g.size else np.zeros(g.shape[1:])

    def envelope(self, g, t: float, state=None) -> np.ndarray:
        """Entrywise bound on ``|e^{r B}(I-P) g|`` valid for every ``r >= t``.

        ``g`` may be a vector or a matrix of columns. The stepping
        construction needs ``state = e^{tB}(I-P) g``.
        """
        g = np.asarray(g, dtype=float)
        if self.method == "eigenbasis":
            decay = np.exp(-self.mode_rates * t)
            coeff = np.abs(self.W @ g) * (decay if g.ndim == 1 else decay[:, None])
            return np.abs(self.V) @ coeff + self.slack * self._sup(g) * math.exp(-self.rate * t)
        if state is None:
            raise PreconditionError("stepping envelope needs the propagated state")
        return np.broadcast_to(self.K * self._sup(state), g.shape).copy()

    def entry_bound(self, t: float, rows=None, cols=None) -> np.ndarray | float:
        """Bound on ``|e^{tB}(I-P)|`` entrywise (array) or in the inf-norm (float)."""
        if self.method == "eigenbasis":
            V = np.abs(self.V if rows is None else self.V[rows])
            W = np.abs(self.W if cols is None else self.W[:, cols])
            return (V * np.exp(-self.mode_rates * t)) @ W + self.slack * math.exp(-self.rate * t)
        return self.K * self.q ** math.floor(t / self.tau)

    def resolvent_tail(self, g, lam0: float, delta: float, side: str = "right"):
        """Entrywise bound on ``|(lam - lam0) R(lam, A)(I - P) g|`` for ``0 < |lam - lam0| <= delta``.

        Returns ``None`` when the construction does not cover the requested
        side (stepping bounds only reach ``lam > shift``).
        """
        g = np.asarray(g, dtype=float)
        if self.method == "eigenbasis":
            dist = np.abs(self.modes - lam0) - delta
            if dist.size and np.min(dist) <= 0:
                return None
            inv = 1.0 / dist if g.ndim == 1 else (1.0 / dist)[:, None]
            main = np.abs(self.V) @ (np.abs(self.W @ g) * inv)
            floor = np.min(dist) if dist.size else np.inf
            return delta * (main + self.slack * self._sup(g) / floor)
        if side != "right" or lam0 < self.shift:
            return None
        # ||R(lam)(I-P)|| <= int_0^inf e^{-(lam-s)t} K q^{floor(t/tau)} dt <= K tau / (1 - q)
        bound = delta * self.K * self.tau / (1.0 - self.q) * self._sup(g)
        return np.broadcast_to(bound, g.shape).copy()


def _eigenbasis_bound(A, s, center, tol, decaying=True):
    n = A.shape[0]
    if np.array_equal(A, A.T):
        w, V = np.linalg.eigh(A)
        w = w.astype(complex)
        W = V.T
    else:
        w, V = np.linalg.eig(A)
        try:
            W = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            return None
    kappa = np.linalg.norm(V, np.inf) * np.linalg.norm(W, np.inf)
    if not np.isfinite(kappa) or kappa > 1e10:
        return None
    recon = np.max(np.abs((V * w) @ W - A))
    if recon > 1e-9 * max(spectral.norm(A), 1.0):
        return None
    top = min(spectral.spectrum_clusters(A, tol), key=lambda c: abs(c.center - center))
    keep = np.abs(w - top.center) > top.radius
    rates = s - w.real[keep]
    if decaying and rates.size and np.min(rates) <= 0:
        return None
    Vk = V[:, keep]
    Wk = W[keep, :]
    rate = float(np.min(rates)) if rates.size else float("inf")
    # first-order effect of the eigendecomposition's backward error
    gaps = np.abs(w[keep] - top.center)
    sep = max(float(np.min(gaps)) if gaps.size else 1.0, _EPS * max(spectral.norm(A), 1.0))
    slack = kappa * (1e3 * _EPS + n * recon / sep)
    return DecayBound("eigenbasis", s, rate, V=Vk, W=Wk, modes=w[keep], slack=slack)


def _stepping_bound(A, s, P, max_steps=20000):
    n = A.shape[0]
    B = A - s * np.eye(n)
    mu = log_norm_inf(B)
    Q = np.eye(n) - (P if P is not None else 0.0)
    if mu > 0:
        delta = 1.0 / mu
    else:
        delta = 1.0 / max(spectral.norm(B), 1.0)
    E = sla.expm(delta * B)
    M = Q.copy()
    peak = float(np.linalg.norm(M, np.inf))
    for j in range(1, max_steps + 1):
        M = E @ M
        nrm = float(np.linalg.norm(M, np.inf))
        if not np.isfinite(nrm):
            return None
        peak = max(peak, nrm)
        if nrm <= 0.5:
            q = max(nrm, _EPS)
            tau = j * delta
            K = math.exp(delta * max(mu, 0.0)) * peak
            return DecayBound("stepping", s, math.log(1.0 / q) / tau, K=K, q=q, tau=tau)
    return None


def decay_bound(A, s: float, P=None, center=None, tol: Tolerances | None = None,
                decaying: bool = True) -> DecayBound | None:
    """Certified decay of the semigroup off the spectral subspace of ``center``.

    ``P`` is the spectral projection at ``center`` (default ``s``); pass
    ``P=None`` with ``center=None`` only for the plain growth estimate.
    With ``decaying=False`` only the eigenbasis construction is tried and
    modes to the right of ``s`` are allowed: the result then serves
    :meth:`DecayBound.resolvent_tail` but not the time envelopes.
    Returns ``None`` when no construction succeeds.
    """
    A = spectral.as_operator(A)
    center = s if center is None else center
    b = _eigenbasis_bound(A, s, center, resolve(tol), decaying) if P is not None else None
    if b is not None or not decaying:
        return b
    return _stepping_bound(A, s, P)


def growth_constant(A, omega: float) -> tuple[float, float]:
    """Return ``(M, omega')`` with ``||e^{tA}||_inf <= M e^{omega' t}`` for all ``t >= 0``.

    Tries the eigenbasis (``omega' = s(A)``) first and falls back to the
    stepping bound for ``A - omega``.
    """
    A = spectral.as_operator(A)
    w, V = np.linalg.eig(A)
    s = float(np.max(w.real))
    try:
        W = np.linalg.inv(V)
        kappa = np.linalg.norm(V, np.inf) * np.linalg.norm(W, np.inf)
        recon = np.max(np.abs((V * w) @ W - A))
        if np.isfinite(kappa) and kappa < 1e10 and recon <= 1e-9 * max(spectral.norm(A), 1.0):
            return float(kappa) * (1 + 1e3 * _EPS * kappa), s
    except np.linalg.LinAlgError:
        pass
    b = _stepping_bound(A, omega, None)
    if b is None:
        raise NumericalFailure("could not bound the growth of e^{tA}", {"omega": omega})
    # ||e^{t(A-omega)}|| <= K q^{floor(t/tau)} <= K
    return b.K, omega


class LaplaceResult(NamedTuple):
    value: np.ndarray
    error: float
    horizon: float
    panels: int


_GL_X, _GL_W = np.polynomial.legendre.leggauss(15)


def laplace_transform(A, lam, f, tol_quad: float | None = None, margin: float | None = None,
                      tol: Tolerances | None = None, max_panels: int = 4000) -> LaplaceResult:
    """``int_0^inf e^{-lam t} e^{tA} f dt`` by adaptive Gauss-Legendre panels (``f`` may hold columns).

    The integral is truncated at a horizon ``T`` where an analytic tail bound
    ``M ||f|| e^{(omega - Re lam) T} / (Re lam - omega)`` drops below
    ``tol_quad``; the returned error adds that bound to the panel estimates.
    """
    tol = resolve(tol)
    tq = tol.tol_quad if tol_quad is None else float(tol_quad)
    A = spectral.as_operator(A)
    f = np.asarray(f, dtype=float)
    s = spectral.spectral_bound(A, tol)
    marg = 0.1 * (1 + abs(s)) if margin is None else float(margin)
    re = float(np.real(lam))
    if re <= s + marg:
        raise PreconditionError(f"Re lambda={re} must exceed s(A) + margin = {s + marg}")
    fn = float(np.max(np.abs(f))) if f.size else 0.0
    is_complex = isinstance(lam, complex) or np.iscomplexobj(lam)
    if fn == 0.0:
        return LaplaceResult(np.zeros_like(f, dtype=complex if is_complex else float), 0.0, 0.0, 0)
    M, omega = growth_constant(A, s + (re - s) / 2)
    decay = re - omega
    T = max(math.log(max(10 * M * fn / (tq * decay), 1.0 + 1e-12)) / decay, 1.0 / decay)

    def integrand(ts):
        out = []
        for t in ts:
            v = expm(A, t, s=s) @ f
            out.append(np.exp(-lam * t) * v)
        return np.array(out)

    def gauss(a, b):
        x = 0.5 * (b - a) * _GL_X + 0.5 * (b + a)
        return 0.5 * (b - a) * np.tensordot(_GL_W, integrand(x), axes=1)

    # graded start: fast modes live on the scale 1/||A||
    t_min = min(T, 1.0 / max(spectral.norm(A), 1.0))
    edges = [0.0]
    t = t_min
    while t < T:
        edges.append(t)
        t *= 4.0
    edges.append(T)
    stack = [(a, b, gauss(a, b)) for a, b in zip(edges[:-1], edges[1:])]
    total = np.zeros(f.shape, dtype=complex if is_complex else float)
    err = 0.0
    panels = 0
    while stack:
        a, b, whole = stack.pop()
        m = 0.5 * (a + b)
        left, right = gauss(a, m), gauss(m, b)
        diff = float(np.max(np.abs(left + right - whole)))
        panels += 1
        if diff <= tq * (b - a) / T or panels > max_panels:
            total = total + left + right
            err += diff
        else:
            stack.append((a, m, left))
            stack.append((m, b, right))
    if panels > max_panels:
        raise NumericalFailure("Laplace quadrature exceeded its panel budget", {"panels": panels})
    tail = M * fn * math.exp(-decay * T) / decay
    return LaplaceResult(total, err + tail, T, panels)
