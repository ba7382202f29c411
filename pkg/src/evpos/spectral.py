"""Eigenstructure of dense real matrices.

Computed eigenvalues of defective blocks scatter around the true value
(a Jordan block of size m spreads by roughly ``eps**(1/m)``), so every
decision here works on *clusters*: groups of computed eigenvalues whose
condition-weighted error disks overlap. A cluster is represented by its
mean, which is accurate to working precision because the trace is.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, NumericalFailure, PreconditionError
from .tolerances import Tolerances, resolve

__all__ = [
    "Cluster",
    "EigenPair",
    "PoleOrder",
    "SpectralData",
    "analyze",
    "as_operator",
    "clusters",
    "eigen_pair",
    "full_spectrum",
    "isolation_distance",
    "laurent_coefficient",
    "norm",
    "peripheral_spectrum",
    "pole_order",
    "projection_defects",
    "snap",
    "spectrum_clusters",
    "spectral_bound",
    "spectral_projection",
]

_EPS = np.finfo(float).eps


def as_operator(A, name="A") -> np.ndarray:
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise PreconditionError(f"{name} has non-finite entries")
    return M


def norm(A) -> float:
    """Max-row-sum norm, used as the scale for every relative tolerance."""
    return float(np.max(np.sum(np.abs(A), axis=1)))


def _scale(A) -> float:
    return max(norm(A), 1.0)


def _polish(A, w, V, bound, sweeps=3):
    """Inverse iteration on eigenvectors whose residual exceeds ``bound``.

    ``geev`` balances first; on badly scaled near-defective matrices the
    vectors it returns can miss the residual bound by orders of magnitude.
    """
    resid = np.linalg.norm(A @ V - V * w, axis=0)
    bad = np.flatnonzero(resid > bound)
    if bad.size == 0:
        return V
    real = not np.iscomplexobj(V)
    V = V.copy()
    n = A.shape[0]
    for j in bad:
        shift = (w[j].real if real else w[j]) + _EPS * _scale(A)
        v = V[:, j]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            for _ in range(sweeps):
                try:
                    v = sla.solve(A - shift * np.eye(n), v, check_finite=False)
                except (np.linalg.LinAlgError, ValueError):
                    break
                v = v / np.linalg.norm(v)
        if np.all(np.isfinite(v)) and np.linalg.norm(A @ v - w[j] * v) < resid[j]:
            V[:, j] = v
    return V


def _decompose(A, tol):
    n = A.shape[0]
    if n > tol.max_dim:
        raise PreconditionError(f"dimension {n} exceeds the dense eigensolver cap {tol.max_dim}")
    try:
        w, VL, VR = sla.eig(A, left=True, right=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver did not converge: {exc}") from exc
    VR = VR / np.linalg.norm(VR, axis=0)
    VL = VL / np.linalg.norm(VL, axis=0)
    bound = tol.tol_eig * _scale(A)
    VR = _polish(A, w, VR, bound)
    VL = _polish(A.conj().T, w.conj(), VL, bound)
    resid = np.linalg.norm(A @ VR - VR * w, axis=0)
    if np.any(~np.isfinite(w)) or np.max(resid) > bound:
        raise NumericalFailure(
            "eigenpair backward error exceeds tolerance",
            {"max_residual": float(np.max(resid)), "bound": bound},
        )
    with np.errstate(divide="ignore"):
        cond = 1.0 / np.abs(np.sum(VL.conj() * VR, axis=0))
    for arr in (w, VR, VL, cond):
        arr.setflags(write=False)
    return w, VR, VL, cond


@lru_cache(maxsize=16)
def _decompose_cached(key, shape, tol):
    A = np.frombuffer(key, dtype=float).reshape(shape)
    return _decompose(A, tol)


def _eig(A, tol):
    A = np.ascontiguousarray(A, dtype=float)
    return _decompose_cached(A.tobytes(), A.shape, tol)


def full_spectrum(A, tol: Tolerances | None = None, *, vectors=False):
    """All eigenvalues of ``A`` (with multiplicity), backward-error checked.

    Uses LAPACK ``geev`` with balancing. With ``vectors=True`` the unit-norm
    right eigenvectors are returned as well.
    """
    tol = resolve(tol)
    A = as_operator(A)
    w, V, _, _ = _eig(A, tol)
    return (w.copy(), V.copy()) if vectors else w.copy()


@dataclass(frozen=True)
class Cluster:
    center: complex
    members: np.ndarray
    radius: float

    @property
    def size(self) -> int:
        return int(self.members.size)

    @property
    def is_real(self) -> bool:
        return abs(self.center.imag) <= self.radius


def clusters(w, scale: float, cond=None) -> list[Cluster]:
    """Group computed eigenvalues into numerically indistinguishable clusters.

    Each eigenvalue gets the first-order error radius
    ``64 eps scale cond_i`` (capped at ``1e-6 scale``); eigenvalues whose
    disks overlap, directly or through a chain, form one cluster. Without
    condition numbers every radius is ``64 eps scale``. Sorted by decreasing
    real part, then decreasing imaginary part.
    """
    w = np.asarray(w, dtype=complex)
    base = 64 * _EPS * max(scale, 1.0)
    if cond is None:
        r = np.full(w.size, base)
    else:
        c = np.nan_to_num(np.asarray(cond, dtype=float), nan=np.inf, posinf=np.inf)
        r = np.minimum(base * np.maximum(c, 1.0), 1e-6 * max(scale, 1.0))
    parent = np.arange(w.size)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    dist = np.abs(w[:, None] - w[None, :])
    close = dist <= (r[:, None] + r[None, :])
    for i, j in zip(*np.nonzero(np.triu(close, 1))):
        a, b = find(i), find(j)
        if a != b:
            parent[max(a, b)] = min(a, b)
    roots = np.array([find(i) for i in range(w.size)])
    out = []
    for root in np.unique(roots):
        idx = np.flatnonzero(roots == root)
        center = complex(np.mean(w[idx]))
        radius = float(np.max(np.abs(w[idx] - center) + r[idx]))
        if abs(center.imag) <= radius:
            center = complex(center.real, 0.0)
        out.append(Cluster(center, idx, radius))
    out.sort(key=lambda c: (-c.center.real, -c.center.imag))
    return out


def _rayleigh(A, x, y) -> float:
    # two-sided Rayleigh quotient with extended-precision accumulation; the
    # eigenvector errors enter quadratically, the rounding of A x only at
    # the extended precision
    Al = A.astype(np.longdouble)
    xl, yl = x.astype(np.longdouble), y.astype(np.longdouble)
    return float((yl @ (Al @ xl)) / (yl @ xl))


def spectrum_clusters(A, tol: Tolerances | None = None) -> list[Cluster]:
    """Clusters of the spectrum of ``A`` using eigenvalue condition numbers.

    A rightmost cluster consisting of one real eigenvalue is re-centered on
    the two-sided Rayleigh quotient of its eigenvectors. For stiff matrices
    (``||A||`` far above ``|s(A)|``) this recovers ``s(A)`` to a relative
    accuracy that ``geev`` alone, limited to ``eps ||A||`` absolutely,
    cannot reach.
    """
    tol = resolve(tol)
    A = as_operator(A)
    w, VR, VL, cond = _eig(A, tol)
    cl = clusters(w, norm(A), cond)
    top = cl[0]
    if top.size == 1 and top.center.imag == 0.0:
        k = int(top.members[0])
        x, y = VR[:, k], VL[:, k]
        if np.all(np.imag(x) == 0) and np.all(np.imag(y) == 0):
            rho = _rayleigh(A, np.real(x), np.real(y))
            if abs(rho - top.center.real) <= top.radius:
                cl[0] = Cluster(complex(rho, 0.0), top.members, top.radius)
    return cl


def _cluster_of(cl: list[Cluster], lam0, what="lambda0") -> Cluster:
    d = [abs(c.center - lam0) for c in cl]
    k = int(np.argmin(d))
    c = cl[k]
    if d[k] > max(10 * c.radius, 1e-6 * max(abs(lam0), 1.0)):
        raise PreconditionError(f"{what}={lam0} is not an eigenvalue (nearest {c.center}, distance {d[k]:.3g})")
    return c


def snap(A, lam0, tol: Tolerances | None = None) -> complex:
    """Replace ``lam0`` by the center of the eigenvalue cluster it belongs to."""
    A = as_operator(A)
    cl = spectrum_clusters(A, tol)
    c = _cluster_of(cl, lam0)
    return c.center if c.center.imag != 0.0 else c.center.real


def isolation_distance(A, lam0, tol: Tolerances | None = None) -> float:
    """Distance from the cluster of ``lam0`` to the nearest other eigenvalue cluster."""
    A = as_operator(A)
    cl = spectrum_clusters(A, tol)
    c = _cluster_of(cl, lam0)
    others = [abs(o.center - c.center) for o in cl if o is not c]
    return float(min(others)) if others else float("inf")


def spectral_bound(A, tol: Tolerances | None = None) -> float:
    A = as_operator(A)
    cl = spectrum_clusters(A, tol)
    return float(max(c.center.real for c in cl))


def peripheral_spectrum(A, tol_cluster: float | None = None, tol: Tolerances | None = None) -> np.ndarray:
    """Cluster centers with real part within ``tol_cluster * ||A||`` of ``s(A)``."""
    tol = resolve(tol)
    A = as_operator(A)
    rel = tol.tol_cluster if tol_cluster is None else tol_cluster
    cl = spectrum_clusters(A, tol)
    s = max(c.center.real for c in cl)
    thresh = s - rel * _scale(A)
    return np.array([c.center for c in cl if c.center.real >= thresh], dtype=complex)


class EigenPair(NamedTuple):
    """Right eigenvector ``x`` and left eigenvector ``psi`` at ``lam0``.

    When ``simple`` is true the pair is normalised so ``psi @ x == 1``;
    otherwise both have unit norm and ``pairing`` is (numerically) zero.
    """

    lam0: complex
    x: np.ndarray
    psi: np.ndarray
    pairing: complex
    simple: bool
    geo_mult: int


def _orient(v):
    k = int(np.argmax(np.abs(v)))
    phase = v[k] / abs(v[k])
    v = v / phase
    if np.isrealobj(v) or np.all(v.imag == 0):
        return np.real(v) + 0.0
    return v


def eigen_pair(A, lam0, tol: Tolerances | None = None) -> EigenPair:
    """Null vectors of ``A - lam0`` and of its transpose.

    Both come from one SVD; the largest-modulus entry of ``x`` is made
    positive. A vanishing pairing ``psi @ x`` signals a pole of order >= 2.
    """
    tol = resolve(tol)
    A = as_operator(A)
    lam = snap(A, lam0, tol)
    M = A - lam * np.eye(A.shape[0])
    U, sv, Vh = np.linalg.svd(M)
    thresh = 1024 * _EPS * max(sv[0], 1.0)
    geo = max(1, int(np.count_nonzero(sv <= thresh)))
    x = _orient(Vh[-1].conj())
    psi = U[:, -1].conj()
    if np.iscomplexobj(psi) and np.all(psi.imag == 0):
        psi = psi.real
    pairing = complex(psi @ x)
    simple = abs(pairing) > np.sqrt(_EPS)
    if simple:
        psi = psi / pairing
        if np.iscomplexobj(psi) and np.max(np.abs(psi.imag)) <= _EPS * np.max(np.abs(psi)):
            psi = psi.real
        pairing = complex(psi @ x)
    else:
        k = int(np.argmax(np.abs(psi)))
        psi = psi * (abs(psi[k]) / psi[k])
        if np.iscomplexobj(psi) and np.all(psi.imag == 0):
            psi = psi.real
    return EigenPair(lam, x, psi, pairing, bool(simple), geo)


class PoleOrder(NamedTuple):
    """Index of ``lam0``: the order of the resolvent pole."""

    order: int
    alg_mult: int
    ill_conditioned: bool


def _invariant_block(A, c: Cluster, cl: list[Cluster]):
    B, _ = sla.matrix_balance(A, permute=True, scale=True)
    # Schur of the balanced matrix perturbs a defective cluster differently
    # from geev, so select everything nearer to this center than to any other
    others = [abs(o.center - c.center) for o in cl if o is not c]
    r = max(10 * c.radius, 64 * _EPS * _scale(A))
    if others:
        r = max(r, 0.5 * min(others))
    T, Z, sdim = sla.schur(B, output="complex", sort=lambda z: abs(z - c.center) <= r)
    return B, T, Z, int(sdim)


def pole_order(A, lam0, tol: Tolerances | None = None) -> PoleOrder:
    """Smallest ``k`` at which the ranks of ``(A - lam0)^k`` stabilise.

    The ranks are read off the triangular Schur block belonging to the
    cluster of ``lam0`` (after balancing), where ``A - lam0`` is nilpotent; on
    the complementary invariant subspace it is invertible, so this is the
    same index as for the full matrix but without squaring ``||A||``.
    """
    tol = resolve(tol)
    A = as_operator(A)
    cl = spectrum_clusters(A, tol)
    c = _cluster_of(cl, lam0)
    _, T, _, m = _invariant_block(A, c, cl)
    if m != c.size:
        raise NumericalFailure(
            "Schur reordering did not isolate the eigenvalue cluster",
            {"lam0": complex(lam0), "selected": m, "cluster_size": c.size},
        )
    blk = T[:m, :m]
    N = blk - np.trace(blk) / m * np.eye(m)
    scale = _scale(A)
    Nk = np.eye(m, dtype=complex)
    warn = False
    for k in range(1, m + 1):
        Nk = Nk @ N
        th = tol.tol_rank * scale**k
        sv = np.linalg.svd(Nk, compute_uv=False)
        warn = warn or bool(np.any((sv > th / 10) & (sv < th * 10)))
        if not np.any(sv > th):
            return PoleOrder(k, m, warn)
    return PoleOrder(m, m, warn)


def _contour(A, center, rho, power, n0, tol_proj, real_input):
    n = A.shape[0]
    eye = np.eye(n)

    def node_sum(thetas):
        acc = np.zeros((n, n), dtype=complex)
        for th in thetas:
            e = np.exp(1j * th)
            z = center + rho * e
            R = np.linalg.solve(z * eye - A, eye)
            acc += (rho * e) ** power * R
        return acc

    # real A, real center: nodes at th and -th give conjugate terms
    symmetric = real_input and center.imag == 0.0

    def ring(N, offset):
        k = np.arange(N)
        th = 2 * np.pi * (k + offset) / N
        if not symmetric:
            return node_sum(th)
        if offset == 0.0:
            on_axis = th[(k == 0) | (2 * k == N)]
            upper = th[(k > 0) & (2 * k < N)]
        else:
            on_axis = th[:0]
            upper = th[2 * k + 1 < N]
        half = node_sum(upper)
        return node_sum(on_axis) + half + half.conj()

    N = int(n0)
    if N < 4 or N % 2:
        raise PreconditionError("contour node count must be an even number >= 4")
    total = ring(N, 0.0)
    current = total / N
    for _ in range(6):
        total = total + ring(N, 0.5)
        N *= 2
        nxt = total / N
        diff = np.max(np.abs(nxt - current))
        current = nxt
        if diff < tol_proj * max(1.0, np.max(np.abs(current))):
            return current, N
    raise NumericalFailure("contour quadrature did not converge", {"nodes": N, "last_change": float(diff)})


def _contour_setup(A, lam0, tol):
    cl = spectrum_clusters(A, tol)
    c = _cluster_of(cl, lam0)
    others = [abs(o.center - c.center) for o in cl if o is not c]
    d = min(others) if others else 2 * _scale(A)
    if d <= 10 * c.radius:
        raise PreconditionError(f"eigenvalue {c.center} is not isolated (distance {d:.3g})")
    return c, d / 2


def _finish(P, center):
    if center.imag == 0.0:
        return np.real(P).copy()
    return P


def laurent_coefficient(A, lam0, m: int, tol: Tolerances | None = None) -> np.ndarray:
    """Coefficient of ``(lam - lam0)^(-m)`` in the Laurent expansion of the resolvent."""
    tol = resolve(tol)
    A = as_operator(A)
    if m < 1:
        raise PreconditionError("m must be >= 1")
    c, rho = _contour_setup(A, lam0, tol)
    U, _ = _contour(A, c.center, rho, m, tol.n_quad, tol.tol_proj, True)
    return _finish(U, c.center)


def spectral_projection(A, lam0, tol: Tolerances | None = None, method: str = "auto") -> np.ndarray:
    """Riesz projection onto the generalized eigenspace of ``lam0``.

    ``method`` is ``"contour"``, ``"rank1"`` (simple poles only) or ``"auto"``,
    which computes both when the pole is simple, cross-checks them and
    returns the rank-one form.
    """
    tol = resolve(tol)
    A = as_operator(A)
    if method not in ("auto", "contour", "rank1"):
        raise ValueError(f"unknown method {method!r}")
    c, rho = _contour_setup(A, lam0, tol)
    rank1 = None
    if method in ("auto", "rank1"):
        po = pole_order(A, c.center, tol)
        ep = eigen_pair(A, c.center, tol)
        if po.order == 1 and po.alg_mult == 1 and ep.simple:
            rank1 = _finish(np.outer(ep.x, ep.psi), c.center)
        elif method == "rank1":
            raise PreconditionError("rank-one projection needs a simple pole of multiplicity one")
    if method == "rank1":
        return rank1
    Pc, _ = _contour(A, c.center, rho, 1, tol.n_quad, tol.tol_proj, True)
    Pc = _finish(Pc, c.center)
    if rank1 is None:
        return Pc
    diff = float(np.linalg.norm(Pc - rank1, 2))
    if diff > tol.tol_proj * max(1.0, float(np.linalg.norm(rank1, 2))):
        raise NumericalFailure(
            "contour and rank-one projections disagree",
            {"difference": diff, "lam0": c.center},
        )
    return rank1


def projection_defects(A, P) -> dict:
    """Relative residuals of ``P^2 = P`` and ``AP = PA`` plus the numerical rank of ``P``."""
    A, P = np.asarray(A), np.asarray(P)
    pn = max(float(np.linalg.norm(P, 2)), 1.0)
    sv = np.linalg.svd(P, compute_uv=False)
    return {
        "idempotence": float(np.linalg.norm(P @ P - P, 2)) / pn**2,
        "commutation": float(np.linalg.norm(A @ P - P @ A, 2)) / (pn * max(float(np.linalg.norm(A, 2)), 1.0)),
        "rank": int(np.count_nonzero(sv > 1e-8 * sv[0])) if sv.size and sv[0] > 0 else 0,
    }


@dataclass(frozen=True)
class SpectralData:
    """Summary of the rightmost part of the spectrum of ``A``."""

    spectrum: np.ndarray
    spectral_bound: float
    rightmost_is_real: bool
    lam0: complex
    x: np.ndarray | None
    psi: np.ndarray | None
    alg_mult: int
    geo_mult: int
    pole_order: int
    dominant: bool
    gap: float
    pairing: complex
    rank_warning: bool
    peripheral: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))


def analyze(A, tol: Tolerances | None = None) -> SpectralData:
    """Spectral summary at the spectral bound ``s(A)``."""
    tol = resolve(tol)
    A = as_operator(A)
    w = full_spectrum(A, tol)
    cl = spectrum_clusters(A, tol)
    s = max(c.center.real for c in cl)
    thresh = s - tol.tol_cluster * _scale(A)
    periph = [c for c in cl if c.center.real >= thresh]
    real_top = [c for c in periph if c.center.imag == 0.0]
    rightmost_is_real = bool(real_top)
    top = real_top[0] if real_top else periph[0]
    lam0 = top.center.real if rightmost_is_real else top.center
    po = pole_order(A, lam0, tol)
    x = psi = None
    pairing = 0j
    geo = 1
    if rightmost_is_real:
        ep = eigen_pair(A, lam0, tol)
        x, psi, pairing, geo = ep.x, ep.psi, ep.pairing, ep.geo_mult
    dominant = len(periph) == 1 and rightmost_is_real
    rest = [c.center.real for c in cl if c is not top]
    if not dominant:
        gap = 0.0
    elif rest:
        gap = float(s - max(rest))
    else:
        gap = float("inf")
    return SpectralData(
        spectrum=w,
        spectral_bound=float(s),
        rightmost_is_real=rightmost_is_real,
        lam0=lam0,
        x=x,
        psi=psi,
        alg_mult=po.alg_mult,
        geo_mult=geo,
        pole_order=po.order,
        dominant=dominant,
        gap=gap,
        pairing=pairing,
        rank_warning=po.ill_conditioned,
        peripheral=np.array([c.center for c in periph], dtype=complex),
    )
