"""Finite-difference generators and small constructed test operators.

Every constructor returns a :class:`ModelInstance` carrying the matrix, its
grid, canonical masks and a list of :class:`KnownFact` fixtures that
:func:`check_facts` verifies with the spectral and lattice routines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import brentq

from . import lattice, spectral
from .errors import PreconditionError
from .lattice import BandProjection
from .tolerances import Tolerances, resolve

__all__ = [
    "KnownFact",
    "ModelInstance",
    "TOY_KINDS",
    "build",
    "central_ladder",
    "check_facts",
    "clamped_beam_root",
    "clamped_bilaplacian_1d",
    "diffusion_boundary_model",
    "dirichlet_eigenvalues",
    "dirichlet_laplacian_1d",
    "neg_squared_dirichlet_laplacian_1d",
    "toy",
]


@dataclass(frozen=True)
class KnownFact:
    """A property the model has by construction.

    ``kind`` selects the check in :func:`check_facts`; ``expected`` and
    ``tol`` are interpreted per kind (``tol`` is relative for eigenvalue
    targets, absolute for residuals).
    """

    name: str
    kind: str
    expected: Any
    tol: float = 0.0


@dataclass(frozen=True)
class ModelInstance:
    name: str
    A: np.ndarray
    masks: dict[str, BandProjection]
    facts: tuple[KnownFact, ...] = ()
    h: float | None = None
    nodes: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def mask(self, name: str) -> BandProjection:
        try:
            return self.masks[name]
        except KeyError:
            raise PreconditionError(f"model {self.name!r} has no mask {name!r}; known: {sorted(self.masks)}") from None

    @property
    def S(self) -> BandProjection:
        return self.masks["S"]

    @property
    def T(self) -> BandProjection:
        return self.masks["T"]


def _frozen(A):
    A = np.ascontiguousarray(A, dtype=float)
    A.setflags(write=False)
    return A


def dirichlet_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues ``-(4/h^2) sin^2(k pi h / 2)`` of the 3-point Dirichlet Laplacian, k = 1..n."""
    h = 1.0 / (n + 1)
    k = np.arange(1, n + 1)
    return -(4.0 / h**2) * np.sin(k * np.pi * h / 2) ** 2


def _laplacian(n):
    h = 1.0 / (n + 1)
    L = (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2
    return L, h


def dirichlet_laplacian_1d(n: int) -> ModelInstance:
    if n < 3:
        raise PreconditionError("dirichlet_laplacian_1d needs n >= 3")
    L, h = _laplacian(n)
    x = h * np.arange(1, n + 1)
    mu = dirichlet_eigenvalues(n)
    full = BandProjection.full(n)
    facts = (
        KnownFact("eigenvalues", "eigenvalues", np.sort(mu)[::-1], 1e-10),
        KnownFact("ground_state", "eigenvector", np.sin(np.pi * x), 1e-8),
        KnownFact("metzler", "metzler", True),
        KnownFact("symmetric", "symmetric", True),
    )
    return ModelInstance("dirichlet_laplacian", _frozen(L), {"S": full, "T": full}, facts, h, x, {"n": n})


def neg_squared_dirichlet_laplacian_1d(n: int, fraction: float = 0.6) -> ModelInstance:
    """``A = -L^2`` for the Dirichlet Laplacian ``L``; masks cover the central ``fraction`` of nodes."""
    if n < 5:
        raise PreconditionError("neg_squared_dirichlet_laplacian_1d needs n >= 5")
    L, h = _laplacian(n)
    A = -(L @ L)
    x = h * np.arange(1, n + 1)
    mu = dirichlet_eigenvalues(n)
    K = BandProjection.central(n, fraction)
    facts = (
        KnownFact("eigenvalues", "eigenvalues", np.sort(-(mu**2))[::-1], 1e-8),
        KnownFact("spectral_bound", "spectral_bound", float(-(mu[0] ** 2)), 1e-8),
        KnownFact("ground_state", "eigenvector", np.sin(np.pi * x), 1e-6),
        KnownFact("ground_positive", "quasi_interior_ground", True),
        KnownFact("metzler", "metzler", False),
        KnownFact("symmetric", "symmetric", True),
        KnownFact("dominant_simple", "dominant_simple", True),
    )
    masks = {"S": K, "T": K, "K": K, "full": BandProjection.full(n)}
    return ModelInstance("neg_squared_laplacian", _frozen(A), masks, facts, h, x, {"n": n, "fraction": fraction})


def clamped_beam_root() -> float:
    """First positive root of ``cos(k) cosh(k) = 1`` (clamped-clamped beam)."""
    return brentq(lambda k: math.cos(k) * math.cosh(k) - 1.0, 4.0, 5.0, xtol=1e-14)


def clamped_bilaplacian_1d(n: int, fraction: float = 0.8) -> ModelInstance:
    """``A = -D4`` with the (1, -4, 6, -4, 1)/h^4 stencil and clamped ends.

    Ghost values ``u_0 = 0`` and ``u_{-1} = u_1`` (mirrored at the right end)
    put 7 on the first and last diagonal entries.
    """
    if n < 7:
        raise PreconditionError("clamped_bilaplacian_1d needs n >= 7")
    h = 1.0 / (n + 1)
    D = (
        np.diag(np.full(n, 6.0))
        + np.diag(np.full(n - 1, -4.0), 1)
        + np.diag(np.full(n - 1, -4.0), -1)
        + np.diag(np.ones(n - 2), 2)
        + np.diag(np.ones(n - 2), -2)
    )
    D[0, 0] = D[-1, -1] = 7.0
    A = -D / h**4
    x = h * np.arange(1, n + 1)
    K = BandProjection.central(n, fraction)
    facts = (
        KnownFact("ground_eigenvalue", "spectral_bound", -clamped_beam_root() ** 4, 1e-2),
        KnownFact("symmetric", "symmetric", True),
        KnownFact("negative_definite", "negative_definite", True),
        KnownFact("ground_positive", "quasi_interior_ground", True),
        KnownFact("metzler", "metzler", False),
        KnownFact("dominant_simple", "dominant_simple", True),
    )
    masks = {"S": K, "T": K, "interior": K, "full": BandProjection.full(n)}
    return ModelInstance("clamped_bilaplacian", _frozen(A), masks, facts, h, x, {"n": n, "fraction": fraction})


def diffusion_boundary_model(n_x: int = 200, n_b: int = 50, r: float = 1.0,
                             beta1: float = 0.6, beta2: float = 0.2) -> ModelInstance:
    """Heat equation on (0, 1) fed through its end fluxes by a transport variable on (0, r).

    State ``(f, b)``: ``f`` on cell centers of (0, 1) with the conservative
    Neumann Laplacian, fluxes ``f'(0) = -beta1 b_1`` and ``f'(1) = -beta2 b_1``;
    ``b`` on cell centers of (0, r) with the upwind left shift
    ``(b_{j+1} - b_j)/h_b`` and ``b_{n_b + 1} = 0``.
    """
    if n_x < 3 or n_b < 3:
        raise PreconditionError("diffusion_boundary_model needs n_x, n_b >= 3")
    if not (r > 0 and math.isfinite(r)):
        raise PreconditionError("r must be positive")
    if beta1 < 0 or beta2 < 0 or beta1 + beta2 > 1:
        raise PreconditionError("need beta1, beta2 >= 0 and beta1 + beta2 <= 1")
    h, hb = 1.0 / n_x, r / n_b
    n = n_x + n_b
    A = np.zeros((n, n))
    i = np.arange(n_x)
    A[i, i] = -2.0 / h**2
    A[i[:-1], i[:-1] + 1] = 1.0 / h**2
    A[i[1:], i[1:] - 1] = 1.0 / h**2
    A[0, 0] = A[n_x - 1, n_x - 1] = -1.0 / h**2
    A[0, n_x] += beta1 / h
    A[n_x - 1, n_x] -= beta2 / h
    j = np.arange(n_x, n)
    A[j, j] = -1.0 / hb
    A[j[:-1], j[:-1] + 1] = 1.0 / hb

    kernel = np.concatenate([np.ones(n_x), np.zeros(n_b)])
    psi = np.concatenate([np.full(n_x, h), np.full(n_b, (beta1 - beta2) * hb)])
    xf = (i + 0.5) * h
    xb = (np.arange(n_b) + 0.5) * hb
    k = np.arange(1, 4)
    neumann = -(4.0 / h**2) * np.sin(k * np.pi * h / 2) ** 2
    f_mask = BandProjection(np.arange(n) < n_x)
    facts = (
        KnownFact("kernel_vector", "kernel_right", kernel, 0.0),
        KnownFact("kernel_functional", "kernel_left", psi, 64 * np.finfo(float).eps),
        KnownFact("metzler", "metzler", beta2 == 0.0),
        KnownFact("heat_eigenvalues", "block_eigenvalues", (-(k * np.pi) ** 2, 0.5), 1e-2),
        KnownFact("discrete_heat_eigenvalues", "block_eigenvalues", (neumann, 0.5), 1e-9),
        KnownFact("transport_eigenvalue", "eigenvalue_multiplicity", (-1.0 / hb, n_b), 1e-8),
    )
    masks = {"S": f_mask, "T": f_mask, "f_component": f_mask, "full": BandProjection.full(n)}
    params = {"n_x": n_x, "n_b": n_b, "r": r, "beta1": beta1, "beta2": beta2}
    return ModelInstance("diffusion_boundary", _frozen(A), masks, facts, h, np.concatenate([xf, xb]), params)


def _rotation(beta):
    return np.array([[0.0, -beta], [beta, 0.0]])


def _toy_jordan(m=2, lam=0.0, tail=(-1.0,)):
    m = int(m)
    if m < 1:
        raise PreconditionError("jordan block size must be >= 1")
    tail = [float(t) for t in tail]
    n = m + len(tail)
    A = np.zeros((n, n))
    A[:m, :m] = lam * np.eye(m) + np.diag(np.ones(m - 1), 1)
    A[m:, m:] = np.diag(tail)
    masks = {"S": BandProjection.from_indices(n, [0]), "T": BandProjection.from_indices(n, [m - 1])}
    facts = (KnownFact("pole_order", "pole_order", (lam, m)),)
    return A, masks, facts


def _toy_perron(n=10, alpha=-1.0, density=1.0, rng=None):
    n = int(n)
    B = rng.random((n, n))
    if density < 1.0:
        B *= rng.random((n, n)) < density
    A = alpha * np.eye(n) + B
    full = BandProjection.full(n)
    facts = (
        KnownFact("metzler", "metzler", True),
        KnownFact("dominant_simple", "dominant_simple", True),
        KnownFact("perron_vectors", "perron_vectors", True),
    )
    return A, {"S": full, "T": full}, facts


def _toy_rotation(beta=1.0):
    A = np.zeros((3, 3))
    A[1:, 1:] = _rotation(beta)
    m = BandProjection.from_indices(3, [0])
    facts = (
        KnownFact("peripheral", "peripheral", np.array([1j * beta, 0.0, -1j * beta]), 1e-10),
        KnownFact("dominant", "dominant", False),
    )
    return A, {"S": m, "T": m}, facts


def _toy_sign_indefinite():
    # x = (1, 1, 1) with left vector (1, 1, -1); the other two eigenvectors span ker psi
    V = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0]])
    A = V @ np.diag([0.0, -1.0, -2.0]) @ np.linalg.inv(V)
    full = BandProjection.full(3)
    facts = (
        KnownFact("projection", "projection", np.outer([1.0, 1.0, 1.0], [1.0, 1.0, -1.0]), 1e-10),
        KnownFact("dominant_simple", "dominant_simple", True),
    )
    return A, {"S": full, "T": full}, facts


def _toy_peripheral_violator(beta=1.0):
    # 0 plus a real 2x2-block Jordan chain at +-i beta (pole order 2)
    A = np.zeros((5, 5))
    R = _rotation(beta)
    A[1:3, 1:3] = R
    A[3:5, 3:5] = R
    A[1:3, 3:5] = np.eye(2)
    m = BandProjection.from_indices(5, [0])
    facts = (
        KnownFact("pole_order_zero", "pole_order", (0.0, 1)),
        KnownFact("pole_order_peripheral", "pole_order", (1j * beta, 2)),
        KnownFact("dominant", "dominant", False),
    )
    return A, {"S": m, "T": m}, facts


TOY_KINDS = ("jordan", "perron_random", "rotation_block", "sign_indefinite_projection", "peripheral_order_violator")


def toy(kind: str, params: dict | None = None, seed: int = 0) -> ModelInstance:
    """Small constructed operators with known spectral structure.

    ``params`` by kind: ``jordan`` (m, lam, tail), ``perron_random`` (n, alpha,
    density), ``rotation_block`` (beta), ``peripheral_order_violator`` (beta);
    ``sign_indefinite_projection`` takes none.
    """
    params = dict(params or {})
    try:
        if kind == "jordan":
            A, masks, facts = _toy_jordan(**params)
        elif kind == "perron_random":
            A, masks, facts = _toy_perron(rng=np.random.default_rng(seed), **params)
        elif kind == "rotation_block":
            A, masks, facts = _toy_rotation(**params)
        elif kind == "sign_indefinite_projection":
            A, masks, facts = _toy_sign_indefinite(**params)
        elif kind == "peripheral_order_violator":
            A, masks, facts = _toy_peripheral_violator(**params)
        else:
            raise PreconditionError(f"unknown toy kind {kind!r}; expected one of {TOY_KINDS}")
    except TypeError as exc:
        raise PreconditionError(f"bad parameters for toy {kind!r}: {exc}") from exc
    n = A.shape[0]
    masks = {**masks, "full": BandProjection.full(n)}
    return ModelInstance(kind, _frozen(A), masks, tuple(facts), params={**params, "seed": seed})


def build(kind: str, params: dict | None = None, seed: int = 0) -> ModelInstance:
    """Dispatch on a model name; used by the scenario runner."""
    params = dict(params or {})
    ctors = {
        "dirichlet_laplacian": dirichlet_laplacian_1d,
        "neg_squared_laplacian": neg_squared_dirichlet_laplacian_1d,
        "clamped_bilaplacian": clamped_bilaplacian_1d,
        "diffusion_boundary": diffusion_boundary_model,
    }
    if kind in ctors:
        try:
            return ctors[kind](**params)
        except TypeError as exc:
            raise PreconditionError(f"bad parameters for model {kind!r}: {exc}") from exc
    return toy(kind, params, seed)


def central_ladder(n: int, fractions=(0.2, 0.4, 0.6, 0.8), trim: int = 1) -> list[BandProjection]:
    """Nested central masks followed by everything except ``trim`` points at each end."""
    last = BandProjection.from_indices(n, range(trim, n - trim))
    # on coarse grids a wide central mask can reach past the trimmed ends
    rungs = [m for m in (BandProjection.central(n, q) for q in fractions) if m <= last and m != last]
    rungs.append(last)
    for a, b in zip(rungs, rungs[1:]):
        if not a <= b:
            raise PreconditionError("ladder masks are not nested")
    return rungs


# fact checks -------------------------------------------------------------------------


def _top_eigs(A, k):
    w = spectral.full_spectrum(A)
    order = np.lexsort((-w.imag, -w.real))
    return w[order][:k]


def _check_fact(model: ModelInstance, fact: KnownFact, tol: Tolerances):
    A = model.A
    kind, exp = fact.kind, fact.expected
    if kind == "eigenvalues":
        exp = np.asarray(exp)
        w = np.sort(np.linalg.eigvalsh(A) if np.array_equal(A, A.T) else spectral.full_spectrum(A).real)[::-1]
        err = float(np.max(np.abs(w - exp) / np.maximum(np.abs(exp), 1.0)))
        return err <= fact.tol, err
    if kind == "spectral_bound":
        s = spectral.spectral_bound(A, tol)
        err = abs(s - exp) / max(abs(exp), 1e-300)
        return err <= fact.tol, err
    if kind == "eigenvector":
        d = spectral.analyze(A, tol)
        v = np.asarray(exp) / np.linalg.norm(exp)
        x = d.x / np.linalg.norm(d.x)
        err = float(min(np.max(np.abs(x - v)), np.max(np.abs(x + v))))
        return err <= fact.tol, err
    if kind == "quasi_interior_ground":
        d = spectral.analyze(A, tol)
        x = d.x if d.x[np.argmax(np.abs(d.x))] > 0 else -d.x
        return lattice.is_quasi_interior(x, tol) == exp, float(np.min(x))
    if kind == "metzler":
        off = A - np.diag(np.diag(A))
        worst = float(np.min(off))
        return (worst >= -tol.eps_pos) == exp, worst
    if kind == "symmetric":
        asym = float(np.max(np.abs(A - A.T)))
        return (asym == 0.0) == exp, asym
    if kind == "negative_definite":
        top = float(np.max(np.linalg.eigvalsh(A)))
        return (top < 0) == exp, top
    if kind == "dominant_simple":
        d = spectral.analyze(A, tol)
        ok = d.dominant and d.pole_order == 1 and d.alg_mult == 1
        return ok == exp, float(d.gap)
    if kind == "dominant":
        d = spectral.analyze(A, tol)
        return d.dominant == exp, float(d.gap)
    if kind == "perron_vectors":
        d = spectral.analyze(A, tol)
        ok = lattice.is_quasi_interior(d.x, tol) and lattice.is_strictly_positive_functional(d.psi, tol)
        return ok == exp, float(min(np.min(d.x), np.min(d.psi)))
    if kind == "kernel_right":
        r = float(np.max(np.abs(A @ np.asarray(exp))))
        return r <= fact.tol, r
    if kind == "kernel_left":
        r = float(np.max(np.abs(np.asarray(exp) @ A)))
        return r <= fact.tol * spectral.norm(A) * np.max(np.abs(exp)), r
    if kind == "block_eigenvalues":
        targets, min_mass = exp
        nf = model.params["n_x"]
        w, V = spectral.full_spectrum(A, tol, vectors=True)
        mass = np.sum(np.abs(V[:nf]) ** 2, axis=0) / np.sum(np.abs(V) ** 2, axis=0)
        # defective clusters (the transport artifact) have unreliable eigenvectors
        simple = np.zeros(w.size, dtype=bool)
        for c in spectral.spectrum_clusters(A, tol):
            if c.size == 1:
                simple[c.members] = True
        keep = simple & (mass > min_mass) & (np.abs(w) > 1e-6 * spectral.norm(A))
        cand = np.sort(w[keep].real)[::-1][: len(targets)]
        if cand.size < len(targets):
            return False, float("inf")
        err = float(np.max(np.abs(cand - targets) / np.abs(targets)))
        return err <= fact.tol, err
    if kind == "eigenvalue_multiplicity":
        lam, mult = exp
        cl = spectral.spectrum_clusters(A, tol)
        c = min(cl, key=lambda c: abs(c.center - lam))
        err = abs(c.center - lam) / abs(lam)
        return (c.size == mult and err <= fact.tol), err
    if kind == "pole_order":
        lam, m = exp
        po = spectral.pole_order(A, lam, tol)
        return po.order == m, float(po.order)
    if kind == "peripheral":
        p = spectral.peripheral_spectrum(A, tol=tol)
        e = np.asarray(exp, dtype=complex)
        ok = p.size == e.size and all(np.min(np.abs(p - z)) <= fact.tol for z in e)
        return ok, float(p.size)
    if kind == "projection":
        P = spectral.spectral_projection(A, spectral.spectral_bound(A, tol), tol)
        err = float(np.max(np.abs(P - np.asarray(exp))))
        return err <= fact.tol, err
    raise PreconditionError(f"unknown fact kind {kind!r}")


def check_facts(model: ModelInstance, tol: Tolerances | None = None) -> dict[str, tuple[bool, float]]:
    """Verify every known fact; returns ``name -> (passed, observed witness)``."""
    tol = resolve(tol)
    return {f.name: _check_fact(model, f, tol) for f in model.facts}
