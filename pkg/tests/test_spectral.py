import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from evpos import evolution, models, spectral
from evpos.errors import PreconditionError

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])
J2 = np.array([[0.0, 1.0], [0.0, 0.0]])


def jordan(m, lam):
    return lam * np.eye(m) + np.diag(np.ones(m - 1), 1)


def test_full_spectrum_small():
    assert np.allclose(np.sort(spectral.full_spectrum(SWAP).real), [-1.0, 1.0], atol=1e-15)
    assert np.all(spectral.full_spectrum(J2) == 0)


def test_dirichlet_closed_form():
    n = 99
    h = 1.0 / (n + 1)
    A = models.dirichlet_laplacian_1d(n).A
    k = np.arange(1, n + 1)
    oracle = np.sort(-(4 / h**2) * np.sin(k * np.pi * h / 2) ** 2)
    w = spectral.full_spectrum(A)
    assert np.max(np.abs(w.imag)) == 0
    assert np.allclose(np.sort(w.real), oracle, rtol=0, atol=1e-10 * np.linalg.norm(A, 2))


def test_backward_error(rng):
    A = rng.standard_normal((30, 30))
    w, V = spectral.full_spectrum(A, vectors=True)
    res = np.linalg.norm(A @ V - V * w, axis=0)
    assert np.max(res) <= 1e-12 * np.linalg.norm(A, 2)


def test_spectral_bound(neg_squared, diffusion):
    assert spectral.spectral_bound(np.diag([-1.0, -2.0])) == -1.0
    assert spectral.spectral_bound(neg_squared.A) == pytest.approx(-np.pi**4, rel=5e-3)
    h = 1.0 / 200
    exact = -((4 / h**2) * np.sin(np.pi * h / 2) ** 2) ** 2
    assert spectral.spectral_bound(neg_squared.A) == pytest.approx(exact, rel=1e-9)
    assert abs(spectral.spectral_bound(diffusion.A)) <= 1e-9 * np.linalg.norm(diffusion.A, 2)


def test_peripheral_spectrum():
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    per = spectral.peripheral_spectrum(rot)
    assert np.allclose(sorted(per.imag), [-1, 1], atol=1e-14) and np.allclose(per.real, 0, atol=1e-14)
    S = np.diag([3.0, 1.0, -2.0]) + 0.1 * np.ones((3, 3))
    assert len(spectral.peripheral_spectrum(S)) == 1
    blk = np.zeros((3, 3))
    blk[1:, 1:] = rot
    per = spectral.peripheral_spectrum(blk)
    assert len(per) == 3
    assert not spectral.analyze(blk).dominant


def test_eigen_pair_swap():
    p = spectral.eigen_pair(SWAP, 1.0)
    assert np.allclose(p.x / np.linalg.norm(p.x), np.ones(2) / np.sqrt(2))
    assert np.allclose(p.psi / np.linalg.norm(p.psi), np.ones(2) / np.sqrt(2))
    assert p.simple and p.pairing == pytest.approx(1.0)
    assert p.psi @ p.x == pytest.approx(1.0)


def test_eigen_pair_jordan_non_simple():
    p = spectral.eigen_pair(J2, 0.0)
    assert np.allclose(np.abs(p.x), [1, 0]) and np.allclose(np.abs(p.psi), [0, 1])
    assert not p.simple and abs(p.pairing) < 1e-12


def test_eigen_pair_diffusion_kernel(diffusion):
    p = spectral.eigen_pair(diffusion.A, 0.0)
    nx, nb, b1, b2 = (diffusion.params[k] for k in ("n_x", "n_b", "beta1", "beta2"))
    x = p.x / p.x[np.argmax(np.abs(p.x))]
    assert np.allclose(x[:nx], 1, atol=1e-10) and np.allclose(x[nx:], 0, atol=1e-10)
    psi = np.concatenate([np.full(nx, 1.0 / nx), np.full(nb, (b1 - b2) * diffusion.params["r"] / nb)])
    scale = p.psi[0] / psi[0]
    assert np.allclose(p.psi, scale * psi, rtol=1e-8, atol=1e-12 * abs(scale))
    # the functional annihilates the range of A exactly (telescoping stencil)
    assert np.max(np.abs(psi @ diffusion.A)) <= 64 * np.finfo(float).eps * np.abs(diffusion.A).max()


def test_pole_order_examples(rng):
    A = rng.standard_normal((6, 6))
    lam = spectral.analyze(A).lam0
    assert spectral.pole_order(A, lam).order == 1
    assert spectral.pole_order(J2, 0.0).order == 2
    A = np.zeros((4, 4))
    A[:3, :3] = jordan(3, 5.0)
    A[3, 3] = 1.0
    po = spectral.pole_order(A, 5.0)
    assert (po.order, po.alg_mult) == (3, 3)


def test_spectral_projection_examples():
    assert np.allclose(spectral.spectral_projection(np.diag([2.0, 1.0]), 2.0), np.diag([1.0, 0.0]), atol=1e-12)
    for method in ("auto", "contour", "rank1"):
        P = spectral.spectral_projection(SWAP, 1.0, method=method)
        assert np.allclose(P, 0.5 * np.ones((2, 2)), atol=1e-10)


def test_neg_squared_projection_closed_form(neg_squared):
    n = neg_squared.n
    h = 1.0 / (n + 1)
    xs = h * np.arange(1, n + 1)
    s = spectral.spectral_bound(neg_squared.A)
    P = spectral.spectral_projection(neg_squared.A, s)
    oracle = 2 * h * np.outer(np.sin(np.pi * xs), np.sin(np.pi * xs))
    assert np.max(np.abs(P - oracle)) <= 1e-8
    assert P.min() > 0
    Pc = spectral.spectral_projection(neg_squared.A, s, method="contour")
    assert np.max(np.abs(Pc - oracle)) <= 1e-7


def test_projection_invariants(rng):
    A = rng.standard_normal((8, 8))
    d = spectral.analyze(A)
    P = spectral.spectral_projection(A, d.lam0)
    tol = spectral.resolve(None)
    defects = spectral.projection_defects(A, P)
    assert defects["idempotence"] <= tol.tol_proj
    assert defects["commutation"] <= tol.tol_proj
    assert defects["rank"] == d.alg_mult
    Pt = spectral.spectral_projection(A.T, d.lam0)
    assert np.max(np.abs(Pt - P.T)) <= tol.tol_proj * max(1.0, np.abs(P).max())


def test_laurent_coefficients():
    P = spectral.spectral_projection(SWAP, 1.0)
    assert np.allclose(spectral.laurent_coefficient(SWAP, 1.0, 1), P, atol=1e-12)
    assert np.allclose(spectral.laurent_coefficient(J2, 0.0, 2), J2, atol=1e-12)
    assert np.max(np.abs(spectral.laurent_coefficient(J2, 0.0, 3))) <= 1e-10
    A = np.zeros((4, 4))
    A[:3, :3] = jordan(3, 5.0)
    A[3, 3] = 1.0
    P = spectral.spectral_projection(A, 5.0)
    N = A - 5.0 * np.eye(4)
    for m in (1, 2, 3):
        assert np.allclose(spectral.laurent_coefficient(A, 5.0, m), np.linalg.matrix_power(N, m - 1) @ P, atol=1e-9)
    assert np.max(np.abs(spectral.laurent_coefficient(A, 5.0, 4))) <= 1e-9


def test_laurent_requires_positive_order():
    with pytest.raises(PreconditionError):
        spectral.laurent_coefficient(SWAP, 1.0, 0)


def test_not_an_eigenvalue():
    with pytest.raises(PreconditionError):
        spectral.spectral_projection(np.diag([2.0, 1.0]), 1.5)


def test_resolvent_limit_converges_at_first_order(rng):
    A = rng.standard_normal((7, 7))
    d = spectral.analyze(A)
    lam0 = d.lam0.real
    P = spectral.spectral_projection(A, lam0)
    deltas = d.gap * 2.0 ** -np.arange(4, 12)
    errs = [np.linalg.norm(dl * evolution.resolvent_matrix(A, lam0 + dl) - P, 2) for dl in deltas]
    order = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    assert 0.9 <= order <= 1.1


small = st.integers(2, 6).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-5, 5)))


@given(small)
def test_spectrum_backward_error_property(A):
    w, V = spectral.full_spectrum(A, vectors=True)
    res = np.linalg.norm(A @ V - V * w, axis=0)
    assert np.max(res) <= spectral.resolve(None).tol_eig * max(np.linalg.norm(A, 2), 1.0)


@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_symmetric_projection_and_duality(n, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((n, n))
    A = B + B.T + np.diag(np.arange(n) * 3.0)
    d = spectral.analyze(A)
    if not d.dominant or d.gap < 1e-3:
        return
    P = spectral.spectral_projection(A, d.lam0)
    assert np.allclose(P, P.T, atol=1e-9)
    assert spectral.projection_defects(A, P)["rank"] == 1
    Pt = spectral.spectral_projection(A.T, d.lam0)
    assert np.allclose(Pt, P.T, atol=1e-9)


def test_badly_scaled_near_defective_matrix():
    # geev's balancing leaves the eigenvector of 5 with residual ~7e-8 here
    e = np.finfo(float).eps
    A = np.full((4, 4), e)
    A[0, 1], A[1, 1] = 1.0, 5.0
    w, V = spectral.full_spectrum(A, vectors=True)
    assert np.max(np.linalg.norm(A @ V - V * w, axis=0)) <= 1e-8 * np.linalg.norm(A, 2)
    assert np.max(w.real) == pytest.approx(5.0, rel=1e-14)
