import numpy as np
import pytest
from scipy.optimize import brentq

from evpos import evolution, lattice, models, spectral
from evpos.errors import PreconditionError


def observed_order(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def test_dirichlet_small_closed_form():
    m = models.dirichlet_laplacian_1d(3)
    h = 0.25
    k = np.arange(1, 4)
    oracle = np.sort(-2 / h**2 * (1 - np.cos(k * np.pi / 4)))
    assert np.allclose(np.sort(spectral.full_spectrum(m.A).real), oracle, rtol=0, atol=1e-10)


def test_dirichlet_limit_and_metzler():
    m = models.dirichlet_laplacian_1d(199)
    assert spectral.spectral_bound(m.A) == pytest.approx(-np.pi**2, rel=1e-4)
    assert models.check_facts(m)["metzler"][0]


def test_dirichlet_refinement_order():
    errs = [abs(spectral.spectral_bound(models.dirichlet_laplacian_1d(n).A) + np.pi**2) for n in (24, 49, 99, 199)]
    assert np.all((observed_order(errs) >= 1.7) & (observed_order(errs) <= 2.3))


def _f_block_eigs(m, k):
    nx = m.params["n_x"]
    w, V = spectral.full_spectrum(m.A, vectors=True)
    mass = np.sum(np.abs(V[:nx]) ** 2, axis=0) / np.sum(np.abs(V) ** 2, axis=0)
    keep = (mass > 0.5) & (np.abs(w) > 1e-6)
    return np.sort(w[keep].real)[::-1][:k]


def test_diffusion_refinement_order():
    errs = [abs(_f_block_eigs(models.diffusion_boundary_model(n, n // 4, 1.0, 0.6, 0.2), 1)[0] + np.pi**2)
            for n in (50, 100, 200)]
    assert np.all((observed_order(errs) >= 1.7) & (observed_order(errs) <= 2.3))


def test_diffusion_heat_eigenvalues(diffusion):
    lead = _f_block_eigs(diffusion, 2)
    assert np.allclose(lead, [-np.pi**2, -4 * np.pi**2], rtol=1e-2)


def test_diffusion_exact_kernels(diffusion):
    nx, nb = diffusion.params["n_x"], diffusion.params["n_b"]
    b1, b2, r = (diffusion.params[k] for k in ("beta1", "beta2", "r"))
    right = np.r_[np.ones(nx), np.zeros(nb)]
    assert np.max(np.abs(diffusion.A @ right)) == 0.0
    psi = np.r_[np.full(nx, 1.0 / nx), np.full(nb, (b1 - b2) * r / nb)]
    assert np.max(np.abs(psi @ diffusion.A)) <= 64 * np.finfo(float).eps * np.abs(diffusion.A).max()


def test_diffusion_metzler_iff_beta2_zero():
    assert models.check_facts(models.diffusion_boundary_model(40, 10, 1.0, 0.6, 0.0))["metzler"] == (True, 0.0)
    m = models.diffusion_boundary_model(40, 10, 1.0, 0.6, 0.2)
    off = m.A - np.diag(np.diag(m.A))
    assert off.min() < 0
    assert models.check_facts(m)["metzler"][0]


def test_diffusion_parameter_constraints():
    for bad in [dict(beta1=0.9, beta2=0.2), dict(beta1=-0.1), dict(r=0.0), dict(n_x=2)]:
        with pytest.raises(PreconditionError):
            models.diffusion_boundary_model(**bad)


def test_neg_squared_facts(neg_squared):
    h = 1.0 / 200
    mu1 = (4 / h**2) * np.sin(np.pi * h / 2) ** 2
    assert spectral.spectral_bound(neg_squared.A) == pytest.approx(-(mu1**2), rel=1e-9)
    assert np.array_equal(neg_squared.A, neg_squared.A.T)
    s = spectral.spectral_bound(neg_squared.A)
    E = evolution.expm(neg_squared.A, 1e-4 / abs(s))
    assert E.min() < 0


def test_bilaplacian_beam_constant(bilaplacian):
    k = brentq(lambda k: np.cos(k) * np.cosh(k) - 1, 4.0, 5.0, xtol=1e-14)
    assert k == pytest.approx(4.7300407, abs=1e-7)
    assert spectral.spectral_bound(bilaplacian.A) == pytest.approx(-(k**4), rel=1e-2)
    assert np.array_equal(bilaplacian.A, bilaplacian.A.T)
    assert np.max(np.linalg.eigvalsh(bilaplacian.A)) < 0
    off = bilaplacian.A - np.diag(np.diag(bilaplacian.A))
    assert off.min() < 0


def test_bilaplacian_resolvent_sign_flip(bilaplacian):
    A, K = bilaplacian.A, bilaplacian.mask("interior")
    s = spectral.spectral_bound(A)
    f = np.ones(bilaplacian.n)
    for d in (1.0, 10.0):
        assert np.all(K(evolution.resolvent_apply(A, s + d, f))[K.support] > 0)
        assert np.all(K(evolution.resolvent_apply(A, s - d, f))[K.support] < 0)


def test_toys():
    assert spectral.pole_order(models.toy("jordan", {"m": 2, "lam": 0.0}).A, 0.0).order == 2
    m = models.toy("perron_random", {"n": 10}, seed=11)
    d = spectral.analyze(m.A)
    assert d.dominant and d.rightmost_is_real
    # Perron oracle: power iteration on the shifted nonnegative matrix
    B = m.A - np.min(np.diag(m.A)) * np.eye(10)
    v = np.ones(10)
    for _ in range(2000):
        v = B @ v
        v /= np.linalg.norm(v)
    assert np.all(v > 0)
    assert np.allclose(d.x / np.linalg.norm(d.x), v, atol=1e-8)
    assert not spectral.analyze(models.toy("rotation_block").A).dominant
    with pytest.raises(PreconditionError):
        models.toy("no_such_toy")


def test_toy_determinism():
    a = models.toy("perron_random", {"n": 6}, seed=3).A
    b = models.toy("perron_random", {"n": 6}, seed=3).A
    assert np.array_equal(a, b)


@pytest.mark.parametrize("name", ["dirichlet", "neg_squared", "bilaplacian", "diffusion", "diffusion_metzler",
                                  "jordan", "perron_random", "rotation_block", "sign_indefinite_projection",
                                  "peripheral_order_violator"])
def test_every_known_fact_passes(name, neg_squared, bilaplacian, diffusion):
    built = {
        "dirichlet": lambda: models.dirichlet_laplacian_1d(99),
        "neg_squared": lambda: neg_squared,
        "bilaplacian": lambda: bilaplacian,
        "diffusion": lambda: diffusion,
        "diffusion_metzler": lambda: models.diffusion_boundary_model(200, 50, 1.0, 0.6, 0.0),
    }
    m = built[name]() if name in built else models.toy(name, seed=5)
    failed = {k: v for k, v in models.check_facts(m).items() if not v[0]}
    assert not failed


def test_central_ladder_nested():
    rungs = models.central_ladder(50)
    assert all(a <= b for a, b in zip(rungs, rungs[1:]))
    assert rungs[-1].support.tolist() == list(range(1, 49))
    assert lattice.BandProjection.central(50, 0.2) == rungs[0]
