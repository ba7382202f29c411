"""Acceptance criteria, one printed line each. Tolerances are pinned here."""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

from evpos import evolution, models, spectral
from evpos.errors import SpectrumError
from evpos.lattice import BandProjection
from evpos.positivity import (
    SpectralContext,
    anti_maximum,
    certify_individual,
    certify_uniform,
    f_panel,
    is_positive_semigroup,
    ladder_consequences,
    resolvent_scan,
    semigroup_scan,
)

KERNEL_ATOL = 64 * np.finfo(float).eps  # relative to max|A|
HEAT_RTOL = 1e-2
NEG_SQ_RTOL = 5e-3
BEAM_RTOL = 1e-2
STABILIZE_RTOL = 0.10
LAPLACE_RTOL = 1e-6
IDENTITY_RTOL = 1e-8
CONTOUR_RANK1_ATOL = 1e-8
ORDER_RANGE = (0.9, 1.1)
RATE_RTOL = 0.15
PANEL = 20


def dirichlet_mu(n, k):
    h = 1.0 / (n + 1)
    return (4 / h**2) * np.sin(k * np.pi * h / 2) ** 2


def test_criterion_1_diffusion(diffusion, diffusion_ctx, criterion):
    A, p = diffusion.A, diffusion.params
    nx, nb = p["n_x"], p["n_b"]
    right = np.r_[np.ones(nx), np.zeros(nb)]
    psi_h = np.r_[np.full(nx, 1.0 / nx), np.full(nb, (p["beta1"] - p["beta2"]) * p["r"] / nb)]
    r_right = float(np.max(np.abs(A @ right)))
    r_left = float(np.max(np.abs(psi_h @ A)))
    a = r_right == 0.0 and r_left <= KERNEL_ATOL * np.abs(A).max()

    w, V = spectral.full_spectrum(A, vectors=True)
    mass = np.sum(np.abs(V[:nx]) ** 2, axis=0) / np.sum(np.abs(V) ** 2, axis=0)
    lead = np.sort(w[(mass > 0.5) & (np.abs(w) > 1e-6)].real)[::-1][:3]
    targets = -np.array([1, 4, 9]) * np.pi**2
    heat_err = float(np.max(np.abs(lead - targets) / np.abs(targets)))
    b = heat_err <= HEAT_RTOL

    metzler_free = models.diffusion_boundary_model(nx, nb, p["r"], p["beta1"], 0.0).A
    c = (not is_positive_semigroup(A)) and is_positive_semigroup(metzler_free)

    S = diffusion.mask("f_component")
    cert = certify_individual(A, 0.0, S, S)
    F = f_panel(diffusion.n, S, PANEL, seed=0)
    res = semigroup_scan(A, S, S, None, F, context=diffusion_ctx)
    d = cert.verdict == "certified_individual" and all(r.positive and r.tail_certified for r in res)

    ok = a and b and c and d
    criterion("1 diffusion", ok,
              f"kernel residuals {r_right:.1e}/{r_left:.1e}; heat rel err {heat_err:.2e}; "
              f"positive iff beta2=0: {c}; {cert.verdict}, {sum(r.positive and r.tail_certified for r in res)}"
              f"/{PANEL} detected with tail")
    assert ok


def test_criterion_2_neg_squared(neg_squared, neg_squared_ctx, criterion):
    A = neg_squared.A
    s = neg_squared_ctx.s
    a = abs(s + np.pi**4) <= NEG_SQ_RTOL * np.pi**4
    closed = -dirichlet_mu(neg_squared.n, 1) ** 2
    E = evolution.expm(A, 1e-4 / abs(s))
    b = E.min() < 0
    K = neg_squared.mask("K")
    cert = certify_uniform(A, K, K, context=neg_squared_ctx)
    t0_pred = cert.predicted["t0_pred"]
    F = f_panel(neg_squared.n, K, PANEL, seed=0)
    res = semigroup_scan(A, K, K, None, F, context=neg_squared_ctx, extra_times=(t0_pred,))
    t0_max = max(r.threshold if r.positive else np.inf for r in res)
    c = cert.verdict == "certified_uniform" and all(r.tail_certified for r in res) and t0_max <= t0_pred
    ok = a and b and c
    criterion("2 neg squared", ok,
              f"s(A)={s:.4f} (closed form {closed:.4f}, -pi^4={-np.pi**4:.4f}); min expm entry {E.min():.2e}; "
              f"{cert.verdict}, max t0 {t0_max:.3e} <= predicted {t0_pred:.3e}")
    assert ok


def _bilaplacian_abc(bilaplacian, ctx):
    A = bilaplacian.A
    K = bilaplacian.mask("interior")
    k = brentq(lambda k: np.cos(k) * np.cosh(k) - 1, 4.0, 5.0, xtol=1e-14)
    s = ctx.s
    a = abs(s + k**4) <= BEAM_RTOL * k**4
    x = ctx.data.x
    x = x if x[np.argmax(np.abs(x))] > 0 else -x
    b = bool(np.all(x[K.support] > 0))
    F = np.random.default_rng(11).uniform(0.0, 1.0, (bilaplacian.n, 10)) + 1e-3
    right = resolvent_scan(A, s, K, K, None, F, side="right", context=ctx)
    left = resolvent_scan(A, s, K, K, None, F, side="left", context=ctx)
    signs = all(min(r.extra["margin_raw"]) > 0 and max(l.extra["margin_raw"]) < 0 for r, l in zip(right, left))
    drift = max(abs(res.extra["margin_scaled"][-1] / res.limit_margin - 1) for res in right + left)
    stable = all(res.extra["stabilized"] for res in right + left)
    c = signs and drift <= STABILIZE_RTOL and stable
    return k, s, a, b, c, signs, drift


def test_criterion_3_bilaplacian(bilaplacian, bilaplacian_ctx, criterion):
    k, s, a, b, c, signs, drift = _bilaplacian_abc(bilaplacian, bilaplacian_ctx)
    K = bilaplacian.mask("interior")
    gap = bilaplacian_ctx.data.gap
    try:
        res = anti_maximum(bilaplacian.A, s, K, K, probe=s - gap, context=bilaplacian_ctx)
        d = res.certificate.verdict == "certified_uniform" and res.interval is not None
        d_detail = f"probe s-gap: {res.certificate.verdict}, interval {res.interval}"
    except SpectrumError as exc:
        d = False
        d_detail = f"probe s-gap={s - gap:.4f} is an eigenvalue ({type(exc).__name__})"
    ok = a and b and c and d
    criterion("3 bilaplacian", ok,
              f"s(A)={s:.3f} vs -k^4={-k**4:.3f}; interior ground state positive: {b}; opposite signs: {signs}, "
              f"scaled-vs-limit drift {drift:.1e}; {d_detail}")
    assert ok


def test_criterion_3d_supplement_half_gap_probe(bilaplacian, bilaplacian_ctx, criterion):
    K = bilaplacian.mask("interior")
    s, gap = bilaplacian_ctx.s, bilaplacian_ctx.data.gap
    F = np.random.default_rng(11).uniform(0.0, 1.0, (bilaplacian.n, 10)) + 1e-3
    res = anti_maximum(bilaplacian.A, s, K, K, probe=s - 0.5 * gap, F=F, context=bilaplacian_ctx)
    lo, hi = res.interval if res.interval else (np.nan, np.nan)
    # direct solves at interior points of the reported interval
    lams = lo + (hi - lo) * np.array([1e-6, 0.5, 1 - 1e-6])
    neg = all(np.all(evolution.resolvent_apply(bilaplacian.A, lam, K(F))[K.support] < 0) for lam in lams)
    ok = res.certificate.verdict == "certified_uniform" and res.detection.tail_certified and neg
    criterion("3d (probe s-gap/2)", ok, f"{res.certificate.verdict}, interval [{lo:.3f}, {hi:.3f}), "
                                        f"tail certified {res.detection.tail_certified}, direct solves negative {neg}")
    assert ok


def test_criterion_4_laplace(criterion):
    worst = 0.0
    for seed in range(25):
        r = np.random.default_rng(seed)
        A = r.standard_normal((8, 8))
        A += (r.uniform(-1.0, 1.9) - spectral.spectral_bound(A)) * np.eye(8)
        s = spectral.spectral_bound(A)
        assert s < 2
        f = r.standard_normal(8)
        exact = evolution.resolvent_apply(A, s + 1.0, f)
        got = evolution.laplace_transform(A, s + 1.0, f, tol_quad=1e-3 * LAPLACE_RTOL * np.linalg.norm(exact))
        worst = max(worst, float(np.linalg.norm(got.value - exact) / np.linalg.norm(exact)))
    ok = worst <= LAPLACE_RTOL
    criterion("4 laplace", ok, f"25 matrices, worst relative error {worst:.2e} (<= {LAPLACE_RTOL:g})")
    assert ok


def _invariant_models(diffusion, neg_squared, bilaplacian):
    out = [("diffusion", diffusion), ("neg_squared", neg_squared), ("bilaplacian", bilaplacian),
           ("dirichlet", models.dirichlet_laplacian_1d(99))]
    out += [(k, models.toy(k, seed=1)) for k in models.TOY_KINDS]
    return out


def test_criterion_5_invariants(diffusion, neg_squared, bilaplacian, criterion):
    ms = _invariant_models(diffusion, neg_squared, bilaplacian)
    rng = np.random.default_rng(5)
    worst_identity = 0.0
    pairs = 0
    for i in range(100):
        name, m = ms[i % len(ms)]
        s = spectral.spectral_bound(m.A)
        scale = max(1.0, abs(s))
        lam = s + scale * rng.uniform(0.05, 2.0) + 1j * scale * rng.uniform(-1, 1) * (i % 2)
        mu = s + scale * rng.uniform(0.05, 2.0)
        Rl, Rm = evolution.resolvent_matrix(m.A, lam), evolution.resolvent_matrix(m.A, mu)
        res = np.linalg.norm(Rl - Rm - (mu - lam) * Rl @ Rm, 2) / (np.linalg.norm(Rl, 2) * np.linalg.norm(Rm, 2))
        worst_identity = max(worst_identity, res)
        pairs += 1
    tol = spectral.resolve(None)
    proj_ok, worst_cr, orders = True, 0.0, []
    for name, m in ms:
        d = spectral.analyze(m.A)
        P = spectral.spectral_projection(m.A, d.lam0)
        defects = spectral.projection_defects(m.A, P)
        proj_ok &= defects["idempotence"] <= tol.tol_proj and defects["commutation"] <= tol.tol_proj
        proj_ok &= defects["rank"] == d.alg_mult
        if d.pole_order == 1 and d.alg_mult == 1 and d.rightmost_is_real:
            Pc = spectral.spectral_projection(m.A, d.lam0, method="contour")
            Pr = spectral.spectral_projection(m.A, d.lam0, method="rank1")
            worst_cr = max(worst_cr, float(np.max(np.abs(Pc - Pr)) / max(1.0, np.abs(Pr).max())))
            dist = spectral.isolation_distance(m.A, d.lam0)
            deltas = dist * 2.0 ** -np.arange(4, 12)
            errs = [np.linalg.norm(dl * evolution.resolvent_matrix(m.A, d.lam0.real + dl) - P, 2) for dl in deltas]
            orders.append(float(np.polyfit(np.log(deltas), np.log(errs), 1)[0]))
    order_ok = all(ORDER_RANGE[0] <= o <= ORDER_RANGE[1] for o in orders)
    ok = worst_identity <= IDENTITY_RTOL and proj_ok and worst_cr <= CONTOUR_RANK1_ATOL and order_ok
    criterion("5 invariants", ok,
              f"{pairs} resolvent pairs worst {worst_identity:.1e}; projections on {len(ms)} operators ok: "
              f"{proj_ok}; contour vs rank-1 {worst_cr:.1e}; orders {min(orders):.3f}..{max(orders):.3f}")
    assert ok


EXPECTED_FAILURES = {
    "rotation_block": {"individual": ("kerpsi_decay",), "uniform": ("dominant",)},
    "jordan": {"individual": ("simple_pole", "kerpsi_decay"), "uniform": ("simple_pole",)},
    "peripheral_order_violator": {"individual": ("kerpsi_decay",), "uniform": ("dominant",)},
}


def test_criterion_6_soundness(diffusion, diffusion_ctx, neg_squared, neg_squared_ctx, bilaplacian,
                               bilaplacian_ctx, criterion):
    contradictions, certified = [], 0
    for seed in range(100):
        m = models.toy("perron_random", {"n": 10}, seed=seed)
        cert = certify_uniform(m.A, m.S, m.T)
        if cert.verdict != "certified_uniform":
            continue
        certified += 1
        F = f_panel(m.n, m.T, PANEL, seed=seed)
        res = semigroup_scan(m.A, m.S, m.T, None, F, extra_times=(cert.predicted["t0_pred"],))
        if not all(r.positive and r.tail_certified and r.threshold <= cert.predicted["t0_pred"] for r in res):
            contradictions.append(f"perron seed {seed}")
    for name, m, ctx, S in (("neg_squared", neg_squared, neg_squared_ctx, neg_squared.mask("K")),
                            ("bilaplacian", bilaplacian, bilaplacian_ctx, bilaplacian.mask("interior"))):
        cert = certify_uniform(m.A, S, S, context=ctx)
        F = f_panel(m.n, S, PANEL, seed=0)
        res = semigroup_scan(m.A, S, S, None, F, context=ctx, extra_times=(cert.predicted["t0_pred"],))
        if cert.verdict == "certified_uniform":
            certified += 1
            if not all(r.positive and r.tail_certified and r.threshold <= cert.predicted["t0_pred"] for r in res):
                contradictions.append(name)
    S = diffusion.mask("f_component")
    cert = certify_individual(diffusion.A, 0.0, S, S)
    if cert.verdict == "certified_individual":
        certified += 1
        res = semigroup_scan(diffusion.A, S, S, None, f_panel(diffusion.n, S, PANEL, seed=0), context=diffusion_ctx)
        if not all(r.positive and r.tail_certified for r in res):
            contradictions.append("diffusion")
    wrong_names = []
    for kind, expected in EXPECTED_FAILURES.items():
        m = models.toy(kind)
        ind = certify_individual(m.A, 0.0, m.S, m.T)
        uni = certify_uniform(m.A, m.S, m.T)
        got = {"individual": ind.failed, "uniform": uni.failed}
        if ind.verdict != "hypotheses_fail" or uni.verdict != "hypotheses_fail" or got != expected:
            wrong_names.append(f"{kind}: {got}")
    ok = certified == 103 and not contradictions and not wrong_names
    criterion("6 soundness", ok,
              f"{certified}/103 certified, contradictions {contradictions or 'none'}; counterexample names "
              f"{'as expected' if not wrong_names else wrong_names}")
    assert ok


def test_criterion_7_ladder(neg_squared, criterion):
    n = neg_squared.n
    rungs = models.central_ladder(n)
    rep = ladder_consequences(neg_squared.A, rungs)
    c = rep.claims
    gap_closed = dirichlet_mu(n, 2) ** 2 - dirichlet_mu(n, 1) ** 2
    conv = c["operator_norm_convergence"].witness
    rate_err = abs(conv["fitted_rate"] - gap_closed) / gap_closed
    ok = (len(rungs) == 5 and rep.rungs_positive and c["simple_pole"].passed
          and c["projection_positive"].witness["strictly_positive"]
          and c["kernel_quasi_interior"].passed and c["kernel_quasi_interior"].witness["geo_mult"] == 1
          and conv["bound_holds"] and rate_err <= RATE_RTOL)
    criterion("7 ladder", ok,
              f"{len(rungs)} rungs positive {rep.rungs_positive}; simple pole {c['simple_pole'].passed}; "
              f"min P entry {c['projection_positive'].witness['min_entry']:.2e}; quasi-interior kernel "
              f"{c['kernel_quasi_interior'].passed}; rate {conv['fitted_rate']:.2f} vs gap {gap_closed:.2f} "
              f"(rel {rate_err:.1e}), kappa {conv['kappa']:.1f}")
    assert ok


def _suite_csvs(out):
    exe = [sys.executable, "-m", "evpos.cli"]
    env = dict(os.environ, EVPOS_THREADS="1")
    proc = subprocess.run(exe + ["suite", "--out", str(out), "--quiet"], capture_output=True, text=True, env=env)
    return proc.returncode, {p.name: p.read_bytes() for p in sorted(Path(out).glob("*.csv"))}


def test_criterion_8_determinism(tmp_path, criterion):
    t = time.perf_counter()
    code_a, a = _suite_csvs(tmp_path / "a")
    code_b, b = _suite_csvs(tmp_path / "b")
    same = bool(a) and a == b
    ok = code_a == 0 and code_b == 0 and same
    criterion("8 determinism", ok, f"evpos suite x2: exit {code_a}/{code_b}, {len(a)} CSVs byte-identical: {same} "
                                   f"({time.perf_counter() - t:.1f}s)")
    assert ok
