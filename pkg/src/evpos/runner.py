"""Execute a scenario: build the model, run its analyses, write report and CSVs."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evolution, models, positivity, spectral
from .errors import ConfigError, DimensionError, NumericalFailure, PreconditionError, SpectrumError
from .lattice import BandProjection
from .reporting import RESOLVENT_HEADER, SPECTRUM_HEADER, TRAJECTORY_HEADER, json_safe, write_csv, write_json
from .scenario import FractionMask, IndexMask, ProbeSpec, RangeMask, ScenarioConfig
from .tolerances import Tolerances

EXIT_OK, EXIT_SCIENTIFIC, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3

__all__ = ["EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_OK", "EXIT_SCIENTIFIC", "Record", "RunResult", "Workspace",
           "run_scenario"]


@dataclass
class Record:
    index: int
    kind: str
    label: str | None
    passed: bool | None = None
    expected: str = "pass"
    verified: bool = False
    verdict: str = ""
    summary: dict = field(default_factory=dict)
    error: str | None = None
    exit_code: int = EXIT_OK
    seconds: float = 0.0
    artifacts: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return json_safe(self.__dict__)


@dataclass
class RunResult:
    scenario: str
    records: list[Record]
    exit_code: int
    report: Path | None
    files: list[Path]


@dataclass
class Table:
    name: str
    header: tuple
    rows: list


class Workspace:
    """Model, masks, weights, panel and shared spectral data for one scenario."""

    def __init__(self, cfg: ScenarioConfig, tol: Tolerances, seed: int):
        self.cfg = cfg
        self.tol = tol
        self.seed = seed
        try:
            self.model = models.build(cfg.model.kind, dict(cfg.model.params), seed)
            self.S = self.mask(cfg.S)
            self.T = self.mask(cfg.T)
            self.u = self.weight(cfg.u, "u")
            self.phi = self.weight(cfg.phi, "phi")
            self.F = self.panel()
        except (PreconditionError, DimensionError) as exc:
            raise ConfigError(f"{cfg.name}: {exc}") from exc
        self.ctx = positivity.SpectralContext(self.model.A, tol)

    @property
    def n(self) -> int:
        return self.model.n

    def mask(self, spec) -> BandProjection:
        n = self.model.n
        if isinstance(spec, str):
            return BandProjection.full(n) if spec == "full" else self.model.mask(spec)
        if isinstance(spec, FractionMask):
            return BandProjection.central(n, spec.fraction)
        if isinstance(spec, IndexMask):
            if min(spec.indices) < 0 or max(spec.indices) >= n:
                raise PreconditionError(f"mask indices must lie in [0, {n})")
            return BandProjection.from_indices(n, spec.indices)
        if isinstance(spec, RangeMask):
            a, b = spec.range
            if not 0 <= a < b <= n:
                raise PreconditionError(f"mask range must satisfy 0 <= start < stop <= {n}")
            return BandProjection.from_indices(n, range(a, b))
        raise PreconditionError(f"unsupported mask spec {spec!r}")

    def weight(self, values, name):
        if values is None:
            return np.ones(self.model.n)
        v = np.asarray(values, dtype=float)
        if v.shape != (self.model.n,):
            raise DimensionError(f"{name} has length {v.size}, model has dimension {self.model.n}")
        return v

    def panel(self) -> np.ndarray:
        spec = self.cfg.f_panel
        if spec.vectors is not None:
            F = np.asarray(spec.vectors, dtype=float).T
            if F.shape[0] != self.model.n:
                raise DimensionError(f"panel vectors have length {F.shape[0]}, model has dimension {self.model.n}")
            return positivity._core.check_positive_panel(F)
        seed = self.seed if spec.seed is None else spec.seed
        return positivity.f_panel(self.model.n, self.T, spec.size, seed)

    def lambda0(self, value):
        return self.ctx.s if value is None else float(value)

    def probe(self, spec, lam0, sign):
        if isinstance(spec, ProbeSpec):
            gap = self.ctx.data.gap
            if not (np.isfinite(gap) and gap > 0):
                raise PreconditionError("a gap-relative probe needs a dominant s(A) with a finite gap")
            return lam0 + sign * spec.gap_fraction * gap
        return float(spec)


# analyses ---------------------------------------------------------------------------------
# each returns (passed, verdict, summary, tables)


def _analyze(ws: Workspace, spec):
    d = ws.ctx.data
    cl = spectral.spectrum_clusters(ws.model.A, ws.tol)
    periph = {complex(z) for z in d.peripheral}
    rows = sorted(((c.center.real, c.center.imag, c.size, complex(c.center) in periph) for c in cl),
                  key=lambda r: (-r[0], r[1]))
    facts = models.check_facts(ws.model, ws.tol)
    passed = all(ok for ok, _ in facts.values())
    summary = {
        "n": ws.n,
        "spectral_bound": d.spectral_bound,
        "lam0": d.lam0,
        "pole_order": d.pole_order,
        "alg_mult": d.alg_mult,
        "geo_mult": d.geo_mult,
        "dominant": d.dominant,
        "gap": d.gap,
        "peripheral": [complex(z) for z in d.peripheral],
        "facts": {k: {"passed": ok, "witness": w} for k, (ok, w) in facts.items()},
    }
    return passed, "facts_pass" if passed else "facts_fail", summary, [Table("spectrum", SPECTRUM_HEADER, rows)]


def _certify(ws: Workspace, spec):
    if spec.variant == "uniform":
        c = positivity.certify_uniform(ws.model.A, ws.S, ws.T, ws.u, ws.phi, ws.tol, ws.ctx)
    else:
        variant = spec.variant.split("_", 1)[1]
        c = positivity.certify_individual(ws.model.A, ws.lambda0(spec.lambda0), ws.S, ws.T, ws.u, ws.phi,
                                          variant, ws.tol)
    return c.certified, c.verdict, c.to_dict(), []


def _predicted_t0(ws: Workspace):
    c = positivity.certify_uniform(ws.model.A, ws.S, ws.T, ws.u, ws.phi, ws.tol, ws.ctx)
    return c.predicted.get("t0_pred") if c.certified else None


def _detect_semigroup(ws: Workspace, spec):
    g = ws.cfg.grids
    grid = positivity.default_time_grid(ws.ctx.time_scale(), g.t_nodes, g.t_span)
    t0_pred = _predicted_t0(ws) if spec.include_predicted_t0 else None
    extra = [t0_pred] if t0_pred is not None and np.isfinite(t0_pred) else []
    res = positivity.semigroup_scan(ws.model.A, ws.S, ws.T, ws.u, ws.F, grid, spec.require_tail, ws.tol, ws.ctx, extra)
    positive = all(r.positive for r in res)
    tail = all(r.tail_certified for r in res)
    t0 = max(r.threshold for r in res) if positive else None
    within = None if (t0 is None or not extra) else bool(t0 <= t0_pred)
    passed = positive and (tail or not spec.require_tail) and within is not False
    times = res[0].extra["times"]
    margins = np.min([[m for _, m in r.samples] for r in res], axis=0)
    lows = np.min([r.extra["min_masked_value"] for r in res], axis=0)
    rows = [(t, m, lo, tail) for t, m, lo in zip(times, margins, lows)]
    summary = {
        "panel_size": len(res),
        "positive": positive,
        "tail_certified": tail,
        "t0_max": t0,
        "t0_per_f": [r.threshold for r in res],
        "margin_min": min(r.margin for r in res),
        "t0_predicted": t0_pred,
        "within_prediction": within,
        "notes": sorted({n for r in res for n in r.notes}),
    }
    verdict = "detected" if passed else "not_detected"
    return passed, verdict, summary, [Table("trajectory", TRAJECTORY_HEADER, rows)]


def _detect_resolvent(ws: Workspace, spec):
    lam0 = ws.lambda0(spec.lambda0)
    sides = ("right", "left") if spec.side == "both" else (spec.side,)
    rows, summary, passed = [], {"lam0": lam0}, True
    for side in sides:
        res = positivity.resolvent_scan(ws.model.A, lam0, ws.S, ws.T, ws.u, ws.F, side, ws.cfg.grids.lambda_K,
                                        ws.tol, ws.ctx)
        sign = 1.0 if side == "right" else -1.0
        raw = np.array([r.extra["margin_raw"] for r in res])
        scaled = np.array([r.extra["margin_scaled"] for r in res])
        # the panel member closest to violating the side's sign condition
        worst_raw = sign * np.min(sign * raw, axis=0)
        worst_scaled = np.min(scaled, axis=0)
        lams = res[0].extra["lambda"]
        rows += [(lam, side, a, b) for lam, a, b in zip(lams, worst_raw, worst_scaled)]
        positive = all(r.positive for r in res)
        stabilized = all(r.extra["stabilized"] for r in res)
        tail = all(r.tail_certified for r in res)
        ratio = [r.extra["margin_scaled"][-1] / r.limit_margin for r in res if r.limit_margin]
        summary[side] = {
            "positive": positive,
            "lambda1": [r.threshold for r in res],
            "margin_min": min(r.margin for r in res),
            "stabilized": stabilized,
            "tail_certified": tail,
            "limit_margin": [r.limit_margin for r in res],
            "last_scaled_over_limit": ratio,
        }
        passed &= positive and tail
    return passed, "detected" if passed else "not_detected", summary, [Table("resolvent", RESOLVENT_HEADER, rows)]


def _principle(ws: Workspace, spec, which):
    lam0 = ws.lambda0(spec.lambda0)
    if which == "antimax":
        probe = ws.probe(spec.probe, lam0, -1.0)
        r = positivity.anti_maximum(ws.model.A, lam0, ws.S, ws.T, ws.u, ws.phi, probe, ws.F, ws.cfg.grids.lambda_K,
                                    ws.tol, ws.ctx)
    else:
        probe = ws.probe(spec.probe, lam0, 1.0)
        r = positivity.maximum_principle(ws.model.A, lam0, ws.S, ws.T, ws.u, ws.phi, probe, ws.F,
                                         ws.cfg.grids.lambda_K, ws.tol)
    passed = r.certificate.certified and r.detection.positive
    summary = r.to_dict() | {"probe": probe, "lam0": lam0}
    return passed, r.certificate.verdict, summary, []


def _laplace(ws: Workspace, spec):
    s = ws.ctx.s
    lam = s + spec.offset * (1.0 + abs(s))
    F = ws.F[:, :min(spec.vectors, ws.F.shape[1])]
    R = evolution.resolvent_apply(ws.model.A, lam, F, ws.tol)
    scale = np.max(np.abs(R), axis=0)
    # quadrature accuracy a decade below the requested relative agreement
    L = evolution.laplace_transform(ws.model.A, lam, F, tol_quad=0.1 * spec.rtol * float(np.min(scale)), tol=ws.tol)
    errs = (np.max(np.abs(L.value - R), axis=0) / scale).tolist()
    passed = max(errs) <= spec.rtol
    summary = {"lambda": lam, "relative_errors": errs, "rtol": spec.rtol, "panels": L.panels,
               "quadrature_error": L.error}
    return passed, "agree" if passed else "disagree", summary, []


def _ladder(ws: Workspace, spec):
    if spec.steps is not None:
        rungs = [ws.mask(m) for m in spec.steps]
    else:
        rungs = models.central_ladder(ws.n, tuple(spec.fractions), spec.trim)
    rep = positivity.ladder_consequences(ws.model.A, rungs, None, ws.u, None, ws.cfg.grids.lambda_K, ws.tol)
    passed = rep.all_passed and not rep.falsification_candidate
    verdict = "falsification_candidate" if rep.falsification_candidate else ("confirmed" if passed else "partial")
    return passed, verdict, rep.to_dict(), []


def _suite(ws: Workspace, spec):
    """Facts, certificates and the matching detectors; passes when nothing contradicts."""
    facts_ok, _, spec_summary, tables = _analyze(ws, spec)
    A, ctx = ws.model.A, ws.ctx
    cu = positivity.certify_uniform(A, ws.S, ws.T, ws.u, ws.phi, ws.tol, ctx)
    ci = None
    if ctx.data.rightmost_is_real:
        ci = positivity.certify_individual(A, ctx.s, ws.S, ws.T, ws.u, ws.phi, "semigroup", ws.tol)
    contradictions = []
    det = None
    if cu.certified or (ci is not None and ci.certified):
        t0_pred = cu.predicted.get("t0_pred") if cu.certified else None
        extra = [t0_pred] if t0_pred is not None and np.isfinite(t0_pred) else []
        g = ws.cfg.grids
        grid = positivity.default_time_grid(ctx.time_scale(), g.t_nodes, g.t_span)
        res = positivity.semigroup_scan(A, ws.S, ws.T, ws.u, ws.F, grid, True, ws.tol, ctx, extra)
        det = {"positive": all(r.positive for r in res), "tail_certified": all(r.tail_certified for r in res)}
        if not (det["positive"] and det["tail_certified"]):
            contradictions.append("certified but the semigroup detector did not confirm")
        elif extra:
            det["t0_max"] = max(r.threshold for r in res)
            if det["t0_max"] > t0_pred:
                contradictions.append("detected t0 exceeds the predicted uniform t0")
    passed = facts_ok and not contradictions
    summary = {
        "spectral": spec_summary,
        "certify_uniform": {"verdict": cu.verdict, "failed": list(cu.failed)},
        "certify_individual": None if ci is None else {"verdict": ci.verdict, "failed": list(ci.failed)},
        "detector": det,
        "contradictions": contradictions,
    }
    return passed, "consistent" if passed else "inconsistent", summary, tables


_HANDLERS = {
    "analyze": _analyze,
    "certify": _certify,
    "detect_semigroup": _detect_semigroup,
    "detect_resolvent": _detect_resolvent,
    "antimax": lambda ws, s: _principle(ws, s, "antimax"),
    "maxprinciple": lambda ws, s: _principle(ws, s, "maxprinciple"),
    "laplace_check": _laplace,
    "ladder": _ladder,
    "suite": _suite,
}


def _execute(ws: Workspace, index: int, spec) -> tuple[Record, list[Table]]:
    rec = Record(index, spec.kind, spec.label, expected=spec.expect)
    start = time.perf_counter()
    tables = []
    try:
        passed, verdict, summary, tables = _HANDLERS[spec.kind](ws, spec)
        rec.passed, rec.verdict, rec.summary = bool(passed), verdict, summary
        rec.verified = rec.passed == (spec.expect == "pass")
        if spec.expect_failed is not None:
            failed = summary.get("failed", summary.get("certificate", {}).get("failed", []))
            rec.verified &= list(failed) == list(spec.expect_failed)
        rec.exit_code = EXIT_OK if rec.verified else EXIT_SCIENTIFIC
    except (NumericalFailure, SpectrumError, np.linalg.LinAlgError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.summary = {"diagnostics": getattr(exc, "diagnostics", {})}
        rec.exit_code = EXIT_NUMERICAL
    except (PreconditionError, DimensionError, ConfigError) as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
        rec.exit_code = EXIT_CONFIG
    rec.seconds = time.perf_counter() - start
    rec.summary = json_safe(rec.summary) | {"tolerances": ws.tol.as_dict()}
    return rec, tables


def worker_count() -> int:
    raw = os.environ.get("EVPOS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"EVPOS_THREADS must be a positive integer, got {raw!r}") from None


def run_scenario(cfg: ScenarioConfig, out_dir: Path | None = None, tol_overrides: dict | None = None,
                 seed: int | None = None, kinds: tuple[str, ...] | None = None, defaults=()) -> RunResult:
    """Run the analyses of ``cfg`` (optionally only those of the given kinds).

    When ``kinds`` filters everything out, the analyses in ``defaults`` run
    instead. Records keep config order whatever the number of workers.
    """
    tol = cfg.tolerances.build()
    if tol_overrides:
        try:
            tol = tol.replace(**tol_overrides)
        except TypeError as exc:
            raise ConfigError(f"unknown tolerance in --tol: {exc}") from exc
    seed = cfg.seed if seed is None else seed
    analyses = list(cfg.analyses)
    if kinds is not None:
        analyses = [a for a in analyses if a.kind in kinds] or list(defaults)
    ws = Workspace(cfg, tol, seed)
    out = Path(out_dir if out_dir is not None else cfg.output.dir)
    workers = min(worker_count(), max(1, len(analyses)))
    if workers == 1:
        results = [_execute(ws, i, a) for i, a in enumerate(analyses)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda ia: _execute(ws, *ia), enumerate(analyses)))
    files = []
    records = []
    for rec, tables in results:
        for t in tables:
            path = out / f"{cfg.prefix}_{rec.index:02d}_{rec.kind}_{t.name}.csv"
            files.append(write_csv(path, t.header, t.rows))
            rec.artifacts.append(path.name)
        records.append(rec)
    code = max((r.exit_code for r in records), default=EXIT_OK)
    report = out / f"{cfg.prefix}_report.json"
    write_json(report, {
        "schema_version": cfg.schema_version,
        "scenario": cfg.name,
        "seed": seed,
        "model": {"kind": cfg.model.kind, "params": dict(cfg.model.params), "n": ws.n},
        "tolerances": tol.as_dict(),
        "exit_code": code,
        "records": [r.to_dict() for r in records],
    })
    return RunResult(cfg.name, records, code, report, files)
