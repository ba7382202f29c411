"""``evpos`` command line."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import runner
from .errors import ConfigError, DimensionError, EvposError, NumericalFailure, PreconditionError, SpectrumError
from .reporting import cell, write_csv, write_json
from .scenario import (
    AnalyzeSpec,
    AntimaxSpec,
    CertifySpec,
    DetectResolventSpec,
    DetectSemigroupSpec,
    LadderSpec,
    LaplaceCheckSpec,
    SuiteAnalysisSpec,
    load_scenario,
    load_suite,
    locate,
)

# subcommand -> (analysis kinds it selects from the config, analyses run when none match)
SELECTIONS = {
    "run": (None, ()),
    "analyze": (("analyze",), (AnalyzeSpec(kind="analyze"),)),
    "certify": (("certify",), (CertifySpec(kind="certify"),)),
    "detect": (("detect_semigroup", "detect_resolvent"),
               (DetectSemigroupSpec(kind="detect_semigroup"), DetectResolventSpec(kind="detect_resolvent"))),
    "antimax": (("antimax", "maxprinciple"), (AntimaxSpec(kind="antimax"),)),
    "laplace-check": (("laplace_check",), (LaplaceCheckSpec(kind="laplace_check"),)),
    "ladder": (("ladder",), (LadderSpec(kind="ladder"),)),
}


def _tol_pairs(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VAL, got {item!r}")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise ConfigError(f"--tol {key}: {val!r} is not a number") from None
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (bundled scenarios may be named by basename)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", action="append", metavar="KEY=VAL", help="override a tolerance (repeatable)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    p = argparse.ArgumentParser(prog="evpos", description="Eventual positivity laboratory for matrix semigroups.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run every analysis of a scenario",
        "analyze": "spectral report and model facts",
        "certify": "hypothesis certificates",
        "detect": "semigroup and resolvent detectors",
        "antimax": "anti-maximum and maximum principles",
        "laplace-check": "Laplace transform against the resolvent",
        "ladder": "consequences along a mask ladder",
        "suite": "run a suite file (default: the bundled suite) or the suite battery of one scenario",
        "emit-model": "write the matrix and masks as CSV",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("scenario", nargs="?", help="scenario JSON (alternative to --config)")
    return p


def _config_path(args, default=None):
    path = args.scenario or args.config or default
    if path is None:
        raise ConfigError("no scenario given (positional argument or --config)")
    return path


def _print_records(res, quiet):
    if quiet:
        return
    for r in res.records:
        status = "ok" if r.verified else ("ERROR" if r.error else "FAIL")
        label = f" [{r.label}]" if r.label else ""
        detail = r.error or r.verdict
        print(f"{res.scenario}#{r.index} {r.kind}{label}: {status} ({detail}, {r.seconds:.2f}s)")
    print(f"{res.scenario}: exit {res.exit_code}; report {res.report}")


def _run(args) -> int:
    tol = _tol_pairs(args.tol)
    out = Path(args.out) if args.out else None
    if args.command == "suite":
        path = _config_path(args, "suite.json")
        try:
            raw = json.loads(locate(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        if isinstance(raw, dict) and "scenarios" in raw:
            return _run_suite(path, out, tol, args)
        cfg = load_scenario(path)
        res = runner.run_scenario(cfg, out, tol, args.seed, ("suite",), (SuiteAnalysisSpec(kind="suite"),))
        _print_records(res, args.quiet)
        return res.exit_code
    cfg = load_scenario(_config_path(args))
    if args.command == "emit-model":
        return _emit_model(cfg, out, tol, args)
    kinds, defaults = SELECTIONS[args.command]
    res = runner.run_scenario(cfg, out, tol, args.seed, kinds, defaults)
    _print_records(res, args.quiet)
    return res.exit_code


def _run_suite(path, out, tol, args) -> int:
    suite_path = locate(path)
    suite = load_suite(path)
    out = out or Path(suite.output.dir)
    codes, summary = [], []
    for entry in suite.scenarios:
        candidate = suite_path.parent / entry
        cfg = load_scenario(candidate if candidate.is_file() else entry)
        res = runner.run_scenario(cfg, out, tol, args.seed)
        _print_records(res, args.quiet)
        codes.append(res.exit_code)
        summary.append({"scenario": cfg.name, "exit_code": res.exit_code, "report": res.report.name})
    code = max(codes)
    write_json(out / f"{suite.name}_summary.json", {"suite": suite.name, "exit_code": code, "scenarios": summary})
    if not args.quiet:
        print(f"suite {suite.name}: exit {code}")
    return code


def _emit_model(cfg, out, tol, args) -> int:
    ws = runner.Workspace(cfg, cfg.tolerances.build().replace(**tol), cfg.seed if args.seed is None else args.seed)
    out = out or Path(cfg.output.dir)
    A = ws.model.A
    a_path = write_csv(out / f"{cfg.prefix}_A.csv", [f"c{j}" for j in range(ws.n)], A.tolist())
    names = sorted(ws.model.masks)
    rows = [[i] + [bool(ws.model.masks[k].mask[i]) for k in names] for i in range(ws.n)]
    m_path = write_csv(out / f"{cfg.prefix}_masks.csv", ["index"] + names, rows)
    if not args.quiet:
        print(f"wrote {a_path} and {m_path} (n={ws.n}, max|A|={cell(float(np.max(np.abs(A))))})")
    return runner.EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, PreconditionError, DimensionError) as exc:
        print(f"evpos: config error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except (NumericalFailure, SpectrumError, np.linalg.LinAlgError) as exc:
        print(f"evpos: numerical failure: {exc}", file=sys.stderr)
        return runner.EXIT_NUMERICAL
    except EvposError as exc:
        print(f"evpos: {exc}", file=sys.stderr)
        return runner.EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
