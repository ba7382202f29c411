"""JSON scenario files: schema, loading and validation."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .tolerances import Tolerances

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "ScenarioConfig",
    "SuiteConfig",
    "bundled_scenarios",
    "load_scenario",
    "load_suite",
    "locate",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FractionMask(_Strict):
    fraction: float = Field(gt=0, le=1)


class IndexMask(_Strict):
    indices: list[int] = Field(min_length=1)


class RangeMask(_Strict):
    range: tuple[int, int]


# a name refers to a mask the model defines ("full" always exists)
MaskSpec = Union[str, FractionMask, IndexMask, RangeMask]


class ModelSpec(_Strict):
    kind: str
    params: dict[str, Union[int, float, bool, list[float]]] = Field(default_factory=dict)


class TolerancesSpec(_Strict):
    eps_pos: float | None = Field(None, gt=0)
    tol_eig: float | None = Field(None, gt=0)
    tol_cluster: float | None = Field(None, gt=0)
    tol_rank: float | None = Field(None, gt=0)
    tol_proj: float | None = Field(None, gt=0)
    tol_quad: float | None = Field(None, gt=0)
    tol_sing: float | None = Field(None, gt=0)

    def build(self) -> Tolerances:
        return Tolerances().replace(**{k: v for k, v in self.model_dump().items() if v is not None})


class GridSpec(_Strict):
    t_nodes: int = Field(64, ge=2)
    t_span: tuple[float, float] = (1e-3, 50.0)
    lambda_K: int = Field(20, ge=2, le=60)

    @model_validator(mode="after")
    def _span(self):
        if not 0 < self.t_span[0] < self.t_span[1]:
            raise ValueError("t_span must satisfy 0 < start < stop")
        return self


class PanelSpec(_Strict):
    size: int = Field(20, ge=2)
    seed: int | None = None
    vectors: list[list[float]] | None = None


class OutputSpec(_Strict):
    dir: str = "evpos_out"
    prefix: str | None = None


class _Analysis(_Strict):
    label: str | None = None
    expect: Literal["pass", "fail"] = "pass"
    expect_failed: list[str] | None = None


class AnalyzeSpec(_Analysis):
    kind: Literal["analyze"]


class CertifySpec(_Analysis):
    kind: Literal["certify"]
    variant: Literal["individual_semigroup", "individual_resolvent", "uniform"] = "uniform"
    lambda0: float | None = None


class DetectSemigroupSpec(_Analysis):
    kind: Literal["detect_semigroup"]
    require_tail: bool = True
    include_predicted_t0: bool = True


class DetectResolventSpec(_Analysis):
    kind: Literal["detect_resolvent"]
    side: Literal["right", "left", "both"] = "both"
    lambda0: float | None = None


class ProbeSpec(_Strict):
    # probe = lambda0 -+ gap_fraction * gap (sign set by the principle)
    gap_fraction: float = Field(gt=0)


class AntimaxSpec(_Analysis):
    kind: Literal["antimax"]
    probe: Union[float, ProbeSpec] = ProbeSpec(gap_fraction=0.5)
    lambda0: float | None = None


class MaxPrincipleSpec(_Analysis):
    kind: Literal["maxprinciple"]
    probe: Union[float, ProbeSpec] = ProbeSpec(gap_fraction=0.5)
    lambda0: float | None = None


class LaplaceCheckSpec(_Analysis):
    kind: Literal["laplace_check"]
    # lambda = s(A) + offset * (1 + |s(A)|)
    offset: float = Field(1.0, gt=0.1)
    rtol: float = Field(1e-6, gt=0)
    vectors: int = Field(3, ge=1)


class LadderSpec(_Analysis):
    kind: Literal["ladder"]
    fractions: list[float] = Field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8])
    trim: int = Field(1, ge=0)
    steps: list[MaskSpec] | None = None


class SuiteAnalysisSpec(_Analysis):
    kind: Literal["suite"]


AnalysisSpec = Annotated[
    Union[AnalyzeSpec, CertifySpec, DetectSemigroupSpec, DetectResolventSpec, AntimaxSpec, MaxPrincipleSpec,
          LaplaceCheckSpec, LadderSpec, SuiteAnalysisSpec],
    Field(discriminator="kind"),
]
ANALYSIS_KINDS = ("analyze", "certify", "detect_semigroup", "detect_resolvent", "antimax", "maxprinciple",
                  "laplace_check", "ladder", "suite")


class ScenarioConfig(_Strict):
    """One model, its masks and an ordered list of analyses."""

    schema_version: Literal[1]
    name: str
    seed: int = 0
    model: ModelSpec
    S: MaskSpec = "S"
    T: MaskSpec = "T"
    u: list[float] | None = None
    phi: list[float] | None = None
    analyses: list[AnalysisSpec] = Field(min_length=1)
    tolerances: TolerancesSpec = TolerancesSpec()
    grids: GridSpec = GridSpec()
    f_panel: PanelSpec = PanelSpec()
    output: OutputSpec = OutputSpec()

    @property
    def prefix(self) -> str:
        return self.output.prefix or self.name


class SuiteConfig(_Strict):
    """A list of scenario files run one after another."""

    schema_version: Literal[1]
    name: str = "suite"
    scenarios: list[str] = Field(min_length=1)
    output: OutputSpec = OutputSpec()


def _field_path(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def _parse(model, text: str, origin: str):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{origin}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    try:
        return model.model_validate(raw, strict=False)
    except ValidationError as exc:
        lines = [f"{origin}: {_field_path(e['loc'])}: {e['msg']}" for e in exc.errors()]
        raise ConfigError("\n".join(lines)) from exc


def bundled_scenarios() -> list[str]:
    root = resources.files("evpos") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def locate(path: str | Path) -> Path:
    """Resolve a scenario path, falling back to the bundled file of the same basename."""
    p = Path(path)
    if p.is_file():
        return p
    bundled = resources.files("evpos") / "scenarios" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"{path}: no such scenario file (bundled: {', '.join(bundled_scenarios())})")


def load_scenario(path: str | Path) -> ScenarioConfig:
    p = locate(path)
    return _parse(ScenarioConfig, p.read_text(), str(path))


def load_suite(path: str | Path) -> SuiteConfig:
    p = locate(path)
    return _parse(SuiteConfig, p.read_text(), str(path))


def parse_scenario(text: str, origin: str = "<string>") -> ScenarioConfig:
    return _parse(ScenarioConfig, text, origin)
