# app/models/cli_requests.py
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, Field, model_validator

from app.config.settings import settings


class RunOptions(BaseModel):
    """Options shared by every subcommand."""
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    output_dir: Path = Field(default_factory=lambda: settings.OUTPUT_DIR)


class GroupsRequest(RunOptions):
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)


class TilingRequest(RunOptions):
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    samples: int = Field(100_000, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.m < self.k:
            raise ValueError("expected m >= k")
        return self


class PlateauRequest(RunOptions):
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    j: int = 0
    l: int = 0
    n: int = Field(16, ge=2)
    tol: float = Field(1e-3, gt=0)
    max_iters: int = Field(2000, ge=1)
    metric: Literal["h1", "l2"] = "h1"
    dual: bool = False

    @model_validator(mode="after")
    def _ordered(self):
        if self.m < self.k:
            raise ValueError("expected m >= k")
        return self


class BuildLawsonRequest(RunOptions):
    m: int = Field(..., ge=1)
    k: int = Field(..., ge=1)
    n: int = Field(16, ge=8)
    variant: Literal["standard", "odd", "dual", "dual_odd"] = "standard"
    tol: float = Field(1e-3, gt=0)
    max_iters: int = Field(2000, ge=1)
    ladder: Optional[List[int]] = Field(
        default=None,
        description="Resolutions for the Richardson ladder, each twice the previous.",
    )
    out: Optional[Path] = None
    report: Optional[Path] = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.m < self.k:
            raise ValueError("expected m >= k")
        if self.n % 2:
            raise ValueError("n must be even")
        return self


class ExportRequest(BuildLawsonRequest):
    pole: Optional[List[float]] = Field(default=None, min_length=4, max_length=4)
    out_dir: Optional[Path] = None


class OrbifoldRequest(RunOptions):
    action: Literal["classify", "table"] = "classify"
    m: Optional[int] = Field(default=None, ge=1)
    k: Optional[int] = Field(default=None, ge=1)
    g: Optional[int] = None
    max_m: int = Field(6, ge=1)
    max_k: int = Field(6, ge=1)
    format: Literal["markdown", "csv"] = "markdown"

    @model_validator(mode="after")
    def _classify_args(self):
        if self.action == "classify" and None in (self.m, self.k, self.g):
            raise ValueError("classify needs m, k and g")
        return self


# ==============================================================
# FLOW
# ==============================================================

class StepConfig(BaseModel):
    initial_step: Optional[float] = Field(
        default=None, gt=0, description="Defaults to 0.5 * (mean edge)^4."
    )
    armijo: float = Field(1e-4, gt=0, lt=0.5)
    shrink: float = Field(0.5, gt=0, lt=1)
    growth: float = Field(1.2, ge=1)
    growth_after: int = Field(5, ge=1)
    max_backtracks: int = Field(50, ge=1)


class StopConfig(BaseModel):
    grad_tol: float = Field(1e-4, gt=0)
    max_iters: int = Field(200, ge=1)
    degeneration_ratio: float = Field(1e-3, gt=0)
    min_angle_deg: float = Field(1.0, gt=0)


class FlowConfig(RunOptions):
    """Symmetric Willmore descent run; loaded from TOML or JSON."""
    m: int = Field(1, ge=1)
    k: int = Field(1, ge=1)
    group: str = "G_tilde"
    generators: Optional[List[str]] = Field(
        default=None,
        description="Generator names defining a custom group; overrides `group`.",
    )
    source: Literal["lawson", "sphere", "file", "neck_probe"] = "lawson"
    variant: Literal["standard", "odd", "dual", "dual_odd"] = "standard"
    n: int = Field(8, ge=8)
    sphere_level: int = Field(3, ge=0)
    path: Optional[Path] = None
    perturbation: float = Field(0.0, ge=0)
    gradient_mode: Literal["auto", "autodiff", "fd"] = "auto"
    step: StepConfig = Field(default_factory=StepConfig)
    stop: StopConfig = Field(default_factory=StopConfig)
    diagnostics_every: int = Field(10, ge=1)
    neck_seeds: int = Field(4, ge=1)

    @model_validator(mode="after")
    def _source_args(self):
        if self.source == "file" and self.path is None:
            raise ValueError("source 'file' needs a path")
        if self.source in ("lawson", "neck_probe") and self.m < self.k:
            raise ValueError("expected m >= k")
        return self


def read_flow_params(path: Path) -> dict:
    """TOML first, JSON as fallback. Raises ValueError when neither parses."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as toml_error:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            raise ValueError(f"{path} is neither TOML nor JSON: {toml_error}") from toml_error
    if not isinstance(data, dict):
        raise ValueError(f"{path} must hold a table of settings")
    return data


def load_flow_config(path: Path) -> FlowConfig:
    return FlowConfig.model_validate(read_flow_params(path))


class ExperimentConfig(BaseModel):
    """What the orchestrator records for one run."""
    command: str
    params: dict
    seed: int
    output_dir: Path
