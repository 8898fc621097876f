# app/models/cli_responses.py
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field


class IssueDTO(BaseModel):
    error: str
    message: str
    diagnostics: Dict[str, Any] = Field(default_factory=dict)


class StageTimingDTO(BaseModel):
    stage: str
    start_time: str
    end_time: str
    duration_ms: int
    duration_sec: float
    status: Literal["success", "failed"]


class RunPayload(BaseModel):
    """What every subcommand prints on stdout."""
    run_id: str
    status: Literal["success", "failure"]
    stage: str
    summary: str
    issues: List[IssueDTO] = Field(default_factory=list)
    data: Dict[str, Any] = Field(default_factory=dict)


class GroupOrderDTO(BaseModel):
    name: str
    order: int
    predicted: int
    ok: bool
    max_element_order: int


class LatticeEdgeDTO(BaseModel):
    subgroup: str
    supergroup: str
    expected_index: int
    index: Optional[int] = None
    normal: bool
    ok: bool


class RunManifest(BaseModel):
    """Everything needed to reproduce a run."""
    run_id: str
    command: str
    config: Dict[str, Any]
    seed: int
    code_version: str
    numpy_version: str
    scipy_version: str
    stage_timings: List[StageTimingDTO] = Field(default_factory=list)
    outputs: Dict[str, str] = Field(default_factory=dict)
    status: str = "success"
