from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, Field


class StageSpec(BaseModel):
    key: str
    type: str
    params: dict[str, Any] = {}
    requires: list[str] = []


class PipelineDefinition(BaseModel):
    stages: list[StageSpec] = Field(min_length=1)


class StageRunResponse(BaseModel):
    key: str
    type: str
    status: str
    input_data: dict
    output_data: dict
    error: Optional[str] = None
    execution_time_ms: float
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None

    model_config = {"from_attributes": True}


class PipelineRunResponse(BaseModel):
    id: str
    status: str
    definition: dict
    output_payload: dict
    error: Optional[str] = None
    exit_code: int = 0
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    stage_runs: list[StageRunResponse] = []

    model_config = {"from_attributes": True}
