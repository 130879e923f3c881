import uuid
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Optional


@dataclass
class StageRun:
    key: str
    type: str
    status: str = "pending"
    input_data: dict = field(default_factory=dict)
    output_data: dict = field(default_factory=dict)
    error: Optional[str] = None
    execution_time_ms: float = 0.0
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None


@dataclass
class PipelineRun:
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    status: str = "pending"
    definition: dict = field(default_factory=dict)
    output_payload: dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None
    exit_code: int = 0
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None
    stage_runs: list[StageRun] = field(default_factory=list)
