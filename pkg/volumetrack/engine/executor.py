"""
Pipeline Execution Engine
- Topological sort of stages over `requires`
- Execute each stage in order, resolving {{stage.output.field}} params
- Record status, timing and traceback per stage
- Stop the run at the first failed stage
"""

import logging
import time
import traceback
from collections import defaultdict, deque
from datetime import datetime
from typing import Any, Optional

from volumetrack.engine.stage_handlers import get_stage_handler
from volumetrack.exceptions import ConfigError, VolumeTrackError
from volumetrack.models.run import PipelineRun, StageRun
from volumetrack.schemas.run import PipelineDefinition, StageSpec
from volumetrack.utils.expression import interpolate

logger = logging.getLogger(__name__)


class PipelineExecutor:
    def __init__(self):
        self.context: dict[str, Any] = {}

    def execute(self, definition: PipelineDefinition, run: Optional[PipelineRun] = None) -> PipelineRun:
        run = run or PipelineRun(definition=definition.model_dump())
        run.status = "running"
        run.started_at = datetime.utcnow()
        self.context = {"run": {"id": run.id}}

        try:
            stages = {s.key: s for s in definition.stages}
            if len(stages) != len(definition.stages):
                raise ConfigError("stage keys must be unique")
            for stage in definition.stages:
                get_stage_handler(stage.type)
            order = self._topological_sort(stages)

            for key in order:
                stage_run = self._execute_stage(stages[key])
                run.stage_runs.append(stage_run)
                if stage_run.status == "failed":
                    run.status = "failed"
                    run.error = f"Stage {key} failed: {stage_run.error}"
                    run.exit_code = self.exit_code
                    break

            if run.status != "failed":
                run.status = "completed"
                run.output_payload = self.context.get("_last_output", {})

        except VolumeTrackError as e:
            run.status = "failed"
            run.error = str(e)
            run.exit_code = e.exit_code
        except Exception:
            run.status = "failed"
            run.error = traceback.format_exc()
            run.exit_code = 1

        run.completed_at = datetime.utcnow()
        logger.info("run %s %s", run.id, run.status)
        return run

    def _execute_stage(self, stage: StageSpec) -> StageRun:
        stage_run = StageRun(key=stage.key, type=stage.type, status="running", started_at=datetime.utcnow())
        logger.info("stage %s (%s) started", stage.key, stage.type)
        start_time = time.perf_counter()

        try:
            resolved = interpolate(stage.params, self.context, strict=True)
            stage_run.input_data = resolved
            result = get_stage_handler(stage.type).execute(resolved, self.context)
            output = result.get("output", {})
            self.context[stage.key] = {"output": output}
            self.context["_last_output"] = output
            stage_run.output_data = output
            stage_run.status = "completed"
        except Exception as e:
            stage_run.status = "failed"
            stage_run.error = traceback.format_exc()
            self.context["_exit_code"] = e.exit_code if isinstance(e, VolumeTrackError) else 1

        stage_run.execution_time_ms = (time.perf_counter() - start_time) * 1000
        stage_run.completed_at = datetime.utcnow()
        logger.info("stage %s %s in %.1f ms", stage.key, stage_run.status, stage_run.execution_time_ms)
        return stage_run

    @property
    def exit_code(self) -> int:
        return int(self.context.get("_exit_code", 0))

    def _topological_sort(self, stages: dict[str, StageSpec]) -> list[str]:
        """Kahn's algorithm; definition order breaks ties."""
        in_degree: dict[str, int] = {key: 0 for key in stages}
        adjacency: dict[str, list[str]] = defaultdict(list)

        for key, stage in stages.items():
            for dep in stage.requires:
                if dep not in stages:
                    raise ConfigError(f"stage {key} requires unknown stage {dep}")
                adjacency[dep].append(key)
                in_degree[key] += 1

        queue = deque([key for key in stages if in_degree[key] == 0])
        sorted_stages = []
        while queue:
            current = queue.popleft()
            sorted_stages.append(current)
            for neighbor in adjacency.get(current, []):
                in_degree[neighbor] -= 1
                if in_degree[neighbor] == 0:
                    queue.append(neighbor)

        if len(sorted_stages) != len(stages):
            cyclic = sorted(set(stages) - set(sorted_stages))
            raise ConfigError(f"stage dependencies form a cycle: {cyclic}")
        return sorted_stages
