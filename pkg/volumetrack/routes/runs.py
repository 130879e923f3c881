import threading

from fastapi import APIRouter, BackgroundTasks, HTTPException

from volumetrack.config import get_settings
from volumetrack.engine.executor import PipelineExecutor
from volumetrack.models.run import PipelineRun
from volumetrack.schemas.run import PipelineDefinition, PipelineRunResponse

router = APIRouter(prefix="/runs", tags=["runs"])

# finished runs beyond MAX_RUNS are dropped from memory oldest first; their RUNS_DIR record stays
MAX_RUNS = 200
_RUNS: dict[str, PipelineRun] = {}
_LOCK = threading.Lock()


def _evict() -> None:
    finished = [k for k, r in _RUNS.items() if r.status in ("completed", "failed")]
    for key in finished[: max(0, len(_RUNS) - MAX_RUNS)]:
        del _RUNS[key]


def _execute(definition: PipelineDefinition, run: PipelineRun) -> None:
    PipelineExecutor().execute(definition, run)
    runs_dir = get_settings().RUNS_DIR
    runs_dir.mkdir(parents=True, exist_ok=True)
    (runs_dir / f"{run.id}.json").write_text(PipelineRunResponse.model_validate(run).model_dump_json(indent=2))
    with _LOCK:
        _evict()


@router.post("", response_model=PipelineRunResponse, status_code=202)
def create_run(definition: PipelineDefinition, background_tasks: BackgroundTasks):
    run = PipelineRun(definition=definition.model_dump())
    with _LOCK:
        _RUNS[run.id] = run
    # sync background tasks run in the threadpool after the response is sent
    background_tasks.add_task(_execute, definition, run)
    return PipelineRunResponse.model_validate(run)


@router.get("", response_model=list[PipelineRunResponse])
def list_runs(status: str | None = None, limit: int = 50):
    with _LOCK:
        runs = list(_RUNS.values())
    if status:
        runs = [r for r in runs if r.status == status]
    runs.sort(key=lambda r: r.started_at.timestamp() if r.started_at else float("inf"), reverse=True)
    return [PipelineRunResponse.model_validate(r) for r in runs[:limit]]


@router.get("/{run_id}", response_model=PipelineRunResponse)
def get_run(run_id: str):
    with _LOCK:
        run = _RUNS.get(run_id)
    if run:
        return PipelineRunResponse.model_validate(run)
    runs_dir = get_settings().RUNS_DIR
    record = runs_dir / f"{run_id}.json"
    if record.parent == runs_dir and record.is_file():
        return PipelineRunResponse.model_validate_json(record.read_text())
    raise HTTPException(status_code=404, detail="Run not found")


def clear_runs() -> None:
    with _LOCK:
        _RUNS.clear()
