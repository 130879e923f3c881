from pydantic import BaseModel, Field


class EdgeDump(BaseModel):
    i: int
    j: int
    d: float
    a: float


class AssignmentDump(BaseModel):
    """Problem + solution snapshot written for failure triage."""
    m: int
    n: int
    edges: list[EdgeDump]
    p: list[float]
    weights: list[float] = Field(alias="lambda")
    pairs: list[tuple[int, int]]
    energy: float

    model_config = {"populate_by_name": True}
