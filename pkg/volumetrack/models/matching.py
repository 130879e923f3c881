from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Edge:
    i: int  # trajectory
    j: int  # candidate
    d: float
    a: float


@dataclass
class AssignmentProblem:
    m: int
    n: int
    edges: list[Edge]
    p: np.ndarray
    weights: tuple[float, float, float] = (1.0, 5.0, 20.0)  # lambda_D, lambda_A, lambda_P
    _index: dict[tuple[int, int], Edge] = field(init=False, repr=False)

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64).reshape(self.n)
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise ValueError("coverage rewards must lie in [0, 1]")
        if any(w < 0 for w in self.weights):
            raise ValueError("matching weights must be nonnegative")
        self._index = {}
        for e in self.edges:
            if not (0 <= e.i < self.m and 0 <= e.j < self.n):
                raise ValueError(f"edge ({e.i}, {e.j}) outside a {self.m}x{self.n} problem")
            if e.d < 0 or e.a < 0:
                raise ValueError(f"edge ({e.i}, {e.j}) has a negative cost")
            self._index[(e.i, e.j)] = e

    def edge(self, i: int, j: int) -> Edge | None:
        return self._index.get((i, j))

    def edge_weight(self, e: Edge) -> float:
        lam_d, lam_a, lam_p = self.weights
        return lam_d * e.d + lam_a * e.a - lam_p * float(self.p[e.j])


@dataclass
class Matching:
    pairs: list[tuple[int, int]]
    energy: float = 0.0
