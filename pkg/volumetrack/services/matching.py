"""
Max-covering bipartite assignment between trajectories (rows) and candidates (columns).

Coverage reward -lambda_P * p_j is folded into every edge entering candidate j, so
E = sum over matched edges of (lambda_D d + lambda_A a - lambda_P p_j). The solver
returns a maximum-cardinality matching of minimum energy via successive shortest
augmenting paths (Dijkstra with node potentials) on exact integers.
"""

import heapq
import itertools
import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np

from volumetrack.exceptions import EdgeNotFoundError, ProblemSizeError
from volumetrack.models.matching import AssignmentProblem, Edge, Matching
from volumetrack.schemas.matching import AssignmentDump, EdgeDump

logger = logging.getLogger(__name__)

COST_SCALE = 1_000_000
BRUTE_FORCE_LIMIT = 7


# ─── Problem construction ─────────────────────────────────────────────────────
def _euclidean(a: Any, b: Any) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)))


def build_problem(
    track_xy: np.ndarray,
    track_descriptors: list[Any],
    cand_xy: np.ndarray,
    cand_descriptors: list[Any],
    cand_prob: np.ndarray,
    gate_radius: float = 10.0,
    max_edges: int = 10,
    weights: tuple[float, float, float] = (1.0, 5.0, 20.0),
    distance: Callable[[Any, Any], float] = _euclidean,
) -> AssignmentProblem:
    """`distance` compares one track descriptor with one candidate descriptor (Euclidean on vectors by default)."""
    track_xy = np.asarray(track_xy, dtype=np.float64).reshape(-1, 2)
    cand_xy = np.asarray(cand_xy, dtype=np.float64).reshape(-1, 2)
    m, n = len(track_xy), len(cand_xy)
    edges: list[Edge] = []
    if m and n:
        dist = np.linalg.norm(track_xy[:, None, :] - cand_xy[None, :, :], axis=2)
        for i in range(m):
            gated = [j for j in range(n) if dist[i, j] <= gate_radius]
            gated.sort(key=lambda j: (dist[i, j], j))
            for j in sorted(gated[:max_edges]):
                a = distance(track_descriptors[i], cand_descriptors[j])
                edges.append(Edge(i, j, float(dist[i, j]), a))
    return AssignmentProblem(m, n, edges, np.clip(np.asarray(cand_prob, dtype=np.float64), 0.0, 1.0), weights)


def energy(problem: AssignmentProblem, matching: Matching | list[tuple[int, int]]) -> float:
    pairs = matching.pairs if isinstance(matching, Matching) else matching
    total = 0.0
    for i, j in pairs:
        e = problem.edge(i, j)
        if e is None:
            raise EdgeNotFoundError(f"pair ({i}, {j}) is not an edge of the problem")
        total += problem.edge_weight(e)
    return total


# ─── Exact integer weights ────────────────────────────────────────────────────
def _integer_weights(problem: AssignmentProblem) -> dict[tuple[int, int], int]:
    """
    Scaled, rounded edge weights with a lexicographic tie-break folded into the low bits:
    edge (i, j) earns a bonus of 2**(m*n - (i*n + j)), which is dominated by any unit of
    the scaled cost and prefers the lexicographically least pair list among equal costs.
    """
    mn = problem.m * problem.n
    shift = mn + 1
    weights = {}
    for e in problem.edges:
        w = int(round(COST_SCALE * problem.edge_weight(e)))
        weights[(e.i, e.j)] = (w << shift) - (1 << (mn - (e.i * problem.n + e.j)))
    return weights


# ─── Solver ───────────────────────────────────────────────────────────────────
def solve(problem: AssignmentProblem) -> Matching:
    m, n = problem.m, problem.n
    if not problem.edges:
        return Matching([], 0.0)
    weights = _integer_weights(problem)
    offset = max(0, -min(weights.values()))

    # nodes: 0 source, 1..m rows, m+1..m+n columns, m+n+1 sink
    source, sink = 0, m + n + 1
    size = m + n + 2
    graph: list[list[list[int]]] = [[] for _ in range(size)]  # [to, cap, cost, rev]

    def add_arc(u: int, v: int, cost: int) -> None:
        graph[u].append([v, 1, cost, len(graph[v])])
        graph[v].append([u, 0, -cost, len(graph[u]) - 1])

    for i in range(m):
        add_arc(source, 1 + i, 0)
    for (i, j) in sorted(weights):
        add_arc(1 + i, 1 + m + j, weights[(i, j)] + offset)
    for j in range(n):
        add_arc(1 + m + j, sink, 0)

    potential = [0] * size
    while True:
        dist: list[int | None] = [None] * size
        parent: list[tuple[int, int] | None] = [None] * size
        dist[source] = 0
        heap = [(0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d != dist[u]:
                continue
            for k, (v, cap, cost, _) in enumerate(graph[u]):
                if cap <= 0:
                    continue
                nd = d + cost + potential[u] - potential[v]
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    parent[v] = (u, k)
                    heapq.heappush(heap, (nd, v))
        if dist[sink] is None:
            break
        reach_max = max(d for d in dist if d is not None)
        for v in range(size):
            potential[v] += dist[v] if dist[v] is not None else reach_max
        v = sink
        while v != source:
            u, k = parent[v]
            arc = graph[u][k]
            arc[1] -= 1
            graph[v][arc[3]][1] += 1
            v = u

    pairs = []
    for i in range(m):
        for v, cap, _, _ in graph[1 + i]:
            if m < v <= m + n and cap == 0:
                pairs.append((i, v - 1 - m))
    pairs.sort()
    return Matching(pairs, energy(problem, pairs))


def brute_force(problem: AssignmentProblem) -> Matching:
    """Exhaustive reference solver over all partial injections; same objective and tie-break as solve."""
    if problem.m > BRUTE_FORCE_LIMIT or problem.n > BRUTE_FORCE_LIMIT:
        raise ProblemSizeError(f"brute_force supports at most {BRUTE_FORCE_LIMIT}x{BRUTE_FORCE_LIMIT}, got {problem.m}x{problem.n}")
    weights = _integer_weights(problem)
    options = [[None] + [j for j in range(problem.n) if (i, j) in weights] for i in range(problem.m)]
    best_key = None
    best_pairs: list[tuple[int, int]] = []
    for choice in itertools.product(*options):
        used = [j for j in choice if j is not None]
        if len(used) != len(set(used)):
            continue
        pairs = [(i, j) for i, j in enumerate(choice) if j is not None]
        key = (-len(pairs), sum(weights[p] for p in pairs))
        if best_key is None or key < best_key:
            best_key, best_pairs = key, pairs
    return Matching(best_pairs, energy(problem, best_pairs))


# ─── Debug dump ───────────────────────────────────────────────────────────────
def to_dump(problem: AssignmentProblem, matching: Matching) -> AssignmentDump:
    return AssignmentDump(
        m=problem.m,
        n=problem.n,
        edges=[EdgeDump(i=e.i, j=e.j, d=e.d, a=e.a) for e in problem.edges],
        p=problem.p.tolist(),
        weights=list(problem.weights),
        pairs=matching.pairs,
        energy=matching.energy,
    )


def from_dump(dump: AssignmentDump) -> tuple[AssignmentProblem, Matching]:
    problem = AssignmentProblem(
        dump.m, dump.n, [Edge(e.i, e.j, e.d, e.a) for e in dump.edges], np.asarray(dump.p), tuple(dump.weights)
    )
    return problem, Matching([tuple(p) for p in dump.pairs], dump.energy)


def dump_problem(path: Path, problem: AssignmentProblem, matching: Matching) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(to_dump(problem, matching).model_dump_json(by_alias=True) + "\n")
    logger.debug("assignment dumped to %s (%dx%d, %d edges)", path, problem.m, problem.n, len(problem.edges))
