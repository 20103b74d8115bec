"""Experiment pipelines: synthetic recovery, pairwise matrices, clustering,
and redistricting-plan comparison.

Synthetic pairs are random geometric graphs with normalized hop-count
geodesics and Gaussian features, a planted subset of which shifts in mean
between the two objects.  Redistricting plans are compared district by
district after an exact minimum-Hamming assignment, with population-
normalized measures and hop-count geodesics inside each district.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    FsFgwConfig,
    FsfgwError,
    InvalidConfig,
    ShapeMismatch,
    SolveResult,
    StructuredObject,
    SuppressionWeights,
)
from .suppression import solve_fsfgw

__all__ = [
    "DisconnectedAfterRetries",
    "EmptySet",
    "InvalidMatrix",
    "DisconnectedDistrict",
    "DistrictCountMismatch",
    "PrecinctUniverseMismatch",
    "PairwiseSolveError",
    "InvalidObjectFile",
    "SyntheticSpec",
    "generate_synthetic_pair",
    "separation_metric",
    "RocPoint",
    "RocSweep",
    "roc_sweep",
    "PairRecord",
    "pairwise_distance_matrix",
    "Merge",
    "complete_linkage_cluster",
    "geodesic_structure",
    "PrecinctGraph",
    "RedistrictingPlan",
    "district_object",
    "match_districts",
    "PlanComparison",
    "compare_plans",
    "load_structured_object",
    "structured_object_to_dict",
    "load_precinct_graph",
    "load_plan_csv",
]

logger = logging.getLogger("fsfgw")

RESAMPLE_ATTEMPTS = 20


class DisconnectedAfterRetries(FsfgwError):
    """No sufficiently large connected component after resampling."""


class EmptySet(FsfgwError):
    """The differentiating set must be a nonempty proper subset."""


class InvalidMatrix(FsfgwError):
    """A distance matrix is not symmetric/zero-diagonal/nonnegative."""


class DisconnectedDistrict(FsfgwError):
    """A district induces a disconnected subgraph."""


class DistrictCountMismatch(FsfgwError):
    """Two plans have different district counts."""


class PrecinctUniverseMismatch(FsfgwError):
    """Two plans do not cover the same precincts."""


class PairwiseSolveError(FsfgwError):
    """A pairwise solve failed; the message names the pair."""


class InvalidObjectFile(FsfgwError):
    """A structured-object JSON document violates the schema."""


# ---------------------------------------------------------------------------
# graph helpers


def _bfs_hops(neighbors: list[list[int]], source: int) -> np.ndarray:
    hops = np.full(len(neighbors), -1, dtype=np.int64)
    hops[source] = 0
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for other in neighbors[node]:
            if hops[other] < 0:
                hops[other] = hops[node] + 1
                queue.append(other)
    return hops


def _bfs_order(neighbors: list[list[int]], source: int) -> list[int]:
    seen = [False] * len(neighbors)
    seen[source] = True
    order = [source]
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for other in neighbors[node]:
            if not seen[other]:
                seen[other] = True
                order.append(other)
                queue.append(other)
    return order


def _neighbor_lists(edges: Sequence[tuple[int, int]], n: int) -> list[list[int]]:
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    return neighbors


def geodesic_structure(
    adjacency: Sequence[tuple[int, int]], nodes: Sequence[int]
) -> np.ndarray:
    """Hop-count geodesic matrix of the subgraph induced by ``nodes``,
    divided by its maximum (a single node yields [[0]]).

    Raises ``DisconnectedDistrict`` naming the components when the induced
    subgraph is disconnected.
    """

    nodes = [int(v) for v in nodes]
    if len(nodes) == 0:
        raise ShapeMismatch("cannot build a geodesic matrix on zero nodes")
    if len(set(nodes)) != len(nodes):
        raise ShapeMismatch("induced node set contains duplicates")
    local = {v: i for i, v in enumerate(nodes)}
    k = len(nodes)
    edges = [
        (local[i], local[j])
        for i, j in adjacency
        if i in local and j in local and i != j
    ]
    neighbors = _neighbor_lists(edges, k)
    C = np.zeros((k, k))
    for s in range(k):
        hops = _bfs_hops(neighbors, s)
        if hops.min() < 0:
            comps = _components(neighbors)
            named = [sorted(nodes[i] for i in comp) for comp in comps]
            raise DisconnectedDistrict(
                f"induced subgraph on {k} nodes splits into components {named}"
            )
        C[s] = hops
    mx = C.max(initial=0.0)
    if mx > 0.0:
        C /= mx
    return C


def _components(neighbors: list[list[int]]) -> list[list[int]]:
    n = len(neighbors)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = []
        queue = deque([s])
        seen[s] = True
        while queue:
            node = queue.popleft()
            comp.append(node)
            for other in neighbors[node]:
                if not seen[other]:
                    seen[other] = True
                    queue.append(other)
        comps.append(comp)
    return comps


# ---------------------------------------------------------------------------
# synthetic pairs


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic pair: n nodes, d features of which the
    first k shift by delta in the second object, geometric graphs with the
    given connection radius."""

    n: int = 40
    d: int = 10
    k: int = 3
    delta: float = 2.0
    geo_radius: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InvalidConfig(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise InvalidConfig(f"d must be >= 1, got {self.d}")
        if not (0 <= self.k <= self.d):
            raise InvalidConfig(f"k must lie in [0, d], got {self.k}")
        if self.delta < 0.0:
            raise InvalidConfig(f"delta must be >= 0, got {self.delta}")
        if self.geo_radius <= 0.0:
            raise InvalidConfig(f"geo_radius must be > 0, got {self.geo_radius}")


def _sample_geometric_graph(rng: np.random.Generator, n: int, radius: float):
    """Largest component of a random geometric graph with >= 0.9 n nodes,
    resampled up to RESAMPLE_ATTEMPTS times; nodes come back in BFS order
    so any prefix stays connected."""

    for _ in range(RESAMPLE_ATTEMPTS):
        pts = rng.uniform(0.0, 1.0, size=(n, 2))
        delta = pts[:, None, :] - pts[None, :, :]
        close = (delta**2).sum(axis=2) <= radius**2
        np.fill_diagonal(close, False)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if close[i, j]]
        neighbors = _neighbor_lists(edges, n)
        comps = _components(neighbors)
        largest = max(comps, key=len)
        if len(largest) >= 0.9 * n:
            keep = set(largest)
            order = _bfs_order(neighbors, min(largest))
            order = [v for v in order if v in keep]
            return order, edges
    raise DisconnectedAfterRetries(
        f"no component with >= {0.9 * n:.0f} of {n} nodes in "
        f"{RESAMPLE_ATTEMPTS} samples at radius {radius}"
    )


def _trimmed_structure(order: list[int], edges, size: int) -> np.ndarray:
    kept = order[:size]
    return geodesic_structure(edges, kept)


def generate_synthetic_pair(
    spec: SyntheticSpec,
) -> tuple[StructuredObject, StructuredObject, frozenset[int]]:
    """Two random geometric graphs with planted differentiating features.

    Features 0..k-1 are N(0, 1) in the first object and N(delta, 1) in the
    second; the remaining d - k features are N(0, 1) in both.  Both
    objects are trimmed to the smaller of the two retained components and
    carry uniform measures and normalized hop geodesics.  Returns the two
    objects and the differentiating index set.
    """

    rng = np.random.default_rng(spec.seed)
    order1, edges1 = _sample_geometric_graph(rng, spec.n, spec.geo_radius)
    order2, edges2 = _sample_geometric_graph(rng, spec.n, spec.geo_radius)
    size = min(len(order1), len(order2))
    C1 = _trimmed_structure(order1, edges1, size)
    C2 = _trimmed_structure(order2, edges2, size)

    X = rng.normal(0.0, 1.0, size=(size, spec.d))
    Y = rng.normal(0.0, 1.0, size=(size, spec.d))
    Y[:, : spec.k] += spec.delta

    a = np.full(size, 1.0 / size)
    names = tuple(f"f{r}" for r in range(spec.d))
    x = StructuredObject(C=C1, a=a, X=X, feature_names=names)
    y = StructuredObject(C=C2, a=a, X=Y, feature_names=names)
    return x, y, frozenset(range(spec.k))


def separation_metric(
    weights: SuppressionWeights | np.ndarray, diff_set: frozenset[int] | Sequence[int]
) -> float:
    """Mean weight on the differentiating features minus mean weight on the
    rest.  Lies in [-1, 1]; equals 1.0 exactly on perfect recovery."""

    w = weights.w if isinstance(weights, SuppressionWeights) else np.asarray(weights, float)
    d = w.shape[0]
    diff = sorted(int(i) for i in diff_set)
    if any(i < 0 or i >= d for i in diff):
        raise ShapeMismatch(f"diff indices out of range for {d} features")
    if len(diff) == 0 or len(diff) >= d:
        raise EmptySet("diff_set must be a nonempty proper subset of the features")
    mask = np.zeros(d, dtype=bool)
    mask[diff] = True
    return float(w[mask].mean() - w[~mask].mean())


# ---------------------------------------------------------------------------
# ROC sweep


class RocPoint(NamedTuple):
    fraction: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocSweep:
    points: tuple[RocPoint, ...]
    auc: float


def _trapezoid_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal area under (FPR, TPR) points, anchored at (0,0), (1,1)."""

    pts = sorted(set((float(f), float(t)) for f, t in points) | {(0.0, 0.0), (1.0, 1.0)})
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def roc_sweep(
    spec: SyntheticSpec,
    mode: str,
    fractions: Sequence[float],
    alpha: float = 0.5,
    q: float = 2.0,
    feature_norm: str = "per_feature",
) -> RocSweep:
    """Recovery operating curve over suppression fractions on one pair.

    Each fraction is an independent solve on the same synthetic pair;
    weights threshold at 0.5 into predicted-differentiating sets, scored
    against the planted truth.  The AUC is the trapezoid over the points
    sorted by FPR, anchored at (0, 0) and (1, 1).
    """

    if mode not in ("lasso", "ridge"):
        raise InvalidConfig(f"roc_sweep supports lasso and ridge, got {mode!r}")
    if not (0 < spec.k < spec.d):
        raise EmptySet("roc_sweep needs a nonempty proper differentiating set")
    if len(fractions) == 0:
        raise InvalidConfig("at least one fraction is required")
    x, y, diff = generate_synthetic_pair(spec)
    truth = np.zeros(spec.d, dtype=bool)
    truth[sorted(diff)] = True
    points = []
    for f in fractions:
        config = FsFgwConfig(
            mode=mode,
            alpha=alpha,
            q=q,
            suppression_fraction=float(f),
            feature_norm=feature_norm,
            seed=spec.seed,
        )
        result = solve_fsfgw(x, y, config)
        predicted = result.weights.w > 0.5
        tp = int(np.sum(predicted & truth))
        fp = int(np.sum(predicted & ~truth))
        points.append(RocPoint(float(f), tp / spec.k, fp / (spec.d - spec.k)))
    auc = _trapezoid_auc([(p.fpr, p.tpr) for p in points])
    return RocSweep(points=tuple(points), auc=auc)


# ---------------------------------------------------------------------------
# pairwise distances and clustering


class PairRecord(NamedTuple):
    i: int
    j: int
    result: SolveResult


def _solve_pair_task(args) -> PairRecord:
    i, j, x, y, config = args
    try:
        return PairRecord(i, j, solve_fsfgw(x, y, config))
    except FsfgwError as exc:
        raise PairwiseSolveError(f"pair ({i}, {j}) failed: {exc}") from exc


def pairwise_distance_matrix(
    objects: Sequence[StructuredObject],
    config: FsFgwConfig,
    workers: int = 1,
) -> tuple[np.ndarray, list[PairRecord]]:
    """Symmetric matrix of solve objectives over all unordered pairs.

    Each pair is solved once and mirrored; the diagonal is zero by
    convention.  With ``workers > 1`` pairs are solved in separate
    processes, reduced in fixed pair order so results are identical to the
    serial run.
    """

    objects = list(objects)
    N = len(objects)
    tasks = [
        (i, j, objects[i], objects[j], config)
        for i in range(N)
        for j in range(i + 1, N)
    ]
    if workers > 1 and tasks:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_solve_pair_task, tasks))
    else:
        records = [_solve_pair_task(t) for t in tasks]
    D = np.zeros((N, N))
    for rec in records:
        D[rec.i, rec.j] = rec.result.objective
        D[rec.j, rec.i] = rec.result.objective
    return D, records


class Merge(NamedTuple):
    """One agglomeration step: the two cluster ids joined and the linkage
    height.  Leaves are 0..N-1; the merge at step t creates cluster N+t."""

    a: int
    b: int
    height: float


def complete_linkage_cluster(D: np.ndarray) -> list[Merge]:
    """Agglomerative clustering under complete (maximum) linkage.

    At every step the pair of active clusters with the smallest maximum
    inter-point distance merges; ties resolve to the lexicographically
    smallest (id_a, id_b).  Returns the N-1 merges in order.
    """

    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidMatrix(f"distance matrix must be square, got {D.shape}")
    N = D.shape[0]
    if not np.all(np.isfinite(D)):
        raise InvalidMatrix("distance matrix must be finite")
    if np.abs(D - D.T).max(initial=0.0) > 1e-9:
        raise InvalidMatrix("distance matrix must be symmetric")
    if np.abs(np.diagonal(D)).max(initial=0.0) > 1e-12:
        raise InvalidMatrix("distance matrix must have a zero diagonal")
    if D.min(initial=0.0) < 0.0:
        raise InvalidMatrix("distance matrix must be nonnegative")

    active: dict[int, list[int]] = {i: [i] for i in range(N)}
    merges: list[Merge] = []
    for step in range(N - 1):
        best = None
        ids = sorted(active)
        for ai, ida in enumerate(ids):
            for idb in ids[ai + 1 :]:
                link = max(
                    D[p, q_] for p in active[ida] for q_ in active[idb]
                )
                if best is None or link < best[0]:
                    best = (link, ida, idb)
        link, ida, idb = best
        merges.append(Merge(ida, idb, float(link)))
        members = active.pop(ida) + active.pop(idb)
        active[N + step] = members
    return merges


# ---------------------------------------------------------------------------
# redistricting


@dataclass(frozen=True)
class PrecinctGraph:
    """Adjacency, per-precinct features, and population for one state of
    affairs; precincts are indexed by file order and named by id."""

    precinct_ids: tuple[str, ...]
    adjacency: tuple[tuple[int, int], ...]
    features: np.ndarray
    population: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        ids = tuple(str(s) for s in self.precinct_ids)
        if len(set(ids)) != len(ids):
            raise InvalidObjectFile("precinct ids must be unique")
        P = len(ids)
        feats = np.asarray(self.features, dtype=float)
        pop = np.asarray(self.population, dtype=float)
        if feats.ndim != 2 or feats.shape[0] != P:
            raise ShapeMismatch(f"features must have {P} rows, got {feats.shape}")
        if pop.shape != (P,):
            raise ShapeMismatch(f"population must have length {P}, got {pop.shape}")
        if not np.all(np.isfinite(feats)) or not np.all(np.isfinite(pop)):
            raise ShapeMismatch("features and population must be finite")
        if pop.min(initial=0.0) < 0.0:
            raise InvalidObjectFile("population must be nonnegative")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != feats.shape[1]:
            raise ShapeMismatch(
                f"{len(names)} feature names for {feats.shape[1]} columns"
            )
        seen = set()
        edges = []
        for i, j in self.adjacency:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidObjectFile(f"self-loop on precinct index {i}")
            if not (0 <= i < P and 0 <= j < P):
                raise InvalidObjectFile(f"edge ({i}, {j}) out of range for {P} precincts")
            key = (min(i, j), max(i, j))
            if key not in seen:
                seen.add(key)
                edges.append(key)
        feats = feats.copy()
        feats.setflags(write=False)
        pop = pop.copy()
        pop.setflags(write=False)
        object.__setattr__(self, "precinct_ids", ids)
        object.__setattr__(self, "adjacency", tuple(edges))
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "population", pop)
        object.__setattr__(self, "feature_names", names)

    @property
    def P(self) -> int:
        return len(self.precinct_ids)

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class RedistrictingPlan:
    """A district label in 1..D for every precinct."""

    plan_id: str
    assignment: np.ndarray

    def __post_init__(self) -> None:
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1 or assignment.shape[0] < 1:
            raise ShapeMismatch("assignment must be a nonempty vector")
        labels = np.unique(assignment)
        D = int(labels.max())
        if labels.min() < 1 or labels.shape[0] != D:
            raise InvalidObjectFile(
                f"district labels must be exactly 1..D with none empty, got {labels.tolist()}"
            )
        assignment = assignment.copy()
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    @property
    def P(self) -> int:
        return self.assignment.shape[0]

    @property
    def D(self) -> int:
        return int(self.assignment.max())


def district_object(graph: PrecinctGraph, indices: Sequence[int]) -> StructuredObject:
    """Structured object for one district: hop geodesics on the induced
    subgraph, population-normalized measure (uniform fallback when the
    district's population is zero), and precinct features."""

    idx = np.asarray(sorted(int(i) for i in indices), dtype=np.int64)
    if idx.shape[0] == 0:
        raise EmptySet("a district must contain at least one precinct")
    C = geodesic_structure(graph.adjacency, idx.tolist())
    pop = graph.population[idx]
    total = pop.sum()
    a = pop / total if total > 0 else np.full(idx.shape[0], 1.0 / idx.shape[0])
    return StructuredObject(
        C=C, a=a, X=graph.features[idx], feature_names=graph.feature_names
    )


def match_districts(
    plan_p: RedistrictingPlan, plan_q: RedistrictingPlan
) -> list[tuple[int, int]]:
    """Minimum-total-Hamming bijection between the two plans' districts.

    District i of ``plan_p`` is matched to district sigma(i) of ``plan_q``
    minimizing the summed Hamming distance between precinct-membership
    indicator vectors, solved exactly as a linear assignment.  Returns
    (label_p, label_q) pairs ordered by label_p (labels are 1-based).
    """

    if plan_p.P != plan_q.P:
        raise PrecinctUniverseMismatch(
            f"plans cover {plan_p.P} and {plan_q.P} precincts"
        )
    if plan_p.D != plan_q.D:
        raise DistrictCountMismatch(
            f"plans have {plan_p.D} and {plan_q.D} districts"
        )
    D = plan_p.D
    mem_p = plan_p.assignment[:, None] == np.arange(1, D + 1)[None, :]
    mem_q = plan_q.assignment[:, None] == np.arange(1, D + 1)[None, :]
    counts_p = mem_p.sum(axis=0)
    counts_q = mem_q.sum(axis=0)
    overlap = mem_p.T.astype(np.int64) @ mem_q.astype(np.int64)
    H = counts_p[:, None] + counts_q[None, :] - 2 * overlap
    rows, cols = linear_sum_assignment(H)
    return [(int(r) + 1, int(c) + 1) for r, c in zip(rows, cols)]


@dataclass(frozen=True)
class PlanComparison:
    """District-matched comparison of two plans: the matching, one solve
    per matched pair (in matching order), their summed objectives, and the
    per-pair suppression weights with their mean."""

    matching: tuple[tuple[int, int], ...]
    per_district: tuple[SolveResult, ...]
    total_distance: float
    mean_weights: np.ndarray
    weight_matrix: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "matching": [list(pair) for pair in self.matching],
            "total_distance": self.total_distance,
            "mean_weights": self.mean_weights.tolist(),
            "per_district": [
                {
                    "district_p": pair[0],
                    "district_q": pair[1],
                    "objective": res.objective,
                    "converged": res.converged,
                    "weights": res.weights.w.tolist(),
                }
                for pair, res in zip(self.matching, self.per_district)
            ],
        }


def compare_plans(
    graph: PrecinctGraph,
    plan_p: RedistrictingPlan,
    plan_q: RedistrictingPlan,
    config: FsFgwConfig,
) -> PlanComparison:
    """Solve one suppression-transport problem per matched district pair.

    Both plans must cover the graph's precinct universe.  The total
    distance is the sum of matched-pair objectives; the weight matrix
    stacks each pair's suppression weights (one row per matched pair, in
    matching order).
    """

    if plan_p.P != graph.P or plan_q.P != graph.P:
        raise PrecinctUniverseMismatch(
            f"plans cover {plan_p.P}/{plan_q.P} precincts, graph has {graph.P}"
        )
    matching = match_districts(plan_p, plan_q)
    results = []
    for label_p, label_q in matching:
        obj_p = district_object(graph, np.flatnonzero(plan_p.assignment == label_p))
        obj_q = district_object(graph, np.flatnonzero(plan_q.assignment == label_q))
        results.append(solve_fsfgw(obj_p, obj_q, config))
        logger.info(
            "district pair (%d, %d): objective %.6g",
            label_p,
            label_q,
            results[-1].objective,
        )
    weight_matrix = np.array([r.weights.w for r in results])
    return PlanComparison(
        matching=tuple(matching),
        per_district=tuple(results),
        total_distance=float(sum(r.objective for r in results)),
        mean_weights=weight_matrix.mean(axis=0),
        weight_matrix=weight_matrix,
    )


# ---------------------------------------------------------------------------
# file formats


def structured_object_to_dict(obj: StructuredObject) -> dict:
    out = {
        "n": obj.n,
        "C": obj.C.tolist(),
        "a": obj.a.tolist(),
        "X": obj.X.tolist(),
    }
    if obj.feature_names is not None:
        out["feature_names"] = list(obj.feature_names)
    return out


def load_structured_object(source: dict | str | Path) -> StructuredObject:
    """Read a structured object from a JSON document.

    The document needs ``n``, ``a`` (a vector or the string "uniform"),
    ``X``, and exactly one of ``C`` (a dense matrix) or ``edges`` with
    ``structure: "geodesic"`` (0-based endpoint pairs, from which
    normalized hop geodesics are computed).
    """

    if isinstance(source, (str, Path)):
        with open(source) as fh:
            doc = json.load(fh)
    else:
        doc = source
    if not isinstance(doc, dict):
        raise InvalidObjectFile("object document must be a JSON mapping")
    try:
        n = int(doc["n"])
        X = doc["X"]
        a_spec = doc["a"]
    except KeyError as exc:
        raise InvalidObjectFile(f"object document missing key {exc}") from exc
    has_C = "C" in doc
    has_edges = "edges" in doc
    if has_C == has_edges:
        raise InvalidObjectFile("object document needs exactly one of 'C' and 'edges'")
    if has_C:
        C = np.asarray(doc["C"], dtype=float)
    else:
        if doc.get("structure") != "geodesic":
            raise InvalidObjectFile(
                "edge-list objects must declare structure: \"geodesic\""
            )
        edges = [(int(i), int(j)) for i, j in doc["edges"]]
        if any(not (0 <= i < n and 0 <= j < n) for i, j in edges):
            raise InvalidObjectFile(f"edge endpoints out of range for n={n}")
        C = geodesic_structure(edges, range(n))
    a = np.full(n, 1.0 / n) if a_spec == "uniform" else np.asarray(a_spec, dtype=float)
    names = doc.get("feature_names")
    return StructuredObject(
        C=C, a=a, X=np.asarray(X, dtype=float),
        feature_names=tuple(names) if names is not None else None,
    )


def load_precinct_graph(nodes_path: str | Path, edges_path: str | Path) -> PrecinctGraph:
    """Read the nodes/edges CSV pair.

    ``nodes.csv`` needs columns precinct_id, population, then one column
    per feature; ``edges.csv`` needs precinct_id_a, precinct_id_b.
    Precincts are indexed in file order.
    """

    with open(nodes_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "precinct_id":
            raise InvalidObjectFile(
                f"{nodes_path}: expected header precinct_id,population,<features...>"
            )
        if header[1] != "population":
            raise InvalidObjectFile(f"{nodes_path}: second column must be population")
        feature_names = tuple(header[2:])
        ids = []
        pops = []
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidObjectFile(f"{nodes_path}: ragged row {row!r}")
            ids.append(row[0])
            pops.append(float(row[1]))
            rows.append([float(v) for v in row[2:]])
    index = {pid: i for i, pid in enumerate(ids)}
    with open(edges_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["precinct_id_a", "precinct_id_b"]:
            raise InvalidObjectFile(
                f"{edges_path}: expected header precinct_id_a,precinct_id_b"
            )
        edges = []
        for row in reader:
            if not row:
                continue
            try:
                edges.append((index[row[0]], index[row[1]]))
            except KeyError as exc:
                raise InvalidObjectFile(f"{edges_path}: unknown precinct {exc}") from exc
    features = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(feature_names)))
    return PrecinctGraph(
        precinct_ids=tuple(ids),
        adjacency=tuple(edges),
        features=features,
        population=np.asarray(pops, dtype=float),
        feature_names=feature_names,
    )


def load_plan_csv(
    path: str | Path, graph: PrecinctGraph, plan_id: str | None = None
) -> RedistrictingPlan:
    """Read a precinct_id,district CSV covering the graph's precincts
    exactly once."""

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["precinct_id", "district"]:
            raise InvalidObjectFile(f"{path}: expected header precinct_id,district")
        seen: dict[str, int] = {}
        for row in reader:
            if not row:
                continue
            if row[0] in seen:
                raise PrecinctUniverseMismatch(f"{path}: duplicate precinct {row[0]!r}")
            seen[row[0]] = int(row[1])
    missing = [pid for pid in graph.precinct_ids if pid not in seen]
    extra = [pid for pid in seen if pid not in set(graph.precinct_ids)]
    if missing or extra:
        raise PrecinctUniverseMismatch(
            f"{path}: plan does not cover the precinct universe "
            f"(missing {missing[:5]}, extra {extra[:5]})"
        )
    assignment = np.array([seen[pid] for pid in graph.precinct_ids], dtype=np.int64)
    if plan_id is None:
        stem = Path(path).stem
        plan_id = stem[5:] if stem.startswith("plan_") else stem
    return RedistrictingPlan(plan_id=plan_id, assignment=assignment)
