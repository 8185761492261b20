"""Graph structure, BFS distances, disruption-modified adjacency, and detour scores.

Distances are unweighted hop counts. A disruption removes every edge
incident to a region-of-interest (ROI) station, which makes the ROI
stations themselves unreachable in the disrupted graph; the detour score
maps that disconnection to 1 (the limit of the hop-count ratio).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Graph",
    "Disruption",
    "bfs_distance",
    "disrupted_adjacency",
    "detour_score",
    "feasible",
    "feasible_origins",
    "CONVENTION_INVERTED",
    "CONVENTION_PAPER",
]

CONVENTION_INVERTED = "inverted"
CONVENTION_PAPER = "paper"
_CONVENTIONS = (CONVENTION_INVERTED, CONVENTION_PAPER)


@dataclass(frozen=True)
class Graph:
    """Undirected graph as a symmetric 0/1 adjacency matrix with zero diagonal."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        adj = adj.astype(np.int8, copy=True)
        if not np.all((adj == 0) | (adj == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(adj) != 0):
            raise ValueError("adjacency diagonal must be zero (no self loops)")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        adj.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)
        neighbors = tuple(tuple(np.nonzero(row)[0].tolist()) for row in adj)
        object.__setattr__(self, "_neighbors", neighbors)

    @property
    def n_nodes(self) -> int:
        return int(self.adjacency.shape[0])

    def neighbors(self, node: int) -> tuple[int, ...]:
        return self._neighbors[node]

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = np.zeros((n_nodes, n_nodes), dtype=np.int8)
        for u, v in edges:
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"edge ({u}, {v}) out of range for {n_nodes} nodes")
            if u == v:
                raise ValueError(f"self edge ({u}, {v}) not allowed")
            adj[u, v] = 1
            adj[v, u] = 1
        return cls(adj)

    def edges(self) -> list[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(iu.tolist(), ju.tolist()))


def _check_node(g: Graph, node: int, what: str = "node") -> None:
    if not (0 <= node < g.n_nodes):
        raise ValueError(f"{what} {node} out of range for graph with {g.n_nodes} nodes")


def bfs_distance(g: Graph, source: int) -> np.ndarray:
    """Hop counts from `source` to every node; unreachable nodes get inf."""
    _check_node(g, source, "source")
    dist = np.full(g.n_nodes, np.inf)
    dist[source] = 0.0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        base = dist[u] + 1.0
        for v in g.neighbors(u):
            if dist[v] == np.inf:
                dist[v] = base
                queue.append(v)
    return dist


def disrupted_adjacency(g: Graph, roi: Sequence[int]) -> Graph:
    """Adjacency with every row and column indexed by an ROI station zeroed."""
    roi = list(roi)
    for r in roi:
        _check_node(g, r, "roi station")
    adj = g.adjacency.astype(np.int8, copy=True)
    if roi:
        adj[roi, :] = 0
        adj[:, roi] = 0
    return Graph(adj)


def detour_score(
    g: Graph,
    g_disrupted: Graph,
    o: int,
    d: int,
    convention: str = CONVENTION_INVERTED,
) -> float:
    """Relative path lengthening caused by a disruption, for one origin-destination pair.

    inverted (default): 1 - dist_A(o, d) / dist_disrupted(o, d), in [0, 1];
        0 when the path is unchanged, 1 when the pair is disconnected
        under the disrupted adjacency.
    paper: the literal 1 - dist_disrupted(o, d) / dist_A(o, d), which is
        <= 0 whenever the disruption lengthens the path (kept only for
        comparison; -inf on disconnection).
    """
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown g convention {convention!r}")
    _check_node(g, o, "origin")
    _check_node(g, d, "destination")
    if o == d:
        raise ValueError("origin and destination must differ")
    if g.n_nodes != g_disrupted.n_nodes:
        raise ValueError("graphs must have the same node count")
    dist_nat = float(bfs_distance(g, o)[d])
    if not np.isfinite(dist_nat):
        raise ValueError(f"nodes {o} and {d} are disconnected in the natural graph")
    dist_dis = float(bfs_distance(g_disrupted, o)[d])
    if convention == CONVENTION_INVERTED:
        if not np.isfinite(dist_dis):
            return 1.0
        return 1.0 - dist_nat / dist_dis
    return 1.0 - dist_dis / dist_nat


def feasible(
    o: int,
    d: int,
    g: Graph,
    g_disrupted: Graph,
    xi: float,
    convention: str = CONVENTION_INVERTED,
) -> bool:
    """True iff the detour score is at most xi (path not lengthened beyond the threshold)."""
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    return detour_score(g, g_disrupted, o, d, convention) <= xi


def feasible_origins(
    g: Graph,
    g_disrupted: Graph,
    destination: int,
    xi: float,
    convention: str = CONVENTION_INVERTED,
) -> np.ndarray:
    """Boolean mask over all origins: which ones keep a feasible path to `destination`.

    Vectorized extension of `feasible` used by the feature pipeline, with
    two conventions for the cases the pairwise operation rejects:
    the destination itself is always feasible (no travel involved), and
    origins disconnected from the destination in the natural graph are
    infeasible.
    """
    if not xi > 0:
        raise ValueError(f"xi must be positive, got {xi}")
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown g convention {convention!r}")
    _check_node(g, destination, "destination")
    dist_nat = bfs_distance(g, destination)
    dist_dis = bfs_distance(g_disrupted, destination)
    with np.errstate(divide="ignore", invalid="ignore"):
        if convention == CONVENTION_INVERTED:
            score = 1.0 - dist_nat / dist_dis
        else:
            score = 1.0 - dist_dis / dist_nat
    mask = score <= xi  # NaN (both distances infinite) compares False
    mask[~np.isfinite(dist_nat)] = False
    mask[destination] = True
    return mask


@dataclass(frozen=True)
class Disruption:
    """Perturbation features: day index, active minute window, and ROI stations."""

    day: int
    t_start: int
    t_end: int
    roi: tuple[int, ...]

    def __post_init__(self) -> None:
        roi = tuple(int(r) for r in self.roi)
        if len(roi) == 0:
            raise ValueError("roi must be non-empty")
        if len(set(roi)) != len(roi):
            raise ValueError(f"roi has duplicate stations: {roi}")
        if any(r < 0 for r in roi):
            raise ValueError(f"roi has negative station ids: {roi}")
        if self.t_start > self.t_end:
            raise ValueError(f"t_start {self.t_start} exceeds t_end {self.t_end}")
        object.__setattr__(self, "roi", roi)
        object.__setattr__(self, "day", int(self.day))
        object.__setattr__(self, "t_start", int(self.t_start))
        object.__setattr__(self, "t_end", int(self.t_end))

    def validate_against(self, n_nodes: int, t_min: int, t_max: int) -> None:
        for r in self.roi:
            if r >= n_nodes:
                raise ValueError(f"roi station {r} out of range for {n_nodes} nodes")
        if self.t_start < t_min or self.t_end > t_max:
            raise ValueError(
                f"disruption window [{self.t_start}, {self.t_end}] outside "
                f"observation window [{t_min}, {t_max}]"
            )
