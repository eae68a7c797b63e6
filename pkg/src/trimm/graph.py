"""k-NN motion graph over action features, with duration-constrained lookup.

Nodes are motion segments summarized by a feature vector plus the real
segment duration. Edges join each node to its k nearest neighbors under
Euclidean distance, then the selections are unioned so the graph is
undirected (degree may exceed k). Retrieval anchors on the node closest
to the previous output, explores the component reachable from the
anchor's nearest neighbors, and returns the best duration-qualified
match to the current prediction.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import trmf
from .features import ACTION_DIM

log = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_TOP_K = 10


@dataclass
class ActionNode:
    """One retrievable motion segment.

    clip_ref indexes the clip library the node was cut from; it is not
    persisted in graph files (loaders reset it to the node id, so
    libraries written alongside a graph must keep node order).
    """

    node_id: int
    feature: np.ndarray
    duration: float
    clip_ref: int = -1
    neighbors: list[tuple[int, float]] = field(default_factory=list)  # (id, distance), id ascending

    def __post_init__(self):
        self.feature = np.asarray(self.feature, dtype=np.float64)
        if self.feature.ndim != 1:
            raise ValueError("node feature must be a vector")
        if not np.isfinite(self.feature).all():
            raise ValueError("node feature must be finite")
        if self.duration <= 0.0:
            raise ValueError("node duration must be positive")
        if self.clip_ref < 0:
            self.clip_ref = self.node_id


@dataclass
class MotionGraph:
    nodes: list[ActionNode]
    k: int
    _features: np.ndarray | None = field(default=None, repr=False)
    _sq_norms: np.ndarray | None = field(default=None, repr=False)
    _durations: np.ndarray | None = field(default=None, repr=False)
    _neighbor_ids: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        edges = set()
        for i, node in enumerate(self.nodes):
            if node.node_id != i:
                raise ValueError("node ids must be consecutive from 0")
            last = -1
            for nid, _ in node.neighbors:
                if nid == i:
                    raise ValueError(f"node {i} lists itself as a neighbor")
                if not 0 <= nid < len(self.nodes):
                    raise ValueError(f"node {i} references unknown neighbor {nid}")
                if nid <= last:
                    raise ValueError(f"node {i} adjacency must be strictly id-ascending")
                last = nid
                edges.add((i, nid))
        for i, j in edges:
            if (j, i) not in edges:
                raise ValueError(f"edge ({i},{j}) lacks its reverse; graph must be undirected")

    def __len__(self) -> int:
        return len(self.nodes)

    def feature_matrix(self) -> np.ndarray:
        if self._features is None:
            self._features = np.stack([n.feature for n in self.nodes])
            self._sq_norms = np.einsum("ij,ij->i", self._features, self._features)
        return self._features

    def durations(self) -> np.ndarray:
        if self._durations is None:
            self._durations = np.array([n.duration for n in self.nodes])
        return self._durations

    def neighbor_id_matrix(self) -> np.ndarray:
        """Neighbor ids padded with -1 to a rectangular [n, max_degree] block."""
        if self._neighbor_ids is None:
            n = len(self.nodes)
            width = max((len(nd.neighbors) for nd in self.nodes), default=0)
            ids = np.full((n, max(width, 1)), -1, dtype=np.int64)
            for i, nd in enumerate(self.nodes):
                for j, (nid, _) in enumerate(nd.neighbors):
                    ids[i, j] = nid
            self._neighbor_ids = ids
        return self._neighbor_ids

    def squared_distances(self, vector: np.ndarray) -> np.ndarray:
        """Squared Euclidean distance from every node feature to `vector`."""
        feats = self.feature_matrix()
        v = np.asarray(vector, dtype=np.float64)
        if v.shape != (feats.shape[1],):
            raise ValueError(f"query dimension {v.shape} does not match graph {feats.shape[1]}")
        d2 = self._sq_norms - 2.0 * (feats @ v) + v @ v
        return np.maximum(d2, 0.0)


def build_knn_graph(nodes: list[ActionNode], k: int = DEFAULT_K) -> MotionGraph:
    """Exact k nearest neighbors per node, unioned into undirected edges.

    Distance ties are broken toward the lower node id, so the result is
    deterministic even with duplicated feature rows. k is effectively
    min(k, n-1).
    """
    n = len(nodes)
    if n < 2:
        raise ValueError("need at least 2 nodes to build a graph")
    if k < 1:
        raise ValueError("k must be positive")

    features = np.stack([np.asarray(nd.feature, dtype=np.float64) for nd in nodes])
    sq = np.einsum("ij,ij->i", features, features)
    adjacency: list[set[int]] = [set() for _ in range(n)]
    block = max(1, min(n, int(64 * 1024 * 1024 / max(1, 8 * n))))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] - 2.0 * features[start:stop] @ features.T + sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        for row_off in range(stop - start):
            i = start + row_off
            for j in _nearest_others(d2[row_off], i, k):
                adjacency[i].add(j)
                adjacency[j].add(i)

    built = []
    for i, node in enumerate(nodes):
        ids = sorted(adjacency[i])
        dists = np.sqrt(np.maximum(
            np.einsum("ij,ij->i", features[ids] - features[i], features[ids] - features[i]), 0.0
        )) if ids else np.empty(0)
        built.append(ActionNode(
            node_id=i,
            feature=features[i],
            duration=float(node.duration),
            clip_ref=node.clip_ref,
            neighbors=[(int(j), float(d)) for j, d in zip(ids, dists)],
        ))
    return MotionGraph(nodes=built, k=k)


def _nearest_others(sq_row: np.ndarray, self_idx: int, k: int) -> list[int]:
    n = sq_row.shape[0]
    take = min(k, n - 1)
    if take == 0:
        return []
    # the k nearest others sit within the k+1 smallest overall (self included);
    # widen to every entry tied with the boundary value before ordering by id
    bound_pos = min(k, n - 1)
    bound = np.partition(sq_row, bound_pos)[bound_pos]
    cand = np.flatnonzero(sq_row <= bound)
    cand = cand[cand != self_idx]
    order = np.lexsort((cand, sq_row[cand]))
    return [int(j) for j in cand[order][:take]]


def constrained_search(
    graph: MotionGraph,
    prev_vector: np.ndarray,
    current_vector: np.ndarray,
    min_duration: float,
    top_k: int = DEFAULT_TOP_K,
    max_visits: int = 0,
) -> int | None:
    """Duration-filtered best match in the component around the anchor.

    The anchor is the node nearest to prev_vector over the whole graph
    (linear scan, exact). Its neighbors, reordered by distance to
    prev_vector and truncated to top_k, seed a breadth-first sweep;
    every node reached from them (the anchor itself never expands) with
    duration strictly above min_duration is a candidate, and the
    candidate nearest current_vector wins, ties to the lower id. Returns
    None when no reachable node passes the duration filter.

    max_visits > 0 caps how many nodes the walk may dequeue; the default
    0 explores the whole reachable component, in which case the visit
    order cannot affect the result and a vectorized frontier sweep is
    used instead of a literal FIFO walk.
    """
    if top_k < 1:
        raise ValueError("top_k must be positive")
    if len(graph) == 0:
        return None

    d_prev = graph.squared_distances(prev_vector)
    anchor = int(np.argmin(d_prev))

    seed_ids = np.array([nid for nid, _ in graph.nodes[anchor].neighbors], dtype=np.int64)
    if seed_ids.size == 0:
        return None
    order = np.lexsort((seed_ids, d_prev[seed_ids]))
    seeds = seed_ids[order][:top_k]

    durations = graph.durations()
    if max_visits > 0:
        visited = {anchor, *seeds.tolist()}
        queue = deque(int(s) for s in seeds)
        candidates = []
        visits = 0
        while queue and visits < max_visits:
            u = queue.popleft()
            visits += 1
            if durations[u] > min_duration:
                candidates.append(u)
            for nid, _ in graph.nodes[u].neighbors:
                if nid not in visited:
                    visited.add(nid)
                    queue.append(nid)
        qualified = np.array(sorted(candidates), dtype=np.int64)
    else:
        n = len(graph)
        visited = np.zeros(n, dtype=bool)
        visited[anchor] = True
        visited[seeds] = True
        nbr = graph.neighbor_id_matrix()
        frontier = seeds
        while frontier.size:
            nxt = nbr[frontier].ravel()
            nxt = nxt[nxt >= 0]
            nxt = np.unique(nxt[~visited[nxt]])
            visited[nxt] = True
            frontier = nxt
        reached = visited
        reached[anchor] = False
        qualified = np.flatnonzero(reached & (durations > min_duration))

    if qualified.size == 0:
        return None
    d_cur = graph.squared_distances(current_vector)
    return int(qualified[np.argmin(d_cur[qualified])])


# ---------------------------------------------------------------------------
# persistence (TRMF modality 5)


def save_graph(path, graph: MotionGraph) -> None:
    feats = graph.feature_matrix()
    if feats.shape[1] != ACTION_DIM:
        raise ValueError(f"graph files store {ACTION_DIM}-d features, got {feats.shape[1]}")
    w = trmf.Writer(trmf.MODALITY_GRAPH)
    w.u32(len(graph))
    w.u32(graph.k)
    for node in graph.nodes:
        w.f32_array(node.feature)
        w.f64(node.duration)
        w.u32(len(node.neighbors))
        w.u32_array(np.array([nid for nid, _ in node.neighbors], dtype=np.uint32))
        w.f32_array(np.array([dist for _, dist in node.neighbors], dtype=np.float32))
    with open(path, "wb") as fh:
        fh.write(w.bytes())


def load_graph(path) -> MotionGraph:
    with open(path, "rb") as fh:
        _, reader = trmf.open_payload(fh.read(), trmf.MODALITY_GRAPH)
    count = reader.u32()
    k = reader.u32()
    nodes = []
    for i in range(count):
        feature = reader.f32_array(ACTION_DIM)
        duration = reader.f64()
        n_nbr = reader.u32()
        ids = reader.u32_array(n_nbr)
        dists = reader.f32_array(n_nbr)
        nodes.append(ActionNode(
            node_id=i,
            feature=feature.astype(np.float64),
            duration=duration,
            neighbors=[(int(a), float(b)) for a, b in zip(ids, dists)],
        ))
    if not reader.done():
        raise trmf.TrmfError("trailing bytes after graph payload")
    return MotionGraph(nodes=nodes, k=k)
