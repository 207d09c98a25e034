"""Undirected simple graph with per-node features and preference labels.

The graph value is immutable once built: the simulator produces successive
snapshots as new instances, and everything downstream (scoring, similarity
matrices, training) only reads.  Adjacency is kept both as an edge set and as
a cached dense matrix view; the dense form is what the similarity and
convolution code consume.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np

Edge = tuple[int, int]


def normalize_edges(edges) -> frozenset[Edge]:
    """Canonicalize an edge iterable to a frozenset of (i, j) with i < j."""
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop on node {i}")
        out.add((i, j) if i < j else (j, i))
    return frozenset(out)


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Snapshot of a simulated social network.

    n               number of nodes (ids 0..n-1)
    edges           unordered node pairs, stored as (i, j) with i < j
    features        (n, f) real feature matrix, one row per node
    sdna_of         (n,) id of the preference record each node subscribes to;
                    doubles as the node's class label
    snapshot_index  position of this snapshot in its lineage
    """

    n: int
    edges: frozenset[Edge]
    features: np.ndarray
    sdna_of: np.ndarray
    snapshot_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "edges", normalize_edges(self.edges))
        features = np.asarray(self.features, dtype=np.float64)
        sdna_of = np.asarray(self.sdna_of, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] != self.n:
            raise ValueError(f"features must be ({self.n}, f), got {features.shape}")
        if sdna_of.shape != (self.n,):
            raise ValueError(f"sdna_of must have length {self.n}")
        for i, j in self.edges:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i},{j}) out of range for n={self.n}")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "sdna_of", sdna_of)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense symmetric 0/1 adjacency matrix, float64."""
        a = np.zeros((self.n, self.n), dtype=np.float64)
        if self.edges:
            idx = np.array(sorted(self.edges), dtype=np.int64)
            a[idx[:, 0], idx[:, 1]] = 1.0
            a[idx[:, 1], idx[:, 0]] = 1.0
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        """(n,) integer degree of every node."""
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def with_edges(self, new_edges, snapshot_index: int | None = None) -> "SocialGraph":
        """Copy of this graph with extra edges (features and labels shared)."""
        merged = set(self.edges)
        merged.update(normalize_edges(new_edges))
        return replace(
            self,
            edges=frozenset(merged),
            snapshot_index=self.snapshot_index if snapshot_index is None else snapshot_index,
        )


@dataclass(frozen=True, eq=False)
class PairUniverse:
    """All unordered node pairs not currently connected, in lexicographic order."""

    pairs: np.ndarray  # (m, 2) int64, row-major lexicographic

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def __iter__(self):
        for i, j in self.pairs:
            yield (int(i), int(j))

    def __getitem__(self, k) -> Edge:
        i, j = self.pairs[k]
        return (int(i), int(j))


def degree(g: SocialGraph, i: int) -> int:
    """Number of edges incident to node ``i``."""
    if not (0 <= i < g.n):
        raise ValueError(f"node {i} out of range for n={g.n}")
    return int(g.degrees[i])


def walk_indicators(g: SocialGraph, max_length: int) -> list[np.ndarray]:
    """Boolean walk-existence matrices for lengths 2..max_length.

    Entry [x-2][i, j] is True iff some walk of length exactly x joins i and j,
    i.e. the x-th boolean-semiring power of the adjacency matrix is nonzero
    there.  Boolean powers avoid the count overflow plain integer powers
    would hit on dense graphs.
    """
    if max_length < 2:
        return []
    a = g.adjacency > 0
    out = []
    power = a
    for _ in range(2, max_length + 1):
        power = (power.astype(np.float64) @ a.astype(np.float64)) > 0
        out.append(power)
    return out


def path_exists(g: SocialGraph, i: int, j: int, length: int) -> bool:
    """True iff a walk of exactly ``length`` steps joins i and j."""
    if not (0 <= i < g.n and 0 <= j < g.n):
        raise ValueError("node index out of range")
    if i == j:
        raise ValueError("i and j must differ")
    if length < 1:
        raise ValueError("length must be >= 1")
    if length == 1:
        return ((i, j) if i < j else (j, i)) in g.edges
    return bool(walk_indicators(g, length)[length - 2][i, j])


def shortest_path_matrix(g: SocialGraph) -> np.ndarray:
    """All-pairs hop counts via breadth-first search, np.inf where unreachable.

    The search runs level-synchronously from every source at once: the
    frontier of each BFS is a row of a boolean matrix and one adjacency
    multiply advances all of them a level.
    """
    n = g.n
    a = g.adjacency > 0
    sp = np.full((n, n), np.inf)
    np.fill_diagonal(sp, 0.0)
    reached = np.eye(n, dtype=bool)
    frontier = reached
    dist = 0
    while True:
        dist += 1
        frontier = ((frontier.astype(np.float64) @ a.astype(np.float64)) > 0) & ~reached
        if not frontier.any():
            break
        sp[frontier] = dist
        reached |= frontier
    return sp


def unconnected_pairs(g: SocialGraph) -> PairUniverse:
    """Every (i, j), i < j, that is not an edge, ordered lexicographically."""
    iu, ju = np.triu_indices(g.n, k=1)
    if g.edges:
        connected = g.adjacency[iu, ju] > 0
        iu, ju = iu[~connected], ju[~connected]
    return PairUniverse(pairs=np.column_stack([iu, ju]).astype(np.int64))


def save_graph_dir(g: SocialGraph, path: str | Path) -> None:
    """Write edges.tsv / features.csv / labels.csv under ``path``.

    edges.tsv holds one ``i<TAB>j`` per line with i < j; features.csv is a
    headerless CSV with one row per node; labels.csv holds ``node,sdna_id``
    rows.  All indices 0-based.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.tsv", "w", newline="") as fh:
        for i, j in sorted(g.edges):
            fh.write(f"{i}\t{j}\n")
    # %.17g round-trips float64 exactly
    np.savetxt(path / "features.csv", g.features, fmt="%.17g", delimiter=",")
    with open(path / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        for node, sid in enumerate(g.sdna_of):
            writer.writerow([node, int(sid)])


def load_graph_dir(path: str | Path, snapshot_index: int = 0) -> SocialGraph:
    """Read a graph directory written by :func:`save_graph_dir`."""
    path = Path(path)
    features = np.loadtxt(path / "features.csv", delimiter=",", ndmin=2)
    n = features.shape[0]
    sdna_of = np.zeros(n, dtype=np.int64)
    with open(path / "labels.csv", newline="") as fh:
        for row in csv.reader(fh):
            if row:
                sdna_of[int(row[0])] = int(row[1])
    edges = []
    edges_file = path / "edges.tsv"
    if edges_file.exists():
        with open(edges_file) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    i, j = line.split("\t")
                    edges.append((int(i), int(j)))
    return SocialGraph(
        n=n, edges=frozenset(normalize_edges(edges)), features=features,
        sdna_of=sdna_of, snapshot_index=snapshot_index,
    )
