"""Chimera hardware graphs: an n x n grid of K4,4 unit cells.

Nodes are indexed densely. Node (row r, column c, shore s, offset k) gets
index ``8*(r*n + c) + 4*s + k`` with r, c in [0, n), shore s in {0 =
vertical qubits, 1 = horizontal qubits} and offset k in [0, 4). Inside a
cell the two shores form a complete bipartite K4,4 (16 internal couplers).
A vertical qubit additionally couples to the same-offset vertical qubit in
the row-adjacent cells, a horizontal qubit to the same-offset horizontal
qubit in the column-adjacent cells (external couplers). A full C_n graph
therefore has 8n^2 nodes and 16n^2 + 8n(n-1) edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SHORE_VERTICAL = 0
SHORE_HORIZONTAL = 1

INTERNAL = "internal"
EXTERNAL = "external"


def node_index(n: int, row: int, col: int, shore: int, offset: int) -> int:
    """Dense index of the qubit at (row, col, shore, offset) on C_n."""
    return 8 * (row * n + col) + 4 * shore + offset


def node_coords(n: int, index: int) -> tuple[int, int, int, int]:
    """Inverse of :func:`node_index`: (row, col, shore, offset)."""
    cell, within = divmod(index, 8)
    row, col = divmod(cell, n)
    shore, offset = divmod(within, 4)
    return row, col, shore, offset


@dataclass(frozen=True)
class Edge:
    u: int
    v: int
    kind: str  # INTERNAL or EXTERNAL


@dataclass(frozen=True)
class ChimeraTopology:
    """Immutable C_n graph with a canonical edge list and CSR adjacency.

    ``edges`` holds each coupler once as a row (u, v) with u < v, rows
    sorted lexicographically. The adjacency arrays are CSR over nodes;
    per node the neighbors are sorted by neighbor index, and
    ``adj_edges`` carries the canonical edge index of each entry.
    """

    n: int
    num_nodes: int
    edges: np.ndarray          # [E, 2] int64
    internal_mask: np.ndarray  # [E] bool, True for in-cell couplers
    adj_indptr: np.ndarray     # [N + 1] int64
    adj_nodes: np.ndarray      # [2E] int64
    adj_edges: np.ndarray      # [2E] int64

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    def check_node(self, i: int) -> None:
        if not 0 <= i < self.num_nodes:
            raise ValueError(f"node index {i} out of range [0, {self.num_nodes})")

    def neighbors(self, i: int) -> list[tuple[int, int]]:
        """Neighbors of node i as (node index, canonical edge index) pairs."""
        self.check_node(i)
        lo, hi = self.adj_indptr[i], self.adj_indptr[i + 1]
        return list(zip(self.adj_nodes[lo:hi].tolist(), self.adj_edges[lo:hi].tolist()))

    def degree(self, i: int) -> int:
        self.check_node(i)
        return int(self.adj_indptr[i + 1] - self.adj_indptr[i])

    def edge(self, idx: int) -> Edge:
        if not 0 <= idx < self.num_edges:
            raise ValueError(f"edge index {idx} out of range [0, {self.num_edges})")
        u, v = self.edges[idx]
        return Edge(int(u), int(v), INTERNAL if self.internal_mask[idx] else EXTERNAL)

    def edge_kind_counts(self) -> tuple[int, int]:
        """(internal, external) coupler counts."""
        internal = int(self.internal_mask.sum())
        return internal, self.num_edges - internal

    def edge_index_map(self) -> dict[tuple[int, int], int]:
        """Mapping (u, v) with u < v -> canonical edge index."""
        return {(int(u), int(v)): i for i, (u, v) in enumerate(self.edges)}

    def to_bytes(self) -> bytes:
        """Canonical serialization, used for purity and identity checks."""
        head = f"chimera-topology v1 n={self.n}".encode()
        return head + self.edges.tobytes() + self.internal_mask.tobytes()


def _csr_adjacency(num_nodes: int, edges: np.ndarray):
    """CSR adjacency from an edge array; neighbors sorted by node index."""
    nbr: list[list[tuple[int, int]]] = [[] for _ in range(num_nodes)]
    for idx, (u, v) in enumerate(edges):
        nbr[int(u)].append((int(v), idx))
        nbr[int(v)].append((int(u), idx))
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    nodes: list[int] = []
    eidx: list[int] = []
    for i, lst in enumerate(nbr):
        lst.sort()
        indptr[i + 1] = indptr[i] + len(lst)
        nodes.extend(j for j, _ in lst)
        eidx.extend(e for _, e in lst)
    return indptr, np.asarray(nodes, dtype=np.int64), np.asarray(eidx, dtype=np.int64)


def _freeze(topo: ChimeraTopology) -> ChimeraTopology:
    for arr in (topo.edges, topo.internal_mask, topo.adj_indptr,
                topo.adj_nodes, topo.adj_edges):
        arr.setflags(write=False)
    return topo


def build_chimera(n: int) -> ChimeraTopology:
    """Construct the C_n Chimera graph.

    Deterministic: equal n yields byte-identical topologies.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ValueError(f"grid side must be a positive integer, got {n!r}")
    n = int(n)
    num_nodes = 8 * n * n

    raw: list[tuple[int, int, bool]] = []
    for r in range(n):
        for c in range(n):
            base = 8 * (r * n + c)
            for a in range(4):
                for b in range(4):
                    raw.append((base + a, base + 4 + b, True))
            if r + 1 < n:
                for k in range(4):
                    raw.append((base + k, node_index(n, r + 1, c, SHORE_VERTICAL, k), False))
            if c + 1 < n:
                for k in range(4):
                    raw.append((base + 4 + k, node_index(n, r, c + 1, SHORE_HORIZONTAL, k), False))

    raw.sort()
    edges = np.asarray([(u, v) for u, v, _ in raw], dtype=np.int64)
    internal = np.asarray([kind for _, _, kind in raw], dtype=bool)
    indptr, adj_nodes, adj_edges = _csr_adjacency(num_nodes, edges)
    return _freeze(ChimeraTopology(
        n=n, num_nodes=num_nodes, edges=edges, internal_mask=internal,
        adj_indptr=indptr, adj_nodes=adj_nodes, adj_edges=adj_edges,
    ))
