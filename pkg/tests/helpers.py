"""Independent oracles used across the test suite.

These deliberately re-derive results through a different route than the
library code: pairwise predicates instead of generative construction,
full recomputation instead of incremental updates, finite differences
instead of the hand-written reverse pass.
"""

from __future__ import annotations

import numpy as np

from sawr.gnn import QNetworkParams
from sawr.topology import ChimeraTopology, _csr_adjacency


def cell_coords(n: int, idx: int) -> tuple[int, int, int, int]:
    cell, within = divmod(idx, 8)
    return (*divmod(cell, n), *divmod(within, 4))


def oracle_edge_kind(n: int, i: int, j: int) -> str | None:
    """Pair predicate: 'internal', 'external', or None if not coupled."""
    ri, ci, si, ki = cell_coords(n, i)
    rj, cj, sj, kj = cell_coords(n, j)
    if (ri, ci) == (rj, cj) and si != sj:
        return "internal"
    if si == sj and ki == kj:
        if si == 0 and ci == cj and abs(ri - rj) == 1:
            return "external"
        if si == 1 and ri == rj and abs(ci - cj) == 1:
            return "external"
    return None


def oracle_edges(n: int) -> dict[tuple[int, int], str]:
    """All couplers of C_n by exhaustive pair enumeration."""
    nodes = 8 * n * n
    out = {}
    for i in range(nodes):
        for j in range(i + 1, nodes):
            kind = oracle_edge_kind(n, i, j)
            if kind is not None:
                out[(i, j)] = kind
    return out


def adjacency_energy(inst, spins: np.ndarray) -> float:
    """Second, independently coded Hamiltonian sum over oracle adjacency."""
    n = inst.topo.n
    coupling_of = {(int(u), int(v)): float(j)
                   for (u, v), j in zip(inst.topo.edges.tolist(), inst.couplings)}
    total = 0.0
    for (i, j), _ in oracle_edges(n).items():
        total += coupling_of[(i, j)] * float(spins[i]) * float(spins[j])
    for i, h in enumerate(inst.biases):
        total += float(h) * float(spins[i])
    return total


def permuted_edge_topology(topo: ChimeraTopology, perm: np.ndarray) -> ChimeraTopology:
    """Same graph with edges stored in a shuffled order."""
    edges = topo.edges[perm]
    internal = topo.internal_mask[perm]
    indptr, adj_nodes, adj_edges = _csr_adjacency(topo.num_nodes, edges)
    return ChimeraTopology(topo.n, topo.num_nodes, edges, internal,
                           indptr, adj_nodes, adj_edges)


def finite_difference_grads(loss, params: QNetworkParams, h: float = 1e-5) -> QNetworkParams:
    """Central differences of a scalar-valued ``loss()`` over every parameter."""
    fd = QNetworkParams.zeros_like(params)
    fd_arrays = dict(fd.named_arrays())
    for name, arr in params.named_arrays():
        out = fd_arrays[name]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + h
            up = loss()
            arr[ix] = orig - h
            down = loss()
            arr[ix] = orig
            out[ix] = (up - down) / (2.0 * h)
    return fd


def max_relative_error(a: QNetworkParams, b: QNetworkParams,
                       floor: float = 1e-8) -> float:
    worst = 0.0
    for (_, x), (_, y) in zip(a.named_arrays(), b.named_arrays()):
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst
