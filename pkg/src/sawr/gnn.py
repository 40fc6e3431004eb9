"""Graph network that scores spin flips on a spin-glass instance.

The encoder alternates an edge-centric and a node-centric update for K
rounds. Per round, with gamma and phi single affine maps (d -> d) shared
between the two updates of that round but not across rounds:

    edge:  z_e'  = pool( relu( gamma(z_e) (+) phi(z_u + z_v) ) )
    node:  agg_i = sum over edges at i of z_e'   (neighbors in index order)
           z_i'  = pool( relu( phi(z_i) (+) gamma(agg_i) ) )

where (+) is concatenation and pool is stride-2 average pooling mapping
2d -> d (d is even, so pooled pairs never straddle the two halves). Edge
embeddings start from the coupling value through an affine lift; node
embeddings start from the raw feature vector (h_i, sigma_i, h_i*sigma_i,
sum_j |J_ij|) through an affine lift. The per-flip score of node i is a
small feed-forward decoder applied to the concatenation of the graph
embedding (sum of all node embeddings) with node i's embedding.

Gradients are computed by a hand-written reverse pass over recorded
activations; no autodiff framework is involved. All math is float64.
"""

from __future__ import annotations

import io
import zipfile
from dataclasses import dataclass

import numpy as np

from .ising import IsingInstance, SpinConfiguration
from .topology import ChimeraTopology

NODE_FEATURE_DIM = 4
DEFAULT_EMBED_DIM = 64
DEFAULT_LAYERS = 3
CHECKPOINT_VERSION = 1


@dataclass
class QNetworkParams:
    """All learnable arrays. ``named_arrays`` fixes the canonical order
    used for initialization draws, checkpoints, and optimizer state."""

    dim: int
    layers: int
    edge_in_w: np.ndarray   # (d,)
    edge_in_b: np.ndarray   # (d,)
    node_in_w: np.ndarray   # (4, d)
    node_in_b: np.ndarray   # (d,)
    gamma_w: list[np.ndarray]  # K x (d, d)
    gamma_b: list[np.ndarray]  # K x (d,)
    phi_w: list[np.ndarray]    # K x (d, d)
    phi_b: list[np.ndarray]    # K x (d,)
    dec_w1: np.ndarray      # (2d, d)
    dec_b1: np.ndarray      # (d,)
    dec_w2: np.ndarray      # (d, d)
    dec_b2: np.ndarray      # (d,)
    dec_w3: np.ndarray      # (d,)
    dec_b3: np.ndarray      # (1,)

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = [("edge_in_w", self.edge_in_w), ("edge_in_b", self.edge_in_b),
               ("node_in_w", self.node_in_w), ("node_in_b", self.node_in_b)]
        for k in range(self.layers):
            out += [(f"gamma_w_{k}", self.gamma_w[k]), (f"gamma_b_{k}", self.gamma_b[k]),
                    (f"phi_w_{k}", self.phi_w[k]), (f"phi_b_{k}", self.phi_b[k])]
        out += [("dec_w1", self.dec_w1), ("dec_b1", self.dec_b1),
                ("dec_w2", self.dec_w2), ("dec_b2", self.dec_b2),
                ("dec_w3", self.dec_w3), ("dec_b3", self.dec_b3)]
        return out

    def copy(self) -> "QNetworkParams":
        return QNetworkParams(
            self.dim, self.layers,
            self.edge_in_w.copy(), self.edge_in_b.copy(),
            self.node_in_w.copy(), self.node_in_b.copy(),
            [w.copy() for w in self.gamma_w], [b.copy() for b in self.gamma_b],
            [w.copy() for w in self.phi_w], [b.copy() for b in self.phi_b],
            self.dec_w1.copy(), self.dec_b1.copy(),
            self.dec_w2.copy(), self.dec_b2.copy(),
            self.dec_w3.copy(), self.dec_b3.copy(),
        )

    @classmethod
    def zeros_like(cls, other: "QNetworkParams") -> "QNetworkParams":
        z = other.copy()
        for _, arr in z.named_arrays():
            arr[...] = 0.0
        return z


def add_into(dst: QNetworkParams, src: QNetworkParams) -> None:
    """dst += src, array by array."""
    for (_, a), (_, b) in zip(dst.named_arrays(), src.named_arrays()):
        a += b


def init_params(dim: int = DEFAULT_EMBED_DIM, layers: int = DEFAULT_LAYERS,
                seed=0) -> QNetworkParams:
    """Fan-in-scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
    zero biases, drawn from a PCG64 stream in ``named_arrays`` order."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError(f"embedding dimension must be even and >= 2, got {dim}")
    if layers < 1:
        raise ValueError(f"layer count must be >= 1, got {layers}")
    params = QNetworkParams(
        dim=dim, layers=layers,
        edge_in_w=np.zeros(dim), edge_in_b=np.zeros(dim),
        node_in_w=np.zeros((NODE_FEATURE_DIM, dim)), node_in_b=np.zeros(dim),
        gamma_w=[np.zeros((dim, dim)) for _ in range(layers)],
        gamma_b=[np.zeros(dim) for _ in range(layers)],
        phi_w=[np.zeros((dim, dim)) for _ in range(layers)],
        phi_b=[np.zeros(dim) for _ in range(layers)],
        dec_w1=np.zeros((2 * dim, dim)), dec_b1=np.zeros(dim),
        dec_w2=np.zeros((dim, dim)), dec_b2=np.zeros(dim),
        dec_w3=np.zeros(dim), dec_b3=np.zeros(1),
    )
    fan_in = {"edge_in_w": 1, "node_in_w": NODE_FEATURE_DIM, "dec_w1": 2 * dim}
    rng = np.random.default_rng(seed)
    for name, arr in params.named_arrays():
        if "_b" in name:
            continue  # biases stay zero
        bound = 1.0 / np.sqrt(fan_in.get(name, dim))
        arr[...] = rng.uniform(-bound, bound, size=arr.shape)
    return params


@dataclass
class EmbeddingSet:
    edge_embeddings: np.ndarray   # [E, d]
    node_embeddings: np.ndarray   # [N, d], per-flip action embeddings
    state_embedding: np.ndarray   # [d], sum of node embeddings
    layer_count: int


@dataclass
class _LayerTape:
    ze_in: np.ndarray
    zn_in: np.ndarray
    su: np.ndarray        # z_u + z_v per edge
    edge_pre: np.ndarray  # pre-relu concat of the edge update
    ze_out: np.ndarray
    agg: np.ndarray       # summed adjacent edge embeddings per node
    node_pre: np.ndarray  # pre-relu concat of the node update


@dataclass
class ForwardPass:
    """Recorded activations of one scoring pass, consumed by backward()."""

    instance: IsingInstance
    mask: np.ndarray
    params: QNetworkParams
    feats: np.ndarray
    tapes: list[_LayerTape]
    zn_final: np.ndarray
    ze_final: np.ndarray
    z_state: np.ndarray
    dec_x: np.ndarray
    dec_pre1: np.ndarray
    dec_h1: np.ndarray
    dec_pre2: np.ndarray
    dec_h2: np.ndarray
    q: np.ndarray


def node_features(inst: IsingInstance, cfg: SpinConfiguration) -> np.ndarray:
    """Raw per-node features: (h, sigma, h*sigma, sum of |J| over incident edges)."""
    topo = inst.topo
    s = cfg.spins.astype(np.float64)
    h = inst.biases
    abs_j = np.add.reduceat(np.abs(inst.couplings)[topo.adj_edges], topo.adj_indptr[:-1])
    return np.column_stack([h, s, h * s, abs_j])


def _pool(x: np.ndarray) -> np.ndarray:
    # stride-2 average pooling over the last axis, 2d -> d
    return (x[:, 0::2] + x[:, 1::2]) * 0.5


def _unpool_grad(d_out: np.ndarray) -> np.ndarray:
    # adjoint of _pool: each pooled slot spreads half its gradient to its pair
    return np.repeat(d_out * 0.5, 2, axis=1)


def _segment_sum(per_entry: np.ndarray, topo: ChimeraTopology) -> np.ndarray:
    """Per-node sums over adjacency entries (rows of ``per_entry`` are in
    CSR order). reduceat runs each segment in neighbor-index order, so the
    result is independent of the edge storage order."""
    return np.add.reduceat(per_entry, topo.adj_indptr[:-1], axis=0)


def edge_update(z_edge: np.ndarray, z_u: np.ndarray, z_v: np.ndarray,
                params: QNetworkParams, layer: int) -> np.ndarray:
    """One edge-centric update; symmetric in (z_u, z_v)."""
    z_edge, z_u, z_v = (np.atleast_2d(np.asarray(a, dtype=np.float64))
                        for a in (z_edge, z_u, z_v))
    d = params.dim
    if z_edge.shape[1] != d or z_u.shape != z_edge.shape or z_v.shape != z_edge.shape:
        raise ValueError(f"embedding vectors must have dimension {d}")
    pre = _edge_pre(z_edge, z_u + z_v, params, layer)
    out = _pool(np.maximum(pre, 0.0))
    return out[0] if out.shape[0] == 1 else out


def node_update(z_node: np.ndarray, aggregated_edges: np.ndarray,
                params: QNetworkParams, layer: int) -> np.ndarray:
    """One node-centric update from a node embedding and its summed
    adjacent edge embeddings."""
    z_node = np.atleast_2d(np.asarray(z_node, dtype=np.float64))
    aggregated_edges = np.atleast_2d(np.asarray(aggregated_edges, dtype=np.float64))
    if z_node.shape[1] != params.dim or aggregated_edges.shape != z_node.shape:
        raise ValueError(f"embedding vectors must have dimension {params.dim}")
    pre = _node_pre(z_node, aggregated_edges, params, layer)
    out = _pool(np.maximum(pre, 0.0))
    return out[0] if out.shape[0] == 1 else out


def _edge_pre(ze, su, params, k):
    if not 0 <= k < params.layers:
        raise ValueError(f"layer {k} out of range [0, {params.layers})")
    a = ze @ params.gamma_w[k] + params.gamma_b[k]
    b = su @ params.phi_w[k] + params.phi_b[k]
    return np.concatenate([a, b], axis=1)


def _node_pre(zn, agg, params, k):
    if not 0 <= k < params.layers:
        raise ValueError(f"layer {k} out of range [0, {params.layers})")
    a = zn @ params.phi_w[k] + params.phi_b[k]
    b = agg @ params.gamma_w[k] + params.gamma_b[k]
    return np.concatenate([a, b], axis=1)


def _run_encoder(inst: IsingInstance, cfg: SpinConfiguration,
                 params: QNetworkParams, record: bool):
    topo = inst.topo
    feats = node_features(inst, cfg)
    ze = inst.couplings[:, None] * params.edge_in_w + params.edge_in_b
    zn = feats @ params.node_in_w + params.node_in_b
    tapes: list[_LayerTape] = []
    for k in range(params.layers):
        su = zn[topo.edges[:, 0]] + zn[topo.edges[:, 1]]
        edge_pre = _edge_pre(ze, su, params, k)
        ze_next = _pool(np.maximum(edge_pre, 0.0))
        agg = _segment_sum(ze_next[topo.adj_edges], topo)
        node_pre = _node_pre(zn, agg, params, k)
        zn_next = _pool(np.maximum(node_pre, 0.0))
        if record:
            tapes.append(_LayerTape(ze, zn, su, edge_pre, ze_next, agg, node_pre))
        ze, zn = ze_next, zn_next
    z_state = zn.sum(axis=0)
    return feats, tapes, ze, zn, z_state


def encode(inst: IsingInstance, cfg: SpinConfiguration,
           params: QNetworkParams) -> EmbeddingSet:
    """Embed an instance/configuration pair with K encoder rounds."""
    _, _, ze, zn, z_state = _run_encoder(inst, cfg, params, record=False)
    return EmbeddingSet(ze, zn, z_state, params.layers)


def _decode(zn: np.ndarray, z_state: np.ndarray, params: QNetworkParams):
    n = zn.shape[0]
    x = np.concatenate([np.broadcast_to(z_state, zn.shape), zn], axis=1)
    pre1 = x @ params.dec_w1 + params.dec_b1
    h1 = np.maximum(pre1, 0.0)
    pre2 = h1 @ params.dec_w2 + params.dec_b2
    h2 = np.maximum(pre2, 0.0)
    q = h2 @ params.dec_w3 + params.dec_b3[0]
    return x, pre1, h1, pre2, h2, q.reshape(n)


def q_values(embeddings: EmbeddingSet, params: QNetworkParams,
             mask: np.ndarray) -> np.ndarray:
    """Per-node flip scores; masked (already flipped) entries become -inf."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (embeddings.node_embeddings.shape[0],):
        raise ValueError("mask length must match the node count")
    *_, q = _decode(embeddings.node_embeddings, embeddings.state_embedding, params)
    return np.where(mask, -np.inf, q)


def forward_q(inst: IsingInstance, cfg: SpinConfiguration, params: QNetworkParams,
              mask: np.ndarray) -> tuple[np.ndarray, ForwardPass]:
    """Scoring pass that records every intermediate for backward()."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (inst.topo.num_nodes,):
        raise ValueError("mask length must match the node count")
    feats, tapes, ze, zn, z_state = _run_encoder(inst, cfg, params, record=True)
    x, pre1, h1, pre2, h2, q_raw = _decode(zn, z_state, params)
    q = np.where(mask, -np.inf, q_raw)
    fp = ForwardPass(inst, mask, params, feats, tapes, zn, ze, z_state,
                     x, pre1, h1, pre2, h2, q)
    return q, fp


def backward(fp: ForwardPass, dq: np.ndarray) -> QNetworkParams:
    """Exact reverse-mode gradients of sum(dq * q) w.r.t. every parameter.

    ``dq`` must be zero at masked entries (their q is the -inf sentinel).
    """
    params = fp.params
    topo = fp.instance.topo
    d = params.dim
    dq = np.asarray(dq, dtype=np.float64)
    if dq.shape != fp.q.shape:
        raise ValueError("dq must match the q vector shape")
    if np.any(dq[fp.mask] != 0.0):
        raise ValueError("dq must be zero at masked entries")
    g = QNetworkParams.zeros_like(params)

    # decoder
    g.dec_b3 += dq.sum()
    g.dec_w3 += fp.dec_h2.T @ dq
    dh2 = dq[:, None] * params.dec_w3[None, :]
    dpre2 = dh2 * (fp.dec_pre2 > 0.0)
    g.dec_w2 += fp.dec_h1.T @ dpre2
    g.dec_b2 += dpre2.sum(axis=0)
    dh1 = dpre2 @ params.dec_w2.T
    dpre1 = dh1 * (fp.dec_pre1 > 0.0)
    g.dec_w1 += fp.dec_x.T @ dpre1
    g.dec_b1 += dpre1.sum(axis=0)
    dx = dpre1 @ params.dec_w1.T
    dzn = dx[:, d:].copy()
    dzn += dx[:, :d].sum(axis=0)  # graph embedding is the sum of node rows

    dze = np.zeros_like(fp.ze_final)
    for k in range(params.layers - 1, -1, -1):
        t = fp.tapes[k]
        # node-centric update
        dnode_pre = _unpool_grad(dzn) * (t.node_pre > 0.0)
        da, db = dnode_pre[:, :d], dnode_pre[:, d:]
        g.phi_w[k] += t.zn_in.T @ da
        g.phi_b[k] += da.sum(axis=0)
        dzn_in = da @ params.phi_w[k].T
        g.gamma_w[k] += t.agg.T @ db
        g.gamma_b[k] += db.sum(axis=0)
        dagg = db @ params.gamma_w[k].T
        # summed adjacent edges: every edge receives the grads of both endpoints
        dze += dagg[topo.edges[:, 0]] + dagg[topo.edges[:, 1]]
        # edge-centric update
        dedge_pre = _unpool_grad(dze) * (t.edge_pre > 0.0)
        da, db = dedge_pre[:, :d], dedge_pre[:, d:]
        g.gamma_w[k] += t.ze_in.T @ da
        g.gamma_b[k] += da.sum(axis=0)
        dze_in = da @ params.gamma_w[k].T
        g.phi_w[k] += t.su.T @ db
        g.phi_b[k] += db.sum(axis=0)
        dsu = db @ params.phi_w[k].T
        dzn_in += _segment_sum(dsu[topo.adj_edges], topo)
        dzn, dze = dzn_in, dze_in

    g.node_in_w += fp.feats.T @ dzn
    g.node_in_b += dzn.sum(axis=0)
    g.edge_in_w += fp.instance.couplings @ dze
    g.edge_in_b += dze.sum(axis=0)
    return g


def save_checkpoint(params: QNetworkParams, path) -> None:
    """Write a reproducible npz container (fixed zip timestamps, so equal
    parameters yield byte-identical files)."""
    entries = [("format_version", np.int64(CHECKPOINT_VERSION)),
               ("dim", np.int64(params.dim)),
               ("layers", np.int64(params.layers)),
               ("feature_dim", np.int64(NODE_FEATURE_DIM))]
    entries += params.named_arrays()
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        for name, value in entries:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(value), allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path) -> QNetworkParams:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version} in {path}")
        if int(data["feature_dim"]) != NODE_FEATURE_DIM:
            raise ValueError(f"checkpoint {path} was built for a different feature set")
        dim = int(data["dim"])
        layers = int(data["layers"])
        params = QNetworkParams(
            dim=dim, layers=layers,
            edge_in_w=data["edge_in_w"], edge_in_b=data["edge_in_b"],
            node_in_w=data["node_in_w"], node_in_b=data["node_in_b"],
            gamma_w=[data[f"gamma_w_{k}"] for k in range(layers)],
            gamma_b=[data[f"gamma_b_{k}"] for k in range(layers)],
            phi_w=[data[f"phi_w_{k}"] for k in range(layers)],
            phi_b=[data[f"phi_b_{k}"] for k in range(layers)],
            dec_w1=data["dec_w1"], dec_b1=data["dec_b1"],
            dec_w2=data["dec_w2"], dec_b2=data["dec_b2"],
            dec_w3=data["dec_w3"], dec_b3=data["dec_b3"],
        )
    expected = {
        "edge_in_w": (dim,), "edge_in_b": (dim,),
        "node_in_w": (NODE_FEATURE_DIM, dim), "node_in_b": (dim,),
        "dec_w1": (2 * dim, dim), "dec_b1": (dim,),
        "dec_w2": (dim, dim), "dec_b2": (dim,),
        "dec_w3": (dim,), "dec_b3": (1,),
    }
    for name, arr in params.named_arrays():
        want = expected.get(name, (dim, dim) if "_w_" in name else (dim,))
        if arr.shape != want:
            raise ValueError(f"checkpoint {path}: {name} has shape {arr.shape}, expected {want}")
    return params
