"""Ising spin-glass instances on Chimera graphs.

The energy of a configuration sigma in {-1,+1}^N is

    E(sigma) = sum_{(i,j) in edges} J_ij sigma_i sigma_j + sum_i h_i sigma_i

with each coupler counted once. Everything is double precision.

File formats
------------
Instance (text, ``#`` starts a comment line)::

    chimera <n>
    b <i> <h_i>          one line per node, every node required
    c <u> <v> <J_uv>     one line per canonical edge, every edge required

Values are written as shortest round-tripping decimals, so a write/read
cycle reproduces the exact doubles. Spin configurations::

    sigma <N>
    1 -1 1 ...           N entries of +-1
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .topology import ChimeraTopology, build_chimera

BRUTE_FORCE_MAX_NODES = 24


class ParseError(ValueError):
    """Malformed instance or configuration file; message names the line."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class IsingInstance:
    """Couplings J (per canonical edge) and biases h (per node) on a topology."""

    topo: ChimeraTopology
    couplings: np.ndarray  # [E] float64
    biases: np.ndarray     # [N] float64

    def __post_init__(self):
        couplings = np.ascontiguousarray(self.couplings, dtype=np.float64)
        biases = np.ascontiguousarray(self.biases, dtype=np.float64)
        if couplings.shape != (self.topo.num_edges,):
            raise ValueError(
                f"expected {self.topo.num_edges} couplings, got {couplings.shape}")
        if biases.shape != (self.topo.num_nodes,):
            raise ValueError(
                f"expected {self.topo.num_nodes} biases, got {biases.shape}")
        if not (np.isfinite(couplings).all() and np.isfinite(biases).all()):
            raise ValueError("couplings and biases must be finite")
        couplings.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "couplings", couplings)
        object.__setattr__(self, "biases", biases)


@dataclass
class SpinConfiguration:
    """Spin vector with entries in {-1,+1}; energy cache is optional.

    Mutable and single-owner: flips go through :func:`apply_flip`, which
    keeps ``cached_energy`` in sync when it is present.
    """

    spins: np.ndarray
    cached_energy: float | None = field(default=None)

    def __post_init__(self):
        spins = np.ascontiguousarray(self.spins, dtype=np.int8)
        if spins.ndim != 1 or not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be a 1-D vector of +-1")
        self.spins = spins

    def __len__(self) -> int:
        return self.spins.shape[0]

    def copy(self) -> "SpinConfiguration":
        return SpinConfiguration(self.spins.copy(), self.cached_energy)


def energy(inst: IsingInstance, cfg: SpinConfiguration) -> float:
    """Full Hamiltonian evaluation, each edge counted once."""
    if len(cfg) != inst.topo.num_nodes:
        raise ValueError(
            f"configuration has {len(cfg)} spins, instance has {inst.topo.num_nodes} nodes")
    s = cfg.spins
    e = inst.topo.edges
    pair = (s[e[:, 0]] * s[e[:, 1]]).astype(np.float64)
    return float(inst.couplings @ pair + inst.biases @ s.astype(np.float64))


def flip_delta(inst: IsingInstance, cfg: SpinConfiguration, i: int) -> float:
    """Energy change of flipping spin i, in O(degree) time.

    Equals -2 * sigma_i * (h_i + sum_j J_ij sigma_j) over the neighbors j.
    """
    topo = inst.topo
    topo.check_node(i)
    lo, hi = topo.adj_indptr[i], topo.adj_indptr[i + 1]
    local = inst.biases[i] + inst.couplings[topo.adj_edges[lo:hi]] @ \
        cfg.spins[topo.adj_nodes[lo:hi]].astype(np.float64)
    return float(-2.0 * cfg.spins[i] * local)


def apply_flip(cfg: SpinConfiguration, i: int, delta: float) -> SpinConfiguration:
    """Negate spin i in place; ``delta`` must be its flip_delta."""
    if not 0 <= i < len(cfg):
        raise ValueError(f"node index {i} out of range [0, {len(cfg)})")
    cfg.spins[i] = -cfg.spins[i]
    if cfg.cached_energy is not None:
        cfg.cached_energy += delta
    return cfg


def random_instance(topo: ChimeraTopology, seed) -> IsingInstance:
    """Instance with J and h drawn i.i.d. standard normal.

    PCG64 stream seeded by ``seed``; draw order is all couplings (edge
    order), then all biases (node order).
    """
    rng = np.random.default_rng(seed)
    couplings = rng.standard_normal(topo.num_edges)
    biases = rng.standard_normal(topo.num_nodes)
    return IsingInstance(topo, couplings, biases)


def random_configuration(topo: ChimeraTopology, seed) -> SpinConfiguration:
    """Uniform random +-1 configuration (one batched integer draw)."""
    rng = np.random.default_rng(seed)
    spins = (2 * rng.integers(0, 2, size=topo.num_nodes) - 1).astype(np.int8)
    return SpinConfiguration(spins)


def brute_force_ground_state(inst: IsingInstance) -> tuple[SpinConfiguration, float]:
    """Exact ground state by exhaustive enumeration (N <= 24 only).

    States are encoded as integers with bit i = 0 meaning sigma_i = +1;
    energy ties are broken toward the lowest encoding.
    """
    n_nodes = inst.topo.num_nodes
    if n_nodes > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_NODES} nodes, instance has {n_nodes}")
    e = inst.topo.edges
    bits = np.arange(n_nodes, dtype=np.uint32)
    total = 1 << n_nodes
    chunk = min(total, 1 << 16)
    best_energy = np.inf
    best_code = 0
    for lo in range(0, total, chunk):
        codes = np.arange(lo, min(lo + chunk, total), dtype=np.uint32)
        down = ((codes[:, None] >> bits) & 1).astype(np.int64)
        sig = (1 - 2 * down).astype(np.float64)
        energies = (sig[:, e[:, 0]] * sig[:, e[:, 1]]) @ inst.couplings + sig @ inst.biases
        k = int(np.argmin(energies))  # first minimum: lowest code in chunk
        if energies[k] < best_energy:
            best_energy = float(energies[k])
            best_code = lo + k
    spins = (1 - 2 * ((best_code >> bits.astype(np.int64)) & 1)).astype(np.int8)
    return SpinConfiguration(spins, cached_energy=best_energy), best_energy


def write_instance(inst: IsingInstance, path) -> None:
    lines = [f"chimera {inst.topo.n}"]
    lines.extend(f"b {i} {h!r}" for i, h in enumerate(inst.biases.tolist()))
    lines.extend(
        f"c {u} {v} {j!r}"
        for (u, v), j in zip(inst.topo.edges.tolist(), inst.couplings.tolist()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _content_lines(path):
    with open(path) as fh:
        for no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if stripped and not stripped.startswith("#"):
                yield no, stripped


def read_instance(path) -> IsingInstance:
    """Parse an instance file; every node and every edge must be listed."""
    lines = _content_lines(path)
    try:
        no, header = next(lines)
    except StopIteration:
        raise ParseError(path, 0, "empty file, expected 'chimera <n>' header") from None
    parts = header.split()
    if len(parts) != 2 or parts[0] != "chimera" or not parts[1].isdigit() or int(parts[1]) < 1:
        raise ParseError(path, no, f"expected 'chimera <n>' header, got {header!r}")
    topo = build_chimera(int(parts[1]))
    edge_of = topo.edge_index_map()

    biases = np.full(topo.num_nodes, np.nan)
    couplings = np.full(topo.num_edges, np.nan)
    for no, line in lines:
        parts = line.split()
        try:
            if parts[0] == "b" and len(parts) == 3:
                i = int(parts[1])
                if not 0 <= i < topo.num_nodes:
                    raise ParseError(path, no, f"node {i} not on C_{topo.n}")
                if not np.isnan(biases[i]):
                    raise ParseError(path, no, f"duplicate bias for node {i}")
                biases[i] = float(parts[2])
            elif parts[0] == "c" and len(parts) == 4:
                u, v = sorted((int(parts[1]), int(parts[2])))
                idx = edge_of.get((u, v))
                if idx is None:
                    raise ParseError(path, no, f"({u}, {v}) is not a coupler of C_{topo.n}")
                if not np.isnan(couplings[idx]):
                    raise ParseError(path, no, f"duplicate coupling for ({u}, {v})")
                couplings[idx] = float(parts[3])
            else:
                raise ParseError(path, no, f"unrecognized line {line!r}")
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(path, no, str(exc)) from None

    missing_b = np.flatnonzero(np.isnan(biases))
    if missing_b.size:
        raise ParseError(path, no, f"missing bias for node {int(missing_b[0])} "
                                   f"({missing_b.size} nodes unlisted)")
    missing_c = np.flatnonzero(np.isnan(couplings))
    if missing_c.size:
        u, v = topo.edges[int(missing_c[0])]
        raise ParseError(path, no, f"missing coupling for ({u}, {v}) "
                                   f"({missing_c.size} edges unlisted)")
    return IsingInstance(topo, couplings, biases)


def write_configuration(cfg: SpinConfiguration, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"sigma {len(cfg)}\n")
        fh.write(" ".join(str(int(s)) for s in cfg.spins) + "\n")


def read_configuration(path) -> SpinConfiguration:
    lines = _content_lines(path)
    try:
        no, header = next(lines)
    except StopIteration:
        raise ParseError(path, 0, "empty file, expected 'sigma <N>' header") from None
    parts = header.split()
    if len(parts) != 2 or parts[0] != "sigma" or not parts[1].isdigit():
        raise ParseError(path, no, f"expected 'sigma <N>' header, got {header!r}")
    n = int(parts[1])
    values: list[int] = []
    for no, line in lines:
        for tok in line.split():
            if tok not in ("1", "+1", "-1"):
                raise ParseError(path, no, f"spin value must be +-1, got {tok!r}")
            values.append(int(tok))
    if len(values) != n:
        raise ParseError(path, no if values else 1,
                         f"expected {n} spins, got {len(values)}")
    return SpinConfiguration(np.asarray(values, dtype=np.int8))


def instance_files_equal(a: IsingInstance, b: IsingInstance) -> bool:
    """Exact (bitwise) equality of two instances on the same size graph."""
    return (a.topo.n == b.topo.n
            and np.array_equal(a.couplings, b.couplings)
            and np.array_equal(a.biases, b.biases))


def default_instance_name(n: int, index: int) -> str:
    return f"C{n}_{index:04d}"


def instance_path(directory, name: str) -> str:
    return os.path.join(directory, name + ".inst")


def configuration_path(directory, name: str) -> str:
    return os.path.join(directory, name + ".sigma")
