"""Graph containers and random DAG generators.

Nodes 0..d-1 are micro-variables.  Macro nodes, when present, occupy ids
d..d+k-1 and carry a member list (micro ids).  Adjacency matrices are square
boolean arrays over the full node set (micro plus macro), row = source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class Macro:
    id: int
    members: tuple

    def __post_init__(self):
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "members", tuple(int(i) for i in self.members))


def _check_adj(adj, d, macros):
    adj = np.asarray(adj, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise DimensionError(f"adjacency must be square, got {adj.shape}")
    if adj.shape[0] != d + len(macros):
        raise DimensionError(
            f"adjacency is {adj.shape[0]} nodes, expected {d} micro + {len(macros)} macro")
    ids = [m.id for m in macros]
    if ids != list(range(d, d + len(macros))):
        raise ConfigError(f"macro ids must be {d}..{d + len(macros) - 1}, got {ids}")
    for m in macros:
        if any(not (0 <= i < d) for i in m.members):
            raise ConfigError(f"macro {m.id} has out-of-range members {m.members}")
    return adj


@dataclass
class GroundTruthGraph:
    """Generator-side truth: micro count, adjacency, optional macro spec."""

    d: int
    adj: np.ndarray
    macros: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.macros = tuple(self.macros)
        self.adj = _check_adj(self.adj, self.d, self.macros)

    @property
    def n_nodes(self):
        return self.adj.shape[0]

    def edges(self):
        return [(int(i), int(j)) for i, j in np.argwhere(self.adj)]

    def __eq__(self, other):
        if not isinstance(other, GroundTruthGraph):
            return NotImplemented
        return (self.d == other.d and self.macros == other.macros
                and np.array_equal(self.adj, other.adj))


@dataclass
class CausalGraph:
    """Estimated graph: binary adjacency, origin tag, optional macro nodes."""

    d: int
    adj: np.ndarray
    macros: tuple = field(default_factory=tuple)
    origin: str = "micro"

    def __post_init__(self):
        self.macros = tuple(self.macros)
        self.adj = _check_adj(self.adj, self.d, self.macros)
        if self.origin not in ("micro", "multigranular"):
            raise ConfigError(f"unknown origin {self.origin!r}")

    @property
    def n_nodes(self):
        return self.adj.shape[0]

    def edges(self):
        return [(int(i), int(j)) for i, j in np.argwhere(self.adj)]

    def __eq__(self, other):
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return (self.d == other.d and self.macros == other.macros
                and self.origin == other.origin and np.array_equal(self.adj, other.adj))


def topo_sort(adj):
    """Kahn topological order (smallest id first), or None if cyclic."""
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int)
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    order = []
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in np.flatnonzero(adj[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                # insert keeping ascending id order for determinism
                lo, hi = 0, len(ready)
                while lo < hi:
                    mid = (lo + hi) // 2
                    if ready[mid] < v:
                        lo = mid + 1
                    else:
                        hi = mid
                ready.insert(lo, int(v))
    return order if len(order) == n else None


def gen_er_dag(d, degree, seed=0):
    """Erdos-Renyi style DAG with expected edge count d * degree / 2.

    A random permutation fixes the topological order; each forward pair is
    included independently with probability degree / (d - 1).
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if degree < 0:
        raise ConfigError(f"degree must be >= 0, got {degree}")
    if d > 1 and degree > d - 1:
        raise ConfigError(f"degree {degree} exceeds d - 1 = {d - 1}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((d, d), dtype=bool)
    if d > 1 and degree > 0:
        perm = rng.permutation(d)
        p = degree / (d - 1)
        mask = rng.random((d, d)) < p
        for i in range(d):
            for j in range(i + 1, d):
                if mask[i, j]:
                    adj[perm[i], perm[j]] = True
    return GroundTruthGraph(d=d, adj=adj)


def gen_sf_dag(d, degree, seed=0):
    """Scale-free DAG by preferential attachment.

    Nodes are added in id order (so ids are already topological); each new
    node draws round(degree) parents from the existing nodes, sampled without
    replacement with probability proportional to current degree + 1.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if degree < 0:
        raise ConfigError(f"degree must be >= 0, got {degree}")
    k = int(round(degree))
    rng = np.random.default_rng(seed)
    adj = np.zeros((d, d), dtype=bool)
    deg = np.zeros(d, dtype=int)
    for t in range(1, d):
        m = min(k, t)
        cands = list(range(t))
        for _ in range(m):
            w = deg[cands] + 1.0
            pick = rng.choice(len(cands), p=w / w.sum())
            p = cands.pop(int(pick))
            adj[p, t] = True
            deg[p] += 1
            deg[t] += 1
    return GroundTruthGraph(d=d, adj=adj)
