"""Post-processing of weighted adjacencies into binary DAGs, plus scoring.

A fitted model yields continuous edge weights; this module thresholds them,
prunes cycles by repeatedly deleting the smallest surviving weight, and
returns a binary graph that passes the exact acyclicity check (the auxiliary
membership-aware check for multi-granularity graphs).  Scoring compares
binary graphs over the same node universe; multi-granularity estimates are
projected down to micro edges first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acyclicity import mg_is_acyclic
from .errors import ConfigError, DimensionError, ShapeError
from .graphs import CausalGraph, Macro, topo_sort


def _support_members(supports):
    """Column-wise member tuples of a boolean (d, q) support matrix."""
    supports = np.asarray(supports, dtype=bool)
    if supports.ndim != 2:
        raise DimensionError(f"support matrix must be 2-D, got shape {supports.shape}")
    return [tuple(int(i) for i in np.nonzero(supports[:, k])[0])
            for k in range(supports.shape[1])]


def _smallest_positive(work):
    """Index of the smallest positive entry; ties break on (row, col) order."""
    best = None
    best_v = None
    for i, j in np.argwhere(work > 0):
        v = work[i, j]
        if best is None or v < best_v:
            best, best_v = (int(i), int(j)), v
    return best


def postprocess(w, epsilon, macro_supports=None):
    """Threshold and cycle-prune a weighted adjacency into a binary graph.

    With ``macro_supports`` absent, ``w`` is the (d, d) micro matrix.  With a
    boolean (d, q) support matrix, ``w`` is the (d+q, d) multi-granularity
    matrix whose last q rows belong to macro candidates; candidates with an
    empty support are dropped entirely and the survivors are renumbered to
    consecutive ids.  Entries below epsilon are zeroed, then the smallest
    remaining positive weight is deleted (ties broken by smallest (source,
    target)) until the relevant acyclicity check passes, and whatever is left
    becomes the binary edge set.
    """
    if epsilon < 0:
        raise ConfigError("pruning threshold epsilon must be non-negative")
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise DimensionError(f"weight matrix must be 2-D, got shape {w.shape}")
    d = w.shape[1]

    if macro_supports is None:
        if w.shape[0] != d:
            raise DimensionError(
                f"micro weight matrix must be square, got shape {w.shape}")
        work = np.array(w)
        macros = ()
        origin = "micro"
    else:
        members = _support_members(macro_supports)
        if w.shape[0] != d + len(members):
            raise DimensionError(
                f"weight matrix has {w.shape[0]} rows but supports imply "
                f"{d + len(members)}")
        kept = [k for k, mem in enumerate(members) if mem]
        n = d + len(kept)
        work = np.zeros((n, n))
        work[:d, :d] = w[:d, :]
        for new, k in enumerate(kept):
            work[d + new, :d] = w[d + k, :]
        macros = tuple(Macro(id=d + new, members=members[k])
                       for new, k in enumerate(kept))
        origin = "multigranular"

    work[work < epsilon] = 0.0

    def _acyclic(adj):
        if origin == "micro":
            return topo_sort(adj) is not None
        return mg_is_acyclic(CausalGraph(d=d, adj=adj, macros=macros,
                                         origin=origin))

    while not _acyclic(work > 0):
        i, j = _smallest_positive(work)
        work[i, j] = 0.0
    return CausalGraph(d=d, adj=work > 0, macros=macros, origin=origin)


def project_multigranularity(g, supports=None):
    """Expand macro-incident edges to their member micro edges.

    Each edge touching a macro node is replaced by the corresponding edges
    over that macro's members (both endpoints expand when both are macros);
    micro-micro edges pass through, duplicates merge, and self-loops arising
    from overlapping memberships are dropped.  ``supports`` optionally
    overrides the member sets stored on the graph (boolean (d, k) matrix,
    column order matching ``g.macros``).
    """
    n = g.d
    if supports is None:
        members = {m.id: m.members for m in g.macros}
    else:
        cols = _support_members(supports)
        if len(cols) != len(g.macros):
            raise ShapeError(
                f"support matrix has {len(cols)} columns for {len(g.macros)} macros")
        members = {m.id: cols[k] for k, m in enumerate(g.macros)}
    for mid, mem in members.items():
        if not mem:
            raise ConfigError(f"macro node {mid} has empty support")

    out = np.zeros((n, n), dtype=bool)

    def expand(node):
        return members[node] if node >= n else (node,)

    for i, j in g.edges():
        for a in expand(i):
            for b in expand(j):
                if a != b:
                    out[a, b] = True
    return CausalGraph(d=n, adj=out, macros=(), origin="micro")


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    shd: int
    runtime_seconds: float

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "shd": self.shd,
                "runtime_seconds": self.runtime_seconds}

    @classmethod
    def from_dict(cls, d):
        return cls(precision=float(d["precision"]), recall=float(d["recall"]),
                   f1=float(d["f1"]), shd=int(d["shd"]),
                   runtime_seconds=float(d["runtime_seconds"]))


def metrics(est, truth, runtime_seconds=0.0):
    """Precision/recall/F1/SHD of an estimated graph against the truth.

    Both graphs must cover the same node universe.  A reversed edge counts
    once in SHD (not as one missing plus one extra); two empty graphs score
    perfect precision and recall, while an empty side alone scores zero.
    """
    est_adj = np.asarray(est.adj, dtype=bool)
    truth_adj = np.asarray(truth.adj, dtype=bool)
    if est_adj.shape != truth_adj.shape:
        raise ShapeError(
            f"graphs cover different node universes: {est_adj.shape} vs "
            f"{truth_adj.shape}")
    pred = {(int(i), int(j)) for i, j in np.argwhere(est_adj)}
    cond = {(int(i), int(j)) for i, j in np.argwhere(truth_adj)}
    inter = pred & cond
    if not pred and not cond:
        precision = recall = 1.0
    else:
        precision = len(inter) / len(pred) if pred else 0.0
        recall = len(inter) / len(cond) if cond else 0.0
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall > 0 else 0.0)
    rev = {(i, j) for (i, j) in pred if (j, i) in cond and (i, j) not in cond}
    extra = pred - cond - rev
    missing = cond - pred - {(j, i) for (i, j) in rev}
    shd = len(extra) + len(missing) + len(rev)
    return MetricsReport(precision=precision, recall=recall, f1=f1, shd=shd,
                         runtime_seconds=float(runtime_seconds))
