"""Synthetic data: Gaussian-process structural equations and macro decomposition.

Each non-root variable is an exact draw from a GP prior (RBF kernel, unit
length scale, evaluated on the standardized realized parent values) plus
independent Gaussian noise; roots are pure noise.  In additive mode one
univariate GP is drawn per parent and summed.  A random-Fourier-feature
approximation is available behind ``rff_features`` for large n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConfigError, DimensionError
from .graphs import GroundTruthGraph, Macro, topo_sort


@dataclass
class Dataset:
    """Sample matrix with optional ground truth and generator provenance."""

    X: np.ndarray
    truth: GroundTruthGraph | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got shape {self.X.shape}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.X, other.X) and self.truth == other.truth
                and self.provenance == other.provenance)


def _standardize_cols(p):
    mu = p.mean(axis=0)
    sd = p.std(axis=0)
    sd = np.where(sd < 1e-12, 1.0, sd)
    return (p - mu) / sd


def _gp_draw(p, rng, rff_features=0):
    """One GP sample evaluated at the rows of p (n, k), standardized first."""
    n = p.shape[0]
    z = _standardize_cols(p)
    if rff_features:
        f = int(rff_features)
        omega = rng.standard_normal((z.shape[1], f))
        phase = rng.uniform(0.0, 2.0 * np.pi, size=f)
        feats = np.sqrt(2.0 / f) * np.cos(z @ omega + phase)
        return feats @ rng.standard_normal(f)
    sq = np.sum(z * z, axis=1)
    k = np.exp(-0.5 * (sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)))
    chol = linalg.cholesky(k, jitter=1e-10)
    return chol @ rng.standard_normal(n)


def sample_gp_sem(g, n, additive=False, noise_scale=1.0, seed=0, rff_features=0):
    """Sample n rows from a GP structural equation model over DAG ``g``.

    Variables are filled in topological order; per node the functional part is
    drawn first and the noise second, so draws are reproducible for a fixed
    (graph, n, seed).  ``additive`` switches from one joint GP over all
    parents to a sum of univariate GPs, one per parent.
    """
    if g.macros:
        raise ConfigError("sample_gp_sem expects a micro-only graph")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if noise_scale < 0:
        raise ConfigError(f"noise_scale must be >= 0, got {noise_scale}")
    order = topo_sort(g.adj)
    if order is None:
        raise ConfigError("sample_gp_sem needs an acyclic graph")
    rng = np.random.default_rng(seed)
    d = g.d
    x = np.zeros((n, d))
    for node in order:
        parents = np.flatnonzero(g.adj[:, node])
        if parents.size == 0:
            x[:, node] = noise_scale * rng.standard_normal(n)
            continue
        if additive:
            f = np.zeros(n)
            for p in parents:
                f += _gp_draw(x[:, [p]], rng, rff_features)
        else:
            f = _gp_draw(x[:, parents], rng, rff_features)
        x[:, node] = f + noise_scale * rng.standard_normal(n)
    prov = {
        "kind": "gp_sem",
        "n": int(n),
        "d": int(d),
        "additive": bool(additive),
        "noise_scale": float(noise_scale),
        "seed": int(seed),
        "rff_features": int(rff_features),
    }
    return Dataset(X=x, truth=g, provenance=prov)


# hidden width of the random decomposition network
_DECOMP_HIDDEN = 100
# observation noise variance added to each generated micro column
_DECOMP_NOISE_VAR = 0.01


def decompose_macro(ds, n_macro, micro_per_macro=8, seed=0):
    """Replace randomly chosen columns by blocks of generated micro-variables.

    Each selected column z feeds a random single-hidden-layer network
    (1 -> 100 sigmoid -> micro_per_macro linear) whose outputs, plus
    Normal(0, 0.01) observation noise, become that macro's micro columns.
    The original columns are removed; surviving columns keep their relative
    order and the micro blocks are appended after them.  The returned truth
    graph keeps each macro as a node (ids after the micro block) with its
    member list, and its original edges re-attached to the macro node.
    """
    if ds.truth is None:
        raise ConfigError("decompose_macro needs a dataset with ground truth")
    if ds.truth.macros:
        raise ConfigError("decompose_macro expects a micro-only truth graph")
    d = ds.d
    if not (1 <= n_macro <= d):
        raise ConfigError(f"n_macro must be in 1..{d}, got {n_macro}")
    if micro_per_macro < 1:
        raise ConfigError(f"micro_per_macro must be >= 1, got {micro_per_macro}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(d, size=n_macro, replace=False))
    survivors = [i for i in range(d) if i not in set(chosen.tolist())]
    n = ds.n
    blocks = []
    for z_col in chosen:
        z = ds.X[:, z_col]
        w1 = rng.uniform(-1.0, 1.0, size=(1, _DECOMP_HIDDEN))
        w2 = rng.uniform(-1.0 / np.sqrt(_DECOMP_HIDDEN), 1.0 / np.sqrt(_DECOMP_HIDDEN),
                         size=(_DECOMP_HIDDEN, micro_per_macro))
        hidden = 1.0 / (1.0 + np.exp(-(z[:, None] @ w1)))
        block = hidden @ w2
        block += np.sqrt(_DECOMP_NOISE_VAR) * rng.standard_normal((n, micro_per_macro))
        blocks.append(block)
    new_x = np.concatenate([ds.X[:, survivors]] + blocks, axis=1)

    n_micro = len(survivors) + n_macro * micro_per_macro
    pos = {old: new for new, old in enumerate(survivors)}
    for k, z_col in enumerate(chosen):
        pos[int(z_col)] = n_micro + k  # macro node id
    total = n_micro + n_macro
    adj = np.zeros((total, total), dtype=bool)
    for i, j in ds.truth.edges():
        adj[pos[i], pos[j]] = True
    macros = []
    for k in range(n_macro):
        start = len(survivors) + k * micro_per_macro
        macros.append(Macro(id=n_micro + k, members=tuple(range(start, start + micro_per_macro))))
    truth = GroundTruthGraph(d=n_micro, adj=adj, macros=tuple(macros))
    prov = dict(ds.provenance)
    prov.update({
        "decomposed": {
            "n_macro": int(n_macro),
            "micro_per_macro": int(micro_per_macro),
            "seed": int(seed),
            "source_columns": [int(c) for c in chosen],
        },
        "d": int(n_micro),
    })
    return Dataset(X=new_x, truth=truth, provenance=prov)
