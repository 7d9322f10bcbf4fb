"""Causality orientation: one small MLP per target variable.

MLP j maps the concatenation X (+) Z onto variable j through one hidden layer
and a linear output.  Row j of its first-layer weights (the self-input row)
is structurally pinned to zero, so the model realizes X_{-j} (+) Z while the
stored matrix keeps the full (d+q) x m2 indexing used by the adjacency
extractions.

The micro adjacency C combines each source's direct row with its A-weighted
macro rows (L2 over hidden units); its diagonal is pinned exactly zero so the
acyclicity functionals can actually reach zero.  S keeps all d+q source rows
per target.  The redundancy penalty suppresses source variables that act on a
target through a macro and directly at the same time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .errors import ConfigError, DimensionError

_PARAM_NAMES = ("mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2")


def _act_np(name):
    if name == "sigmoid":
        return expit
    if name == "tanh":
        return np.tanh
    raise ConfigError(f"unknown activation {name!r}")


def _act_expr(name):
    if name == "sigmoid":
        return ad.sigmoid
    if name == "tanh":
        return ad.tanh
    raise ConfigError(f"unknown activation {name!r}")


@dataclass
class MlpBank:
    """d MLPs; first layers stacked in mlp_w1 as d blocks of (d+q) rows."""

    d: int
    q: int
    m2: int
    params: dict = field(default_factory=dict)
    activation: str = "sigmoid"

    def __post_init__(self):
        _act_np(self.activation)
        expected = self.shapes(self.d, self.q, self.m2)
        for name in _PARAM_NAMES:
            if name not in self.params:
                raise ConfigError(f"MlpBank missing parameter {name!r}")
            got = np.asarray(self.params[name]).shape
            if got != expected[name]:
                raise DimensionError(f"{name} has shape {got}, expected {expected[name]}")

    @staticmethod
    def shapes(d, q, m2):
        k = d + q
        return {
            "mlp_w1": (d * k, m2),   # block j = first layer of MLP j
            "mlp_b1": (d, m2),
            "mlp_w2": (d * m2, 1),   # block j = output layer of MLP j
            "mlp_b2": (d, 1),
        }

    def w1_block(self, j, pinned=True):
        k = self.d + self.q
        block = np.array(self.params["mlp_w1"][j * k:(j + 1) * k, :], copy=True)
        if pinned:
            block[j, :] = 0.0
        return block

    def w2_block(self, j):
        return np.asarray(self.params["mlp_w2"][j * self.m2:(j + 1) * self.m2, :])


def init_bank(d, q, m2=10, activation="sigmoid", seed=0):
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, pinned self-rows."""
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if q < 0:
        raise ConfigError(f"q must be >= 0, got {q}")
    if m2 < 1:
        raise ConfigError(f"m2 must be >= 1, got {m2}")
    rng = np.random.default_rng(seed)
    k = d + q
    shp = MlpBank.shapes(d, q, m2)
    b1 = 1.0 / np.sqrt(k)
    w1 = rng.uniform(-b1, b1, size=shp["mlp_w1"])
    for j in range(d):
        w1[j * k + j, :] = 0.0  # self-input row pinned
    b2 = 1.0 / np.sqrt(m2)
    params = {
        "mlp_w1": w1,
        "mlp_b1": np.zeros(shp["mlp_b1"]),
        "mlp_w2": rng.uniform(-b2, b2, size=shp["mlp_w2"]),
        "mlp_b2": np.zeros(shp["mlp_b2"]),
    }
    return MlpBank(d=d, q=q, m2=m2, params=params, activation=activation)


def pin_self_rows(params, d, q):
    """Zero the self-input rows of the stacked first layers, in place."""
    k = d + q
    w1 = params["mlp_w1"]
    for j in range(d):
        w1[j * k + j, :] = 0.0
    return params


def mlp_bank_forward(x, z, bank):
    """X-hat (n, d): per-target reconstruction from X_{-j} (+) Z."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.ndim != 2 or x.shape[1] != bank.d:
        raise DimensionError(f"X has shape {x.shape}, expected (n, {bank.d})")
    if z.ndim != 2 or z.shape != (x.shape[0], bank.q):
        raise DimensionError(f"Z has shape {z.shape}, expected ({x.shape[0]}, {bank.q})")
    act = _act_np(bank.activation)
    xz = np.concatenate([x, z], axis=1)
    out = np.zeros((x.shape[0], bank.d))
    p = bank.params
    for j in range(bank.d):
        h = act(xz @ bank.w1_block(j) + p["mlp_b1"][j:j + 1, :])
        out[:, j] = (h @ bank.w2_block(j) + p["mlp_b2"][j:j + 1, :])[:, 0]
    return out


def wam_micro(bank, a):
    """C (d, d): direct row plus A-weighted macro rows, L2 over hidden units.

    The diagonal is pinned exactly zero: the self row is structurally zero and
    a variable's round trip through the macros is not a causal edge onto
    itself (a nonzero diagonal would keep every acyclicity measure positive).
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (bank.d, bank.q):
        raise DimensionError(f"A has shape {a.shape}, expected ({bank.d}, {bank.q})")
    c = np.zeros((bank.d, bank.d))
    for j in range(bank.d):
        w1 = bank.w1_block(j)
        comb = w1[:bank.d, :] + a @ w1[bank.d:, :]
        c[:, j] = np.sqrt(np.sum(comb ** 2, axis=1))
    np.fill_diagonal(c, 0.0)
    return c


def wam_multigran(bank):
    """S (d+q, d): L2 row norms of each target's first layer, all source rows."""
    s = np.zeros((bank.d + bank.q, bank.d))
    for j in range(bank.d):
        s[:, j] = np.sqrt(np.sum(bank.w1_block(j) ** 2, axis=1))
    return s


# ---------------------------------------------------------------------------
# expression builders (shared parameter registry, see sae.ParamNodes)


def _as_expr(x, name=None):
    return x if isinstance(x, ad.Expr) else ad.const(np.asarray(x, dtype=float), name=name)


def bank_param_exprs(bank, nodes):
    """Per-target effective (masked) first-layer blocks plus output layers."""
    d, q, m2 = bank.d, bank.q, bank.m2
    k = d + q
    shp = MlpBank.shapes(d, q, m2)
    w1 = nodes.get("mlp_w1", shp["mlp_w1"])
    b1 = nodes.get("mlp_b1", shp["mlp_b1"])
    w2 = nodes.get("mlp_w2", shp["mlp_w2"])
    b2 = nodes.get("mlp_b2", shp["mlp_b2"])
    blocks = []
    for j in range(d):
        raw = ad.slice_rows(w1, j * k, (j + 1) * k)
        mask = np.ones((k, m2))
        mask[j, :] = 0.0
        eff = ad.hadamard(raw, ad.const(mask, name=f"pin_{j}"))
        blocks.append({
            "w1_raw": raw,
            "w1_eff": eff,
            "w2": ad.slice_rows(w2, j * m2, (j + 1) * m2),
            "b1": ad.slice_rows(b1, j, j + 1),
            "b2": ad.slice_rows(b2, j, j + 1),
        })
    return {"blocks": blocks, "w1": w1, "w2": w2}


def bank_forward_exprs(xz, bank, bexprs):
    """X-hat expression from an (n, d+q) input expression."""
    act = _act_expr(bank.activation)
    cols = []
    for blk in bexprs["blocks"]:
        h = act(ad.add(ad.matmul(xz, blk["w1_eff"]), blk["b1"]))
        cols.append(ad.add(ad.matmul(h, blk["w2"]), blk["b2"]))
    return ad.concat_cols(cols)


def wam_micro_exprs(bank, a_expr, bexprs):
    """C expression with a structurally zero diagonal."""
    d = bank.d
    cols = []
    for blk in bexprs["blocks"]:
        micro = ad.slice_rows(blk["w1_eff"], 0, d)
        macro = ad.slice_rows(blk["w1_eff"], d, d + bank.q)
        comb = ad.add(micro, ad.matmul(a_expr, macro))
        cols.append(ad.row_norms(comb))
    c = ad.concat_cols(cols)
    off_diag = 1.0 - np.eye(d)
    return ad.hadamard(c, ad.const(off_diag, name="offdiag"))


def redundancy_exprs(bank, a_expr, bexprs):
    # formula on the stored matrices; identical to the pinned view whenever
    # the pin is enforced, since the self row contributes |0| either way
    d = bank.d
    total = None
    for blk in bexprs["blocks"]:
        micro = ad.slice_rows(blk["w1_raw"], 0, d)
        macro = ad.slice_rows(blk["w1_raw"], d, d + bank.q)
        via_macro = ad.row_sums(ad.matmul(ad.absval(a_expr), ad.absval(macro)))
        direct = ad.row_sums(ad.absval(micro))
        term = ad.l11(ad.hadamard(via_macro, direct))
        total = term if total is None else ad.add(total, term)
    return total


def redundancy_penalty(bank, a):
    """Scalar expression of the macro/direct redundancy.

    Per target j: (row sums of |A| |W_j(1)|[d:, :]) Hadamard (row sums of
    |W_j(1)|[:d, :]), L1-summed.  Zero whenever no source influences a target
    both through a macro and directly.
    """
    nodes = _fresh_nodes()
    bexprs = bank_param_exprs(bank, nodes)
    return redundancy_exprs(bank, _as_expr(a, name="A"), bexprs)


def weight_penalty_exprs(nodes, alpha2):
    """alpha2 * (L1,1 of stacked first layers + half squared Frobenius, all layers)."""
    w1 = nodes.nodes["mlp_w1"]
    w2 = nodes.nodes["mlp_w2"]
    l1 = ad.l11(w1)
    frob = ad.scale(ad.add(ad.frob_sq(w1), ad.frob_sq(w2)), 0.5)
    return ad.scale(ad.add(l1, frob), float(alpha2))


def _fresh_nodes():
    from .sae import ParamNodes
    return ParamNodes()


def orientation_loss(x, xhat, bank, a, alpha2):
    """Scalar loss: mean squared fit + redundancy + weight penalties (no acyclicity).

    ``x`` and ``xhat`` may be arrays or expression nodes; the weight terms are
    built over fresh parameter nodes named as in ``bank.params``.
    """
    if alpha2 < 0:
        raise ConfigError(f"alpha2 must be >= 0, got {alpha2}")
    xe = _as_expr(x, name="X")
    xh = _as_expr(xhat, name="Xhat")
    if xe.shape != xh.shape:
        raise DimensionError(f"X {xe.shape} vs X-hat {xh.shape}")
    n = xe.shape[0]
    nodes = _fresh_nodes()
    bexprs = bank_param_exprs(bank, nodes)
    recon = ad.scale(ad.frob_sq(ad.sub(xe, xh)), 1.0 / (2.0 * n))
    red = redundancy_exprs(bank, _as_expr(a, name="A"), bexprs)
    pen = weight_penalty_exprs(nodes, alpha2)
    return ad.add(ad.add(recon, red), pen)
