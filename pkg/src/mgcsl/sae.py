"""Variable abstraction: per-variable sparse encoders with a shared decoder.

Each observed variable gets its own tiny encoder (1 -> m1 -> q); the q-column
macro representation Z is the sum of the d encoder outputs, and a shared
decoder (q -> m1 -> d) reconstructs the input from Z.  The contribution
matrix A is the absolute path product through each encoder, so A[i, j] = 0
exactly when variable i has no surviving path into macro j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import autodiff as ad
from .errors import ConfigError, DimensionError

_PARAM_NAMES = ("enc_w1", "enc_b1", "enc_w2", "enc_b2",
                "dec_w1", "dec_b1", "dec_w2", "dec_b2")


def default_m1(d):
    return max(1, int(round(0.75 * d)))


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
class SaeModel:
    """Encoder/decoder parameters; per-variable encoder i lives in row/block i."""

    d: int
    m1: int
    q: int
    params: dict = field(default_factory=dict)
    activation: str = "sigmoid"

    def __post_init__(self):
        _act_np(self.activation)
        expected = self.shapes(self.d, self.m1, self.q)
        for name in _PARAM_NAMES:
            if name not in self.params:
                raise ConfigError(f"SaeModel missing parameter {name!r}")
            got = np.asarray(self.params[name]).shape
            if got != expected[name]:
                raise DimensionError(f"{name} has shape {got}, expected {expected[name]}")

    @staticmethod
    def shapes(d, m1, q):
        return {
            "enc_w1": (d, m1),        # row i = 1 x m1 first layer of encoder i
            "enc_b1": (d, m1),
            "enc_w2": (d * m1, q),    # rows i*m1:(i+1)*m1 = second layer of encoder i
            "enc_b2": (d, q),
            "dec_w1": (q, m1),
            "dec_b1": (1, m1),
            "dec_w2": (m1, d),
            "dec_b2": (1, d),
        }


def init_sae(d, m1=None, q=5, activation="sigmoid", seed=0):
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if q < 1:
        raise ConfigError(f"q must be >= 1, got {q}")
    m1 = default_m1(d) if m1 is None else int(m1)
    if m1 < 1:
        raise ConfigError(f"m1 must be >= 1, got {m1}")
    rng = np.random.default_rng(seed)
    shp = SaeModel.shapes(d, m1, q)

    def u(shape, fan_in):
        b = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-b, b, size=shape)

    params = {
        "enc_w1": u(shp["enc_w1"], 1),
        "enc_b1": np.zeros(shp["enc_b1"]),
        "enc_w2": u(shp["enc_w2"], m1),
        "enc_b2": np.zeros(shp["enc_b2"]),
        "dec_w1": u(shp["dec_w1"], q),
        "dec_b1": np.zeros(shp["dec_b1"]),
        "dec_w2": u(shp["dec_w2"], m1),
        "dec_b2": np.zeros(shp["dec_b2"]),
    }
    return SaeModel(d=d, m1=m1, q=q, params=params, activation=activation)


def sae_forward(x, m):
    """(Z, Y): macro representation and reconstruction for samples x (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != m.d:
        raise DimensionError(f"X has shape {x.shape}, expected (n, {m.d})")
    act = _act_np(m.activation)
    p = m.params
    n = x.shape[0]
    z = np.zeros((n, m.q))
    for i in range(m.d):
        w1 = p["enc_w1"][i:i + 1, :]                      # 1 x m1
        w2 = p["enc_w2"][i * m.m1:(i + 1) * m.m1, :]      # m1 x q
        h = act(x[:, i:i + 1] @ w1 + p["enc_b1"][i:i + 1, :])
        z += act(h @ w2 + p["enc_b2"][i:i + 1, :])
    h = act(z @ p["dec_w1"] + p["dec_b1"])
    y = act(h @ p["dec_w2"] + p["dec_b2"])
    return z, y


def contribution_matrix(m):
    """A (d, q): absolute path product through each per-variable encoder."""
    p = m.params
    a = np.zeros((m.d, m.q))
    for i in range(m.d):
        w1 = np.abs(p["enc_w1"][i:i + 1, :])
        w2 = np.abs(p["enc_w2"][i * m.m1:(i + 1) * m.m1, :])
        a[i, :] = (w1 @ w2)[0]
    return a


class ParamNodes:
    """Shared registry of parameter leaf nodes so one graph binds each name once."""

    def __init__(self):
        self.nodes = {}

    def get(self, name, shape):
        node = self.nodes.get(name)
        if node is None:
            node = ad.param(name, shape)
            self.nodes[name] = node
        elif node.shape != tuple(shape):
            raise DimensionError(f"param {name!r} requested with shape {shape}, "
                                 f"registered as {node.shape}")
        return node


def encoder_exprs(xc, m, nodes):
    """(Z, A) expression nodes over the shared parameter registry."""
    act = _act_expr(m.activation)
    shp = SaeModel.shapes(m.d, m.m1, m.q)
    ew1 = nodes.get("enc_w1", shp["enc_w1"])
    eb1 = nodes.get("enc_b1", shp["enc_b1"])
    ew2 = nodes.get("enc_w2", shp["enc_w2"])
    eb2 = nodes.get("enc_b2", shp["enc_b2"])
    z = None
    a_rows = []
    for i in range(m.d):
        x_i = ad.slice_cols(xc, i, i + 1)
        w1_i = ad.slice_rows(ew1, i, i + 1)
        w2_i = ad.slice_rows(ew2, i * m.m1, (i + 1) * m.m1)
        h = act(ad.add(ad.matmul(x_i, w1_i), ad.slice_rows(eb1, i, i + 1)))
        z_i = act(ad.add(ad.matmul(h, w2_i), ad.slice_rows(eb2, i, i + 1)))
        z = z_i if z is None else ad.add(z, z_i)
        a_rows.append(ad.matmul(ad.absval(w1_i), ad.absval(w2_i)))
    return z, ad.concat_rows(a_rows)


def decoder_exprs(z, m, nodes):
    act = _act_expr(m.activation)
    shp = SaeModel.shapes(m.d, m.m1, m.q)
    dw1 = nodes.get("dec_w1", shp["dec_w1"])
    db1 = nodes.get("dec_b1", shp["dec_b1"])
    dw2 = nodes.get("dec_w2", shp["dec_w2"])
    db2 = nodes.get("dec_b2", shp["dec_b2"])
    h = act(ad.add(ad.matmul(z, dw1), db1))
    return act(ad.add(ad.matmul(h, dw2), db2))


def abstraction_parts(xc, m, alpha1, nodes):
    """Reconstruction and sparsity terms plus the live (Z, A, Y) nodes."""
    n = xc.shape[0]
    z, a = encoder_exprs(xc, m, nodes)
    y = decoder_exprs(z, m, nodes)
    recon = ad.scale(ad.frob_sq(ad.sub(xc, y)), 1.0 / (2.0 * n))
    l1 = ad.scale(ad.add(ad.l11(nodes.nodes["enc_w1"]), ad.l11(nodes.nodes["enc_w2"])),
                  float(alpha1))
    loss = ad.add(recon, l1)
    terms = {"sae_recon": recon, "sae_l1": l1}
    return loss, terms, z, a, y


def abstraction_loss(x, m, alpha1):
    """Scalar loss expression: mean squared reconstruction + L1 on both encoder layers.

    Built over fresh parameter nodes named as in ``m.params``; evaluate with a
    ParameterSet carrying those names.
    """
    if alpha1 < 0:
        raise ConfigError(f"alpha1 must be >= 0, got {alpha1}")
    xc = ad.const(np.asarray(x, dtype=float), name="X")
    if xc.shape[1] != m.d:
        raise DimensionError(f"X has {xc.shape[1]} columns, model expects {m.d}")
    loss, _, _, _, _ = abstraction_parts(xc, m, alpha1, ParamNodes())
    return loss
