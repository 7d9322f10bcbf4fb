"""Assembly of the full training objective as one expression graph.

The graph is built once per (data, shapes) pair and reused across all inner
iterations: abstraction loss + orientation loss + the augmented-Lagrangian
penalty (mu/2) H^2 + gamma H, where H is the chosen acyclicity functional
plugged in through an external-gradient node on the live C.  The contribution
matrix A is part of the graph, so the adjacency extraction and redundancy
terms backpropagate into the encoder.  mu and gamma live in refreshable
constant nodes so outer iterations update them without rebuilding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .acyclicity import constraint_fn
from .errors import DimensionError
from .mlp_bank import (MlpBank, bank_forward_exprs, bank_param_exprs, init_bank,
                       redundancy_exprs, wam_micro_exprs, weight_penalty_exprs)
from .sae import ParamNodes, SaeModel, abstraction_parts, init_sae


@dataclass
class ObjectiveGraph:
    root: ad.Expr
    params0: ad.ParameterSet
    sae: SaeModel
    bank: MlpBank
    c_expr: ad.Expr
    h_expr: ad.Expr
    a_expr: ad.Expr
    mu_node: ad.Expr
    gamma_node: ad.Expr
    terms: dict


def build_objective(x, *, alpha1, alpha2, q, m2, m1=None, activation="sigmoid",
                    constraint="schur", seed=0):
    """Objective graph plus seeded initial parameters for (mean-centered) data x."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {x.shape}")
    n, d = x.shape
    rng = np.random.default_rng(seed)
    sae_seed = int(rng.integers(2 ** 31))
    bank_seed = int(rng.integers(2 ** 31))
    sae = init_sae(d, m1=m1, q=q, activation=activation, seed=sae_seed)
    bank = init_bank(d, q=q, m2=m2, activation=activation, seed=bank_seed)

    nodes = ParamNodes()
    xc = ad.const(x, name="X")
    l1_loss, terms, z, a, _y = abstraction_parts(xc, sae, alpha1, nodes)
    bexprs = bank_param_exprs(bank, nodes)
    xz = ad.concat_cols([xc, z])
    xhat = bank_forward_exprs(xz, bank, bexprs)
    fit_term = ad.scale(ad.frob_sq(ad.sub(xc, xhat)), 1.0 / (2.0 * n))
    red = redundancy_exprs(bank, a, bexprs)
    wpen = weight_penalty_exprs(nodes, alpha2)
    c = wam_micro_exprs(bank, a, bexprs)

    fn = constraint_fn(constraint)

    def _h(c_value):
        ev = fn(c_value)
        return ev.value, ev.grad_c

    h = ad.external(c, _h, name="acyclicity")
    mu_node = ad.const([[0.0]], name="mu")
    gamma_node = ad.const([[0.0]], name="gamma")
    penalty = ad.add(ad.hadamard(mu_node, ad.scale(ad.hadamard(h, h), 0.5)),
                     ad.hadamard(gamma_node, h))

    terms = dict(terms)
    terms.update({"mlp_fit": fit_term, "redundancy": red,
                  "weight_penalty": wpen, "acyclicity": h, "penalty": penalty})
    root = l1_loss
    for t in (fit_term, red, wpen, penalty):
        root = ad.add(root, t)

    params0 = ad.ParameterSet({**sae.params, **bank.params})
    return ObjectiveGraph(root=root, params0=params0, sae=sae, bank=bank,
                          c_expr=c, h_expr=h, a_expr=a,
                          mu_node=mu_node, gamma_node=gamma_node, terms=terms)


def set_penalty(graph, mu, gamma):
    ad.set_const(graph.mu_node, [[float(mu)]])
    ad.set_const(graph.gamma_node, [[float(gamma)]])


def models_from_params(graph, ps):
    """Rebind fitted parameter arrays into model containers for extraction."""
    sae = graph.sae
    bank = graph.bank
    sae_p = {k: ps.arrays[k] for k in sae.params}
    bank_p = {k: ps.arrays[k] for k in bank.params}
    sae_f = SaeModel(d=sae.d, m1=sae.m1, q=sae.q, params=sae_p, activation=sae.activation)
    bank_f = MlpBank(d=bank.d, q=bank.q, m2=bank.m2, params=bank_p,
                     activation=bank.activation)
    return sae_f, bank_f
