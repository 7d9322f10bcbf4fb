"""Differentiable acyclicity constraints and exact DAG checks.

Both constraints act on D = C * C (Hadamard square of the weighted adjacency)
so that gradients stay sign-correct in C:

* trace-exponential: h = tr(exp(D)) - d, the classic smooth DAG-ness measure;
* spectral: H = sum_i |lambda_i(D)|^2, the squared eigenvalue magnitudes read
  off the (complex) Schur form.  Zero iff D is nilpotent iff the graph of C
  is acyclic.

The spectral gradient uses first-order eigenvalue perturbation through left
and right eigenvectors; when the spectrum is entirely (numerically) zero or
the eigenvector basis is ill-conditioned the matrix is in the defective
near-DAG regime and the gradient is taken to be zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ConfigError, DimensionError
from .graphs import topo_sort

CONSTRAINT_KINDS = ("schur", "exp")

# below this every eigenvalue is treated as exactly zero (nilpotent regime)
_ZERO_SPECTRUM = 1e-9
# eigenvector basis condition number beyond which the perturbation gradient
# is unreliable (defective spectrum); convention: zero gradient
_MAX_EIGVEC_COND = 1e8


@dataclass
class ConstraintEval:
    value: float
    grad_c: np.ndarray


def _check_c(c):
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimensionError(f"constraint needs a square matrix, got {c.shape}")
    return c


def h_trace_exp(c):
    """tr(exp(C * C)) - d with gradient 2 C * exp(C * C)^T."""
    c = _check_c(c)
    d = c.shape[0]
    dd = c * c
    e = linalg.matrix_exponential(dd)
    value = float(np.trace(e)) - d
    grad = 2.0 * c * e.T
    return ConstraintEval(value=value, grad_c=grad)


def h_schur(c):
    """Sum of squared eigenvalue magnitudes of C * C, with gradient in C."""
    c = _check_c(c)
    dd = c * c
    lam, vec = linalg.eigen_pairs(dd)
    value = float(np.sum(lam.real ** 2 + lam.imag ** 2))
    if np.all(np.abs(lam) < _ZERO_SPECTRUM):
        return ConstraintEval(value=value, grad_c=np.zeros_like(c))
    if np.linalg.cond(vec) > _MAX_EIGVEC_COND:
        return ConstraintEval(value=value, grad_c=np.zeros_like(c))
    # dH/dD = Re((V diag(2 conj(lam)) V^-1)^T): rows of V^-1 are the left
    # eigenvectors normalized against the right ones
    vinv = np.linalg.inv(vec)
    m = (vec * (2.0 * np.conj(lam))) @ vinv
    dh_dd = np.real(m.T)
    grad = 2.0 * c * dh_dd
    return ConstraintEval(value=value, grad_c=grad)


def constraint_fn(kind):
    """The ConstraintEval-producing function for a named constraint."""
    if kind == "schur":
        return h_schur
    if kind == "exp":
        return h_trace_exp
    raise ConfigError(f"unknown constraint kind {kind!r}, expected one of {CONSTRAINT_KINDS}")


def grad_check_constraint(kind, c, step=1e-6):
    """Worst relative error of the constraint gradient vs central differences."""
    fn = constraint_fn(kind)
    c = _check_c(c).copy()
    base = fn(c)
    worst = 0.0
    flat = c.ravel()
    for i in range(flat.size):
        x0 = flat[i]
        flat[i] = x0 + step
        fp = fn(c).value
        flat[i] = x0 - step
        fm = fn(c).value
        flat[i] = x0
        fd = (fp - fm) / (2.0 * step)
        ad = float(base.grad_c.ravel()[i])
        err = abs(fd - ad) / max(1.0, abs(fd), abs(ad))
        worst = max(worst, err)
    return worst


def is_dag_exact(g):
    """Exact acyclicity of a graph's raw adjacency via topological sort."""
    adj = g if isinstance(g, np.ndarray) else g.adj
    return topo_sort(adj) is not None


def mg_is_acyclic(g):
    """Multi-granularity acyclicity (auxiliary-graph reduction).

    Augments the adjacency with member -> macro edges (a macro is composed of
    its members, so a path out of a macro back into any member is a cycle)
    and runs an exact topological sort.  Macro nodes must have nonempty
    member sets.
    """
    macros = tuple(g.macros)
    for m in macros:
        if not m.members:
            raise ConfigError(f"macro node {m.id} has empty support")
    aux = np.array(g.adj, dtype=bool, copy=True)
    for m in macros:
        for member in m.members:
            aux[member, m.id] = True
    return topo_sort(aux) is not None
