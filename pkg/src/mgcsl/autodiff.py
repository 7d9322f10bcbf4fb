"""Minimal reverse-mode differentiation over matrix-valued expressions.

An expression graph is built once per model shape from the constructors below
and then evaluated many times against different parameter bindings.  Values
are dense float64 arrays of shape (rows, cols); scalars are 1x1 matrices.
Shape mismatches are raised at construction time, never during evaluation.

Subgradient conventions: d|x| = 0 at x = 0, and a zero row contributes a zero
gradient row through the row-wise L2 norm.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import ShapeError


class Expr:
    """One node of an expression graph."""

    __slots__ = ("op", "args", "shape", "name", "aux", "value", "_topo", "_ext_grad")

    def __init__(self, op, args, shape, name=None, aux=None):
        self.op = op
        self.args = tuple(args)
        self.shape = (int(shape[0]), int(shape[1]))
        self.name = name
        self.aux = aux
        self.value = None      # filled by forward passes
        self._topo = None      # cached evaluation order (roots only)

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<Expr {self.op}{tag} {self.shape[0]}x{self.shape[1]}>"


def _as2d(x):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got ndim={a.ndim}")
    return a


def param(name, shape):
    """Leaf bound to ``params[name]`` at evaluation time."""
    if not name:
        raise ShapeError("param needs a non-empty name")
    return Expr("param", (), shape, name=name)


def const(value, name=None):
    """Leaf with a fixed value (refreshable via set_const)."""
    v = _as2d(value)
    e = Expr("const", (), v.shape, name=name)
    e.value = v
    return e


def set_const(e, value):
    """Replace a const leaf's value in place (shape must match)."""
    if e.op != "const":
        raise ShapeError("set_const only applies to const nodes")
    v = _as2d(value)
    if v.shape != e.shape:
        raise ShapeError(f"set_const shape {v.shape} != node shape {e.shape}")
    e.value = v


def matmul(a, b):
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul {a.shape} @ {b.shape}")
    return Expr("matmul", (a, b), (a.shape[0], b.shape[1]))


def add(a, b):
    # same shape, or b a 1 x k row vector broadcast down the rows of a (bias)
    if a.shape == b.shape:
        return Expr("add", (a, b), a.shape)
    if b.shape == (1, a.shape[1]):
        return Expr("addrow", (a, b), a.shape)
    raise ShapeError(f"add {a.shape} + {b.shape}")


def sub(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"sub {a.shape} - {b.shape}")
    return Expr("sub", (a, b), a.shape)


def hadamard(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"hadamard {a.shape} * {b.shape}")
    return Expr("hadamard", (a, b), a.shape)


def scale(a, c):
    return Expr("scale", (a,), a.shape, aux=float(c))


def sigmoid(a):
    return Expr("sigmoid", (a,), a.shape)


def tanh(a):
    return Expr("tanh", (a,), a.shape)


def absval(a):
    return Expr("abs", (a,), a.shape)


def row_norms(a):
    """Row-wise Euclidean norms, (r, c) -> (r, 1)."""
    return Expr("rownorm", (a,), (a.shape[0], 1))


def row_sums(a):
    """Row-wise sums, (r, c) -> (r, 1)."""
    return Expr("rowsum", (a,), (a.shape[0], 1))


def frob_sq(a):
    """Squared Frobenius norm, scalar."""
    return Expr("frobsq", (a,), (1, 1))


def l11(a):
    """Entrywise L1 norm (sum of absolute values), scalar."""
    return Expr("l11", (a,), (1, 1))


def sum_all(a):
    """Sum of all entries, scalar."""
    return Expr("sumall", (a,), (1, 1))


def slice_rows(a, r0, r1):
    if not (0 <= r0 <= r1 <= a.shape[0]):
        raise ShapeError(f"slice_rows [{r0}:{r1}] of {a.shape}")
    return Expr("slicerows", (a,), (r1 - r0, a.shape[1]), aux=(r0, r1))


def slice_cols(a, c0, c1):
    if not (0 <= c0 <= c1 <= a.shape[1]):
        raise ShapeError(f"slice_cols [{c0}:{c1}] of {a.shape}")
    return Expr("slicecols", (a,), (a.shape[0], c1 - c0), aux=(c0, c1))


def concat_rows(parts):
    parts = tuple(parts)
    if not parts:
        raise ShapeError("concat_rows of nothing")
    c = parts[0].shape[1]
    if any(p.shape[1] != c for p in parts):
        raise ShapeError("concat_rows column mismatch")
    return Expr("concatrows", parts, (sum(p.shape[0] for p in parts), c))


def concat_cols(parts):
    parts = tuple(parts)
    if not parts:
        raise ShapeError("concat_cols of nothing")
    r = parts[0].shape[0]
    if any(p.shape[0] != r for p in parts):
        raise ShapeError("concat_cols row mismatch")
    return Expr("concatcols", parts, (r, sum(p.shape[1] for p in parts)))


def external(a, fn, name=None):
    """Opaque scalar function of one matrix with a caller-supplied gradient.

    ``fn(value) -> (scalar, grad)`` where grad has a's shape.  The scalar
    becomes this node's 1x1 value; grad enters the backward pass as given.
    """
    return Expr("external", (a,), (1, 1), name=name, aux=fn)


# ---------------------------------------------------------------------------
# evaluation


class ParameterSet:
    """Ordered name -> float64 array mapping with lossless flatten/unflatten."""

    def __init__(self, arrays):
        self.arrays = {k: np.asarray(v, dtype=float) for k, v in arrays.items()}
        for k, v in self.arrays.items():
            if v.ndim != 2:
                raise ShapeError(f"parameter {k!r} must be 2-D, got {v.shape}")

    def names(self):
        return list(self.arrays)

    def copy(self):
        return ParameterSet({k: v.copy() for k, v in self.arrays.items()})

    def size(self):
        return sum(v.size for v in self.arrays.values())

    def flatten(self):
        if not self.arrays:
            return np.zeros(0)
        return np.concatenate([v.ravel() for v in self.arrays.values()])

    def unflatten(self, vec):
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != self.size():
            raise ShapeError(f"flat vector has {vec.size} entries, expected {self.size()}")
        out = {}
        pos = 0
        for k, v in self.arrays.items():
            out[k] = vec[pos:pos + v.size].reshape(v.shape).copy()
            pos += v.size
        return ParameterSet(out)

    def __eq__(self, other):
        if not isinstance(other, ParameterSet):
            return NotImplemented
        if list(self.arrays) != list(other.arrays):
            return False
        return all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays)


def _topo_order(root):
    """Children-before-parents order, cached on the root."""
    if root._topo is not None:
        return root._topo
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in node.args:
            if id(a) not in seen:
                stack.append((a, False))
    root._topo = order
    return order


def _forward(order, params):
    arrays = params.arrays if isinstance(params, ParameterSet) else params
    for e in order:
        op = e.op
        if op == "const":
            continue
        if op == "param":
            v = arrays[e.name]
            if v.shape != e.shape:
                raise ShapeError(
                    f"parameter {e.name!r} bound with shape {v.shape}, expected {e.shape}")
            e.value = v
            continue
        a = e.args
        if op == "matmul":
            e.value = a[0].value @ a[1].value
        elif op == "add":
            e.value = a[0].value + a[1].value
        elif op == "addrow":
            e.value = a[0].value + a[1].value
        elif op == "sub":
            e.value = a[0].value - a[1].value
        elif op == "hadamard":
            e.value = a[0].value * a[1].value
        elif op == "scale":
            e.value = e.aux * a[0].value
        elif op == "sigmoid":
            e.value = expit(a[0].value)
        elif op == "tanh":
            e.value = np.tanh(a[0].value)
        elif op == "abs":
            e.value = np.abs(a[0].value)
        elif op == "rownorm":
            e.value = np.sqrt(np.sum(a[0].value ** 2, axis=1, keepdims=True))
        elif op == "rowsum":
            e.value = np.sum(a[0].value, axis=1, keepdims=True)
        elif op == "frobsq":
            e.value = np.array([[float(np.sum(a[0].value ** 2))]])
        elif op == "l11":
            e.value = np.array([[float(np.sum(np.abs(a[0].value)))]])
        elif op == "sumall":
            e.value = np.array([[float(np.sum(a[0].value))]])
        elif op == "slicerows":
            r0, r1 = e.aux
            e.value = a[0].value[r0:r1, :]
        elif op == "slicecols":
            c0, c1 = e.aux
            e.value = a[0].value[:, c0:c1]
        elif op == "concatrows":
            e.value = np.concatenate([p.value for p in a], axis=0)
        elif op == "concatcols":
            e.value = np.concatenate([p.value for p in a], axis=1)
        elif op == "external":
            val, grad = e.aux(a[0].value)
            grad = np.asarray(grad, dtype=float)
            if grad.shape != a[0].shape:
                raise ShapeError(
                    f"external gradient shape {grad.shape} != input shape {a[0].shape}")
            e.value = np.array([[float(val)]])
            e._ext_grad = grad  # stashed for the backward pass
        else:  # pragma: no cover
            raise ShapeError(f"unknown op {op!r}")


def evaluate(root, params):
    """Value of ``root`` under the given parameter binding."""
    order = _topo_order(root)
    _forward(order, params)
    return np.array(root.value, copy=True)


def gradients(root, params):
    """Adjoints of a scalar root w.r.t. every parameter, keyed by name.

    Parameters the root does not depend on come back as zero arrays.
    """
    if root.shape != (1, 1):
        raise ShapeError(f"gradients needs a scalar root, got {root.shape}")
    order = _topo_order(root)
    _forward(order, params)
    adj = {id(root): np.ones((1, 1))}
    arrays = params.arrays if isinstance(params, ParameterSet) else params
    out = {k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in arrays.items()}

    def acc(node, g):
        key = id(node)
        if key in adj:
            adj[key] = adj[key] + g
        else:
            adj[key] = g

    for e in reversed(order):
        g = adj.pop(id(e), None)
        if g is None:
            continue
        op = e.op
        if op == "const":
            continue
        if op == "param":
            out[e.name] += g
            continue
        a = e.args
        if op == "matmul":
            acc(a[0], g @ a[1].value.T)
            acc(a[1], a[0].value.T @ g)
        elif op == "add":
            acc(a[0], g)
            acc(a[1], g)
        elif op == "addrow":
            acc(a[0], g)
            acc(a[1], np.sum(g, axis=0, keepdims=True))
        elif op == "sub":
            acc(a[0], g)
            acc(a[1], -g)
        elif op == "hadamard":
            acc(a[0], g * a[1].value)
            acc(a[1], g * a[0].value)
        elif op == "scale":
            acc(a[0], e.aux * g)
        elif op == "sigmoid":
            y = e.value
            acc(a[0], g * y * (1.0 - y))
        elif op == "tanh":
            acc(a[0], g * (1.0 - e.value ** 2))
        elif op == "abs":
            acc(a[0], g * np.sign(a[0].value))
        elif op == "rownorm":
            x = a[0].value
            nrm = e.value.copy()
            nrm[nrm == 0.0] = 1.0  # zero rows get zero gradient
            acc(a[0], (g / nrm) * x)
        elif op == "rowsum":
            acc(a[0], np.broadcast_to(g, a[0].shape).copy())
        elif op == "frobsq":
            acc(a[0], 2.0 * g[0, 0] * a[0].value)
        elif op == "l11":
            acc(a[0], g[0, 0] * np.sign(a[0].value))
        elif op == "sumall":
            acc(a[0], np.full(a[0].shape, g[0, 0]))
        elif op == "slicerows":
            r0, r1 = e.aux
            full = np.zeros(a[0].shape)
            full[r0:r1, :] = g
            acc(a[0], full)
        elif op == "slicecols":
            c0, c1 = e.aux
            full = np.zeros(a[0].shape)
            full[:, c0:c1] = g
            acc(a[0], full)
        elif op == "concatrows":
            pos = 0
            for p in a:
                acc(p, g[pos:pos + p.shape[0], :])
                pos += p.shape[0]
        elif op == "concatcols":
            pos = 0
            for p in a:
                acc(p, g[:, pos:pos + p.shape[1]])
                pos += p.shape[1]
        elif op == "external":
            acc(a[0], g[0, 0] * e._ext_grad)
        else:  # pragma: no cover
            raise ShapeError(f"unknown op {op!r}")
    return out


def finite_difference_check(root, params, step=1e-5, max_entries=10000,
                            skip_kinks=True, seed=0):
    """Worst relative error between reverse-mode and central differences.

    Checks every parameter entry (a seeded random subsample once the total
    exceeds ``max_entries``).  Relative error is |a - b| / max(1, |a|, |b|).
    With ``skip_kinks`` entries within 10 * step of zero are skipped, since
    |.|-style terms are non-smooth there and the convention d|0| = 0 need not
    match a finite difference.
    """
    g = gradients(root, params)
    entries = [(k, i) for k, v in params.arrays.items() for i in range(v.size)]
    if len(entries) > max_entries:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(entries), size=max_entries, replace=False)
        entries = [entries[i] for i in idx]
    work = params.copy()
    worst = 0.0
    for k, i in entries:
        flat = work.arrays[k].ravel()
        x0 = flat[i]
        if skip_kinks and abs(x0) < 10.0 * step:
            continue
        flat[i] = x0 + step
        fp = float(evaluate(root, work)[0, 0])
        flat[i] = x0 - step
        fm = float(evaluate(root, work)[0, 0])
        flat[i] = x0
        fd = (fp - fm) / (2.0 * step)
        ad = float(g[k].ravel()[i])
        err = abs(fd - ad) / max(1.0, abs(fd), abs(ad))
        if err > worst:
            worst = err
    return worst
