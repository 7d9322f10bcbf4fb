"""On-disk formats: dataset CSV, truth JSON, graph CSV, result/metrics JSON.

A dataset at ``path.csv`` is three files: the sample matrix itself (header
x1..xd, 17 significant digits so doubles round-trip), ``<stem>.truth.json``
holding {"d", "edges", "macros"} with 0-based ids (macro ids follow the micro
block), and ``<stem>.meta.json`` carrying provenance and the version string.
A truth-less dataset simply has no truth file.  Estimated graphs are 0/1
adjacency CSVs with a JSON sidecar for origin/macro supports and the run
config.
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError
from .graphs import CausalGraph, GroundTruthGraph, Macro
from .sem import Dataset

_FLOAT_FMT = "%.17g"


def version_string():
    """git-describe of the working tree when available, else the package tag."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=2.0,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"mgcsl-{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"mgcsl-{__version__}"


def _truth_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.stem + ".truth.json")


def _meta_path(csv_path):
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def graph_to_dict(g):
    return {
        "d": int(g.d),
        "edges": [[int(i), int(j)] for i, j in g.edges()],
        "macros": [{"id": int(m.id), "members": [int(x) for x in m.members]}
                   for m in g.macros],
    }


def _graph_from_dict(obj, cls=GroundTruthGraph, origin=None):
    try:
        d = int(obj["d"])
        macros = tuple(Macro(id=m["id"], members=tuple(m["members"]))
                       for m in obj.get("macros", []))
        total = d + len(macros)
        adj = np.zeros((total, total), dtype=bool)
        for i, j in obj["edges"]:
            adj[int(i), int(j)] = True
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed graph JSON: {exc}") from exc
    if cls is CausalGraph:
        return CausalGraph(d=d, adj=adj, macros=macros, origin=origin or "micro")
    return GroundTruthGraph(d=d, adj=adj, macros=macros)


def write_truth(g, path):
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1) + "\n")


def read_truth(path):
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"truth JSON: {exc}", line=exc.lineno, col=exc.colno) from exc
    return _graph_from_dict(obj)


def write_dataset(ds, path, extra_meta=None):
    """Dataset -> CSV (+ truth and meta sidecars); lossless for X and truth."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = ds.d
    header = ",".join(f"x{j + 1}" for j in range(d))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in ds.X:
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")
    if ds.truth is not None:
        write_truth(ds.truth, _truth_path(path))
    meta = {"version": version_string(), "provenance": ds.provenance}
    if extra_meta:
        meta.update(extra_meta)
    _meta_path(path).write_text(json.dumps(meta, indent=1) + "\n")
    return path


def read_dataset(path):
    """Inverse of write_dataset; ParseError (with line/col) on malformed CSV."""
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty dataset CSV", line=1, col=1)
    header = lines[0].split(",")
    d = len(header)
    expected = [f"x{j + 1}" for j in range(d)]
    if header != expected:
        raise ParseError(f"bad header {lines[0]!r}, expected x1..x{d}", line=1, col=1)
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != d:
            raise ParseError(f"row has {len(parts)} fields, expected {d}", line=ln, col=1)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            bad = next(k for k, p in enumerate(parts) if not _is_float(p))
            raise ParseError(f"bad float {parts[bad]!r}", line=ln, col=bad + 1) from None
    x = np.asarray(rows, dtype=float)
    if x.size == 0:
        raise ParseError("dataset CSV has a header but no rows", line=2, col=1)
    truth = None
    tp = _truth_path(path)
    if tp.exists():
        truth = read_truth(tp)
    prov = {}
    mp = _meta_path(path)
    if mp.exists():
        try:
            prov = json.loads(mp.read_text()).get("provenance", {})
        except json.JSONDecodeError as exc:
            raise ParseError(f"meta JSON: {exc}", line=exc.lineno, col=exc.colno) from exc
    return Dataset(X=x, truth=truth, provenance=prov)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _graph_sidecar(csv_path):
    p = Path(csv_path)
    return p.with_suffix(".json")


def write_graph(g, path, config=None):
    """Binary adjacency CSV plus JSON sidecar (origin, macros, config)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in np.asarray(g.adj, dtype=int):
            fh.write(",".join(str(v) for v in row) + "\n")
    side = {
        "version": version_string(),
        "d": int(g.d),
        "origin": getattr(g, "origin", "micro"),
        "macros": [{"id": int(m.id), "members": [int(x) for x in m.members]}
                   for m in g.macros],
    }
    if config is not None:
        side["config"] = config
    _graph_sidecar(path).write_text(json.dumps(side, indent=1) + "\n")
    return path


def read_graph(path):
    path = Path(path)
    rows = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if any(p not in ("0", "1") for p in parts):
                bad = next(k for k, p in enumerate(parts) if p not in ("0", "1"))
                raise ParseError(f"adjacency entries must be 0/1, got {parts[bad]!r}",
                                 line=ln, col=bad + 1)
            rows.append([int(p) for p in parts])
    adj = np.asarray(rows, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ParseError(f"adjacency CSV is not square: {adj.shape}")
    side_path = _graph_sidecar(path)
    if side_path.exists():
        try:
            side = json.loads(side_path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"graph sidecar: {exc}", line=exc.lineno, col=exc.colno) from exc
        macros = tuple(Macro(id=m["id"], members=tuple(m["members"]))
                       for m in side.get("macros", []))
        d = int(side.get("d", adj.shape[0] - len(macros)))
        origin = side.get("origin", "micro")
    else:
        macros, d, origin = (), adj.shape[0], "micro"
    return CausalGraph(d=d, adj=adj, macros=macros, origin=origin)


def write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}", line=exc.lineno, col=exc.colno) from exc
