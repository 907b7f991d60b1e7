"""JSON model descriptions and edge-list graph files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Graph, Graphon, SbmSpec, SubmodelK


def model_to_dict(model) -> dict:
    if isinstance(model, SubmodelK):
        return {"type": "submodel", "a": model.a.tolist(), "B": model.B.tolist(),
                "theta": model.theta, "base": model.base}
    if isinstance(model, SbmSpec):
        return {"type": "sbm", "pi": model.pi.tolist(), "M": model.M.tolist(),
                "alpha": model.alpha}
    if isinstance(model, Graphon):
        if model.variant == "block":
            return {"type": "graphon", "variant": "block", "pi": model.pi.tolist(),
                    "M": model.M.tolist()}
        return {"type": "graphon", "variant": "polynomial", "coef": model.coef.tolist(),
                "bound": model.bound}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    """Inverse of :func:`model_to_dict`, plus the shortcuts
    ``{"type": "two_class", "theta": t}``, ``{"type": "staircase5"}`` and
    ``{"type": "w_theta", "theta": t}``."""
    kind = d.get("type")
    if kind == "submodel":
        return SubmodelK(d["a"], d["B"], d.get("theta", 0.0), d.get("base", 0.5))
    if kind == "staircase5":
        return SubmodelK.staircase5(d.get("theta", 0.0))
    if kind == "sbm":
        return SbmSpec(d["pi"], d["M"], d.get("alpha", 1.0))
    if kind == "two_class":
        return SbmSpec.two_class(d.get("theta", 0.0), d.get("alpha", 1.0))
    if kind == "w_theta":
        return Graphon.w_theta(d["theta"])
    if kind == "graphon":
        if d.get("variant") == "block":
            return Graphon.block(d["pi"], d["M"])
        if d.get("variant") == "polynomial":
            return Graphon.polynomial(d["coef"], d.get("bound"))
    raise ValueError(f"unknown model description: {d!r}")


def load_model(path) -> object:
    return model_from_dict(json.loads(Path(path).read_text()))


def write_edge_list(g: Graph, path) -> None:
    """One ``i j`` line per edge (``i < j``), after a ``# n=<n>`` header."""
    lines = [f"# n={g.n}"] + [f"{i} {j}" for i, j in g.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path, n: int | None = None) -> Graph:
    """Read an edge list.  Vertex count from ``n``, else the header, else max index + 1."""
    edges = []
    header_n = None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n="):
                header_n = int(body[2:])
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"bad edge line: {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = header_n
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph.from_edges(n, np.asarray(edges, dtype=int).reshape(-1, 2))
