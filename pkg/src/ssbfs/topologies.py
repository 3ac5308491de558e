"""Topology generators; the root is node 0 unless stated otherwise."""

from __future__ import annotations

import numpy as np

from .model import Topology, TopologyError, build_topology, load_topology

MAX_CONNECT_RETRIES = 1000


def path(n: int) -> Topology:
    """Path 0-1-...-(n-1) rooted at the endpoint 0."""
    _need(n, 2)
    return build_topology([(i, i + 1) for i in range(n - 1)], 0)


def cycle(n: int) -> Topology:
    _need(n, 3)
    return build_topology([(i, (i + 1) % n) for i in range(n)], 0)


def star(n: int) -> Topology:
    """Star on n nodes rooted at the center 0."""
    _need(n, 2)
    return build_topology([(0, i) for i in range(1, n)], 0)


def complete(n: int) -> Topology:
    _need(n, 2)
    return build_topology([(i, j) for i in range(n) for j in range(i + 1, n)], 0)


def grid(w: int, h: int) -> Topology:
    if w < 1 or h < 1 or w * h < 2:
        raise TopologyError("grid needs at least two nodes")
    edges = []
    for y in range(h):
        for x in range(w):
            u = y * w + x
            if x + 1 < w:
                edges.append((u, u + 1))
            if y + 1 < h:
                edges.append((u, u + w))
    return build_topology(edges, 0)


def random_connected(n: int, p: float, rng: np.random.Generator | int) -> Topology:
    """G(n, p) conditioned on connectivity by rejection, with a retry cap."""
    _need(n, 2)
    if not 0.0 < p <= 1.0:
        raise TopologyError("edge probability must lie in (0, 1]")
    rng = np.random.default_rng(rng)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(MAX_CONNECT_RETRIES):
        keep = rng.random(iu.shape[0]) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        if not edges or len({x for e in edges for x in e}) < n:
            continue
        try:
            return build_topology(edges, 0)
        except TopologyError:
            continue
    raise TopologyError(f"no connected G({n}, {p}) sample after {MAX_CONNECT_RETRIES} tries")


def triangle() -> Topology:
    return build_topology([(0, 1), (1, 2), (2, 0)], 0)


def parse_topology(text: str, seed: int = 0) -> tuple[Topology, str]:
    """Build a topology from a flag such as ``path:5``, ``grid:3x4`` or ``file:net.json``.

    Returns the topology and its kind label.
    """
    kind, _, arg = text.partition(":")
    try:
        if kind == "path":
            return path(int(arg)), kind
        if kind == "cycle":
            return cycle(int(arg)), kind
        if kind == "star":
            return star(int(arg)), kind
        if kind == "complete":
            return complete(int(arg)), kind
        if kind == "grid":
            w, h = arg.lower().split("x")
            return grid(int(w), int(h)), kind
        if kind == "random":
            n, p = arg.split(",")
            return random_connected(int(n), float(p), seed), kind
    except ValueError as e:
        if isinstance(e, TopologyError):
            raise
        raise ValueError(f"bad topology argument {text!r}") from None
    if kind == "file":
        return load_topology(arg), kind
    if kind in ("p2", "p3", "triangle"):
        return named_graph(kind), kind
    raise ValueError(f"unknown topology kind {kind!r}")


def named_graph(name: str) -> Topology:
    """The small graphs used by the exhaustive checks."""
    graphs = {
        "p2": lambda: path(2),
        "p3": lambda: path(3),
        "triangle": triangle,
        "star4": lambda: star(4),
    }
    try:
        return graphs[name]()
    except KeyError:
        raise ValueError(f"unknown graph {name!r}; choose from {sorted(graphs)}") from None


def _need(n: int, least: int) -> None:
    if n < least:
        raise TopologyError(f"need at least {least} nodes, got {n}")
