"""Rooted topologies, process states, configurations and the packed encoding.

Node identifiers are the integers ``0 .. n-1``.  A configuration is stored as an
``(n, 5)`` int32 array whose columns are ``P, TS, C, S, ph``; an absent pointer
is ``-1``.  The same array layout is what the compiled kernels consume.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

NIL = -1

# column layout of a configuration array
P_, TS_, C_, S_, PH_ = range(5)

DEFAULT_ENUMERATION_CAP = 10**7


class Status(IntEnum):
    IDLE = 0
    WORKING = 1
    POWER = 2
    WEAK_E = 3
    STRONG_E = 4

    @property
    def label(self) -> str:
        return _STATUS_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "Status":
        try:
            return _STATUS_BY_LABEL[label]
        except KeyError:
            raise ValueError(f"unknown status {label!r}") from None


_STATUS_LABELS = {
    Status.IDLE: "Idle",
    Status.WORKING: "Working",
    Status.POWER: "Power",
    Status.WEAK_E: "WeakE",
    Status.STRONG_E: "StrongE",
}
_STATUS_BY_LABEL = {v: k for k, v in _STATUS_LABELS.items()}

ROOT_STATUSES = (Status.WORKING, Status.POWER, Status.STRONG_E)


class Phase(IntEnum):
    A = 0
    B = 1

    @property
    def label(self) -> str:
        return "ab"[self]

    @classmethod
    def from_label(cls, label: str) -> "Phase":
        if label not in ("a", "b"):
            raise ValueError(f"unknown phase {label!r}")
        return cls("ab".index(label))


class TopologyError(ValueError):
    """Raised when an edge list does not describe a valid rooted network."""


class ProcessState(NamedTuple):
    parent: int | None
    tree_parent: int | None
    color: int
    status: Status
    phase: Phase

    def __repr__(self) -> str:
        p = "⊥" if self.parent is None else self.parent
        ts = "⊥" if self.tree_parent is None else self.tree_parent
        return f"<P={p} TS={ts} C={self.color} S={self.status.label} ph={self.phase.label}>"


def _state(p=None, ts=None, c=0, s=Status.IDLE, ph=Phase.A) -> ProcessState:
    return ProcessState(p, ts, int(c), Status(s), Phase(ph))


@dataclass(frozen=True, eq=False)
class Topology:
    """Connected undirected rooted graph with precomputed hop distances.

    ``diameter`` is the graph diameter D; ``root_eccentricity`` is max dist(u),
    kept separately because the two differ on e.g. a star rooted at a leaf.
    """

    node_count: int
    root: int
    adjacency: tuple[tuple[int, ...], ...]
    distances: tuple[int, ...]
    diameter: int
    root_eccentricity: int
    adj_ptr: np.ndarray = field(repr=False)
    adj_idx: np.ndarray = field(repr=False)
    dist: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.node_count

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def to_dict(self) -> dict:
        return {"nodes": self.n, "root": self.root, "edges": [list(e) for e in self.edges]}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.root, self.adjacency) == (other.root, other.adjacency)

    def __hash__(self) -> int:
        return hash((self.root, self.adjacency))


def build_topology(edges: Iterable[Sequence[int]], root: int) -> Topology:
    """Validate an edge list and precompute adjacency, distances and diameter."""
    edges = [tuple(e) for e in edges]
    if not edges:
        raise TopologyError("edge list is empty")
    seen: set[tuple[int, int]] = set()
    for e in edges:
        if len(e) != 2:
            raise TopologyError(f"edge {e!r} does not have two endpoints")
        u, v = (int(x) for x in e)
        if u < 0 or v < 0:
            raise TopologyError(f"negative node identifier in edge {e!r}")
        if u == v:
            raise TopologyError(f"self-loop on node {u}")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise TopologyError(f"duplicate edge {key}")
        seen.add(key)
    nodes = {x for e in seen for x in e}
    n = max(nodes) + 1
    missing = sorted(set(range(n)) - nodes)
    if missing:
        raise TopologyError(f"node set is not contiguous; missing {missing}")
    if not 0 <= root < n:
        raise TopologyError(f"root {root} is not a node")

    adjacency = [[] for _ in range(n)]
    for u, v in seen:
        adjacency[u].append(v)
        adjacency[v].append(u)
    adjacency = tuple(tuple(sorted(a)) for a in adjacency)

    rows = [u for u in range(n) for _ in adjacency[u]]
    cols = [v for u in range(n) for v in adjacency[u]]
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    ncomp, _ = connected_components(graph, directed=False)
    if ncomp != 1:
        raise TopologyError(f"graph is disconnected ({ncomp} components)")
    hops = shortest_path(graph, directed=False, unweighted=True)
    dist = hops[root].astype(np.int64)

    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(a) for a in adjacency])
    idx = np.array([v for a in adjacency for v in a], dtype=np.int64)
    return Topology(
        node_count=n,
        root=int(root),
        adjacency=adjacency,
        distances=tuple(int(d) for d in dist),
        diameter=int(hops.max()),
        root_eccentricity=int(dist.max()),
        adj_ptr=ptr,
        adj_idx=idx,
        dist=dist,
    )


class Configuration:
    """Immutable snapshot of every process state.

    Wraps a read-only ``(n, 5)`` int32 array.  Indexing returns a
    :class:`ProcessState`; :meth:`replace` builds a modified copy.
    """

    __slots__ = ("_a",)

    def __init__(self, array: np.ndarray):
        a = np.array(array, dtype=np.int32, copy=True)
        if a.ndim != 2 or a.shape[1] != 5:
            raise ValueError(f"configuration array must have shape (n, 5), got {a.shape}")
        a.setflags(write=False)
        self._a = a

    @classmethod
    def from_states(cls, states: Sequence[ProcessState] | Mapping[int, ProcessState]) -> "Configuration":
        if isinstance(states, Mapping):
            n = len(states)
            if set(states) != set(range(n)):
                raise ValueError("configuration must cover nodes 0..n-1")
            states = [states[u] for u in range(n)]
        a = np.empty((len(states), 5), dtype=np.int32)
        for u, s in enumerate(states):
            a[u] = _encode_row(s)
        return cls(a)

    @property
    def array(self) -> np.ndarray:
        return self._a

    @property
    def n(self) -> int:
        return self._a.shape[0]

    def __len__(self) -> int:
        return self._a.shape[0]

    def __getitem__(self, u: int) -> ProcessState:
        return _decode_row(self._a[u])

    def __iter__(self) -> Iterator[ProcessState]:
        return (self[u] for u in range(self.n))

    def states(self) -> dict[int, ProcessState]:
        return {u: self[u] for u in range(self.n)}

    def replace(self, updates: Mapping[int, ProcessState] | None = None, **_) -> "Configuration":
        a = self._a.copy()
        for u, s in (updates or {}).items():
            a[u] = _encode_row(s)
        return Configuration(a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return np.array_equal(self._a, other._a)

    def __hash__(self) -> int:
        return hash(self._a.tobytes())

    def __repr__(self) -> str:
        inner = ", ".join(f"{u}: {s!r}" for u, s in enumerate(self))
        return f"Configuration({{{inner}}})"

    def validate(self, topology: Topology) -> None:
        """Raise ``ValueError`` unless every local state fits its role in ``topology``."""
        if self.n != topology.n:
            raise ValueError(f"configuration has {self.n} nodes, topology has {topology.n}")
        for u, s in enumerate(self):
            if u == topology.root:
                if s.parent is not None or s.tree_parent is not None:
                    raise ValueError("the root has no P or TS variable")
                if s.status not in ROOT_STATUSES:
                    raise ValueError(f"root status {s.status.label} outside Power/Working/StrongE")
            else:
                nbrs = topology.neighbors(u)
                for name, ptr in (("P", s.parent), ("TS", s.tree_parent)):
                    if ptr is not None and ptr not in nbrs:
                        raise ValueError(f"{name}.{u}={ptr} is not a neighbor of {u}")
            if s.color not in (0, 1):
                raise ValueError(f"color of {u} must be 0 or 1")

    def to_dict(self) -> dict:
        return {
            str(u): {
                "P": s.parent,
                "TS": s.tree_parent,
                "C": s.color,
                "S": s.status.label,
                "ph": s.phase.label,
            }
            for u, s in enumerate(self)
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Configuration":
        states = {}
        for key, rec in data.items():
            states[int(key)] = ProcessState(
                rec["P"],
                rec["TS"],
                int(rec["C"]),
                Status.from_label(rec["S"]),
                Phase.from_label(rec["ph"]),
            )
        return cls.from_states(states)


def _encode_row(s: ProcessState) -> tuple[int, int, int, int, int]:
    return (
        NIL if s.parent is None else int(s.parent),
        NIL if s.tree_parent is None else int(s.tree_parent),
        int(s.color),
        int(s.status),
        int(s.phase),
    )


def _decode_row(row) -> ProcessState:
    p, ts, c, s, ph = (int(x) for x in row)
    return ProcessState(
        None if p == NIL else p,
        None if ts == NIL else ts,
        c,
        Status(s),
        Phase(ph),
    )


# --- state-space enumeration -------------------------------------------------


def local_state_count(topology: Topology, u: int) -> int:
    if u == topology.root:
        return 2 * len(ROOT_STATUSES) * 2
    d = topology.degree(u)
    return (d + 1) * (d + 1) * 2 * 5 * 2


def count_configurations(topology: Topology) -> int:
    return math.prod(local_state_count(topology, u) for u in range(topology.n))


def local_states(topology: Topology, u: int) -> list[ProcessState]:
    """All local states of ``u`` in enumeration order (last field varies fastest)."""
    if u == topology.root:
        return [
            ProcessState(None, None, c, s, ph)
            for c, s, ph in itertools.product((0, 1), ROOT_STATUSES, Phase)
        ]
    ptrs = (None,) + topology.neighbors(u)
    return [
        ProcessState(p, ts, c, s, ph)
        for p, ts, c, s, ph in itertools.product(ptrs, ptrs, (0, 1), Status, Phase)
    ]


def enumerate_configurations(
    topology: Topology, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[Configuration]:
    """Yield every configuration of ``topology``; node 0 is the slowest digit."""
    size = count_configurations(topology)
    if size > cap:
        raise ValueError(f"state space has {size} configurations, above the cap of {cap}")
    per_node = [np.array([_encode_row(s) for s in local_states(topology, u)], dtype=np.int32)
                for u in range(topology.n)]
    for combo in itertools.product(*(range(len(p)) for p in per_node)):
        yield Configuration(np.stack([per_node[u][i] for u, i in enumerate(combo)]))


def random_configuration(topology: Topology, seed: int) -> Configuration:
    """Draw every variable uniformly from its domain."""
    rng = np.random.default_rng(seed)
    return Configuration(random_configuration_array(topology, rng))


def random_configuration_array(topology: Topology, rng: np.random.Generator) -> np.ndarray:
    n = topology.n
    a = np.empty((n, 5), dtype=np.int32)
    for u in range(n):
        if u == topology.root:
            a[u, P_] = a[u, TS_] = NIL
            a[u, S_] = ROOT_STATUSES[rng.integers(len(ROOT_STATUSES))]
        else:
            choices = (NIL,) + topology.neighbors(u)
            a[u, P_] = choices[rng.integers(len(choices))]
            a[u, TS_] = choices[rng.integers(len(choices))]
            a[u, S_] = rng.integers(5)
        a[u, C_] = rng.integers(2)
        a[u, PH_] = rng.integers(2)
    return a


def legitimate_configuration(topology: Topology, color: int = 0, phase: Phase = Phase.A) -> Configuration:
    """A quiet configuration right before a tree construction starts.

    Every process carries the root color, is Idle and detached, and its TS points
    to the smallest-identifier neighbor one hop closer to the root.
    """
    states = []
    dist = topology.distances
    for u in range(topology.n):
        if u == topology.root:
            states.append(ProcessState(None, None, color, Status.WORKING, phase))
        else:
            ts = min(v for v in topology.neighbors(u) if dist[v] == dist[u] - 1)
            states.append(ProcessState(None, ts, color, Status.IDLE, phase))
    return Configuration.from_states(states)


# --- packed encoding ---------------------------------------------------------


def port_width(degree: int) -> int:
    if degree < 1:
        raise ValueError("degree must be positive")
    return math.ceil(math.log2(degree + 1))


def packed_width(degree: int) -> int:
    return 2 * port_width(degree) + 5


@dataclass(frozen=True)
class PackedState:
    bits: int
    width: int

    def __str__(self) -> str:
        return format(self.bits, f"0{self.width}b")


def pack(state: ProcessState, degree: int, neighbors: Sequence[int] | None = None) -> PackedState:
    """Encode a local state as P port | TS port | C | S | ph, most significant first.

    Pointers are translated to their position in ``neighbors`` (defaults to
    ``range(degree)``, i.e. the pointers already are port numbers); ``⊥`` is
    the port value ``degree``.
    """
    ports = list(range(degree)) if neighbors is None else list(neighbors)
    if len(ports) != degree:
        raise ValueError(f"{len(ports)} neighbors given for degree {degree}")
    w = port_width(degree)

    def port(ptr):
        if ptr is None:
            return degree
        try:
            return ports.index(ptr)
        except ValueError:
            raise ValueError(f"pointer {ptr} is not a port below degree {degree}") from None

    bits = port(state.parent)
    bits = (bits << w) | port(state.tree_parent)
    bits = (bits << 1) | (state.color & 1)
    bits = (bits << 3) | int(state.status)
    bits = (bits << 1) | int(state.phase)
    return PackedState(bits, 2 * w + 5)


def unpack(packed: PackedState, degree: int, neighbors: Sequence[int] | None = None) -> ProcessState:
    ports = list(range(degree)) if neighbors is None else list(neighbors)
    w = port_width(degree)
    if packed.width != 2 * w + 5:
        raise ValueError(f"width {packed.width} does not match degree {degree}")
    b = packed.bits
    ph = b & 1
    s = (b >> 1) & 0b111
    c = (b >> 4) & 1
    ts = (b >> 5) & ((1 << w) - 1)
    p = (b >> (5 + w)) & ((1 << w) - 1)
    if s > Status.STRONG_E:
        raise ValueError(f"status code {s} out of range")

    def ptr(port_value):
        if port_value == degree:
            return None
        if port_value > degree:
            raise ValueError(f"port {port_value} out of range for degree {degree}")
        return ports[port_value]

    return ProcessState(ptr(p), ptr(ts), c, Status(s), Phase(ph))


# --- files -------------------------------------------------------------------


def load_topology(path: str | Path) -> Topology:
    data = _load_json(path)
    try:
        topo = build_topology(data["edges"], data["root"])
    except KeyError as e:
        raise ValueError(f"{path}: missing field {e}") from None
    if "nodes" in data and int(data["nodes"]) != topo.n:
        raise ValueError(f"{path}: declares {data['nodes']} nodes but edges span {topo.n}")
    return topo


def save_topology(topology: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology.to_dict(), indent=1) + "\n")


def load_configuration(path: str | Path, topology: Topology | None = None) -> Configuration:
    data = _load_json(path)
    try:
        config = Configuration.from_dict(data)
    except (KeyError, TypeError) as e:
        raise ValueError(f"{path}: malformed configuration record ({e})") from None
    if topology is not None:
        config.validate(topology)
    return config


def save_configuration(config: Configuration, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1) + "\n")


def _load_json(path: str | Path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
