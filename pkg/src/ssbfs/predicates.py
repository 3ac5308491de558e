"""Guard predicates and the tree/influence predicates used by the convergence analysis.

Every predicate is implemented once as a numba kernel over the raw arrays
``(cfg, ptr, idx, root)``:

* ``cfg``  -- ``(n, 5)`` int32 configuration (columns ``P, TS, C, S, ph``)
* ``ptr``, ``idx`` -- CSR adjacency, neighbors sorted ascending
* ``root`` -- the root identifier

The rule guards, the executor and the attractor checks all call these kernels;
the Python functions at the bottom are thin wrappers for interactive use.
"""

from __future__ import annotations

from enum import Enum

import numpy as np
from numba import njit

from .model import NIL, Configuration, Topology

P, TS, C, S, PH = 0, 1, 2, 3, 4
IDLE, WORKING, POWER, WEAK_E, STRONG_E = 0, 1, 2, 3, 4

# variant flags shared with the rule kernels
LITERAL_STRONG_CONFLICT = 1  # single-witness reading of StrongConflict
MUTANT_RC5_KEEPS_PARENT = 2  # deliberately broken RC5 action, for checker sanity tests

# bits of the per-node analysis vector
F_ILT = 1 << 0
F_PP = 1 << 1
F_INFL = 1 << 2
F_UNREG = 1 << 3
F_INSIDE = 1 << 4
F_UNSAFE = 1 << 5
F_CORRECT = 1 << 6
F_DETACHED = 1 << 7
F_FAULTY = 1 << 8
F_ILLEGAL_LIVE_ROOT = 1 << 9
F_PIC = 1 << 10
F_PIR = 1 << 11


@njit(cache=True, inline="always")
def erroneous(s):
    return s == WEAK_E or s == STRONG_E


@njit(cache=True)
def has_child(cfg, ptr, idx, u):
    for k in range(ptr[u], ptr[u + 1]):
        if cfg[idx[k], P] == u:
            return True
    return False


@njit(cache=True)
def quiet_subtree(cfg, ptr, idx, u):
    for k in range(ptr[u], ptr[u + 1]):
        v = idx[k]
        if cfg[v, P] == u and (cfg[v, S] != IDLE or cfg[v, PH] != cfg[u, PH]):
            return False
    return True


@njit(cache=True)
def strong_conflict(cfg, ptr, idx, u, flags):
    if cfg[u, S] == STRONG_E:
        return False
    if flags & LITERAL_STRONG_CONFLICT:
        # w = v: one Power node in N[u] colored unlike u is enough
        for k in range(ptr[u], ptr[u + 1]):
            v = idx[k]
            if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]:
                return True
        return False
    seen0 = False
    seen1 = False
    if cfg[u, S] == POWER:
        if cfg[u, C] == 0:
            seen0 = True
        else:
            seen1 = True
    for k in range(ptr[u], ptr[u + 1]):
        v = idx[k]
        if cfg[v, S] == POWER:
            if cfg[v, C] == 0:
                seen0 = True
            else:
                seen1 = True
    return seen0 and seen1


@njit(cache=True)
def conflict(cfg, ptr, idx, root, u):
    if u != root:
        if cfg[u, P] == NIL:
            return False
        for k in range(ptr[u], ptr[u + 1]):
            v = idx[k]
            if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]:
                return True
        return False
    if cfg[u, S] == STRONG_E:
        return False
    childless = not has_child(cfg, ptr, idx, u)
    for k in range(ptr[u], ptr[u + 1]):
        v = idx[k]
        if cfg[v, S] == POWER and (cfg[v, C] != cfg[u, C] or childless):
            return True
    return False


@njit(cache=True)
def detached(cfg, ptr, idx, root, u):
    return (
        (cfg[u, P] == NIL or u == root)
        and cfg[u, S] != POWER
        and not has_child(cfg, ptr, idx, u)
    )


@njit(cache=True)
def no_power_neighbor(cfg, ptr, idx, u):
    for k in range(ptr[u], ptr[u + 1]):
        if cfg[idx[k], S] == POWER:
            return False
    return True


@njit(cache=True)
def no_strong_e_neighbor(cfg, ptr, idx, u):
    for k in range(ptr[u], ptr[u + 1]):
        if cfg[idx[k], S] == STRONG_E:
            return False
    return True


@njit(cache=True)
def strong_e_ready(cfg, ptr, idx, u):
    return cfg[u, S] == STRONG_E and no_power_neighbor(cfg, ptr, idx, u)


@njit(cache=True)
def power_faulty(cfg, ptr, idx, u):
    return cfg[u, S] == POWER and not no_strong_e_neighbor(cfg, ptr, idx, u)


@njit(cache=True)
def faulty(cfg, ptr, idx, root, u):
    p = cfg[u, P]
    if u == root or p == NIL or erroneous(cfg[p, S]):
        return False
    s = cfg[u, S]
    sp = cfg[p, S]
    ph_differs = cfg[u, PH] != cfg[p, PH]
    if erroneous(s):
        return True
    if cfg[u, C] != cfg[p, C]:
        return True
    if sp != WORKING and s != IDLE:
        return True
    if sp == s and ph_differs:
        return True
    if s == POWER and ph_differs:
        return True
    if sp == POWER and (ph_differs or has_child(cfg, ptr, idx, u)):
        return True
    return False


@njit(cache=True)
def illegal_root(cfg, ptr, idx, root, u):
    return u != root and cfg[u, P] == NIL and not detached(cfg, ptr, idx, root, u)


@njit(cache=True)
def illegal_live_root(cfg, ptr, idx, root, u):
    return illegal_root(cfg, ptr, idx, root, u) and not erroneous(cfg[u, S])


@njit(cache=True)
def illegal_child(cfg, ptr, idx, root, u):
    p = cfg[u, P]
    return u != root and p != NIL and erroneous(cfg[p, S])


@njit(cache=True)
def isolated(cfg, ptr, idx, u):
    s = cfg[u, S]
    return s == WEAK_E or s == WORKING or strong_e_ready(cfg, ptr, idx, u)


@njit(cache=True)
def ok(cfg, ptr, idx, root, u, flags):
    return not (
        strong_conflict(cfg, ptr, idx, u, flags)
        or conflict(cfg, ptr, idx, root, u)
        or power_faulty(cfg, ptr, idx, u)
        or faulty(cfg, ptr, idx, root, u)
        or illegal_root(cfg, ptr, idx, root, u)
        or illegal_child(cfg, ptr, idx, root, u)
    )


@njit(cache=True)
def end_first_phase(cfg, ptr, idx, u):
    if cfg[u, S] != POWER or not quiet_subtree(cfg, ptr, idx, u):
        return False
    for k in range(ptr[u], ptr[u + 1]):
        if cfg[idx[k], C] != cfg[u, C]:
            return False
    return True


@njit(cache=True)
def end_phase(cfg, ptr, idx, u):
    return cfg[u, S] == WORKING and quiet_subtree(cfg, ptr, idx, u)


@njit(cache=True)
def end_last_phase(cfg, ptr, idx, u):
    return not has_child(cfg, ptr, idx, u) and (
        end_first_phase(cfg, ptr, idx, u) or end_phase(cfg, ptr, idx, u)
    )


@njit(cache=True)
def end_intermediate_phase(cfg, ptr, idx, u):
    return has_child(cfg, ptr, idx, u) and (
        end_first_phase(cfg, ptr, idx, u) or end_phase(cfg, ptr, idx, u)
    )


@njit(cache=True)
def connection_ready(cfg, ptr, idx, root, u):
    """The part of Connection(u, v) that does not depend on v."""
    return detached(cfg, ptr, idx, root, u) and (
        isolated(cfg, ptr, idx, u) or cfg[u, S] == IDLE
    )


@njit(cache=True)
def is_neighbor(ptr, idx, u, v):
    for k in range(ptr[u], ptr[u + 1]):
        if idx[k] == v:
            return True
    return False


@njit(cache=True)
def connection(cfg, ptr, idx, root, u, v):
    return (
        connection_ready(cfg, ptr, idx, root, u)
        and is_neighbor(ptr, idx, u, v)
        and cfg[v, C] != cfg[u, C]
        and cfg[v, S] == POWER
    )


@njit(cache=True)
def connection_candidates(cfg, ptr, idx, root, u):
    """Number of v with Connection(u, v)."""
    if not connection_ready(cfg, ptr, idx, root, u):
        return 0
    count = 0
    for k in range(ptr[u], ptr[u + 1]):
        v = idx[k]
        if cfg[v, S] == POWER and cfg[v, C] != cfg[u, C]:
            count += 1
    return count


@njit(cache=True)
def new_phase(cfg, ptr, idx, u):
    p = cfg[u, P]
    return (
        p != NIL
        and cfg[u, S] == IDLE
        and cfg[u, PH] != cfg[p, PH]
        and quiet_subtree(cfg, ptr, idx, u)
    )


# --- least fixed points over parent chains -----------------------------------


@njit(cache=True)
def _resolve_chains(cfg, base):
    """Resolve per-node values where ``base == -1`` means "same as the parent".

    Chains that loop back on themselves never reach a grounded node and
    resolve to 0.
    """
    n = cfg.shape[0]
    val = np.full(n, -2, dtype=np.int8)
    on_path = np.zeros(n, dtype=np.bool_)
    path = np.empty(n, dtype=np.int64)
    for u in range(n):
        if val[u] != -2:
            continue
        depth = 0
        x = u
        result = 0
        while True:
            if val[x] != -2:
                result = val[x]
                break
            if base[x] != -1:
                result = base[x]
                val[x] = result
                break
            if on_path[x]:
                result = 0
                break
            on_path[x] = True
            path[depth] = x
            depth += 1
            x = cfg[x, P]
        for i in range(depth):
            val[path[i]] = result
            on_path[path[i]] = False
    return val


@njit(cache=True)
def in_legal_tree_vec(cfg, ptr, idx, root):
    n = cfg.shape[0]
    base = np.empty(n, dtype=np.int8)
    for u in range(n):
        if u == root:
            base[u] = 1 if cfg[u, S] != STRONG_E else 0
        elif cfg[u, P] == NIL or faulty(cfg, ptr, idx, root, u):
            base[u] = 0
        else:
            base[u] = -1
    return _resolve_chains(cfg, base)


@njit(cache=True)
def power_parent_vec(cfg, root):
    n = cfg.shape[0]
    base = np.empty(n, dtype=np.int8)
    for u in range(n):
        p = cfg[u, P]
        if u == root or p == NIL or cfg[u, S] != IDLE:
            base[u] = 0
        elif cfg[u, PH] != cfg[p, PH]:
            base[u] = 1 if cfg[p, S] == WORKING else 0
        else:
            base[u] = -1
    return _resolve_chains(cfg, base)


@njit(cache=True)
def analysis_flags(cfg, ptr, idx, root, dist):
    """Per-node bit vector of the convergence-analysis predicates (``F_*`` bits)."""
    n = cfg.shape[0]
    ilt = in_legal_tree_vec(cfg, ptr, idx, root)
    pp = power_parent_vec(cfg, root)
    out = np.zeros(n, dtype=np.int32)
    infl = np.zeros(n, dtype=np.bool_)
    for u in range(n):
        infl[u] = cfg[u, S] == POWER or pp[u] == 1
    rc = cfg[root, C]
    for u in range(n):
        f = 0
        det = detached(cfg, ptr, idx, root, u)
        if ilt[u] == 1:
            f |= F_ILT
        if pp[u] == 1:
            f |= F_PP
        if infl[u]:
            f |= F_INFL
        unreg = not det and ilt[u] != 1
        if unreg:
            f |= F_UNREG
        if det:
            f |= F_DETACHED
        inside = ilt[u] == 1 and cfg[u, S] != POWER and has_child(cfg, ptr, idx, u)
        if inside:
            f |= F_INSIDE
            for k in range(ptr[u], ptr[u + 1]):
                v = idx[k]
                if cfg[v, C] != cfg[u, C] and infl[v]:
                    f |= F_UNSAFE
                    break
        if not unreg and (ilt[u] == 1 or cfg[u, S] == IDLE):
            if u == root:
                f |= F_CORRECT
            else:
                t = cfg[u, TS]
                if t != NIL and dist[t] < dist[u]:
                    f |= F_CORRECT
        if faulty(cfg, ptr, idx, root, u):
            f |= F_FAULTY
        if illegal_live_root(cfg, ptr, idx, root, u):
            f |= F_ILLEGAL_LIVE_ROOT
        if infl[u] and cfg[u, C] != rc:
            f |= F_PIC
        if infl[u] and unreg:
            f |= F_PIR
        out[u] = f
    return out


@njit(cache=True)
def potential_counts(flags):
    """(#PIC, #PIC_PowerParent, #PIR, #PIR_PowerParent) from an analysis vector."""
    pic = picpp = pir = pirpp = 0
    for f in flags:
        if f & F_PIC:
            pic += 1
            if f & F_PP:
                picpp += 1
        if f & F_PIR:
            pir += 1
            if f & F_PP:
                pirpp += 1
    return pic, picpp, pir, pirpp


# --- Python-facing API -------------------------------------------------------


class PredicateName(str, Enum):
    CHILD = "Child"
    STRONG_CONFLICT = "StrongConflict"
    CONFLICT = "Conflict"
    DETACHED = "Detached"
    STRONG_E_READY = "StrongEReady"
    POWER_FAULTY = "PowerFaulty"
    FAULTY = "Faulty"
    ILLEGAL_ROOT = "IllegalRoot"
    ILLEGAL_LIVE_ROOT = "IllegalLiveRoot"
    ILLEGAL_CHILD = "IllegalChild"
    ISOLATED = "Isolated"
    OK = "Ok"
    QUIET_SUB_TREE = "QuietSubTree"
    END_FIRST_PHASE = "EndFirstPhase"
    END_PHASE = "EndPhase"
    END_LAST_PHASE = "EndLastPhase"
    END_INTERMEDIATE_PHASE = "EndIntermediatePhase"
    CONNECTION = "Connection"
    NEW_PHASE = "NewPhase"
    IN_LEGAL_TREE = "inLegalTree"
    UN_REGULAR = "unRegular"
    INSIDE_LEGAL_TREE = "insideLegalTree"
    UN_SAFE = "unSafe"
    POWER_PARENT = "PowerParent"
    INFLUENTIAL = "influential"
    PIC = "PIC"
    PIR = "PIR"
    PIC_POWER_PARENT = "PIC_PowerParent"
    PIR_POWER_PARENT = "PIR_PowerParent"
    CORRECT = "correct"


GUARD_PREDICATES = tuple(PredicateName)[:19]
ANALYSIS_PREDICATES = tuple(PredicateName)[19:]

_ANALYSIS_MASKS = {
    PredicateName.IN_LEGAL_TREE: F_ILT,
    PredicateName.UN_REGULAR: F_UNREG,
    PredicateName.INSIDE_LEGAL_TREE: F_INSIDE,
    PredicateName.UN_SAFE: F_UNSAFE,
    PredicateName.POWER_PARENT: F_PP,
    PredicateName.INFLUENTIAL: F_INFL,
    PredicateName.PIC: F_PIC,
    PredicateName.PIR: F_PIR,
    PredicateName.PIC_POWER_PARENT: F_PIC | F_PP,
    PredicateName.PIR_POWER_PARENT: F_PIR | F_PP,
    PredicateName.CORRECT: F_CORRECT,
}


def _arrays(config: Configuration, topology: Topology):
    if config.n != topology.n:
        raise ValueError(f"configuration has {config.n} nodes, topology has {topology.n}")
    return config.array, topology.adj_ptr, topology.adj_idx, topology.root


def child_set(config: Configuration, u: int, topology: Topology | None = None) -> set[int]:
    """``{v in N(u) | P.v = u}``.  Without a topology every node is scanned."""
    parents = config.array[:, P]
    candidates = range(config.n) if topology is None else topology.neighbors(u)
    return {v for v in candidates if parents[v] == u}


def eval_guard_predicate(
    config: Configuration,
    topology: Topology,
    u: int,
    which: PredicateName | str,
    v: int | None = None,
    *,
    literal_strong_conflict: bool = False,
) -> bool:
    """Evaluate one rule-guard predicate at ``u`` (``v`` only for Connection)."""
    which = PredicateName(which)
    if which not in GUARD_PREDICATES:
        raise ValueError(f"{which.value} is an analysis predicate")
    if (v is not None) != (which is PredicateName.CONNECTION):
        raise ValueError("a second node is required by Connection and accepted by nothing else")
    cfg, ptr, idx, root = _arrays(config, topology)
    flags = LITERAL_STRONG_CONFLICT if literal_strong_conflict else 0
    match which:
        case PredicateName.CHILD:
            return bool(has_child(cfg, ptr, idx, u))
        case PredicateName.STRONG_CONFLICT:
            return bool(strong_conflict(cfg, ptr, idx, u, flags))
        case PredicateName.CONFLICT:
            return bool(conflict(cfg, ptr, idx, root, u))
        case PredicateName.DETACHED:
            return bool(detached(cfg, ptr, idx, root, u))
        case PredicateName.STRONG_E_READY:
            return bool(strong_e_ready(cfg, ptr, idx, u))
        case PredicateName.POWER_FAULTY:
            return bool(power_faulty(cfg, ptr, idx, u))
        case PredicateName.FAULTY:
            return bool(faulty(cfg, ptr, idx, root, u))
        case PredicateName.ILLEGAL_ROOT:
            return bool(illegal_root(cfg, ptr, idx, root, u))
        case PredicateName.ILLEGAL_LIVE_ROOT:
            return bool(illegal_live_root(cfg, ptr, idx, root, u))
        case PredicateName.ILLEGAL_CHILD:
            return bool(illegal_child(cfg, ptr, idx, root, u))
        case PredicateName.ISOLATED:
            return bool(isolated(cfg, ptr, idx, u))
        case PredicateName.OK:
            return bool(ok(cfg, ptr, idx, root, u, flags))
        case PredicateName.QUIET_SUB_TREE:
            return bool(quiet_subtree(cfg, ptr, idx, u))
        case PredicateName.END_FIRST_PHASE:
            return bool(end_first_phase(cfg, ptr, idx, u))
        case PredicateName.END_PHASE:
            return bool(end_phase(cfg, ptr, idx, u))
        case PredicateName.END_LAST_PHASE:
            return bool(end_last_phase(cfg, ptr, idx, u))
        case PredicateName.END_INTERMEDIATE_PHASE:
            return bool(end_intermediate_phase(cfg, ptr, idx, u))
        case PredicateName.CONNECTION:
            return bool(connection(cfg, ptr, idx, root, u, v))
        case PredicateName.NEW_PHASE:
            return bool(new_phase(cfg, ptr, idx, u))
    raise AssertionError(which)


def analysis_vector(config: Configuration, topology: Topology) -> np.ndarray:
    cfg, ptr, idx, root = _arrays(config, topology)
    return analysis_flags(cfg, ptr, idx, root, topology.dist)


def eval_analysis_predicate(
    config: Configuration, topology: Topology, u: int, which: PredicateName | str
) -> bool:
    which = PredicateName(which)
    if which not in _ANALYSIS_MASKS:
        raise ValueError(f"{which.value} is not an analysis predicate")
    mask = _ANALYSIS_MASKS[which]
    return (int(analysis_vector(config, topology)[u]) & mask) == mask


def count_potential(config: Configuration, topology: Topology, which: str) -> int:
    """Size of a potential set; ``r_color_count`` counts processes colored like the root."""
    if which == "r_color_count":
        colors = config.array[:, C]
        return int(np.count_nonzero(colors == colors[topology.root]))
    which = PredicateName(which)
    if which not in (
        PredicateName.PIC,
        PredicateName.PIR,
        PredicateName.PIC_POWER_PARENT,
        PredicateName.PIR_POWER_PARENT,
    ):
        raise ValueError(f"no potential named {which.value}")
    mask = _ANALYSIS_MASKS[which]
    vec = analysis_vector(config, topology)
    return int(np.count_nonzero((vec & mask) == mask))


def predicate_table(config: Configuration, topology: Topology) -> list[dict[str, object]]:
    """Every predicate at every node, for the debug listing."""
    vec = analysis_vector(config, topology)
    rows = []
    for u in range(topology.n):
        row: dict[str, object] = {"node": u}
        for name in GUARD_PREDICATES:
            if name is PredicateName.CONNECTION:
                row[name.value] = sorted(
                    v for v in topology.neighbors(u)
                    if eval_guard_predicate(config, topology, u, name, v)
                )
            else:
                row[name.value] = eval_guard_predicate(config, topology, u, name)
        for name, mask in _ANALYSIS_MASKS.items():
            row[name.value] = (int(vec[u]) & mask) == mask
        rows.append(row)
    return rows
