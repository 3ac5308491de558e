"""Compiled membership tests for the nested attractor sets.

Kept apart from :mod:`ssbfs.analysis` because the executor needs them for its
stop conditions while the analysis layer needs the executor.
"""

from __future__ import annotations

from numba import njit

from .predicates import (
    C,
    F_CORRECT,
    F_FAULTY,
    F_ILLEGAL_LIVE_ROOT,
    F_ILT,
    F_INFL,
    F_UNSAFE,
    IDLE,
    POWER,
    S,
    STRONG_E,
    WEAK_E,
    WORKING,
    analysis_flags,
    has_child,
)

L_A1 = 1
L_A2 = 2
L_A3 = 4
L_A4 = 8
L_AL = 16


@njit(cache=True)
def base_levels(cfg, flags):
    """A1..A4 membership bits (nested, so evaluation stops at the first failure)."""
    n = cfg.shape[0]
    for u in range(n):
        if flags[u] & (F_FAULTY | F_ILLEGAL_LIVE_ROOT):
            return 0
    lv = L_A1
    for u in range(n):
        if flags[u] & F_UNSAFE:
            return lv
    lv |= L_A2
    for u in range(n):
        if flags[u] & F_INFL and not flags[u] & F_ILT:
            return lv
    lv |= L_A3
    for u in range(n):
        if cfg[u, S] == STRONG_E:
            return lv
    return lv | L_A4


@njit(cache=True)
def in_a5(cfg, flags, dist, root, l):
    """A5(l) without the A4 part."""
    rc = cfg[root, C]
    for u in range(cfg.shape[0]):
        if dist[u] <= l and cfg[u, C] != rc:
            return False
        if dist[u] <= l - 1 and not flags[u] & F_CORRECT:
            return False
    return True


@njit(cache=True)
def _all_neighbors_root_colored(cfg, ptr, idx, u, rc):
    for k in range(ptr[u], ptr[u + 1]):
        if cfg[idx[k], C] != rc:
            return False
    return True


@njit(cache=True)
def in_a4kl(cfg, ptr, idx, flags, dist, root, k, l):
    """A4(k,l) for 1 <= k <= l, without the A4 part."""
    rc = cfg[root, C]
    for u in range(cfg.shape[0]):
        d = dist[u]
        f = flags[u]
        same = cfg[u, C] == rc
        if d < l and not f & F_CORRECT:
            return False
        if d <= k - 1 and not same:
            return False
        if k < d <= l and same:
            return False
        if d == k - 1:
            if not _all_neighbors_root_colored(cfg, ptr, idx, u, rc):
                if not f & F_INFL:
                    return False
                if has_child(cfg, ptr, idx, u) and cfg[u, S] != POWER:
                    return False
        if d == k and same:
            if not (
                f & F_ILT
                and not f & F_INFL
                and cfg[u, S] == IDLE
                and not has_child(cfg, ptr, idx, u)
                and f & F_CORRECT
            ):
                return False
        if k <= d:
            s = cfg[u, S]
            if not (s == IDLE or s == WORKING or s == WEAK_E):
                return False
    return True


@njit(cache=True)
def in_a4_next(cfg, ptr, idx, flags, dist, root, l):
    """A4(l+1,l) without the A4 part."""
    rc = cfg[root, C]
    for u in range(cfg.shape[0]):
        d = dist[u]
        if d <= l and (cfg[u, C] != rc or not flags[u] & F_CORRECT):
            return False
        if d == l and not _all_neighbors_root_colored(cfg, ptr, idx, u, rc):
            if not flags[u] & F_INFL:
                return False
            if has_child(cfg, ptr, idx, u) and cfg[u, S] != POWER:
                return False
    return True


@njit(cache=True)
def in_al(cfg, ptr, idx, flags, dist, root, diam):
    top = diam + 1
    if in_a5(cfg, flags, dist, root, top):
        return True
    for k in range(1, top + 1):
        if in_a4kl(cfg, ptr, idx, flags, dist, root, k, top):
            return True
    return in_a4_next(cfg, ptr, idx, flags, dist, root, top)


@njit(cache=True)
def config_levels(cfg, ptr, idx, root, dist, diam):
    """Attractor bitmask (``L_*``) and the per-node analysis vector."""
    flags = analysis_flags(cfg, ptr, idx, root, dist)
    lv = base_levels(cfg, flags)
    if lv & L_A4 and in_al(cfg, ptr, idx, flags, dist, root, diam):
        lv |= L_AL
    return lv, flags


@njit(cache=True)
def bfs_ok(cfg, dist, root):
    for u in range(cfg.shape[0]):
        if u == root:
            continue
        t = cfg[u, 1]
        if t < 0 or dist[t] != dist[u] - 1:
            return False
    return True


def level_names(mask: int) -> list[str]:
    return [name for bit, name in ((L_A1, "A1"), (L_A2, "A2"), (L_A3, "A3"), (L_A4, "A4"), (L_AL, "Al")) if mask & bit]


LEVEL_BITS = {"A1": L_A1, "A2": L_A2, "A3": L_A3, "A4": L_A4, "Al": L_AL}


STAGE_NONE, STAGE_FORWARDING, STAGE_EXPANSION, STAGE_BACKWARDING = range(4)


@njit(cache=True)
def stage_code(cfg, flags, lv):
    if not lv & L_A4:
        return STAGE_NONE
    any_infl = False
    for u in range(cfg.shape[0]):
        if flags[u] & F_INFL:
            any_infl = True
            if cfg[u, S] != POWER:
                return STAGE_FORWARDING
    return STAGE_EXPANSION if any_infl else STAGE_BACKWARDING
