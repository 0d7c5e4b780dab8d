"""Numba-compiled inner loops: scatter-min recording, grid union-find,
vacant-set flood fill, and articulation-point analysis.

All kernels are deterministic integer algorithms; they exist only because
their pure-Python equivalents are too slow at 10^5-sample scale.  The
grid layout everywhere is C order over a cubical window of side `side`
in `dim` dimensions.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def scatter_min(buffer: np.ndarray, flat_idx: np.ndarray, values: np.ndarray) -> None:
    for i in range(len(flat_idx)):
        j = flat_idx[i]
        if values[i] < buffer[j]:
            buffer[j] = values[i]


@njit(cache=True)
def _uf_find(parent: np.ndarray, i: int) -> int:
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def label_grid(vacant_flat: np.ndarray, side: int, dim: int) -> np.ndarray:
    """Union-find component labels of the vacant sites of a cubical grid.

    Sites are flat C-order indices; adjacency is nearest-neighbor along
    each axis.  Returns per-site canonical root (the smallest flat index
    of the component, which is its lexicographically smallest member);
    occupied sites get -1.
    """
    n = side ** dim
    parent = np.empty(n, dtype=np.int64)
    for i in range(n):
        parent[i] = i
    # strides for C order
    strides = np.empty(dim, dtype=np.int64)
    strides[dim - 1] = 1
    for k in range(dim - 2, -1, -1):
        strides[k] = strides[k + 1] * side
    for i in range(n):
        if not vacant_flat[i]:
            continue
        rem = i
        for k in range(dim):
            coord = rem // strides[k]
            rem = rem % strides[k]
            if coord + 1 < side:
                j = i + strides[k]
                if vacant_flat[j]:
                    ri = _uf_find(parent, i)
                    rj = _uf_find(parent, j)
                    if ri != rj:
                        # union by smallest canonical root
                        if ri < rj:
                            parent[rj] = ri
                        else:
                            parent[ri] = rj
    labels = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if vacant_flat[i]:
            labels[i] = _uf_find(parent, i)
    return labels


@njit(cache=True)
def flood_reaches_boundary(vacant_flat: np.ndarray, side: int, dim: int,
                           start: int) -> bool:
    """BFS from `start` through vacant sites; True iff it reaches a site on
    the window's inner boundary (any coordinate at 0 or side-1)."""
    if not vacant_flat[start]:
        return False
    n = side ** dim
    strides = np.empty(dim, dtype=np.int64)
    strides[dim - 1] = 1
    for k in range(dim - 2, -1, -1):
        strides[k] = strides[k + 1] * side
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    queue[tail] = start
    tail += 1
    seen[start] = True
    while head < tail:
        i = queue[head]
        head += 1
        rem = i
        on_boundary = False
        for k in range(dim):
            coord = rem // strides[k]
            rem = rem % strides[k]
            if coord == 0 or coord == side - 1:
                on_boundary = True
            if coord > 0:
                j = i - strides[k]
                if vacant_flat[j] and not seen[j]:
                    seen[j] = True
                    queue[tail] = j
                    tail += 1
            if coord + 1 < side:
                j = i + strides[k]
                if vacant_flat[j] and not seen[j]:
                    seen[j] = True
                    queue[tail] = j
                    tail += 1
        if on_boundary:
            return True
    return False


@njit(cache=True)
def component_stats(labels: np.ndarray, side: int, dim: int):
    """Per-component size, per-axis extents and boundary contact.

    Returns (roots, sizes, diameters, touches) with components ordered by
    canonical root.
    """
    n = side ** dim
    strides = np.empty(dim, dtype=np.int64)
    strides[dim - 1] = 1
    for k in range(dim - 2, -1, -1):
        strides[k] = strides[k + 1] * side

    # map roots to dense ids
    order = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(n):
        if labels[i] == i:
            order[i] = count
            count += 1
    sizes = np.zeros(count, dtype=np.int64)
    touches = np.zeros(count, dtype=np.bool_)
    mins = np.full((count, dim), side, dtype=np.int64)
    maxs = np.full((count, dim), -1, dtype=np.int64)
    for i in range(n):
        root = labels[i]
        if root < 0:
            continue
        cid = order[root]
        sizes[cid] += 1
        rem = i
        for k in range(dim):
            coord = rem // strides[k]
            rem = rem % strides[k]
            if coord < mins[cid, k]:
                mins[cid, k] = coord
            if coord > maxs[cid, k]:
                maxs[cid, k] = coord
            if coord == 0 or coord == side - 1:
                touches[cid] = True
    roots = np.empty(count, dtype=np.int64)
    for i in range(n):
        if labels[i] == i:
            roots[order[i]] = i
    diameters = np.zeros(count, dtype=np.int64)
    for c in range(count):
        best = 0
        for k in range(dim):
            ext = maxs[c, k] - mins[c, k]
            if ext > best:
                best = ext
        diameters[c] = best
    return roots, sizes, diameters, touches


@njit(cache=True)
def widest_level_to_boundary(minmark_flat: np.ndarray, side: int, dim: int,
                             start: int, levels: np.ndarray) -> np.ndarray:
    """For each level u in `levels` (ascending), is the start site connected
    to the inner boundary through sites with minmark > u?

    A site is vacant at level u iff its occupation level (minmark of the
    covering trajectories) exceeds u.  Exploits monotonicity: runs one BFS
    per level on the shrinking vacant set.
    """
    out = np.zeros(len(levels), dtype=np.bool_)
    for li in range(len(levels) - 1, -1, -1):
        # descending levels: if crossing holds at a level it holds below;
        # still run each level independently for simplicity and determinism
        u = levels[li]
        if minmark_flat[start] <= u:
            continue
        n = side ** dim
        strides = np.empty(dim, dtype=np.int64)
        strides[dim - 1] = 1
        for k in range(dim - 2, -1, -1):
            strides[k] = strides[k + 1] * side
        seen = np.zeros(n, dtype=np.bool_)
        queue = np.empty(n, dtype=np.int64)
        head = 0
        tail = 0
        queue[tail] = start
        tail += 1
        seen[start] = True
        reached = False
        while head < tail and not reached:
            i = queue[head]
            head += 1
            rem = i
            for k in range(dim):
                coord = rem // strides[k]
                rem = rem % strides[k]
                if coord == 0 or coord == side - 1:
                    reached = True
                if coord > 0:
                    j = i - strides[k]
                    if minmark_flat[j] > u and not seen[j]:
                        seen[j] = True
                        queue[tail] = j
                        tail += 1
                if coord + 1 < side:
                    j = i + strides[k]
                    if minmark_flat[j] > u and not seen[j]:
                        seen[j] = True
                        queue[tail] = j
                        tail += 1
        out[li] = reached
    return out
