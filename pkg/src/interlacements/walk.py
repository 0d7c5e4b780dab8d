"""Simple-random-walk engine on Z^d with seeded, reproducible randomness.

Walks step uniformly over the 2d nearest-neighbor directions, drawing one
stream value per step, so a (master_seed, stream_index) pair pins the whole
realization bit-for-bit.  Transience (d >= 3) makes "run until the walk has
escaped" meaningful: we truncate at an l-infinity ball and certify the
truncation with `escape_error_bound`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Point, SiteSet, closure, norm_inf
from .rng import RngStream, raw64_array, to_unit
from .green import gmax_bound

EXITED_TRUNCATION_BALL = "exited_truncation_ball"
REACHED_STEP_CAP = "reached_step_cap"
# used by the interlacement sampler, whose trajectories end in a certified
# never-return decision rather than at a truncation sphere
ESCAPED_CERTIFIED = "escaped_certified"

DEFAULT_STEP_CAP = 10_000_000


def direction_table(dim: int) -> np.ndarray:
    """(2d, d) displacement table; direction k moves axis k//2 by +-1."""
    table = np.zeros((2 * dim, dim), dtype=np.int64)
    for k in range(dim):
        table[2 * k, k] = 1
        table[2 * k + 1, k] = -1
    return table


@dataclass
class WalkSegment:
    """A finite nearest-neighbor path with the reason it stopped."""

    steps: list[Point]
    terminated_reason: str

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a walk segment must contain at least one point")

    def __len__(self) -> int:
        return len(self.steps)

    def range_set(self) -> SiteSet:
        return SiteSet(self.steps)


def run_until_escape(
    start: Point,
    K: SiteSet,
    truncation_radius: int,
    step_cap: int = DEFAULT_STEP_CAP,
    rng: RngStream | None = None,
) -> WalkSegment:
    """Walk from `start` until it leaves B(0, truncation_radius) or hits the cap.

    The truncation ball must strictly contain the closure of K and the
    starting point.  The returned segment records every visited site,
    including the final point outside the ball.
    """
    if rng is None:
        raise ValueError("run_until_escape requires an RngStream")
    if step_cap <= 0:
        raise ValueError("step_cap must be positive")
    if K:
        if closure(K).circumradius() >= truncation_radius:
            raise ValueError("truncation ball must strictly contain the closure of K")
    if norm_inf(start) > truncation_radius:
        raise ValueError("start lies outside the truncation ball")

    dim = len(start)
    dirs = direction_table(dim)
    pos = np.asarray(start, dtype=np.int64)
    steps = [tuple(int(c) for c in pos)]
    for _ in range(step_cap):
        pos = pos + dirs[rng.next_below(2 * dim)]
        steps.append(tuple(int(c) for c in pos))
        if np.max(np.abs(pos)) > truncation_radius:
            return WalkSegment(steps, EXITED_TRUNCATION_BALL)
    return WalkSegment(steps, REACHED_STEP_CAP)


def entrance_departure_points(w: WalkSegment, K: SiteSet) -> tuple[SiteSet, SiteSet]:
    """Entrance and departure points of the segment in K.

    An entrance is a site of K reached from outside K; a departure is a
    site of K whose successor lies outside K.  A segment that starts in K
    contributes no entrance at index 0 (and symmetrically at the end).
    """
    entries, exits = [], []
    pts = w.steps
    for i, p in enumerate(pts):
        if p in K:
            if i > 0 and pts[i - 1] not in K:
                entries.append(p)
            if i + 1 < len(pts) and pts[i + 1] not in K:
                exits.append(p)
    return SiteSet(entries), SiteSet(exits)


def excursion_spans(w: WalkSegment, K: SiteSet) -> list[tuple[int, int]]:
    """Maximal index spans [i, j] of the segment with all points in K."""
    spans = []
    start = None
    for i, p in enumerate(w.steps):
        if p in K:
            if start is None:
                start = i
        else:
            if start is not None:
                spans.append((start, i - 1))
                start = None
    if start is not None:
        spans.append((start, len(w.steps) - 1))
    return spans


def escape_error_bound(K: SiteSet, truncation_radius: int) -> float:
    """Upper bound on P_y[walk ever hits K], uniform over |y|_inf >= radius.

    Computed as cap(K) * g_max(distance) with g_max the Green-function
    envelope; monotone decreasing in the radius.
    """
    if not K:
        return 0.0
    r_k = K.circumradius()
    if truncation_radius < max(2 * r_k, r_k + 2):
        raise ValueError("truncation radius too small relative to K")
    from .potential import capacity  # local import: potential also uses this module

    cap = capacity(K, method="green_quadrature").value
    return cap * gmax_bound(truncation_radius - r_k, K.dim)


def batch_hit_before_exit(
    starts: np.ndarray,
    target: SiteSet,
    truncation_radius: int,
    rng: RngStream,
    step_cap: int = DEFAULT_STEP_CAP,
    count_start: bool = True,
) -> np.ndarray:
    """Vectorized walks: does each walker hit `target` before leaving the ball?

    Walker i consumes stream `rng.substream(i)`; results are therefore
    independent of the batch split.  With count_start=False a walker sitting
    in the target at time zero does not count until it returns at a positive
    time.  Returns a boolean array.
    """
    starts = np.asarray(starts, dtype=np.int64)
    n, dim = starts.shape
    dirs = direction_table(dim)
    r_t = target.circumradius() if target else 0
    tgt_grid = np.zeros((2 * r_t + 1,) * dim, dtype=bool)
    for p in target:
        tgt_grid[tuple(c + r_t for c in p)] = True

    keys = np.array([rng.substream(i).key for i in range(n)], dtype=np.uint64)
    counters = np.zeros(n, dtype=np.uint64)
    pos = starts.copy()
    alive = np.ones(n, dtype=bool)
    hit = np.zeros(n, dtype=bool)

    if count_start:
        inside = np.max(np.abs(pos), axis=1) <= r_t
        if inside.any():
            flat = _flat_in_ball(pos[inside], r_t)
            hit[inside] = tgt_grid.ravel()[flat]
            alive[inside & hit] = False

    for _ in range(step_cap):
        if not alive.any():
            break
        idx = np.nonzero(alive)[0]
        vals = raw64_array(keys[idx], counters[idx])
        counters[idx] += np.uint64(1)
        pos[idx] += dirs[(vals % np.uint64(2 * dim)).astype(np.int64)]
        sup = np.max(np.abs(pos[idx]), axis=1)
        inside = sup <= r_t
        if inside.any():
            sub = idx[inside]
            flat = _flat_in_ball(pos[sub], r_t)
            newly = tgt_grid.ravel()[flat]
            hit[sub] |= newly
            alive[sub[newly]] = False
        escaped = sup > truncation_radius
        alive[idx[escaped]] = False
    return hit


def _flat_in_ball(pts: np.ndarray, radius: int) -> np.ndarray:
    side = 2 * radius + 1
    offs = pts + radius
    flat = np.zeros(len(pts), dtype=np.int64)
    for k in range(pts.shape[1]):
        flat = flat * side + offs[:, k]
    return flat
