"""Window sampler for the Poisson cloud of marked random-walk trajectories.

One realization restricted to a finite box W is generated as follows
(docs/sampler.md derives why this reproduces the restricted law exactly):

* the number of trajectories meeting W at levels up to u_max is
  Poisson(u_max * cap(W));
* each trajectory carries an independent level mark uniform on
  (0, u_max], giving the exact coupling of all levels below u_max;
* each trajectory enters W at a site drawn from the normalized
  equilibrium measure of W and from there evolves as a plain simple
  random walk (the doubly-infinite past is conditioned never to revisit
  W, so it contributes only the entry site);
* whenever the walk steps out of W to a point y, the remainder of its
  life either never touches W again — probability 1 - h(y), where
  h(y) = P_y[hit W] is computed from the free-space Green function — or
  re-enters W along a path sampled step-by-step from the walk
  conditioned to return (transition weights proportional to h).

Escapes are therefore decided exactly instead of by running the walk to
a distant truncation sphere; there is no far-field truncation error, only
the ~1e-10 numerical accuracy of the Green function machinery.  A literal
truncation engine is retained for cross-validation (`engine="truncation"`).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import _kernels
from .green import asymptotic_constant, green_table
from .lattice import LatticeBox, Point, SiteSet
from .potential import CapacityReport, capacity, equilibrium_fft
from .rng import (RngStream, poisson_batch, raw64_array, stream_key_pairs,
                  to_unit)
from .walk import (DEFAULT_STEP_CAP, ESCAPED_CERTIFIED, REACHED_STEP_CAP,
                   WalkSegment, direction_table, run_until_escape)

_WALKING = 0
_RETURNING = 1
_DONE = 2

_SNAPSHOT_VERSION = 1


@dataclass
class OccupancyField:
    """Boolean occupation grid over a window (True = covered at this level)."""

    window: LatticeBox
    occupied: np.ndarray
    level: float = float("nan")

    def __post_init__(self):
        shape = (self.window.side,) * self.window.dim
        if self.occupied.shape != shape:
            raise ValueError("occupancy grid does not match the window shape")

    def occupied_at(self, p: Point) -> bool:
        if p not in self.window:
            raise KeyError(f"{p} outside window")
        off = tuple(a - c + self.window.radius for a, c in zip(p, self.window.center))
        return bool(self.occupied[off])

    def vacant_count(self) -> int:
        return int(np.size(self.occupied) - np.count_nonzero(self.occupied))

    def copy_with(self, occupied: np.ndarray) -> "OccupancyField":
        return OccupancyField(self.window, occupied, self.level)


@dataclass
class MarkedTrajectory:
    trace_in_window: SiteSet
    segment: WalkSegment
    level_mark: float


@dataclass
class InterlacementSample:
    window: LatticeBox
    u_max: float
    trajectories: list[MarkedTrajectory]
    capacity_used: CapacityReport
    seed: dict
    diagnostics: dict = field(default_factory=dict)


class WindowContext:
    """Per-window precomputation: equilibrium measure, capacity, and the
    hitting-probability field h used for exact escape decisions.

    All arrays live in window-centered coordinates.
    """

    def __init__(self, window: LatticeBox, h_radius: int | None = None):
        self.window = window
        self.dim = window.dim
        self.r_w = window.radius
        self.h_radius = h_radius or max(24, 2 * self.r_w + 16)
        if self.h_radius <= self.r_w + 1:
            raise ValueError("h table must extend beyond the window")

        dim, r_w = self.dim, self.r_w
        centered = LatticeBox((0,) * dim, r_w)
        sites = centered.sites()
        if len(sites) <= 4500:
            report_c = capacity(sites, method="green_quadrature")
            e_grid = np.zeros((centered.side,) * dim)
            for p, w in report_c.equilibrium.items():
                e_grid[tuple(c + r_w for c in p)] = w
        else:
            e_grid, _, _, _ = equilibrium_fft(sites)
            report_c = None
        self.e_grid = e_grid
        self.cap = float(e_grid.sum())

        # capacity report in absolute coordinates, for the sample record
        eq_abs = {}
        it = np.nditer(e_grid, flags=["multi_index"])
        for v in it:
            if v > 0:
                p = tuple(int(o) - r_w + c for o, c in zip(it.multi_index, window.center))
                eq_abs[p] = float(v)
        self.capacity_report = CapacityReport(
            value=self.cap,
            equilibrium=eq_abs,
            method="green_quadrature",
            error_bound=(report_c.error_bound if report_c else 1e-7 * (1 + self.cap)),
            solve_radius=0,
        )

        # equilibrium cdf over positive-weight sites (lexicographic order)
        flat = e_grid.ravel()
        pos = np.nonzero(flat > 0)[0]
        self.eq_flat_sites = pos
        self.eq_cdf = np.cumsum(flat[pos]) / flat[pos].sum()
        side = centered.side
        offs = np.stack(np.unravel_index(pos, (side,) * dim), axis=1).astype(np.int64)
        self.eq_points = offs - r_w  # centered coordinates

        # h field: convolution of the Green kernel with the equilibrium measure
        A = r_w + self.h_radius
        table = green_table(dim, A)
        kernel = table.grid()
        fft_len = [scipy.fft.next_fast_len(side + kernel.shape[0] - 1)] * dim
        kern_hat = scipy.fft.rfftn(kernel, fft_len)
        sig_hat = scipy.fft.rfftn(e_grid, fft_len)
        full = scipy.fft.irfftn(sig_hat * kern_hat, fft_len)
        # displacement -A maps to kernel index 0: h window starts at offset
        # (A - h_radius) + r_w ... derive via: output index = signal + kernel
        # signal index s corresponds to coordinate s - r_w; kernel index k to
        # displacement k - A; their sum c = s + k - r_w - A sits at out index
        # s + k, so coordinate c has out index c + r_w + A.
        h_side = 2 * self.h_radius + 1
        lo = -self.h_radius + r_w + A
        sl = tuple(slice(lo, lo + h_side) for _ in range(dim))
        h = full[sl].copy()
        win_sl = tuple(slice(self.h_radius - r_w, self.h_radius + r_w + 1) for _ in range(dim))
        h[win_sl] = 1.0
        self.h_grid = np.clip(h, 0.0, 1.0)
        self.h_flat = self.h_grid.ravel()
        self._h_side = h_side

        # multipole moments for h beyond the table
        pts = self.eq_points.astype(np.float64)
        wts = flat[pos]
        self.m0 = float(wts.sum())
        self.m1 = pts.T @ wts
        self.q2 = (pts * wts[:, None]).T @ pts
        self._a_d = asymptotic_constant(dim)

        self.dirs = direction_table(dim)

    # -- geometry helpers (centered coordinates) --

    def in_window(self, pts: np.ndarray) -> np.ndarray:
        return np.max(np.abs(pts), axis=-1) <= self.r_w

    def window_flat(self, pts: np.ndarray) -> np.ndarray:
        side = 2 * self.r_w + 1
        offs = pts + self.r_w
        out = np.zeros(pts.shape[0], dtype=np.int64)
        for k in range(self.dim):
            out = out * side + offs[:, k]
        return out

    def h_at(self, pts: np.ndarray) -> np.ndarray:
        """h = P[hit window] at an (n, d) array of centered points."""
        pts = np.asarray(pts, dtype=np.int64)
        sup = np.max(np.abs(pts), axis=-1)
        out = np.empty(len(pts))
        inside = sup <= self.h_radius
        if inside.any():
            offs = pts[inside] + self.h_radius
            flat = np.zeros(int(inside.sum()), dtype=np.int64)
            for k in range(self.dim):
                flat = flat * self._h_side + offs[:, k]
            out[inside] = self.h_flat[flat]
        far = ~inside
        if far.any():
            out[far] = self._h_far(pts[far])
        return out

    def _h_far(self, pts: np.ndarray) -> np.ndarray:
        z = pts.astype(np.float64)
        r2 = np.sum(z * z, axis=1)
        r = np.sqrt(r2)
        d = self.dim
        lead = self.m0
        dip = (d - 2) * (z @ self.m1) / r2
        zqz = np.einsum("ij,jk,ik->i", z, self.q2, z)
        quad = (d - 2) * 0.5 * (d * zqz / (r2 * r2) - np.trace(self.q2) / r2)
        return self._a_d * r ** (2 - d) * (lead + dip + quad)


_context_cache: dict = {}


def window_context(window: LatticeBox, h_radius: int | None = None) -> WindowContext:
    key = (window.center, window.radius, h_radius)
    ctx = _context_cache.get(key)
    if ctx is None:
        ctx = WindowContext(window, h_radius)
        _context_cache[key] = ctx
    return ctx


# ---------------------------------------------------------------------------
# sequential engine (reference semantics, full path recording)
# ---------------------------------------------------------------------------


def _walk_trajectory(ctx: WindowContext, start_centered: np.ndarray, stream: RngStream,
                     step_cap: int, record_steps: bool = True):
    """One trajectory from `start_centered`; returns (visited flat indices,
    absolute step list, terminated_reason).

    Event order per iteration: a walking step consumes one stream value,
    plus one more for the escape decision if the step left the window; a
    returning (conditioned) step consumes one value.  The batch engine
    replays exactly this consumption pattern.
    """
    dim = ctx.dim
    center = np.asarray(ctx.window.center, dtype=np.int64)
    pos = start_centered.copy()
    visited = [int(ctx.window_flat(pos[None, :])[0])]
    steps = [tuple(int(c) for c in pos + center)] if record_steps else None
    state = _WALKING
    nsteps = 0
    reason = ESCAPED_CERTIFIED
    while True:
        if nsteps >= step_cap:
            reason = REACHED_STEP_CAP
            break
        if state == _WALKING:
            pos = pos + ctx.dirs[stream.next_below(2 * dim)]
            nsteps += 1
            if record_steps:
                steps.append(tuple(int(c) for c in pos + center))
            if np.max(np.abs(pos)) <= ctx.r_w:
                visited.append(int(ctx.window_flat(pos[None, :])[0]))
            else:
                u = stream.next_uniform()
                h = float(ctx.h_at(pos[None, :])[0])
                if u < h:
                    state = _RETURNING
                else:
                    reason = ESCAPED_CERTIFIED
                    break
        else:
            nbrs = pos[None, :] + ctx.dirs
            hv = ctx.h_at(nbrs)
            cdf = np.cumsum(hv)
            u = stream.next_uniform() * cdf[-1]
            pick = int(np.searchsorted(cdf, u, side="right"))
            pick = min(pick, 2 * dim - 1)
            pos = pos + ctx.dirs[pick]
            nsteps += 1
            if record_steps:
                steps.append(tuple(int(c) for c in pos + center))
            if np.max(np.abs(pos)) <= ctx.r_w:
                visited.append(int(ctx.window_flat(pos[None, :])[0]))
                state = _WALKING
    return visited, steps, reason


def sample_window(
    u_max: float,
    window: LatticeBox,
    rng: RngStream,
    step_cap: int = DEFAULT_STEP_CAP,
    record_steps: bool = True,
    engine: str = "exact",
    truncation_epsilon: float = 1e-2,
) -> InterlacementSample:
    """Draw one realization of the marked-trajectory cloud restricted to
    `window`, with full per-trajectory paths.

    The default engine decides escapes exactly through the Green-function
    field; engine="truncation" runs each trajectory to a sphere where the
    certified return probability drops below `truncation_epsilon` (slow;
    kept as an independent cross-check of the sampler).
    """
    if u_max <= 0:
        raise ValueError("u_max must be positive (the zero-level cloud is empty)")
    ctx = window_context(window)
    sample_stream = rng.substream(0)
    n = poisson_from_rng(u_max * ctx.cap, sample_stream)
    trajectories = []
    flagged = 0
    for j in range(n):
        mark = u_max * (1.0 - sample_stream.at(1 + 2 * j).next_uniform())
        start_u = sample_stream.at(2 + 2 * j).next_uniform()
        idx = min(int(np.searchsorted(ctx.eq_cdf, start_u, side="right")),
                  len(ctx.eq_cdf) - 1)
        start_c = ctx.eq_points[idx].copy()
        traj_stream = RngStream(sample_stream.key, j)
        if engine == "exact":
            visited, steps, reason = _walk_trajectory(ctx, start_c, traj_stream,
                                                      step_cap, record_steps)
        elif engine == "truncation":
            visited, steps, reason = _walk_truncation(ctx, start_c, traj_stream,
                                                      step_cap, truncation_epsilon)
        else:
            raise ValueError(f"unknown engine {engine!r}")
        if reason == REACHED_STEP_CAP:
            flagged += 1
        center = ctx.window.center
        trace = SiteSet(_flat_to_points(ctx, visited, center))
        seg_steps = steps if steps else [tuple(int(c) for c in start_c + np.asarray(center))]
        trajectories.append(MarkedTrajectory(
            trace_in_window=trace,
            segment=WalkSegment(seg_steps, reason),
            level_mark=float(mark),
        ))
    return InterlacementSample(
        window=window,
        u_max=u_max,
        trajectories=trajectories,
        capacity_used=ctx.capacity_report,
        seed=rng.identity(),
        diagnostics={
            "trajectory_count": n,
            "poisson_rate": u_max * ctx.cap,
            "step_cap_flagged": flagged,
            "engine": engine,
        },
    )


def poisson_from_rng(lam: float, stream: RngStream) -> int:
    vals = poisson_batch(lam, np.array([stream.at(0).next_uniform()]))
    return int(vals[0])


def _flat_to_points(ctx: WindowContext, flats: list[int], center: Point) -> list[Point]:
    side = 2 * ctx.r_w + 1
    pts = []
    for f in flats:
        offs = []
        for _ in range(ctx.dim):
            f, o = divmod(f, side)
            offs.append(o)
        offs.reverse()
        pts.append(tuple(o - ctx.r_w + c for o, c in zip(offs, center)))
    return pts


def _walk_truncation(ctx: WindowContext, start_centered: np.ndarray, stream: RngStream,
                     step_cap: int, epsilon: float):
    """Literal run-until-escape trajectory: single steps out to a sphere at
    which the certified return probability is below epsilon."""
    from .green import gmax_bound

    radius = ctx.r_w + 2
    while ctx.cap * gmax_bound(radius - ctx.r_w, ctx.dim) > epsilon:
        radius *= 2
    center = np.asarray(ctx.window.center, dtype=np.int64)
    seg = run_until_escape(tuple(int(c) for c in start_centered), SiteSet(),
                           radius, step_cap, stream)
    visited = []
    steps = []
    for p in seg.steps:
        arr = np.asarray(p, dtype=np.int64)
        steps.append(tuple(int(c) for c in arr + center))
        if np.max(np.abs(arr)) <= ctx.r_w:
            visited.append(int(ctx.window_flat(arr[None, :])[0]))
    return visited, steps, seg.terminated_reason


# ---------------------------------------------------------------------------
# batch engine (vectorized; identical stream consumption as the sequential one)
# ---------------------------------------------------------------------------


@dataclass
class BatchResult:
    n_samples: int
    window: LatticeBox
    u_max: float
    minmark: np.ndarray | None = None  # (n_samples, sites) float32
    sample_hit: np.ndarray | None = None  # (n_samples,) bool
    trajectory_count: int = 0
    flagged: int = 0
    capacity: float = 0.0


def run_batch(
    window: LatticeBox,
    u_max: float,
    n_samples: int,
    rng: RngStream,
    sample_offset: int = 0,
    mode: str = "minmark",
    target: SiteSet | None = None,
    step_cap: int = DEFAULT_STEP_CAP,
) -> BatchResult:
    """Vectorized sampler over many independent samples.

    Sample i (global index sample_offset + i) consumes exactly the streams
    the sequential sampler would, so results are chunking-invariant and
    reproducible.  mode="minmark" records, per sample and site, the lowest
    trajectory mark covering the site (+inf if vacant at every level up to
    u_max); mode="hit" records only whether any trajectory touches `target`.
    """
    if u_max <= 0:
        raise ValueError("u_max must be positive")
    ctx = window_context(window)
    dim = ctx.dim
    side = 2 * ctx.r_w + 1
    n_sites = side ** dim

    sample_keys = np.array(
        [rng.substream(sample_offset + i).key for i in range(n_samples)],
        dtype=np.uint64,
    )
    n_traj = poisson_batch(u_max * ctx.cap,
                           to_unit(raw64_array(sample_keys, np.zeros(n_samples, dtype=np.uint64))))
    total = int(n_traj.sum())

    minmark = None
    sample_hit = None
    target_flat_grid = None
    if mode == "minmark":
        minmark = np.full(n_samples * n_sites, np.inf, dtype=np.float32)
    elif mode == "hit":
        if target is None:
            raise ValueError("hit mode needs a target set")
        sample_hit = np.zeros(n_samples, dtype=bool)
        target_flat_grid = np.zeros(n_sites, dtype=bool)
        for p in target:
            centered = tuple(a - c for a, c in zip(p, window.center))
            if max(abs(c) for c in centered) > ctx.r_w:
                raise ValueError("target must lie inside the window")
            flat = 0
            for c in centered:
                flat = flat * side + (c + ctx.r_w)
            target_flat_grid[flat] = True
    else:
        raise ValueError(f"unknown mode {mode!r}")

    result = BatchResult(n_samples=n_samples, window=window, u_max=u_max,
                         trajectory_count=total, capacity=ctx.cap)
    if total == 0:
        if minmark is not None:
            result.minmark = minmark.reshape(n_samples, n_sites)
        if sample_hit is not None:
            result.sample_hit = sample_hit
        return result

    sample_id = np.repeat(np.arange(n_samples, dtype=np.int64), n_traj)
    tj = _per_sample_ordinals(n_traj)
    keys_rep = sample_keys[sample_id]
    marks = u_max * (1.0 - to_unit(raw64_array(keys_rep, (1 + 2 * tj).astype(np.uint64))))
    start_u = to_unit(raw64_array(keys_rep, (2 + 2 * tj).astype(np.uint64)))
    start_idx = np.minimum(np.searchsorted(ctx.eq_cdf, start_u, side="right"),
                           len(ctx.eq_cdf) - 1)
    pos = ctx.eq_points[start_idx].copy()

    traj_keys = stream_key_pairs(keys_rep, tj.astype(np.uint64))
    counters = np.zeros(total, dtype=np.uint64)
    state = np.zeros(total, dtype=np.int8)
    steps_taken = np.zeros(total, dtype=np.int64)
    marks32 = marks.astype(np.float32)

    def record(idx_rows: np.ndarray, flats: np.ndarray) -> None:
        if minmark is not None:
            _kernels.scatter_min(minmark, sample_id[idx_rows] * n_sites + flats,
                                 marks32[idx_rows])
        else:
            rows = idx_rows[target_flat_grid[flats]]
            sample_hit[sample_id[rows]] = True

    record(np.arange(total, dtype=np.int64), ctx.window_flat(pos))

    active = np.arange(total, dtype=np.int64)
    flagged = 0
    while len(active):
        st = state[active]
        walking = active[st == _WALKING]
        returning = active[st == _RETURNING]

        if len(walking):
            vals = raw64_array(traj_keys[walking], counters[walking])
            counters[walking] += np.uint64(1)
            pos[walking] += ctx.dirs[(vals % np.uint64(2 * dim)).astype(np.int64)]
            steps_taken[walking] += 1
            inside = ctx.in_window(pos[walking])
            ins_rows = walking[inside]
            if len(ins_rows):
                record(ins_rows, ctx.window_flat(pos[ins_rows]))
            out_rows = walking[~inside]
            if len(out_rows):
                u = to_unit(raw64_array(traj_keys[out_rows], counters[out_rows]))
                counters[out_rows] += np.uint64(1)
                h = ctx.h_at(pos[out_rows])
                ret = u < h
                state[out_rows[ret]] = _RETURNING
                state[out_rows[~ret]] = _DONE

        if len(returning):
            nbrs = pos[returning][:, None, :] + ctx.dirs[None, :, :]
            hv = ctx.h_at(nbrs.reshape(-1, dim)).reshape(len(returning), 2 * dim)
            cdf = np.cumsum(hv, axis=1)
            u = to_unit(raw64_array(traj_keys[returning], counters[returning]))
            counters[returning] += np.uint64(1)
            draw = u * cdf[:, -1]
            pick = np.sum(cdf <= draw[:, None], axis=1).astype(np.int64)
            np.clip(pick, 0, 2 * dim - 1, out=pick)
            pos[returning] += ctx.dirs[pick]
            steps_taken[returning] += 1
            inside = ctx.in_window(pos[returning])
            ins_rows = returning[inside]
            if len(ins_rows):
                record(ins_rows, ctx.window_flat(pos[ins_rows]))
                state[ins_rows] = _WALKING

        over = active[steps_taken[active] >= step_cap]
        if len(over):
            live = over[state[over] != _DONE]
            flagged += len(live)
            state[live] = _DONE
        active = active[state[active] != _DONE]

    result.flagged = flagged
    if minmark is not None:
        result.minmark = minmark.reshape(n_samples, n_sites)
    if sample_hit is not None:
        result.sample_hit = sample_hit
    return result


def _per_sample_ordinals(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    out = np.arange(total, dtype=np.int64)
    offsets = np.repeat(np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    return out - offsets


def occupancy_at_level(sample: InterlacementSample, u: float) -> OccupancyField:
    """Occupation field of the sub-cloud with marks at or below u."""
    if u < 0:
        raise ValueError("levels are nonnegative")
    if u > sample.u_max:
        raise ValueError("the sample does not determine levels above u_max")
    window = sample.window
    occ = np.zeros((window.side,) * window.dim, dtype=bool)
    for traj in sample.trajectories:
        if traj.level_mark <= u:
            for p in traj.trace_in_window:
                occ[tuple(a - c + window.radius for a, c in zip(p, window.center))] = True
    return OccupancyField(window, occ, level=u)


def occupancy_from_minmark(window: LatticeBox, minmark_row: np.ndarray, u: float) -> OccupancyField:
    occ = (minmark_row <= u).reshape((window.side,) * window.dim)
    return OccupancyField(window, occ.copy(), level=u)


@dataclass
class LawCheck:
    """Comparison of the empirical vacancy probability of K with its target."""

    set_size: int
    u: float
    trials: int
    empirical: float
    target: float
    std_error: float
    z_score: float
    capacity_value: float
    capacity_error_bound: float
    flagged: int

    def table(self) -> str:
        rows = [
            ("trials", self.trials),
            ("empirical P[K vacant]", f"{self.empirical:.6f}"),
            ("target exp(-u cap(K))", f"{self.target:.6f}"),
            ("binomial std error", f"{self.std_error:.6f}"),
            ("z score", f"{self.z_score:+.3f}"),
            ("cap(K)", f"{self.capacity_value:.6f}"),
            ("cap error bound", f"{self.capacity_error_bound:.2e}"),
            ("step-cap flagged", self.flagged),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def verify_law(
    K: SiteSet,
    window: LatticeBox,
    u: float,
    trials: int,
    rng: RngStream,
    capacity_report: CapacityReport | None = None,
) -> LawCheck:
    """Empirical P[K stays vacant at level u] against exp(-u cap(K)).

    The capacity target comes from the extrapolated finite-box linear solve
    (independent of the Green-function machinery that drives the sampler)
    unless a report is supplied.
    """
    if trials < 1000:
        raise ValueError("law verification needs at least 10^3 trials")
    for p in K:
        if p not in window:
            raise ValueError("window must contain K")
    if not K:
        return LawCheck(0, u, trials, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0)
    if capacity_report is None:
        capacity_report = capacity(K, method="linear_solve")
    target = math.exp(-u * capacity_report.value)
    res = run_batch(window, u, trials, rng, mode="hit", target=K)
    empirical = 1.0 - float(np.mean(res.sample_hit))
    se = math.sqrt(max(target * (1 - target), 1e-300) / trials)
    z = (empirical - target) / se if se > 0 else 0.0
    return LawCheck(
        set_size=len(K),
        u=u,
        trials=trials,
        empirical=empirical,
        target=target,
        std_error=se,
        z_score=z,
        capacity_value=capacity_report.value,
        capacity_error_bound=capacity_report.error_bound,
        flagged=res.flagged,
    )


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def occupancy_digest(field: OccupancyField) -> str:
    payload = field.occupied.astype(np.uint8).tobytes()
    head = f"{field.window.center}|{field.window.radius}|".encode()
    return hashlib.sha256(head + payload).hexdigest()


def snapshot_dict(sample: InterlacementSample) -> dict:
    full = occupancy_at_level(sample, sample.u_max)
    body = {
        "format_version": _SNAPSHOT_VERSION,
        "window": {"center": list(sample.window.center), "radius": sample.window.radius},
        "u_max": sample.u_max,
        "seed": sample.seed,
        "capacity": {
            "value": sample.capacity_used.value,
            "method": sample.capacity_used.method,
            "error_bound": sample.capacity_used.error_bound,
            "digest": hashlib.sha256(sample.capacity_used.to_json().encode()).hexdigest(),
        },
        "diagnostics": sample.diagnostics,
        "trajectories": [
            {
                "level_mark": t.level_mark,
                "start": list(t.segment.steps[0]),
                "steps": [list(p) for p in t.segment.steps],
                "terminated_reason": t.segment.terminated_reason,
            }
            for t in sample.trajectories
        ],
        "occupancy_digest_at_u_max": occupancy_digest(full),
    }
    body["checksum"] = _snapshot_checksum(body)
    return body


def _snapshot_checksum(body: dict) -> str:
    trimmed = {k: v for k, v in body.items() if k != "checksum"}
    return hashlib.sha256(json.dumps(trimmed, sort_keys=True).encode()).hexdigest()


def save_snapshot(sample: InterlacementSample, path) -> None:
    with open(path, "w") as fh:
        json.dump(snapshot_dict(sample), fh, indent=1)


def load_snapshot(path) -> InterlacementSample:
    with open(path) as fh:
        body = json.load(fh)
    if body.get("checksum") != _snapshot_checksum(body):
        raise ValueError("snapshot checksum mismatch: file corrupt")
    window = LatticeBox(tuple(body["window"]["center"]), body["window"]["radius"])
    trajectories = []
    for t in body["trajectories"]:
        steps = [tuple(p) for p in t["steps"]]
        trace = SiteSet(p for p in steps if p in window)
        trajectories.append(MarkedTrajectory(
            trace_in_window=trace,
            segment=WalkSegment(steps, t["terminated_reason"]),
            level_mark=t["level_mark"],
        ))
    cap_rep = CapacityReport(
        value=body["capacity"]["value"],
        equilibrium={},
        method=body["capacity"]["method"],
        error_bound=body["capacity"]["error_bound"],
        solve_radius=0,
    )
    sample = InterlacementSample(
        window=window,
        u_max=body["u_max"],
        trajectories=trajectories,
        capacity_used=cap_rep,
        seed=body["seed"],
        diagnostics=body.get("diagnostics", {}),
    )
    rebuilt = occupancy_digest(occupancy_at_level(sample, sample.u_max))
    if rebuilt != body["occupancy_digest_at_u_max"]:
        raise ValueError("snapshot occupancy digest mismatch")
    return sample
