"""Geometry of Z^d: points, site sets, boxes, boundaries and slices.

Points are plain integer tuples; a SiteSet is an immutable finite set of
points with deterministic (lexicographic) iteration order, so every
algorithm downstream is reproducible given a seed.  Dimension d >= 3 is
carried by the containers and checked on construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

Point = tuple[int, ...]

# Engines index grids with int64; keep coordinates far away from the edge
# so |x|^2-style arithmetic can never wrap.
MAX_COORD = 1 << 40


def _check_point(p: Point, dim: int | None = None) -> Point:
    p = tuple(int(c) for c in p)
    if dim is not None and len(p) != dim:
        raise ValueError(f"point {p} has dimension {len(p)}, expected {dim}")
    if len(p) < 1:
        raise ValueError("points must have at least one coordinate")
    if any(abs(c) > MAX_COORD for c in p):
        raise ValueError(f"coordinate magnitude exceeds {MAX_COORD}; refusing to risk overflow")
    return p


def norm_inf(p: Point) -> int:
    return max(abs(c) for c in p)


def norm_l1(p: Point) -> int:
    return sum(abs(c) for c in p)


def norm_l2(p: Point) -> float:
    return float(np.sqrt(sum(c * c for c in p)))


def add(p: Point, q: Point) -> Point:
    return tuple(a + b for a, b in zip(p, q))


def sub(p: Point, q: Point) -> Point:
    return tuple(a - b for a, b in zip(p, q))


def unit_vector(dim: int, axis: int, sign: int = 1) -> Point:
    e = [0] * dim
    e[axis] = sign
    return tuple(e)


def neighbors(p: Point) -> list[Point]:
    """The 2d nearest neighbors of p, in deterministic axis order."""
    out = []
    for k in range(len(p)):
        for s in (1, -1):
            q = list(p)
            q[k] += s
            out.append(tuple(q))
    return out


class SiteSet:
    """Immutable finite set of lattice points sharing one dimension.

    Iteration is lexicographic, membership is O(1).
    """

    __slots__ = ("_set", "_sorted", "_dim")

    def __init__(self, points: Iterable[Point] = ()):
        pts = {tuple(int(c) for c in p) for p in points}
        dims = {len(p) for p in pts}
        if len(dims) > 1:
            raise ValueError(f"mixed dimensions in site set: {sorted(dims)}")
        self._dim = dims.pop() if dims else None
        for p in pts:
            _check_point(p)
        self._set = frozenset(pts)
        self._sorted = tuple(sorted(pts))

    @property
    def dim(self) -> int | None:
        return self._dim

    def __contains__(self, p) -> bool:
        return tuple(p) in self._set

    def __iter__(self) -> Iterator[Point]:
        return iter(self._sorted)

    def __len__(self) -> int:
        return len(self._set)

    def __bool__(self) -> bool:
        return bool(self._set)

    def __eq__(self, other) -> bool:
        if isinstance(other, SiteSet):
            return self._set == other._set
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._set)

    def __repr__(self) -> str:
        if len(self) <= 6:
            return f"SiteSet({list(self._sorted)})"
        return f"SiteSet(<{len(self)} sites, d={self._dim}>)"

    def union(self, other: "SiteSet | Iterable[Point]") -> "SiteSet":
        return SiteSet(list(self._sorted) + [tuple(p) for p in other])

    def difference(self, other: "SiteSet | Iterable[Point]") -> "SiteSet":
        drop = {tuple(p) for p in other}
        return SiteSet(p for p in self._sorted if p not in drop)

    def intersection(self, other: "SiteSet | Iterable[Point]") -> "SiteSet":
        keep = {tuple(p) for p in other}
        return SiteSet(p for p in self._sorted if p in keep)

    def translate(self, v: Point) -> "SiteSet":
        return SiteSet(add(p, v) for p in self._sorted)

    def to_array(self) -> np.ndarray:
        """(n, d) int64 array in lexicographic order."""
        if not self._set:
            return np.zeros((0, self._dim or 0), dtype=np.int64)
        return np.array(self._sorted, dtype=np.int64)

    def circumradius(self, center: Point | None = None) -> int:
        """Max l-infinity distance of the sites from `center` (default origin)."""
        if not self._set:
            return 0
        if center is None:
            center = (0,) * self._dim
        return max(norm_inf(sub(p, center)) for p in self._sorted)


@dataclass(frozen=True)
class LatticeBox:
    """Closed l-infinity ball B(center, radius): |x - center|_inf <= radius."""

    center: Point
    radius: int

    def __post_init__(self):
        _check_point(self.center)
        if self.radius < 0:
            raise ValueError("box radius must be nonnegative")
        if norm_inf(self.center) + self.radius > MAX_COORD:
            raise ValueError("box extends beyond the safe coordinate range")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    def __contains__(self, p) -> bool:
        p = tuple(p)
        return all(abs(a - c) <= self.radius for a, c in zip(p, self.center))

    def __len__(self) -> int:
        return self.side ** self.dim

    def sites(self) -> SiteSet:
        return SiteSet(map(tuple, self.site_array()))

    def site_array(self) -> np.ndarray:
        """(side^d, d) array of all sites in C order (lexicographic)."""
        axes = [np.arange(c - self.radius, c + self.radius + 1) for c in self.center]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    def index_of(self, p: Point) -> int:
        """Flat C-order index of a member site."""
        idx = 0
        for a, c in zip(p, self.center):
            off = a - c + self.radius
            if off < 0 or off >= self.side:
                raise KeyError(f"{p} is not in {self}")
            idx = idx * self.side + off
        return idx

    def point_of(self, idx: int) -> Point:
        """Inverse of index_of."""
        offs = []
        for _ in range(self.dim):
            idx, off = divmod(idx, self.side)
            offs.append(off)
        offs.reverse()
        return tuple(c - self.radius + o for c, o in zip(self.center, offs))

    def flat_indices(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized C-order flat index for (n, d) coordinate array."""
        offs = pts - np.asarray(self.center, dtype=np.int64) + self.radius
        idx = np.zeros(len(pts), dtype=np.int64)
        for k in range(self.dim):
            idx = idx * self.side + offs[:, k]
        return idx

    def inner_boundary_mask(self) -> np.ndarray:
        """Boolean grid (shape side^d) marking sites with |x-c|_inf == radius."""
        shape = (self.side,) * self.dim
        mask = np.zeros(shape, dtype=bool)
        if self.radius == 0:
            mask[...] = True
            return mask
        for k in range(self.dim):
            sl_lo = [slice(None)] * self.dim
            sl_hi = [slice(None)] * self.dim
            sl_lo[k] = 0
            sl_hi[k] = self.side - 1
            mask[tuple(sl_lo)] = True
            mask[tuple(sl_hi)] = True
        return mask


class BoundarySets(NamedTuple):
    inner: SiteSet
    outer: SiteSet
    closure: SiteSet


def boundaries(K: SiteSet) -> BoundarySets:
    """Inner boundary, exterior boundary and closure of a finite set.

    inner  = sites of K with a nearest neighbor outside K,
    outer  = sites outside K with a nearest neighbor in K,
    closure = K together with its exterior boundary.
    """
    if not K:
        empty = SiteSet()
        return BoundarySets(empty, empty, empty)
    inner, outer = [], []
    for p in K:
        nbrs = neighbors(p)
        if any(q not in K for q in nbrs):
            inner.append(p)
        for q in nbrs:
            if q not in K:
                outer.append(q)
    outer_set = SiteSet(outer)
    return BoundarySets(SiteSet(inner), outer_set, K.union(outer_set))


def closure(K: SiteSet) -> SiteSet:
    return boundaries(K).closure


def slice_ball(L: int, dim: int = 3) -> SiteSet:
    """The (d-1)-dimensional l-infinity ball of radius L in the hyperplane
    where the first coordinate vanishes.  Cardinality (2L+1)^(d-1)."""
    if L < 0:
        raise ValueError("slice radius must be nonnegative")
    if dim < 2:
        raise ValueError("slice requires dimension >= 2")
    axes = [np.arange(-L, L + 1)] * (dim - 1)
    grid = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grid], axis=1)
    return SiteSet((0, *map(int, row)) for row in pts)


def is_connected(S: SiteSet) -> bool:
    """True iff S induces a connected nearest-neighbor subgraph.

    The empty set and singletons count as connected.
    """
    if len(S) <= 1:
        return True
    start = next(iter(S))
    seen = {start}
    stack = [start]
    while stack:
        p = stack.pop()
        for q in neighbors(p):
            if q in S and q not in seen:
                seen.add(q)
                stack.append(q)
    return len(seen) == len(S)


def connected_components(S: SiteSet) -> list[SiteSet]:
    """Nearest-neighbor components of S, ordered by their smallest site."""
    remaining = set(S)
    comps = []
    for p in S:  # lexicographic seeds -> deterministic order
        if p not in remaining:
            continue
        comp = {p}
        remaining.discard(p)
        stack = [p]
        while stack:
            q = stack.pop()
            for r in neighbors(q):
                if r in remaining:
                    remaining.discard(r)
                    comp.add(r)
                    stack.append(r)
        comps.append(SiteSet(comp))
    return comps
