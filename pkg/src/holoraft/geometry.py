"""Module/tail geometry and the phase-space collision region.

Two docked neighbors collide when their tail segments (radial segments from
each hull center along the motor angle) intersect.  In the (phi_i, phi_j)
phase plane the collided set is periodic with period 2*pi on both axes; one
period is extracted as one or more simple polygons by marching squares over
a boolean sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from skimage import measure

TWO_PI = 2.0 * math.pi
_EPS = 1e-12


class EmptyRegion(ValueError):
    """No grid sample collides: the tails cannot reach each other."""


class UnsupportedGeometry(ValueError):
    """Collision region wraps a full period; contour extraction would lie."""


class NeighborRelation(Enum):
    """Lattice offset of neighbor j relative to module i (structure frame)."""

    PLUS_X = 0
    MINUS_X = 1
    PLUS_Y = 2
    MINUS_Y = 3

    @property
    def offset(self) -> tuple[int, int]:
        return {
            NeighborRelation.PLUS_X: (1, 0),
            NeighborRelation.MINUS_X: (-1, 0),
            NeighborRelation.PLUS_Y: (0, 1),
            NeighborRelation.MINUS_Y: (0, -1),
        }[self]

    @property
    def is_horizontal(self) -> bool:
        return self in (NeighborRelation.PLUS_X, NeighborRelation.MINUS_X)

    def canonical(self) -> tuple["NeighborRelation", bool]:
        """Positive-direction equivalent and whether the pair roles swap.

        (i, j, -x) is the same physical pair as (j, i, +x), so a query
        against the -x relation is answered by the +x region with the two
        modules' angles exchanged.
        """
        if self is NeighborRelation.MINUS_X:
            return NeighborRelation.PLUS_X, True
        if self is NeighborRelation.MINUS_Y:
            return NeighborRelation.PLUS_Y, True
        return self, False


@dataclass(frozen=True)
class ModuleGeometry:
    """Physical dimensions shared by all modules (meters).

    The tail is modeled as a 1-D radial segment from ``tail_inner`` to
    ``tail_outer`` along the motor angle, measured from the hull center.
    """

    lattice_pitch: float = 1.0
    tail_inner: float = 0.0
    tail_outer: float = 0.7
    hull_radius: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.tail_inner < self.tail_outer:
            raise ValueError("need 0 <= tail_inner < tail_outer")
        if self.hull_radius > self.lattice_pitch / 2.0 + _EPS:
            raise ValueError("hull_radius must not exceed lattice_pitch / 2")


class PhasePoint(NamedTuple):
    phi_i: float
    phi_j: float


class PhaseSegment(NamedTuple):
    """Straight phase-space path; degenerate (a == b) is allowed."""

    a: PhasePoint
    b: PhasePoint

    @property
    def midpoint(self) -> PhasePoint:
        return PhasePoint(0.5 * (self.a.phi_i + self.b.phi_i),
                          0.5 * (self.a.phi_j + self.b.phi_j))


def wrap_angle(phi):
    """Canonical representative in [-pi, pi)."""
    return (np.asarray(phi) + math.pi) % TWO_PI - math.pi


def swim_trajectory(p_i, p_j) -> PhaseSegment:
    """Phase-space segment traced by one swim cycle of a module pair.

    Both modules share the cosine phase, so the cycle sweeps the straight
    segment between (phi0 + A) and (phi0 - A) on each axis, back and forth.
    """
    phi0_i, amp_i = p_i
    phi0_j, amp_j = p_j
    return PhaseSegment(
        PhasePoint(phi0_i + amp_i, phi0_j + amp_j),
        PhasePoint(phi0_i - amp_i, phi0_j - amp_j),
    )


def _tail_endpoints(phi, cx, cy, geom: ModuleGeometry):
    """Tail segment endpoints for motor angle(s) phi at hull center (cx, cy)."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    return (cx + geom.tail_inner * c, cy + geom.tail_inner * s,
            cx + geom.tail_outer * c, cy + geom.tail_outer * s)


def _segments_intersect(p1x, p1y, p2x, p2y, p3x, p3y, p4x, p4y):
    """Vectorized segment-segment intersection test (touching counts)."""
    d1 = (p4x - p3x) * (p1y - p3y) - (p4y - p3y) * (p1x - p3x)
    d2 = (p4x - p3x) * (p2y - p3y) - (p4y - p3y) * (p2x - p3x)
    d3 = (p2x - p1x) * (p3y - p1y) - (p2y - p1y) * (p3x - p1x)
    d4 = (p2x - p1x) * (p4y - p1y) - (p2y - p1y) * (p4x - p1x)

    collinear = ((np.abs(d1) < _EPS) & (np.abs(d2) < _EPS)
                 & (np.abs(d3) < _EPS) & (np.abs(d4) < _EPS))
    general = (d1 * d2 <= 0.0) & (d3 * d4 <= 0.0) & ~collinear

    # Collinear case: 1-D overlap of projections onto the first segment.
    ux, uy = p2x - p1x, p2y - p1y
    t3 = (p3x - p1x) * ux + (p3y - p1y) * uy
    t4 = (p4x - p1x) * ux + (p4y - p1y) * uy
    lo = np.minimum(t3, t4)
    hi = np.maximum(t3, t4)
    len2 = ux * ux + uy * uy
    overlap = (hi >= -_EPS) & (lo <= len2 + _EPS)

    return general | (collinear & overlap)


def tails_collide(phi_i, phi_j, rel: NeighborRelation, geom: ModuleGeometry):
    """True iff the tails of modules i and j intersect at these motor angles.

    Module i sits at the origin; module j at the lattice offset of ``rel``.
    Pure function of the wrapped angles; accepts scalars or broadcastable
    arrays and returns booleans of the broadcast shape.
    """
    dx, dy = rel.offset
    jx, jy = dx * geom.lattice_pitch, dy * geom.lattice_pitch
    a1x, a1y, a2x, a2y = _tail_endpoints(phi_i, 0.0, 0.0, geom)
    b1x, b1y, b2x, b2y = _tail_endpoints(phi_j, jx, jy, geom)
    hit = _segments_intersect(a1x, a1y, a2x, a2y, b1x, b1y, b2x, b2y)
    if np.ndim(hit) == 0:
        return bool(hit)
    return hit


@dataclass(frozen=True)
class CollisionPolygon:
    """One connected component of the collided set, as a simple CCW polygon.

    Vertices are contiguous in the plane (never clipped at the +-pi window)
    and translated so the polygon centroid lies in [-pi, pi)^2; components
    that straddle the wrap seam therefore keep vertices slightly outside the
    canonical square.  Together with its 2*pi-shifted copies the polygon
    tiles its component of the collided set in R^2.
    """

    vertices: np.ndarray  # (V, 2) float64, CCW, not closed
    relation: NeighborRelation
    resolution: float

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 (x, y) vertices")
        object.__setattr__(self, "vertices", v)

    @property
    def bbox(self) -> np.ndarray:
        v = self.vertices
        return np.array([v[:, 0].min(), v[:, 1].min(),
                         v[:, 0].max(), v[:, 1].max()])

    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


@dataclass(frozen=True)
class CollisionRegion:
    """Union of collision polygons for one neighbor relation."""

    relation: NeighborRelation
    resolution: float
    polygons: tuple[CollisionPolygon, ...]

    def __post_init__(self):
        verts = np.concatenate([p.vertices for p in self.polygons], axis=0)
        starts = np.zeros(len(self.polygons) + 1, dtype=np.int64)
        for k, p in enumerate(self.polygons):
            starts[k + 1] = starts[k] + p.vertices.shape[0]
        bboxes = np.stack([p.bbox for p in self.polygons], axis=0)
        object.__setattr__(self, "_flat", (np.ascontiguousarray(verts), starts,
                                           np.ascontiguousarray(bboxes)))

    def flat_arrays(self):
        """(verts, starts, bboxes) in the layout the distance kernels take."""
        return self._flat

    def contains(self, phi_i: float, phi_j: float) -> bool:
        """Point membership with periodic tiling (used by tests/audits)."""
        from . import dockernel  # deferred: keeps plain geometry numba-free

        for poly in self.polygons:
            v = poly.vertices
            cx = wrap_angle(phi_i)
            cy = wrap_angle(phi_j)
            for sx in (-TWO_PI, 0.0, TWO_PI):
                for sy in (-TWO_PI, 0.0, TWO_PI):
                    if dockernel.point_in_polygon(cx - sx, cy - sy,
                                                  v[:, 0], v[:, 1]):
                        return True
        return False


def _periodic_components(grid: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a boolean grid on the torus."""
    k = grid.shape[0]
    labels = -np.ones(grid.shape, dtype=int)
    comps = []
    for si in range(k):
        for sj in range(k):
            if not grid[si, sj] or labels[si, sj] >= 0:
                continue
            idx = len(comps)
            stack = [(si, sj)]
            labels[si, sj] = idx
            cells = []
            while stack:
                i, j = stack.pop()
                cells.append((i, j))
                for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                    ni %= k
                    nj %= k
                    if grid[ni, nj] and labels[ni, nj] < 0:
                        labels[ni, nj] = idx
                        stack.append((ni, nj))
            mask = np.zeros(grid.shape, dtype=bool)
            rows, cols = zip(*cells)
            mask[list(rows), list(cols)] = True
            comps.append(mask)
    return comps


def _free_index(occupied: np.ndarray) -> int:
    """Index of an unoccupied row/column, or -1 if all are occupied."""
    free = np.flatnonzero(~occupied)
    return int(free[0]) if free.size else -1


def _simplify_ring(ring: np.ndarray, tol: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring, anchored at two extreme vertices."""

    def dp(points: np.ndarray) -> np.ndarray:
        if points.shape[0] <= 2:
            return points
        a, b = points[0], points[-1]
        ab = b - a
        denom = math.hypot(ab[0], ab[1])
        if denom < _EPS:
            d = np.hypot(points[:, 0] - a[0], points[:, 1] - a[1])
        else:
            d = np.abs(ab[0] * (points[:, 1] - a[1])
                       - ab[1] * (points[:, 0] - a[0])) / denom
        k = int(np.argmax(d[1:-1])) + 1
        if d[k] <= tol:
            return np.vstack([a, b])
        left = dp(points[: k + 1])
        right = dp(points[k:])
        return np.vstack([left[:-1], right])

    i0 = int(np.argmin(ring[:, 0]))
    ring = np.roll(ring, -i0, axis=0)
    i1 = int(np.argmax(ring[:, 0]))
    if i1 == 0:
        return ring
    first = dp(ring[: i1 + 1])
    second = dp(np.vstack([ring[i1:], ring[:1]]))
    out = np.vstack([first[:-1], second[:-1]])
    return out


def build_collision_region(rel: NeighborRelation, geom: ModuleGeometry,
                           resolution: float = 0.1) -> CollisionRegion:
    """Extract the collided set for one neighbor relation as polygon(s).

    Samples ``tails_collide`` on a uniform periodic grid starting at -pi,
    labels connected components with wraparound, and runs marching squares
    on each component after rolling it away from the wrap seam.  Polygons
    are simplified with a vertex-deviation tolerance of half a grid cell.

    Raises EmptyRegion when no sample collides and UnsupportedGeometry when
    a component wraps a full period (no seam-free roll exists).
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    k = int(math.ceil(TWO_PI / resolution - 1e-9))
    phis = -math.pi + resolution * np.arange(k)
    grid = tails_collide(phis[:, None], phis[None, :], rel, geom)
    if not grid.any():
        raise EmptyRegion(f"tails never intersect for {rel} with {geom}")

    polygons = []
    for mask in _periodic_components(grid):
        row_free = _free_index(mask.any(axis=1))
        col_free = _free_index(mask.any(axis=0))
        if row_free < 0 or col_free < 0:
            raise UnsupportedGeometry(
                "collision component spans a full period; refusing to clip")
        # Roll the free row/column to the end so the component is contiguous.
        ri = (-(row_free + 1)) % k
        rj = (-(col_free + 1)) % k
        rolled = np.roll(np.roll(mask, ri, axis=0), rj, axis=1)
        padded = np.pad(rolled.astype(float), 1)
        contours = measure.find_contours(padded, 0.5)
        if len(contours) != 1:
            raise UnsupportedGeometry(
                f"expected one contour per component, got {len(contours)}")
        ring = contours[0]
        if np.allclose(ring[0], ring[-1]):
            ring = ring[:-1]
        # Back from padded/rolled grid indices to unwrapped angles.
        verts = np.empty_like(ring)
        verts[:, 0] = -math.pi + resolution * (ring[:, 0] - 1.0 - ri)
        verts[:, 1] = -math.pi + resolution * (ring[:, 1] - 1.0 - rj)
        simplified = _simplify_ring(verts, 0.5 * resolution)
        if simplified.shape[0] >= 3:  # single-cell diamonds collapse otherwise
            verts = simplified
        # Normalize to CCW orientation.
        x, y = verts[:, 0], verts[:, 1]
        if np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) < 0:
            verts = verts[::-1].copy()
        # Translate so the centroid is canonical.
        cx, cy = verts.mean(axis=0)
        verts[:, 0] -= TWO_PI * math.floor((cx + math.pi) / TWO_PI)
        verts[:, 1] -= TWO_PI * math.floor((cy + math.pi) / TWO_PI)
        polygons.append(CollisionPolygon(verts, rel, resolution))

    polygons.sort(key=lambda p: (p.vertices[:, 0].min(), p.vertices[:, 1].min()))
    return CollisionRegion(rel, resolution, tuple(polygons))


def build_regions(geom: ModuleGeometry, resolution: float = 0.1
                  ) -> dict[NeighborRelation, CollisionRegion]:
    """Regions for the two canonical relations (+x, +y); negatives by swap."""
    return {
        NeighborRelation.PLUS_X: build_collision_region(
            NeighborRelation.PLUS_X, geom, resolution),
        NeighborRelation.PLUS_Y: build_collision_region(
            NeighborRelation.PLUS_Y, geom, resolution),
    }
