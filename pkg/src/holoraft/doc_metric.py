"""Signed distance-to-collision (DoC) between phase trajectories and regions.

Positive DoC is clearance, negative DoC is collision severity, both measured
along the trajectory in phase space.  Because the collision region tiles the
plane with period 2*pi, every query checks all nearby shifted copies and the
most conservative (smallest) value wins.

The 4-D DoC table caches the metric for every swim trajectory on the solver
grid; tables persist in a little-endian binary cache (magic ``DOCT``) with a
JSON sidecar recording the geometry they were built from.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import dockernel
from .geometry import (CollisionRegion, ModuleGeometry, NeighborRelation,
                       PhaseSegment, build_regions, swim_trajectory)

PHI_MIN = -math.pi
PHI_STEP = 0.1
AMP_MIN = -2.6
AMP_MAX = 2.6
AMP_STEP = 0.1

FORMAT_MAGIC = b"DOCT"
FORMAT_VERSION = 1


class OutOfRange(ValueError):
    """Amplitude update would leave the tabulated [-2.6, 2.6] domain."""


class DoCTriple(NamedTuple):
    """DoC now (d0) and after stepping this module's phi0 (d_phi) or A (d_a)."""

    d0: float
    d_phi: float
    d_a: float


def _segment_coords(seg: PhaseSegment):
    return float(seg.a.phi_i), float(seg.a.phi_j), float(seg.b.phi_i), float(seg.b.phi_j)


def segment_polygon_doc(seg: PhaseSegment, poly) -> float:
    """Four-case DoC of one segment against one polygon, no wrapping.

    Cases: (1) disjoint -> +min Euclidean distance; (2) one endpoint inside
    -> -(interior portion); (3) fully inside -> -(|AB| + shorter escape along
    the line's extensions); (4) crossing through -> -(chord + shorter
    approach).  A degenerate segment is treated as a point (cases 1/2, with
    penetration depth as the severity).
    """
    ax, ay, bx, by = _segment_coords(seg)
    v = np.asarray(poly.vertices if hasattr(poly, "vertices") else poly,
                   dtype=float)
    return float(dockernel.doc_polygon(ax, ay, bx, by,
                                       np.ascontiguousarray(v[:, 0]),
                                       np.ascontiguousarray(v[:, 1])))


def doc_wrapped(seg: PhaseSegment, region: CollisionRegion) -> float:
    """Most conservative DoC over all periodic copies of the region."""
    verts, starts, bboxes = region.flat_arrays()
    ax, ay, bx, by = _segment_coords(seg)
    return float(dockernel.doc_region(ax, ay, bx, by, verts, starts, bboxes))


def doc_wrapped_batch(segs: np.ndarray, region: CollisionRegion) -> np.ndarray:
    """Vector form of doc_wrapped for an (n, 4) array of [ax, ay, bx, by]."""
    verts, starts, bboxes = region.flat_arrays()
    return dockernel.doc_region_batch(
        np.ascontiguousarray(segs, dtype=float), verts, starts, bboxes)


def phi_axis() -> np.ndarray:
    n = int(math.ceil(2.0 * math.pi / PHI_STEP - 1e-9))
    return PHI_MIN + PHI_STEP * np.arange(n)


def amp_axis() -> np.ndarray:
    n = int(round((AMP_MAX - AMP_MIN) / AMP_STEP)) + 1
    return AMP_MIN + AMP_STEP * np.arange(n)


@dataclass(frozen=True)
class DoCTable:
    """Precomputed swim-trajectory DoC on the (phi0_i, A_i, phi0_j, A_j) grid."""

    relation: NeighborRelation
    phi_axis: np.ndarray
    amp_axis: np.ndarray
    values: np.ndarray  # float32, shape (P, A, P, A)
    resolution: float   # collision-region grid resolution the build used

    def phi_index(self, phi) -> np.ndarray:
        idx = np.rint((np.asarray(phi) - PHI_MIN) / PHI_STEP).astype(np.int64)
        return idx % self.phi_axis.shape[0]

    def amp_index(self, amp) -> np.ndarray:
        idx = np.rint((np.asarray(amp) - AMP_MIN) / AMP_STEP).astype(np.int64)
        return np.clip(idx, 0, self.amp_axis.shape[0] - 1)

    def value(self, p_i, p_j) -> float:
        """Nearest-grid-cell lookup for a module pair in table orientation."""
        phi_i, amp_i = p_i
        phi_j, amp_j = p_j
        return float(self.values[self.phi_index(phi_i), self.amp_index(amp_i),
                                 self.phi_index(phi_j), self.amp_index(amp_j)])


def build_doc_table(region: CollisionRegion) -> DoCTable:
    """Evaluate doc_wrapped for every grid entry; deterministic by slabs."""
    phis = phi_axis()
    amps = amp_axis()
    verts, starts, bboxes = region.flat_arrays()
    values = dockernel.build_table_kernel(phis, amps, verts, starts, bboxes)
    return DoCTable(region.relation, phis, amps, values, region.resolution)


def doc_triple(p_i, p_j, step_phi: float, step_a: float, table) -> DoCTriple:
    """DoC at the current parameters and after each single-parameter update.

    The neighbor (p_j) stays fixed.  ``table`` is anything with a
    ``value(p_i, p_j)`` method (a DoCTable or a RelationView).
    """
    phi_i, amp_i = p_i
    if abs(amp_i + step_a) > AMP_MAX + 1e-9:
        raise OutOfRange(f"amplitude {amp_i + step_a} outside [-2.6, 2.6]")
    d0 = table.value(p_i, p_j)
    d_phi = table.value((phi_i + step_phi, amp_i), p_j)
    d_a = table.value((phi_i, amp_i + step_a), p_j)
    return DoCTriple(d0, d_phi, d_a)


class RelationView:
    """Pair lookup for any relation, backed by the +x/+y tables.

    (i, j, -x) is the same pair as (j, i, +x), so negative relations read
    the positive table with the module roles exchanged.
    """

    def __init__(self, table: DoCTable, swapped: bool):
        self.table = table
        self.swapped = swapped

    def value(self, p_i, p_j) -> float:
        if self.swapped:
            return self.table.value(p_j, p_i)
        return self.table.value(p_i, p_j)


@dataclass(frozen=True)
class DoCTableSet:
    """Tables for the canonical relations plus swapped views for the rest."""

    tables: dict

    def view(self, rel: NeighborRelation) -> RelationView:
        canon, swapped = rel.canonical()
        return RelationView(self.tables[canon], swapped)

    @property
    def resolution(self) -> float:
        return next(iter(self.tables.values())).resolution


def build_tables(regions: dict) -> DoCTableSet:
    return DoCTableSet({rel: build_doc_table(reg) for rel, reg in regions.items()})


def swim_doc(p_i, p_j, region: CollisionRegion) -> float:
    """Exact (non-tabulated) DoC of the swim trajectory of a pair."""
    return doc_wrapped(swim_trajectory(p_i, p_j), region)


# ---------------------------------------------------------------------------
# Binary cache: magic, version u32, relation u8, region resolution f64, four
# axis descriptors (min f64, step f64, count u32), row-major f32 values.
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sIBd" + "ddI" * 4)


class CacheError(IOError):
    """Cache file missing, malformed, or built from different inputs."""


def geometry_hash(geom: ModuleGeometry, resolution: float) -> str:
    payload = json.dumps({"geom": asdict(geom), "resolution": resolution},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _axis_descriptors(table: DoCTable):
    p = (float(table.phi_axis[0]), PHI_STEP, table.phi_axis.shape[0])
    a = (float(table.amp_axis[0]), AMP_STEP, table.amp_axis.shape[0])
    return p + a + p + a


def table_path(cache_dir, rel: NeighborRelation) -> Path:
    name = {NeighborRelation.PLUS_X: "plus_x", NeighborRelation.PLUS_Y: "plus_y",
            NeighborRelation.MINUS_X: "minus_x",
            NeighborRelation.MINUS_Y: "minus_y"}[rel]
    return Path(cache_dir) / f"doc_{name}.doct"


def write_table(table: DoCTable, path, geom: ModuleGeometry) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(FORMAT_MAGIC, FORMAT_VERSION, table.relation.value,
                          table.resolution, *_axis_descriptors(table))
    body = np.ascontiguousarray(table.values, dtype="<f4").tobytes()
    path.write_bytes(header + body)
    sidecar = {"geometry": asdict(geom), "resolution": table.resolution,
               "hash": geometry_hash(geom, table.resolution)}
    path.with_suffix(".meta.json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=1))


def read_table(path, geom: ModuleGeometry | None = None,
               resolution: float | None = None) -> DoCTable:
    """Load a cached table, verifying header and (optionally) geometry hash."""
    path = Path(path)
    if not path.exists():
        raise CacheError(f"no cache file at {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CacheError(f"{path}: truncated header")
    fields = _HEADER.unpack_from(raw)
    magic, version, rel_id, res = fields[:4]
    if magic != FORMAT_MAGIC:
        raise CacheError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CacheError(f"{path}: format version {version}, "
                         f"expected {FORMAT_VERSION}")
    mins = fields[4::3][:4]
    steps = fields[5::3][:4]
    counts = fields[6::3][:4]
    phis, amps = phi_axis(), amp_axis()
    expect = _HEADER.pack(FORMAT_MAGIC, FORMAT_VERSION, rel_id, res,
                          *( (float(phis[0]), PHI_STEP, len(phis))
                             + (float(amps[0]), AMP_STEP, len(amps)) ) * 2)
    if raw[:_HEADER.size] != expect:
        raise CacheError(f"{path}: axis descriptors do not match the "
                         f"solver grid (mins={mins} steps={steps} counts={counts})")
    if geom is not None:
        meta_path = path.with_suffix(".meta.json")
        if not meta_path.exists():
            raise CacheError(f"{path}: missing geometry sidecar")
        meta = json.loads(meta_path.read_text())
        want = geometry_hash(geom, resolution if resolution is not None else res)
        if meta.get("hash") != want or res != (resolution or res):
            raise CacheError(f"{path}: cache was built for different geometry")
    n = counts[0] * counts[1] * counts[2] * counts[3]
    body = raw[_HEADER.size:]
    if len(body) != 4 * n:
        raise CacheError(f"{path}: expected {4 * n} value bytes, "
                         f"got {len(body)}")
    values = np.frombuffer(body, dtype="<f4").reshape(counts)
    return DoCTable(NeighborRelation(rel_id), phis, amps, values, res)


def load_or_build_tables(cache_dir, geom: ModuleGeometry,
                         resolution: float = 0.1,
                         regions: dict | None = None) -> DoCTableSet:
    """Read cached tables, building only what is absent.

    A cache file that exists but fails verification (corrupt header, wrong
    geometry) is refused rather than silently replaced; rebuild explicitly
    via the build-tables command after deciding the stale cache is disposable.
    """
    tables = {}
    missing = []
    for rel in (NeighborRelation.PLUS_X, NeighborRelation.PLUS_Y):
        path = table_path(cache_dir, rel)
        if path.exists():
            tables[rel] = read_table(path, geom, resolution)
        else:
            missing.append(rel)
    if missing:
        if regions is None:
            regions = build_regions(geom, resolution)
        for rel in missing:
            tables[rel] = build_doc_table(regions[rel])
            write_table(tables[rel], table_path(cache_dir, rel), geom)
    return DoCTableSet(tables)
