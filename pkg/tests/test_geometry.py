import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holoraft.doc_metric import doc_wrapped
from holoraft.geometry import (EmptyRegion, ModuleGeometry, NeighborRelation,
                               PhasePoint, PhaseSegment,
                               build_collision_region, swim_trajectory,
                               tails_collide, wrap_angle)

PX = NeighborRelation.PLUS_X
PY = NeighborRelation.PLUS_Y

angles = st.floats(-10.0, 10.0, allow_nan=False)


class TestTailsCollide:
    def test_head_to_head_collinear_overlap(self, geom):
        assert tails_collide(0.0, math.pi, PX, geom) is True

    def test_pointing_away(self, geom):
        assert tails_collide(math.pi, 0.0, PX, geom) is False

    def test_parallel_verticals(self, geom):
        assert tails_collide(-math.pi / 2, -math.pi / 2, PX, geom) is False

    def test_crossing_tilted_pair(self, geom):
        # Symmetric upward tilts cross between the two hulls.
        assert tails_collide(0.4, math.pi - 0.4, PX, geom) is True

    @given(phi_i=angles, phi_j=angles)
    def test_mirror_symmetry(self, phi_i, phi_j):
        geom = ModuleGeometry()
        assert tails_collide(phi_i, phi_j, PX, geom) == \
            tails_collide(math.pi - phi_j, math.pi - phi_i, PX, geom)

    @given(phi_i=angles, phi_j=angles, m=st.integers(-3, 3), n=st.integers(-3, 3))
    def test_periodicity(self, phi_i, phi_j, m, n):
        geom = ModuleGeometry()
        two_pi = 2 * math.pi
        assert tails_collide(phi_i, phi_j, PX, geom) == \
            tails_collide(phi_i + two_pi * m, phi_j + two_pi * n, PX, geom)

    @given(phi_i=angles, phi_j=angles)
    def test_vertical_is_shifted_horizontal(self, phi_i, phi_j):
        geom = ModuleGeometry()
        assert tails_collide(phi_i, phi_j, PY, geom) == \
            tails_collide(phi_i - math.pi / 2, phi_j - math.pi / 2, PX, geom)

    @given(phi_i=angles, phi_j=angles)
    def test_negative_relation_swaps_roles(self, phi_i, phi_j):
        geom = ModuleGeometry()
        assert tails_collide(phi_i, phi_j, NeighborRelation.MINUS_X, geom) == \
            tails_collide(phi_j, phi_i, PX, geom)

    def test_vectorized_matches_scalar(self, geom):
        rng = np.random.default_rng(3)
        pi = rng.uniform(-4, 4, 50)
        pj = rng.uniform(-4, 4, 50)
        vec = tails_collide(pi, pj, PX, geom)
        for k in range(50):
            assert vec[k] == tails_collide(float(pi[k]), float(pj[k]), PX, geom)


class TestGeometryValidation:
    def test_rejects_inverted_tail(self):
        with pytest.raises(ValueError):
            ModuleGeometry(tail_inner=0.8, tail_outer=0.7)

    def test_rejects_oversized_hull(self):
        with pytest.raises(ValueError):
            ModuleGeometry(hull_radius=0.6)


class TestSwimTrajectory:
    def test_reference_segment(self):
        seg = swim_trajectory((-1.5, 0.5), (2.0, 1.0))
        assert seg.a == PhasePoint(-1.0, 3.0)
        assert seg.b == PhasePoint(-2.0, 1.0)

    def test_zero_amplitude_degenerates(self):
        seg = swim_trajectory((1.0, 0.0), (1.0, 0.0))
        assert seg.a == seg.b == PhasePoint(1.0, 1.0)

    @given(phi_i=angles, amp_i=st.floats(-2.6, 2.6), phi_j=angles,
           amp_j=st.floats(-2.6, 2.6))
    def test_midpoint_is_centerline_pair(self, phi_i, amp_i, phi_j, amp_j):
        seg = swim_trajectory((phi_i, amp_i), (phi_j, amp_j))
        assert seg.midpoint.phi_i == pytest.approx(phi_i)
        assert seg.midpoint.phi_j == pytest.approx(phi_j)


class TestCollisionRegion:
    def test_region_nonempty_and_simple(self, regions):
        region = regions[PX]
        assert len(region.polygons) >= 1
        for poly in region.polygons:
            assert poly.area() > 0  # CCW and non-degenerate
            assert np.all(np.isfinite(poly.vertices))

    def test_head_to_head_point_within_one_cell(self, regions):
        # (0, pi) is the pinch corner of the collided set; the sampled
        # polygons must come within one grid cell of it.
        p = PhasePoint(0.0, math.pi)
        d = doc_wrapped(PhaseSegment(p, p), regions[PX])
        assert d <= 0.1 + 1e-9

    def test_short_tails_raise_empty(self):
        with pytest.raises(EmptyRegion):
            build_collision_region(PX, ModuleGeometry(tail_outer=0.4), 0.1)

    def test_overlong_tails_still_build(self):
        region = build_collision_region(
            PX, ModuleGeometry(tail_outer=1.2, hull_radius=0.4), 0.1)
        assert all(p.area() > 0 for p in region.polygons)

    def test_vertical_region_is_shifted_horizontal(self, geom, regions):
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(400):
            p = rng.uniform(-math.pi, math.pi, 2)
            seg = PhaseSegment(PhasePoint(*p), PhasePoint(*p))
            dx = doc_wrapped(PhaseSegment(
                PhasePoint(p[0] - math.pi / 2, p[1] - math.pi / 2),
                PhasePoint(p[0] - math.pi / 2, p[1] - math.pi / 2)),
                regions[PX])
            dy = doc_wrapped(seg, regions[PY])
            # Compare membership away from the grid-uncertain boundary band.
            if min(abs(dx), abs(dy)) > 0.15:
                checked += 1
                assert (dx < 0) == (dy < 0)
        assert checked > 200

    def test_polygon_soundness_against_predicate(self, geom, regions):
        # Classification agrees with tails_collide except within one grid
        # cell of the region boundary (either the polygon's or the true
        # set's; thin features below the sampling resolution count as
        # boundary zone).
        rng = np.random.default_rng(5)
        pts = rng.uniform(-math.pi, math.pi, (10_000, 2))
        region = regions[PX]
        truth = tails_collide(pts[:, 0], pts[:, 1], PX, geom)
        res = region.resolution
        offsets = np.array([(dx, dy) for dx in (-res, 0, res)
                            for dy in (-res, 0, res)])
        disagreements = 0
        for (pi, pj), is_collided in zip(pts, truth):
            seg = PhaseSegment(PhasePoint(pi, pj), PhasePoint(pi, pj))
            d = doc_wrapped(seg, region)
            if abs(d) <= res:
                continue  # near the polygon boundary
            if (d < 0) == bool(is_collided):
                continue
            near = tails_collide(pi + offsets[:, 0], pj + offsets[:, 1],
                                 PX, geom)
            if near.any() != near.all():
                continue  # near the true boundary
            disagreements += 1
        assert disagreements == 0

    def test_build_deterministic(self, geom):
        r1 = build_collision_region(PX, geom, 0.1)
        r2 = build_collision_region(PX, geom, 0.1)
        assert len(r1.polygons) == len(r2.polygons)
        for p1, p2 in zip(r1.polygons, r2.polygons):
            np.testing.assert_array_equal(p1.vertices, p2.vertices)


@given(st.floats(-50, 50))
def test_wrap_angle_canonical(phi):
    w = float(wrap_angle(phi))
    assert -math.pi <= w < math.pi
    assert math.isclose(math.sin(w), math.sin(phi), abs_tol=1e-9)
    assert math.isclose(math.cos(w), math.cos(phi), abs_tol=1e-9)
