import math

import numpy as np
import pytest

from holoraft import doc_metric as dm
from holoraft.geometry import (CollisionPolygon, NeighborRelation, PhasePoint,
                               PhaseSegment)
from holoraft.potential_solver import WaveformParams

from .oracles import oracle_doc, random_convex_polygon, sample_point_inside

PX = NeighborRelation.PLUS_X
TWO_PI = 2 * math.pi


def seg(ax, ay, bx, by):
    return PhaseSegment(PhasePoint(ax, ay), PhasePoint(bx, by))


@pytest.fixture(scope="module")
def square():
    return CollisionPolygon(
        np.array([[2.0, 2.0], [4.0, 2.0], [4.0, 4.0], [2.0, 4.0]]), PX, 0.1)


class TestFourCases:
    def test_disjoint(self, square):
        assert dm.segment_polygon_doc(seg(0, 0, 1, 0), square) == \
            pytest.approx(math.sqrt(5.0))

    def test_endpoint_inside(self, square):
        assert dm.segment_polygon_doc(seg(1, 3, 3, 3), square) == \
            pytest.approx(-1.0)

    def test_fully_inside(self, square):
        assert dm.segment_polygon_doc(seg(2.5, 3, 3.5, 3), square) == \
            pytest.approx(-1.5)

    def test_crossing_through(self, square):
        assert dm.segment_polygon_doc(seg(1, 3, 5, 3), square) == \
            pytest.approx(-3.0)

    def test_first_endpoint_inside_mirrors(self, square):
        assert dm.segment_polygon_doc(seg(3, 3, 1, 3), square) == \
            pytest.approx(-1.0)

    def test_degenerate_point_outside(self, square):
        assert dm.segment_polygon_doc(seg(0, 0, 0, 0), square) == \
            pytest.approx(math.sqrt(8.0))

    def test_degenerate_point_inside_is_penetration_depth(self, square):
        assert dm.segment_polygon_doc(seg(3, 2.5, 3, 2.5), square) == \
            pytest.approx(-0.5)

    def test_monotone_severity_when_extending_interior_segment(self, square):
        # Growing a fully-interior segment never increases the DoC.
        prev = dm.segment_polygon_doc(seg(3.0, 3.0, 3.1, 3.0), square)
        for half in (0.2, 0.4, 0.8):
            d = dm.segment_polygon_doc(
                seg(3.0 - half, 3.0, 3.0 + half, 3.0), square)
            assert d <= prev + 1e-12
            prev = d

    def test_matches_shapely_oracle_on_random_fixtures(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            poly = random_convex_polygon(rng)
            a = rng.uniform(-4, 4, 2)
            b = rng.uniform(-4, 4, 2)
            got = dm.segment_polygon_doc(seg(*a, *b),
                                         CollisionPolygon(poly, PX, 0.1))
            want = oracle_doc(a, b, poly)
            assert got == pytest.approx(want, abs=1e-6), (a, b, poly)

    def test_matches_oracle_on_interior_fixtures(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            poly = random_convex_polygon(rng)
            a = sample_point_inside(poly, rng)
            b = sample_point_inside(poly, rng)
            got = dm.segment_polygon_doc(seg(*a, *b),
                                         CollisionPolygon(poly, PX, 0.1))
            want = oracle_doc(a, b, poly)
            assert got == pytest.approx(want, abs=1e-6)


class TestWrapped:
    def test_wrap_reaches_across_seam(self, regions):
        region = regions[PX]
        # The +x region has a lobe near phi_j ~ +2.75; its periodic copy
        # near -3.53 must be seen by a segment living below the seam.
        d_canon = dm.doc_wrapped(seg(0.35, 2.75, 0.45, 2.75), region)
        d_shift = dm.doc_wrapped(seg(0.35, 2.75 - TWO_PI, 0.45, 2.75 - TWO_PI),
                                 region)
        assert d_canon < 0
        assert d_shift == pytest.approx(d_canon, abs=1e-9)

    def test_invariant_under_full_period_shift(self, regions):
        region = regions[PX]
        rng = np.random.default_rng(9)
        for _ in range(50):
            a = rng.uniform(-3, 3, 2)
            b = a + rng.uniform(-4, 4, 2)
            d0 = dm.doc_wrapped(seg(*a, *b), region)
            d1 = dm.doc_wrapped(seg(a[0] + TWO_PI, a[1] + TWO_PI,
                                    b[0] + TWO_PI, b[1] + TWO_PI), region)
            assert d1 == pytest.approx(d0, abs=1e-9)

    def test_far_segment_positive(self, regions):
        # Both tails idle on the far side from each other: large clearance.
        assert dm.doc_wrapped(seg(-1.5, 0.0, -1.6, 0.0), regions[PX]) > 0.5

    def test_equals_min_over_nine_shifted_copies(self, regions):
        # For segments with canonical midpoints, the 3x3 block of shifted
        # copies is the whole story.
        region = regions[PX]
        rng = np.random.default_rng(29)
        for _ in range(100):
            mid = rng.uniform(-math.pi, math.pi, 2)
            half = rng.uniform(-2.6, 2.6, 2)
            s = seg(mid[0] + half[0], mid[1] + half[1],
                    mid[0] - half[0], mid[1] - half[1])
            brute = math.inf
            for kx in (-TWO_PI, 0.0, TWO_PI):
                for ky in (-TWO_PI, 0.0, TWO_PI):
                    shifted = seg(s.a.phi_i - kx, s.a.phi_j - ky,
                                  s.b.phi_i - kx, s.b.phi_j - ky)
                    for poly in region.polygons:
                        brute = min(brute,
                                    dm.segment_polygon_doc(shifted, poly))
            assert dm.doc_wrapped(s, region) == pytest.approx(brute, abs=1e-12)

    def test_mirror_symmetry_within_grid_tolerance(self, regions):
        # The collided set is exactly mirror-symmetric, but the sampled
        # polygon wobbles by up to a grid cell and the along-trajectory
        # metric is discontinuous at tangency (a grazing hit gains the
        # whole approach distance).  Compare signs away from tangency and
        # magnitudes only on the Lipschitz (positive) side.
        region = regions[PX]
        rng = np.random.default_rng(13)
        compared = 0
        for _ in range(200):
            phi_i, phi_j = rng.uniform(-math.pi, math.pi, 2)
            amp_i, amp_j = rng.uniform(-2.6, 2.6, 2)
            d = dm.swim_doc((phi_i, amp_i), (phi_j, amp_j), region)
            d_mirror = dm.swim_doc((math.pi - phi_j, -amp_j),
                                   (math.pi - phi_i, -amp_i), region)
            if min(abs(d), abs(d_mirror)) <= 0.15:
                continue
            compared += 1
            assert (d < 0) == (d_mirror < 0)
            if d > 0 and d_mirror > 0:
                assert d_mirror == pytest.approx(d, abs=0.15)
        assert compared > 100


class TestTable:
    def test_axes_match_contract(self, tables):
        t = tables.tables[PX]
        assert t.phi_axis.shape == (63,)
        assert t.amp_axis.shape == (53,)
        assert t.values.shape == (63, 53, 63, 53)
        assert t.phi_axis[0] == pytest.approx(-math.pi)
        assert t.amp_axis[0] == -2.6 and t.amp_axis[-1] == pytest.approx(2.6)
        assert np.all(np.isfinite(t.values))

    def test_entries_equal_wrapped_doc(self, tables, regions):
        t = tables.tables[PX]
        rng = np.random.default_rng(21)
        for _ in range(50):
            i1, i2 = rng.integers(0, 63, 2)
            a1, a2 = rng.integers(0, 53, 2)
            p_i = WaveformParams(float(t.phi_axis[i1]), float(t.amp_axis[a1]))
            p_j = WaveformParams(float(t.phi_axis[i2]), float(t.amp_axis[a2]))
            want = np.float32(dm.swim_doc(p_i, p_j, regions[PX]))
            assert t.values[i1, a1, i2, a2] == want

    def test_mirror_symmetry_on_sampled_entries(self, tables):
        # Same mirror map as the exact metric, degraded by nearest-cell
        # lookups on both sides, so the comparison stays loose.
        t = tables.tables[PX]
        rng = np.random.default_rng(37)
        agree = 0
        for _ in range(200):
            phi_i, phi_j = rng.uniform(-math.pi, math.pi, 2)
            amp_i, amp_j = rng.uniform(-2.6, 2.6, 2)
            d = t.value((phi_i, amp_i), (phi_j, amp_j))
            d_m = t.value((math.pi - phi_j, -amp_j), (math.pi - phi_i, -amp_i))
            if min(abs(d), abs(d_m)) > 0.25:
                agree += 1
                assert (d < 0) == (d_m < 0)
        assert agree > 100

    def test_zero_amp_deep_inside_negative(self, tables):
        # Centerlines parked inside the collision region, no oscillation.
        assert tables.tables[PX].value((0.4, 0.0), (2.75, 0.0)) < 0

    def test_tails_apart_positive(self, tables):
        assert tables.tables[PX].value((-1.5, 0.0), (0.5, 0.0)) > 0

    def test_phi_index_wraps(self, tables):
        t = tables.tables[PX]
        assert t.phi_index(math.pi - 0.01) == 0  # nearest cell is -pi itself
        assert t.phi_index(-math.pi) == 0
        assert t.phi_index(t.phi_axis[30]) == 30

    def test_negative_relation_view_swaps(self, tables):
        view = tables.view(NeighborRelation.MINUS_X)
        direct = tables.view(PX)
        p, q = (0.3, 1.0), (2.7, -1.2)
        assert view.value(p, q) == direct.value(q, p)


class TestDoCTriple:
    def test_zero_steps_collapse(self, tables):
        view = tables.view(PX)
        t = dm.doc_triple((0.5, 1.0), (-0.5, 1.2), 0.0, 0.0, view)
        assert t.d0 == t.d_phi == t.d_a

    def test_far_params_all_positive(self, tables):
        view = tables.view(PX)
        t = dm.doc_triple((-1.5, 0.0), (0.5, 0.0), 0.1, 0.1, view)
        assert t.d0 > 0 and t.d_phi > 0 and t.d_a > 0

    def test_step_toward_region_reduces_doc(self, tables):
        view = tables.view(PX)
        # Module i sits left of the upper lobe; stepping phi toward it
        # must lower the DoC, stepping away must raise it.
        toward = dm.doc_triple((-0.2, 0.0), (2.75, 0.0), 0.3, 0.0, view)
        away = dm.doc_triple((-0.2, 0.0), (2.75, 0.0), -0.3, 0.0, view)
        assert toward.d_phi < toward.d0
        assert away.d_phi > away.d0

    def test_out_of_range_amplitude(self, tables):
        view = tables.view(PX)
        with pytest.raises(dm.OutOfRange):
            dm.doc_triple((0.0, 2.6), (0.0, 0.0), 0.0, 0.1, view)


class TestCache:
    def test_round_trip_identical(self, tables, geom, tmp_path):
        table = tables.tables[PX]
        path = tmp_path / "t.doct"
        dm.write_table(table, path, geom)
        loaded = dm.read_table(path, geom, table.resolution)
        np.testing.assert_array_equal(loaded.values, table.values)
        assert loaded.relation is table.relation

    def test_bit_identical_rewrite(self, tables, geom, tmp_path):
        table = tables.tables[PX]
        p1, p2 = tmp_path / "a.doct", tmp_path / "b.doct"
        dm.write_table(table, p1, geom)
        dm.write_table(table, p2, geom)
        assert p1.read_bytes() == p2.read_bytes()

    def test_corrupt_version_refused(self, tables, geom, tmp_path):
        path = tmp_path / "t.doct"
        dm.write_table(tables.tables[PX], path, geom)
        raw = bytearray(path.read_bytes())
        raw[4] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(dm.CacheError, match="version"):
            dm.read_table(path)

    def test_bad_magic_refused(self, tables, geom, tmp_path):
        path = tmp_path / "t.doct"
        dm.write_table(tables.tables[PX], path, geom)
        raw = b"XXXX" + path.read_bytes()[4:]
        path.write_bytes(raw)
        with pytest.raises(dm.CacheError, match="magic"):
            dm.read_table(path)

    def test_wrong_geometry_refused(self, tables, geom, tmp_path):
        from holoraft.geometry import ModuleGeometry
        path = tmp_path / "t.doct"
        dm.write_table(tables.tables[PX], path, geom)
        with pytest.raises(dm.CacheError, match="geometry"):
            dm.read_table(path, ModuleGeometry(tail_outer=0.69), 0.1)

    def test_truncated_refused(self, tables, geom, tmp_path):
        path = tmp_path / "t.doct"
        dm.write_table(tables.tables[PX], path, geom)
        path.write_bytes(path.read_bytes()[:-100])
        with pytest.raises(dm.CacheError, match="bytes"):
            dm.read_table(path)
