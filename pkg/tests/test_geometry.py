import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import LineString, Point, Polygon

from qcretarget import LabelSet, build_regular_mesh, compute_stripes
from qcretarget.errors import InputError, LabelError
from qcretarget.geometry import (
    BoundaryTag,
    build_region_model,
    faces_for_polygon,
    faces_for_polyline,
    merged_interval_length,
    merged_intervals,
    object_span,
)


class TestBuildRegularMesh:
    def test_2x2_cell_grid_counts(self):
        mesh = build_regular_mesh(2, 2, 9)
        assert mesh.n_vertices == 9
        assert mesh.n_faces == 8
        corners = [t for t in mesh.boundary_tags if BoundaryTag(t).name.startswith("CORNER")]
        assert len(corners) == 4

    def test_all_faces_positively_oriented(self):
        mesh = build_regular_mesh(37, 23, 200)
        assert np.all(mesh.signed_areas() > 0)

    def test_paper_operating_point_vertex_count(self):
        # grid dimensions nearest 1500 for a 615x461 rectangle
        mesh = build_regular_mesh(615, 461, 1500)
        assert 1500 <= mesh.n_vertices <= 1700

    def test_rejects_bad_dimensions(self):
        with pytest.raises(InputError):
            build_regular_mesh(0, 10, 100)
        with pytest.raises(InputError):
            build_regular_mesh(10, -5, 100)
        with pytest.raises(InputError):
            build_regular_mesh(10, 10, 3)

    @settings(max_examples=40, deadline=None)
    @given(
        w=st.floats(2.0, 500.0),
        h=st.floats(2.0, 500.0),
        n=st.integers(4, 800),
    )
    def test_face_areas_tile_the_rectangle(self, w, h, n):
        mesh = build_regular_mesh(w, h, n)
        total = mesh.signed_areas().sum()
        assert abs(total - w * h) <= 1e-12 * w * h
        assert mesh.n_vertices >= n

    def test_structural_validation_passes(self):
        build_regular_mesh(50, 31, 240).validate()

    def test_edge_manifold_counts(self):
        mesh = build_regular_mesh(12, 9, 60)
        v = mesh.vertices
        for (a, b), count in mesh.edge_counts().items():
            on_rim = (
                (v[a, 0] == v[b, 0] == 0)
                or (v[a, 0] == v[b, 0] == mesh.width)
                or (v[a, 1] == v[b, 1] == 0)
                or (v[a, 1] == v[b, 1] == mesh.height)
            )
            assert count == (1 if on_rim else 2)

    def test_boundary_tags_sit_on_their_edges(self):
        mesh = build_regular_mesh(17, 11, 90)
        for i, tag in enumerate(mesh.boundary_tags):
            x, y = mesh.vertices[i]
            if tag == BoundaryTag.LEFT:
                assert x == 0.0 and 0 < y < mesh.height
            elif tag == BoundaryTag.CORNER_TR:
                assert x == mesh.width and y == mesh.height


class TestFacesForPolygon:
    def test_full_rectangle_selects_everything(self):
        mesh = build_regular_mesh(10, 8, 50)
        poly = [(0, 0), (10, 0), (10, 8), (0, 8)]
        assert faces_for_polygon(mesh, poly) == frozenset(range(mesh.n_faces))

    def test_degenerate_polygon_rejected(self):
        mesh = build_regular_mesh(10, 8, 50)
        with pytest.raises(LabelError):
            faces_for_polygon(mesh, [(1, 1), (5, 1), (9, 1)])

    def test_self_intersecting_polygon_rejected(self):
        mesh = build_regular_mesh(10, 8, 50)
        bowtie = [(1, 1), (8, 6), (8, 1), (1, 6)]
        with pytest.raises(LabelError):
            faces_for_polygon(mesh, bowtie)

    def test_left_half_against_shapely_oracle(self):
        # 4x4-cell mesh; polygon covering exactly the left half
        mesh = build_regular_mesh(8, 8, 25)
        assert mesh.grid == (4, 4)
        poly_pts = [(0, 0), (4, 0), (4, 8), (0, 8)]
        got = faces_for_polygon(mesh, poly_pts)

        shape = Polygon(poly_pts)
        boundary = shape.boundary
        expected = set()
        for f in range(mesh.n_faces):
            tri = Polygon(mesh.vertices[mesh.faces[f]])
            centroid = Point(mesh.centroids()[f])
            if shape.contains(centroid) or boundary.intersects(tri):
                expected.add(f)
        assert got == frozenset(expected)
        # the 16 left-half faces are all present
        left = {f for f in range(mesh.n_faces) if mesh.centroids()[f][0] < 4}
        assert left <= got

    def test_complement_covers_all_faces(self):
        mesh = build_regular_mesh(9, 6, 60)
        left = [(0, 0), (5, 0), (5, 6), (0, 6)]
        right = [(5, 0), (9, 0), (9, 6), (5, 6)]
        union = faces_for_polygon(mesh, left) | faces_for_polygon(mesh, right)
        assert union == frozenset(range(mesh.n_faces))


class TestFacesForPolyline:
    def test_row_midline_selects_the_row(self):
        # horizontal segment along the mid-height of the second cell row of a
        # 4x4 grid touches exactly the 8 faces of that row
        mesh = build_regular_mesh(8, 8, 25)
        y = 3.0  # middle of row j=1 (cells 2..4 in y)
        got = faces_for_polyline(mesh, [(0.1, y), (7.9, y)])
        expected = set()
        seg = LineString([(0.1, y), (7.9, y)])
        for f in range(mesh.n_faces):
            if Polygon(mesh.vertices[mesh.faces[f]]).intersects(seg):
                expected.add(f)
        assert got == frozenset(expected)
        assert len(got) == 8

    def test_segment_inside_single_face(self):
        mesh = build_regular_mesh(8, 8, 25)
        got = faces_for_polyline(mesh, [(0.3, 0.5), (0.7, 0.9)])
        assert len(got) == 1

    def test_segment_along_interior_edge_takes_both_faces(self):
        mesh = build_regular_mesh(8, 8, 25)
        # the horizontal grid line y=2 is an interior mesh edge
        got = faces_for_polyline(mesh, [(2.5, 2.0), (3.5, 2.0)])
        seg = LineString([(2.5, 2.0), (3.5, 2.0)])
        expected = {
            f
            for f in range(mesh.n_faces)
            if Polygon(mesh.vertices[mesh.faces[f]]).intersects(seg)
        }
        assert got == frozenset(expected)
        # faces of both adjacent rows are present
        cents = mesh.centroids()[sorted(got)]
        assert (cents[:, 1] < 2).any() and (cents[:, 1] > 2).any()

    def test_too_few_points_rejected(self):
        mesh = build_regular_mesh(8, 8, 25)
        with pytest.raises(LabelError):
            faces_for_polyline(mesh, [(1, 1)])


def _stripes_oracle(mesh, object_faces):
    """Brute-force bounding-box overlap, independent of compute_stripes."""
    fb = mesh.face_bounds()
    sh, sv = set(), set()
    for group in object_faces:
        idx = np.fromiter(group, dtype=int)
        pts = mesh.vertices[mesh.faces[idx]].reshape(-1, 2)
        x0, x1 = pts[:, 0].min(), pts[:, 0].max()
        y0, y1 = pts[:, 1].min(), pts[:, 1].max()
        for f in range(mesh.n_faces):
            if fb[f, 2] < y1 and fb[f, 3] > y0:
                sh.add(f)
            if fb[f, 0] < x1 and fb[f, 1] > x0:
                sv.add(f)
    return frozenset(sh), frozenset(sv)


class TestComputeStripes:
    def test_single_interior_cell(self):
        mesh = build_regular_mesh(8, 8, 25)
        # the two faces of cell (1, 1)
        cell_faces = frozenset(
            f
            for f in range(mesh.n_faces)
            if (2 < mesh.centroids()[f][0] < 4) and (2 < mesh.centroids()[f][1] < 4)
        )
        assert len(cell_faces) == 2
        sh, sv = compute_stripes(mesh, [cell_faces])
        assert (sh, sv) == _stripes_oracle(mesh, [cell_faces])
        # full row band: 8 faces; full column band: 8 faces
        assert len(sh) == 8 and len(sv) == 8
        assert cell_faces <= (sh & sv)

    def test_full_span_object_covers_every_face(self):
        # an object whose extent covers the full width fills the vertical
        # stripe entirely; full height fills the horizontal stripe
        mesh = build_regular_mesh(8, 8, 25)
        cents = mesh.centroids()
        row = frozenset(f for f in range(mesh.n_faces) if 2 < cents[f][1] < 4)
        sh, sv = compute_stripes(mesh, [row])
        assert sv == frozenset(range(mesh.n_faces))
        col = frozenset(f for f in range(mesh.n_faces) if 2 < cents[f][0] < 4)
        sh2, _ = compute_stripes(mesh, [col])
        assert sh2 == frozenset(range(mesh.n_faces))

    def test_two_disjoint_objects_make_two_bands(self):
        mesh = build_regular_mesh(8, 8, 33)
        p, _ = mesh.grid
        a = frozenset({0, 1})  # cell (0, 0)
        top_right = 2 * (mesh.n_faces // 2 - 1)
        b = frozenset({top_right, top_right + 1})  # last cell
        sh, sv = compute_stripes(mesh, [a, b])
        assert (sh, sv) == _stripes_oracle(mesh, [a, b])
        cents = mesh.centroids()
        ys = sorted({float(cents[f][1]) for f in sh})
        mid = mesh.height / 2
        assert min(ys) < mesh.height / 4 and max(ys) > 3 * mesh.height / 4
        assert not any(abs(y - mid) < mesh.height / 8 for y in ys)

    def test_empty_objects_give_empty_stripes(self):
        mesh = build_regular_mesh(8, 8, 25)
        assert compute_stripes(mesh, []) == (frozenset(), frozenset())

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_intersection_contains_objects(self, seed):
        rng = np.random.default_rng(seed)
        mesh = build_regular_mesh(20, 16, 120)
        n = int(rng.integers(1, 12))
        group = frozenset(rng.choice(mesh.n_faces, size=n, replace=False).tolist())
        sh, sv = compute_stripes(mesh, [group])
        assert group <= (sh & sv)


class TestLabelSet:
    def test_round_trip(self):
        doc = {
            "objects": [{"polygon": [[1, 1], [5, 1], [5, 4], [1, 4]]}],
            "lines": [{"polyline": [[0, 2], [7, 2.5]]}],
        }
        labels = LabelSet.from_dict(doc)
        again = LabelSet.from_dict(labels.to_dict())
        for a, b in zip(labels.object_polygons, again.object_polygons):
            assert np.array_equal(a, b)
        for a, b in zip(labels.line_polylines, again.line_polylines):
            assert np.array_equal(a, b)

    def test_flip_inverts_y(self):
        labels = LabelSet.from_dict({"objects": [], "lines": [{"polyline": [[1, 2], [3, 5]]}]})
        flipped = labels.flipped(10.0)
        assert np.allclose(flipped.line_polylines[0], [[1, 8], [3, 5]])

    def test_out_of_range_names_the_vertex(self):
        labels = LabelSet.from_dict(
            {"objects": [{"polygon": [[-5, 0], [5, 0], [5, 5]]}], "lines": []}
        )
        with pytest.raises(LabelError) as err:
            labels.check_bounds(10, 10)
        assert err.value.context["vertex"] == 0
        assert err.value.context["index"] == 0

    def test_malformed_document_rejected(self):
        with pytest.raises(LabelError):
            LabelSet.from_dict({"objects": [{"poly": []}], "lines": []})
        with pytest.raises(LabelError):
            LabelSet.from_dict([1, 2, 3])


class TestRegionModel:
    def test_object_sets_disjoint_and_connected(self):
        mesh = build_regular_mesh(20, 16, 120)
        labels = LabelSet.from_dict(
            {
                "objects": [
                    {"polygon": [[2, 2], [8, 2], [8, 7], [2, 7]]},
                    {"polygon": [[6, 5], [14, 5], [14, 12], [6, 12]]},
                ],
                "lines": [],
            }
        )
        regions = build_region_model(mesh, labels)
        a, b = regions.object_faces
        assert not (a & b)
        assert regions.stripe_h >= regions.objects_union
        assert regions.stripe_v >= regions.objects_union
        assert (regions.stripe_h & regions.stripe_v) >= regions.objects_union

    def test_background_complement(self):
        mesh = build_regular_mesh(20, 16, 120)
        labels = LabelSet.from_dict(
            {
                "objects": [{"polygon": [[4, 4], [10, 4], [10, 9], [4, 9]]}],
                "lines": [{"polyline": [[1, 14], [19, 14]]}],
            }
        )
        regions = build_region_model(mesh, labels)
        expected = (
            frozenset(range(mesh.n_faces))
            - regions.stripe_h
            - regions.stripe_v
            - regions.lines_union
        )
        assert regions.background == expected

    def test_object_span_merges_overlaps(self):
        mesh = build_regular_mesh(40, 30, 300)
        labels = LabelSet.from_dict(
            {
                "objects": [
                    {"polygon": [[5, 5], [15, 5], [15, 10], [5, 10]]},
                    {"polygon": [[10, 12], [20, 12], [20, 18], [10, 18]]},
                ],
                "lines": [],
            }
        )
        regions = build_region_model(mesh, labels)
        w, h = object_span(regions)
        x0 = min(b[0] for b in regions.object_bounds)
        x1 = max(b[1] for b in regions.object_bounds)
        assert w <= x1 - x0 + 1e-9  # merged, not summed


class TestIntervalUnion:
    def test_merged_length(self):
        assert merged_interval_length([(0, 2), (1, 3), (5, 6)]) == pytest.approx(4.0)
        assert merged_interval_length([]) == 0.0

    def test_merged_intervals_touching(self):
        assert merged_intervals([(0, 1), (1, 2)]) == [(0.0, 2.0)]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), max_size=8))
    def test_union_length_matches_numpy_rasterization(self, raw):
        intervals = [(min(a, b), max(a, b)) for a, b in raw if abs(a - b) > 1e-6]
        grid = np.linspace(0, 50, 200_001)
        covered = np.zeros(len(grid) - 1, dtype=bool)
        mids = (grid[:-1] + grid[1:]) / 2
        for lo, hi in intervals:
            covered |= (mids > lo) & (mids < hi)
        approx = covered.sum() * (grid[1] - grid[0])
        assert merged_interval_length(intervals) == pytest.approx(approx, abs=0.01)
