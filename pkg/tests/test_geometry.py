import math

import numpy as np
import pytest

from rtmpaint.geometry import (
    ImagingGrid,
    Position,
    SensorLayout,
    default_anchor,
    distance_matrix,
    grid_from_config,
    grid_to_config,
    layout_from_config,
    layout_to_config,
    load_geometry,
    make_layout,
    read_positions_csv,
    sample_source,
    save_geometry,
    source_distances,
    write_positions_csv,
)


class TestPosition:
    def test_z_defaults_to_zero(self):
        assert Position(1.0, 2.0).z == 0.0

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Position(float("nan"), 0.0)
        with pytest.raises(ValueError):
            Position(0.0, float("inf"))

    def test_distance(self):
        assert Position(0, 0).distance_to(Position(3, 4)) == 5.0


class TestMakeLayout:
    def test_circular_radius_from_circumference(self):
        # 50 sensors at 1 m arc spacing close a 50 m circumference
        layout = make_layout("circular", 50, 1.0, Position(25, 25))
        expected_radius = 50 * 1.0 / (2 * math.pi)
        radii = np.linalg.norm(layout.coords[:, :2] - [25, 25], axis=1)
        assert np.allclose(radii, expected_radius, atol=1e-9)
        # oracle: chord-implied arc lengths must sum back to N * spacing
        chords = np.linalg.norm(np.roll(layout.coords, -1, axis=0) - layout.coords, axis=1)
        arcs = 2 * expected_radius * np.arcsin(chords / (2 * expected_radius))
        assert abs(arcs.sum() - 50 * 1.0) < 1e-9
        assert np.allclose(arcs, 1.0, atol=1e-9)

    def test_linear_positions(self):
        layout = make_layout("linear", 3, 1.0, Position(0, 0))
        assert np.array_equal(
            layout.coords, [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
        )

    def test_right_angle_positions(self):
        layout = make_layout("right_angle", 4, 1.0, Position(0, 0))
        assert np.array_equal(
            layout.coords, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 2, 0]]
        )

    @pytest.mark.parametrize("n,n_x_arm", [(1, 1), (2, 1), (3, 2), (5, 3)])
    def test_right_angle_arm_split(self, n, n_x_arm):
        layout = make_layout("right_angle", n, 1.0, Position(0, 0))
        on_x = np.sum(layout.coords[:, 1] == 0)
        assert on_x == n_x_arm
        assert layout.n_channels == n

    def test_consecutive_spacing_along_arms(self):
        layout = make_layout("right_angle", 7, 0.75, Position(2, 3))
        c = layout.coords
        x_arm = c[c[:, 1] == 3]
        y_arm = np.vstack([c[0], c[c[:, 0] == 2][1:]])
        for arm in (x_arm, y_arm):
            gaps = np.linalg.norm(np.diff(arm, axis=0), axis=1)
            assert np.allclose(gaps, 0.75, atol=1e-9)

    def test_deterministic(self):
        a = make_layout("circular", 17, 0.4, Position(1, 2))
        b = make_layout("circular", 17, 0.4, Position(1, 2))
        assert np.array_equal(a.coords, b.coords)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            make_layout("circular", 0, 1.0, Position(0, 0))
        with pytest.raises(ValueError):
            make_layout("linear", 3, -1.0, Position(0, 0))
        with pytest.raises(ValueError):
            make_layout("hexagonal", 3, 1.0, Position(0, 0))

    def test_coincident_sensors_rejected(self):
        with pytest.raises(ValueError, match="coincide"):
            SensorLayout(kind="custom", positions=(Position(0, 0), Position(0, 0)))


class TestSampleSource:
    def test_containment_and_plane(self, rng):
        for _ in range(100):
            p = sample_source(rng, (0, 50, 0, 50))
            assert 0 <= p.x <= 50 and 0 <= p.y <= 50 and p.z == 0.0

    def test_degenerate_extent(self, rng):
        for _ in range(5):
            p = sample_source(rng, (5, 5, 5, 5))
            assert (p.x, p.y, p.z) == (5.0, 5.0, 0.0)

    def test_uniform_mean(self):
        # CLT: mean of 1e4 U[0,50] draws lands within 25 +/- 1.5 (~10 sigma)
        rng = np.random.default_rng(7)
        pts = np.array([[p.x, p.y] for p in (sample_source(rng, (0, 50, 0, 50)) for _ in range(10_000))])
        assert np.all(np.abs(pts.mean(axis=0) - 25.0) < 1.5)

    def test_deterministic_for_seed(self):
        a = sample_source(np.random.default_rng(3), (0, 50, 0, 50))
        b = sample_source(np.random.default_rng(3), (0, 50, 0, 50))
        assert (a.x, a.y) == (b.x, b.y)

    def test_invalid_extent(self, rng):
        with pytest.raises(ValueError):
            sample_source(rng, (10, 0, 0, 50))


class TestImagingGrid:
    def test_point_count_inclusive_endpoints(self):
        grid = ImagingGrid(extent=(0, 50, 0, 50), spacing=1.0)
        assert (grid.nx, grid.ny, grid.n_points) == (51, 51, 2601)

    def test_row_major_enumeration(self):
        grid = ImagingGrid(extent=(0, 2, 0, 1), spacing=1.0)
        expected = [(x, y) for x in (0, 1, 2) for y in (0, 1)]
        assert [(p.x, p.y) for p in grid.points] == [(float(a), float(b)) for a, b in expected]

    def test_validation(self):
        with pytest.raises(ValueError):
            ImagingGrid(extent=(0, 10, 0, 10), spacing=0.0)
        with pytest.raises(ValueError):
            ImagingGrid(extent=(10, 0, 0, 10), spacing=1.0)

    def test_index_of(self):
        grid = ImagingGrid(extent=(0, 4, 0, 4), spacing=1.0)
        j = grid.index_of(Position(2.2, 3.4))
        assert tuple(grid.coords[j][:2]) == (2.0, 3.0)


class TestDistanceMatrix:
    def test_three_four_five(self):
        layout = SensorLayout(kind="custom", positions=(Position(0, 0),))
        grid = ImagingGrid(extent=(3, 3, 4, 4), spacing=1.0)
        dm = distance_matrix(layout, grid)
        assert dm.r.shape == (1, 1)
        assert dm.r[0, 0] == pytest.approx(5.0, abs=1e-12)

    def test_singularity_clamp(self):
        layout = SensorLayout(kind="custom", positions=(Position(1, 1),))
        grid = ImagingGrid(extent=(0, 2, 0, 2), spacing=1.0)
        dm = distance_matrix(layout, grid)
        j = grid.index_of(Position(1, 1))
        assert dm.r[0, j] == 0.5  # 0.5 x grid spacing
        assert dm.r.min() >= dm.r_min > 0

    def test_matches_per_pair_norms(self, rng):
        pts = [Position(float(x), float(y)) for x, y in rng.uniform(0, 9, (2, 2))]
        layout = SensorLayout(kind="custom", positions=tuple(pts))
        grid = ImagingGrid(extent=(0, 2, 0, 0), spacing=1.0)
        dm = distance_matrix(layout, grid)
        assert dm.r.shape == (2, 3)
        for n, s in enumerate(pts):
            for j, g in enumerate(grid.points):
                want = max(s.distance_to(g), 0.5)
                assert dm.r[n, j] == pytest.approx(want, rel=1e-12)

    def test_symmetric_under_role_swap(self):
        layout_a = SensorLayout(kind="custom", positions=(Position(1, 7),))
        grid_a = ImagingGrid(extent=(4, 4, 2, 2), spacing=1.0)
        layout_b = SensorLayout(kind="custom", positions=(Position(4, 2),))
        grid_b = ImagingGrid(extent=(1, 1, 7, 7), spacing=1.0)
        assert distance_matrix(layout_a, grid_a).r[0, 0] == distance_matrix(layout_b, grid_b).r[0, 0]


class TestDefaultAnchors:
    def test_matches_field_conventions(self):
        extent = (0, 50, 0, 50)
        assert default_anchor("circular", extent) == Position(25, 25)
        assert default_anchor("linear", extent) == Position(0.5, 25)
        assert default_anchor("right_angle", extent) == Position(0.5, 0.5)


class TestSerialization:
    def test_generated_layout_roundtrip(self, tmp_path):
        layout = make_layout("circular", 9, 1.25, Position(10, 12))
        grid = ImagingGrid(extent=(0, 20, 0, 22), spacing=2.0)
        path = tmp_path / "geo.json"
        save_geometry(path, layout=layout, grid=grid)
        layout2, grid2 = load_geometry(path)
        assert np.array_equal(layout.coords, layout2.coords)
        assert layout2.kind == "circular"
        assert grid2.extent == grid.extent and grid2.spacing == grid.spacing

    def test_custom_layout_roundtrip(self):
        layout = SensorLayout(kind="custom", positions=(Position(0, 1, 2), Position(3, 4, 5)))
        again = layout_from_config(layout_to_config(layout))
        assert np.array_equal(layout.coords, again.coords)

    def test_config_keys(self):
        cfg = layout_to_config(make_layout("linear", 3, 1.0, Position(0, 25)))
        assert set(cfg) == {"kind", "n_channels", "spacing_m", "anchor_xyz"}
        gcfg = grid_to_config(ImagingGrid(extent=(0, 50, 0, 50), spacing=1.0))
        assert set(gcfg) == {"extent", "grid_spacing_m"}
        assert grid_from_config(gcfg).n_points == 2601

    def test_positions_csv_roundtrip(self, tmp_path):
        layout = make_layout("right_angle", 5, 0.5, Position(0.5, 0.5))
        path = tmp_path / "pos.csv"
        write_positions_csv(path, layout.positions)
        back = read_positions_csv(path)
        assert np.array_equal(layout.coords, np.array([[p.x, p.y, p.z] for p in back]))


def test_source_distances():
    layout = make_layout("linear", 3, 1.0, Position(0, 0))
    d = source_distances(layout, Position(0, 4))
    assert d == pytest.approx([4.0, math.sqrt(17), math.sqrt(20)])
