"""Tests for the dose-combination lattice helpers."""

import pytest

from ci3p3.grid import (
    DoseGrid,
    adjacent_sets,
    dc_distance,
    orderless_untested_ring,
    resolve_path,
    standard_paths,
)


class TestGridBasics:
    def test_contains(self):
        grid = DoseGrid(3, 4)
        assert (1, 1) in grid and (3, 4) in grid
        assert (0, 1) not in grid and (4, 1) not in grid and (1, 5) not in grid

    def test_invalid(self):
        with pytest.raises(ValueError):
            DoseGrid(0, 3)

    @pytest.mark.parametrize(
        "a,b,d", [((3, 3), (3, 4), 1), ((3, 3), (3, 3), 0), ((1, 1), (3, 2), 2), ((2, 5), (4, 1), 4)]
    )
    def test_distance(self, a, b, d):
        assert dc_distance(a, b) == d


class TestAdjacentSets:
    def test_interior(self):
        sets = adjacent_sets(DoseGrid(5, 5), (3, 3))
        assert set(sets.escalate) == {(3, 4), (4, 3)}
        assert set(sets.stay) == {(2, 4), (3, 3), (4, 2)}
        assert set(sets.deescalate) == {(2, 3), (3, 2)}

    def test_origin(self):
        sets = adjacent_sets(DoseGrid(4, 4), (1, 1))
        assert sets.deescalate == ()
        assert set(sets.stay) == {(1, 1)}
        assert set(sets.escalate) == {(1, 2), (2, 1)}

    def test_top_corner(self):
        sets = adjacent_sets(DoseGrid(5, 5), (5, 5))
        assert sets.escalate == ()
        assert set(sets.stay) == {(5, 5)}
        assert set(sets.deescalate) == {(4, 5), (5, 4)}

    def test_off_grid(self):
        with pytest.raises(ValueError):
            adjacent_sets(DoseGrid(3, 3), (4, 1))


class TestPaths:
    def test_5x5(self):
        paths = standard_paths(DoseGrid(5, 5))
        assert paths["P1"] == ((1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (2, 5), (3, 5), (4, 5), (5, 5))
        assert paths["P2"] == ((1, 1), (2, 1), (3, 1), (4, 1), (5, 1), (5, 2), (5, 3), (5, 4), (5, 5))
        assert paths["P3"] == ((1, 1), (2, 1), (2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4), (5, 5))

    def test_3x3_alternating(self):
        assert standard_paths(DoseGrid(3, 3))["P3"] == ((1, 1), (2, 1), (2, 2), (3, 2), (3, 3))

    def test_1x1(self):
        paths = standard_paths(DoseGrid(1, 1))
        assert paths["P1"] == paths["P2"] == paths["P3"] == ((1, 1),)

    def test_rectangular_clamps(self):
        # once agent A tops out, the alternating path climbs agent B only
        assert standard_paths(DoseGrid(2, 4))["P3"] == ((1, 1), (2, 1), (2, 2), (2, 3), (2, 4))

    def test_path_properties_all_grids(self):
        for ia in range(1, 6):
            for jb in range(1, 6):
                grid = DoseGrid(ia, jb)
                for path in standard_paths(grid).values():
                    assert path[0] == (1, 1)
                    assert path[-1] == grid.top
                    for a, b in zip(path, path[1:]):
                        assert sorted((b[0] - a[0], b[1] - a[1])) == [0, 1]

    def test_resolve_by_name_and_explicit(self):
        grid = DoseGrid(3, 3)
        assert resolve_path(grid, "P3") == standard_paths(grid)["P3"]
        explicit = [(1, 1), (1, 2), (1, 3), (2, 3), (3, 3)]
        assert resolve_path(grid, explicit) == tuple(explicit)

    @pytest.mark.parametrize(
        "bad",
        [
            [(1, 2), (1, 3)],  # does not start at origin
            [(1, 1), (2, 2)],  # diagonal step
            [(1, 1), (2, 1)],  # does not reach the top
            [(1, 1), (1, 2), (1, 1), (2, 1)],  # goes back down
        ],
    )
    def test_resolve_rejects(self, bad):
        with pytest.raises(ValueError):
            resolve_path(DoseGrid(2, 2), bad)

    def test_resolve_unknown_name(self):
        with pytest.raises(ValueError):
            resolve_path(DoseGrid(3, 3), "P9")


class TestOrderlessRing:
    def test_two_member_set(self):
        grid = DoseGrid(5, 5)
        members = [(3, 4), (4, 3)]
        tested = set(members)
        ring = orderless_untested_ring(
            grid, members, lambda c: c in tested, lambda c: False
        )
        assert ring == {(2, 5), (5, 2)}

    def test_single_cell_grid(self):
        grid = DoseGrid(1, 1)
        ring = orderless_untested_ring(
            grid, [(1, 1)], lambda c: c == (1, 1), lambda c: False
        )
        assert ring == set()

    def test_partially_tested(self):
        grid = DoseGrid(3, 3)
        tested = {(2, 2), (1, 3)}
        ring = orderless_untested_ring(
            grid, [(2, 2)], lambda c: c in tested, lambda c: False
        )
        assert ring == {(3, 1)}

    def test_excluded_removed(self):
        grid = DoseGrid(3, 3)
        ring = orderless_untested_ring(
            grid, [(2, 2)], lambda c: c == (2, 2), lambda c: c == (3, 1)
        )
        assert ring == {(1, 3)}
