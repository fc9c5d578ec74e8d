"""Dose-combination lattice: coordinates, candidate sets, escalation paths.

Coordinates are 1-based ``(i, j)`` tuples: level ``i`` of agent A paired
with level ``j`` of agent B.  Toxicity is assumed non-decreasing in each
coordinate, so the ordering between two combinations is known only when
one dominates the other componentwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

from .rules import Decision

Coord = tuple[int, int]

__all__ = [
    "Coord",
    "DoseGrid",
    "dc_distance",
    "CandidateSets",
    "adjacent_sets",
    "standard_paths",
    "resolve_path",
    "orderless_untested_ring",
]


@dataclass(frozen=True)
class DoseGrid:
    """An ``levels_a x levels_b`` lattice of dose combinations."""

    levels_a: int
    levels_b: int

    def __post_init__(self) -> None:
        if self.levels_a < 1 or self.levels_b < 1:
            raise ValueError("grid needs at least one level per agent")

    def __contains__(self, coord: Coord) -> bool:
        i, j = coord
        return 1 <= i <= self.levels_a and 1 <= j <= self.levels_b

    @property
    def top(self) -> Coord:
        return (self.levels_a, self.levels_b)

    def coords(self) -> list[Coord]:
        """All combinations, row-major."""
        return [
            (i, j)
            for i in range(1, self.levels_a + 1)
            for j in range(1, self.levels_b + 1)
        ]


def dc_distance(a: Coord, b: Coord) -> int:
    """Chebyshev distance between two combinations."""
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(frozen=True)
class CandidateSets:
    """Adjacent candidate combinations for each up-and-down decision.

    ``escalate`` holds the in-grid neighbors one level up in exactly one
    agent, ``stay`` the current combination plus its orderless
    anti-diagonal neighbors, ``deescalate`` the neighbors one level down
    in exactly one agent.  Exclusion flags are not applied here.
    """

    escalate: tuple[Coord, ...]
    stay: tuple[Coord, ...]
    deescalate: tuple[Coord, ...]

    def for_decision(self, decision: Decision) -> tuple[Coord, ...]:
        if decision is Decision.ESCALATE:
            return self.escalate
        if decision is Decision.STAY:
            return self.stay
        return self.deescalate


_OFFSETS = {
    "escalate": ((1, 0), (0, 1)),
    "stay": ((0, 0), (1, -1), (-1, 1)),
    "deescalate": ((-1, 0), (0, -1)),
}


def adjacent_sets(grid: DoseGrid, coord: Coord) -> CandidateSets:
    """Candidate sets around ``coord``, pruned to the grid, sorted."""
    if coord not in grid:
        raise ValueError(f"{coord} is not on the grid")
    i, j = coord
    out = {}
    for name, offsets in _OFFSETS.items():
        members = [(i + di, j + dj) for di, dj in offsets]
        out[name] = tuple(sorted(c for c in members if c in grid))
    return CandidateSets(**out)


def standard_paths(grid: DoseGrid) -> dict[str, tuple[Coord, ...]]:
    """The three stock escalation paths from (1,1) to the top corner.

    P1 escalates agent B to its top level first, then agent A; P2 is the
    mirror image; P3 alternates single-level increments of the two
    agents, starting with agent A and clamping to whichever dimension
    still has room once the other is exhausted.
    """
    ia, jb = grid.levels_a, grid.levels_b
    p1 = tuple((1, j) for j in range(1, jb + 1)) + tuple((i, jb) for i in range(2, ia + 1))
    p2 = tuple((i, 1) for i in range(1, ia + 1)) + tuple((ia, j) for j in range(2, jb + 1))
    path = [(1, 1)]
    i = j = 1
    bump_a = True
    while (i, j) != (ia, jb):
        if bump_a and i < ia:
            i += 1
        elif not bump_a and j < jb:
            j += 1
        elif i < ia:
            i += 1
        else:
            j += 1
        path.append((i, j))
        bump_a = not bump_a
    return {"P1": p1, "P2": p2, "P3": tuple(path)}


def resolve_path(grid: DoseGrid, path: "str | Iterable[Coord]") -> tuple[Coord, ...]:
    """Resolve a path name (P1/P2/P3) or explicit sequence, validated."""
    if isinstance(path, str):
        paths = standard_paths(grid)
        if path not in paths:
            raise ValueError(f"unknown escalation path {path!r}; expected one of {sorted(paths)}")
        return paths[path]
    seq = tuple((int(i), int(j)) for i, j in path)
    if not seq or seq[0] != (1, 1):
        raise ValueError("escalation path must start at (1, 1)")
    if seq[-1] != grid.top:
        raise ValueError("escalation path must end at the top combination")
    for a, b in zip(seq, seq[1:]):
        di, dj = b[0] - a[0], b[1] - a[1]
        if sorted((di, dj)) != [0, 1]:
            raise ValueError(f"path step {a} -> {b} must raise exactly one agent by one level")
        if b not in grid:
            raise ValueError(f"path member {b} is off the grid")
    return seq


def orderless_untested_ring(
    grid: DoseGrid,
    members: Iterable[Coord],
    is_tested: Callable[[Coord], bool],
    is_excluded: Callable[[Coord], bool],
) -> set[Coord]:
    """Untested combinations orderless to every-member-adjacent positions.

    For each member, take the in-grid coordinates at Chebyshev distance
    at most one whose coordinate increments cancel out (the anti-diagonal
    plus the member itself); keep those never treated and not excluded.
    """
    ring: set[Coord] = set()
    for k, l in members:
        for dp, dq in ((0, 0), (1, -1), (-1, 1)):
            c = (k + dp, l + dq)
            if c in grid and not is_tested(c) and not is_excluded(c):
                ring.add(c)
    return ring
