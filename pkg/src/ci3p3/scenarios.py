"""True-toxicity scenarios: built-in suites, the odds-interaction generator,
and ground-truth classification of each combination.

The second suite is generated from five single-agent toxicity curves and
four interaction coefficients: each ordered pair of curves (one for each
agent) combines under an odds-multiplicative interaction, giving the 100
matrices used for the large operating-characteristics study.
"""

from __future__ import annotations

import io
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .grid import Coord, DoseGrid
from .rules import EquivalenceInterval

__all__ = [
    "ScenarioMatrix",
    "combine",
    "SINGLE_AGENT_CURVES",
    "INTERACTION_COEFFS",
    "builtin_study1",
    "builtin_study2",
    "scenario_suite",
    "TrueClassification",
    "classify_truth",
    "classification_histogram",
    "matrix_to_csv",
    "matrix_from_csv",
    "scenario_to_json",
    "scenario_from_json",
]

SCENARIO_SCHEMA = "ci3p3-scenario/1"

CAT_ALL_SAFE = "all_safe"
CAT_ALL_TOXIC = "all_toxic"
CAT_MTDC = "mtdc"
CAT_NO_MTDC = "no_mtdc"


@dataclass(frozen=True)
class ScenarioMatrix:
    """True toxicity probabilities on a dose-combination grid.

    ``reference_mtdcs`` optionally records externally published target
    combinations for cross-checking the classifier.
    """

    label: str
    probs: tuple[tuple[float, ...], ...]
    reference_mtdcs: Optional[frozenset[Coord]] = None

    def __post_init__(self) -> None:
        if not self.probs or not self.probs[0]:
            raise ValueError("scenario matrix must be non-empty")
        width = len(self.probs[0])
        if any(len(row) != width for row in self.probs):
            raise ValueError("scenario matrix must be rectangular")
        for i, row in enumerate(self.probs):
            for j, p in enumerate(row):
                if not 0.0 < p < 1.0:
                    raise ValueError(f"probability at ({i + 1},{j + 1}) must be in (0, 1)")
                if j + 1 < width and row[j + 1] < p - 1e-12:
                    raise ValueError("toxicity must be non-decreasing along agent B levels")
                if i + 1 < len(self.probs) and self.probs[i + 1][j] < p - 1e-12:
                    raise ValueError("toxicity must be non-decreasing along agent A levels")

    @property
    def grid(self) -> DoseGrid:
        return DoseGrid(len(self.probs), len(self.probs[0]))

    def prob(self, coord: Coord) -> float:
        return self.probs[coord[0] - 1][coord[1] - 1]


def combine(
    pa: Sequence[float], pb: Sequence[float], eta: float, label: str = ""
) -> ScenarioMatrix:
    """Merge two single-agent toxicity curves under an odds interaction.

    Independence gives p0 = pa + pb - pa*pb per combination; the joint
    odds are then scaled by exp(eta) (eta < 0 protective, eta > 0
    synergistic) and mapped back to a probability.  A constant odds
    multiplier preserves monotonicity in both agents.
    """
    for name, curve in (("agent A", pa), ("agent B", pb)):
        if any(not 0.0 < p < 1.0 for p in curve):
            raise ValueError(f"{name} toxicities must be in (0, 1)")
        if any(b < a for a, b in zip(curve, curve[1:])):
            raise ValueError(f"{name} toxicities must be non-decreasing")
    scale = math.exp(eta)
    rows = []
    for a in pa:
        row = []
        for b in pb:
            p0 = a + b - a * b
            odds = p0 / (1.0 - p0) * scale
            row.append(odds / (1.0 + odds))
        rows.append(tuple(row))
    return ScenarioMatrix(label=label or f"combined(eta={eta})", probs=tuple(rows))


# Five published single-agent toxicity curves (four dose levels each) and
# the four interaction coefficients that define the 100-scenario suite.
SINGLE_AGENT_CURVES: tuple[tuple[float, ...], ...] = (
    (0.15, 0.30, 0.45, 0.60),
    (0.10, 0.20, 0.30, 0.40),
    (0.08, 0.16, 0.24, 0.44),
    (0.06, 0.12, 0.18, 0.24),
    (0.26, 0.38, 0.50, 0.62),
)

INTERACTION_COEFFS: tuple[float, ...] = (-2.0, -0.2, 0.2, 0.7)


def _pct(rows: Sequence[Sequence[int]]) -> tuple[tuple[float, ...], ...]:
    return tuple(tuple(v / 100.0 for v in row) for row in rows)


_STUDY1 = [
    # (percent matrix, published MTDCs)
    (
        ((4, 8, 12, 16), (10, 14, 18, 22), (16, 20, 24, 28), (22, 26, 30, 34)),
        {(3, 4), (4, 2), (4, 3), (4, 4)},
    ),
    (
        ((2, 4, 6, 8), (5, 7, 9, 11), (8, 10, 12, 14), (11, 13, 15, 17)),
        {(4, 4)},
    ),
    (
        ((10, 20, 30, 40), (25, 35, 45, 55), (40, 50, 60, 70), (55, 65, 75, 85)),
        {(1, 3), (2, 1), (2, 2)},
    ),
    (
        ((44, 48, 52, 56), (50, 54, 58, 62), (56, 60, 64, 68), (62, 66, 70, 74)),
        set(),
    ),
    (
        ((8, 18, 28, 29), (9, 19, 29, 30), (10, 20, 30, 31), (11, 21, 31, 41)),
        {(1, 3), (1, 4), (2, 3), (2, 4), (3, 3), (3, 4), (4, 3)},
    ),
    (
        ((12, 13, 14, 15), (16, 18, 20, 22), (44, 45, 46, 47), (50, 52, 54, 55)),
        {(2, 4)},
    ),
    (
        ((1, 2, 3, 4), (4, 10, 15, 20), (6, 15, 30, 45), (10, 30, 50, 80)),
        {(3, 3), (4, 2)},
    ),
    (
        ((1, 2, 3, 4), (4, 10, 15, 20), (6, 15, 30, 36), (10, 30, 38, 40)),
        {(3, 3), (4, 2)},
    ),
]


def builtin_study1() -> list[ScenarioMatrix]:
    """The eight fixed 4x4 benchmark scenarios."""
    return [
        ScenarioMatrix(
            label=f"study1/sc{k}",
            probs=_pct(rows),
            reference_mtdcs=frozenset(mtdcs) if mtdcs else frozenset(),
        )
        for k, (rows, mtdcs) in enumerate(_STUDY1, start=1)
    ]


def builtin_study2() -> list[ScenarioMatrix]:
    """All 100 generated 4x4 scenarios in stable order.

    Order: agent-A curve major, agent-B curve next, interaction
    coefficient ascending; labels run study2/000 through study2/099.
    """
    out = []
    index = 0
    for ai, pa in enumerate(SINGLE_AGENT_CURVES, start=1):
        for bi, pb in enumerate(SINGLE_AGENT_CURVES, start=1):
            for eta in INTERACTION_COEFFS:
                sc = combine(pa, pb, eta, label=f"study2/{index:03d}")
                out.append(
                    ScenarioMatrix(label=sc.label, probs=sc.probs, reference_mtdcs=None)
                )
                index += 1
    return out


def scenario_suite(name: str) -> list[ScenarioMatrix]:
    if name == "study1":
        return builtin_study1()
    if name == "study2":
        return builtin_study2()
    raise ValueError(f"unknown scenario suite {name!r}; expected study1 or study2")


@dataclass(frozen=True)
class TrueClassification:
    """Partition of the grid into MTDC / overdose / underdose sets.

    ``category`` summarizes the scenario: every combination safe, every
    combination toxic, no MTDC at all, or a normal scenario whose MTDC
    count is ``n_mtdc``.
    """

    mtdc_set: frozenset[Coord]
    over_set: frozenset[Coord]
    under_set: frozenset[Coord]
    category: str
    n_mtdc: int

    def bucket(self) -> str:
        """Histogram bucket: all_safe / 1 / 2 / 3 / >3 / all_toxic."""
        if self.category in (CAT_ALL_SAFE, CAT_ALL_TOXIC, CAT_NO_MTDC):
            return self.category
        return str(self.n_mtdc) if self.n_mtdc <= 3 else ">3"


def classify_truth(matrix: ScenarioMatrix, ei: EquivalenceInterval) -> TrueClassification:
    """Ground-truth partition of the grid for one scenario.

    The MTDC set holds every combination whose true toxicity lies inside
    the interval; when none does, it falls back to the maximal elements
    (componentwise) among combinations below target, so selecting any of
    them counts as correct.  Overdoses are the remaining combinations
    above the interval; everything else is an underdose.
    """
    grid = matrix.grid
    coords = grid.coords()
    inside = [c for c in coords if ei.lower <= matrix.prob(c) <= ei.upper]
    if inside:
        mtdc = set(inside)
    else:
        below = [c for c in coords if matrix.prob(c) < ei.target]
        mtdc = {
            c
            for c in below
            if not any(
                d != c and d[0] >= c[0] and d[1] >= c[1] for d in below
            )
        }
    over = {c for c in coords if c not in mtdc and matrix.prob(c) > ei.upper}
    under = {c for c in coords if c not in mtdc and c not in over}

    if all(matrix.prob(c) < ei.lower for c in coords):
        category = CAT_ALL_SAFE
    elif all(matrix.prob(c) > ei.upper for c in coords):
        category = CAT_ALL_TOXIC
    elif not mtdc:
        category = CAT_NO_MTDC
    else:
        category = CAT_MTDC
    return TrueClassification(
        mtdc_set=frozenset(mtdc),
        over_set=frozenset(over),
        under_set=frozenset(under),
        category=category,
        n_mtdc=len(mtdc),
    )


def classification_histogram(
    matrices: Iterable[ScenarioMatrix], ei: EquivalenceInterval
) -> Counter:
    """Bucket counts across a suite (all_safe / 1 / 2 / 3 / >3 / all_toxic)."""
    hist: Counter = Counter()
    for m in matrices:
        hist[classify_truth(m, ei).bucket()] += 1
    return hist


# -- file formats ----------------------------------------------------------


def matrix_to_csv(matrix: ScenarioMatrix) -> str:
    buf = io.StringIO()
    for row in matrix.probs:
        buf.write(",".join(f"{p:.6f}" for p in row) + "\n")
    return buf.getvalue()


def matrix_from_csv(text: str, label: str = "") -> ScenarioMatrix:
    rows = []
    for line in text.strip().splitlines():
        if not line.strip():
            continue
        rows.append(tuple(float(v) for v in line.split(",")))
    return ScenarioMatrix(label=label or "csv", probs=tuple(rows))


def scenario_to_json(matrix: ScenarioMatrix, ei: Optional[EquivalenceInterval] = None) -> str:
    doc = {
        "schema": SCENARIO_SCHEMA,
        "label": matrix.label,
        "probs": [list(row) for row in matrix.probs],
    }
    if matrix.reference_mtdcs is not None:
        doc["reference_mtdcs"] = sorted(list(c) for c in matrix.reference_mtdcs)
    if ei is not None:
        cls = classify_truth(matrix, ei)
        doc["classification"] = {
            "target": ei.target,
            "interval": [ei.lower, ei.upper],
            "mtdc_set": sorted(list(c) for c in cls.mtdc_set),
            "over_set": sorted(list(c) for c in cls.over_set),
            "under_set": sorted(list(c) for c in cls.under_set),
            "category": cls.category,
            "bucket": cls.bucket(),
        }
    return json.dumps(doc, indent=2)


def scenario_from_json(text: str) -> ScenarioMatrix:
    data = json.loads(text)
    if data.get("schema") != SCENARIO_SCHEMA:
        raise ValueError(f"unsupported scenario schema {data.get('schema')!r}")
    ref = data.get("reference_mtdcs")
    return ScenarioMatrix(
        label=data.get("label", "json"),
        probs=tuple(tuple(float(p) for p in row) for row in data["probs"]),
        reference_mtdcs=frozenset((int(i), int(j)) for i, j in ref) if ref is not None else None,
    )
