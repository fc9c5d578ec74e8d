"""Trial state machine for the two-stage combination escalation design.

Stage I runs in along a prespecified escalation path while every decision
is E.  Stage II explores the full lattice: the up-and-down decision at the
current combination selects one of the adjacent candidate sets, and the
next cohort goes to the candidate with the highest posterior probability
of sitting inside the equivalence interval, except where the exploration
rules prefer an untested combination.

The cohort log is the source of truth: a state is fully reconstructible by
replaying the log, and every random choice is a pure function of
``(rng_seed, number of cohorts recorded)``, so recommendations are
idempotent and replays are exact regardless of worker count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import (
    CandidateSets,
    Coord,
    DoseGrid,
    adjacent_sets,
    orderless_untested_ring,
    resolve_path,
)
from .rules import (
    EXCLUSION_MIN_N,
    BetaParams,
    Decision,
    DoseObservation,
    EquivalenceInterval,
    UNIFORM_PRIOR,
    i3p3_decision,
    is_unacceptably_toxic,
    prob_in_interval,
)

__all__ = [
    "Stage",
    "StopReason",
    "DesignParams",
    "CohortRecord",
    "TrialState",
    "Assignment",
    "TrialError",
    "ExcludedDoseError",
    "CapacityError",
    "StateIntegrityError",
    "new_trial",
    "enrolled",
    "apply_exclusion",
    "record_cohort",
    "next_assignment",
    "replay",
    "state_to_dict",
    "state_from_dict",
    "params_to_dict",
    "params_from_dict",
]

STATE_SCHEMA = "ci3p3-trial/1"

MODIFIED_RULE_MIN_N = 12  # optional exploration rule kicks in at this many patients


class Stage(str, Enum):
    RUN_IN = "stage1"
    ADAPTIVE = "stage2"
    STOPPED = "stopped"


class StopReason(str, Enum):
    FIRST_DC_TOXIC = "d11_toxic"
    MAX_N = "max_n"


class TrialError(Exception):
    """State-machine violation (as opposed to bad argument values)."""


class ExcludedDoseError(TrialError):
    """Attempt to treat patients at an excluded combination."""


class CapacityError(TrialError):
    """Attempt to enroll beyond the maximum sample size."""


class StateIntegrityError(TrialError):
    """Persisted state disagrees with replaying its own cohort log."""


@dataclass(frozen=True)
class DesignParams:
    """Everything needed to run one trial, including the RNG seed."""

    ei: EquivalenceInterval = EquivalenceInterval(0.30, 0.05, 0.05)
    cohort_size: int = 3
    max_n: int = 96
    exclusion_threshold: float = 0.95
    working_prior: BetaParams = UNIFORM_PRIOR
    selection_prior: BetaParams = BetaParams(0.005, 0.005)
    path: "str | tuple[Coord, ...]" = "P3"
    skip_stage1: bool = False
    modified_rule: bool = False
    min_selection_n: int = 3
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.cohort_size < 1:
            raise ValueError("cohort size must be positive")
        if self.max_n < 1 or self.max_n % self.cohort_size != 0:
            raise ValueError("max_n must be a positive multiple of the cohort size")
        if not 0.0 < self.exclusion_threshold < 1.0:
            raise ValueError("exclusion threshold must be in (0, 1)")
        if self.min_selection_n < 0:
            raise ValueError("min_selection_n must be non-negative")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 bits")


class RuleTable:
    """Memoized (y, n) -> decision / posterior lookups for one design.

    The lookups depend only on the interval, priors and threshold, so one
    table is shared by every trial run under the same design.
    """

    __slots__ = ("ei", "working_prior", "threshold", "_dec", "_xi", "_toxic")

    def __init__(self, ei: EquivalenceInterval, working_prior: BetaParams, threshold: float):
        self.ei = ei
        self.working_prior = working_prior
        self.threshold = threshold
        self._dec: dict[tuple[int, int], Decision] = {}
        self._xi: dict[tuple[int, int], float] = {}
        self._toxic: dict[tuple[int, int], bool] = {}

    def decision(self, y: int, n: int) -> Decision:
        key = (y, n)
        dec = self._dec.get(key)
        if dec is None:
            dec = i3p3_decision(DoseObservation(n=n, y=y), self.ei)
            self._dec[key] = dec
        return dec

    def unacceptable(self, y: int, n: int) -> bool:
        key = (y, n)
        hit = self._toxic.get(key)
        if hit is None:
            hit = is_unacceptably_toxic(
                DoseObservation(n=n, y=y), self.ei.target, self.threshold, EXCLUSION_MIN_N
            )
            self._toxic[key] = hit
        return hit

    def decision_with_exclusion(self, y: int, n: int) -> Decision:
        if self.unacceptable(y, n):
            return Decision.DEESCALATE_UNACCEPTABLE
        return self.decision(y, n)

    def xi(self, y: int, n: int) -> float:
        key = (y, n)
        val = self._xi.get(key)
        if val is None:
            val = prob_in_interval(DoseObservation(n=n, y=y), self.working_prior, self.ei)
            self._xi[key] = val
        return val


_RULE_TABLES: dict[tuple, RuleTable] = {}


def rule_table(params: DesignParams) -> RuleTable:
    key = (
        params.ei.target,
        params.ei.eps_lower,
        params.ei.eps_upper,
        params.working_prior.alpha,
        params.working_prior.beta,
        params.exclusion_threshold,
    )
    table = _RULE_TABLES.get(key)
    if table is None:
        table = RuleTable(params.ei, params.working_prior, params.exclusion_threshold)
        _RULE_TABLES[key] = table
    return table


@dataclass(frozen=True)
class CohortRecord:
    coord: Coord
    dlt: int
    stage: Stage


class TrialState:
    """Mutable trial container; evolve it only through ``record_cohort``."""

    __slots__ = (
        "grid",
        "params",
        "y",
        "n",
        "excluded",
        "stage",
        "current",
        "log",
        "stop_reason",
        "tables",
        "path",
    )

    def __init__(self, grid: DoseGrid, params: DesignParams):
        self.grid = grid
        self.params = params
        ia, jb = grid.levels_a, grid.levels_b
        self.y = [[0] * jb for _ in range(ia)]
        self.n = [[0] * jb for _ in range(ia)]
        self.excluded = [[False] * jb for _ in range(ia)]
        self.stage = Stage.ADAPTIVE if params.skip_stage1 else Stage.RUN_IN
        self.current: Coord = (1, 1)
        self.log: list[CohortRecord] = []
        self.stop_reason: Optional[StopReason] = None
        self.tables = rule_table(params)
        self.path = resolve_path(grid, params.path)

    # -- cheap accessors -------------------------------------------------

    def counts(self, coord: Coord) -> tuple[int, int]:
        i, j = coord
        return self.y[i - 1][j - 1], self.n[i - 1][j - 1]

    def is_excluded(self, coord: Coord) -> bool:
        return self.excluded[coord[0] - 1][coord[1] - 1]

    def is_tested(self, coord: Coord) -> bool:
        return self.n[coord[0] - 1][coord[1] - 1] > 0

    def observation(self, coord: Coord) -> DoseObservation:
        y, n = self.counts(coord)
        return DoseObservation(n=n, y=y)

    def dcs_used(self) -> int:
        return sum(1 for row in self.n for v in row if v > 0)

    def clone(self) -> "TrialState":
        dup = TrialState.__new__(TrialState)
        dup.grid = self.grid
        dup.params = self.params
        dup.y = [row[:] for row in self.y]
        dup.n = [row[:] for row in self.n]
        dup.excluded = [row[:] for row in self.excluded]
        dup.stage = self.stage
        dup.current = self.current
        dup.log = list(self.log)
        dup.stop_reason = self.stop_reason
        dup.tables = self.tables
        dup.path = self.path
        return dup


def new_trial(grid: DoseGrid, params: DesignParams) -> TrialState:
    return TrialState(grid, params)


def enrolled(state: TrialState) -> int:
    return state.params.cohort_size * len(state.log)


def apply_exclusion(state: TrialState, coord: Coord) -> None:
    """Exclude ``coord`` and every combination at or above it in both agents.

    Excluding (1, 1) terminates the trial with no MTDC selectable.
    """
    if coord not in state.grid:
        raise ValueError(f"{coord} is not on the grid")
    i0, j0 = coord
    for i in range(i0, state.grid.levels_a + 1):
        row = state.excluded[i - 1]
        for j in range(j0, state.grid.levels_b + 1):
            row[j - 1] = True
    if state.excluded[0][0]:
        state.stage = Stage.STOPPED
        state.stop_reason = StopReason.FIRST_DC_TOXIC


def record_cohort(state: TrialState, coord: Coord, dlt: int) -> None:
    """Append one cohort's outcome and evolve stage/exclusion state."""
    params = state.params
    if state.stage is Stage.STOPPED:
        raise TrialError("trial already stopped")
    if coord not in state.grid:
        raise ValueError(f"{coord} is not on the grid")
    if state.is_excluded(coord):
        raise ExcludedDoseError(f"combination {coord} is excluded")
    if not 0 <= dlt <= params.cohort_size:
        raise ValueError(f"DLT count must be in [0, {params.cohort_size}]")
    if enrolled(state) + params.cohort_size > params.max_n:
        raise CapacityError("recording this cohort would exceed the maximum sample size")

    stage_at_entry = state.stage
    i, j = coord
    state.n[i - 1][j - 1] += params.cohort_size
    state.y[i - 1][j - 1] += dlt
    state.log.append(CohortRecord(coord=coord, dlt=dlt, stage=stage_at_entry))
    state.current = coord

    y, n = state.counts(coord)
    if state.tables.unacceptable(y, n):
        apply_exclusion(state, coord)
    if state.stage is Stage.RUN_IN:
        _advance_run_in(state)
    if state.stage is not Stage.STOPPED and enrolled(state) >= params.max_n:
        state.stage = Stage.STOPPED
        state.stop_reason = StopReason.MAX_N


def _advance_run_in(state: TrialState) -> None:
    """Move to stage II unless the run-in can keep escalating along the path."""
    y, n = state.counts(state.current)
    if state.tables.decision_with_exclusion(y, n) is not Decision.ESCALATE:
        state.stage = Stage.ADAPTIVE
        return
    path = state.path
    if state.current not in path:
        state.stage = Stage.ADAPTIVE  # off-path override ends the run-in
        return
    k = path.index(state.current)
    if k + 1 >= len(path) or state.is_excluded(path[k + 1]):
        state.stage = Stage.ADAPTIVE


@dataclass(frozen=True)
class Assignment:
    """Recommendation for the next cohort, or the reason the trial stops.

    ``considered`` carries (coordinate, interval probability) pairs for
    the candidates examined, so callers can surface the reasoning.
    """

    coord: Optional[Coord]
    stop: Optional[StopReason] = None
    decision: Optional[Decision] = None
    rule: str = ""
    considered: tuple[tuple[Coord, float], ...] = ()


def next_assignment(state: TrialState) -> Assignment:
    """Pure recommendation for the next cohort; never mutates ``state``."""
    if state.stage is Stage.STOPPED:
        return Assignment(None, stop=state.stop_reason, rule="stopped")
    if state.is_excluded((1, 1)):
        return Assignment(None, stop=StopReason.FIRST_DC_TOXIC, rule="stopped")
    if enrolled(state) >= state.params.max_n:
        return Assignment(None, stop=StopReason.MAX_N, rule="stopped")
    if not state.log:
        return Assignment((1, 1), rule="first-cohort")
    if state.stage is Stage.RUN_IN:
        return _run_in_next(state)
    return _adaptive_next(state)


def _run_in_next(state: TrialState) -> Assignment:
    y, n = state.counts(state.current)
    dec = state.tables.decision_with_exclusion(y, n)
    # record_cohort only leaves the trial in stage I when escalation along
    # the path can continue, so the successor exists and is open.
    k = state.path.index(state.current)
    nxt = state.path[k + 1]
    return Assignment(nxt, decision=dec, rule="run-in-escalate")


_LADDER = {
    Decision.ESCALATE: (Decision.ESCALATE, Decision.STAY, Decision.DEESCALATE),
    Decision.STAY: (Decision.STAY, Decision.DEESCALATE),
    Decision.DEESCALATE: (Decision.DEESCALATE,),
}

_ADJACENT: dict[tuple[int, int, Coord], CandidateSets] = {}


def cached_adjacent_sets(grid: DoseGrid, coord: Coord) -> CandidateSets:
    key = (grid.levels_a, grid.levels_b, coord)
    sets = _ADJACENT.get(key)
    if sets is None:
        sets = adjacent_sets(grid, coord)
        _ADJACENT[key] = sets
    return sets


def _adaptive_next(state: TrialState) -> Assignment:
    tables = state.tables
    cur = state.current
    y, n = state.counts(cur)
    dec = tables.decision_with_exclusion(y, n)
    effective = Decision.DEESCALATE if dec is Decision.DEESCALATE_UNACCEPTABLE else dec

    sets = cached_adjacent_sets(state.grid, cur)
    candidates: tuple[Coord, ...] = ()
    for step in _LADDER[effective]:
        candidates = tuple(c for c in sets.for_decision(step) if not state.is_excluded(c))
        if candidates:
            break
    if not candidates:
        # De-escalation with nowhere to go: only possible at (1, 1).
        if not state.is_excluded((1, 1)):
            return Assignment((1, 1), decision=dec, rule="floor-stay")
        return Assignment(None, stop=StopReason.FIRST_DC_TOXIC, decision=dec, rule="stopped")

    # Optional exploration rule: with a well-established current dose and a
    # stay decision, prefer candidates never tried before.
    if state.params.modified_rule and dec is Decision.STAY and n >= MODIFIED_RULE_MIN_N:
        untested = [c for c in candidates if not state.is_tested(c)]
        if untested:
            return _pick(state, untested, dec, "modified-explore")

    # When every candidate is tested and individually reads S, jump to an
    # untested combination orderless to the candidate set, if one exists.
    all_stay = all(
        state.is_tested(c) and tables.decision(*state.counts(c)) is Decision.STAY
        for c in candidates
    )
    if all_stay:
        ring = orderless_untested_ring(
            state.grid, candidates, state.is_tested, state.is_excluded
        )
        if ring:
            return _pick(state, sorted(ring), dec, "explore-ring")

    scored = tuple((c, tables.xi(*state.counts(c))) for c in candidates)
    best = max(s for _, s in scored)
    tied = [c for c, s in scored if s == best]
    if len(tied) > 1:
        fewest = min(state.counts(c)[1] for c in tied)
        tied = [c for c in tied if state.counts(c)[1] == fewest]
    if len(tied) == 1:
        return Assignment(tied[0], decision=dec, rule="argmax-xi", considered=scored)
    pick = _pick(state, tied, dec, "argmax-xi-tie")
    return replace(pick, considered=scored)


def _pick(state: TrialState, options: Sequence[Coord], dec: Decision, rule: str) -> Assignment:
    """Uniform choice among ``options`` from the per-cohort seeded stream."""
    options = sorted(options)
    if len(options) == 1:
        return Assignment(options[0], decision=dec, rule=rule)
    rng = cohort_rng(state.params.rng_seed, len(state.log))
    coord = options[int(rng.integers(len(options)))]
    return Assignment(coord, decision=dec, rule=rule)


def cohort_rng(seed: int, cohort_index: int, label: int = 0) -> np.random.Generator:
    """Derived stream for one decision point; same inputs, same draws."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cohort_index, label)))


# -- serialization --------------------------------------------------------


def params_to_dict(params: DesignParams) -> dict:
    path = params.path if isinstance(params.path, str) else [list(c) for c in params.path]
    return {
        "target": params.ei.target,
        "eps_lower": params.ei.eps_lower,
        "eps_upper": params.ei.eps_upper,
        "cohort_size": params.cohort_size,
        "max_n": params.max_n,
        "exclusion_threshold": params.exclusion_threshold,
        "working_prior": [params.working_prior.alpha, params.working_prior.beta],
        "selection_prior": [params.selection_prior.alpha, params.selection_prior.beta],
        "path": path,
        "skip_stage1": params.skip_stage1,
        "modified_rule": params.modified_rule,
        "min_selection_n": params.min_selection_n,
        "rng_seed": params.rng_seed,
    }


_PARAM_KEYS = {
    "target",
    "eps_lower",
    "eps_upper",
    "cohort_size",
    "max_n",
    "exclusion_threshold",
    "working_prior",
    "selection_prior",
    "path",
    "skip_stage1",
    "modified_rule",
    "min_selection_n",
    "rng_seed",
}


def params_from_dict(data: dict) -> DesignParams:
    unknown = set(data) - _PARAM_KEYS
    if unknown:
        raise ValueError(f"unknown design parameter keys: {sorted(unknown)}")
    defaults = DesignParams()
    path = data.get("path", defaults.path)
    if not isinstance(path, str):
        path = tuple((int(i), int(j)) for i, j in path)
    wp = data.get("working_prior")
    sp = data.get("selection_prior")
    return DesignParams(
        ei=EquivalenceInterval(
            float(data.get("target", defaults.ei.target)),
            float(data.get("eps_lower", defaults.ei.eps_lower)),
            float(data.get("eps_upper", defaults.ei.eps_upper)),
        ),
        cohort_size=int(data.get("cohort_size", defaults.cohort_size)),
        max_n=int(data.get("max_n", defaults.max_n)),
        exclusion_threshold=float(
            data.get("exclusion_threshold", defaults.exclusion_threshold)
        ),
        working_prior=BetaParams(*map(float, wp)) if wp else defaults.working_prior,
        selection_prior=BetaParams(*map(float, sp)) if sp else defaults.selection_prior,
        path=path,
        skip_stage1=bool(data.get("skip_stage1", defaults.skip_stage1)),
        modified_rule=bool(data.get("modified_rule", defaults.modified_rule)),
        min_selection_n=int(data.get("min_selection_n", defaults.min_selection_n)),
        rng_seed=int(data.get("rng_seed", defaults.rng_seed)),
    )


def state_to_dict(state: TrialState) -> dict:
    return {
        "schema": STATE_SCHEMA,
        "grid": {"levels_a": state.grid.levels_a, "levels_b": state.grid.levels_b},
        "params": params_to_dict(state.params),
        "stage": state.stage.value,
        "current": list(state.current),
        "stop_reason": state.stop_reason.value if state.stop_reason else None,
        "draw_cursor": len(state.log),
        "dcs": [
            {
                "i": i,
                "j": j,
                "y": state.y[i - 1][j - 1],
                "n": state.n[i - 1][j - 1],
                "excluded": state.excluded[i - 1][j - 1],
            }
            for (i, j) in state.grid.coords()
        ],
        "log": [
            {"dc": list(rec.coord), "dlt": rec.dlt, "stage": rec.stage.value}
            for rec in state.log
        ],
    }


def state_to_json(state: TrialState) -> str:
    return json.dumps(state_to_dict(state), indent=2)


def replay(
    grid: DoseGrid, params: DesignParams, cohorts: Iterable[tuple[Coord, int]]
) -> TrialState:
    """Rebuild a state by re-recording every cohort in order."""
    state = new_trial(grid, params)
    for coord, dlt in cohorts:
        record_cohort(state, coord, dlt)
    return state


def state_from_dict(data: dict) -> TrialState:
    """Rebuild from the cohort log and verify the stored snapshot matches."""
    if data.get("schema") != STATE_SCHEMA:
        raise StateIntegrityError(f"unsupported state schema {data.get('schema')!r}")
    try:
        grid = DoseGrid(int(data["grid"]["levels_a"]), int(data["grid"]["levels_b"]))
        params = params_from_dict(data["params"])
        cohorts = [((int(r["dc"][0]), int(r["dc"][1])), int(r["dlt"])) for r in data["log"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise StateIntegrityError(f"malformed state document: {exc}") from exc
    try:
        state = replay(grid, params, cohorts)
    except TrialError as exc:
        raise StateIntegrityError(f"cohort log does not replay cleanly: {exc}") from exc
    for cell in data.get("dcs", []):
        coord = (int(cell["i"]), int(cell["j"]))
        y, n = state.counts(coord)
        if y != int(cell["y"]) or n != int(cell["n"]) or state.is_excluded(coord) != bool(cell["excluded"]):
            raise StateIntegrityError(
                f"stored snapshot for {coord} disagrees with replaying the cohort log"
            )
    if data.get("stage") != state.stage.value:
        raise StateIntegrityError("stored stage disagrees with replaying the cohort log")
    return state


def state_from_json(text: str) -> TrialState:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateIntegrityError(f"state file is not valid JSON: {exc}") from exc
    return state_from_dict(data)
