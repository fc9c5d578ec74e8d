"""Monte Carlo engine: repeated trials per scenario and the operating
characteristics derived from them.

Reproducibility contract: every trial's random draws derive from
``(master_seed, scenario_index, replicate_index)`` alone, so results are
bitwise identical no matter how replicates are spread across workers.
"""

from __future__ import annotations

import dataclasses
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import (
    DesignParams,
    StopReason,
    TrialState,
    new_trial,
    next_assignment,
    record_cohort,
)
from .grid import Coord, DoseGrid, adjacent_sets
from .rules import Decision, EquivalenceInterval
from .scenarios import ScenarioMatrix, TrueClassification, classify_truth
from .selection import select_mtdc

__all__ = [
    "SimConfig",
    "TrialResult",
    "OcSummary",
    "OcResult",
    "VARIANTS",
    "apply_variant",
    "trial_streams",
    "run_trial",
    "compute_metrics",
    "selection_frequencies",
    "allocation_fractions",
    "accuracy_index",
    "assignment_index",
    "summarize_scenario",
    "run_oc",
    "oc_to_csv",
    "oc_to_json",
    "oc_long_csv",
]

VARIANTS = ("base", "skip_stage1", "ep_p1", "ep_p2", "modified_rule")


def apply_variant(params: DesignParams, variant: str) -> DesignParams:
    """Return a copy of ``params`` adjusted for a named design variant."""
    if variant == "base":
        return params
    if variant == "skip_stage1":
        return dataclasses.replace(params, skip_stage1=True)
    if variant == "ep_p1":
        return dataclasses.replace(params, path="P1")
    if variant == "ep_p2":
        return dataclasses.replace(params, path="P2")
    if variant == "modified_rule":
        return dataclasses.replace(params, modified_rule=True)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True)
class SimConfig:
    """One simulation campaign: design, scenario list, replicates, seed."""

    params: DesignParams
    scenarios: tuple[ScenarioMatrix, ...]
    n_reps: int = 1000
    master_seed: int = 0
    validate_moves: bool = False

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if not self.scenarios:
            raise ValueError("at least one scenario is required")


@dataclass(frozen=True)
class TrialResult:
    """Outcome of a single simulated trial."""

    selected: Optional[Coord]
    n: tuple[tuple[int, ...], ...]
    y: tuple[tuple[int, ...], ...]
    total: int
    stop_reason: Optional[StopReason]
    dcs_used: int
    violations: tuple[str, ...] = ()


def trial_streams(master_seed: int, scenario_index: int, rep: int):
    """Engine seed and outcome generator for one (scenario, replicate)."""
    root = np.random.SeedSequence(master_seed, spawn_key=(scenario_index, rep))
    engine_seq, outcome_seq = root.spawn(2)
    engine_seed = int(engine_seq.generate_state(1, np.uint64)[0])
    return engine_seed, np.random.default_rng(outcome_seq)


def run_trial(
    scenario: ScenarioMatrix,
    params: DesignParams,
    rng: Optional[np.random.Generator] = None,
    validate: bool = False,
) -> TrialResult:
    """Simulate one full trial under the scenario's true toxicities.

    Each assigned cohort draws its DLT count from a binomial with the
    scenario's probability at the assigned combination; the engine then
    steps until it stops and the MTDC selection runs on the final state.
    With ``validate`` on, every move is audited against the safety
    contract (no excluded assignments, no double-increments, bounded step
    distance, no escalation after a de-escalation decision).
    """
    grid = scenario.grid
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(params.rng_seed, spawn_key=(0xD0,)))
    state = new_trial(grid, params)
    violations: list[str] = []
    prev: Optional[Coord] = None
    while True:
        nxt = next_assignment(state)
        if nxt.coord is None:
            break
        if validate:
            _audit_move(state, prev, nxt, violations)
        dlt = int(rng.binomial(params.cohort_size, scenario.prob(nxt.coord)))
        record_cohort(state, nxt.coord, dlt)
        prev = nxt.coord
    result = select_mtdc(state)
    return TrialResult(
        selected=result.coord,
        n=tuple(tuple(row) for row in state.n),
        y=tuple(tuple(row) for row in state.y),
        total=params.cohort_size * len(state.log),
        stop_reason=state.stop_reason,
        dcs_used=state.dcs_used(),
        violations=tuple(violations),
    )


def _audit_move(state: TrialState, prev, nxt, violations: list[str]) -> None:
    if state.is_excluded(nxt.coord):
        violations.append(f"assignment to excluded {nxt.coord}")
    if prev is not None:
        di, dj = nxt.coord[0] - prev[0], nxt.coord[1] - prev[1]
        if di > 0 and dj > 0:
            violations.append(f"double increment {prev} -> {nxt.coord}")
        limit = 2 if nxt.rule == "explore-ring" else 1
        if max(abs(di), abs(dj)) > limit:
            violations.append(f"step {prev} -> {nxt.coord} beyond distance {limit}")
        if nxt.decision in (Decision.DEESCALATE, Decision.DEESCALATE_UNACCEPTABLE):
            if nxt.coord in adjacent_sets(state.grid, prev).escalate:
                violations.append(f"escalation {prev} -> {nxt.coord} after decision D")


@dataclass(frozen=True)
class OcSummary:
    """Operating characteristics for one scenario."""

    label: str
    n_trials: int
    pcs: float
    pos: float
    pus: float
    avg_nsel: float
    ca: float
    oa: float
    ua: float
    total: float
    accuracy_index: float
    assignment_index: float
    dcs_used: float
    violations: int = 0


_METRICS = (
    "pcs",
    "pos",
    "pus",
    "avg_nsel",
    "ca",
    "oa",
    "ua",
    "total",
    "accuracy_index",
    "assignment_index",
    "dcs_used",
)


def compute_metrics(
    results: Sequence[TrialResult], truth: TrueClassification, label: str = ""
) -> OcSummary:
    """Selection and allocation summaries against the truth partition.

    Correct selection means picking any member of the true MTDC set, or
    picking nothing when that set is empty.  Allocation counts patients
    treated at combinations in each part of the partition.
    """
    if not results:
        raise ValueError("no trial results to summarize")
    n_trials = len(results)
    if truth.mtdc_set:
        pcs = sum(1 for r in results if r.selected in truth.mtdc_set) / n_trials
    else:
        pcs = sum(1 for r in results if r.selected is None) / n_trials
    pos = sum(1 for r in results if r.selected in truth.over_set) / n_trials
    pus = sum(1 for r in results if r.selected in truth.under_set) / n_trials
    avg_nsel = sum(1 for r in results if r.selected is not None) / n_trials

    def patients_at(result: TrialResult, coords) -> int:
        return sum(result.n[i - 1][j - 1] for (i, j) in coords)

    ca = sum(patients_at(r, truth.mtdc_set) for r in results) / n_trials
    oa = sum(patients_at(r, truth.over_set) for r in results) / n_trials
    ua = sum(patients_at(r, truth.under_set) for r in results) / n_trials
    total = sum(r.total for r in results) / n_trials
    dcs_used = sum(r.dcs_used for r in results) / n_trials
    violations = sum(len(r.violations) for r in results)
    return OcSummary(
        label=label,
        n_trials=n_trials,
        pcs=pcs,
        pos=pos,
        pus=pus,
        avg_nsel=avg_nsel,
        ca=ca,
        oa=oa,
        ua=ua,
        total=total,
        accuracy_index=float("nan"),
        assignment_index=float("nan"),
        dcs_used=dcs_used,
        violations=violations,
    )


def selection_frequencies(results: Sequence[TrialResult], grid: DoseGrid) -> np.ndarray:
    """Fraction of trials selecting each combination (no-selection trials
    contribute no mass anywhere)."""
    freq = np.zeros((grid.levels_a, grid.levels_b))
    for r in results:
        if r.selected is not None:
            freq[r.selected[0] - 1][r.selected[1] - 1] += 1.0
    return freq / len(results)


def allocation_fractions(results: Sequence[TrialResult], grid: DoseGrid) -> np.ndarray:
    """Pooled share of all treated patients at each combination."""
    alloc = np.zeros((grid.levels_a, grid.levels_b))
    total = 0
    for r in results:
        alloc += np.asarray(r.n, dtype=float)
        total += r.total
    return alloc / total if total else alloc


def _distance_weighted_index(mass: np.ndarray, probs: np.ndarray, target: float) -> float:
    rho = np.abs(probs - target)
    denom = rho.sum()
    if denom == 0.0:
        return 1.0
    cells = probs.size
    return float(1.0 - cells * (rho * mass).sum() / denom)


def accuracy_index(freq: np.ndarray, probs: np.ndarray, target: float) -> float:
    """Distance-weighted selection quality; 1 is ideal, can go negative."""
    return _distance_weighted_index(freq, np.asarray(probs, dtype=float), target)


def assignment_index(alloc: np.ndarray, probs: np.ndarray, target: float) -> float:
    """Distance-weighted allocation quality over patient shares."""
    return _distance_weighted_index(alloc, np.asarray(probs, dtype=float), target)


def summarize_scenario(
    results: Sequence[TrialResult], scenario: ScenarioMatrix, ei: EquivalenceInterval
) -> OcSummary:
    truth = classify_truth(scenario, ei)
    base = compute_metrics(results, truth, label=scenario.label)
    probs = np.asarray(scenario.probs, dtype=float)
    return dataclasses.replace(
        base,
        accuracy_index=accuracy_index(
            selection_frequencies(results, scenario.grid), probs, ei.target
        ),
        assignment_index=assignment_index(
            allocation_fractions(results, scenario.grid), probs, ei.target
        ),
    )


@dataclass(frozen=True)
class OcResult:
    """Per-scenario summaries plus cross-scenario mean and sd per metric."""

    per_scenario: tuple[OcSummary, ...]
    summary: dict[str, tuple[float, float]]
    n_reps: int
    master_seed: int

    def mean(self, metric: str) -> float:
        return self.summary[metric][0]

    def sd(self, metric: str) -> float:
        return self.summary[metric][1]


def _scenario_task(args) -> OcSummary:
    config, scenario_index = args
    scenario = config.scenarios[scenario_index]
    results = []
    for rep in range(config.n_reps):
        engine_seed, outcome_rng = trial_streams(config.master_seed, scenario_index, rep)
        params = dataclasses.replace(config.params, rng_seed=engine_seed)
        results.append(
            run_trial(scenario, params, outcome_rng, validate=config.validate_moves)
        )
    return summarize_scenario(results, scenario, config.params.ei)


def run_oc(config: SimConfig, workers: Optional[int] = None) -> OcResult:
    """Run the full campaign and aggregate across scenarios.

    Scenarios are independent tasks; aggregation happens in scenario
    order, so the result does not depend on the worker count.
    """
    tasks = [(config, i) for i in range(len(config.scenarios))]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) == 1:
        summaries = [_scenario_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_scenario_task, tasks, chunksize=1))
    summary: dict[str, tuple[float, float]] = {}
    for metric in _METRICS:
        values = np.array([getattr(s, metric) for s in summaries], dtype=float)
        sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        summary[metric] = (float(np.mean(values)), sd)
    return OcResult(
        per_scenario=tuple(summaries),
        summary=summary,
        n_reps=config.n_reps,
        master_seed=config.master_seed,
    )


# -- exports ----------------------------------------------------------------


def oc_to_csv(result: OcResult) -> str:
    buf = io.StringIO()
    buf.write("scenario," + ",".join(_METRICS) + ",violations\n")
    for s in result.per_scenario:
        buf.write(
            s.label
            + ","
            + ",".join(f"{getattr(s, m):.6f}" for m in _METRICS)
            + f",{s.violations}\n"
        )
    buf.write("mean," + ",".join(f"{result.summary[m][0]:.6f}" for m in _METRICS) + ",\n")
    buf.write("sd," + ",".join(f"{result.summary[m][1]:.6f}" for m in _METRICS) + ",\n")
    return buf.getvalue()


def oc_to_json(result: OcResult) -> str:
    return json.dumps(
        {
            "n_reps": result.n_reps,
            "master_seed": result.master_seed,
            "classification_basis": "equivalence-interval truth partition",
            "per_scenario": [dataclasses.asdict(s) for s in result.per_scenario],
            "summary": {m: {"mean": mu, "sd": sd} for m, (mu, sd) in result.summary.items()},
        },
        indent=2,
    )


def oc_long_csv(result: OcResult) -> str:
    """Long-format rows for stacked selection / allocation bar charts."""
    buf = io.StringIO()
    buf.write("scenario,panel,metric,value\n")
    for s in result.per_scenario:
        for metric in ("pus", "pcs", "pos"):
            buf.write(f"{s.label},selection,{metric},{getattr(s, metric):.6f}\n")
        for metric in ("ua", "ca", "oa"):
            buf.write(f"{s.label},allocation,{metric},{getattr(s, metric):.6f}\n")
    return buf.getvalue()
