"""Final MTDC selection: posterior means, bivariate isotonic fit, elimination.

Selection runs once the trial has stopped.  Posterior means under a very
weak beta prior are projected onto the cone of matrices non-decreasing in
both agents (weighted least squares), combinations with too little data or
evidence of excessive toxicity are eliminated, and the survivor whose
fitted estimate sits closest to the target is reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .engine import TrialState, StopReason, cohort_rng
from .grid import Coord
from .rules import DoseObservation, prob_exceeds

__all__ = [
    "pava",
    "bivariate_isotonic",
    "posterior_mean_matrix",
    "MtdcResult",
    "select_mtdc",
    "selection_report",
]

TOO_FEW_PATIENTS = "too_few_patients"
EXCESSIVELY_TOXIC = "excessively_toxic"

# Fitted estimates closer than this are treated as tied.  Must sit above
# the isotonic sweep-convergence noise (< 1e-7) so members of one pooled
# block are always recognized as tied, and far below real distance gaps.
_TIE_TOL = 1e-6


def _pava(target: list[float], w: list[float], k: int) -> list[float]:
    """Pool-adjacent-violators on the first ``k`` entries, preallocated."""
    mv = [0.0] * k  # block means
    mw = [0.0] * k  # block weights
    mc = [0] * k  # block sizes
    top = -1
    for idx in range(k):
        top += 1
        mv[top] = target[idx]
        mw[top] = w[idx]
        mc[top] = 1
        while top > 0 and mv[top - 1] > mv[top]:
            wsum = mw[top - 1] + mw[top]
            mv[top - 1] = (mv[top - 1] * mw[top - 1] + mv[top] * mw[top]) / wsum
            mw[top - 1] = wsum
            mc[top - 1] += mc[top]
            top -= 1
    fit = [0.0] * k
    pos = 0
    for b in range(top + 1):
        v = mv[b]
        for _ in range(mc[b]):
            fit[pos] = v
            pos += 1
    return fit


def pava(values: Sequence[float], weights: Sequence[float]) -> list[float]:
    """Weighted least-squares isotonic (non-decreasing) fit of a sequence.

    Classic pool-adjacent-violators: scan left to right, merging any block
    whose mean drops below its predecessor's into a single weighted-mean
    block until the block means are non-decreasing.
    """
    if len(values) != len(weights):
        raise ValueError("values and weights must have equal length")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    return _pava([float(v) for v in values], [float(w) for w in weights], len(values))


def _iso_core(
    vals: list[float], wts: list[float], nrow: int, ncol: int, tol: float, max_iter: int
) -> list[float]:
    """Dykstra sweeps over the row and column monotone cones, flat storage.

    The pooling step is inlined for speed; ``p``/``q`` hold the usual
    Dykstra correction terms for the two cones.
    """
    size = nrow * ncol
    x = vals[:]
    p = [0.0] * size
    q = [0.0] * size
    span = max(nrow, ncol)
    bv = [0.0] * span
    bw = [0.0] * span
    bc = [0] * span
    tgt = [0.0] * span
    for _ in range(max_iter):
        delta = 0.0
        for i in range(nrow):
            base = i * ncol
            top = -1
            for j in range(ncol):
                tgt[j] = x[base + j] + p[base + j]
                top += 1
                bv[top] = tgt[j]
                bw[top] = wts[base + j]
                bc[top] = 1
                while top > 0 and bv[top - 1] > bv[top]:
                    ws = bw[top - 1] + bw[top]
                    bv[top - 1] = (bv[top - 1] * bw[top - 1] + bv[top] * bw[top]) / ws
                    bw[top - 1] = ws
                    bc[top - 1] += bc[top]
                    top -= 1
            pos = 0
            for blk in range(top + 1):
                v = bv[blk]
                for _rep in range(bc[blk]):
                    k = base + pos
                    p[k] = tgt[pos] - v
                    d = v - x[k]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    x[k] = v
                    pos += 1
        for j in range(ncol):
            top = -1
            for i in range(nrow):
                k = i * ncol + j
                tgt[i] = x[k] + q[k]
                top += 1
                bv[top] = tgt[i]
                bw[top] = wts[k]
                bc[top] = 1
                while top > 0 and bv[top - 1] > bv[top]:
                    ws = bw[top - 1] + bw[top]
                    bv[top - 1] = (bv[top - 1] * bw[top - 1] + bv[top] * bw[top]) / ws
                    bw[top - 1] = ws
                    bc[top - 1] += bc[top]
                    top -= 1
            pos = 0
            for blk in range(top + 1):
                v = bv[blk]
                for _rep in range(bc[blk]):
                    k = pos * ncol + j
                    q[k] = tgt[pos] - v
                    d = v - x[k]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    x[k] = v
                    pos += 1
        if delta < tol:
            break
    return x


def bivariate_isotonic(
    matrix: Sequence[Sequence[float]],
    weights: Sequence[Sequence[float]],
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Weighted L2 projection onto matrices non-decreasing in rows and columns.

    Dykstra's alternating-projections scheme over the two monotone cones:
    each sweep isotonizes every row and every column with the usual
    correction buffers, which converges to the exact joint projection.
    Iteration stops once no entry moves by more than ``tol`` in a sweep.
    """
    vals_rows = [list(map(float, row)) for row in matrix]
    wts_rows = [list(map(float, row)) for row in weights]
    nrow = len(vals_rows)
    ncol = len(vals_rows[0]) if nrow else 0
    if (
        any(len(r) != ncol for r in vals_rows)
        or len(wts_rows) != nrow
        or any(len(r) != ncol for r in wts_rows)
    ):
        raise ValueError("matrix and weights must be rectangular and congruent")
    if any(w <= 0 for row in wts_rows for w in row):
        raise ValueError("weights must be positive")
    if nrow == 0 or ncol == 0:
        return np.zeros((nrow, ncol))
    flat = _iso_core(
        [v for row in vals_rows for v in row],
        [w for row in wts_rows for w in row],
        nrow,
        ncol,
        tol,
        max_iter,
    )
    return np.array(flat).reshape(nrow, ncol)


def posterior_mean_matrix(state: TrialState) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and pseudo-count weight per combination.

    Under a Beta(a, b) prior the mean is (y + a) / (n + a + b) and the
    weight is the posterior pseudo-count n + a + b, so untested
    combinations enter the isotonic fit at the prior mean with almost no
    influence.
    """
    prior = state.params.selection_prior
    ia, jb = state.grid.levels_a, state.grid.levels_b
    means = np.empty((ia, jb))
    wts = np.empty((ia, jb))
    denom0 = prior.alpha + prior.beta
    for i in range(ia):
        for j in range(jb):
            means[i][j] = (state.y[i][j] + prior.alpha) / (state.n[i][j] + denom0)
            wts[i][j] = state.n[i][j] + denom0
    return means, wts


@dataclass(frozen=True)
class MtdcResult:
    """Outcome of MTDC selection with the full diagnostic trail."""

    coord: Optional[Coord]
    raw_means: tuple[tuple[float, ...], ...]
    fitted: tuple[tuple[float, ...], ...]
    eliminated: dict[Coord, tuple[str, ...]]
    stop_reason: Optional[StopReason]
    tied: tuple[Coord, ...] = ()


# Sweep tolerance for in-trial selection: deviation from full convergence
# is below 1e-6, orders of magnitude under any decision-relevant margin.
_SELECT_FIT_TOL = 1e-7


@lru_cache(maxsize=65_536)
def _fitted_for_counts(
    counts: tuple[tuple[tuple[int, int], ...], ...], alpha: float, beta: float
) -> tuple[tuple[float, ...], ...]:
    """Isotonic fit keyed by the (y, n) grid; simulated trials repeat grids."""
    denom0 = alpha + beta
    means = [[(y + alpha) / (n + denom0) for (y, n) in row] for row in counts]
    wts = [[n + denom0 for (_, n) in row] for row in counts]
    fitted = bivariate_isotonic(means, wts, tol=_SELECT_FIT_TOL)
    return tuple(tuple(row) for row in fitted.tolist())


def select_mtdc(state: TrialState) -> MtdcResult:
    """Pick the MTDC from a stopped trial, or nothing when none qualifies."""
    params = state.params
    prior = params.selection_prior
    counts_key = tuple(
        tuple((state.y[i][j], state.n[i][j]) for j in range(state.grid.levels_b))
        for i in range(state.grid.levels_a)
    )
    fit_t = _fitted_for_counts(counts_key, prior.alpha, prior.beta)
    fitted = np.asarray(fit_t)
    denom0 = prior.alpha + prior.beta
    raw_t = tuple(
        tuple((y + prior.alpha) / (n + denom0) for (y, n) in row) for row in counts_key
    )

    if state.stop_reason is StopReason.FIRST_DC_TOXIC:
        return MtdcResult(None, raw_t, fit_t, {}, state.stop_reason)

    eliminated: dict[Coord, tuple[str, ...]] = {}
    survivors: list[Coord] = []
    for coord in state.grid.coords():
        y, n = state.counts(coord)
        reasons = []
        if n <= params.min_selection_n:
            reasons.append(TOO_FEW_PATIENTS)
        overdose = (
            n > 0
            and prob_exceeds(DoseObservation(n=n, y=y), params.working_prior, params.ei.target)
            > params.exclusion_threshold
        )
        if overdose or fitted[coord[0] - 1][coord[1] - 1] > params.ei.upper:
            reasons.append(EXCESSIVELY_TOXIC)
        if reasons:
            eliminated[coord] = tuple(reasons)
        else:
            survivors.append(coord)

    if not survivors:
        return MtdcResult(None, raw_t, fit_t, eliminated, state.stop_reason)

    target = params.ei.target
    dist = {c: abs(fitted[c[0] - 1][c[1] - 1] - target) for c in survivors}
    best = min(dist.values())
    tied = sorted(c for c in survivors if dist[c] - best <= _TIE_TOL)
    choice = _break_ties(state, tied, fitted, target)
    return MtdcResult(choice, raw_t, fit_t, eliminated, state.stop_reason, tied=tuple(tied))


def _break_ties(
    state: TrialState, tied: list[Coord], fitted: np.ndarray, target: float
) -> Coord:
    """Directional tie-breaking, then a seeded uniform pick if needed.

    Tied combinations sharing a row (or column) collapse to one: the
    highest level when the tied estimate is below target, the lowest when
    above.  Ties that survive across distinct rows and columns are broken
    uniformly at random from a stream derived from the trial seed, so the
    result is reproducible and repeat calls agree.
    """
    if len(tied) == 1:
        return tied[0]

    def directional(group: list[Coord], axis: int) -> Coord:
        value = fitted[group[0][0] - 1][group[0][1] - 1]
        pick_high = value < target
        key = lambda c: c[axis]
        return max(group, key=key) if pick_high else min(group, key=key)

    by_row: dict[int, list[Coord]] = {}
    for c in tied:
        by_row.setdefault(c[0], []).append(c)
    stage1 = sorted(directional(group, axis=1) for group in by_row.values())
    by_col: dict[int, list[Coord]] = {}
    for c in stage1:
        by_col.setdefault(c[1], []).append(c)
    stage2 = sorted(directional(group, axis=0) for group in by_col.values())
    if len(stage2) == 1:
        return stage2[0]
    rng = cohort_rng(state.params.rng_seed, len(state.log), label=1)
    return stage2[int(rng.integers(len(stage2)))]


def selection_report(result: MtdcResult) -> dict:
    """JSON-ready report: raw and fitted estimates, eliminations, choice."""
    return {
        "selected": list(result.coord) if result.coord else None,
        "stop_reason": result.stop_reason.value if result.stop_reason else None,
        "raw_means": [list(row) for row in result.raw_means],
        "isotonic_means": [list(row) for row in result.fitted],
        "eliminated": [
            {"dc": list(coord), "reasons": list(reasons)}
            for coord, reasons in sorted(result.eliminated.items())
        ],
        "tied": [list(c) for c in result.tied],
    }


def selection_report_csv(result: MtdcResult) -> str:
    """Flat CSV: one row per combination with estimates and status."""
    lines = ["i,j,raw_mean,isotonic_mean,status"]
    nrow = len(result.raw_means)
    ncol = len(result.raw_means[0]) if nrow else 0
    for i in range(1, nrow + 1):
        for j in range(1, ncol + 1):
            coord = (i, j)
            if result.coord == coord:
                status = "selected"
            elif coord in result.eliminated:
                status = "+".join(result.eliminated[coord])
            else:
                status = "candidate"
            lines.append(
                f"{i},{j},{result.raw_means[i - 1][j - 1]:.6f},"
                f"{result.fitted[i - 1][j - 1]:.6f},{status}"
            )
    return "\n".join(lines) + "\n"
