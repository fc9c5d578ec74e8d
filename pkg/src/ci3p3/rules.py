"""Interval-based up-and-down decision rules and beta-binomial posteriors.

This is the statistical core shared by every other module: the i3+3-style
rule that classifies the observed toxicity rate at a dose against an
equivalence interval around the target DLT probability, the posterior
probability that a dose's true toxicity lies inside that interval, the
overdose-probability test used for dose exclusion, and the pretabulated
decision table investigators can review before a trial starts.

All functions here are pure and cached; they are safe to call from any
number of workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from scipy.special import betainc

__all__ = [
    "Decision",
    "EquivalenceInterval",
    "DoseObservation",
    "BetaParams",
    "UNIFORM_PRIOR",
    "i3p3_decision",
    "beta_posterior_cdf",
    "prob_in_interval",
    "prob_below_interval",
    "prob_above_interval",
    "prob_exceeds",
    "is_unacceptably_toxic",
    "DecisionTable",
    "decision_table",
]

EXCLUSION_MIN_N = 3  # overdose exclusion never triggers on fewer patients


class Decision(str, Enum):
    """Up-and-down decision for the next cohort.

    ``DEESCALATE_UNACCEPTABLE`` ("DU") additionally removes the current
    dose and everything above it from the trial.
    """

    ESCALATE = "E"
    STAY = "S"
    DEESCALATE = "D"
    DEESCALATE_UNACCEPTABLE = "DU"

    def __str__(self) -> str:
        return self.value

    @property
    def severity(self) -> int:
        """Rank in the safety ordering E < S < D < DU."""
        return _SEVERITY[self]


_SEVERITY = {
    Decision.ESCALATE: 0,
    Decision.STAY: 1,
    Decision.DEESCALATE: 2,
    Decision.DEESCALATE_UNACCEPTABLE: 3,
}


@dataclass(frozen=True)
class EquivalenceInterval:
    """Target DLT probability and the band of rates treated as on-target.

    A dose whose true toxicity probability falls inside
    ``[target - eps_lower, target + eps_upper]`` counts as an MTD(C).
    Both bounds are inclusive.
    """

    target: float
    eps_lower: float = 0.05
    eps_upper: float = 0.05

    def __post_init__(self) -> None:
        if not 0.0 < self.target < 1.0:
            raise ValueError(f"target must be in (0, 1), got {self.target}")
        if self.eps_lower < 0.0 or self.eps_upper < 0.0:
            raise ValueError("interval half-widths must be non-negative")
        if self.target - self.eps_lower <= 0.0:
            raise ValueError("interval lower bound must be positive")
        if self.target + self.eps_upper >= 1.0:
            raise ValueError("interval upper bound must be below 1")

    @property
    def lower(self) -> float:
        return self.target - self.eps_lower

    @property
    def upper(self) -> float:
        return self.target + self.eps_upper


@dataclass(frozen=True)
class DoseObservation:
    """Cumulative outcome at one dose: ``y`` DLTs out of ``n`` patients."""

    n: int
    y: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("patient count must be non-negative")
        if not 0 <= self.y <= self.n:
            raise ValueError(f"DLT count must be in [0, n], got y={self.y}, n={self.n}")


@dataclass(frozen=True)
class BetaParams:
    """Beta prior pseudo-counts (alpha successes, beta failures)."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha <= 0.0 or self.beta <= 0.0:
            raise ValueError("beta parameters must be positive")


UNIFORM_PRIOR = BetaParams(1.0, 1.0)


def i3p3_decision(obs: DoseObservation, ei: EquivalenceInterval) -> Decision:
    """Classify the observed rate against the equivalence interval.

    Returns E when y/n is below the interval, S when it is inside
    (boundaries inclusive), and D when it is above -- except that an
    above-interval rate whose (y-1)/n would fall below the interval also
    yields S, because removing a single DLT would flip the rate from too
    high to too low and staying is the coherent middle ground.
    """
    if obs.n < 1:
        raise ValueError("decision requires at least one treated patient")
    rate = obs.y / obs.n
    if rate < ei.lower:
        return Decision.ESCALATE
    if rate <= ei.upper:
        return Decision.STAY
    if (obs.y - 1) / obs.n < ei.lower:
        return Decision.STAY
    return Decision.DEESCALATE


def beta_posterior_cdf(x: float, alpha: float, beta: float) -> float:
    """Regularized incomplete beta function, clamped to [0, 1] in x."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    return float(betainc(alpha, beta, x))


@lru_cache(maxsize=None)
def _interval_mass(y: int, n: int, a: float, b: float, lo: float, hi: float) -> float:
    post_a, post_b = a + y, b + n - y
    return beta_posterior_cdf(hi, post_a, post_b) - beta_posterior_cdf(lo, post_a, post_b)


@lru_cache(maxsize=None)
def _exceed_mass(y: int, n: int, a: float, b: float, threshold: float) -> float:
    return 1.0 - beta_posterior_cdf(threshold, a + y, b + n - y)


def prob_in_interval(
    obs: DoseObservation, prior: BetaParams, ei: EquivalenceInterval
) -> float:
    """Posterior probability that the true toxicity lies inside the interval.

    Computed under a binomial likelihood with a conjugate beta prior, so
    the posterior is Beta(alpha + y, beta + n - y).  With n = 0 this is
    the prior mass of the interval.
    """
    return _interval_mass(obs.y, obs.n, prior.alpha, prior.beta, ei.lower, ei.upper)


def prob_below_interval(
    obs: DoseObservation, prior: BetaParams, ei: EquivalenceInterval
) -> float:
    """Posterior probability that the true toxicity is below the interval."""
    return beta_posterior_cdf(ei.lower, prior.alpha + obs.y, prior.beta + obs.n - obs.y)


def prob_above_interval(
    obs: DoseObservation, prior: BetaParams, ei: EquivalenceInterval
) -> float:
    """Posterior probability that the true toxicity is above the interval."""
    return 1.0 - beta_posterior_cdf(
        ei.upper, prior.alpha + obs.y, prior.beta + obs.n - obs.y
    )


def prob_exceeds(obs: DoseObservation, prior: BetaParams, target: float) -> float:
    """Posterior probability that the true toxicity exceeds ``target``."""
    return _exceed_mass(obs.y, obs.n, prior.alpha, prior.beta, target)


def is_unacceptably_toxic(
    obs: DoseObservation,
    target: float,
    threshold: float = 0.95,
    min_n: int = EXCLUSION_MIN_N,
    prior: BetaParams = UNIFORM_PRIOR,
) -> bool:
    """Overdose test driving dose exclusion.

    True when at least ``min_n`` patients have been treated and the
    posterior probability of exceeding the target passes ``threshold``.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    return obs.n >= min_n and prob_exceeds(obs, prior, target) > threshold


@dataclass(frozen=True)
class DecisionTable:
    """Pretabulated decisions for every (n, y) up to ``n_max`` patients."""

    ei: EquivalenceInterval
    threshold: float
    n_max: int
    cells: tuple[tuple[Decision, ...], ...]  # cells[n-1][y]

    def decision(self, n: int, y: int) -> Decision:
        if not 1 <= n <= self.n_max:
            raise ValueError(f"n must be in [1, {self.n_max}]")
        if not 0 <= y <= n:
            raise ValueError("y must be in [0, n]")
        return self.cells[n - 1][y]

    def rows(self):
        """Yield (n, y, decision) row-major: n ascending, y ascending."""
        for n in range(1, self.n_max + 1):
            for y in range(n + 1):
                yield n, y, self.cells[n - 1][y]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,y,decision\n")
        for n, y, dec in self.rows():
            buf.write(f"{n},{y},{dec.value}\n")
        return buf.getvalue()

    def to_text(self) -> str:
        """Grid rendering: one column per n, one row per DLT count y."""
        width = max(4, len(str(self.n_max)) + 1)
        header = "y\\n".rjust(4) + "".join(str(n).rjust(width) for n in range(1, self.n_max + 1))
        lines = [header]
        for y in range(self.n_max + 1):
            cells = []
            for n in range(1, self.n_max + 1):
                cells.append((self.cells[n - 1][y].value if y <= n else "").rjust(width))
            lines.append(str(y).rjust(4) + "".join(cells))
        return "\n".join(lines) + "\n"


def decision_table(
    ei: EquivalenceInterval,
    n_max: int,
    threshold: float = 0.95,
    min_n: int = EXCLUSION_MIN_N,
) -> DecisionTable:
    """Build the full decision table, overdose exclusion included.

    The unacceptable-toxicity test is evaluated first; cells it marks
    would otherwise mostly read D, and DU replaces them.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    rows = []
    for n in range(1, n_max + 1):
        row = []
        for y in range(n + 1):
            obs = DoseObservation(n=n, y=y)
            if is_unacceptably_toxic(obs, ei.target, threshold, min_n):
                row.append(Decision.DEESCALATE_UNACCEPTABLE)
            else:
                row.append(i3p3_decision(obs, ei))
        rows.append(tuple(row))
    return DecisionTable(ei=ei, threshold=threshold, n_max=n_max, cells=tuple(rows))
