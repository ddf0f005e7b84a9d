"""Capacity decomposition inequalities and the dyadic sandwich.

For finite A, B:

    cap(A) + cap(B) - 2 sum_{x in A, y in B} G(x, y)
        <= cap(A u B) <= cap(A) + cap(B) - cap(A n B).

Splitting a walk at its midpoint and iterating L times sandwiches
cap(R_n) between sums of piece capacities with per-level cross-term
corrections; the pieces inherit the law of shorter ranges, which is what
turns the sandwich into a limit-theorem engine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .green import GreenOracle, cross_term
from .capacity import capacity_exact
from .lattice import WalkRecord, range_window, sample_walk, stream
from .sites import SiteSet


@dataclass
class BoundCheck:
    lhs: float
    rhs: float
    slack: float           # lhs - rhs for lower bound, rhs - lhs for upper
    components: dict


def check_lower_bound(a: SiteSet, b: SiteSet,
                      oracle: GreenOracle) -> BoundCheck:
    """cap(A u B) >= cap(A) + cap(B) - 2 * cross(A, B)."""
    cap_u = capacity_exact(a.union(b), oracle)
    cap_a = capacity_exact(a, oracle)
    cap_b = capacity_exact(b, oracle)
    cross = cross_term(a, b, oracle).value
    rhs = cap_a + cap_b - 2.0 * cross
    return BoundCheck(lhs=cap_u, rhs=rhs, slack=cap_u - rhs,
                      components={"cap_union": cap_u, "cap_a": cap_a,
                                  "cap_b": cap_b, "cross": cross})


def check_upper_bound(a: SiteSet, b: SiteSet,
                      oracle: GreenOracle) -> BoundCheck:
    """cap(A u B) <= cap(A) + cap(B) - cap(A n B), with cap(empty) = 0."""
    cap_u = capacity_exact(a.union(b), oracle)
    cap_a = capacity_exact(a, oracle)
    cap_b = capacity_exact(b, oracle)
    inter = a.intersection(b)
    cap_i = capacity_exact(inter, oracle) if len(inter) else 0.0
    rhs = cap_a + cap_b - cap_i
    return BoundCheck(lhs=cap_u, rhs=rhs, slack=rhs - cap_u,
                      components={"cap_union": cap_u, "cap_a": cap_a,
                                  "cap_b": cap_b, "cap_inter": cap_i})


@dataclass
class SandwichReport:
    """Dyadic decomposition of one path: lower <= cap(R_n) <= upper."""

    n: int
    levels: int
    lower: float
    middle: float
    upper: float
    piece_caps: list = field(default_factory=list)
    per_level_errors: list = field(default_factory=list)  # [level][i]

    @property
    def slack_low(self) -> float:
        return self.middle - self.lower

    @property
    def slack_high(self) -> float:
        return self.upper - self.middle

    def row(self, path_id) -> tuple:
        return (path_id, self.levels, self.lower, self.middle, self.upper,
                self.slack_low, self.slack_high)


def dyadic_decompose(w: WalkRecord, levels: int,
                     oracle: GreenOracle) -> SandwichReport:
    """Split [0, n] dyadically L times; assemble the capacity sandwich.

    Segment [a, b] splits at m = (a + b) // 2, so piece lengths differ by
    at most one. Each level-l block contributes the cross term between the
    ranges of its two halves; pieces are recentered at their left endpoint
    before the capacity solve (translation invariance makes this free).
    """
    n = w.n
    if 2 ** levels > n:
        raise ValidationError(f"2^{levels} pieces exceed walk length {n}")
    middle = capacity_exact(w.range, oracle)

    segments = [(0, n)]
    per_level = []
    for _ in range(levels):
        errs = []
        nxt = []
        for a, b in segments:
            m = (a + b) // 2
            left, right = range_window(w, a, m), range_window(w, m, b)
            errs.append(cross_term(left, right, oracle).value)
            nxt.append((a, m))
            nxt.append((m, b))
        per_level.append(errs)
        segments = nxt

    piece_caps = [capacity_exact(range_window(w, a, b), oracle)
                  for a, b in segments]
    upper = float(sum(piece_caps))
    lower = upper - 2.0 * float(sum(sum(e) for e in per_level))
    return SandwichReport(n=n, levels=levels, lower=lower, middle=middle,
                          upper=upper, piece_caps=piece_caps,
                          per_level_errors=per_level)


@dataclass
class MomentEstimate:
    """Monte Carlo moment of the two-walk cross term at one (d, n, k)."""

    d: int
    n: int
    order: int
    mean: float
    se: float
    replicas: int
    samples: np.ndarray = field(repr=False, default=None)


def cross_term_moment(d: int, n: int, order: int, replicas: int,
                      oracle: GreenOracle, seed=0) -> MomentEstimate:
    """E[(sum_{x in R_n, y in R'_n} G(x, y))^k] over independent walk pairs."""
    if order < 1:
        raise ValidationError("moment order must be >= 1")
    vals = np.empty(replicas)
    for rep in range(replicas):
        rng = stream(seed, rep)
        w1 = sample_walk(d, n, rng)
        w2 = sample_walk(d, n, rng)
        vals[rep] = cross_term(w1.range, w2.range, oracle,
                               seed=int(rep)).value
    powed = vals ** order
    mean = float(powed.mean())
    se = float(powed.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else np.inf
    return MomentEstimate(d=d, n=n, order=order, mean=mean, se=se,
                          replicas=replicas, samples=vals)
