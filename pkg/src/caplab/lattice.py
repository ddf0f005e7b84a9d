"""Simple-random-walk simulation on Z^d.

Walks are sampled with a counter-based generator (Philox) so that replica
streams derived from (master seed, replica index) are independent and the
results do not depend on how replicas are distributed over workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .sites import PackedSet, SiteSet

MAX_STEPS = 1 << 40  # int64 coordinates cannot overflow below this


def stream(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent RNG stream keyed by (master seed, index path)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(master_seed), *map(int, indices)]))
    )


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(int(seed))


def step_increments(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """(n, d) array of unit steps, each uniform over the 2d neighbors."""
    r = rng.integers(0, 2 * d, size=n)
    inc = np.zeros((n, d), dtype=np.int64)
    axis = r >> 1
    sign = 1 - 2 * (r & 1).astype(np.int64)
    inc[np.arange(n), axis] = sign
    return inc


@dataclass
class WalkRecord:
    """One simulated walk: path S_0..S_n plus derived range structure."""

    d: int
    path: np.ndarray  # (n+1, d) int64
    _fresh: np.ndarray = field(default=None, repr=False)
    _range: SiteSet = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.path) - 1

    @property
    def fresh_flags(self) -> np.ndarray:
        """fresh_flags[k] is True iff S_k was not visited before time k."""
        if self._fresh is None:
            _, first = np.unique(self.path, axis=0, return_index=True)
            flags = np.zeros(len(self.path), dtype=bool)
            flags[first] = True
            self._fresh = flags
        return self._fresh

    @property
    def range(self) -> SiteSet:
        if self._range is None:
            self._range = SiteSet(
                d=self.d, coords=np.unique(self.path, axis=0))
        return self._range

    def local_times(self, horizon: int) -> dict:
        """L_horizon(x): number of i in [0, horizon-1] with S_i = x."""
        if horizon > len(self.path):
            raise ValidationError(
                f"horizon {horizon} exceeds recorded path length {len(self.path)}")
        pts, counts = np.unique(self.path[:horizon], axis=0, return_counts=True)
        return {tuple(p): int(c) for p, c in zip(pts.tolist(), counts.tolist())}

    def local_time_arrays(self, horizon: int):
        """Vectorized form of local_times: (sites, counts)."""
        if horizon > len(self.path):
            raise ValidationError(
                f"horizon {horizon} exceeds recorded path length {len(self.path)}")
        return np.unique(self.path[:horizon], axis=0, return_counts=True)


def sample_walk(d: int, n: int, seed) -> WalkRecord:
    """Sample an n-step simple random walk started at the origin."""
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    if n < 0:
        raise ValidationError(f"step count must be >= 0, got {n}")
    if n > MAX_STEPS:
        raise ValidationError(f"walk length {n} exceeds supported maximum")
    rng = _as_rng(seed)
    path = np.zeros((n + 1, d), dtype=np.int64)
    if n:
        np.cumsum(step_increments(d, n, rng), axis=0, out=path[1:])
    return WalkRecord(d=d, path=path)


def range_window(w: WalkRecord, a: int, b: int) -> SiteSet:
    """Sites visited in the time window [a, b]: {S_a, ..., S_b}."""
    if not (0 <= a <= b <= w.n):
        raise ValidationError(f"window [{a}, {b}] out of bounds for n={w.n}")
    return SiteSet(d=w.d, coords=np.unique(w.path[a:b + 1], axis=0))


def recenter(s: SiteSet, z) -> SiteSet:
    """Translate so that point z maps to the origin (capacity is invariant)."""
    return s.translate(-np.asarray(z, dtype=np.int64))


# ---------------------------------------------------------------------------
# Batched walkers: run many independent walks until they hit a target set,
# leave a ball, or exhaust a horizon. This is the engine behind the escape
# and representation Monte Carlo estimators.

HIT, ESCAPED, CENSORED = 0, 1, 2


def run_until(
    starts: np.ndarray,
    d: int,
    rng: np.random.Generator,
    target: PackedSet | None,
    horizon: int,
    center=None,
    radius2: float | None = None,
    block: int | None = None,
    elements_budget: int = 24_000_000,
):
    """Advance all walkers until a terminal event; return outcome per walker.

    Outcomes: HIT (entered ``target`` at time >= 1), ESCAPED (left the ball
    of squared radius ``radius2`` around ``center``), CENSORED (reached
    ``horizon`` steps first). Walkers are stepped in blocks sized to keep
    temporary arrays within ``elements_budget`` int64 entries.
    """
    starts = np.asarray(starts, dtype=np.int64).reshape(-1, d)
    nw = len(starts)
    outcome = np.full(nw, CENSORED, dtype=np.int8)
    steps_done = np.zeros(nw, dtype=np.int64)
    pos = starts.copy()
    active = np.arange(nw)
    if center is not None:
        center = np.asarray(center, dtype=np.int64)
    while len(active) and horizon > 0:
        if block is None:
            blk = max(64, min(4096, elements_budget // (max(len(active), 1) * d)))
        else:
            blk = block
        blk = int(min(blk, horizon - steps_done[active].min()))
        if blk <= 0:
            break
        na = len(active)
        inc = step_increments(d, na * blk, rng).reshape(na, blk, d)
        traj = np.cumsum(inc, axis=1)
        traj += pos[active][:, None, :]

        flat = traj.reshape(-1, d)
        stop = np.zeros((na, blk), dtype=bool)
        is_hit = np.zeros((na, blk), dtype=bool)
        if target is not None:
            is_hit = target.contains(flat).reshape(na, blk)
            stop |= is_hit
        if radius2 is not None:
            dist2 = ((flat - center).astype(np.float64) ** 2).sum(axis=1)
            stop |= (dist2 >= radius2).reshape(na, blk)

        any_stop = stop.any(axis=1)
        t_first = np.where(any_stop, stop.argmax(axis=1), blk - 1)
        done = active[any_stop]
        if len(done):
            tf = t_first[any_stop]
            outcome[done] = np.where(is_hit[any_stop, tf], HIT, ESCAPED)
            steps_done[done] += tf + 1
        cont = ~any_stop
        pos[active[cont]] = traj[cont, blk - 1, :]
        steps_done[active[cont]] += blk
        active = active[cont]
        over = steps_done[active] >= horizon
        active = active[~over]
    return outcome, steps_done
