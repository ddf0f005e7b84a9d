"""Monte Carlo campaigns over random-walk range capacities.

Each driver samples independent walks, estimates cap(R_n) over an n-grid
with a pluggable backend, and fits the scaling quantity of interest:
cap/n levels (law of large numbers), variance slopes, normality
diagnostics, and the slow-convergence d=3 / d=4 asymptotics.

Seeding contract: replica r at horizon n inside campaign `tag` draws from
stream(master, tag, n, r). Workers only partition the replica index set,
so worker count cannot change any number.
"""

from __future__ import annotations

import json
import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .capacity import (capacity_escape_mc, capacity_exact,
                       capacity_representation_mc, capacity_variational)
from .config import RunConfig, atomic_write, clear_partial, mark_partial, \
    ARTIFACT_VERSION
from .errors import ValidationError
from .gates import Gates, default_gates
from .green import GreenOracle, default_oracle
from .lattice import sample_walk, stream
from .sites import box_of, pack_keys
from .stats import (batch_stats, fit_line, fit_loglog, fit_through_origin,
                    fourth_moment_ratio, normality_ks)

# campaign tags keep seed streams disjoint across drivers sharing a master seed
TAG_LLN, TAG_VAR, TAG_CLT, TAG_D4, TAG_D3, TAG_NONINT, TAG_CONJ = range(1, 8)


# ---------------------------------------------------------------------------
# replica scheduling

_WORK: dict = {}


def _pool_entry(rep: int):
    return _WORK["fn"](rep)


def _replica_map(fn, count: int, workers: int) -> list:
    """Order-preserving map over replica indices, optionally forked.

    The callable is published through a module global before forking, so
    children inherit it (and any oracle it closes over) without pickling.
    """
    if workers <= 1 or count <= 1:
        return [fn(r) for r in range(count)]
    _WORK["fn"] = fn
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, count // (4 * workers))
    try:
        with ProcessPoolExecutor(workers, mp_context=ctx) as ex:
            return list(ex.map(_pool_entry, range(count), chunksize=chunk))
    finally:
        _WORK.pop("fn", None)


# ---------------------------------------------------------------------------
# capacity backend dispatch

def _aux_horizon(d: int, n: int, gates: Gates) -> int:
    key = f"backends.aux_horizon_multiplier_d{d}"
    try:
        mult = gates[key]
    except ValidationError:
        mult = gates["backends.aux_horizon_multiplier"]
    return max(int(mult) * n, 1000)


def walk_capacity(w, oracle: GreenOracle, backend: str, rng,
                  gates: Gates | None = None):
    """Capacity of one walk's range; returns (value, bias_bound, backend)."""
    gates = gates or default_gates()
    r = w.range
    if backend == "auto":
        backend = ("exact" if len(r) <= gates["backends.iterative_limit"]
                   else "representation")
    if backend == "exact":
        return capacity_exact(r, oracle), 0.0, "exact"
    if backend == "variational":
        res = capacity_variational(r, oracle)
        return res.bound, 0.0, "variational"
    if backend == "escape":
        est = capacity_escape_mc(r, oracle,
                                 trials_per_site=gates["backends.escape_trials"],
                                 seed=rng)
        return est.estimate, est.bias_bound, "escape"
    if backend == "representation":
        est = capacity_representation_mc(
            w, _aux_horizon(w.d, w.n, gates), trials=1, oracle=oracle,
            seed=rng, time_sample=gates["backends.time_sample"])
        return est.estimate, est.bias_bound, "representation"
    raise ValidationError(f"unknown capacity backend {backend!r}")


def _cap_samples(d, n, replicas, backend, seed, tag, oracle, gates, workers):
    """Independent cap(R_n) samples, one per replica stream."""
    def one(rep):
        rng = stream(seed, tag, n, rep)
        w = sample_walk(d, n, rng)
        return walk_capacity(w, oracle, backend, rng, gates)

    rows = _replica_map(one, replicas, workers)
    caps = np.array([r[0] for r in rows])
    bias = max((r[1] for r in rows), default=0.0)
    return caps, bias, rows[0][2] if rows else backend


# ---------------------------------------------------------------------------
# reports

@dataclass
class GridPoint:
    d: int
    n: int
    replicas: int
    mean: float
    var: float
    se_mean: float
    se_var: float
    backend: str
    bias_bound: float
    seed: int

    CSV_HEADER = "d,n,replicas,mean,var,se_mean,se_var,backend,bias_bound,seed"

    def csv_row(self) -> str:
        return (f"{self.d},{self.n},{self.replicas},{self.mean!r},"
                f"{self.var!r},{self.se_mean!r},{self.se_var!r},"
                f"{self.backend},{self.bias_bound!r},{self.seed}")


@dataclass
class EstimateReport:
    d: int
    n_grid: list
    points: list
    fits: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    seed: int = 0
    config_hash: str = ""
    notes: list = field(default_factory=list)

    @property
    def means(self):
        return np.array([p.mean for p in self.points])

    @property
    def se_means(self):
        return np.array([p.se_mean for p in self.points])

    def csv_text(self) -> str:
        head = [f"# config_hash={self.config_hash}",
                f"# version={ARTIFACT_VERSION}",
                f"# seed={self.seed}",
                GridPoint.CSV_HEADER]
        return "\n".join(head + [p.csv_row() for p in self.points]) + "\n"

    def summary(self) -> dict:
        return {"d": self.d, "n_grid": list(self.n_grid),
                "fits": self.fits, "extras": self.extras,
                "seed": self.seed, "config_hash": self.config_hash,
                "version": ARTIFACT_VERSION, "notes": self.notes}

    def plot_text(self, y=None, yerr=None) -> str:
        y = self.means if y is None else np.asarray(y)
        yerr = self.se_means if yerr is None else np.asarray(yerr)
        lines = [f"{n} {v!r} {e!r}"
                 for n, v, e in zip(self.n_grid, y, yerr)]
        return "\n".join(lines) + "\n"


def _grid_point(d, n, caps, backend, bias, seed) -> GridPoint:
    reps = len(caps)
    if reps >= 2 * 20:
        bs = batch_stats(caps)
        mean, se_mean, batches = bs.mean, bs.se, bs.batches
        size = reps // batches
        bvars = caps[:size * batches].reshape(batches, size).var(ddof=1, axis=1)
        se_var = float(bvars.std(ddof=1) / np.sqrt(batches))
    else:
        mean = float(caps.mean())
        se_mean = float(caps.std(ddof=1) / np.sqrt(reps)) if reps > 1 else np.inf
        se_var = np.inf
    var = float(caps.var(ddof=1)) if reps > 1 else 0.0
    return GridPoint(d=d, n=n, replicas=reps, mean=mean, var=var,
                     se_mean=se_mean, se_var=se_var, backend=backend,
                     bias_bound=bias, seed=seed)


# ---------------------------------------------------------------------------
# campaign drivers

def run_lln(d, n_grid, replicas, seed=0, backend="auto", oracle=None,
            workers=1, gates=None, keep_samples=False) -> EstimateReport:
    """E[cap(R_n)]/n over the grid; the level at the top is alpha_hat."""
    if d < 3:
        raise ValidationError(f"capacity requires d >= 3, got {d}")
    oracle = oracle or default_oracle(d)
    gates = gates or default_gates()
    n_grid = sorted(n_grid)
    points, samples = [], {}
    for n in n_grid:
        caps, bias, used = _cap_samples(d, n, replicas, backend, seed,
                                        TAG_LLN, oracle, gates, workers)
        points.append(_grid_point(d, n, caps, used, bias, seed))
        if keep_samples:
            samples[n] = caps
    rep = EstimateReport(d=d, n_grid=n_grid, points=points, seed=seed)
    ratios = rep.means / np.array(n_grid)
    ratio_se = rep.se_means / np.array(n_grid)
    top = len(n_grid) - 1
    rep.fits = {
        "ratios": ratios.tolist(),
        "ratio_se": ratio_se.tolist(),
        # mirrors the inf-representation of the limit constant
        "running_min": np.minimum.accumulate(ratios).tolist(),
        "alpha_hat": float(ratios[top]),
        "alpha_ci": [float(ratios[top] - 1.96 * ratio_se[top]),
                     float(ratios[top] + 1.96 * ratio_se[top])],
        "flatness_top_two": float(abs(ratios[-1] - ratios[-2]) / ratios[-1])
        if len(n_grid) > 1 and ratios[-1] > 0 else np.nan,
        "first_over_last": float(ratios[0] / ratios[-1])
        if ratios[-1] > 0 else np.inf,
    }
    if keep_samples:
        rep.extras["samples"] = {int(k): v for k, v in samples.items()}
    return rep


def run_variance(d, n_grid, replicas, seed=0, backend="auto", oracle=None,
                 workers=1, gates=None) -> EstimateReport:
    """Var(cap(R_n)) over the grid; through-origin slope is gamma_hat."""
    oracle = oracle or default_oracle(d)
    gates = gates or default_gates()
    n_grid = sorted(n_grid)
    points = []
    for n in n_grid:
        caps, bias, used = _cap_samples(d, n, replicas, backend, seed,
                                        TAG_VAR, oracle, gates, workers)
        points.append(_grid_point(d, n, caps, used, bias, seed))
    rep = EstimateReport(d=d, n_grid=n_grid, points=points, seed=seed)
    variances = np.array([p.var for p in points])
    se_vars = np.array([p.se_var for p in points])
    w = 1.0 / np.where(np.isfinite(se_vars) & (se_vars > 0), se_vars, 1.0) ** 2
    fit = fit_through_origin(np.array(n_grid, dtype=float), variances, w)
    rep.fits = {
        "variances": variances.tolist(),
        "se_vars": se_vars.tolist(),
        "gamma_hat": fit.slope,
        "gamma_ci": [fit.ci_low, fit.ci_high],
        "r_squared": fit.r_squared,
        # scale of the limit normal, taken from the variance slope; the
        # identification is inferred, not an independent measurement
        "sigma_hat": float(np.sqrt(max(fit.slope, 0.0))),
        "var_over_nlogn": (variances / (np.array(n_grid) *
                                        np.log(n_grid))).tolist(),
    }
    rep.notes.append("sigma_hat^2 := gamma_hat (inferred identification)")
    return rep


@dataclass
class CltDiagnostics:
    d: int
    n: int
    replicas: int
    mean: float
    sd: float
    ks_pvalue: float
    scaled: np.ndarray          # (cap - mean) / sqrt(n)
    standardized: np.ndarray    # (cap - mean) / sd
    ladder: list
    lindeberg: dict             # eps -> list over ladder, decreasing expected
    fourth_ratio: list          # E[(cap-mean)^4]/n^2 over ladder
    block_length: int
    seed: int = 0
    config_hash: str = ""
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"d": self.d, "n": self.n, "replicas": self.replicas,
                "mean": self.mean, "sd": self.sd, "ks_pvalue": self.ks_pvalue,
                "ladder": self.ladder,
                "lindeberg": {str(k): v for k, v in self.lindeberg.items()},
                "fourth_ratio": self.fourth_ratio,
                "block_length": self.block_length, "seed": self.seed,
                "config_hash": self.config_hash, "version": ARTIFACT_VERSION,
                "notes": self.notes}


def run_clt(d, n, replicas, seed=0, backend="auto", oracle=None, workers=1,
            gates=None, ladder=None, ladder_replicas=None,
            block_length=512) -> CltDiagnostics:
    """Normality diagnostics for cap(R_n) at a single horizon.

    Lindeberg sums are computed for the triangular array of block
    contributions: X_{n,i} = (cap of a fresh `block_length`-walk range -
    its mean)/sqrt(n), i = 1..n/block_length. One sample of block
    capacities serves every ladder n, since only the threshold moves.
    """
    gates = gates or default_gates()
    if replicas < gates["clt.min_replicas"]:
        raise ValidationError(
            f"KS test needs >= {gates['clt.min_replicas']} replicas, "
            f"got {replicas}")
    oracle = oracle or default_oracle(d)
    ladder = sorted(ladder) if ladder else [2 ** 10, 2 ** 12, 2 ** 14]
    ladder_replicas = ladder_replicas or max(200, replicas // 5)

    caps, _, _ = _cap_samples(d, n, replicas, backend, seed, TAG_CLT,
                              oracle, gates, workers)
    mean, sd = float(caps.mean()), float(caps.std(ddof=1))
    pval = normality_ks(caps)

    blocks, _, _ = _cap_samples(d, block_length, ladder_replicas, backend,
                                seed + 1, TAG_CLT, oracle, gates, workers)
    centered = blocks - blocks.mean()
    eps_grid = gates["clt.lindeberg_eps"]
    lind = {}
    for eps in eps_grid:
        row = []
        for m in ladder:
            cut = eps * np.sqrt(m)
            tail = centered[np.abs(centered) > cut]
            row.append(float(np.sum(tail ** 2) /
                             (len(centered) * block_length)))
        lind[float(eps)] = row

    fourth = []
    for m in ladder:
        reps_m = ladder_replicas if m != n else replicas
        cm, _, _ = ((caps, 0, 0) if m == n else
                    _cap_samples(d, m, reps_m, backend, seed, TAG_CLT,
                                 oracle, gates, workers))
        z = cm - cm.mean()
        fourth.append(float(np.mean(z ** 4) / m ** 2))

    return CltDiagnostics(
        d=d, n=n, replicas=replicas, mean=mean, sd=sd, ks_pvalue=pval,
        scaled=(caps - mean) / np.sqrt(n), standardized=(caps - mean) / sd,
        ladder=ladder, lindeberg=lind, fourth_ratio=fourth,
        block_length=block_length, seed=seed)


def run_d4(n_grid, replicas, seed=0, oracle=None, workers=1, gates=None,
           backend="representation") -> EstimateReport:
    """a_n = (log n / n) E[cap(R_n)] in d = 4; expected level pi^2/8.

    Convergence is at log rate, so the report is about the trend: slow
    drift and a loose bracket, never the limiting value itself. One
    backend across the whole grid keeps any estimator bias common to all
    points.
    """
    oracle = oracle or default_oracle(4)
    gates = gates or default_gates()
    n_grid = sorted(n_grid)
    points = []
    for n in n_grid:
        caps, bias, used = _cap_samples(4, n, replicas, backend, seed,
                                        TAG_D4, oracle, gates, workers)
        points.append(_grid_point(4, n, caps, used, bias, seed))
    rep = EstimateReport(d=4, n_grid=n_grid, points=points, seed=seed)
    a_n = np.log(n_grid) / np.array(n_grid) * rep.means
    a_se = np.log(n_grid) / np.array(n_grid) * rep.se_means
    top = [a for a, n in zip(a_n, n_grid) if n * 10 > n_grid[-1]]
    rep.fits = {
        "a_n": a_n.tolist(),
        "a_se": a_se.tolist(),
        "target": float(np.pi ** 2 / 8),
        "a_top": float(a_n[-1]),
        "top_decade_variation": float((max(top) - min(top)) / max(top))
        if len(top) > 1 else np.nan,
    }
    rep.notes.append("slow-convergence campaign: trend-based only")
    return rep


def _pair_energy(coords, counts, oracle, chunk=256) -> float:
    """sum_{x,y} c_x c_y G(x - y) over weighted sites, chunked."""
    coords = coords.astype(np.int64)
    counts = counts.astype(np.float64)
    total = 0.0
    for i in range(0, len(coords), chunk):
        diffs = coords[i:i + chunk, None, :] - coords[None, :, :]
        vals = oracle.values(diffs.reshape(-1, coords.shape[1]))
        vals = vals.reshape(len(diffs), len(coords))
        total += float(counts[i:i + chunk] @ (vals @ counts))
    return total


def jensen_lower_bound(w, oracle: GreenOracle) -> float:
    """(n+1)^2 / sum_{k,k'} G(S_k - S_k'): a per-path capacity lower bound.

    Plugging the occupation measure of the path into the energy
    characterization of capacity and applying Jensen gives
    cap(R_n) >= this exactly, path by path.
    """
    sites, counts = w.local_time_arrays(w.n + 1)
    return (w.n + 1) ** 2 / _pair_energy(sites, counts, oracle)


def run_d3(n_grid, replicas, seed=0, oracle=None, workers=1, gates=None,
           backend="representation") -> EstimateReport:
    """d = 3: E[cap(R_n)] ~ sqrt(n); exponent fit plus per-path bounds.

    The mean curve uses one backend across the grid (bias common to all
    points, so the log-log slope is clean). The exact per-replica
    inequality checks (Jensen lower functional <= cap <= O(rad)) run on
    the subgrid small enough for the direct solver.
    """
    oracle = oracle or default_oracle(3)
    gates = gates or default_gates()
    n_grid = sorted(n_grid)
    points = []
    for n in n_grid:
        caps, bias, used = _cap_samples(3, n, replicas, backend, seed,
                                        TAG_D3, oracle, gates, workers)
        points.append(_grid_point(3, n, caps, used, bias, seed))
    rep = EstimateReport(d=3, n_grid=n_grid, points=points, seed=seed)
    w = (rep.means / rep.se_means) ** 2
    fit = fit_loglog(n_grid, rep.means, w)
    rep.fits = {
        "exponent": fit.slope,
        "exponent_ci": [fit.ci_low, fit.ci_high],
        "prefactor": float(np.exp(fit.intercept)),
        "r_squared": fit.r_squared,
    }

    max_exact = gates["d3.jensen_exact_max_n"]
    sub = [n for n in n_grid if n <= max_exact]
    check_reps = min(replicas, 50)

    def one(args):
        n, r = args
        rng = stream(seed, TAG_D3, n, r, 1)
        wlk = sample_walk(3, n, rng)
        cap = capacity_exact(wlk.range, oracle)
        return (jensen_lower_bound(wlk, oracle), cap, wlk.range.radius())

    jensen_viol, ratios = 0, []
    checked = 0
    for n in sub:
        rows = _replica_map(lambda r, n=n: one((n, r)), check_reps, workers)
        for jl, cap, rad in rows:
            checked += 1
            if jl > cap * (1 + 1e-9):
                jensen_viol += 1
            ratios.append(cap / rad)
    ratios = np.array(ratios).reshape(len(sub), check_reps) if sub else np.empty((0, 0))
    per_n = ratios.mean(axis=1) if len(sub) else np.array([])
    rep.extras["bound_checks"] = {
        "subgrid": sub,
        "replicas_each": check_reps,
        "checked": checked,
        "jensen_violations": jensen_viol,
        "cap_over_rad": per_n.tolist(),
        "cap_over_rad_max_over_min": float(per_n.max() / per_n.min())
        if len(per_n) > 1 else np.nan,
    }
    return rep


def run_nonintersection(n_grid, replicas, seed=0, workers=1,
                        gates=None) -> EstimateReport:
    """log n * P(three-walk avoidance event) in d = 4; expected level pi^2/8.

    Event per replica: R1[1,n] avoids R2[0,n] and R3[0,n], and walk 3
    never returns to the origin in [1,n]. The infinite third walk of the
    limit statement is approximated by the same finite horizon n.
    """
    gates = gates or default_gates()
    n_grid = sorted(n_grid)

    def one_event(n, rep):
        rng = stream(seed, TAG_NONINT, n, rep)
        w1 = sample_walk(4, n, rng)
        w2 = sample_walk(4, n, rng)
        w3 = sample_walk(4, n, rng)
        if (w3.path[1:] == 0).all(axis=1).any():
            return 0
        lo, bits = box_of(w1.path, w2.path, w3.path)
        k1 = pack_keys(w1.path[1:], lo, bits)
        k23 = np.concatenate([pack_keys(w2.path, lo, bits),
                              pack_keys(w3.path, lo, bits)])
        return int(len(np.intersect1d(k1, k23)) == 0)

    points = []
    for n in n_grid:
        hits = np.array(_replica_map(lambda r, n=n: one_event(n, r),
                                     replicas, workers), dtype=float)
        points.append(_grid_point(4, n, hits, "event-mc", 0.0, seed))
    rep = EstimateReport(d=4, n_grid=n_grid, points=points, seed=seed)
    p = rep.means
    scaled = np.log(n_grid) * p
    scaled_se = np.log(n_grid) * rep.se_means
    top = [s for s, n in zip(scaled, n_grid) if n * 10 > n_grid[-1]]
    rep.fits = {
        "probabilities": p.tolist(),
        "scaled": scaled.tolist(),
        "scaled_se": scaled_se.tolist(),
        "target": float(np.pi ** 2 / 8),
        "top_decade_variation": float((max(top) - min(top)) / max(top))
        if len(top) > 1 else np.nan,
        "monotone_up_to_ci": bool(np.all(
            p[1:] <= p[:-1] + 1.96 * (rep.se_means[1:] + rep.se_means[:-1]))),
    }
    rep.notes.append("slow-convergence campaign: trend-based only; "
                     "third walk truncated at horizon n")
    return rep


def f_scaling(d: int, n) -> np.ndarray:
    """Expected cross-term scale: sqrt(n) (d=5), log n (d=6), 1 (d>=7)."""
    n = np.asarray(n, dtype=float)
    if d <= 4:
        return n / np.where(d == 4, np.log(np.maximum(n, 2.0)), 1.0)
    if d == 5:
        return np.sqrt(n)
    if d == 6:
        return np.log(np.maximum(n, 2.0))
    return np.ones_like(n)


def run_conjectures(d, n_grid, replicas, seed=0, oracle=None, workers=1,
                    gates=None) -> EstimateReport:
    """Exploratory probes of the open problems; no pass/fail anywhere.

    Measures E|R[0,n] cap R[n,2n]| against f_{d+2}(n); in d=5 the
    Var/(n log n) sequence; in d=4 the concentration of cap/E[cap].
    """
    oracle = oracle or default_oracle(d)
    gates = gates or default_gates()
    n_grid = sorted(n_grid)

    def inter_count(n, rep):
        rng = stream(seed, TAG_CONJ, n, rep)
        w = sample_walk(d, 2 * n, rng)
        lo, bits = box_of(w.path)
        k1 = pack_keys(w.path[:n + 1], lo, bits)
        k2 = pack_keys(w.path[n:], lo, bits)
        return len(np.intersect1d(k1, k2))

    points = []
    for n in n_grid:
        counts = np.array(_replica_map(lambda r, n=n: inter_count(n, r),
                                       replicas, workers), dtype=float)
        points.append(_grid_point(d, n, counts, "intersection-mc", 0.0, seed))
    rep = EstimateReport(d=d, n_grid=n_grid, points=points, seed=seed)
    ratio = rep.means / f_scaling(d + 2, n_grid)
    rep.fits = {"intersection_over_f": ratio.tolist(),
                "f_label": {5: "sqrt(n)", 6: "log n"}.get(d + 2, "1")}

    if d == 5:
        var_rep = run_variance(5, n_grid, replicas, seed=seed + 1,
                               oracle=oracle, workers=workers, gates=gates)
        rep.extras["var_over_nlogn"] = var_rep.fits["var_over_nlogn"]
    if d == 4:
        iqrs = []
        for n in n_grid:
            caps, _, _ = _cap_samples(4, n, replicas, "auto", seed + 2,
                                      TAG_CONJ, oracle, gates, workers)
            q1, q3 = np.percentile(caps / caps.mean(), [25, 75])
            iqrs.append(float(q3 - q1))
        rep.extras["concentration_iqr"] = iqrs
    rep.notes.append("exploratory: conjecture probes, no acceptance gates")
    return rep


# ---------------------------------------------------------------------------
# artifact writing

def write_campaign(report, outdir: str, stem: str,
                   config: RunConfig | None = None) -> list:
    """Write CSV + JSON summary + plot data atomically; returns the paths.

    A `.partial` marker guards the write window: present while files are
    being produced, removed once the set is complete, so an interrupted
    campaign is recognizable. Timestamps live in a sidecar only, keeping
    the data files byte-reproducible.
    """
    os.makedirs(outdir, exist_ok=True)
    chash = config.hash() if config is not None else report.config_hash
    report.config_hash = chash or report.config_hash
    mark_partial(outdir, stem)
    paths = []
    try:
        csv_path = os.path.join(outdir, f"{stem}.csv")
        atomic_write(csv_path, report.csv_text())
        paths.append(csv_path)

        json_path = os.path.join(outdir, f"{stem}.json")
        atomic_write(json_path, json.dumps(_jsonable(report.summary()),
                                           indent=2, sort_keys=True) + "\n")
        paths.append(json_path)

        plot_path = os.path.join(outdir, f"{stem}.plot.dat")
        atomic_write(plot_path, report.plot_text())
        paths.append(plot_path)

        import time
        side_path = os.path.join(outdir, f"{stem}.meta.json")
        atomic_write(side_path, json.dumps(
            {"written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
             "config_hash": chash}) + "\n")
        paths.append(side_path)
    except BaseException:
        raise
    else:
        clear_partial(outdir, stem)
    return paths


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj
