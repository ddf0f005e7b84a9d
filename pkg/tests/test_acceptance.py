"""Acceptance gates: one test per numbered criterion, one verdict line each.

Every test prints exactly one line of the form

    [criterion NN] PASS - <key numbers>

before asserting, so a transcript of the run doubles as the acceptance
report.  All thresholds that are design decisions (not forced by theory)
come from ``caplab/gates.ini``; tolerances quoted inline are that file's
values, never ad-hoc constants.

The heavy campaigns (variance linearity, CLT, slow-convergence trends)
run at the declared scales and take a few hours in total on one core.
"""

import os

import numpy as np
import pytest

from caplab.capacity import (capacity_escape_mc, capacity_exact,
                             capacity_variational)
from caplab.config import parse_and_validate
from caplab.decomp import (check_lower_bound, check_upper_bound,
                           cross_term_moment, dyadic_decompose)
from caplab.experiments import (run_clt, run_d3, run_d4, run_lln,
                                run_nonintersection, run_variance,
                                write_campaign)
from caplab.gates import default_gates
from caplab.green import default_oracle, green_exact
from caplab.lattice import sample_walk, stream
from caplab.sites import SiteSet

GATES = default_gates()


def _verdict(num: int, ok: bool, detail: str) -> None:
    line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}"
    print("\n" + line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def oracles():
    return {d: default_oracle(d) for d in (3, 4, 5, 6, 7)}


def test_criterion_01_closed_form_identities(oracles):
    """G(0)-G(e1)=1 and cap({0,e1}) = 2/(G(0)+G(e1)) in every dimension."""
    tol_g = GATES["identities.green_identity_tol"]
    tol_c = GATES["identities.pair_capacity_tol"]
    worst_g = worst_c = 0.0
    for d in (3, 4, 5, 6, 7):
        e1 = [1] + [0] * (d - 1)
        g0 = green_exact(d, [0] * d)
        g1 = green_exact(d, e1)
        worst_g = max(worst_g, abs(g0 - g1 - 1.0))
        pair = SiteSet.from_points(d, [[0] * d, e1])
        cap = capacity_exact(pair, oracles[d])
        worst_c = max(worst_c, abs(cap - 2.0 / (g0 + g1)))
    ok = worst_g < tol_g and worst_c < tol_c
    _verdict(1, ok, f"max |G(0)-G(e1)-1| = {worst_g:.2e} (tol {tol_g:g}), "
                    f"max pair-capacity error = {worst_c:.2e} (tol {tol_c:g})")


def test_criterion_02_backend_equivalence(oracles):
    """Direct, variational, and escape-MC capacities agree on random sets."""
    rel_tol = GATES["oracles.variational_rel_tol"]
    sigma = GATES["oracles.mc_sigma"]
    trials = GATES["backends.escape_trials"]
    rng = stream(42, 2)
    worst_rel, worst_z, n_sets = 0.0, 0.0, 100
    for i in range(n_sets):
        d = (3, 5, 6)[i % 3]
        m = int(rng.integers(2, 101))
        pts = rng.integers(-6, 7, size=(m, d))
        a = SiteSet.from_points(d, pts)
        exact = capacity_exact(a, oracles[d])
        var = capacity_variational(a, oracles[d])
        assert var.converged
        worst_rel = max(worst_rel, abs(var.bound - exact) / exact)
        esc = capacity_escape_mc(a, oracles[d], trials_per_site=trials,
                                 seed=stream(42, 2, i))
        gap = abs(esc.estimate - exact)
        worst_z = max(worst_z, (gap - esc.bias_bound) / max(esc.se, 1e-12))
    ok = worst_rel < rel_tol and worst_z < sigma
    _verdict(2, ok, f"{n_sets} sets: max variational rel err = "
                    f"{worst_rel:.2e} (tol {rel_tol:g}), max escape-MC "
                    f"deviation = {worst_z:.2f} SE beyond bias "
                    f"(limit {sigma:g})")


def test_criterion_03_decomposition_bounds(oracles):
    """Capacity sub/super-additivity inequalities on random range pairs."""
    slack_tol = GATES["bounds.slack_tol"]
    rng = stream(42, 3)
    worst = np.inf
    pairs = 1000
    for i in range(pairs):
        d = (4, 5, 6)[i % 3]
        n1, n2 = (int(v) for v in rng.integers(50, 401, size=2))
        w1 = sample_walk(d, n1, stream(42, 3, i, 0))
        w2 = sample_walk(d, n2, stream(42, 3, i, 1))
        shift = rng.integers(-10, 11, size=d)
        a, b = w1.range, w2.range.translate(shift)
        lo = check_lower_bound(a, b, oracles[d])
        hi = check_upper_bound(a, b, oracles[d])
        worst = min(worst, lo.slack, hi.slack)
    ok = worst >= slack_tol
    _verdict(3, ok, f"{pairs} range pairs, d in (4,5,6): min slack of both "
                    f"inequalities = {worst:.3e} (floor {slack_tol:g})")


def test_criterion_04_dyadic_sandwich(oracles):
    """lower <= cap(R_n) <= upper for every path and every depth."""
    slack_tol = GATES["bounds.slack_tol"]
    worst = np.inf
    paths, levels = 100, (1, 2, 3, 4)
    for i in range(paths):
        w = sample_walk(6, 1024, stream(42, 4, i))
        for lev in levels:
            rep = dyadic_decompose(w, lev, oracles[6])
            worst = min(worst, rep.slack_low, rep.slack_high)
    ok = worst >= slack_tol
    _verdict(4, ok, f"{paths} paths x depths {levels} (d=6, n=1024): "
                    f"min sandwich slack = {worst:.3e} (floor {slack_tol:g})")


def test_criterion_05_lln(oracles):
    """cap(R_n)/n settles at a positive level iff d >= 5."""
    flat_tol = GATES["lln.flatness"]
    halving = GATES["lln.d3_halving"]
    r5 = run_lln(5, [2 ** 10, 2 ** 12, 2 ** 14, 2 ** 15, 2 ** 16], 200,
                 seed=5, oracle=oracles[5])
    r3 = run_lln(3, [2 ** 10, 2 ** 12, 2 ** 14, 2 ** 16], 100,
                 seed=5, oracle=oracles[3])
    decay = r3.fits["ratios"][-1] / r3.fits["ratios"][0]
    ok = (r5.fits["alpha_ci"][0] > 0
          and r5.fits["flatness_top_two"] < flat_tol
          and decay < halving)
    _verdict(5, ok, f"d=5: alpha_hat = {r5.fits['alpha_hat']:.4f}, CI low = "
                    f"{r5.fits['alpha_ci'][0]:.4f} > 0, top-two flatness = "
                    f"{r5.fits['flatness_top_two']:.3f} (tol {flat_tol:g}); "
                    f"d=3: cap/n last/first = {decay:.3f} (< {halving:g})")


def test_criterion_06_variance_linearity(oracles):
    """Var cap(R_n) grows linearly in n for d = 6."""
    r2_min = GATES["variance.r_squared_min"]
    rep = run_variance(6, [2 ** 9, 2 ** 10, 2 ** 11, 2 ** 12, 2 ** 13], 500,
                       seed=6, oracle=oracles[6])
    ok = rep.fits["r_squared"] > r2_min and rep.fits["gamma_ci"][0] > 0
    _verdict(6, ok, f"d=6, 500 replicas: through-origin R^2 = "
                    f"{rep.fits['r_squared']:.4f} (min {r2_min:g}), "
                    f"gamma_hat = {rep.fits['gamma_hat']:.4f}, CI low = "
                    f"{rep.fits['gamma_ci'][0]:.4f} > 0")


def test_criterion_07_clt(oracles):
    """Normality of cap(R_n) in d = 6 plus Lindeberg / fourth-moment checks.

    The exact backend is forced: Monte Carlo estimator noise would enter
    the fourth moment at a scale that swamps the path-to-path signal.
    """
    p_min = GATES["clt.ks_p_min"]
    f_max = GATES["clt.fourth_moment_max_over_min"]
    diag = run_clt(6, 4096, 1000, seed=7, backend="exact",
                   oracle=oracles[6], ladder=[1024, 4096, 8192],
                   ladder_replicas=200)
    lind_ok = all(all(a >= b - 1e-15 for a, b in zip(row, row[1:]))
                  for row in diag.lindeberg.values())
    fr = diag.fourth_ratio
    f_spread = max(fr) / min(fr)
    ok = diag.ks_pvalue > p_min and lind_ok and f_spread < f_max
    _verdict(7, ok, f"d=6, n=4096, 1000 replicas: KS p = "
                    f"{diag.ks_pvalue:.3f} (> {p_min:g}), Lindeberg rows "
                    f"non-increasing = {lind_ok}, fourth-moment max/min = "
                    f"{f_spread:.2f} (< {f_max:g})")


def test_criterion_08_cross_term_scaling(oracles):
    """Mean cross term scales like sqrt(n) (d=5), log n (d=6), 1 (d=7)."""
    center = GATES["cross.d5_ratio_center"]
    half = GATES["cross.d5_ratio_halfwidth"]
    reps = 40
    m1 = cross_term_moment(5, 1024, 1, reps, oracles[5], seed=8)
    m2 = cross_term_moment(5, 4096, 1, reps, oracles[5], seed=8)
    ratio = m2.mean / m1.mean

    grid = [256, 1024, 4096]
    spread = {}
    for d in (6, 7):
        means = np.array([cross_term_moment(d, n, 1, reps, oracles[d],
                                            seed=8).mean for n in grid])
        scale = np.log(grid) if d == 6 else np.ones(len(grid))
        r = means / scale
        spread[d] = float(r.max() / r.min())
    ok = (abs(ratio - center) < half
          and spread[6] < GATES["cross.d6_max_over_min"]
          and spread[7] < GATES["cross.d7_max_over_min"])
    _verdict(8, ok, f"d=5 mean ratio (4n vs n) = {ratio:.2f} "
                    f"(target {center:g} +/- {half:g}); max/min of "
                    f"mean/log n in d=6 = {spread[6]:.2f}, of mean in "
                    f"d=7 = {spread[7]:.2f} (both < 3)")


def test_criterion_09_d4_trends(oracles):
    """(log n / n) E[cap] and the three-walk avoidance probability trend
    toward pi^2/8; acceptance is trend-based (log-rate convergence)."""
    var_tol = GATES["d4.top_decade_variation"]
    lo, hi = GATES["d4.bracket_low"], GATES["d4.bracket_high"]
    ni_tol = GATES["d4.nonintersection_variation"]
    cap = run_d4([2 ** k for k in range(12, 19)], 100, seed=9,
                 oracle=oracles[4])
    ni = run_nonintersection([2 ** 12, 2 ** 14, 2 ** 15, 2 ** 16,
                              2 ** 17, 2 ** 18], 6000, seed=9)
    ni_top = ni.fits["scaled"][-1]
    ok = (cap.fits["top_decade_variation"] < var_tol
          and lo < cap.fits["a_top"] < hi
          and ni.fits["top_decade_variation"] < ni_tol
          and lo < ni_top < hi
          and ni.fits["monotone_up_to_ci"])
    _verdict(9, ok, f"(log n/n) E[cap]: top = {cap.fits['a_top']:.3f} in "
                    f"({lo:g},{hi:g}), decade variation = "
                    f"{cap.fits['top_decade_variation']:.3f} (< {var_tol:g}); "
                    f"avoidance: log n * p = {ni_top:.3f}, variation = "
                    f"{ni.fits['top_decade_variation']:.3f} (< {ni_tol:g}), "
                    f"monotone = {ni.fits['monotone_up_to_ci']} "
                    f"[target pi^2/8 = {np.pi ** 2 / 8:.4f}]")


def test_criterion_10_d3_root_n(oracles):
    """E[cap(R_n)] ~ sqrt(n) in d = 3 with exact per-path bounds."""
    exp0 = GATES["d3.exponent"]
    tol = GATES["d3.exponent_tol"]
    ratio_max = GATES["d3.cap_over_rad_max_over_min"]
    rep = run_d3([2 ** k for k in range(10, 17)], 200, seed=10,
                 oracle=oracles[3])
    checks = rep.extras["bound_checks"]
    ok = (abs(rep.fits["exponent"] - exp0) < tol
          and checks["jensen_violations"] == 0
          and checks["cap_over_rad_max_over_min"] < ratio_max)
    _verdict(10, ok, f"log-log exponent = {rep.fits['exponent']:.3f} "
                     f"(target {exp0:g} +/- {tol:g}), Jensen violations = "
                     f"{checks['jensen_violations']}/{checks['checked']}, "
                     f"cap/radius max-over-min = "
                     f"{checks['cap_over_rad_max_over_min']:.2f} "
                     f"(< {ratio_max:g})")


def test_criterion_11_reproducibility(oracles, tmp_path):
    """Same config hash => byte-identical CSV, independent of workers."""
    blobs, hashes = [], []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        cfg = parse_and_validate("lln", overrides={
            "d": 5, "n_grid": [256, 512], "replicas": 10, "seed": 11,
            "workers": workers, "output_dir": str(out)})
        rep = run_lln(5, cfg.n_grid, cfg.replicas, seed=cfg.seed,
                      oracle=oracles[5], workers=cfg.workers)
        paths = write_campaign(rep, cfg.output_dir, "lln", config=cfg)
        csv_path = [p for p in paths if p.endswith(".csv")][0]
        with open(csv_path, "rb") as fh:
            blobs.append(fh.read())
        hashes.append(cfg.hash())
        assert not os.path.exists(os.path.join(cfg.output_dir,
                                               "lln.partial"))
    ok = hashes[0] == hashes[1] and blobs[0] == blobs[1]
    _verdict(11, ok, f"config hash {hashes[0]} identical across worker "
                     f"counts; CSV byte-identical = {blobs[0] == blobs[1]}")
