"""Capacity of finite subsets of Z^d, four independent ways.

cap(A) = sum_{x in A} P_x(no return to A). The equilibrium measure e_A
solves the linear system sum_{y} G(x, y) e_A(y) = 1 on A (last-visit
decomposition of the hitting probability), and cap(A) is its total mass.
The variational route minimizes the energy nu^T G nu over probability
measures; the Monte Carlo routes estimate escape probabilities directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, cg

from .errors import NumericalError, ValidationError
from .green import GreenOracle, cross_term
from .lattice import CENSORED, ESCAPED, HIT, WalkRecord, run_until, stream
from .sites import SiteSet

DIRECT_SOLVE_LIMIT = 2000     # dense Cholesky below, conjugate gradient above
CG_TOL = 1e-8
NEGATIVE_MEASURE_FLOOR = -1e-9


@dataclass
class EquilibriumResult:
    """Equilibrium measure, capacity, and solve diagnostics for one set."""

    sites: SiteSet
    measure: np.ndarray          # e_A(x) per site, nonnegative after clamping
    capacity: float
    residual: float              # max |G_A e - 1| on A
    clamped: int = 0             # entries lifted from tiny negative to zero
    method: str = "direct"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"d={self.sites.d} capacity={self.capacity!r} "
                     f"residual={self.residual!r} method={self.method}\n")
            for row, m in zip(self.sites.coords, self.measure):
                fh.write(" ".join(str(int(c)) for c in row) + f" {m!r}\n")


def _check_set(a: SiteSet, oracle: GreenOracle) -> None:
    if len(a) == 0:
        raise ValidationError("site set is empty")
    if a.d != oracle.d:
        raise ValidationError(
            f"set dimension {a.d} does not match oracle dimension {oracle.d}")
    if a.d < 3:
        raise ValidationError("capacity requires d >= 3")


def equilibrium_measure(a: SiteSet, oracle: GreenOracle,
                        tol: float = CG_TOL) -> EquilibriumResult:
    """Solve G_A e = 1; returns measure, capacity = sum(e), and residual."""
    _check_set(a, oracle)
    m = len(a)
    gram = oracle.gram_matrix(a.coords)
    ones = np.ones(m)
    if m <= DIRECT_SOLVE_LIMIT:
        try:
            e = linalg.solve(gram, ones, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise NumericalError(f"equilibrium solve failed: {exc}") from exc
        method = "direct"
    else:
        g64 = gram if gram.dtype == np.float64 else None

        def matvec(v):
            if g64 is not None:
                return g64 @ v
            return (gram @ v.astype(np.float32)).astype(np.float64)

        op = LinearOperator((m, m), matvec=matvec, dtype=np.float64)
        # float32 storage bounds the achievable residual; do not chase 1e-8
        eff_tol = tol if gram.dtype == np.float64 else max(tol, 1e-6)
        e, info = cg(op, ones, rtol=eff_tol, maxiter=500)
        if info != 0:
            raise NumericalError(f"conjugate gradient did not converge (info={info})")
        method = "cg"
    resid = float(np.max(np.abs(gram @ e.astype(gram.dtype) - 1.0)))
    neg = e < 0
    clamped = 0
    if neg.any():
        worst = float(e[neg].min())
        if worst < NEGATIVE_MEASURE_FLOOR * max(1.0, 1.0 if method == "direct" else 1e3):
            raise NumericalError(
                f"equilibrium measure entry {worst:.3e} below clamp floor; "
                "kernel table accuracy regression")
        clamped = int(neg.sum())
        e = np.clip(e, 0.0, None)
    return EquilibriumResult(sites=a, measure=e, capacity=float(e.sum()),
                             residual=resid, clamped=clamped, method=method)


def capacity_exact(a: SiteSet, oracle: GreenOracle) -> float:
    """Convenience wrapper: capacity from the equilibrium solve."""
    return equilibrium_measure(a, oracle).capacity


@dataclass
class VariationalResult:
    bound: float                 # certified lower bound 1 / (nu^T G nu)
    nu: np.ndarray               # probability measure on A
    gap: float                   # final Frank-Wolfe duality gap on the energy
    iterations: int
    converged: bool


def capacity_variational(a: SiteSet, oracle: GreenOracle,
                         max_iters: int = 20000,
                         tol: float = 1e-9) -> VariationalResult:
    """Minimize nu^T G nu over the simplex by away-step Frank-Wolfe.

    Every feasible nu certifies 1/(nu^T G nu) <= cap(A); at the optimum the
    bound equals cap(A) and nu is e_A normalized. Exact line search on the
    quadratic removes any step-size parameter; away steps restore linear
    convergence when the iterate must shed support.
    """
    _check_set(a, oracle)
    m = len(a)
    gram = oracle.gram_matrix(a.coords, dtype=np.float64)
    nu = np.full(m, 1.0 / m)
    gnu = gram @ nu
    energy = float(nu @ gnu)
    gap = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        grad = 2.0 * gnu
        i_fw = int(np.argmin(grad))
        gap = float(nu @ grad - grad[i_fw])
        if gap <= tol * energy:
            break
        support = np.flatnonzero(nu > 0)
        i_away = support[int(np.argmax(grad[support]))]
        use_away = (grad[i_away] - nu @ grad) > (nu @ grad - grad[i_fw])
        if use_away:
            # move mass away from the worst support atom
            denom = energy - 2.0 * gnu[i_away] + gram[i_away, i_away]
            num = gnu[i_away] - energy
            gamma_max = nu[i_away] / (1.0 - nu[i_away]) if nu[i_away] < 1 else 0.0
            gamma = num / denom if denom > 0 else gamma_max
            gamma = float(np.clip(gamma, 0.0, gamma_max))
            if gamma == 0.0:
                break
            nu = (1.0 + gamma) * nu
            nu[i_away] -= gamma
            gnu = (1.0 + gamma) * gnu - gamma * gram[i_away]
        else:
            dcol = gram[i_fw]
            denom = energy - 2.0 * gnu[i_fw] + gram[i_fw, i_fw]
            num = energy - gnu[i_fw]
            gamma = float(np.clip(num / denom if denom > 0 else 1.0, 0.0, 1.0))
            nu = (1.0 - gamma) * nu
            nu[i_fw] += gamma
            gnu = (1.0 - gamma) * gnu + gamma * dcol
        nu = np.clip(nu, 0.0, None)
        nu /= nu.sum()
        energy = float(nu @ gnu)
    return VariationalResult(bound=1.0 / energy, nu=nu, gap=gap, iterations=it,
                             converged=gap <= tol * energy)


@dataclass
class EscapeEstimate:
    estimate: float
    se: float
    bias_bound: float            # one-sided: true cap >= estimate - bias is NOT
    # implied; estimate is upward biased by at most bias_bound
    trials_per_site: int
    escape_radius: float
    escapes: np.ndarray = field(repr=False, default=None)


def _shell_points(center: np.ndarray, rho: float, d: int, rng, k: int = 64):
    dirs = rng.normal(size=(k, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.rint(center + rho * dirs).astype(np.int64)


def escape_bias_bound(a: SiteSet, oracle: GreenOracle, rho: float,
                      cap_hat: float, rng) -> float:
    """Upper bound on the return probability from the stopping shell.

    P_z(hit A) <= sum_y G(z - y) / G(0); the estimator counts such returns
    as escapes, so cap_hat is upward biased by at most cap_hat * max_z bound.
    """
    shell = _shell_points(a.centroid(), rho, a.d, rng)
    sums = oracle.cross_rows(shell, a.coords)
    g0 = oracle.value(np.zeros(a.d, dtype=np.int64))
    return float(cap_hat * min(1.0, sums.max() / g0))


def capacity_escape_mc(a: SiteSet, oracle: GreenOracle, trials_per_site: int,
                       escape_radius: float | None = None,
                       seed=0) -> EscapeEstimate:
    """Estimate cap(A) = sum_x P_x(T_A^+ = inf) by truncated escape trials.

    Each trial walks from a site until it re-enters A (failure) or leaves
    the ball of radius rho around the centroid (counted as escape). The
    reported bias bound is computed from the oracle on the stopping shell.
    """
    _check_set(a, oracle)
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    rho = float(escape_radius if escape_radius is not None
                else 2.0 * a.spread() + 50.0)
    if rho <= a.spread():
        raise ValidationError(
            f"escape radius {rho} not larger than set spread {a.spread()}")
    m = trials_per_site
    starts = np.repeat(a.coords, m, axis=0)
    horizon = int(64 * rho * rho) + 1000
    outcome, _ = run_until(starts, a.d, rng, a.packed, horizon,
                           center=a.centroid(), radius2=rho * rho)
    if (outcome == CENSORED).any():
        # should be unreachable: horizon is far beyond the exit-time scale
        raise NumericalError("escape trials censored by horizon")
    esc = (outcome == ESCAPED).reshape(len(a), m)
    p = esc.mean(axis=1)
    cap_hat = float(p.sum())
    se = float(np.sqrt((p * (1 - p)).sum() / m)) if m > 1 else np.inf
    bias = escape_bias_bound(a, oracle, rho, cap_hat, rng)
    return EscapeEstimate(estimate=cap_hat, se=se, bias_bound=bias,
                          trials_per_site=m, escape_radius=rho,
                          escapes=esc.sum(axis=1))


@dataclass
class RepresentationEstimate:
    estimate: float
    se: float
    bias_bound: float            # shell part; truncation bias is upward and
    # bounded by the censoring documented in `censored_fraction`
    censored_fraction: float
    fresh_sampled: int
    aux_horizon: int


def capacity_representation_mc(w: WalkRecord, aux_horizon: int, trials: int,
                               oracle: GreenOracle, seed=0,
                               time_sample: int | None = None
                               ) -> RepresentationEstimate:
    """Estimate cap(R_n) from the fresh-site representation.

    cap(R_n) = sum over fresh times k of P(aux walk from S_k avoids R_n
    forever). Auxiliary walks are truncated at ``aux_horizon`` steps or on
    leaving a ball around the range; truncation can only let an eventual
    return go unseen, so the raw estimate is biased upward. The shell part
    of that bias is bounded via the oracle; the horizon part is reported
    through ``censored_fraction``.

    ``time_sample``: if set, only this many uniformly drawn times k in
    [0, n] are examined and the sum is rescaled by (n+1)/time_sample,
    which keeps the estimator unbiased while bounding the cost on long walks.
    """
    if w.d != oracle.d:
        raise ValidationError("walk and oracle dimension mismatch")
    if w.d < 3:
        raise ValidationError("capacity requires d >= 3")
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    n = w.n
    rset = w.range
    rho = 2.0 * rset.spread() + 50.0
    fresh = w.fresh_flags

    if time_sample is None or time_sample >= n + 1:
        ks = np.arange(n + 1)
        scale = 1.0
    else:
        ks = rng.integers(0, n + 1, size=time_sample)
        scale = (n + 1) / time_sample
    ks_fresh = ks[fresh[ks]]

    if len(ks_fresh) == 0:
        return RepresentationEstimate(0.0, 0.0, 0.0, 0.0, 0, aux_horizon)

    starts = np.repeat(w.path[ks_fresh], trials, axis=0)
    outcome, _ = run_until(starts, w.d, rng, rset.packed, aux_horizon,
                           center=rset.centroid(), radius2=rho * rho)
    ok = (outcome != HIT).reshape(len(ks_fresh), trials)
    censored = float((outcome == CENSORED).mean())
    p = ok.mean(axis=1)
    contrib = np.zeros(len(ks), dtype=float)
    contrib[fresh[ks]] = p
    estimate = float(scale * contrib.sum())
    # per-time indicator variance, including the time-subsampling part
    se = float(scale * np.sqrt(max(len(ks), 1)) * contrib.std(ddof=1)) \
        if len(ks) > 1 else np.inf
    bias = escape_bias_bound(rset, oracle, rho, estimate, rng)
    return RepresentationEstimate(estimate=estimate, se=se, bias_bound=bias,
                                  censored_fraction=censored,
                                  fresh_sampled=int(len(ks_fresh)),
                                  aux_horizon=aux_horizon)
