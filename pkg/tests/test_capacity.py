import numpy as np
import pytest

from caplab.capacity import (capacity_escape_mc, capacity_exact,
                             capacity_representation_mc,
                             capacity_variational, equilibrium_measure)
from caplab.errors import ValidationError
from caplab.green import default_oracle
from caplab.lattice import sample_walk, stream
from caplab.sites import SiteSet


@pytest.fixture(scope="module")
def o3():
    return default_oracle(3)


@pytest.fixture(scope="module")
def o5():
    return default_oracle(5)


def _random_set(d, size, seed, span=8):
    rng = np.random.default_rng(seed)
    return SiteSet.from_points(d, rng.integers(-span, span, size=(size, d)))


def test_singleton_capacity_is_escape_probability(o3):
    # cap({0}) = 1/G(0,0): the escape probability of the origin
    one = SiteSet.from_points(3, [[0, 0, 0]])
    g0 = o3.value([0, 0, 0])
    assert capacity_exact(one, o3) == pytest.approx(1.0 / g0, rel=1e-12)


def test_pair_capacity_closed_form(o3):
    pair = SiteSet.from_points(3, [[0, 0, 0], [1, 0, 0]])
    g0, ge = o3.value([0, 0, 0]), o3.value([1, 0, 0])
    assert capacity_exact(pair, o3) == pytest.approx(2.0 / (g0 + ge), rel=1e-10)


def test_equilibrium_measure_properties(o3):
    a = _random_set(3, 60, 0)
    res = equilibrium_measure(a, o3)
    assert (res.measure >= 0).all()
    assert (res.measure <= 1 + 1e-10).all()
    assert res.residual < 1e-8
    assert res.capacity == pytest.approx(res.measure.sum())


def test_capacity_translation_invariant(o3):
    a = _random_set(3, 40, 1)
    b = a.translate([17, -9, 4])
    assert capacity_exact(a, o3) == pytest.approx(capacity_exact(b, o3),
                                                  rel=1e-9)


def test_capacity_monotone_and_subadditive(o5):
    a = _random_set(5, 50, 2)
    b = _random_set(5, 50, 3, span=6)
    u = a.union(b)
    ca, cb, cu = (capacity_exact(s, o5) for s in (a, b, u))
    assert cu >= ca - 1e-10 and cu >= cb - 1e-10
    assert cu <= ca + cb + 1e-10


def test_capacity_bounded_by_size_over_g0(o5):
    a = _random_set(5, 80, 4)
    g0 = o5.value([0] * 5)
    assert capacity_exact(a, o5) <= len(a) / g0 + 1e-10


def test_variational_matches_exact(o5):
    a = _random_set(5, 70, 5)
    exact = capacity_exact(a, o5)
    res = capacity_variational(a, o5)
    assert res.converged
    assert res.bound == pytest.approx(exact, rel=1e-6)
    assert res.bound <= exact + 1e-7  # certified lower bound
    assert res.nu.min() >= 0 and res.nu.sum() == pytest.approx(1.0)


def test_variational_is_lower_bound_when_stopped_early(o5):
    a = _random_set(5, 70, 6)
    res = capacity_variational(a, o5, max_iters=5)
    assert res.bound <= capacity_exact(a, o5) + 1e-10


def test_escape_mc_agrees_with_exact(o5):
    a = _random_set(5, 40, 7)
    exact = capacity_exact(a, o5)
    est = capacity_escape_mc(a, o5, trials_per_site=400, seed=8)
    assert abs(est.estimate - exact) <= 3 * est.se + est.bias_bound
    assert est.bias_bound >= 0


def test_escape_mc_reproducible(o5):
    a = _random_set(5, 20, 9)
    e1 = capacity_escape_mc(a, o5, trials_per_site=100, seed=10)
    e2 = capacity_escape_mc(a, o5, trials_per_site=100, seed=10)
    assert e1.estimate == e2.estimate


def test_escape_radius_must_exceed_spread(o5):
    a = _random_set(5, 20, 11)
    with pytest.raises(ValidationError):
        capacity_escape_mc(a, o5, trials_per_site=10, escape_radius=1.0)


def test_representation_mc_agrees_with_exact(o5):
    w = sample_walk(5, 300, stream(12))
    exact = capacity_exact(w.range, o5)
    est = capacity_representation_mc(w, aux_horizon=3000, trials=24,
                                     oracle=o5, seed=13)
    assert abs(est.estimate - exact) <= 4 * est.se + est.bias_bound
    assert est.fresh_sampled == w.fresh_flags.sum()


def test_representation_mc_time_subsampling(o5):
    w = sample_walk(5, 400, stream(14))
    exact = capacity_exact(w.range, o5)
    est = capacity_representation_mc(w, aux_horizon=3000, trials=8,
                                     oracle=o5, seed=15, time_sample=128)
    assert abs(est.estimate - exact) <= 4 * est.se + est.bias_bound


def test_dimension_mismatch_rejected(o3, o5):
    a = _random_set(5, 10, 16)
    with pytest.raises(ValidationError):
        capacity_exact(a, o3)
