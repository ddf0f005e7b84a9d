import numpy as np
import pytest

from caplab.decomp import (check_lower_bound, check_upper_bound,
                           cross_term_moment, dyadic_decompose)
from caplab.errors import ValidationError
from caplab.green import default_oracle
from caplab.lattice import sample_walk, stream


@pytest.fixture(scope="module")
def o4():
    return default_oracle(4)


@pytest.fixture(scope="module")
def o6():
    return default_oracle(6)


def _range_pair(d, n, seed, shift):
    w1 = sample_walk(d, n, stream(seed, 0))
    w2 = sample_walk(d, n, stream(seed, 1))
    return w1.range, w2.range.translate(shift)


def test_lower_bound_holds_on_random_pairs(o4):
    for seed in range(6):
        a, b = _range_pair(4, 150, seed, [seed, 0, 0, 0])
        chk = check_lower_bound(a, b, o4)
        assert chk.slack >= -1e-8


def test_upper_bound_holds_on_random_pairs(o4):
    for seed in range(6):
        a, b = _range_pair(4, 150, seed + 10, [seed - 2, 1, 0, 0])
        chk = check_upper_bound(a, b, o4)
        assert chk.slack >= -1e-8


def test_upper_bound_with_disjoint_sets_is_subadditivity(o4):
    a, b = _range_pair(4, 100, 99, [200, 0, 0, 0])
    assert len(a.intersection(b)) == 0
    chk = check_upper_bound(a, b, o4)
    assert chk.components["cap_inter"] == 0.0
    assert chk.slack >= -1e-8


def test_dyadic_sandwich(o6):
    w = sample_walk(6, 256, stream(20))
    for levels in (1, 2, 3):
        rep = dyadic_decompose(w, levels, o6)
        assert rep.lower <= rep.middle + 1e-8
        assert rep.middle <= rep.upper + 1e-8
        assert len(rep.piece_caps) == 2 ** levels
        assert [len(e) for e in rep.per_level_errors] == \
            [2 ** l for l in range(levels)]


def test_dyadic_upper_is_sum_of_piece_caps(o6):
    w = sample_walk(6, 128, stream(21))
    rep = dyadic_decompose(w, 2, o6)
    assert rep.upper == pytest.approx(sum(rep.piece_caps))
    total_err = sum(sum(e) for e in rep.per_level_errors)
    assert rep.lower == pytest.approx(rep.upper - 2 * total_err)


def test_dyadic_rejects_too_many_levels(o6):
    w = sample_walk(6, 8, stream(22))
    with pytest.raises(ValidationError):
        dyadic_decompose(w, 4, o6)


def test_cross_term_moment_basic(o6):
    est = cross_term_moment(6, 128, 1, 25, o6, seed=3)
    assert est.mean > 0
    assert np.isfinite(est.se)
    assert len(est.samples) == 25
    # second moment dominates the squared first moment
    est2 = cross_term_moment(6, 128, 2, 25, o6, seed=3)
    assert est2.mean >= est.mean ** 2 - 3 * (est2.se + est.se * est.mean)


def test_cross_term_moment_rejects_bad_order(o6):
    with pytest.raises(ValidationError):
        cross_term_moment(6, 64, 0, 5, o6)
