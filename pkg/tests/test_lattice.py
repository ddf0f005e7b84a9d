import numpy as np
import pytest

from caplab.errors import ValidationError
from caplab.lattice import (CENSORED, ESCAPED, HIT, range_window, recenter,
                            run_until, sample_walk, stream)
from caplab.sites import PackedSet


def test_walk_steps_are_unit_moves():
    w = sample_walk(4, 500, stream(0))
    steps = np.diff(w.path, axis=0)
    assert (np.abs(steps).sum(axis=1) == 1).all()
    assert (w.path[0] == 0).all()


def test_walk_rejects_bad_args():
    with pytest.raises(ValidationError):
        sample_walk(0, 10, stream(0))
    with pytest.raises(ValidationError):
        sample_walk(3, -1, stream(0))


def test_stream_reproducible_and_distinct():
    a = sample_walk(3, 100, stream(7, 1, 2)).path
    b = sample_walk(3, 100, stream(7, 1, 2)).path
    c = sample_walk(3, 100, stream(7, 1, 3)).path
    assert (a == b).all()
    assert not (a == c).all()


def test_fresh_flags_match_reference():
    w = sample_walk(2, 300, stream(1))
    seen, expect = set(), []
    for p in w.path:
        t = tuple(p)
        expect.append(t not in seen)
        seen.add(t)
    assert (w.fresh_flags == np.array(expect)).all()
    assert w.fresh_flags.sum() == len(w.range)


def test_local_times_sum_to_horizon():
    w = sample_walk(3, 200, stream(2))
    sites, counts = w.local_time_arrays(151)
    assert counts.sum() == 151
    assert len(sites) == len(np.unique(w.path[:151], axis=0))


def test_range_window_endpoints():
    w = sample_walk(3, 50, stream(3))
    full = range_window(w, 0, 50)
    assert full == w.range
    sub = range_window(w, 10, 20)
    assert full.contains(sub.coords).all()
    with pytest.raises(ValidationError):
        range_window(w, 20, 10)


def test_recenter_shifts_coordinates():
    w = sample_walk(3, 30, stream(4))
    z = w.path[10]
    shifted = recenter(w.range, z)
    assert (shifted.coords == w.range.translate(-z).coords).all()


def test_run_until_hits_adjacent_target():
    # target = all neighbors of the origin: the first step always hits
    d = 3
    nbrs = np.concatenate([np.eye(d, dtype=np.int64),
                           -np.eye(d, dtype=np.int64)])
    target = PackedSet(nbrs)
    starts = np.zeros((64, d), dtype=np.int64)
    outcome, steps = run_until(starts, d, stream(5), target, horizon=10)
    assert (outcome == HIT).all()
    assert (steps == 1).all()


def test_run_until_escape_and_censor():
    d = 3
    starts = np.zeros((32, d), dtype=np.int64)
    outcome, _ = run_until(starts, d, stream(6), None, horizon=10 ** 4,
                           center=np.zeros(d), radius2=25.0)
    assert (outcome == ESCAPED).all()
    outcome, steps = run_until(starts, d, stream(7), None, horizon=5,
                               center=np.zeros(d), radius2=1e9)
    assert (outcome == CENSORED).all()
    assert (steps == 5).all()
