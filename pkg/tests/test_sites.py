import numpy as np
import pytest

from caplab.errors import ValidationError
from caplab.sites import PackedSet, SiteSet, box_of, pack_keys


def test_pack_keys_injective_on_box():
    rng = np.random.default_rng(0)
    pts = rng.integers(-50, 50, size=(500, 4))
    lo, bits = box_of(pts)
    keys = pack_keys(pts, lo, bits)
    uniq_pts = len(np.unique(pts, axis=0))
    assert len(np.unique(keys)) == uniq_pts


def test_box_of_rejects_oversized_boxes():
    pts = np.array([[0, 0], [2 ** 40, 2 ** 40]])
    with pytest.raises(ValidationError):
        box_of(pts)


def test_packed_set_contains():
    rng = np.random.default_rng(1)
    pts = rng.integers(-20, 20, size=(200, 3))
    ps = PackedSet(pts)
    assert ps.contains(pts).all()
    outside = pts + np.array([10 ** 6, 0, 0])
    assert not ps.contains(outside).any()
    # points inside the bounding box but not in the set
    probe = rng.integers(-20, 20, size=(1000, 3))
    member = {tuple(p) for p in pts}
    expect = np.array([tuple(p) in member for p in probe])
    assert (ps.contains(probe) == expect).all()


def test_siteset_dedup_and_order():
    a = SiteSet.from_points(3, [[1, 0, 0], [0, 0, 0], [1, 0, 0]])
    assert len(a) == 2
    b = SiteSet.from_points(3, [[0, 0, 0], [1, 0, 0]])
    assert a == b


def test_union_intersection():
    a = SiteSet.from_points(2, [[0, 0], [1, 0]])
    b = SiteSet.from_points(2, [[1, 0], [2, 0]])
    assert len(a.union(b)) == 3
    inter = a.intersection(b)
    assert len(inter) == 1 and (inter.coords[0] == [1, 0]).all()


def test_translate_roundtrip():
    rng = np.random.default_rng(2)
    a = SiteSet.from_points(5, rng.integers(-9, 9, size=(40, 5)))
    z = [3, -1, 0, 7, 2]
    back = a.translate(z).translate([-v for v in z])
    assert back == a
    assert a.translate(z).spread() == pytest.approx(a.spread())


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    a = SiteSet.from_points(4, rng.integers(-100, 100, size=(77, 4)))
    path = tmp_path / "set.txt"
    a.save(path)
    assert SiteSet.load(path) == a


def test_radius_is_from_origin():
    a = SiteSet.from_points(3, [[3, 4, 0], [0, 0, 0]])
    assert a.radius() == pytest.approx(5.0)
