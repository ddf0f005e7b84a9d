"""Finite site sets in Z^d with fast membership and file round-trip."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def pack_keys(coords: np.ndarray, lo: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Pack integer coordinate rows into int64 keys.

    ``lo`` and ``bits`` define a bounding box; every row must lie inside it
    (use :func:`box_of` on the union of all arrays that will be compared).
    Lexicographic order of rows equals numeric order of keys.
    """
    shifted = (coords - lo).astype(np.int64)
    key = shifted[:, 0].copy()
    for j in range(1, coords.shape[1]):
        key <<= int(bits[j])
        key |= shifted[:, j]
    return key


def box_of(*arrays: np.ndarray, margin: int = 0):
    """Bounding box (lo, bits) covering all coordinate arrays.

    Raises if the packed representation would not fit in 63 bits; walk
    ranges at desk scale never get close.
    """
    lo = np.min([a.min(axis=0) for a in arrays], axis=0) - margin
    hi = np.max([a.max(axis=0) for a in arrays], axis=0) + margin
    extent = hi - lo + 1
    bits = np.ceil(np.log2(np.maximum(extent, 2))).astype(np.int64)
    if int(bits.sum()) > 63:
        raise ValidationError(
            f"coordinate box too large to pack: extents {extent.tolist()}"
        )
    return lo, bits


class PackedSet:
    """Sorted packed-key view of a point set, for bulk membership tests."""

    def __init__(self, coords: np.ndarray, margin: int = 0):
        self.coords = np.asarray(coords, dtype=np.int64)
        self.lo, self.bits = box_of(self.coords, margin=margin)
        self.hi = self.coords.max(axis=0)
        self._keys = np.sort(pack_keys(self.coords, self.lo, self.bits))

    def __len__(self):
        return len(self._keys)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean membership for an (m, d) array of points."""
        pts = np.asarray(pts, dtype=np.int64)
        inside = np.all((pts >= self.lo) & (pts <= self.lo + (1 << self.bits) - 1),
                        axis=1)
        out = np.zeros(len(pts), dtype=bool)
        if inside.any():
            keys = pack_keys(pts[inside], self.lo, self.bits)
            idx = np.searchsorted(self._keys, keys)
            idx[idx == len(self._keys)] = 0
            out[inside] = self._keys[idx] == keys
        return out


@dataclass
class SiteSet:
    """Finite deduplicated subset A of Z^d.

    Sites are stored lexicographically sorted, which makes equality and
    file round-trips deterministic. ``index`` maps a coordinate tuple to
    its ordinal in that ordering.
    """

    d: int
    coords: np.ndarray  # (m, d) int64, sorted lexicographically, unique
    _index: dict = field(default=None, repr=False, compare=False)
    _packed: PackedSet = field(default=None, repr=False, compare=False)

    @classmethod
    def from_points(cls, d: int, coords) -> "SiteSet":
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, d)
        coords = np.unique(coords, axis=0)
        return cls(d=d, coords=coords)

    def __len__(self):
        return len(self.coords)

    def __eq__(self, other):
        return (isinstance(other, SiteSet) and self.d == other.d
                and self.coords.shape == other.coords.shape
                and bool(np.all(self.coords == other.coords)))

    @property
    def index(self) -> dict:
        if self._index is None:
            self._index = {tuple(p): i for i, p in enumerate(self.coords.tolist())}
        return self._index

    @property
    def packed(self) -> PackedSet:
        if self._packed is None:
            self._packed = PackedSet(self.coords)
        return self._packed

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.packed.contains(pts)

    def translate(self, z) -> "SiteSet":
        z = np.asarray(z, dtype=np.int64)
        return SiteSet(d=self.d, coords=self.coords + z)

    def union(self, other: "SiteSet") -> "SiteSet":
        if other.d != self.d:
            raise ValidationError("dimension mismatch in union")
        return SiteSet.from_points(self.d, np.vstack([self.coords, other.coords]))

    def intersection(self, other: "SiteSet") -> "SiteSet":
        if other.d != self.d:
            raise ValidationError("dimension mismatch in intersection")
        mask = self.contains(other.coords)
        return SiteSet(d=self.d, coords=other.coords[mask])

    def centroid(self) -> np.ndarray:
        """Nearest lattice point to the coordinate mean."""
        return np.rint(self.coords.mean(axis=0)).astype(np.int64)

    def radius(self) -> float:
        """max Euclidean norm of a site (rad(A) with respect to the origin)."""
        return float(np.sqrt((self.coords.astype(float) ** 2).sum(axis=1).max()))

    def spread(self) -> float:
        """max Euclidean distance from the centroid."""
        rel = (self.coords - self.centroid()).astype(float)
        return float(np.sqrt((rel ** 2).sum(axis=1).max()))

    def save(self, path) -> None:
        """Write as text: header line ``d=<dim>``, one site per line."""
        with open(path, "w") as fh:
            fh.write(f"d={self.d}\n")
            for row in self.coords:
                fh.write(" ".join(str(int(c)) for c in row) + "\n")

    @classmethod
    def load(cls, path) -> "SiteSet":
        with open(path) as fh:
            header = fh.readline().strip()
            if not header.startswith("d="):
                raise ValidationError(f"{path}: first line must be 'd=<dim>'")
            d = int(header[2:])
            rows = []
            for ln, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != d:
                    raise ValidationError(f"{path}:{ln}: expected {d} coordinates")
                rows.append([int(p) for p in parts])
        if not rows:
            raise ValidationError(f"{path}: no sites")
        return cls.from_points(d, np.array(rows, dtype=np.int64))
