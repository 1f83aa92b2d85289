"""Feature detection along rays, critical weights and point fingerprints.

A feature is a sample where the cell changes relative to the previous
sample (the origin is sample 0); its distance is the index k of the later
sample. A ray's critical weight is the weight of its nearest feature, or 0
when it has none, and a point fingerprint stacks the critical weights of an
M-projection in direction-set order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import OutOfBoundsError, ParameterError
from .geometry import DirectionSet, Ray, as_point, make_ray


@dataclass(frozen=True)
class WeightFunction:
    """Decreasing map from feature distance (pixels) to a weight in [0, 1].

    ``reciprocal`` is 1/d (clamped to 1 below d=1), ``exponential`` is
    exp(-lam * (d - 1)) and ``table`` looks up ``table[d - 1]`` for integer d,
    returning 0 past the end of the table.
    """

    kind: str = "reciprocal"
    lam: float = 0.05
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("reciprocal", "exponential", "table"):
            raise ParameterError(f"unknown weight function {self.kind!r}")
        if self.kind == "exponential" and not self.lam > 0:
            raise ParameterError("exponential weight needs lam > 0")
        if self.kind == "table":
            t = np.asarray(self.table, dtype=np.float64)
            if t.size == 0 or np.any(t < 0) or np.any(t > 1) or np.any(np.diff(t) > 0):
                raise ParameterError("weight table must be non-empty, non-increasing and within [0, 1]")

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        if self.kind == "reciprocal":
            return 1.0 / np.maximum(d, 1.0)
        if self.kind == "exponential":
            return np.exp(-self.lam * np.maximum(d - 1.0, 0.0))
        t = np.asarray(self.table, dtype=np.float64)
        idx = np.rint(d).astype(np.int64) - 1
        return np.where((idx >= 0) & (idx < t.size), t[np.clip(idx, 0, t.size - 1)], 0.0)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "exponential":
            out["lam"] = self.lam
        if self.kind == "table":
            out["table"] = list(self.table)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "WeightFunction":
        return cls(d["kind"], float(d.get("lam", 0.05)), tuple(d.get("table", ())))

    @classmethod
    def parse(cls, spec: str) -> "WeightFunction":
        """``reciprocal`` or ``exponential:<lam>``."""
        name, _, arg = spec.partition(":")
        if name == "exponential":
            return cls("exponential", float(arg) if arg else 0.05)
        if name == "reciprocal" and not arg:
            return cls()
        raise ParameterError(f"unknown weight function {spec!r}")


RECIPROCAL = WeightFunction()


@dataclass(frozen=True)
class FeatureSet:
    distances: tuple
    truncated: bool = False

    def __len__(self):
        return len(self.distances)

    def weights(self, gamma: WeightFunction = RECIPROCAL) -> np.ndarray:
        return gamma(np.asarray(self.distances, dtype=np.float64))


@dataclass(frozen=True)
class Fingerprint:
    weights: np.ndarray
    truncated: bool = False
    ray_truncated: np.ndarray = field(default=None, compare=False)

    @property
    def M(self) -> int:
        return self.weights.size


def _check_r(r):
    if int(r) != r or r < 1:
        raise ParameterError(f"ray length must be a positive integer, got {r!r}")
    return int(r)


def detect_features(scene, ray: Ray, r: int | None = None) -> FeatureSet:
    """All k in 1..r where the cell at sample k differs from sample k-1.

    Samples outside the scene extent, and every sample after the first such
    one, are dropped and the result is flagged as truncated.
    """
    r = _check_r(ray.length if r is None else r)
    scene.check_inside(ray.origin)
    k = np.arange(r + 1, dtype=np.float64)
    samples = ray.origin + k[:, None] * ray.direction
    inside = np.all((samples >= scene.lo) & (samples <= scene.hi), axis=1)
    n_ok = r + 1 if inside.all() else int(np.argmin(inside))
    codes = scene.cell_ids(samples[:n_ok])
    hits = np.nonzero(codes[1:] != codes[:-1])[0] + 1
    return FeatureSet(tuple(int(h) for h in hits), truncated=n_ok < r + 1)


def critical_weight(features: FeatureSet, gamma: WeightFunction = RECIPROCAL) -> float:
    if not len(features):
        return 0.0
    return float(gamma(min(features.distances)))


def m_projection(x_o, dirs: DirectionSet, r: int) -> list:
    """Step 1: the M rays of length r from x_o, in direction-set order."""
    return [make_ray(x_o, d, r) for d in dirs]


def fingerprint_point(scene, x_o, dirs: DirectionSet, r: int, gamma: WeightFunction = RECIPROCAL) -> Fingerprint:
    """Step 2 over the M-projection of x_o: the vector of critical weights."""
    x_o = as_point(x_o)
    weights, trunc = fingerprint_points(scene, x_o[None, :], dirs, r, gamma)
    return Fingerprint(weights[0], bool(trunc[0].any()), trunc[0])


def fingerprint_points(scene, points, dirs: DirectionSet, r: int, gamma: WeightFunction = RECIPROCAL):
    """Fingerprints of many centers at once.

    Returns ``weights`` (K, M) and the per-ray truncation flags (K, M).
    """
    r = _check_r(r)
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    if points.shape[1] != scene.dims or dirs.dims != scene.dims:
        raise OutOfBoundsError(f"scene is {scene.dims}-dimensional; got points of dimension "
                               f"{points.shape[1]} and {dirs.dims}-dimensional directions")
    scene.check_inside(points)
    normals, offsets, ptr, rule = scene.arrays()
    first, trunc = _backend.scan_first_crossings(points, dirs.directions, r, normals, offsets, ptr, rule,
                                                 scene.lo, scene.hi)
    weights = np.where(first > 0, gamma(np.maximum(first, 1)), 0.0)
    return weights, np.asarray(trunc, dtype=bool)
