"""Points, rays, direction sets and pixel-granular sampling along rays.

All lengths are in pixel (2D) or voxel (3D) units. Points and directions are
plain float64 numpy vectors; :class:`Ray` and :class:`DirectionSet` are small
frozen containers around them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCountError, InvalidDirectionError, InvalidLengthError, UnsupportedSchemeError

UNIT_TOL = 1e-12

SCHEMES = ("evenly-spaced-2d", "axes-3d", "fibonacci-3d", "explicit")


def as_point(x) -> np.ndarray:
    p = np.asarray(x, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"a point must be a non-empty vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point coordinates must be finite")
    return p


def as_direction(d) -> np.ndarray:
    v = as_point(d)
    norm = math.sqrt(float(v @ v))
    if abs(norm - 1.0) > UNIT_TOL:
        raise InvalidDirectionError(f"direction must have unit norm, got |d| = {norm!r}")
    return v


@dataclass(frozen=True)
class Ray:
    """Segment from ``origin`` to ``terminus``; ``length`` is in pixels."""

    origin: np.ndarray
    terminus: np.ndarray
    direction: np.ndarray
    length: int

    @property
    def dims(self) -> int:
        return self.origin.size

    def point_at(self, t: float) -> np.ndarray:
        return (1.0 - t) * self.origin + t * self.terminus


def make_ray(origin, direction, length_px: int) -> Ray:
    o = as_point(origin)
    d = as_direction(direction)
    if d.size != o.size:
        raise InvalidDirectionError(f"direction has {d.size} components, origin has {o.size}")
    if int(length_px) != length_px or length_px < 1:
        raise InvalidLengthError(f"ray length must be a positive integer, got {length_px!r}")
    length_px = int(length_px)
    return Ray(o, o + length_px * d, d, length_px)


def ray_samples(ray: Ray, r: int | None = None) -> np.ndarray:
    """Points at integer distances 1..r from the origin, shape (r, N).

    The origin is not included; it is sampled once per fingerprint.
    """
    if r is None:
        r = ray.length
    if int(r) != r or r < 1:
        raise InvalidLengthError(f"sample count must be a positive integer, got {r!r}")
    k = np.arange(1, int(r) + 1, dtype=np.float64)
    return ray.origin + k[:, None] * ray.direction


def pixel_budget(M: int, r: int) -> int:
    """Number of measured points for one fingerprint with M rays of length r."""
    return int(M) * int(r)


@dataclass(frozen=True)
class DirectionSet:
    dims: int
    directions: np.ndarray  # (M, N)
    scheme: str
    offset_angle: float = 0.0

    def __post_init__(self):
        dirs = np.array(self.directions, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[0] < 1 or dirs.shape[1] != self.dims:
            raise InvalidCountError(f"need an (M, {self.dims}) array of directions, got {dirs.shape}")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise InvalidDirectionError("all directions must have unit norm")
        if self.scheme not in SCHEMES:
            raise UnsupportedSchemeError(f"unknown direction scheme {self.scheme!r}")
        for i in range(len(dirs)):
            if np.any(np.all(np.abs(dirs[i + 1:] - dirs[i]) < 1e-12, axis=1)):
                raise InvalidDirectionError("directions must be distinct")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)

    @property
    def M(self) -> int:
        return self.directions.shape[0]

    def __len__(self):
        return self.M

    def __iter__(self):
        return iter(self.directions)

    def permuted(self, order) -> "DirectionSet":
        return DirectionSet(self.dims, self.directions[list(order)], "explicit")

    def to_dict(self) -> dict:
        return {
            "dims": self.dims,
            "scheme": self.scheme,
            "offset_angle": self.offset_angle,
            "directions": self.directions.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DirectionSet":
        return cls(int(d["dims"]), np.asarray(d["directions"], dtype=np.float64), d["scheme"],
                   float(d.get("offset_angle", 0.0)))


def evenly_spaced_directions_2d(M: int, offset_angle: float = 0.0) -> DirectionSet:
    """M unit vectors at angles ``offset_angle + 2*pi*k/M``."""
    if int(M) != M or M < 1:
        raise InvalidCountError(f"ray count must be a positive integer, got {M!r}")
    angles = offset_angle + 2.0 * np.pi * np.arange(M) / M
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    # cos/sin are unit to ~1e-16 but renormalize so the tolerance holds for any angle
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return DirectionSet(2, dirs, "evenly-spaced-2d", float(offset_angle))


def fibonacci_sphere(M: int) -> np.ndarray:
    """M points of the Fibonacci lattice on the unit 2-sphere, shape (M, 3)."""
    i = np.arange(M, dtype=np.float64) + 0.5
    z = 1.0 - 2.0 * i / M
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = np.pi * (3.0 - math.sqrt(5.0)) * np.arange(M)
    pts = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return pts / np.linalg.norm(pts, axis=1)[:, None]


def directions_3d(M: int, scheme: str = "fibonacci-3d") -> DirectionSet:
    if int(M) != M or M < 1:
        raise InvalidCountError(f"ray count must be a positive integer, got {M!r}")
    if scheme == "axes-3d":
        if M != 6:
            raise UnsupportedSchemeError(f"axes-3d needs exactly 6 rays, got {M}")
        eye = np.eye(3)
        dirs = np.vstack([eye[0], -eye[0], eye[1], -eye[1], eye[2], -eye[2]])
        return DirectionSet(3, dirs, "axes-3d")
    if scheme == "fibonacci-3d":
        return DirectionSet(3, fibonacci_sphere(M), "fibonacci-3d")
    raise UnsupportedSchemeError(f"unknown 3D direction scheme {scheme!r}")


def explicit_directions(vectors) -> DirectionSet:
    dirs = np.asarray(vectors, dtype=np.float64)
    if dirs.ndim != 2:
        raise InvalidCountError("explicit directions must be an (M, N) array")
    return DirectionSet(dirs.shape[1], dirs, "explicit")


def default_directions(dims: int, M: int, offset_angle: float = 0.0) -> DirectionSet:
    """Evenly spaced rays in 2D, a Fibonacci lattice in 3D.

    The 3D default uses the same lattice for every M so that sweeps over M
    compare one layout family; ask for ``directions_3d(6, "axes-3d")``
    explicitly to get the coordinate axes.
    """
    if dims == 2:
        return evenly_spaced_directions_2d(M, offset_angle)
    if dims == 3:
        return directions_3d(M, "fibonacci-3d")
    raise UnsupportedSchemeError(f"no default direction layout for {dims} dimensions")
