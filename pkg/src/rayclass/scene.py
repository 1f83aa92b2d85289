"""Synthetic labeled partitions of the plane and of 3-space into convex cells.

Every scene is a hyperplane arrangement: a few families of parallel lines
(planes in 3D), each stored as a normal vector and a sorted list of offsets.
A point's per-family count is the number of hyperplanes ``n . x = offset``
with ``n . x >= offset``, so a hyperplane belongs to the cell on the side its
normal points to (upper/right for the default scenes). A scene-specific rule
folds the counts into a canonical cell code; boundaries are the loci where
the code changes.

The double-dot scene mimics a double quantum dot stability diagram with two
quasi-parallel line families (steep = left dot, shallow = right dot) and a
diagonal band where a single family of intermediate slope stands in for a
merged central dot. The first line of that family is the chord joining the
points where the band edges meet the first steep and first shallow lines,
which keeps the no-dot cell a single convex polygon.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from ._kernels import COUNT_BITS, RULE_ANY, RULE_COUNTS, RULE_DOUBLE_DOT, RULE_SINGLE, TAG_SHIFT
from .errors import OutOfBoundsError, ParameterError, SchemaError

DOUBLE_DOT_CLASSES = ("ND", "SD_L", "SD_C", "SD_R", "DD")
TRIPLE_DOT_CLASSES = ("ND", "SD", "DD", "TD")
TRIPLE_DOT_RESOLVED_CLASSES = ("ND", "SD_1", "SD_2", "DD_12", "SD_3", "DD_13", "DD_23", "TD")
SQUARE_CLASSES = ("inside", "outside")
SINGLE_CLASSES = ("all",)

_RULES = {"single": RULE_SINGLE, "counts": RULE_COUNTS, "double-dot": RULE_DOUBLE_DOT, "any": RULE_ANY}
_MASK16 = (1 << COUNT_BITS) - 1


@dataclass(frozen=True)
class ClassLabel:
    id: int
    name: str


@dataclass(frozen=True)
class SceneParams:
    line_spacing_px: float = 30.0
    spacing_jitter_frac: float = 0.15
    slope_L: float = -2.0
    slope_R: float = -0.5
    slope_C: float = -1.0
    center_band_halfwidth_px: float = 20.0
    extent_px: int = 300
    # 3D only: weight of the off-axis components of each plane normal
    coupling: float = 0.3

    def validate(self, dims: int = 2) -> "SceneParams":
        if not self.line_spacing_px > 0:
            raise ParameterError("line_spacing_px must be positive")
        if not 0.0 <= self.spacing_jitter_frac <= 0.3:
            raise ParameterError("spacing_jitter_frac must lie in [0, 0.3]")
        if not self.center_band_halfwidth_px > 0:
            raise ParameterError("center_band_halfwidth_px must be positive")
        if int(self.extent_px) != self.extent_px or self.extent_px < 1:
            raise ParameterError("extent_px must be a positive integer")
        if dims == 2 and not self.slope_L < self.slope_C < self.slope_R < 0:
            raise ParameterError("need slope_L < slope_C < slope_R < 0")
        if dims == 3 and not 0.0 <= self.coupling < 1.0:
            raise ParameterError("coupling must lie in [0, 1)")
        return self


@dataclass
class Family:
    name: str
    normal: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        self.offsets = np.asarray(self.offsets, dtype=np.float64)
        if self.offsets.size > 1 and np.any(np.diff(self.offsets) <= 0):
            raise ParameterError(f"offsets of family {self.name!r} must be strictly increasing")


@dataclass
class Scene:
    """A labeled convex partition of an axis-aligned box.

    ``lo``/``hi`` bound the measurable extent. Cell codes come from the
    family counts and ``rule``; ``class_names`` is indexed by class id.
    """

    kind: str
    dims: int
    lo: np.ndarray
    hi: np.ndarray
    families: list
    rule: str
    class_names: tuple
    seed: int = 0
    params: SceneParams | None = None
    taxonomy: str = "default"
    _arrays: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != (self.dims,) or self.hi.shape != (self.dims,) or np.any(self.hi <= self.lo):
            raise ParameterError("scene extent must be a non-degenerate box")
        if self.rule not in _RULES:
            raise ParameterError(f"unknown cell rule {self.rule!r}")
        for fam in self.families:
            if fam.normal.shape != (self.dims,):
                raise ParameterError(f"family {fam.name!r} normal has wrong dimension")
        if self.rule == "double-dot" and [f.name for f in self.families] != ["L", "R", "C", "band"]:
            raise ParameterError("double-dot scenes need families L, R, C, band in that order")

    @property
    def scene_id(self) -> str:
        return f"{self.kind}:{self.seed}"

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def extent(self) -> tuple:
        return self.lo, self.hi

    def arrays(self):
        """(normals, offsets, ptr, rule) as consumed by the scan kernels."""
        if self._arrays is None:
            if self.families:
                normals = np.vstack([f.normal for f in self.families])
                offsets = np.concatenate([f.offsets for f in self.families])
            else:
                normals = np.zeros((0, self.dims))
                offsets = np.zeros(0)
            ptr = np.zeros(len(self.families) + 1, dtype=np.int64)
            ptr[1:] = np.cumsum([f.offsets.size for f in self.families])
            self._arrays = (np.ascontiguousarray(normals), offsets, ptr, _RULES[self.rule])
        return self._arrays

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def check_inside(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[-1] != self.dims:
            raise OutOfBoundsError(f"expected {self.dims}-dimensional points, got {pts.shape[-1]}")
        bad = ~np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        if np.any(bad):
            raise OutOfBoundsError(f"point {pts[np.argmax(bad)].tolist()} lies outside the scene extent")

    # -- cell identification ------------------------------------------------

    def cell_ids(self, points) -> np.ndarray:
        """Vectorized cell codes for an (..., N) array (no bounds check)."""
        normals, offsets, ptr, rule = self.arrays()
        return _backend.cell_codes(np.asarray(points, dtype=np.float64), normals, offsets, ptr, rule)

    def cell_id(self, x) -> int:
        """Scalar reference implementation of the cell code, in plain Python."""
        x = [float(v) for v in x]
        counts = []
        for fam in self.families:
            n = fam.normal.tolist()
            p = x[0] * n[0]
            for j in range(1, len(x)):
                p = p + x[j] * n[j]
            counts.append(bisect.bisect_right(fam.offsets.tolist(), p))
        return _fold_scalar(counts, self.rule)

    def class_of(self, cell_id: int) -> ClassLabel:
        cid = self._class_index(int(cell_id))
        return ClassLabel(cid, self.class_names[cid])

    def classes_of(self, cell_ids) -> np.ndarray:
        return np.array([self._class_index(int(c)) for c in np.ravel(cell_ids)], dtype=np.int64).reshape(np.shape(cell_ids))

    def labels(self, points) -> np.ndarray:
        """Class ids for an (K, N) array of points."""
        codes = self.cell_ids(points)
        uniq, inv = np.unique(codes, return_inverse=True)
        return self.classes_of(uniq)[inv].reshape(codes.shape)

    def _class_index(self, code: int) -> int:
        if self.rule in ("single",):
            return 0
        if self.rule == "any":
            return 0 if code == 0 else 1
        if self.rule == "counts":
            counts = [(code >> (COUNT_BITS * f)) & _MASK16 for f in range(len(self.families))]
            if self.taxonomy == "resolved":
                return sum(1 << f for f, c in enumerate(counts) if c > 0)
            return sum(1 for c in counts if c > 0)
        # double-dot
        tag = code >> TAG_SHIFT
        if code == 0:
            return 0
        if tag == 1:
            return 2
        nl, nr = (code >> COUNT_BITS) & _MASK16, code & _MASK16
        if nl > 0 and nr > 0:
            return 4
        if nl > 0:
            return 1
        if nr > 0:
            return 3
        return 0

    def label_at(self, x) -> tuple[int, ClassLabel]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dims,):
            raise OutOfBoundsError(f"expected a {self.dims}-dimensional point")
        if not self.contains(x):
            raise OutOfBoundsError(f"point {x.tolist()} lies outside the scene extent")
        code = self.cell_id(x)
        return code, self.class_of(code)

    # -- geometry -----------------------------------------------------------

    def boundary_distance(self, x) -> float:
        """Euclidean distance from x to the nearest cell boundary."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dims,) or not self.contains(x):
            raise OutOfBoundsError(f"point {x.tolist()} lies outside the scene extent")
        if self.rule == "single":
            return math.inf
        if self.rule == "any":
            return self._distance_any(x)
        planes = self._bounding_planes(x)
        return min((abs(float(n @ x) - off) / float(np.linalg.norm(n)) for n, off in planes), default=math.inf)

    def _bounding_planes(self, x):
        """Hyperplanes whose half-spaces cut out the (convex) cell containing x."""
        fams = self.families
        proj = {f.name: float(f.normal @ x) for f in fams}
        counts = {f.name: int(np.searchsorted(f.offsets, proj[f.name], side="right")) for f in fams}

        def strip(f):
            n = counts[f.name]
            out = []
            if n > 0:
                out.append((f.normal, float(f.offsets[n - 1])))
            if n < f.offsets.size:
                out.append((f.normal, float(f.offsets[n])))
            return out

        if self.rule == "counts":
            return [pl for f in fams for pl in strip(f)]
        L, R, C, band = fams
        code = self.cell_id(x)
        if code == 0:
            return [(L.normal, float(L.offsets[0])), (R.normal, float(R.offsets[0])),
                    (C.normal, float(C.offsets[0]))]
        if code >> TAG_SHIFT == 1:
            return strip(C) + [(band.normal, float(o)) for o in band.offsets]
        edge = band.offsets[0] if counts["band"] == 0 else band.offsets[1]
        return strip(L) + strip(R) + [(band.normal, float(edge))]

    def _distance_any(self, x):
        # distance to the boundary of the convex polytope where all counts are 0,
        # measured from inside (nearest facet plane) or outside (nearest facet)
        planes = [(f.normal, float(o)) for f in self.families for o in f.offsets]
        signed = [(float(n @ x) - o) / float(np.linalg.norm(n)) for n, o in planes]
        if all(s < 0 for s in signed):
            return -max(signed)
        if self.dims != 2 or self.kind != "square":
            raise NotImplementedError("outside distance implemented for square scenes only")
        a = float(self.params_dict.get("a"))
        verts = np.array([[a, 0.0], [0.0, a], [-a, 0.0], [0.0, -a]])
        return min(_segment_distance(x, verts[i], verts[(i + 1) % 4]) for i in range(4))

    @property
    def params_dict(self) -> dict:
        if isinstance(self.params, SceneParams):
            return asdict(self.params)
        return dict(self.params or {})

    # -- transforms and serialization --------------------------------------

    def transformed(self, rotation=None, shift=None) -> "Scene":
        """Scene moved by x -> R x + t; the extent becomes the bounding box of the moved box."""
        R = np.eye(self.dims) if rotation is None else np.asarray(rotation, dtype=np.float64)
        t = np.zeros(self.dims) if shift is None else np.asarray(shift, dtype=np.float64)
        fams = []
        for f in self.families:
            n = R @ f.normal
            fams.append(Family(f.name, n, f.offsets + float(n @ t)))
        corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(self.lo, self.hi)], indexing="ij")).reshape(self.dims, -1).T
        moved = corners @ R.T + t
        return Scene(self.kind, self.dims, moved.min(axis=0), moved.max(axis=0), fams, self.rule,
                     self.class_names, self.seed, self.params, self.taxonomy)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dims": self.dims,
            "extent": {"lo": self.lo.tolist(), "hi": self.hi.tolist()},
            "params": self.params_dict or None,
            "seed": self.seed,
            "rule": self.rule,
            "taxonomy": self.taxonomy,
            "classes": list(self.class_names),
            "planes": [
                {"family": f.name, "normal": f.normal.tolist(), "offset": float(o)}
                for f in self.families for o in f.offsets
            ],
            "families": [{"name": f.name, "normal": f.normal.tolist()} for f in self.families],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        try:
            fam_specs = d["families"]
            offsets = {fs["name"]: [] for fs in fam_specs}
            for pl in d["planes"]:
                offsets[pl["family"]].append(float(pl["offset"]))
            fams = [Family(fs["name"], fs["normal"], offsets[fs["name"]]) for fs in fam_specs]
            params = d.get("params")
            if params is not None and d["kind"] in ("double-dot", "triple-dot"):
                params = SceneParams(**params)
            return cls(d["kind"], int(d["dims"]), d["extent"]["lo"], d["extent"]["hi"], fams, d["rule"],
                       tuple(d["classes"]), int(d["seed"]), params, d.get("taxonomy", "default"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed scene document: {exc!r}") from exc


def _fold_scalar(counts, rule):
    if rule == "single":
        return 0
    if rule == "any":
        return int(any(c > 0 for c in counts))
    if rule == "counts":
        code = 0
        for f, c in enumerate(counts):
            code |= c << (COUNT_BITS * f)
        return code
    nl, nr, nc, nb = counts
    if nl == 0 and nr == 0 and nc == 0:
        return 0
    if nb == 1:
        return (1 << TAG_SHIFT) | nc
    side = 3 if nb == 2 else 2
    return (side << TAG_SHIFT) | (nl << COUNT_BITS) | nr


def _segment_distance(x, a, b):
    ab = b - a
    t = float(np.clip((x - a) @ ab / (ab @ ab), 0.0, 1.0))
    return float(np.linalg.norm(x - (a + t * ab)))


def _line_normal(slope):
    # normal of y = slope * x + c pointing to the upper/right side
    n = np.array([-slope, 1.0])
    return n / np.linalg.norm(n)


def _spaced_offsets(rng, start, stop, spacing, jitter):
    """start, then gaps of spacing * (1 +- jitter) until the offset passes stop."""
    out = [start]
    while out[-1] <= stop:
        out.append(out[-1] + spacing * (1.0 + jitter * rng.uniform(-1.0, 1.0)))
    return np.array(out)


def _corner_projections(normal, lo, hi):
    corners = np.array(np.meshgrid(*[[a, b] for a, b in zip(lo, hi)], indexing="ij")).reshape(len(lo), -1).T
    p = corners @ normal
    return float(p.min()), float(p.max())


def gen_double_dot_2d(params: SceneParams | None = None, seed: int = 0) -> Scene:
    """Stylized double-dot stability diagram on [0, extent]^2."""
    params = (params or SceneParams()).validate(2)
    rng = np.random.default_rng(seed)
    E = float(params.extent_px)
    s, jit = params.line_spacing_px, params.spacing_jitter_frac
    lo, hi = np.zeros(2), np.full(2, E)

    # corner where the first steep and first shallow lines meet, close to the diagonal
    v = rng.uniform(0.27, 0.37) * E
    d = rng.uniform(-0.03, 0.03) * E
    vertex = np.array([v + d, v - d])

    nL, nR, nC = _line_normal(params.slope_L), _line_normal(params.slope_R), _line_normal(params.slope_C)
    nB = np.array([-1.0, 1.0]) / math.sqrt(2.0)

    # C0: n_C . x = n_C . vertex - t; its crossings with L0 and R0 move linearly in t
    def meet(n1, c1, n2, c2):
        return np.linalg.solve(np.vstack([n1, n2]), np.array([c1, c2]))

    aL, aR, aC = float(nL @ vertex), float(nR @ vertex), float(nC @ vertex)
    q1 = meet(nL, aL, nC, aC - 1.0)
    q2 = meet(nR, aR, nC, aC - 1.0)
    width_per_t = abs(float(nB @ (q2 - q1)))
    t = 2.0 * params.center_band_halfwidth_px / width_per_t
    q1 = meet(nL, aL, nC, aC - t)
    q2 = meet(nR, aR, nC, aC - t)
    band_offsets = np.sort([float(nB @ q1), float(nB @ q2)])

    fams = []
    for name, n, a0 in (("L", nL, aL), ("R", nR, aR), ("C", nC, aC - t)):
        _, pmax = _corner_projections(n, lo, hi)
        fams.append(Family(name, n, _spaced_offsets(rng, a0, pmax, s, jit)))
    fams.append(Family("band", nB, band_offsets))
    return Scene("double-dot", 2, lo, hi, fams, "double-dot", DOUBLE_DOT_CLASSES, int(seed), params)


def gen_triple_dot_3d(params: SceneParams | None = None, seed: int = 0, taxonomy: str = "collapsed") -> Scene:
    """Three quasi-parallel plane families with axis-dominant normals on [0, extent]^3.

    ``taxonomy="collapsed"`` labels a cell by how many families have a positive
    count (ND, SD, DD, TD); ``"resolved"`` keeps which ones (8 classes).
    """
    params = (params or SceneParams(extent_px=150)).validate(3)
    if taxonomy not in ("collapsed", "resolved"):
        raise ParameterError(f"unknown 3D taxonomy {taxonomy!r}")
    rng = np.random.default_rng(seed)
    E = float(params.extent_px)
    s, jit, c = params.line_spacing_px, params.spacing_jitter_frac, params.coupling
    lo, hi = np.zeros(3), np.full(3, E)
    fams = []
    for i in range(3):
        n = np.full(3, c)
        n[i] = 1.0
        n /= np.linalg.norm(n)
        first = rng.uniform(0.3, 0.45) * float(n @ hi)
        _, pmax = _corner_projections(n, lo, hi)
        fams.append(Family(f"P{i + 1}", n, _spaced_offsets(rng, first, pmax, s, jit)))
    names = TRIPLE_DOT_CLASSES if taxonomy == "collapsed" else TRIPLE_DOT_RESOLVED_CLASSES
    return Scene("triple-dot", 3, lo, hi, fams, "counts", names, int(seed), params,
                 "default" if taxonomy == "collapsed" else "resolved")


def square_scene(a: float, extent: float | None = None) -> Scene:
    """Two cells: the open diamond |x1| + |x2| < a and its outside."""
    if not a > 0:
        raise ParameterError("square half-diagonal must be positive")
    E = 4.0 * a if extent is None else float(extent)
    fams = [Family(f"q{i}", n, [a]) for i, n in enumerate([(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)])]
    scene = Scene("square", 2, (-E, -E), (E, E), fams, "any", SQUARE_CLASSES, 0, None)
    scene.params = {"a": float(a)}
    return scene


def single_cell_scene(dims: int = 2, extent: float = 300.0) -> Scene:
    return Scene("single", dims, np.zeros(dims), np.full(dims, float(extent)), [], "single", SINGLE_CLASSES)


def generate_scenes(dims: int, kind: str, count: int, seed: int, params: SceneParams | None = None) -> list:
    """``count`` scenes whose seeds derive deterministically from ``seed``."""
    seeds = [int(x) for x in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)]
    if kind == "double-dot" and dims == 2:
        return [gen_double_dot_2d(params, sd) for sd in seeds]
    if kind == "triple-dot" and dims == 3:
        return [gen_triple_dot_3d(params, sd) for sd in seeds]
    if kind == "square" and dims == 2:
        return [square_scene(20.0 + 10.0 * i) for i in range(count)]
    raise ParameterError(f"cannot generate {kind!r} scenes in {dims} dimensions")


def dump_scenes(scenes, path):
    doc = {"scenes": [s.to_dict() for s in scenes]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_scenes(path) -> list:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict) or "scenes" not in doc:
        raise SchemaError(f"{path}: expected an object with a 'scenes' list")
    return [Scene.from_dict(d) for d in doc["scenes"]]
