"""Grid sampling, fingerprint datasets, train/validation splits and file I/O.

A :class:`Dataset` is column oriented (numpy arrays) for speed; iterate it or
index it to get :class:`FingerprintRecord` rows.

JSONL layout: the first line is ``{"meta": {...}}``, then one record per
line with keys ``scene_id, center, m, r, fp, label, trunc``. CSV layout: a
``# meta: {...}`` comment line, a header row, then
``scene_id, c_1..c_N, label, w_1..w_M, truncated``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatasetError, ParameterError, ParseError, SchemaError
from .fingerprint import WeightFunction, fingerprint_points


@dataclass(frozen=True)
class FingerprintRecord:
    scene_id: str
    center: np.ndarray
    M: int
    r: int
    fingerprint: np.ndarray
    label: int
    truncated: bool


@dataclass
class Dataset:
    scene_ids: list
    centers: np.ndarray  # (n, N)
    fingerprints: np.ndarray  # (n, M)
    labels: np.ndarray  # (n,)
    truncated: np.ndarray  # (n,)
    M: int
    r: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.scene_ids)
        c = np.asarray(self.centers, dtype=np.float64)
        N = c.shape[1] if c.ndim == 2 else int(self.meta.get("dims", 0))
        self.centers = c.reshape(n, N if N else -1) if n else c.reshape(0, N)
        self.fingerprints = np.asarray(self.fingerprints, dtype=np.float64).reshape(n, self.M)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(n)
        self.truncated = np.asarray(self.truncated, dtype=bool).reshape(n)
        if n:
            self.meta.setdefault("dims", int(self.centers.shape[1]))

    def __len__(self):
        return len(self.scene_ids)

    def __getitem__(self, i) -> FingerprintRecord:
        return FingerprintRecord(self.scene_ids[i], self.centers[i], self.M, self.r, self.fingerprints[i],
                                 int(self.labels[i]), bool(self.truncated[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dims(self) -> int:
        return self.centers.shape[1] if len(self) else int(self.meta.get("dims", 0))

    @property
    def class_names(self) -> list:
        return list(self.meta.get("class_names", []))

    @property
    def n_classes(self) -> int:
        names = self.class_names
        if names:
            return len(names)
        return int(self.labels.max()) + 1 if len(self) else 0

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset([self.scene_ids[i] for i in idx], self.centers[idx], self.fingerprints[idx],
                       self.labels[idx], self.truncated[idx], self.M, self.r, dict(self.meta))

    def equals(self, other: "Dataset") -> bool:
        return (self.scene_ids == other.scene_ids and self.M == other.M and self.r == other.r
                and self.meta == other.meta
                and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.fingerprints, other.fingerprints)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.truncated, other.truncated))


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ParameterError("train_fraction must lie strictly between 0 and 1")


def grid_points(lo, hi, per_axis: int) -> np.ndarray:
    """Regular lattice of per_axis**N points spanning [lo, hi], row-major."""
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    if per_axis < 2 or int(per_axis) != per_axis:
        raise ParameterError("per_axis must be an integer >= 2")
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ParameterError("grid extent is degenerate")
    axes = [np.linspace(a, b, int(per_axis)) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)


def build_dataset(scenes, dirs, r: int, gamma: WeightFunction | None = None, per_axis: int = 37) -> Dataset:
    """One record per (scene, grid point), scene order then grid order."""
    gamma = gamma or WeightFunction()
    if not scenes:
        raise EmptyDatasetError("need at least one scene")
    dims, names = scenes[0].dims, tuple(scenes[0].class_names)
    for sc in scenes:
        if sc.dims != dims or tuple(sc.class_names) != names:
            raise ParameterError("all scenes must share dimension and class taxonomy")
    ids, centers, fps, labels, trunc = [], [], [], [], []
    for sc in scenes:
        pts = grid_points(sc.lo, sc.hi, per_axis)
        w, t = fingerprint_points(sc, pts, dirs, r, gamma)
        ids.extend([sc.scene_id] * len(pts))
        centers.append(pts)
        fps.append(w)
        labels.append(sc.labels(pts))
        trunc.append(t.any(axis=1))
    meta = {
        "dims": dims,
        "gamma": gamma.to_dict(),
        "directions": dirs.to_dict(),
        "seeds": [sc.seed for sc in scenes],
        "class_names": list(names),
        "per_axis": int(per_axis),
    }
    return Dataset(ids, np.vstack(centers), np.vstack(fps), np.concatenate(labels), np.concatenate(trunc),
                   dirs.M, int(r), meta)


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()):
    """Seeded shuffle; the first floor(train_fraction * n) records go to training."""
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    perm = np.random.default_rng(spec.seed).permutation(n)
    k = math.floor(spec.train_fraction * n)
    return dataset.subset(perm[:k]), dataset.subset(perm[k:])


# -- serialization ----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(dataset: Dataset, path, fmt: str | None = None):
    fmt = fmt or _infer_format(path)
    meta = dict(dataset.meta, M=dataset.M, r=dataset.r)
    meta.setdefault("dims", dataset.dims)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
            for rec in dataset:
                fh.write(json.dumps({
                    "scene_id": rec.scene_id,
                    "center": rec.center.tolist(),
                    "m": rec.M,
                    "r": rec.r,
                    "fp": rec.fingerprint.tolist(),
                    "label": rec.label,
                    "trunc": rec.truncated,
                }) + "\n")
        elif fmt == "csv":
            fh.write("# meta: " + json.dumps(meta, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            N = meta["dims"]
            w.writerow(["scene_id", *[f"c_{j + 1}" for j in range(N)], "label",
                        *[f"w_{j + 1}" for j in range(dataset.M)], "truncated"])
            for rec in dataset:
                w.writerow([rec.scene_id, *map(_fmt, rec.center), rec.label, *map(_fmt, rec.fingerprint),
                            int(rec.truncated)])
        else:
            raise ParameterError(f"unknown dataset format {fmt!r}")


def read_dataset(path, fmt: str | None = None) -> Dataset:
    fmt = fmt or _infer_format(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if fmt == "jsonl":
        return _read_jsonl(text)
    if fmt == "csv":
        return _read_csv(text)
    raise ParameterError(f"unknown dataset format {fmt!r}")


def _infer_format(path) -> str:
    return "csv" if str(path).lower().endswith(".csv") else "jsonl"


def _new_dataset(meta, ids, centers, fps, labels, trunc):
    M, r = int(meta["M"]), int(meta["r"])
    N = int(meta.get("dims", 0))
    meta = {k: v for k, v in meta.items() if k not in ("M", "r")}
    return Dataset(ids, np.asarray(centers, dtype=np.float64).reshape(len(ids), N), np.asarray(fps).reshape(len(ids), M),
                   labels, trunc, M, r, meta)


def _read_jsonl(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file, expected a metadata line", line=1)
    try:
        meta = json.loads(lines[0])["meta"]
        M, r = int(meta["M"]), int(meta["r"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad metadata line ({exc})", line=1) from exc
    ids, centers, fps, labels, trunc = [], [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            fp = [float(v) for v in rec["fp"]]
            if int(rec["m"]) != M or len(fp) != M:
                raise SchemaError(f"line {lineno}: record has {len(fp)} weights, dataset has M={M}")
            if int(rec["r"]) != r:
                raise SchemaError(f"line {lineno}: record has r={rec['r']}, dataset has r={r}")
            ids.append(str(rec["scene_id"]))
            centers.append([float(v) for v in rec["center"]])
            fps.append(fp)
            labels.append(int(rec["label"]))
            trunc.append(bool(rec["trunc"]))
        except SchemaError:
            raise
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed record ({exc})", line=lineno) from exc
    return _new_dataset(meta, ids, centers, fps, labels, trunc)


def _read_csv(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# meta: "):
        raise ParseError("missing '# meta:' line", line=1)
    try:
        meta = json.loads(lines[0][len("# meta: "):])
        M, N = int(meta["M"]), int(meta["dims"])
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ParseError(f"bad metadata ({exc})", line=1) from exc
    rows = list(csv.reader(io.StringIO("\n".join(lines[1:]))))
    if not rows:
        raise ParseError("missing header row", line=2)
    width = 1 + N + 1 + M + 1
    if len(rows[0]) != width:
        raise SchemaError(f"header has {len(rows[0])} columns, expected {width}")
    ids, centers, fps, labels, trunc = [], [], [], [], []
    for lineno, row in enumerate(rows[1:], start=3):
        if not row:
            continue
        if len(row) != width:
            raise SchemaError(f"row at line {lineno} has {len(row)} columns, expected {width} (M={M})")
        try:
            ids.append(row[0])
            centers.append([float(v) for v in row[1:1 + N]])
            labels.append(int(row[1 + N]))
            fps.append([float(v) for v in row[2 + N:2 + N + M]])
            trunc.append(bool(int(row[-1])))
        except ValueError as exc:
            raise ParseError(f"malformed value ({exc})", line=lineno) from exc
    return _new_dataset(meta, ids, centers, fps, labels, trunc)
