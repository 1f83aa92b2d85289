"""Sweep harness: repeated train/validate trials over (M, r) grids, the
architecture table, failure maps and class-mean fingerprints, all emitted as
plot-ready CSV.

Reference accuracies from the original simulator study live in the
``REFERENCE_*`` constants. They are written into CSV columns for plotting and
are never used as pass/fail thresholds.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, SplitSpec, build_dataset, grid_points, split
from .errors import EmptyDatasetError, ParameterError
from .fingerprint import WeightFunction, fingerprint_points
from .geometry import default_directions, pixel_budget
from .nn import MlpSpec, TrainConfig, evaluate, predict, train
from .scene import SceneParams, generate_scenes

REFERENCE_CNN_2D = 0.959
REFERENCE_3D = {6: (0.662, 0.003), 18: (0.799, 0.003)}
# Minimum voxel counts for the CNN baselines drawn as vertical lines in the 3D
# curve. Their positions are not given numerically anywhere; override freely.
DEFAULT_3D_MARKERS = {"cnn_3_slices": 2700, "cnn_large_2d_scan": 10000, "cnn_full_3d": 27000}
DEFAULT_ARCHS = ((64, 32), (128, 64, 32), (256, 64, 32), (512, 256, 64, 32))
DEFAULT_ARCH_CELLS = ((5, 50), (5, 60), (6, 50), (6, 60))
REFERENCE_TABLE_A1 = {
    (64, 32): {(5, 50): (93.6, 0.4), (5, 60): (95.8, 0.4), (6, 50): (94.5, 0.3), (6, 60): (96.3, 0.3)},
    (128, 64, 32): {(5, 50): (94.2, 0.4), (5, 60): (96.4, 0.4), (6, 50): (94.6, 0.4), (6, 60): (96.4, 0.4)},
    (256, 64, 32): {(5, 50): (94.2, 0.5), (5, 60): (96.5, 0.4), (6, 50): (94.7, 0.4), (6, 60): (96.6, 0.3)},
    (512, 256, 64, 32): {(5, 50): (94.6, 0.4), (5, 60): (96.5, 0.4), (6, 50): (94.5, 0.4), (6, 60): (96.3, 0.3)},
}


@dataclass(frozen=True)
class SweepSpec:
    ray_counts: tuple = (3, 4, 5, 6, 12)
    ray_lengths_px: tuple = tuple(range(10, 81, 10))
    runs_per_cell: int = 50
    dims: int = 2
    arch: tuple = (256, 128, 32)
    master_seed: int = 0
    n_scenes: int = 20
    scene_seed: int = 0
    per_axis: int = 37
    epochs: int = 50
    batch_size: int = 32
    gamma: WeightFunction = field(default_factory=WeightFunction)

    def __post_init__(self):
        if not self.ray_counts or not self.ray_lengths_px:
            raise ParameterError("ray_counts and ray_lengths_px must be non-empty")
        if self.runs_per_cell < 1:
            raise ParameterError("runs_per_cell must be >= 1")
        if self.dims not in (2, 3):
            raise ParameterError("dims must be 2 or 3")

    @classmethod
    def default_3d(cls, **kw) -> "SweepSpec":
        base = dict(ray_counts=tuple(range(6, 19, 2)), ray_lengths_px=(60,), runs_per_cell=10, dims=3,
                    n_scenes=1, per_axis=26)
        base.update(kw)
        return cls(**base)


@dataclass(frozen=True)
class RunResult:
    M: int
    r: int
    pixel_budget: int
    mu: float
    sigma: float
    n_runs: int
    accuracies: tuple = ()

    @classmethod
    def from_accuracies(cls, M, r, accs) -> "RunResult":
        a = np.asarray(accs, dtype=np.float64)
        sigma = float(a.std(ddof=1)) if a.size > 1 else 0.0
        return cls(int(M), int(r), pixel_budget(M, r), float(a.mean()), sigma, int(a.size),
                   tuple(float(x) for x in a))


def trial_seeds(master_seed: int, M: int, r: int, run_index: int) -> tuple[int, int]:
    """(split seed, init seed) for one trial, independent of every other cell."""
    s = np.random.SeedSequence([int(master_seed), int(M), int(r), int(run_index)]).generate_state(2)
    return int(s[0]), int(s[1])


def make_scenes(spec: SweepSpec, params: SceneParams | None = None) -> list:
    kind = "double-dot" if spec.dims == 2 else "triple-dot"
    return generate_scenes(spec.dims, kind, spec.n_scenes, spec.scene_seed, params)


def scene_dataset(scenes, M: int, r: int, per_axis: int = 37, gamma: WeightFunction | None = None) -> Dataset:
    return build_dataset(scenes, default_directions(scenes[0].dims, M), r, gamma, per_axis)


def run_trial(scenes, M: int, r: int, arch=(256, 128, 32), run_index: int = 0, master_seed: int = 0, *,
              dataset: Dataset | None = None, epochs: int = 50, batch_size: int = 32, per_axis: int = 37,
              gamma: WeightFunction | None = None) -> float:
    """Validation accuracy of one 80:20 split-and-train trial.

    Pass a prebuilt ``dataset`` to skip fingerprinting when several trials
    share the same (scenes, M, r).
    """
    if dataset is None:
        dataset = scene_dataset(scenes, M, r, per_axis, gamma)
    elif dataset.M != M or dataset.r != r:
        raise ParameterError(f"dataset was built for M={dataset.M}, r={dataset.r}, not M={M}, r={r}")
    split_seed, init_seed = trial_seeds(master_seed, M, r, run_index)
    tr, va = split(dataset, SplitSpec(0.8, split_seed))
    spec = MlpSpec(M, tuple(arch), dataset.n_classes)
    params, _ = train(spec, tr, None, TrainConfig(epochs, batch_size, init_seed))
    acc, _ = evaluate(params, va)
    return acc


def run_cell(scenes, M: int, r: int, runs: int, arch=(256, 128, 32), master_seed: int = 0, *,
             dataset: Dataset | None = None, progress=None, **kw) -> RunResult:
    if dataset is None:
        dataset = scene_dataset(scenes, M, r, kw.get("per_axis", 37), kw.get("gamma"))
    kw.pop("per_axis", None)
    kw.pop("gamma", None)
    accs = []
    for i in range(runs):
        accs.append(run_trial(scenes, M, r, arch, i, master_seed, dataset=dataset, **kw))
        if progress:
            progress(M, r, i, accs[-1])
    return RunResult.from_accuracies(M, r, accs)


def sweep(spec: SweepSpec, scenes=None, progress=None) -> list:
    """One RunResult per (M, r), ordered by M then r."""
    scenes = scenes if scenes is not None else make_scenes(spec)
    out = []
    for M in spec.ray_counts:
        for r in spec.ray_lengths_px:
            out.append(run_cell(scenes, M, r, spec.runs_per_cell, spec.arch, spec.master_seed,
                                progress=progress, epochs=spec.epochs, batch_size=spec.batch_size,
                                per_axis=spec.per_axis, gamma=spec.gamma))
    return out


def sweep_2d(spec: SweepSpec = SweepSpec(), scenes=None, progress=None) -> list:
    if spec.dims != 2:
        raise ParameterError("sweep_2d needs dims=2")
    return sweep(spec, scenes, progress)


def sweep_3d(spec: SweepSpec | None = None, scenes=None, progress=None) -> list:
    spec = spec or SweepSpec.default_3d()
    if spec.dims != 3:
        raise ParameterError("sweep_3d needs dims=3")
    return sweep(spec, scenes, progress)


def arch_sweep(scenes, archs=DEFAULT_ARCHS, cells=DEFAULT_ARCH_CELLS, runs: int = 50, master_seed: int = 0,
               progress=None, **kw) -> dict:
    """{(arch, (M, r)): RunResult}. Datasets are shared across architectures."""
    table = {}
    for M, r in cells:
        ds = scene_dataset(scenes, M, r, kw.get("per_axis", 37), kw.get("gamma"))
        for arch in archs:
            table[(tuple(arch), (M, r))] = run_cell(scenes, M, r, runs, arch, master_seed, dataset=ds,
                                                    progress=progress, epochs=kw.get("epochs", 50),
                                                    batch_size=kw.get("batch_size", 32))
    return table


# -- CSV emitters -------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def emit_curves(results, path, markers: dict | None = None, cnn_ref: float = REFERENCE_CNN_2D):
    """Plot data with 3-sigma bands plus constant reference columns."""
    if not results:
        raise EmptyDatasetError("no results to emit")
    markers = DEFAULT_3D_MARKERS if markers is None else markers
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "r", "pixel_budget", "mu", "sigma", "lo3", "hi3", "n_runs", "cnn_ref", *markers])
        for res in results:
            w.writerow([res.M, res.r, res.pixel_budget, _f(res.mu), _f(res.sigma), _f(res.mu - 3 * res.sigma),
                        _f(res.mu + 3 * res.sigma), res.n_runs, _f(cnn_ref), *map(_f, markers.values())])


def emit_trials(results, path):
    """Per-trial accuracies, one row per (M, r, run_index)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "r", "run_index", "accuracy"])
        for res in results:
            for i, a in enumerate(res.accuracies):
                w.writerow([res.M, res.r, i, _f(a)])


def _arch_name(arch) -> str:
    return "-".join(str(h) for h in arch)


def emit_arch_table(table: dict, path):
    """One row per architecture; mu/sigma (percent) per cell plus the reference values."""
    archs = list(dict.fromkeys(a for a, _ in table))
    cells = list(dict.fromkeys(c for _, c in table))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["arch"]
        for M, r in cells:
            header += [f"mu_{M}x{r}", f"sigma_{M}x{r}", f"ref_mu_{M}x{r}", f"ref_sigma_{M}x{r}"]
        w.writerow(header + ["n_runs"])
        for arch in archs:
            row = [_arch_name(arch)]
            for cell in cells:
                res = table[(arch, cell)]
                ref = REFERENCE_TABLE_A1.get(arch, {}).get(cell, ("", ""))
                row += [_f(100 * res.mu), _f(100 * res.sigma), *ref]
            w.writerow(row + [table[(arch, cells[0])].n_runs])


# -- failure maps ---------------------------------------------------------------

@dataclass(frozen=True)
class FailureRow:
    scene_id: str
    x: tuple
    true: int
    pred: int
    correct: bool
    boundary_distance: float


def failure_map(params, test_scenes, M: int, r: int, per_axis: int = 37, gamma: WeightFunction | None = None,
                train_seeds=None, dirs=None) -> list:
    """Per-grid-point predictions and boundary distances on held-out scenes.

    ``dirs`` defaults to the standard layout for M; pass the model's own
    direction set when it was trained on something else.
    """
    if dirs is not None and dirs.M != M:
        raise ParameterError(f"direction set has {dirs.M} rays, expected {M}")
    if train_seeds is not None:
        shared = {s.seed for s in test_scenes} & set(train_seeds)
        if shared:
            raise ParameterError(f"test scenes reuse training seeds {sorted(shared)}")
    gamma = gamma or WeightFunction()
    rows = []
    for sc in test_scenes:
        d = dirs if dirs is not None else default_directions(sc.dims, M)
        pts = grid_points(sc.lo, sc.hi, per_axis)
        w, _ = fingerprint_points(sc, pts, d, r, gamma)
        pred = predict(params, w)
        true = sc.labels(pts)
        for p, t, q in zip(pts, true, pred):
            rows.append(FailureRow(sc.scene_id, tuple(float(v) for v in p), int(t), int(q), bool(t == q),
                                   sc.boundary_distance(p)))
    return rows


def emit_failure_map(rows, path):
    dims = len(rows[0].x) if rows else 2
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scene_id", *[f"x_{j + 1}" for j in range(dims)], "true", "pred", "correct", "boundary_distance"])
        for row in rows:
            w.writerow([row.scene_id, *map(_f, row.x), row.true, row.pred, int(row.correct),
                        _f(row.boundary_distance)])


def failure_medians(rows) -> tuple[float, float]:
    """(median boundary distance of misclassified, of correctly classified); nan if empty."""
    bad = [r.boundary_distance for r in rows if not r.correct]
    good = [r.boundary_distance for r in rows if r.correct]
    med = lambda v: float(np.median(v)) if v else math.nan  # noqa: E731
    return med(bad), med(good)


# -- class means ----------------------------------------------------------------

def class_mean_fingerprints(dataset: Dataset) -> np.ndarray:
    """(C, M) arithmetic mean fingerprint per class; every class must occur."""
    C = dataset.n_classes
    counts = np.bincount(dataset.labels, minlength=C)
    missing = [c for c in range(C) if counts[c] == 0]
    if missing:
        raise EmptyDatasetError(f"classes {missing} have no records")
    sums = np.zeros((C, dataset.M))
    np.add.at(sums, dataset.labels, dataset.fingerprints)
    return sums / counts[:, None]


def circular_xcorr(a, b) -> np.ndarray:
    """c[s] = sum_k a[k] * b[(k + s) mod M]."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ParameterError("circular_xcorr needs two vectors of equal length")
    return np.array([np.dot(a, np.roll(b, -s)) for s in range(a.size)])


def emit_class_means(dataset: Dataset, path):
    means = class_mean_fingerprints(dataset)
    names = dataset.class_names or [str(c) for c in range(len(means))]
    counts = np.bincount(dataset.labels, minlength=len(means))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_id", "class_name", "n", *[f"w_{j + 1}" for j in range(dataset.M)]])
        for c, row in enumerate(means):
            w.writerow([c, names[c], int(counts[c]), *map(_f, row)])

