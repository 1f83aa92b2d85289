"""Ray-based fingerprinting and classification of convex cells."""
from . import _backend
from .dataset import Dataset, FingerprintRecord, SplitSpec, build_dataset, grid_points, read_dataset, split, write_dataset
from .errors import RayClassError
from .fingerprint import WeightFunction, critical_weight, detect_features, fingerprint_point, fingerprint_points
from .geometry import (DirectionSet, Ray, default_directions, directions_3d, evenly_spaced_directions_2d,
                       make_ray, pixel_budget, ray_samples)
from .nn import MlpSpec, TrainConfig, evaluate, init_params, load_model, predict, save_model, train
from .scene import Scene, SceneParams, gen_double_dot_2d, gen_triple_dot_3d, generate_scenes, square_scene

BACKEND = _backend.NAME
__version__ = "0.1.0"
