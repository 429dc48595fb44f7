"""Black-box adversarial example toolkit based on oriented texture smoothing.

The pipeline: generate candidate smoothings of a benign image over a
(kernel scale, orientation) grid, keep only candidates inside configured
SSIM / MSE / L-infinity bands, and evaluate the survivors against an
external classifier reachable only through its input/output interface.
"""

__version__ = "0.1.0"

from advsmo.image_core import Image, Channel, load_image, save_image, to_luma
from advsmo.gabor import GaborParams, Kernel, gabor_kernel, rotate_coords, smooth, extract_texture
from advsmo.metrics import MetricKind, MetricValue, ssim, mse, linf
from advsmo.texture import GlcmMatrix, glcm, texture_diff
from advsmo.search import (
    CandidatePair,
    CandidateRecord,
    CandidateSet,
    ConstraintThresholds,
    build_initial_set,
    filter_by_metric,
    generate_grid,
    intersect,
    select_pair,
)
from advsmo.surrogate import SurrogateModel, TrainConfig, TrainResult, train, forward, derive_ssim_band
from advsmo.blackbox import (
    AttackReport,
    AttackSample,
    ClassifierEndpoint,
    DefenseKind,
    Verdict,
    apply_defense,
    attack_success_rate,
    classify,
    evasion_rate,
    health,
)

__all__ = [
    "__version__",
    "Image", "Channel", "load_image", "save_image", "to_luma",
    "GaborParams", "Kernel", "gabor_kernel", "rotate_coords", "smooth", "extract_texture",
    "MetricKind", "MetricValue", "ssim", "mse", "linf",
    "GlcmMatrix", "glcm", "texture_diff",
    "CandidatePair", "CandidateRecord", "CandidateSet", "ConstraintThresholds",
    "generate_grid", "build_initial_set", "filter_by_metric", "intersect", "select_pair",
    "SurrogateModel", "TrainConfig", "TrainResult", "train", "forward", "derive_ssim_band",
    "ClassifierEndpoint", "Verdict", "AttackSample", "AttackReport", "DefenseKind",
    "classify", "attack_success_rate", "apply_defense", "evasion_rate", "health",
]
