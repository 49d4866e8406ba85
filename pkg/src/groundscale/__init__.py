"""Metric self-supervised depth via a calibrated ground-plane prior.

The package computes a per-pixel depth prior for the flat ground from
camera calibration and mounting height, blends it with predicted depth
through an attention map, and trains the blend with photometric,
smoothness, prior-consistency and attention-budget losses, all with
analytic gradients. A synthetic scale lab demonstrates end to end that the
prior resolves the monocular scale ambiguity.
"""

from .camgeo import (MAX_PITCH_DEG, MAX_ROLL_DEG, MAX_YAW_DEG, CameraModel,
                     PixelSample, Point3, compose_rotation, euler_matrix,
                     project, project_points, unproject)
from .depthmetrics import DEPTH_CAP, MetricReport, evaluate
from .errors import (AngleRangeError, BehindCameraError, ConfigurationError,
                     ContractViolationError, DegenerateBatchError,
                     DegenerateEvaluationError, GridParseError,
                     OptimizationFailure)
from .fusion import (AttentionMap, DepthField, attention_activation,
                     attention_activation_grad, depth_activation,
                     depth_activation_grad, depth_activation_inverse, fuse,
                     fusion_partials)
from .gradcheck import SuiteResult, run_all
from .gridio import (read_json, read_pfm, read_ppm, write_json, write_pfm,
                     write_ppm)
from .grids import ScalarGrid, pixel_grid
from .groundprior import (DEFAULT_MAX_DEPTH, GroundPrior, compute_tau,
                          ground_depth, normalize_prior)
from .losses import (LossReport, LossWeights, const_loss, photometric_error,
                     reg_loss, reproj_loss, smooth_loss, total_loss)
from .rotaug import augment_ground, augment_sparse_depth, rotate_image
from .scalelab import (ABLATION_LR, Box, OptimConfig, OptimState,
                       RecoveryResult, RenderResult, SceneSpec,
                       SegmentationReport, TextureSpec, ablate,
                       attention_segmentation_report, recover_scale,
                       reference_scene, reference_tau, render, scale_sweep,
                       value_noise)
from .viewsynth import (BilinearResult, RigidPose, WarpResult,
                        bilinear_sample, moved_camera, warp)

__version__ = "0.1.0"

__all__ = [
    "MAX_PITCH_DEG", "MAX_ROLL_DEG", "MAX_YAW_DEG", "CameraModel",
    "PixelSample", "Point3", "compose_rotation", "euler_matrix", "project",
    "project_points", "unproject",
    "DEPTH_CAP", "MetricReport", "evaluate",
    "AngleRangeError", "BehindCameraError", "ConfigurationError",
    "ContractViolationError", "DegenerateBatchError",
    "DegenerateEvaluationError", "GridParseError", "OptimizationFailure",
    "AttentionMap", "DepthField", "attention_activation",
    "attention_activation_grad", "depth_activation", "depth_activation_grad",
    "depth_activation_inverse", "fuse", "fusion_partials",
    "SuiteResult", "run_all",
    "read_json", "read_pfm", "read_ppm", "write_json", "write_pfm",
    "write_ppm",
    "ScalarGrid", "pixel_grid",
    "DEFAULT_MAX_DEPTH", "GroundPrior", "compute_tau", "ground_depth",
    "normalize_prior",
    "LossReport", "LossWeights", "const_loss", "photometric_error",
    "reg_loss", "reproj_loss", "smooth_loss", "total_loss",
    "augment_ground", "augment_sparse_depth", "rotate_image",
    "ABLATION_LR", "Box", "OptimConfig", "OptimState", "RecoveryResult",
    "RenderResult", "SceneSpec", "SegmentationReport", "TextureSpec", "ablate",
    "attention_segmentation_report", "recover_scale", "reference_scene",
    "reference_tau", "render", "scale_sweep", "value_noise",
    "BilinearResult", "RigidPose", "WarpResult", "bilinear_sample",
    "moved_camera", "warp",
    "__version__",
]
