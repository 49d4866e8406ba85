"""Standard depth evaluation metrics over a capped valid mask.

Predictions are compared as-is, in meters: no median rescaling and no
clipping. The whole pipeline exists to produce metric depth, so rescaling
the prediction to fit the ground truth would hide exactly the failure these
numbers are meant to expose.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEvaluationError
from .grids import ScalarGrid

DEPTH_CAP = 80.0


@dataclass(frozen=True)
class MetricReport:
    """The seven standard error/accuracy numbers plus the pixel count.

    d1, d2, d3 are the fractions of pixels whose depth ratio
    max(pred/gt, gt/pred) is strictly below 1.25, 1.25^2, 1.25^3.
    """

    abs_rel: float
    sq_rel: float
    rmse: float
    rmse_log: float
    d1: float
    d2: float
    d3: float
    n_pixels: int

    def to_dict(self) -> dict:
        return {
            "abs_rel": self.abs_rel,
            "sq_rel": self.sq_rel,
            "rmse": self.rmse,
            "rmse_log": self.rmse_log,
            "d1": self.d1,
            "d2": self.d2,
            "d3": self.d3,
            "n_pixels": self.n_pixels,
        }


def _as_grid(x) -> ScalarGrid:
    if isinstance(x, ScalarGrid):
        return x
    return ScalarGrid.full(np.asarray(x, dtype=np.float64))


def evaluate(pred, gt, cap: float = DEPTH_CAP) -> MetricReport:
    """Evaluate predicted depth against ground truth.

    pred and gt are ScalarGrids (plain arrays are taken as fully valid).
    The evaluation mask is pred.valid & gt.valid & (gt <= cap); both depths
    must be positive there. Raises DegenerateEvaluationError when the mask
    is empty, ValueError on shape mismatch or non-positive depths.
    """
    pred = _as_grid(pred)
    gt = _as_grid(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if cap <= 0:
        raise ValueError(f"cap must be positive, got {cap}")

    mask = pred.valid & gt.valid & (gt.values <= cap)
    n = int(mask.sum())
    if n == 0:
        raise DegenerateEvaluationError("no valid pixels under the depth cap")
    p = pred.values[mask]
    g = gt.values[mask]
    if np.any(p <= 0) or np.any(g <= 0):
        raise ValueError("depths must be positive on the evaluation mask")

    diff = p - g
    ratio = np.maximum(p / g, g / p)
    log_diff = np.log(p) - np.log(g)
    return MetricReport(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff * diff / g)),
        rmse=float(np.sqrt(np.mean(diff * diff))),
        rmse_log=float(np.sqrt(np.mean(log_diff * log_diff))),
        d1=float(np.mean(ratio < 1.25)),
        d2=float(np.mean(ratio < 1.25 ** 2)),
        d3=float(np.mean(ratio < 1.25 ** 3)),
        n_pixels=n,
    )
