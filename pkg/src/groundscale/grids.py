"""Scalar grids: H x W float fields with a per-pixel validity mask.

Grids are value objects. Arrays are coerced to float64/bool, C-contiguous,
and frozen (writeable=False) so accidental in-place edits fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ScalarGrid:
    """An H x W grid of real values plus a validity mask.

    values on invalid pixels are kept but carry no meaning; every consumer
    must honor the mask.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"grid values must be 2-D, got shape {values.shape}")
        if self.valid is None:
            valid = np.ones(values.shape, dtype=bool)
        else:
            valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != values.shape:
            raise ValueError(
                f"validity mask shape {valid.shape} != values shape {values.shape}"
            )
        if not np.all(np.isfinite(values[valid])):
            raise ValueError("grid has non-finite values on valid pixels")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "valid", _freeze(valid))

    @classmethod
    def full(cls, values: np.ndarray) -> "ScalarGrid":
        """Grid with every pixel valid."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def masked(self, fill: float = 0.0) -> np.ndarray:
        """Values with invalid pixels replaced by `fill`."""
        return np.where(self.valid, self.values, fill)


def pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinate arrays (u, v), each H x W.

    Pixel centers sit at integer coordinates; u runs along columns in
    [0, W-1], v along rows in [0, H-1].
    """
    if height < 1 or width < 1:
        raise ValueError(f"grid must be at least 1x1, got {height}x{width}")
    v, u = np.mgrid[0:height, 0:width]
    return u.astype(np.float64), v.astype(np.float64)
