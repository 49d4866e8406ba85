"""Attention-weighted fusion of predicted depth with the ground prior.

The fused field is the per-pixel convex blend

    D = (1 - alpha) * D_hat + alpha * G

with alpha forced to 0 wherever the prior is invalid (there D = D_hat).
Activations for raw optimization fields live here too: depth goes through a
softplus (positive, asymptotically linear), attention through a logistic
sigmoid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError
from .grids import ScalarGrid
from .groundprior import GroundPrior

# Above this raw value softplus is the identity to double precision.
_SOFTPLUS_LINEAR = 30.0


@dataclass(frozen=True)
class DepthField:
    """A depth map: positive values on valid pixels."""

    grid: ScalarGrid

    def __post_init__(self):
        vals = self.grid.values[self.grid.valid]
        if vals.size and not np.all(vals > 0):
            raise ValueError("depth field must be positive on valid pixels")

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    @property
    def valid(self) -> np.ndarray:
        return self.grid.valid

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @classmethod
    def full(cls, values: np.ndarray) -> "DepthField":
        return cls(ScalarGrid.full(values))


@dataclass(frozen=True)
class AttentionMap:
    """Per-pixel blend weights in [0, 1]."""

    grid: ScalarGrid

    def __post_init__(self):
        v = self.grid.values
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("attention must lie in [0, 1]")

    @property
    def values(self) -> np.ndarray:
        return self.grid.values

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    @classmethod
    def full(cls, values: np.ndarray) -> "AttentionMap":
        return cls(ScalarGrid.full(values))


def depth_activation(raw: np.ndarray) -> np.ndarray:
    """softplus(raw) = ln(1 + e^raw), with raw > 30 passed through as-is."""
    raw = np.asarray(raw, dtype=np.float64)
    safe = np.minimum(raw, _SOFTPLUS_LINEAR)
    return np.where(raw > _SOFTPLUS_LINEAR, raw, np.log1p(np.exp(safe)))


def depth_activation_grad(raw: np.ndarray) -> np.ndarray:
    """d softplus / d raw = sigmoid(raw)."""
    raw = np.asarray(raw, dtype=np.float64)
    out = np.empty_like(raw)
    pos = raw >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-raw[pos]))
    e = np.exp(raw[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def depth_activation_inverse(depth: np.ndarray) -> np.ndarray:
    """Raw value whose softplus is `depth`: ln(e^d - 1) = d + log1p(-e^-d)."""
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("softplus inverse requires positive depth")
    safe = np.minimum(depth, _SOFTPLUS_LINEAR)
    return np.where(depth > _SOFTPLUS_LINEAR, depth,
                    safe + np.log1p(-np.exp(-safe)))


def attention_activation(logits: np.ndarray, prior_valid: np.ndarray) -> AttentionMap:
    """sigmoid(logits), forced to exactly 0 where the prior is invalid."""
    logits = np.asarray(logits, dtype=np.float64)
    prior_valid = np.asarray(prior_valid, dtype=bool)
    if logits.shape != prior_valid.shape:
        raise ValueError(f"logits shape {logits.shape} != prior mask shape {prior_valid.shape}")
    alpha = np.empty_like(logits)
    pos = logits >= 0
    alpha[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    e = np.exp(logits[~pos])
    alpha[~pos] = e / (1.0 + e)
    alpha = np.where(prior_valid, alpha, 0.0)
    return AttentionMap(ScalarGrid.full(alpha))


def attention_activation_grad(logits: np.ndarray, prior_valid: np.ndarray) -> np.ndarray:
    """d alpha / d logits: sigma * (1 - sigma) on valid prior pixels, else 0."""
    alpha = attention_activation(logits, np.ones_like(np.asarray(logits), dtype=bool))
    g = alpha.values * (1.0 - alpha.values)
    return np.where(np.asarray(prior_valid, dtype=bool), g, 0.0)


def _check_fusion_args(d_hat: DepthField, prior: GroundPrior, alpha: AttentionMap):
    if d_hat.shape != prior.shape or d_hat.shape != alpha.shape:
        raise ValueError(
            f"shape mismatch: depth {d_hat.shape}, prior {prior.shape}, "
            f"attention {alpha.shape}")
    bad = ~prior.valid & (alpha.values > 0)
    if np.any(bad):
        n = int(bad.sum())
        raise ContractViolationError(
            f"attention is positive on {n} invalid prior pixel(s)")


def fuse(d_hat: DepthField, prior: GroundPrior, alpha: AttentionMap) -> DepthField:
    """Blend predicted depth with the prior: (1 - alpha) D_hat + alpha G."""
    _check_fusion_args(d_hat, prior, alpha)
    a = alpha.values
    fused = (1.0 - a) * d_hat.values + a * prior.depth.values
    return DepthField(ScalarGrid(fused, d_hat.valid))


def fusion_partials(d_hat: DepthField, prior: GroundPrior,
                    alpha: AttentionMap) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel partials of the fused depth.

    Returns (dD/dD_hat, dD/dalpha) = (1 - alpha, G - D_hat), the latter 0 on
    invalid prior pixels where alpha is pinned.
    """
    _check_fusion_args(d_hat, prior, alpha)
    d_dhat = 1.0 - alpha.values
    d_alpha = np.where(prior.valid, prior.depth.values - d_hat.values, 0.0)
    return d_dhat, d_alpha
