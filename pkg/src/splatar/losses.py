"""Supervisable losses and image metrics.

The perceptual term is a plug-in: pass a callable computing it from two
images, or leave it absent and the term contributes zero (a notice is
logged once, since that silently changes the total).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidParamsError

log = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total loss: l1, perceptual, mask, offset; eps is the
    target offset magnitude (meters)."""

    l1: float = 1.0
    lpips: float = 1.0
    mask: float = 1.0
    offset: float = 0.1
    eps: float = 1e-4

    def __post_init__(self):
        if min(self.l1, self.lpips, self.mask, self.offset) < 0:
            raise InvalidParamsError("loss weights must be nonnegative")


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise InvalidParamsError(f"shape mismatch: {a.shape} vs {b.shape}")


def l1_loss(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Mean absolute difference over all channels."""
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    _check_same_shape(img_a, img_b)
    return float(np.mean(np.abs(img_a - img_b)))


def mask_loss(alpha: np.ndarray, gt_mask: np.ndarray) -> float:
    """L1 between the rendered silhouette and a ground-truth mask."""
    return l1_loss(alpha, gt_mask)


def offset_reg(offsets: np.ndarray, eps: float) -> float:
    """Mean squared deviation of offset magnitudes from eps."""
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 3)
    norms = np.linalg.norm(offsets, axis=1)
    return float(np.mean((norms - eps) ** 2))


def offset_reg_grad(offsets: np.ndarray, eps: float) -> np.ndarray:
    """Analytic gradient of offset_reg w.r.t. the offsets: (M, 3).

    d/dO_k mean_k (|O_k| - eps)^2 = (2/M) (|O_k| - eps) O_k / |O_k|.
    Zero-length offsets get a zero gradient (the kink of |.| at 0).
    """
    offsets = np.asarray(offsets, dtype=np.float64).reshape(-1, 3)
    M = offsets.shape[0]
    norms = np.linalg.norm(offsets, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    coef = np.where(norms > 0, 2.0 * (norms - eps) / (M * safe), 0.0)
    return coef[:, None] * offsets


def total_loss(
    l1: float,
    mask: float,
    offset: float,
    weights: LossWeights,
    lpips_term: float | None = None,
) -> float:
    """Weighted sum of the loss parts; the perceptual term defaults to 0
    when no plug-in supplied it."""
    if lpips_term is None:
        log.info("no perceptual plug-in supplied; lpips term contributes 0")
        lpips_term = 0.0
    return (
        weights.l1 * l1
        + weights.lpips * lpips_term
        + weights.mask * mask
        + weights.offset * offset
    )


PerceptualFn = Callable[[np.ndarray, np.ndarray], float]


def total_loss_from_images(
    rendered: np.ndarray,
    target: np.ndarray,
    alpha: np.ndarray,
    gt_mask: np.ndarray,
    offsets: np.ndarray,
    weights: LossWeights,
    perceptual: PerceptualFn | None = None,
) -> dict:
    """All parts plus the weighted total, as a dict (the CLI prints this)."""
    parts = {
        "l1": l1_loss(rendered, target),
        "mask": mask_loss(alpha, gt_mask),
        "offset": offset_reg(offsets, weights.eps),
        "lpips": perceptual(rendered, target) if perceptual else None,
    }
    parts["total"] = total_loss(
        parts["l1"], parts["mask"], parts["offset"], weights, parts["lpips"]
    )
    if parts["lpips"] is None:
        parts["lpips"] = 0.0
    return parts


def psnr(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; identical images
    report the PSNR_CAP_DB sentinel instead of infinity."""
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    _check_same_shape(img_a, img_b)
    mse = float(np.mean((img_a - img_b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, float(10.0 * np.log10(1.0 / mse)))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-0.5 * (x / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def ssim(img_a: np.ndarray, img_b: np.ndarray, k1: float = 0.01, k2: float = 0.03) -> float:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5) on
    [0, 1] images, averaged over valid window positions and channels."""
    img_a = np.asarray(img_a, dtype=np.float64)
    img_b = np.asarray(img_b, dtype=np.float64)
    _check_same_shape(img_a, img_b)
    if img_a.ndim == 2:
        img_a = img_a[:, :, None]
        img_b = img_b[:, :, None]
    size = 11
    if img_a.shape[0] < size or img_a.shape[1] < size:
        raise InvalidParamsError(f"images must be at least {size}x{size} for SSIM")
    window = _gaussian_window(size)
    c1 = k1**2
    c2 = k2**2

    vals = []
    for ch in range(img_a.shape[2]):
        a = img_a[:, :, ch]
        b = img_b[:, :, ch]
        mu_a = _window_mean(a, window)
        mu_b = _window_mean(b, window)
        var_a = _window_mean(a * a, window) - mu_a * mu_a
        var_b = _window_mean(b * b, window) - mu_b * mu_b
        cov = _window_mean(a * b, window) - mu_a * mu_b
        num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
        den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def _window_mean(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Valid-mode weighted local means via sliding windows."""
    from numpy.lib.stride_tricks import sliding_window_view

    views = sliding_window_view(img, window.shape)
    return np.tensordot(views, window, axes=([2, 3], [0, 1]))
