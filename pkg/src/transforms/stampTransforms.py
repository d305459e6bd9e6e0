"""Primitive stamp operations and the 5x5 filter kernels.

Every transformation is applied in one fixed order:

    horizontal flip -> shift (zero fill) -> rotation (90 degree steps) -> Gaussian -> Laplacian

Each channel is transformed identically and independently; the output shape
always equals the input shape.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import ndimage

from ..errors import TransformError
from ..stamps.stampModel import Stamp
from .transformCatalog import TransformSpec

kernelSize = 5
gaussianSigma = 1.0
laplacianSigma = 0.5
boundaryMode = 'reflect'


def _kernelGrid() -> tuple[np.ndarray, np.ndarray]:
    offsets = np.arange(kernelSize, dtype=np.float64) - kernelSize // 2
    return np.meshgrid(offsets, offsets, indexing='ij')


@lru_cache(maxsize=None)
def _gaussianKernel() -> np.ndarray:
    rows, cols = _kernelGrid()
    kernel = np.exp(-(rows**2 + cols**2) / (2.0 * gaussianSigma**2))
    kernel /= kernel.sum()
    kernel.setflags(write=False)
    return kernel


@lru_cache(maxsize=None)
def _laplacianKernel() -> np.ndarray:
    rows, cols = _kernelGrid()
    radius = (rows**2 + cols**2) / (2.0 * laplacianSigma**2)
    kernel = -1.0 / (np.pi * laplacianSigma**4) * (1.0 - radius) * np.exp(-radius)
    # zero-sum so a constant image has no response
    kernel -= kernel.mean()
    kernel.setflags(write=False)
    return kernel


def gaussianKernel() -> np.ndarray:
    """5x5 Gaussian, sigma 1, normalized to sum 1."""
    return _gaussianKernel().copy()


def laplacianKernel() -> np.ndarray:
    """5x5 Laplacian-of-Gaussian, sigma 0.5, mean-subtracted to sum 0."""
    return _laplacianKernel().copy()


def convolve2d(channel: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """True 2-D convolution with same-size output and reflect boundary padding.

    `reflect` repeats the edge sample (d c b a | a b c d).
    """
    channel = np.asarray(channel, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if channel.ndim != 2 or kernel.ndim != 2:
        raise TransformError('convolve2d expects a 2-D channel and a 2-D kernel')
    if channel.shape[0] < kernel.shape[0] or channel.shape[1] < kernel.shape[1]:
        raise TransformError(f'Channel {channel.shape} is smaller than kernel {kernel.shape}')
    return ndimage.convolve(channel, kernel, mode=boundaryMode)


def _convolveBatch(pixels: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    height, width = pixels.shape[-2:]
    if height < kernel.shape[0] or width < kernel.shape[1]:
        raise TransformError(f'Stamp {height}x{width} is smaller than the {kernel.shape} kernel')
    expanded = kernel.reshape((1,) * (pixels.ndim - 2) + kernel.shape)
    return ndimage.convolve(pixels.astype(np.float64), expanded, mode=boundaryMode)


def shiftPixels(pixels: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Move content by dx columns (positive = right) and dy rows (positive = down), zero fill."""
    height, width = pixels.shape[-2:]
    if abs(dx) >= width or abs(dy) >= height:
        raise TransformError(f'Shift ({dx}, {dy}) must be smaller than the stamp size {height}x{width}')
    if dx == 0 and dy == 0:
        return pixels

    shifted = np.zeros_like(pixels)
    sourceRows = slice(max(0, -dy), height - max(0, dy))
    targetRows = slice(max(0, dy), height - max(0, -dy))
    sourceCols = slice(max(0, -dx), width - max(0, dx))
    targetCols = slice(max(0, dx), width - max(0, -dx))
    shifted[..., targetRows, targetCols] = pixels[..., sourceRows, sourceCols]
    return shifted


def applyBatch(spec: TransformSpec, pixels: np.ndarray) -> np.ndarray:
    """Apply one transformation to a (..., channels, height, width) array."""
    result = np.asarray(pixels)
    height, width = result.shape[-2:]
    if spec.rotation and height != width:
        raise TransformError(f'Rotation by {spec.rotation} degrees needs a square stamp, got {height}x{width}')

    if spec.flip:
        result = result[..., ::-1]
    dx, dy = spec.shift
    result = shiftPixels(result, dx, dy)
    if spec.rotation:
        result = np.rot90(result, k=spec.rotation // 90, axes=(-2, -1))
    if spec.gauss:
        result = _convolveBatch(result, _gaussianKernel())
    if spec.laplace:
        result = _convolveBatch(result, _laplacianKernel())

    return np.ascontiguousarray(result, dtype=np.float32)


def apply(spec: TransformSpec, stamp: Stamp) -> Stamp:
    return Stamp(applyBatch(spec, stamp.pixels))
