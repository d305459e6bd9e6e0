"""Stamp data model and the per-stamp normalization rules.

A stamp is a small (channel, row, col) cutout. Datasets keep all stamps in a
single (sample, channel, row, col) float32 array so transformations and the
classifier can work on whole batches at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

inlierLabel = 1
outlierLabel = 0
splitTags = ('train', 'validation', 'test')


@dataclass(frozen=True)
class Stamp:
    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3:
            raise ValueError(f'Stamp pixels must be (channels, height, width), got shape {pixels.shape}')
        object.__setattr__(self, 'pixels', pixels)

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[2])


@dataclass(frozen=True)
class StampDataset:
    """Ordered stamps of identical shape, optionally labeled inlier=1 / outlier=0."""

    pixels: np.ndarray
    labels: np.ndarray | None = None
    splitTag: str = 'train'

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 4:
            raise ValueError(f'Dataset pixels must be (samples, channels, height, width), got {pixels.shape}')
        object.__setattr__(self, 'pixels', pixels)

        if self.splitTag not in splitTags:
            raise ValueError(f'Unknown split tag {self.splitTag!r}; expected one of {splitTags}')

        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.uint8)
            if labels.shape != (pixels.shape[0],):
                raise ValueError(f'Expected {pixels.shape[0]} labels, got shape {labels.shape}')
            if np.any(labels > 1):
                raise ValueError('Labels must be 0 (outlier) or 1 (inlier)')
            if self.splitTag in ('train', 'validation') and np.any(labels != inlierLabel):
                raise ValueError(f'The {self.splitTag} split may only contain inliers')
            object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def stampShape(self) -> tuple[int, int, int]:
        return tuple(int(value) for value in self.pixels.shape[1:])

    def stamp(self, index: int) -> Stamp:
        return Stamp(self.pixels[index])

    def stamps(self) -> list[Stamp]:
        return [Stamp(pixels) for pixels in self.pixels]

    @classmethod
    def fromStamps(cls, stamps: list[Stamp], labels=None, splitTag: str = 'train') -> StampDataset:
        if not stamps:
            raise ValueError('Cannot build a dataset from zero stamps')
        shapes = {stamp.pixels.shape for stamp in stamps}
        if len(shapes) != 1:
            raise ValueError(f'All stamps must share one shape, found {sorted(shapes)}')
        return cls(np.stack([stamp.pixels for stamp in stamps]), labels, splitTag)


def normalizeChannels(pixels: np.ndarray) -> np.ndarray:
    """Replace NaN by 0, then min-max map each (..., row, col) channel to [-1, 1].

    Works on a single stamp or a whole batch. Constant channels become zeros.
    """
    values = np.nan_to_num(np.asarray(pixels, dtype=np.float64), nan=0.0)
    if values.size == 0:
        raise ValueError('Cannot normalize an empty stamp')

    low = values.min(axis=(-2, -1), keepdims=True)
    high = values.max(axis=(-2, -1), keepdims=True)
    span = high - low
    degenerate = span == 0
    safeSpan = np.where(degenerate, 1.0, span)

    scaled = 2.0 * (values - low) / safeSpan - 1.0
    scaled = np.where(degenerate, 0.0, scaled)
    return scaled.astype(np.float32)


def normalizeStamp(stamp: Stamp) -> Stamp:
    return Stamp(normalizeChannels(stamp.pixels))


def cropWindow(dimension: int, size: int) -> slice:
    # odd remainder: the extra row/column is dropped from the high-index side
    start = (dimension - size) // 2
    return slice(start, start + size)


def centerCrop(stamp: Stamp, size: int) -> Stamp:
    return Stamp(centerCropPixels(stamp.pixels, size))


def centerCropPixels(pixels: np.ndarray, size: int) -> np.ndarray:
    height, width = pixels.shape[-2:]
    if size <= 0:
        raise ValueError(f'Crop size must be positive, got {size}')
    if size > min(height, width):
        raise ValueError(f'Crop size {size} exceeds stamp dimensions {height}x{width}')
    return np.ascontiguousarray(pixels[..., cropWindow(height, size), cropWindow(width, size)])


def prepareDataset(dataset: StampDataset, *, cropSize: int | None = None) -> StampDataset:
    """Ingest raw stamps: optional center crop, then per-channel normalization."""
    pixels = dataset.pixels
    if cropSize is not None:
        pixels = centerCropPixels(pixels, cropSize)
    return StampDataset(normalizeChannels(pixels), dataset.labels, dataset.splitTag)
