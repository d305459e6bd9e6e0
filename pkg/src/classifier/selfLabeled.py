"""Self-labeled datasets: every inlier under every catalog transformation.

The pairs are never materialized all at once. Pair `n` is sample `n // k`
under transformation `n % k` (sample-major, transformation-minor), and batches
are built on demand by grouping indices per transformation.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..stamps.stampModel import Stamp, StampDataset, outlierLabel
from ..transforms.stampTransforms import applyBatch
from ..transforms.transformCatalog import TransformSet, TransformSpec


@dataclass(frozen=True)
class SelfLabeledDataset:
    basePixels: np.ndarray
    specs: tuple[TransformSpec, ...]

    def __len__(self) -> int:
        return int(self.basePixels.shape[0]) * len(self.specs)

    @property
    def nClasses(self) -> int:
        return len(self.specs)

    @property
    def stampShape(self) -> tuple[int, int, int]:
        return tuple(int(value) for value in self.basePixels.shape[1:])

    @property
    def labels(self) -> np.ndarray:
        return np.tile(np.arange(self.nClasses, dtype=np.int64), self.basePixels.shape[0])

    def batch(self, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Materialize the (pixels, labels) of the given pair indices."""
        indices = np.asarray(indices, dtype=np.int64)
        samples, labels = np.divmod(indices, self.nClasses)
        pixels = np.empty((len(indices), *self.stampShape), dtype=np.float32)
        for label in np.unique(labels):
            mask = labels == label
            pixels[mask] = applyBatch(self.specs[label], self.basePixels[samples[mask]])
        return pixels, labels

    def pair(self, index: int) -> tuple[Stamp, int]:
        pixels, labels = self.batch(np.array([index]))
        return Stamp(pixels[0]), int(labels[0])


def buildSelfLabeled(dataset: StampDataset, catalog: TransformSet | Sequence[TransformSpec]) -> SelfLabeledDataset:
    specs = tuple(catalog.specs if isinstance(catalog, TransformSet) else catalog)
    if len(dataset) == 0:
        raise ValueError('Cannot build a self-labeled dataset from an empty stamp dataset')
    if not specs:
        raise ValueError('Cannot build a self-labeled dataset from an empty catalog')
    if dataset.labels is not None and np.any(dataset.labels == outlierLabel):
        raise ValueError('Self-labeled datasets are built from inliers only')
    return SelfLabeledDataset(dataset.pixels, specs)
