"""Discrimination matrix and redundant-transformation pruning.

For every pair i > j of a catalog a fresh binary classifier learns to tell
T_i(x) from T_j(x) on the training inliers. Its balanced accuracy on the
transformed validation inliers fills acc[i][j] = acc[j][i]. An accuracy near
0.5 means the data is invariant to the difference between the two specs.

Pruning joins every pair whose accuracy lies in [low, high] into a redundancy
graph and keeps one spec per connected component: the one with the fewest
operations, ties going to the lowest catalog index.
"""

from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse.csgraph import connected_components

from ..classifier.selfLabeled import SelfLabeledDataset
from ..classifier.training import ClassifierConfig, limitThreads, predictSoftmax, trainClassifier
from ..config.experimentConfig import selectionDefaults
from ..errors import CatalogError, GeoscoreError
from ..io.csvIo import readMatrixCsv, writeMatrixCsv
from ..stamps.stampModel import StampDataset
from ..transforms.transformCatalog import TransformSet, TransformSpec

logger = logging.getLogger(__name__)

diagonalSentinel = -1.0
failedSentinel = -2.0


@dataclass
class DiscriminationMatrix:
    accuracies: np.ndarray
    catalog: TransformSet
    pairMetadata: dict[tuple[int, int], dict[str, Any]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.catalog)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.k) for j in range(i)]

    def failedPairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j in self.pairs() if not 0.0 <= self.accuracies[i, j] <= 1.0]

    @property
    def isComplete(self) -> bool:
        return not self.failedPairs()


@dataclass(frozen=True)
class SelectionResult:
    catalog: TransformSet
    survivors: list[int]
    components: list[list[int]]
    redundantPairs: list[tuple[int, int, float]]
    suspiciousPairs: list[tuple[int, int, float]]


def pairSeed(seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0])


def balancedAccuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    recalls = [float(np.mean(predicted[labels == label] == label)) for label in np.unique(labels)]
    return float(np.mean(recalls))


def trainPair(
    trainPixels: np.ndarray,
    validationPixels: np.ndarray,
    specs: tuple[TransformSpec, TransformSpec],
    cfg: ClassifierConfig,
) -> tuple[float, dict[str, Any]]:
    """Train one binary pair classifier and return (balanced accuracy, metadata)."""
    trainSet = SelfLabeledDataset(trainPixels, specs)
    validationSet = SelfLabeledDataset(validationPixels, specs)
    model = trainClassifier(trainSet, validationSet, cfg)

    pixels, labels = validationSet.batch(np.arange(len(validationSet)))
    predicted = predictSoftmax(model, pixels, batchSize=cfg.evalBatchSize).argmax(axis=1)
    metadata = {
        'trainSize': len(trainSet),
        'epochs': model.metadata['epochsRun'],
        'returnedEpoch': model.metadata['returnedEpoch'],
        'seed': cfg.seed,
    }
    return balancedAccuracy(predicted, labels), metadata


# inlier pixels handed to each pool worker once by _initPairWorker
_workerPixels: dict[str, np.ndarray] = {}


def _initPairWorker(trainPixels: np.ndarray, validationPixels: np.ndarray) -> None:
    limitThreads()
    _workerPixels['train'] = trainPixels
    _workerPixels['validation'] = validationPixels


def _pairJob(
    i: int,
    j: int,
    specs: tuple[TransformSpec, TransformSpec],
    cfg: ClassifierConfig,
    trainPixels: np.ndarray | None = None,
    validationPixels: np.ndarray | None = None,
) -> tuple[int, int, float, dict[str, Any]]:
    if trainPixels is None or validationPixels is None:
        trainPixels, validationPixels = _workerPixels['train'], _workerPixels['validation']
    try:
        accuracy, metadata = trainPair(trainPixels, validationPixels, specs, cfg)
    except (GeoscoreError, ValueError, RuntimeError) as error:
        return i, j, failedSentinel, {'seed': cfg.seed, 'error': f'{type(error).__name__}: {error}'}
    return i, j, accuracy, metadata


def buildDiscriminationMatrix(
    trainInliers: StampDataset,
    validationInliers: StampDataset,
    catalog: TransformSet,
    cfg: ClassifierConfig,
    *,
    jobs: int = 1,
) -> DiscriminationMatrix:
    """Train all k(k-1)/2 pair classifiers; pair (i, j) is seeded from (cfg.seed, i, j)."""
    k = len(catalog)
    if k < 2:
        raise ValueError(f'Catalog {catalog.name!r} needs at least 2 transformations to compare')

    accuracies = np.full((k, k), np.nan)
    np.fill_diagonal(accuracies, diagonalSentinel)
    matrix = DiscriminationMatrix(accuracies, catalog)
    tasks = [
        (i, j, (catalog[j], catalog[i]), replace(cfg, nClasses=2, seed=pairSeed(cfg.seed, i, j)))
        for i, j in matrix.pairs()
    ]
    logger.info('selection | catalog %s | %d pairs | jobs %d', catalog.name, len(tasks), jobs)

    def record(result: tuple[int, int, float, dict[str, Any]]) -> None:
        i, j, accuracy, metadata = result
        accuracies[i, j] = accuracies[j, i] = accuracy
        matrix.pairMetadata[(i, j)] = metadata
        if accuracy == failedSentinel:
            logger.warning('pair (%d, %d) failed | %s', i, j, metadata['error'])
        else:
            logger.info('pair (%d, %d) | accuracy %.4f | epochs %d', i, j, accuracy, metadata['epochs'])

    if jobs <= 1:
        for task in tasks:
            record(_pairJob(*task, trainInliers.pixels, validationInliers.pixels))
    else:
        context = multiprocessing.get_context('spawn')
        with ProcessPoolExecutor(
            max_workers=jobs,
            mp_context=context,
            initializer=_initPairWorker,
            initargs=(trainInliers.pixels, validationInliers.pixels),
        ) as executor:
            futures = [executor.submit(_pairJob, *task) for task in tasks]
            for future in as_completed(futures):
                record(future.result())

    failed = matrix.failedPairs()
    if failed:
        logger.warning('selection | %d of %d pairs failed: %s', len(failed), len(tasks), failed)
    return matrix


def _pairsInWindow(matrix: DiscriminationMatrix, low: float, high: float) -> list[tuple[int, int, float]]:
    return [
        (i, j, float(matrix.accuracies[i, j]))
        for i, j in matrix.pairs()
        if low <= matrix.accuracies[i, j] <= high
    ]


def selectTransformations(
    matrix: DiscriminationMatrix,
    low: float = selectionDefaults['selectionLow'],
    high: float = selectionDefaults['selectionHigh'],
    *,
    suspiciousLow: float = selectionDefaults['suspiciousLow'],
    suspiciousHigh: float = selectionDefaults['suspiciousHigh'],
    name: str | None = None,
) -> SelectionResult:
    """Keep the minimum-operation spec of every redundancy component."""
    failed = matrix.failedPairs()
    if failed:
        raise ValueError(f'Discrimination matrix is incomplete; failed pairs: {failed}')
    if low > high:
        raise ValueError(f'Selection window is empty: low {low} > high {high}')

    k = matrix.k
    redundant = _pairsInWindow(matrix, low, high)
    adjacency = np.zeros((k, k), dtype=bool)
    for i, j, _ in redundant:
        adjacency[i, j] = adjacency[j, i] = True
    componentCount, componentOf = connected_components(adjacency, directed=False)

    components = [sorted(np.flatnonzero(componentOf == label).tolist()) for label in range(componentCount)]
    components.sort(key=lambda members: members[0])
    survivors = sorted(
        min(members, key=lambda index: (matrix.catalog[index].operationCount, index)) for members in components
    )
    suspicious = [pair for pair in _pairsInWindow(matrix, suspiciousLow, suspiciousHigh) if not low <= pair[2] <= high]

    pruned = matrix.catalog.subset(survivors, name or f'{matrix.catalog.name}-selected')
    logger.info('selection | %d of %d transformations kept | %d redundant pairs', len(survivors), k, len(redundant))
    return SelectionResult(pruned, survivors, components, redundant, suspicious)


def formatSelectionReport(matrix: DiscriminationMatrix, result: SelectionResult) -> str:
    labels = matrix.catalog.labels
    lines = [
        f'Catalog {matrix.catalog.name}: {matrix.k} transformations, {len(result.survivors)} kept',
        '',
        'Redundancy components:',
    ]
    for members in result.components:
        if len(members) == 1:
            continue
        kept = next(index for index in members if index in result.survivors)
        names = ', '.join(f'{index}:{labels[index]}' for index in members)
        lines.append(f'  keep {kept}:{labels[kept]}  <-  {{{names}}}')
    if all(len(members) == 1 for members in result.components):
        lines.append('  (none)')

    lines.extend(['', 'Redundant pairs:'])
    lines.extend(f'  ({i}, {j}) {labels[i]} vs {labels[j]}: {accuracy:.4f}' for i, j, accuracy in result.redundantPairs)
    if not result.redundantPairs:
        lines.append('  (none)')

    lines.extend(['', 'Suspicious pairs (flagged, not pruned):'])
    lines.extend(f'  ({i}, {j}) {labels[i]} vs {labels[j]}: {accuracy:.4f}' for i, j, accuracy in result.suspiciousPairs)
    if not result.suspiciousPairs:
        lines.append('  (none)')

    lines.extend(['', 'Survivors:'])
    lines.extend(f'  {index}: {labels[index]}' for index in result.survivors)
    return '\n'.join(lines) + '\n'


def saveMatrix(matrix: DiscriminationMatrix, filePath: str | Path) -> None:
    writeMatrixCsv(filePath, matrix.accuracies, matrix.catalog.labels)


def loadMatrix(filePath: str | Path, catalog: TransformSet) -> DiscriminationMatrix:
    """Read a matrix CSV back against the catalog it was built from."""
    accuracies, labels = readMatrixCsv(filePath)
    if labels != catalog.labels:
        raise CatalogError(f'{filePath}: matrix header does not match catalog {catalog.name!r}')
    return DiscriminationMatrix(accuracies, catalog)
