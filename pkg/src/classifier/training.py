"""Mini-batch training with Adam, cross-entropy, and validation early stopping."""

from __future__ import annotations

import copy
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..config.experimentConfig import classifierDefaults
from ..errors import TrainingDivergedError
from ..stamps.stampModel import Stamp
from .architectures import architectureNames, buildArchitecture
from .selfLabeled import SelfLabeledDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassifierConfig:
    architecture: str = classifierDefaults['architecture']
    nClasses: int = 2
    batchSize: int = classifierDefaults['batchSize']
    learningRate: float = classifierDefaults['learningRate']
    beta1: float = classifierDefaults['beta1']
    beta2: float = classifierDefaults['beta2']
    adamEpsilon: float = classifierDefaults['adamEpsilon']
    maxEpochs: int = classifierDefaults['maxEpochs']
    patience: int = classifierDefaults['patience']
    earlyStopping: bool = classifierDefaults['earlyStopping']
    seed: int = 0
    deterministic: bool = False
    evalBatchSize: int = 512

    def __post_init__(self) -> None:
        if self.architecture not in architectureNames:
            raise ValueError(f'Unknown architecture {self.architecture!r}; valid architectures: {architectureNames}')
        if self.batchSize < 1:
            raise ValueError(f'batchSize must be >= 1, got {self.batchSize}')
        if self.nClasses < 2:
            raise ValueError(f'nClasses must be >= 2, got {self.nClasses}')
        if self.maxEpochs < 1:
            raise ValueError(f'maxEpochs must be >= 1, got {self.maxEpochs}')
        if self.patience < 0:
            raise ValueError(f'patience must be >= 0, got {self.patience}')


def originalEpochSchedule(nTransformations: int, *, baseEpochs: int = 200) -> int:
    """Fixed schedule matching `baseEpochs` passes over the untransformed data."""
    return max(1, math.ceil(baseEpochs / nTransformations))


@dataclass
class ClassifierModel:
    architecture: str
    nClasses: int
    inputShape: tuple[int, int, int]
    network: nn.Module
    metadata: dict[str, Any] = field(default_factory=dict)

    def parameterShapes(self) -> dict[str, tuple[int, ...]]:
        return {name: tuple(tensor.shape) for name, tensor in self.network.state_dict().items()}


class EarlyStopping:
    """Tracks validation losses and keeps the best snapshot in memory.

    patience 0: stop the first time the loss strictly increases over the
    previous epoch; ties do not stop. patience p > 0: stop after p + 1
    consecutive epochs without a strict improvement over the best loss.
    The snapshot is refreshed whenever loss <= best, so with patience 0 it is
    always the epoch preceding the stop.
    """

    def __init__(self, patience: int = 0) -> None:
        self.patience = patience
        self.bestLoss = math.inf
        self.bestEpoch: int | None = None
        self.bestState: Any = None
        self.previousLoss = math.inf
        self.staleEpochs = 0

    def step(self, epoch: int, loss: float, state: Any) -> bool:
        """Record one epoch; return True when training should stop."""
        increased = loss > self.previousLoss
        improved = loss < self.bestLoss
        if loss <= self.bestLoss:
            self.bestLoss = loss
            self.bestEpoch = epoch
            self.bestState = state() if callable(state) else state
        self.previousLoss = loss

        if self.patience == 0:
            return increased

        self.staleEpochs = 0 if improved else self.staleEpochs + 1
        return self.staleEpochs > self.patience


def configureDeterminism(deterministic: bool) -> None:
    if deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


def limitThreads() -> None:
    """Worker-process initializer: one intra-op thread per parallel job."""
    torch.set_num_threads(1)


def _toTensor(pixels: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32))


def evaluateLoss(network: nn.Module, dataset: SelfLabeledDataset, *, batchSize: int = 512) -> float:
    """Mean cross-entropy over every pair of a self-labeled dataset, in inference mode."""
    network.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(dataset), batchSize):
            pixels, labels = dataset.batch(np.arange(start, min(start + batchSize, len(dataset))))
            logits = network(_toTensor(pixels))
            total += float(F.cross_entropy(logits.double(), torch.from_numpy(labels), reduction='sum'))
    return total / len(dataset)


def _checkCompatible(trainSet: SelfLabeledDataset, validationSet: SelfLabeledDataset, cfg: ClassifierConfig) -> None:
    if trainSet.specs != validationSet.specs:
        raise ValueError('Train and validation self-labeled sets must come from the same catalog')
    if trainSet.stampShape != validationSet.stampShape:
        raise ValueError(f'Stamp shape mismatch: train {trainSet.stampShape} vs validation {validationSet.stampShape}')
    if trainSet.nClasses != cfg.nClasses:
        raise ValueError(f'Labels span [0, {trainSet.nClasses}) but the classifier has {cfg.nClasses} classes')


def trainClassifier(
    trainSet: SelfLabeledDataset,
    validationSet: SelfLabeledDataset,
    cfg: ClassifierConfig,
) -> ClassifierModel:
    """Fit a fresh network on the self-labeled train set; see EarlyStopping for the stopping rule."""
    _checkCompatible(trainSet, validationSet, cfg)
    configureDeterminism(cfg.deterministic)
    torch.manual_seed(cfg.seed)

    inputShape = trainSet.stampShape
    network = buildArchitecture(cfg.architecture, inputShape, cfg.nClasses)
    optimizer = torch.optim.Adam(
        network.parameters(),
        lr=cfg.learningRate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.adamEpsilon,
    )
    stopper = EarlyStopping(cfg.patience)
    history: list[dict[str, float]] = []
    epochsRun = 0

    for epoch in range(1, cfg.maxEpochs + 1):
        network.train()
        order = np.random.default_rng(np.random.SeedSequence([cfg.seed, epoch])).permutation(len(trainSet))
        lossSum = 0.0
        for start in range(0, len(order), cfg.batchSize):
            pixels, labels = trainSet.batch(order[start:start + cfg.batchSize])
            logits = network(_toTensor(pixels))
            loss = F.cross_entropy(logits, torch.from_numpy(labels))
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, loss.item())
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            lossSum += loss.item() * len(labels)

        validationLoss = evaluateLoss(network, validationSet, batchSize=cfg.evalBatchSize)
        if not math.isfinite(validationLoss):
            raise TrainingDivergedError(epoch, validationLoss)

        epochsRun = epoch
        trainLoss = lossSum / len(trainSet)
        history.append({'epoch': epoch, 'trainLoss': trainLoss, 'validationLoss': validationLoss})
        logger.info('epoch %d | train loss %.5f | val loss %.5f', epoch, trainLoss, validationLoss)

        shouldStop = stopper.step(epoch, validationLoss, lambda: copy.deepcopy(network.state_dict()))
        if cfg.earlyStopping and shouldStop:
            logger.info('early stop at epoch %d | best epoch %d', epoch, stopper.bestEpoch)
            break

    if cfg.earlyStopping:
        network.load_state_dict(stopper.bestState)
        returnedEpoch, returnedLoss = stopper.bestEpoch, stopper.bestLoss
    else:
        returnedEpoch, returnedLoss = epochsRun, history[-1]['validationLoss']
    network.eval()

    metadata = {
        'seed': cfg.seed,
        'epochsRun': epochsRun,
        'returnedEpoch': returnedEpoch,
        'validationLoss': returnedLoss,
        'history': history,
        'inputShape': list(inputShape),
    }
    return ClassifierModel(cfg.architecture, cfg.nClasses, inputShape, network, metadata)


def stableSoftmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax in float64 with the row maximum subtracted first."""
    values = np.asarray(logits, dtype=np.float64)
    shifted = values - values.max(axis=-1, keepdims=True)
    exponentials = np.exp(shifted)
    return exponentials / exponentials.sum(axis=-1, keepdims=True)


def _asPixelBatch(stamps: np.ndarray | Sequence[Stamp]) -> np.ndarray:
    if isinstance(stamps, np.ndarray):
        return stamps
    return np.stack([stamp.pixels for stamp in stamps])


def predictLogits(model: ClassifierModel, stamps: np.ndarray | Sequence[Stamp], *, batchSize: int = 512) -> np.ndarray:
    pixels = _asPixelBatch(stamps)
    if pixels.ndim != 4 or tuple(pixels.shape[1:]) != tuple(model.inputShape):
        raise ValueError(f'Expected stamps of shape {tuple(model.inputShape)}, got batch shape {pixels.shape}')

    model.network.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(pixels), batchSize):
            outputs.append(model.network(_toTensor(pixels[start:start + batchSize])).double().numpy())
    if not outputs:
        return np.zeros((0, model.nClasses))
    return np.concatenate(outputs)


def predictSoftmax(model: ClassifierModel, stamps: np.ndarray | Sequence[Stamp], *, batchSize: int = 512) -> np.ndarray:
    """(n, k) probability rows for a batch of stamps."""
    return stableSoftmax(predictLogits(model, stamps, batchSize=batchSize))
