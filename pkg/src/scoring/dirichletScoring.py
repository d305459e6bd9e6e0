"""Dirichlet normality scoring.

For each transformation T_i the softmax outputs y(T_i(x)) over the training
inliers are modeled as Dir(alpha_i). A new sample is scored with

    n(x) = 1/k * sum_i (alpha_i - 1) . log y(T_i(x))

Higher scores are more inlier-like. Softmax rows are clipped to
[eps, 1 - eps] and renormalized before both fitting and scoring, so no log
term ever sees 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from ..classifier.training import ClassifierModel, predictSoftmax
from ..config.experimentConfig import scorerDefaults
from ..errors import DirichletConvergenceError, DirichletFitError
from ..stamps.stampModel import Stamp, StampDataset
from ..transforms.stampTransforms import applyBatch
from ..transforms.transformCatalog import TransformSet

logger = logging.getLogger(__name__)

defaultClip = scorerDefaults['clipEpsilon']
# Scale used when every sample is identical and the likelihood grows without bound.
unboundedPrecision = 1e10
minimumStepScale = 2.0**-40


def clipSimplex(probabilities: np.ndarray, epsilon: float = defaultClip) -> np.ndarray:
    clipped = np.clip(np.asarray(probabilities, dtype=np.float64), epsilon, 1.0 - epsilon)
    return clipped / clipped.sum(axis=-1, keepdims=True)


def inverseDigamma(values: np.ndarray | float, *, tolerance: float = 1e-14, maxIterations: int = 100) -> np.ndarray:
    """Solve digamma(x) = y by Newton's method from Minka's starting point."""
    target = np.asarray(values, dtype=np.float64)
    estimate = np.where(target >= -2.22, np.exp(target) + 0.5, -1.0 / (target - digamma(1.0)))
    for _ in range(maxIterations):
        step = (digamma(estimate) - target) / polygamma(1, estimate)
        estimate = estimate - step
        if np.all(np.abs(step) <= tolerance * np.abs(estimate)):
            break
    return estimate


def dirichletLogLikelihood(alpha: np.ndarray, meanLog: np.ndarray) -> float:
    """Mean per-sample log density given the per-coordinate mean of log p."""
    return float(gammaln(alpha.sum()) - gammaln(alpha).sum() + np.dot(alpha - 1.0, meanLog))


def momentMatchingAlpha(samples: np.ndarray) -> np.ndarray:
    """First/second moment estimate; all-ones when it is not strictly positive."""
    mean = samples.mean(axis=0)
    secondMoment = (samples**2).mean(axis=0)
    variance = secondMoment - mean**2
    with np.errstate(divide='ignore', invalid='ignore'):
        precisions = (mean - secondMoment) / variance
    precisions = precisions[np.isfinite(precisions) & (precisions > 0)]
    if precisions.size == 0:
        return np.ones_like(mean)
    alpha = float(np.median(precisions)) * mean
    if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        return np.ones_like(mean)
    return alpha


def _newtonStep(alpha: np.ndarray, meanLog: np.ndarray) -> np.ndarray:
    """H^-1 g for the mean log-likelihood; H = diag(q) + z 11^T inverts in O(k)."""
    total = alpha.sum()
    gradient = digamma(total) - digamma(alpha) + meanLog
    curvature = -polygamma(1, alpha)
    coupling = polygamma(1, total)
    offset = np.sum(gradient / curvature) / (1.0 / coupling + np.sum(1.0 / curvature))
    return (gradient - offset) / curvature


def fitDirichletMle(
    samples: np.ndarray,
    *,
    clipEpsilon: float = defaultClip,
    tolerance: float = scorerDefaults['dirichletTolerance'],
    maxIterations: int = scorerDefaults['dirichletMaxIterations'],
    strict: bool = False,
) -> np.ndarray:
    """Maximum-likelihood Dirichlet parameters by Newton's method.

    Starts from the moment-matching estimate and halves each Newton step until
    alpha stays positive and the log-likelihood does not drop, so every iterate
    is at least as likely as the start. At the stationary point
    digamma(alpha) = digamma(sum(alpha)) + mean(log p). Stops once
    max |d alpha| / alpha < tolerance; running out of iterations logs a warning
    and returns the last iterate, or raises DirichletConvergenceError when
    `strict`.
    """
    values = np.asarray(samples, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 2:
        raise DirichletFitError(f'Need at least 2 probability vectors, got shape {values.shape}')
    if not np.all(np.isfinite(values)):
        raise DirichletFitError('Probability vectors contain non-finite entries')
    if maxIterations < 1:
        raise DirichletFitError(f'maxIterations must be >= 1, got {maxIterations}')

    probabilities = clipSimplex(values, clipEpsilon)
    meanLog = np.log(probabilities).mean(axis=0)

    if np.ptp(probabilities, axis=0).max() == 0.0:
        # identical samples: no finite maximizer, return a point far along the ridge
        return inverseDigamma(digamma(unboundedPrecision) + meanLog)

    alpha = momentMatchingAlpha(probabilities)
    likelihood = dirichletLogLikelihood(alpha, meanLog)
    change = np.inf
    for iteration in range(1, maxIterations + 1):
        step = _newtonStep(alpha, meanLog)
        scale = 1.0
        while scale >= minimumStepScale:
            candidate = alpha - scale * step
            if np.all(candidate > 0):
                candidateLikelihood = dirichletLogLikelihood(candidate, meanLog)
                if candidateLikelihood >= likelihood:
                    break
            scale *= 0.5
        else:
            # no ascent left at floating-point resolution
            change = 0.0
            break
        change = float(np.max(np.abs(candidate - alpha) / alpha))
        alpha, likelihood = candidate, candidateLikelihood
        if change < tolerance:
            break
    else:
        if strict:
            raise DirichletConvergenceError(maxIterations, change)
        logger.warning(
            'dirichlet | no convergence after %d iterations | last relative change %.3e | keeping last iterate',
            maxIterations, change,
        )

    logger.debug('dirichlet | iterations %d | precision %.4g', iteration, alpha.sum())
    return alpha


@dataclass(frozen=True)
class DirichletScorer:
    alpha: np.ndarray
    catalog: TransformSet
    threshold: float | None = None
    clipEpsilon: float = defaultClip

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=np.float64)
        k = len(self.catalog)
        if alpha.shape != (k, k):
            raise ValueError(f'Alpha matrix must be {k}x{k} for catalog {self.catalog.name!r}, got {alpha.shape}')
        if not np.all(alpha > 0):
            raise ValueError('Every Dirichlet parameter must be strictly positive')
        object.__setattr__(self, 'alpha', alpha)

    @property
    def k(self) -> int:
        return len(self.catalog)

    def withThreshold(self, threshold: float) -> DirichletScorer:
        return replace(self, threshold=float(threshold))


def transformedSoftmax(
    model: ClassifierModel,
    pixels: np.ndarray,
    catalog: TransformSet,
    *,
    batchSize: int = scorerDefaults['predictBatchSize'],
) -> np.ndarray:
    """(k, n, k) array: softmax of every stamp under every catalog transformation."""
    if model.nClasses != len(catalog):
        raise ValueError(f'Model has {model.nClasses} outputs but catalog {catalog.name!r} has {len(catalog)} transformations')
    return np.stack([predictSoftmax(model, applyBatch(spec, pixels), batchSize=batchSize) for spec in catalog])


def fitScorer(
    model: ClassifierModel,
    trainInliers: StampDataset,
    catalog: TransformSet,
    *,
    clipEpsilon: float = defaultClip,
    tolerance: float = scorerDefaults['dirichletTolerance'],
    maxIterations: int = scorerDefaults['dirichletMaxIterations'],
    batchSize: int = scorerDefaults['predictBatchSize'],
) -> DirichletScorer:
    """One independent Dirichlet fit per transformation, on its softmax outputs."""
    outputs = transformedSoftmax(model, trainInliers.pixels, catalog, batchSize=batchSize)
    alpha = np.stack(
        [
            fitDirichletMle(outputs[index], clipEpsilon=clipEpsilon, tolerance=tolerance, maxIterations=maxIterations)
            for index in range(len(catalog))
        ]
    )
    logger.info('scorer | catalog %s | k %d | fitted on %d inliers', catalog.name, len(catalog), len(trainInliers))
    return DirichletScorer(alpha, catalog, None, clipEpsilon)


def _checkShapes(alpha: np.ndarray, probabilities: np.ndarray) -> None:
    k = alpha.shape[0]
    if probabilities.ndim != 3 or probabilities.shape[0] != k or probabilities.shape[2] != alpha.shape[1]:
        raise ValueError(f'Softmax outputs of shape {probabilities.shape} do not match alpha of shape {alpha.shape}')


def scoresFromSoftmax(alpha: np.ndarray, probabilities: np.ndarray, *, clipEpsilon: float = defaultClip) -> np.ndarray:
    """Dirichlet normality score for each sample of a (k, n, k) softmax array."""
    alpha = np.asarray(alpha, dtype=np.float64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    _checkShapes(alpha, probabilities)
    logs = np.log(clipSimplex(probabilities, clipEpsilon))
    return np.einsum('ij,inj->n', alpha - 1.0, logs) / alpha.shape[0]


def likelihoodScoresFromSoftmax(alpha: np.ndarray, probabilities: np.ndarray, *, clipEpsilon: float = defaultClip) -> np.ndarray:
    """Mean full Dirichlet log density, normalizing constants included (diagnostic)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    probabilities = np.asarray(probabilities, dtype=np.float64)
    _checkShapes(alpha, probabilities)
    logNormalizer = gammaln(alpha.sum(axis=1)) - gammaln(alpha).sum(axis=1)
    logs = np.log(clipSimplex(probabilities, clipEpsilon))
    perTransformation = logNormalizer[:, None] + np.einsum('ij,inj->in', alpha - 1.0, logs)
    return perTransformation.mean(axis=0)


def simpleScoresFromSoftmax(probabilities: np.ndarray, *, clipEpsilon: float = defaultClip) -> np.ndarray:
    """Mean log-probability assigned to the transformation actually applied (diagnostic)."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    k = probabilities.shape[0]
    logs = np.log(clipSimplex(probabilities, clipEpsilon))
    return logs[np.arange(k), :, np.arange(k)].mean(axis=0)


def normalityScores(scorer: DirichletScorer, model: ClassifierModel, pixels: np.ndarray, *, batchSize: int = 512) -> np.ndarray:
    probabilities = transformedSoftmax(model, pixels, scorer.catalog, batchSize=batchSize)
    return scoresFromSoftmax(scorer.alpha, probabilities, clipEpsilon=scorer.clipEpsilon)


def normalityScore(scorer: DirichletScorer, model: ClassifierModel, stamp: Stamp) -> float:
    return float(normalityScores(scorer, model, stamp.pixels[None])[0])


def likelihoodScores(scorer: DirichletScorer, model: ClassifierModel, pixels: np.ndarray) -> np.ndarray:
    probabilities = transformedSoftmax(model, pixels, scorer.catalog)
    return likelihoodScoresFromSoftmax(scorer.alpha, probabilities, clipEpsilon=scorer.clipEpsilon)


def simpleScores(scorer: DirichletScorer, model: ClassifierModel, pixels: np.ndarray) -> np.ndarray:
    return simpleScoresFromSoftmax(transformedSoftmax(model, pixels, scorer.catalog), clipEpsilon=scorer.clipEpsilon)


minimumValidationInliers = 50


def thresholdFromScores(scores: np.ndarray, percentile: float = scorerDefaults['thresholdPercentile']) -> float:
    """Lower `percentile` of inlier scores, linear interpolation between order statistics."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size < minimumValidationInliers:
        raise ValueError(f'Need at least {minimumValidationInliers} validation inliers, got {values.size}')
    return float(np.percentile(values, percentile, method='linear'))


def fitThreshold(
    scorer: DirichletScorer,
    validationInliers: StampDataset,
    model: ClassifierModel,
    *,
    percentile: float = scorerDefaults['thresholdPercentile'],
) -> float:
    return thresholdFromScores(normalityScores(scorer, model, validationInliers.pixels), percentile)


def classify(scores: np.ndarray, threshold: float) -> np.ndarray:
    """1 (inlier) where score >= threshold, else 0 (outlier)."""
    return (np.asarray(scores) >= threshold).astype(np.uint8)
