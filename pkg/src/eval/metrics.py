"""AUROC, thresholded accuracy, Welch's t-test and run aggregation."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Any

import numpy as np
from scipy.special import betainc
from scipy.stats import rankdata

logger = logging.getLogger(__name__)


def _asScores(values: Sequence[float] | np.ndarray, role: str) -> np.ndarray:
    scores = np.asarray(values, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError(f'AUROC needs at least one {role} score')
    return scores


def auroc(positiveScores: Sequence[float] | np.ndarray, negativeScores: Sequence[float] | np.ndarray) -> float:
    """P(positive > negative) + 0.5 * P(tie), from the rank sum of the positives."""
    positives = _asScores(positiveScores, 'positive')
    negatives = _asScores(negativeScores, 'negative')
    ranks = rankdata(np.concatenate([positives, negatives]), method='average')
    nPos, nNeg = positives.size, negatives.size
    # average ranks are half-integers, so twice the U statistic is an exact integer
    doubledU = 2.0 * ranks[:nPos].sum() - nPos * (nPos + 1)
    return float(doubledU / (2.0 * nPos * nNeg))


def aurocExact(positiveScores: Sequence[float], negativeScores: Sequence[float]) -> Fraction:
    """Exhaustive pair count in rational arithmetic."""
    positives = list(_asScores(positiveScores, 'positive'))
    negatives = list(_asScores(negativeScores, 'negative'))
    favorable = Fraction(0)
    for positive in positives:
        for negative in negatives:
            if positive > negative:
                favorable += 1
            elif positive == negative:
                favorable += Fraction(1, 2)
    return favorable / (len(positives) * len(negatives))


def accuracyAtThreshold(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray, threshold: float) -> float:
    """Fraction of samples where (score >= threshold) agrees with the 0/1 label."""
    values = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(labels)
    if values.shape != truth.shape:
        raise ValueError(f'{values.size} scores but {truth.size} labels')
    if values.size == 0:
        return math.nan
    if np.any((truth != 0) & (truth != 1)):
        raise ValueError('Labels must be 0 (outlier) or 1 (inlier)')
    return float(np.mean((values >= threshold) == (truth == 1)))


def welchTTest(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """Two-sided Welch t-test; p from the regularized incomplete beta function."""
    first = np.asarray(a, dtype=np.float64)
    second = np.asarray(b, dtype=np.float64)
    if first.size < 2 or second.size < 2:
        raise ValueError(f'Welch t-test needs at least 2 samples per group, got {first.size} and {second.size}')

    varianceA = first.var(ddof=1) / first.size
    varianceB = second.var(ddof=1) / second.size
    if varianceA == 0 and varianceB == 0:
        raise ValueError('Welch t-test is undefined when both samples have zero variance')

    standardError = math.sqrt(varianceA + varianceB)
    t = float((first.mean() - second.mean()) / standardError)
    df = (varianceA + varianceB) ** 2 / (
        varianceA**2 / (first.size - 1) + varianceB**2 / (second.size - 1)
    )
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return t, min(1.0, p)


def formatPValue(p: float | None) -> str:
    if p is None or not math.isfinite(p):
        return 'n/a'
    return f'{p:.2g}'


@dataclass(frozen=True)
class RunResult:
    """Metrics of one (catalog, seed) run plus the per-sample test scores behind them."""

    catalogName: str
    seed: int
    auroc: float
    accuracy: float
    threshold: float
    configFingerprint: str
    nInliers: int
    nOutliers: int
    scores: tuple[float, ...] = ()
    labels: tuple[int, ...] = ()

    def toDict(self) -> dict[str, Any]:
        return {**asdict(self), 'scores': list(self.scores), 'labels': list(self.labels)}

    @classmethod
    def fromDict(cls, payload: dict[str, Any]) -> RunResult:
        values = {key: payload[key] for key in cls.__dataclass_fields__ if key in payload}
        values['scores'] = tuple(float(score) for score in values.get('scores', ()))
        values['labels'] = tuple(int(label) for label in values.get('labels', ()))
        return cls(**values)

    def rescored(self, threshold: float) -> RunResult:
        """The same run with accuracy recomputed from the stored scores at another threshold."""
        if not self.scores:
            raise ValueError(f'Run {self.catalogName} seed {self.seed} carries no per-sample scores')
        accuracy = accuracyAtThreshold(np.asarray(self.scores), np.asarray(self.labels), threshold)
        return replace(self, threshold=float(threshold), accuracy=accuracy)


def evaluateScores(
    scores: np.ndarray,
    labels: np.ndarray,
    threshold: float,
    *,
    catalogName: str,
    seed: int,
    configFingerprint: str = '',
) -> RunResult:
    """Metrics for one scored test split (label 1 = inlier = positive class)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    inliers, outliers = scores[labels == 1], scores[labels == 0]
    return RunResult(
        catalogName=catalogName,
        seed=int(seed),
        auroc=auroc(inliers, outliers),
        accuracy=accuracyAtThreshold(scores, labels, threshold),
        threshold=float(threshold),
        configFingerprint=configFingerprint,
        nInliers=int(inliers.size),
        nOutliers=int(outliers.size),
        scores=tuple(scores.tolist()),
        labels=tuple(int(label) for label in labels),
    )


def _meanStd(values: list[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    return float(array.mean()), float(array.std(ddof=1)) if array.size > 1 else 0.0


def aggregateRuns(results: Sequence[RunResult]) -> list[dict[str, Any]]:
    """Mean and sample standard deviation per catalog, in first-seen catalog order."""
    grouped: dict[str, list[RunResult]] = {}
    for result in results:
        grouped.setdefault(result.catalogName, []).append(result)

    rows = []
    for catalogName, runs in grouped.items():
        aurocMean, aurocStd = _meanStd([run.auroc for run in runs])
        accuracyMean, accuracyStd = _meanStd([run.accuracy for run in runs])
        rows.append(
            {
                'catalog': catalogName,
                'runs': len(runs),
                'seeds': sorted(run.seed for run in runs),
                'aurocMean': aurocMean,
                'aurocStd': aurocStd,
                'accuracyMean': accuracyMean,
                'accuracyStd': accuracyStd,
            }
        )
    return rows


def welchRows(results: Sequence[RunResult], pairs: Sequence[Sequence[str]]) -> list[dict[str, Any]]:
    """Welch comparisons of per-seed AUROC and accuracy between named catalogs."""
    byCatalog: dict[str, list[RunResult]] = {}
    for result in results:
        byCatalog.setdefault(result.catalogName, []).append(result)

    rows = []
    for first, second in pairs:
        row: dict[str, Any] = {'catalogA': first, 'catalogB': second}
        for metric in ('auroc', 'accuracy'):
            try:
                t, p = welchTTest(
                    [getattr(run, metric) for run in byCatalog.get(first, [])],
                    [getattr(run, metric) for run in byCatalog.get(second, [])],
                )
            except ValueError as error:
                logger.warning('welch | %s vs %s | %s | %s', first, second, metric, error)
                t, p = math.nan, None
            row[f'{metric}T'] = t
            row[f'{metric}P'] = p
        rows.append(row)
    return rows


def formatAggregateTable(rows: list[dict[str, Any]], comparisons: list[dict[str, Any]] | None = None) -> str:
    """Plain-text table: AUROC and accuracy in percent, mean +- sd over runs."""
    catalogWidth = max([len('catalog'), *(len(row['catalog']) for row in rows)])
    lines = [f'{"catalog".ljust(catalogWidth)}  runs  {"AUROC (%)":>16}  {"accuracy (%)":>16}']
    for row in rows:
        auroc = f'{100 * row["aurocMean"]:.2f} +- {100 * row["aurocStd"]:.2f}'
        accuracy = f'{100 * row["accuracyMean"]:.2f} +- {100 * row["accuracyStd"]:.2f}'
        lines.append(f'{row["catalog"].ljust(catalogWidth)}  {row["runs"]:>4}  {auroc:>16}  {accuracy:>16}')
    for comparison in comparisons or []:
        label = f'Welch p ({comparison["catalogA"]}) v/s ({comparison["catalogB"]})'
        lines.append(
            f'{label}: AUROC {formatPValue(comparison["aurocP"])}, accuracy {formatPValue(comparison["accuracyP"])}'
        )
    return '\n'.join(lines) + '\n'
