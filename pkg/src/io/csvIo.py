"""CSV artifacts: per-sample scores and discrimination matrices.

Floats are written with `repr` so a read-back is exact and reruns produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .jsonIo import atomicWriteText

scoreColumns = ('sample_index', 'normality_score', 'predicted_label')


def formatScoreCsv(scores: np.ndarray, predicted: np.ndarray) -> str:
    if len(scores) != len(predicted):
        raise ValueError(f'{len(scores)} scores but {len(predicted)} predicted labels')
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(scoreColumns)
    for index, (score, label) in enumerate(zip(scores, predicted)):
        writer.writerow([index, repr(float(score)), int(label)])
    return buffer.getvalue()


def writeScoreCsv(filePath: str | Path, scores: np.ndarray, predicted: np.ndarray) -> None:
    atomicWriteText(filePath, formatScoreCsv(scores, predicted))


def readScoreCsv(filePath: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Return (scores float64, predicted uint8) ordered by sample_index."""
    path = Path(filePath)
    try:
        with path.open(newline='', encoding='utf-8') as handle:
            rows = list(csv.DictReader(handle))
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Score file not found: {path}') from error

    if rows and set(scoreColumns) - set(rows[0]):
        raise ValueError(f'{path}: expected columns {", ".join(scoreColumns)}')
    rows.sort(key=lambda row: int(row['sample_index']))
    scores = np.array([float(row['normality_score']) for row in rows], dtype=np.float64)
    predicted = np.array([int(row['predicted_label']) for row in rows], dtype=np.uint8)
    return scores, predicted


def formatMatrixCsv(matrix: np.ndarray, labels: list[str]) -> str:
    if matrix.shape != (len(labels), len(labels)):
        raise ValueError(f'Matrix of shape {matrix.shape} does not match {len(labels)} labels')
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(labels)
    for row in matrix:
        writer.writerow([repr(float(value)) for value in row])
    return buffer.getvalue()


def writeMatrixCsv(filePath: str | Path, matrix: np.ndarray, labels: list[str]) -> None:
    atomicWriteText(filePath, formatMatrixCsv(matrix, labels))


def readMatrixCsv(filePath: str | Path) -> tuple[np.ndarray, list[str]]:
    path = Path(filePath)
    try:
        with path.open(newline='', encoding='utf-8') as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Matrix file not found: {path}') from error

    if not rows:
        raise ValueError(f'{path}: empty matrix file')
    labels, body = rows[0], rows[1:]
    if len(body) != len(labels) or any(len(row) != len(labels) for row in body):
        raise ValueError(f'{path}: expected a {len(labels)}x{len(labels)} matrix under the header')
    return np.array([[float(value) for value in row] for row in body], dtype=np.float64), labels
