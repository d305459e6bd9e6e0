"""Synthetic astronomical stamp benchmark with planted rotation/flip invariance.

Channels follow the template / science / difference convention; an optional
fourth channel carries the difference divided by the noise level.

Inliers (real transients):
    template   = A_t * G(c + j, s) + N(0, noise)
    science    = (A_t + dA) * G(c + j, s) + N(0, noise)
    difference = dA * G(c + j, s) + N(0, noise)
  G is a unit-peak circular Gaussian of width s drawn from `psfSigmaRange`, c is
  the frame center and j a jitter drawn uniformly from the disk of radius
  `maxJitter`. Every ingredient is isotropic, so the inlier population is
  rotation- and flip-invariant in distribution.

Outliers (bogus): nothing changed on the sky, so template and science agree.
For a dipole both hold the same static source that was badly subtracted; the
other artifacts sit on empty sky and both channels are pure noise. The
difference channel holds noise plus one artifact:
    dipole     A * (G(c + d/2 u, w) - G(c - d/2 u, w)), separation d in [2.5, 4] px,
               width w in [0.8, 1.2] px, random direction u (bad subtraction)
    hot_pixel  one pixel set to a value in [2, 5] (defective CCD pixel)
    streak     A * exp(-dist(p, segment)^2 / (2 * 0.6^2)) for a segment of random
               angle and length in [side/2, side] passing within 3 px of the center
    edge_step  A on one side of a random chord within 3 px of the center, 0 on the
               other (sharp background discontinuity)
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..config.experimentConfig import artifactKinds, synthDefaults
from ..errors import ConfigError
from ..stamps.stampModel import Stamp, StampDataset, inlierLabel, normalizeChannels, outlierLabel

logger = logging.getLogger(__name__)

inlierStream = 0
outlierStream = 1


@dataclass(frozen=True)
class SynthConfig:
    nInliers: int = synthDefaults['nInliers']
    nOutliers: int = synthDefaults['nOutliers']
    trainSize: int = synthDefaults['trainSize']
    validationSize: int = synthDefaults['validationSize']
    side: int = synthDefaults['side']
    channels: int = synthDefaults['channels']
    psfSigmaRange: tuple[float, float] = tuple(synthDefaults['psfSigmaRange'])
    noiseSigma: float = synthDefaults['noiseSigma']
    maxJitter: float = synthDefaults['maxJitter']
    artifactMix: dict[str, float] = field(default_factory=lambda: dict(synthDefaults['artifactMix']))
    seed: int = synthDefaults['seed']

    def __post_init__(self) -> None:
        object.__setattr__(self, 'psfSigmaRange', tuple(float(value) for value in self.psfSigmaRange))
        unknown = sorted(set(self.artifactMix) - set(artifactKinds))
        if unknown:
            raise ConfigError(f'Unknown artifact kinds {unknown}; valid kinds: {list(artifactKinds)}')
        weights = [float(self.artifactMix.get(kind, 0.0)) for kind in artifactKinds]
        if any(weight < 0 for weight in weights) or abs(sum(weights) - 1.0) > 1e-9:
            raise ConfigError(f'artifactMix must be non-negative and sum to 1, got {self.artifactMix}')
        if self.channels not in (3, 4):
            raise ConfigError(f'channels must be 3 (ZTF-style) or 4 (HiTS-style), got {self.channels}')
        if self.channels == 4 and self.noiseSigma <= 0:
            raise ConfigError('The 4-channel mode divides by noiseSigma, which must be positive')
        if self.side < 5:
            raise ConfigError(f'side must be at least 5 pixels, got {self.side}')
        low, high = self.psfSigmaRange
        if not 0 < low <= high:
            raise ConfigError(f'psfSigmaRange must satisfy 0 < low <= high, got {self.psfSigmaRange}')
        if self.noiseSigma < 0 or self.maxJitter < 0:
            raise ConfigError('noiseSigma and maxJitter must be non-negative')

    @property
    def mixWeights(self) -> np.ndarray:
        return np.array([float(self.artifactMix.get(kind, 0.0)) for kind in artifactKinds])

    def toDict(self) -> dict:
        payload = asdict(self)
        payload['psfSigmaRange'] = list(self.psfSigmaRange)
        return payload


def stampRng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent, platform-stable PCG64 substream for one stamp."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, index])))


def _grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.mgrid[0:side, 0:side]
    return rows.astype(np.float64), cols.astype(np.float64)


def _center(side: int) -> float:
    return (side - 1) / 2.0


def gaussianBlob(side: int, row: float, col: float, sigma: float) -> np.ndarray:
    rows, cols = _grid(side)
    return np.exp(-((rows - row) ** 2 + (cols - col) ** 2) / (2.0 * sigma**2))


def _diskJitter(rng: np.random.Generator, radius: float) -> tuple[float, float]:
    distance = radius * math.sqrt(rng.random())
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return distance * math.sin(angle), distance * math.cos(angle)


def _noise(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, cfg.noiseSigma, size=(cfg.side, cfg.side)) if cfg.noiseSigma > 0 else np.zeros((cfg.side, cfg.side))


def _assemble(cfg: SynthConfig, template: np.ndarray, science: np.ndarray, difference: np.ndarray) -> Stamp:
    planes = [template, science, difference]
    if cfg.channels == 4:
        planes.append(difference / cfg.noiseSigma)
    return Stamp(np.stack(planes).astype(np.float64))


def generateInlier(cfg: SynthConfig, rng: np.random.Generator) -> Stamp:
    """A raw (unnormalized) real-transient stamp."""
    sigma = rng.uniform(*cfg.psfSigmaRange)
    jitterRow, jitterCol = _diskJitter(rng, cfg.maxJitter)
    center = _center(cfg.side)
    profile = gaussianBlob(cfg.side, center + jitterRow, center + jitterCol, sigma)

    templateAmplitude = rng.uniform(1.0, 4.0)
    brightening = rng.uniform(1.0, 4.0)

    template = templateAmplitude * profile + _noise(cfg, rng)
    science = (templateAmplitude + brightening) * profile + _noise(cfg, rng)
    difference = brightening * profile + _noise(cfg, rng)
    return _assemble(cfg, template, science, difference)


def _unitDirection(rng: np.random.Generator) -> tuple[float, float]:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    return math.sin(angle), math.cos(angle)


def renderDipole(side: int, rng: np.random.Generator) -> np.ndarray:
    amplitude = rng.uniform(1.0, 4.0)
    width = rng.uniform(0.8, 1.2)
    separation = rng.uniform(2.5, 4.0)
    unitRow, unitCol = _unitDirection(rng)
    center = _center(side)
    half = separation / 2.0
    positive = gaussianBlob(side, center + half * unitRow, center + half * unitCol, width)
    negative = gaussianBlob(side, center - half * unitRow, center - half * unitCol, width)
    return amplitude * (positive - negative)


def renderHotPixel(side: int, rng: np.random.Generator) -> np.ndarray:
    artifact = np.zeros((side, side))
    row, col = rng.integers(0, side, size=2)
    artifact[row, col] = rng.uniform(2.0, 5.0)
    return artifact


def renderStreak(side: int, rng: np.random.Generator) -> np.ndarray:
    amplitude = rng.uniform(1.0, 3.0)
    length = rng.uniform(side / 2.0, float(side))
    unitRow, unitCol = _unitDirection(rng)
    offsetRow, offsetCol = _diskJitter(rng, 3.0)
    center = _center(side)
    midRow, midCol = center + offsetRow, center + offsetCol

    rows, cols = _grid(side)
    along = (rows - midRow) * unitRow + (cols - midCol) * unitCol
    clamped = np.clip(along, -length / 2.0, length / 2.0)
    nearestRow = midRow + clamped * unitRow
    nearestCol = midCol + clamped * unitCol
    distanceSq = (rows - nearestRow) ** 2 + (cols - nearestCol) ** 2
    return amplitude * np.exp(-distanceSq / (2.0 * 0.6**2))


def renderEdgeStep(side: int, rng: np.random.Generator) -> np.ndarray:
    amplitude = rng.uniform(1.0, 3.0)
    normalRow, normalCol = _unitDirection(rng)
    offset = rng.uniform(-3.0, 3.0)
    center = _center(side)
    rows, cols = _grid(side)
    signedDistance = (rows - center) * normalRow + (cols - center) * normalCol - offset
    return np.where(signedDistance > 0, amplitude, 0.0)


artifactRenderers = {
    'dipole': renderDipole,
    'hot_pixel': renderHotPixel,
    'streak': renderStreak,
    'edge_step': renderEdgeStep,
}


def generateOutlier(cfg: SynthConfig, rng: np.random.Generator, *, kind: str | None = None) -> Stamp:
    """A raw bogus stamp; `kind` forces an artifact type instead of drawing from the mix."""
    if kind is None:
        kind = artifactKinds[int(rng.choice(len(artifactKinds), p=cfg.mixWeights))]
    if kind not in artifactRenderers:
        raise ConfigError(f'Unknown artifact kind {kind!r}; valid kinds: {list(artifactKinds)}')

    staticSource = np.zeros((cfg.side, cfg.side))
    if kind == 'dipole':
        sigma = rng.uniform(*cfg.psfSigmaRange)
        jitterRow, jitterCol = _diskJitter(rng, cfg.maxJitter)
        center = _center(cfg.side)
        staticSource = rng.uniform(1.0, 4.0) * gaussianBlob(cfg.side, center + jitterRow, center + jitterCol, sigma)

    template = staticSource + _noise(cfg, rng)
    science = staticSource + _noise(cfg, rng)
    difference = artifactRenderers[kind](cfg.side, rng) + _noise(cfg, rng)
    return _assemble(cfg, template, science, difference)


def _generateMany(cfg: SynthConfig, stream: int, indices: range) -> np.ndarray:
    generator = generateInlier if stream == inlierStream else generateOutlier
    raw = np.stack([generator(cfg, stampRng(cfg.seed, stream, index)).pixels for index in indices])
    return normalizeChannels(raw)


def generateBenchmark(cfg: SynthConfig) -> dict[str, StampDataset]:
    """Train / validation (inliers only) and a balanced test split, all normalized."""
    testInliers = cfg.nOutliers
    required = cfg.trainSize + cfg.validationSize + testInliers
    if cfg.nInliers < required:
        raise ConfigError(
            f'nInliers={cfg.nInliers} is too small: train {cfg.trainSize} + validation '
            f'{cfg.validationSize} + balanced test {testInliers} need {required}'
        )
    if min(cfg.trainSize, cfg.validationSize, cfg.nOutliers) <= 0:
        raise ConfigError('trainSize, validationSize and nOutliers must all be positive')

    trainEnd = cfg.trainSize
    validationEnd = trainEnd + cfg.validationSize
    train = _generateMany(cfg, inlierStream, range(0, trainEnd))
    validation = _generateMany(cfg, inlierStream, range(trainEnd, validationEnd))
    testIn = _generateMany(cfg, inlierStream, range(validationEnd, validationEnd + testInliers))
    testOut = _generateMany(cfg, outlierStream, range(cfg.nOutliers))

    testLabels = np.concatenate(
        [np.full(testInliers, inlierLabel, dtype=np.uint8), np.full(cfg.nOutliers, outlierLabel, dtype=np.uint8)]
    )
    logger.info(
        'synth | train %d | validation %d | test %d+%d | side %d | channels %d',
        len(train), len(validation), len(testIn), len(testOut), cfg.side, cfg.channels,
    )
    return {
        'train': StampDataset(train, np.ones(len(train), dtype=np.uint8), 'train'),
        'validation': StampDataset(validation, np.ones(len(validation), dtype=np.uint8), 'validation'),
        'test': StampDataset(np.concatenate([testIn, testOut]), testLabels, 'test'),
    }
