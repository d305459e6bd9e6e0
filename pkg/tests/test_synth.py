from __future__ import annotations

import numpy as np
import pytest
from scipy.stats import ks_2samp

from src.config.experimentConfig import edgeDominatedMix
from src.errors import ConfigError
from src.eval.metrics import auroc
from src.eval.oracleDetector import laplacianOracleScores
from src.synth.stampSynth import (
    SynthConfig,
    gaussianBlob,
    generateBenchmark,
    generateInlier,
    generateOutlier,
    stampRng,
)

smallConfig = SynthConfig(nInliers=90, nOutliers=20, trainSize=50, validationSize=20, seed=11)


def _only(kind: str, **overrides) -> SynthConfig:
    mix = {name: 0.0 for name in ('dipole', 'hot_pixel', 'streak', 'edge_step')}
    mix[kind] = 1.0
    return SynthConfig(artifactMix=mix, **overrides)


def test_benchmark_is_deterministic():
    first = generateBenchmark(smallConfig)
    second = generateBenchmark(smallConfig)
    for tag in ('train', 'validation', 'test'):
        assert first[tag].pixels.tobytes() == second[tag].pixels.tobytes()
        np.testing.assert_array_equal(first[tag].labels, second[tag].labels)


def test_different_seeds_give_different_data():
    other = SynthConfig(nInliers=90, nOutliers=20, trainSize=50, validationSize=20, seed=12)
    assert generateBenchmark(smallConfig)['train'].pixels.tobytes() != generateBenchmark(other)['train'].pixels.tobytes()


def test_split_sizes_and_balance():
    splits = generateBenchmark(smallConfig)
    assert len(splits['train']) == 50
    assert len(splits['validation']) == 20
    assert len(splits['test']) == 40
    assert splits['test'].labels.mean() == 0.5
    assert np.all(splits['train'].labels == 1)
    assert splits['train'].stampShape == (3, 21, 21)


def test_benchmark_is_normalized():
    splits = generateBenchmark(smallConfig)
    for dataset in splits.values():
        assert dataset.pixels.min() >= -1.0
        assert dataset.pixels.max() <= 1.0
        assert not np.isnan(dataset.pixels).any()


def test_insufficient_inliers_are_rejected():
    with pytest.raises(ConfigError, match='too small'):
        generateBenchmark(SynthConfig(nInliers=50, nOutliers=20, trainSize=40, validationSize=20))


def test_artifact_mix_must_sum_to_one():
    with pytest.raises(ConfigError, match='sum to 1'):
        SynthConfig(artifactMix={'dipole': 0.5, 'hot_pixel': 0.2, 'streak': 0.2, 'edge_step': 0.2})


def test_unknown_artifact_kind_is_rejected():
    with pytest.raises(ConfigError, match='Unknown artifact'):
        SynthConfig(artifactMix={'cosmic_ray': 1.0})


def test_edge_dominated_mix_is_valid():
    assert SynthConfig(artifactMix=edgeDominatedMix).mixWeights.sum() == pytest.approx(1.0)


def test_noiseless_inlier_difference_is_centered_gaussian():
    cfg = SynthConfig(noiseSigma=0.0, maxJitter=0.0)
    difference = generateInlier(cfg, stampRng(0, 0, 0)).pixels[2]
    peak = difference[10, 10]
    assert peak == difference.max()
    sigma = np.sqrt(-1.0 / (2.0 * np.log(difference[10, 11] / peak)))
    np.testing.assert_allclose(difference, peak * gaussianBlob(21, 10.0, 10.0, sigma), rtol=1e-9, atol=1e-12)


def test_stamp_rng_is_reproducible():
    assert stampRng(5, 1, 7).random() == stampRng(5, 1, 7).random()
    assert stampRng(5, 1, 7).random() != stampRng(5, 0, 7).random()


def test_hot_pixel_stands_out_from_robust_scale():
    cfg = _only('hot_pixel')
    for index in range(20):
        difference = generateOutlier(cfg, stampRng(1, 1, index)).pixels[2]
        robustScale = 1.4826 * np.median(np.abs(difference - np.median(difference)))
        assert np.sum(np.abs(difference) > 5.0 * robustScale) == 1


def _centroid(mask: np.ndarray, weights: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    values = weights[rows, cols]
    return np.array([np.sum(rows * values), np.sum(cols * values)]) / values.sum()


def test_dipole_has_opposite_blobs_two_to_five_pixels_apart():
    cfg = _only('dipole', noiseSigma=0.0)
    for index in range(20):
        difference = generateOutlier(cfg, stampRng(2, 1, index)).pixels[2]
        positive = difference > 0.3 * difference.max()
        negative = difference < 0.3 * difference.min()
        assert positive.any() and negative.any()
        distance = np.linalg.norm(_centroid(positive, difference) - _centroid(negative, -difference))
        assert 2.0 <= distance <= 5.0


def test_streak_outliers_contain_a_line_segment():
    cfg = _only('streak', noiseSigma=0.0)
    for index in range(20):
        difference = generateOutlier(cfg, stampRng(3, 1, index)).pixels[2]
        rows, cols = np.nonzero(difference > 0.5 * difference.max())
        covariance = np.cov(np.vstack([rows, cols]).astype(np.float64))
        smaller, larger = np.linalg.eigvalsh(covariance)
        # a thin segment at least side/2 long is strongly elongated along one axis
        assert larger > 4.0 * max(smaller, 0.25)
        assert larger > 5.0


@pytest.mark.parametrize('kind', ['hot_pixel', 'streak', 'edge_step'])
def test_sky_artifacts_have_empty_template_and_science(kind):
    cfg = _only(kind)
    for index in range(10):
        template, science = generateOutlier(cfg, stampRng(4, 1, index)).pixels[:2]
        assert np.abs(template).max() < 6.0 * cfg.noiseSigma
        assert np.abs(science).max() < 6.0 * cfg.noiseSigma


def test_dipoles_keep_the_badly_subtracted_source():
    cfg = _only('dipole')
    center = cfg.side // 2
    for index in range(10):
        template, science = generateOutlier(cfg, stampRng(5, 1, index)).pixels[:2]
        assert template[center - 1 : center + 2, center - 1 : center + 2].max() > 0.5
        assert science[center - 1 : center + 2, center - 1 : center + 2].max() > 0.5


def test_four_channel_mode_adds_scaled_difference():
    cfg = SynthConfig(nInliers=40, nOutliers=10, trainSize=20, validationSize=10, channels=4)
    test = generateBenchmark(cfg)['test']
    assert test.stampShape == (4, 21, 21)
    np.testing.assert_allclose(test.pixels[:, 3], test.pixels[:, 2], atol=1e-5)


def _rotationFlipZScores(pixels: np.ndarray, operation) -> np.ndarray:
    differences = (pixels - operation(pixels)).astype(np.float64)
    spread = differences.std(axis=0, ddof=1)
    mask = spread > 0
    return differences.mean(axis=0)[mask] / (spread[mask] / np.sqrt(len(pixels)))


def test_inlier_mean_image_is_rotation_and_flip_symmetric():
    cfg = SynthConfig(nInliers=2001, nOutliers=1, trainSize=1999, validationSize=1, seed=5)
    pixels = generateBenchmark(cfg)['train'].pixels
    for operation in (
        lambda values: np.rot90(values, 1, axes=(-2, -1)),
        lambda values: values[..., ::-1],
    ):
        assert np.abs(_rotationFlipZScores(pixels, operation)).max() < 5.5


def _centroidColumn(pixels: np.ndarray) -> np.ndarray:
    weights = pixels[:, 2] + 1.0
    cols = np.arange(pixels.shape[-1])
    return (weights * cols).sum(axis=(1, 2)) / weights.sum(axis=(1, 2))


@pytest.mark.slow
def test_planted_invariance_two_sample_moments():
    cfg = SynthConfig(nInliers=10001, nOutliers=1, trainSize=9999, validationSize=1, seed=21)
    pixels = generateBenchmark(cfg)['train'].pixels
    original, other = pixels[:5000], pixels[5000:10000]
    rotated = np.rot90(other, 1, axes=(-2, -1))
    flipped = other[..., ::-1]
    for transformed in (rotated, flipped):
        assert ks_2samp(_centroidColumn(original), _centroidColumn(transformed)).pvalue > 0.01
        assert ks_2samp(original[:, 2].std(axis=(1, 2)), transformed[:, 2].std(axis=(1, 2))).pvalue > 0.01


@pytest.mark.slow
def test_laplacian_oracle_detects_artifacts():
    cfg = SynthConfig()
    test = generateBenchmark(cfg)['test']
    scores = laplacianOracleScores(test.pixels)
    isInlier = test.labels == 1
    assert auroc(scores[isInlier], scores[~isInlier]) >= 0.8
