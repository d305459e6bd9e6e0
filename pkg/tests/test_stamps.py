from __future__ import annotations

import numpy as np
import pytest

from src.stamps.stampModel import (
    Stamp,
    StampDataset,
    centerCrop,
    normalizeChannels,
    normalizeStamp,
    prepareDataset,
)


def _stampFromChannel(values) -> Stamp:
    return Stamp(np.array(values, dtype=np.float64).reshape(1, 1, -1))


def test_normalize_maps_endpoints_and_midpoint():
    result = normalizeStamp(_stampFromChannel([0.0, 5.0, 10.0]))
    np.testing.assert_allclose(result.pixels.ravel(), [-1.0, 0.0, 1.0])


def test_constant_channel_maps_to_zero():
    result = normalizeStamp(_stampFromChannel([7.3, 7.3, 7.3]))
    assert np.all(result.pixels == 0.0)


def test_nan_is_replaced_before_min_max():
    result = normalizeStamp(_stampFromChannel([np.nan, 2.0, 4.0]))
    np.testing.assert_allclose(result.pixels.ravel(), [-1.0, 0.0, 1.0])


def test_channels_are_normalized_independently():
    rng = np.random.default_rng(3)
    pixels = rng.normal(size=(3, 8, 8)) * np.array([1.0, 10.0, 100.0])[:, None, None]
    result = normalizeStamp(Stamp(pixels)).pixels
    assert result.dtype == np.float32
    np.testing.assert_allclose(result.min(axis=(1, 2)), -1.0, atol=1e-6)
    np.testing.assert_allclose(result.max(axis=(1, 2)), 1.0, atol=1e-6)


def test_normalize_is_idempotent():
    rng = np.random.default_rng(4)
    once = normalizeChannels(rng.uniform(-50, 50, size=(2, 3, 9, 9)))
    twice = normalizeChannels(once)
    np.testing.assert_allclose(twice, once, atol=1e-6)


def test_normalize_rejects_empty_stamp():
    with pytest.raises(ValueError, match='empty'):
        normalizeChannels(np.zeros((1, 0, 0)))


def test_center_crop_63_to_21_keeps_middle_window():
    pixels = np.arange(63 * 63, dtype=np.float64).reshape(1, 63, 63)
    cropped = centerCrop(Stamp(pixels), 21).pixels
    np.testing.assert_array_equal(cropped, pixels[:, 21:42, 21:42])


def test_center_crop_same_size_is_identity():
    pixels = np.random.default_rng(0).normal(size=(3, 21, 21))
    np.testing.assert_array_equal(centerCrop(Stamp(pixels), 21).pixels, pixels)


def test_center_crop_odd_remainder_drops_high_side():
    pixels = np.arange(16, dtype=np.float64).reshape(1, 4, 4)
    np.testing.assert_array_equal(centerCrop(Stamp(pixels), 3).pixels, pixels[:, 0:3, 0:3])


def test_center_crop_rejects_oversized_window():
    with pytest.raises(ValueError, match='exceeds'):
        centerCrop(Stamp(np.zeros((1, 5, 5))), 6)


def test_training_split_rejects_outliers():
    with pytest.raises(ValueError, match='only contain inliers'):
        StampDataset(np.zeros((2, 1, 4, 4)), np.array([1, 0]), 'train')


def test_test_split_may_be_mixed():
    dataset = StampDataset(np.zeros((2, 1, 4, 4)), np.array([1, 0]), 'test')
    assert len(dataset) == 2
    assert dataset.stampShape == (1, 4, 4)


def test_from_stamps_requires_shared_shape():
    with pytest.raises(ValueError, match='share one shape'):
        StampDataset.fromStamps([Stamp(np.zeros((1, 4, 4))), Stamp(np.zeros((1, 5, 5)))])


def test_prepare_dataset_crops_then_normalizes():
    rng = np.random.default_rng(9)
    raw = StampDataset(rng.normal(size=(4, 3, 25, 25)) * 30.0, None, 'test')
    prepared = prepareDataset(raw, cropSize=21)
    assert prepared.stampShape == (3, 21, 21)
    assert prepared.pixels.min() >= -1.0 and prepared.pixels.max() <= 1.0
