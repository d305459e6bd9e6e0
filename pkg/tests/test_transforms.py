from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import CatalogError, TransformError
from src.stamps.stampModel import Stamp
from src.transforms.stampTransforms import apply, applyBatch, convolve2d, gaussianKernel, laplacianKernel
from src.transforms.transformCatalog import (
    TransformSet,
    TransformSpec,
    buildCatalog,
    catalogNames,
    defaultShiftSize,
    formatCatalogText,
    loadCatalogFile,
    parseCatalogText,
    writeCatalogFile,
)


@pytest.fixture
def stamp() -> Stamp:
    return Stamp(np.random.default_rng(0).normal(size=(3, 21, 21)).astype(np.float32))


def test_identity_leaves_stamp_unchanged(stamp):
    np.testing.assert_array_equal(apply(TransformSpec(), stamp).pixels, stamp.pixels)


def test_four_quarter_turns_restore_stamp(stamp):
    result = stamp
    for _ in range(4):
        result = apply(TransformSpec(rotation=90), result)
    np.testing.assert_array_equal(result.pixels, stamp.pixels)


def test_flip_is_an_involution(stamp):
    flip = TransformSpec(flip=True)
    np.testing.assert_array_equal(apply(flip, apply(flip, stamp)).pixels, stamp.pixels)


def test_half_turn_equals_two_quarter_turns(stamp):
    quarter = TransformSpec(rotation=90)
    np.testing.assert_array_equal(
        apply(TransformSpec(rotation=180), stamp).pixels, apply(quarter, apply(quarter, stamp)).pixels
    )


def test_flip_is_horizontal(stamp):
    np.testing.assert_array_equal(apply(TransformSpec(flip=True), stamp).pixels, stamp.pixels[..., ::-1])


def test_shift_moves_content_and_zero_fills(stamp):
    shifted = apply(TransformSpec(shift=(5, -5)), stamp).pixels
    np.testing.assert_array_equal(shifted[:, :16, 5:], stamp.pixels[:, 5:, :16])
    assert np.all(shifted[:, 16:, :] == 0)
    assert np.all(shifted[:, :, :5] == 0)


def test_shift_must_be_smaller_than_stamp():
    with pytest.raises(TransformError):
        apply(TransformSpec(shift=(21, 0)), Stamp(np.zeros((1, 21, 21))))


def test_rotation_needs_square_stamp():
    with pytest.raises(TransformError, match='square'):
        apply(TransformSpec(rotation=90), Stamp(np.zeros((1, 8, 10))))


def test_apply_order_is_flip_then_shift_then_rotation(stamp):
    spec = TransformSpec(flip=True, shift=(5, 0), rotation=90)
    manual = np.rot90(apply(TransformSpec(shift=(5, 0)), Stamp(stamp.pixels[..., ::-1])).pixels, 1, axes=(-2, -1))
    np.testing.assert_array_equal(apply(spec, stamp).pixels, manual)


def test_apply_batch_matches_per_stamp_apply():
    pixels = np.random.default_rng(1).normal(size=(4, 3, 21, 21)).astype(np.float32)
    spec = TransformSpec(flip=True, shift=(0, 5), rotation=270, gauss=True, laplace=True)
    batched = applyBatch(spec, pixels)
    for index in range(4):
        np.testing.assert_array_equal(batched[index], apply(spec, Stamp(pixels[index])).pixels)


def test_apply_is_deterministic(stamp):
    spec = TransformSpec(shift=(-5, 5), gauss=True, laplace=True)
    assert apply(spec, stamp).pixels.tobytes() == apply(spec, stamp).pixels.tobytes()


def test_gaussian_kernel_sums_to_one_and_is_symmetric():
    kernel = gaussianKernel()
    assert kernel.shape == (5, 5)
    assert abs(kernel.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(kernel, kernel[::-1, :])
    np.testing.assert_allclose(kernel, kernel[:, ::-1])
    np.testing.assert_allclose(kernel, np.rot90(kernel))


def test_laplacian_kernel_matches_closed_form():
    sigma = 0.5
    expected = np.empty((5, 5))
    for row, u in enumerate(range(-2, 3)):
        for col, v in enumerate(range(-2, 3)):
            r2 = (u * u + v * v) / (2 * sigma * sigma)
            expected[row, col] = -(1 - r2) * math.exp(-r2) / (math.pi * sigma**4)
    expected -= expected.mean()
    np.testing.assert_allclose(laplacianKernel(), expected, rtol=1e-12, atol=1e-12)
    assert abs(laplacianKernel().sum()) < 1e-12


def test_kernel_accessors_return_copies():
    kernel = gaussianKernel()
    kernel[0, 0] = 99.0
    assert gaussianKernel()[0, 0] != 99.0


def test_constant_channel_convolution():
    channel = np.full((21, 21), 0.7)
    np.testing.assert_allclose(convolve2d(channel, gaussianKernel()), channel, atol=1e-12)
    np.testing.assert_allclose(convolve2d(channel, laplacianKernel()), 0.0, atol=1e-10)


def test_impulse_response_is_the_kernel():
    channel = np.zeros((21, 21))
    channel[10, 10] = 1.0
    response = convolve2d(channel, gaussianKernel())
    np.testing.assert_allclose(response[8:13, 8:13], gaussianKernel(), atol=1e-15)
    response[8:13, 8:13] = 0.0
    assert np.all(response == 0.0)


def test_convolution_rejects_small_channel():
    with pytest.raises(TransformError, match='smaller'):
        convolve2d(np.zeros((4, 4)), gaussianKernel())


@pytest.mark.parametrize(
    ('name', 'size'),
    [
        ('geo72', 72),
        ('geo81G', 81),
        ('geo81L', 81),
        ('geo99', 99),
        ('geo144G', 144),
        ('geo144L', 144),
        ('geo288', 288),
        ('flipshift18', 18),
        ('shifts9', 9),
        ('geo9', 9),
        ('shifts36', 36),
        ('geo36', 36),
    ],
)
def test_catalog_sizes(name, size):
    catalog = buildCatalog(name)
    assert len(catalog) == size
    assert catalog[0].isIdentity
    assert len(set(catalog)) == size


def test_catalog_enumeration_is_stable():
    assert buildCatalog('geo99').specs == buildCatalog('geo99').specs


def test_geo72_is_the_geometric_product_in_canonical_order():
    catalog = buildCatalog('geo72')
    assert all(not spec.gauss and not spec.laplace for spec in catalog)
    assert [spec.rotation for spec in catalog[:4]] == [0, 90, 180, 270]
    assert catalog[4].shift == (0, -5)
    assert all(spec.flip for spec in catalog[36:])


def test_geo99_adds_kernels_on_shift_only_specs():
    extra = buildCatalog('geo99')[72:]
    assert len(extra) == 27
    assert all(not spec.flip and spec.rotation == 0 for spec in extra)
    assert sum(spec.gauss and not spec.laplace for spec in extra) == 9
    assert sum(spec.laplace and not spec.gauss for spec in extra) == 9
    assert sum(spec.gauss and spec.laplace for spec in extra) == 9


def test_flipshift18_pairs_differ_only_by_flip():
    catalog = buildCatalog('flipshift18')
    for index in range(9):
        assert not catalog[index].flip
        assert catalog[index + 9].flip
        assert catalog[index + 9].shift == catalog[index].shift


def test_unknown_catalog_lists_valid_names():
    with pytest.raises(CatalogError) as info:
        buildCatalog('geo1000')
    for name in ('geo72', 'geo99', 'flipshift18', 'custom-from-file'):
        assert name in str(info.value)


def test_catalog_names_include_custom():
    assert 'custom-from-file' in catalogNames()


def test_default_shift_size():
    assert defaultShiftSize(21) == 5
    assert defaultShiftSize(63) == 16


def test_operation_count_and_label():
    spec = TransformSpec(flip=True, shift=(5, -5), rotation=90, gauss=True, laplace=True)
    assert spec.operationCount == 5
    assert spec.label == 'flip+shift[+5;-5]+rot90+gauss+laplace'
    assert TransformSpec().label == 'identity'
    assert TransformSpec(rotation=180).operationCount == 1


def test_catalog_text_round_trip(tmp_path):
    catalog = buildCatalog('shifts36')
    path = tmp_path / 'shifts.catalog'
    writeCatalogFile(catalog, path)
    loaded = loadCatalogFile(path, name='shifts36')
    assert loaded.specs == catalog.specs
    assert formatCatalogText(loaded) == formatCatalogText(catalog)


def test_catalog_parser_reports_line_numbers():
    text = 'flip=0 shift=0,0 rot=0 gauss=0 laplace=0\n# comment\nflip=2 shift=0,0 rot=0 gauss=0 laplace=0\n'
    with pytest.raises(CatalogError, match=':3:'):
        parseCatalogText(text)


def test_catalog_parser_rejects_bad_rotation():
    with pytest.raises(CatalogError, match=':1:'):
        parseCatalogText('flip=0 shift=0,0 rot=45 gauss=0 laplace=0\n')


def test_catalog_must_start_with_identity():
    with pytest.raises(CatalogError, match='identity'):
        TransformSet((TransformSpec(flip=True), TransformSpec()), 'bad')


def test_catalog_rejects_duplicates():
    with pytest.raises(CatalogError, match='duplicate'):
        TransformSet((TransformSpec(), TransformSpec(flip=True), TransformSpec(flip=True)), 'bad')


def test_custom_catalog_from_file(tmp_path):
    path = tmp_path / 'custom.catalog'
    path.write_text('flip=0 shift=0,0 rot=0 gauss=0 laplace=0\nflip=1 shift=0,0 rot=0 gauss=0 laplace=0\n')
    catalog = buildCatalog('custom-from-file', catalogPath=path)
    assert len(catalog) == 2
    assert catalog.name == 'custom-from-file'
