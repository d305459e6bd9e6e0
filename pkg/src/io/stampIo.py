"""STMP dataset files.

Layout, all little-endian:

    magic    4s   b'STMP'
    version  u16  1
    flags    u16  bit0 = labels present
    nSamples u64
    channels u32
    height   u32
    width    u32
    pixels   float32[nSamples * channels * height * width]   (sample, channel, row, col)
    labels   u8[nSamples]                                    only when bit0 is set
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, DimensionOverflowError, TrailingBytesError, TruncatedPayloadError, VersionMismatchError
from ..stamps.stampModel import StampDataset
from .jsonIo import atomicWriteBytes

stmpMagic = b'STMP'
stmpVersion = 1
labelsFlag = 0x1
headerFormat = struct.Struct('<4sHHQIII')
maxPayloadBytes = 2**63 - 1


def encodeDataset(dataset: StampDataset) -> bytes:
    samples, channels, height, width = dataset.pixels.shape
    flags = labelsFlag if dataset.labels is not None else 0
    parts = [
        headerFormat.pack(stmpMagic, stmpVersion, flags, samples, channels, height, width),
        dataset.pixels.astype('<f4', copy=False).tobytes(order='C'),
    ]
    if dataset.labels is not None:
        parts.append(dataset.labels.astype(np.uint8).tobytes())
    return b''.join(parts)


def decodeDataset(payload: bytes, *, splitTag: str = 'train', source: str = '<bytes>') -> StampDataset:
    if len(payload) < headerFormat.size:
        raise TruncatedPayloadError(
            f'{source}: header needs {headerFormat.size} bytes, file has {len(payload)}'
        )

    magic, version, flags, samples, channels, height, width = headerFormat.unpack_from(payload, 0)
    if magic != stmpMagic:
        raise BadMagicError(f'{source}: bad magic {magic!r}, expected {stmpMagic!r}')
    if version != stmpVersion:
        raise VersionMismatchError(f'{source}: unsupported STMP version {version}, expected {stmpVersion}')

    valueCount = samples * channels * height * width
    pixelBytes = valueCount * 4
    labelBytes = samples if flags & labelsFlag else 0
    if pixelBytes + labelBytes > maxPayloadBytes:
        raise DimensionOverflowError(
            f'{source}: dimensions {samples}x{channels}x{height}x{width} overflow the payload size'
        )

    expected = headerFormat.size + pixelBytes + labelBytes
    if len(payload) < expected:
        raise TruncatedPayloadError(f'{source}: expected {expected} bytes, file has {len(payload)}')
    if len(payload) > expected:
        raise TrailingBytesError(f'{source}: {len(payload) - expected} unexpected trailing bytes after the last record')

    offset = headerFormat.size
    pixels = np.frombuffer(payload, dtype='<f4', count=valueCount, offset=offset)
    pixels = pixels.reshape(samples, channels, height, width).astype(np.float32)

    labels = None
    if labelBytes:
        labels = np.frombuffer(payload, dtype=np.uint8, count=samples, offset=offset + pixelBytes).copy()

    return StampDataset(pixels, labels, splitTag)


def writeDataset(dataset: StampDataset, filePath: str | Path) -> None:
    atomicWriteBytes(filePath, encodeDataset(dataset))


def readDataset(filePath: str | Path, *, splitTag: str | None = None) -> StampDataset:
    """Read an STMP file; the split tag defaults to the file stem when it names a split."""
    path = Path(filePath)
    if splitTag is None:
        splitTag = path.stem if path.stem in ('train', 'validation', 'test') else 'test'
    try:
        payload = path.read_bytes()
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Dataset file not found: {path}') from error
    return decodeDataset(payload, splitTag=splitTag, source=str(path))
