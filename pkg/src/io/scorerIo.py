"""GSDS scorer files.

Layout, all little-endian:

    magic          4s    b'GSDS'
    version        u16   2
    k              u32
    nameLength     u16   then nameLength bytes of UTF-8 catalog name
    catalogLength  u32   then catalogLength bytes of UTF-8 catalog text (one spec per line)
    alpha          float64[k * k]   row i is alpha_i
    threshold      float64          NaN when no threshold has been fitted

The catalog text is the custom-catalog file format, so a scorer fitted on any
catalog (named, custom or non-default shift size) restores without outside help.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagicError, CatalogError, VersionMismatchError
from ..scoring.dirichletScoring import DirichletScorer
from ..transforms.transformCatalog import TransformSet, formatCatalogText, parseCatalogText
from .jsonIo import atomicWriteBytes
from .payloadReader import PayloadReader

scorerMagic = b'GSDS'
scorerVersion = 2


def encodeScorer(scorer: DirichletScorer) -> bytes:
    name = scorer.catalog.name.encode('utf-8')
    catalogText = formatCatalogText(scorer.catalog).encode('utf-8')
    threshold = math.nan if scorer.threshold is None else float(scorer.threshold)
    return b''.join(
        [
            struct.pack('<4sHI', scorerMagic, scorerVersion, scorer.k),
            struct.pack('<H', len(name)),
            name,
            struct.pack('<I', len(catalogText)),
            catalogText,
            scorer.alpha.astype('<f8').tobytes(order='C'),
            struct.pack('<d', threshold),
        ]
    )


def decodeScorer(payload: bytes, *, catalog: TransformSet | None = None, source: str = '<bytes>') -> DirichletScorer:
    """Decode a scorer with its stored catalog; a supplied catalog must match it exactly."""
    reader = PayloadReader(payload, source)
    magic, version, k = reader.unpack('<4sHI')
    if magic != scorerMagic:
        raise BadMagicError(f'{source}: bad magic {magic!r}, expected {scorerMagic!r}')
    if version != scorerVersion:
        raise VersionMismatchError(f'{source}: unsupported GSDS version {version}, expected {scorerVersion}')
    (nameLength,) = reader.unpack('<H')
    name = reader.take(nameLength).decode('utf-8')
    (catalogLength,) = reader.unpack('<I')
    stored = parseCatalogText(reader.take(catalogLength).decode('utf-8'), name=name, source=f'{source} (catalog)')
    alpha = np.frombuffer(reader.take(8 * k * k), dtype='<f8').reshape(k, k).astype(np.float64)
    (threshold,) = reader.unpack('<d')
    reader.finish()

    if len(stored) != k:
        raise CatalogError(f'{source}: stored catalog has {len(stored)} transformations but alpha is {k}x{k}')
    if catalog is not None and (catalog.name != name or catalog.specs != stored.specs):
        raise CatalogError(f'{source}: scorer was fitted on {name!r} (k={k}), not {catalog.name!r} (k={len(catalog)})')
    return DirichletScorer(alpha, stored, None if math.isnan(threshold) else threshold)


def saveScorer(scorer: DirichletScorer, filePath: str | Path) -> None:
    atomicWriteBytes(filePath, encodeScorer(scorer))


def loadScorer(filePath: str | Path, *, catalog: TransformSet | None = None) -> DirichletScorer:
    path = Path(filePath)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Scorer file not found: {path}') from error
    return decodeScorer(payload, catalog=catalog, source=str(path))
