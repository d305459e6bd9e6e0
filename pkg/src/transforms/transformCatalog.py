"""Transformation specs and the named catalogs built from them.

Catalogs are enumerated in one canonical order, lexicographic over
(laplace, gauss, flip, shiftIndex, rotationIndex) with False < True. Every
named catalog is a filter over the full 288-spec product, so each inherits
that order and starts with the identity.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from pathlib import Path

from ..errors import CatalogError
from ..io.jsonIo import atomicWriteText

rotations = (0, 90, 180, 270)
shiftDirections = (0, -1, 1)


def defaultShiftSize(width: int) -> int:
    """One quarter of the frame, rounded half up (5 px for 21x21 stamps)."""
    return int(0.25 * width + 0.5)


@dataclass(frozen=True, order=True)
class TransformSpec:
    flip: bool = False
    shift: tuple[int, int] = (0, 0)
    rotation: int = 0
    gauss: bool = False
    laplace: bool = False

    def __post_init__(self) -> None:
        if self.rotation not in rotations:
            raise CatalogError(f'Rotation must be one of {rotations}, got {self.rotation}')
        if len(self.shift) != 2:
            raise CatalogError(f'Shift must be a (dx, dy) pair, got {self.shift}')
        object.__setattr__(self, 'shift', (int(self.shift[0]), int(self.shift[1])))

    @property
    def isIdentity(self) -> bool:
        return self.operationCount == 0

    @property
    def operationCount(self) -> int:
        return (
            int(self.flip)
            + int(self.shift != (0, 0))
            + int(self.rotation != 0)
            + int(self.gauss)
            + int(self.laplace)
        )

    @property
    def label(self) -> str:
        if self.isIdentity:
            return 'identity'
        parts = []
        if self.flip:
            parts.append('flip')
        if self.shift != (0, 0):
            parts.append(f'shift[{self.shift[0]:+d};{self.shift[1]:+d}]')
        if self.rotation:
            parts.append(f'rot{self.rotation}')
        if self.gauss:
            parts.append('gauss')
        if self.laplace:
            parts.append('laplace')
        return '+'.join(parts)

    def toLine(self) -> str:
        dx, dy = self.shift
        return (
            f'flip={int(self.flip)} shift={dx},{dy} rot={self.rotation} '
            f'gauss={int(self.gauss)} laplace={int(self.laplace)}'
        )


@dataclass(frozen=True)
class TransformSet:
    """Ordered catalog of k specs; index i is the classifier label of specs[i]."""

    specs: tuple[TransformSpec, ...]
    name: str

    def __post_init__(self) -> None:
        specs = tuple(self.specs)
        object.__setattr__(self, 'specs', specs)
        if not specs:
            raise CatalogError(f'Catalog {self.name!r} is empty')
        if not specs[0].isIdentity:
            raise CatalogError(f'Catalog {self.name!r} must start with the identity transformation')
        if len(set(specs)) != len(specs):
            raise CatalogError(f'Catalog {self.name!r} contains duplicate transformations')

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, index: int) -> TransformSpec:
        return self.specs[index]

    def __iter__(self):
        return iter(self.specs)

    @property
    def labels(self) -> list[str]:
        return [spec.label for spec in self.specs]

    def subset(self, indices: Iterable[int], name: str) -> TransformSet:
        return TransformSet(tuple(self.specs[index] for index in sorted(indices)), name)


def shiftOffsets(shiftSize: int) -> list[tuple[int, int]]:
    """The 9 shifts in index order; index 0 is (0, 0)."""
    return [(dx * shiftSize, dy * shiftSize) for dx, dy in itertools.product(shiftDirections, repeat=2)]


def enumerateAll(shiftSize: int) -> list[TransformSpec]:
    offsets = shiftOffsets(shiftSize)
    return [
        TransformSpec(flip=flip, shift=offsets[shiftIndex], rotation=rotations[rotationIndex], gauss=gauss, laplace=laplace)
        for laplace, gauss, flip, shiftIndex, rotationIndex in itertools.product(
            (False, True), (False, True), (False, True), range(9), range(4)
        )
    ]


def _isGeometric(spec: TransformSpec) -> bool:
    return not spec.gauss and not spec.laplace


def _isShiftOnly(spec: TransformSpec) -> bool:
    return not spec.flip and spec.rotation == 0


catalogFilters: dict[str, Callable[[TransformSpec], bool]] = {
    'geo72': _isGeometric,
    'geo81G': lambda spec: _isGeometric(spec) or (_isShiftOnly(spec) and spec.gauss and not spec.laplace),
    'geo81L': lambda spec: _isGeometric(spec) or (_isShiftOnly(spec) and spec.laplace and not spec.gauss),
    'geo99': lambda spec: _isGeometric(spec) or _isShiftOnly(spec),
    'geo144G': lambda spec: not spec.laplace,
    'geo144L': lambda spec: not spec.gauss,
    'geo288': lambda spec: True,
    'shifts9': lambda spec: _isGeometric(spec) and _isShiftOnly(spec),
    'shifts36': _isShiftOnly,
    'flipshift18': lambda spec: _isGeometric(spec) and spec.rotation == 0,
}
catalogAliases = {'geo9': 'shifts9', 'geo36': 'shifts36'}
customCatalogName = 'custom-from-file'


def catalogNames() -> list[str]:
    return [*catalogFilters, *catalogAliases, customCatalogName]


def buildCatalog(name: str, *, shiftSize: int = 5, catalogPath: str | Path | None = None) -> TransformSet:
    """Build a named catalog, or load one from `catalogPath` for custom-from-file."""
    if name == customCatalogName or (name not in catalogFilters and name not in catalogAliases and catalogPath):
        if catalogPath is None:
            raise CatalogError(f'Catalog {customCatalogName!r} needs a catalog file path')
        return loadCatalogFile(catalogPath, name=name)

    resolved = catalogAliases.get(name, name)
    keep = catalogFilters.get(resolved)
    if keep is None:
        raise CatalogError(f'Unknown catalog {name!r}; valid catalogs: {", ".join(catalogNames())}')
    return TransformSet(tuple(spec for spec in enumerateAll(shiftSize) if keep(spec)), name)


_linePattern = re.compile(
    r'^flip=(?P<flip>[01])\s+shift=(?P<dx>[+-]?\d+),(?P<dy>[+-]?\d+)\s+rot=(?P<rot>0|90|180|270)'
    r'\s+gauss=(?P<gauss>[01])\s+laplace=(?P<laplace>[01])$'
)


def parseCatalogText(text: str, *, name: str = customCatalogName, source: str = '<text>') -> TransformSet:
    specs: list[TransformSpec] = []
    for lineNumber, rawLine in enumerate(text.splitlines(), start=1):
        line = rawLine.split('#', 1)[0].strip()
        if not line:
            continue
        match = _linePattern.match(line)
        if match is None:
            raise CatalogError(f'{source}:{lineNumber}: malformed catalog line {rawLine.strip()!r}')
        specs.append(
            TransformSpec(
                flip=match['flip'] == '1',
                shift=(int(match['dx']), int(match['dy'])),
                rotation=int(match['rot']),
                gauss=match['gauss'] == '1',
                laplace=match['laplace'] == '1',
            )
        )
    return TransformSet(tuple(specs), name)


def loadCatalogFile(filePath: str | Path, *, name: str | None = None) -> TransformSet:
    path = Path(filePath)
    try:
        text = path.read_text(encoding='utf-8')
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Catalog file not found: {path}') from error
    return parseCatalogText(text, name=name or path.stem, source=str(path))


def formatCatalogText(catalog: TransformSet) -> str:
    lines = [f'# catalog {catalog.name} ({len(catalog)} transformations)']
    lines.extend(spec.toLine() for spec in catalog)
    return '\n'.join(lines) + '\n'


def writeCatalogFile(catalog: TransformSet, filePath: str | Path) -> None:
    atomicWriteText(filePath, formatCatalogText(catalog))
