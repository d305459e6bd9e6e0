"""JSON file helpers shared by the pipeline, selection, and evaluation tools."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any


def readJson(filePath: str | Path) -> Any:
    """Read and decode a JSON file."""
    path = Path(filePath)
    try:
        with path.open('r', encoding='utf-8') as handle:
            return json.load(handle)
    except FileNotFoundError as error:
        raise FileNotFoundError(f'JSON file not found: {path}') from error
    except json.JSONDecodeError as error:
        raise ValueError(f'Invalid JSON in file: {path} ({error})') from error


def atomicWriteBytes(filePath: str | Path, payload: bytes) -> None:
    """Write bytes to a temp file in the target directory, then rename over the target."""
    path = Path(filePath)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, tempName = tempfile.mkstemp(prefix=f'.{path.name}.', dir=path.parent)
    try:
        with os.fdopen(handle, 'wb') as stream:
            stream.write(payload)
        os.replace(tempName, path)
    except BaseException:
        Path(tempName).unlink(missing_ok=True)
        raise


def atomicWriteText(filePath: str | Path, text: str) -> None:
    atomicWriteBytes(filePath, text.encode('utf-8'))


def canonicalJson(payload: Any) -> str:
    """Stable encoding used for fingerprints: sorted keys, no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(',', ':'))


def writeJson(filePath: str | Path, payload: Any, *, indent: int = 2) -> None:
    """Encode and atomically write a JSON payload to disk."""
    atomicWriteText(filePath, json.dumps(payload, indent=indent) + '\n')
