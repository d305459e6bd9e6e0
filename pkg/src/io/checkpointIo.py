"""GSCM classifier checkpoints.

Layout, all little-endian:

    magic        4s    b'GSCM'
    version      u16   1
    tagLength    u16   then tagLength bytes of UTF-8 architecture tag
    k            u32
    nValues      u64
    values       float32[nValues]
    trailerSize  u32   then trailerSize bytes of UTF-8 JSON metadata

Canonical value order is the network's `state_dict()` order restricted to
floating-point entries (weights, biases, batch-norm running statistics), each
flattened in C order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from ..classifier.architectures import buildArchitecture
from ..classifier.training import ClassifierModel
from ..errors import BadMagicError, TruncatedPayloadError, VersionMismatchError
from .jsonIo import atomicWriteBytes
from .payloadReader import PayloadReader

checkpointMagic = b'GSCM'
checkpointVersion = 1


def _floatEntries(network: torch.nn.Module) -> list[tuple[str, torch.Tensor]]:
    return [(name, tensor) for name, tensor in network.state_dict().items() if tensor.is_floating_point()]


def encodeCheckpoint(model: ClassifierModel) -> bytes:
    tag = model.architecture.encode('utf-8')
    entries = _floatEntries(model.network)
    values = np.concatenate([tensor.detach().cpu().numpy().ravel() for _, tensor in entries]).astype('<f4')
    metadata = {**model.metadata, 'inputShape': list(model.inputShape)}
    trailer = json.dumps(metadata, sort_keys=True).encode('utf-8')
    return b''.join(
        [
            struct.pack('<4sHH', checkpointMagic, checkpointVersion, len(tag)),
            tag,
            struct.pack('<IQ', model.nClasses, values.size),
            values.tobytes(),
            struct.pack('<I', len(trailer)),
            trailer,
        ]
    )


def decodeCheckpoint(payload: bytes, *, source: str = '<bytes>') -> ClassifierModel:
    reader = PayloadReader(payload, source)
    magic, version, tagLength = reader.unpack('<4sHH')
    if magic != checkpointMagic:
        raise BadMagicError(f'{source}: bad magic {magic!r}, expected {checkpointMagic!r}')
    if version != checkpointVersion:
        raise VersionMismatchError(f'{source}: unsupported GSCM version {version}')
    architecture = reader.take(tagLength).decode('utf-8')
    nClasses, valueCount = reader.unpack('<IQ')
    values = np.frombuffer(reader.take(valueCount * 4), dtype='<f4')
    (trailerSize,) = reader.unpack('<I')
    metadata = json.loads(reader.take(trailerSize).decode('utf-8'))
    reader.finish()

    inputShape = tuple(int(value) for value in metadata['inputShape'])
    network = buildArchitecture(architecture, inputShape, nClasses)
    entries = _floatEntries(network)
    expected = sum(tensor.numel() for _, tensor in entries)
    if expected != valueCount:
        raise TruncatedPayloadError(f'{source}: {architecture} needs {expected} values, file has {valueCount}')

    state = network.state_dict()
    offset = 0
    for name, tensor in entries:
        count = tensor.numel()
        chunk = values[offset:offset + count].reshape(tuple(tensor.shape))
        state[name] = torch.from_numpy(chunk.astype(np.float32)).to(tensor.dtype)
        offset += count
    network.load_state_dict(state)
    network.eval()
    return ClassifierModel(architecture, nClasses, inputShape, network, metadata)


def saveCheckpoint(model: ClassifierModel, filePath: str | Path) -> None:
    atomicWriteBytes(filePath, encodeCheckpoint(model))


def loadCheckpoint(filePath: str | Path) -> ClassifierModel:
    path = Path(filePath)
    try:
        payload = path.read_bytes()
    except FileNotFoundError as error:
        raise FileNotFoundError(f'Checkpoint not found: {path}') from error
    return decodeCheckpoint(payload, source=str(path))
