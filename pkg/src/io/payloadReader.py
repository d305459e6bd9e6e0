"""Sequential reader over a binary artifact payload."""

from __future__ import annotations

import struct

from ..errors import TrailingBytesError, TruncatedPayloadError


class PayloadReader:
    def __init__(self, payload: bytes, source: str) -> None:
        self.payload = payload
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            raise TruncatedPayloadError(f'{self.source}: truncated at byte {self.offset} (needed {size} more)')
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def finish(self) -> None:
        """Fail when bytes are left after the last expected field."""
        if self.remaining:
            raise TrailingBytesError(f'{self.source}: {self.remaining} unexpected trailing bytes')

    @property
    def remaining(self) -> int:
        return len(self.payload) - self.offset
