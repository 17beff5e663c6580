"""Little-endian record writer/reader with a trailing SHA-256 checksum."""

from __future__ import annotations

import hashlib
import struct


class ArtifactError(Exception):
    """Base class for artifact load failures."""


class ChecksumError(ArtifactError):
    pass


class VersionError(ArtifactError):
    pass


class FingerprintError(ArtifactError):
    pass


class FormatError(ArtifactError):
    pass


_DIGEST = 32


class Writer:
    def __init__(self, magic: bytes, version: int):
        self.buf = bytearray(magic)
        self.u32(version)

    def u8(self, v):
        self.buf += struct.pack("<B", v)

    def u32(self, v):
        self.buf += struct.pack("<I", v)

    def u64(self, v):
        self.buf += struct.pack("<Q", v)

    def raw(self, b: bytes):
        self.buf += b

    def str(self, s: str):
        data = s.encode("utf-8")
        self.u32(len(data))
        self.buf += data

    def finish(self) -> bytes:
        return bytes(self.buf) + hashlib.sha256(self.buf).digest()


def content_digest(data: bytes) -> bytes:
    """Digest of a finished artifact (its trailing checksum)."""
    return data[-_DIGEST:]


class Reader:
    def __init__(self, data: bytes, magic: bytes, version: int):
        if len(data) < len(magic) + 4 + _DIGEST:
            raise ChecksumError("artifact truncated")
        body, digest = data[:-_DIGEST], data[-_DIGEST:]
        if hashlib.sha256(body).digest() != digest:
            raise ChecksumError("artifact checksum mismatch (truncated or corrupted file)")
        if body[: len(magic)] != magic:
            raise FormatError(f"bad magic {body[:len(magic)]!r}, expected {magic!r}")
        self.data = body
        self.pos = len(magic)
        found = self.u32()
        if found != version:
            raise VersionError(f"unsupported format version {found} (expected {version})")

    def _take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("record runs past end of artifact")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self):
        return struct.unpack("<B", self._take(1))[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def u64(self):
        return struct.unpack("<Q", self._take(8))[0]

    def raw(self, n):
        return bytes(self._take(n))

    def str(self):
        return self._take(self.u32()).decode("utf-8")

    def done(self):
        if self.pos != len(self.data):
            raise FormatError("trailing bytes in artifact")
