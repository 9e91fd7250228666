"""Low-level helpers for the little-endian binary file formats.

Both container formats in this package share the same envelope: a 4-byte
magic, a u16 format version, a body, and a trailing CRC32 (little-endian
u32) computed over every preceding byte. Writers emit to a temporary file
in the destination directory and rename into place, so an interrupted run
never leaves a partial file at the target path.
"""

import os
import struct
import tempfile
import zlib

from .errors import ChecksumError, FormatError, UnsupportedVersionError


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def seal(body: bytes) -> bytes:
    """Append the CRC32 of ``body`` as a little-endian u32."""
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def unseal(blob: bytes, what: str) -> bytes:
    """Verify and strip the trailing CRC32, returning the body."""
    if len(blob) < 4:
        raise FormatError(f"{what}: file too short to contain a checksum")
    body, (stored,) = blob[:-4], struct.unpack("<I", blob[-4:])
    computed = zlib.crc32(body) & 0xFFFFFFFF
    if stored != computed:
        raise ChecksumError(stored, computed)
    return body


class Reader:
    """Cursor over a byte payload with truncation-checked reads."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"{self.what}: truncated file (needed {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos})"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u8(self) -> int:
        return self.unpack("<B")[0]

    def u16(self) -> int:
        return self.unpack("<H")[0]

    def u32(self) -> int:
        return self.unpack("<I")[0]

    def u64(self) -> int:
        return self.unpack("<Q")[0]

    def f64(self) -> float:
        return self.unpack("<d")[0]

    def expect_end(self):
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.what}: {len(self.data) - self.pos} unexpected trailing bytes"
            )


def check_magic(blob: bytes, magic: bytes, what: str) -> None:
    """Validate the leading magic bytes before any checksum work."""
    if blob[: len(magic)] != magic:
        raise FormatError(f"{what}: bad magic {blob[:len(magic)]!r}, expected {magic!r}")


def check_version(r: Reader, supported_version: int) -> int:
    version = r.u16()
    if version > supported_version:
        raise UnsupportedVersionError(version, supported_version)
    if version < 1:
        raise FormatError(f"{r.what}: invalid format version {version}")
    return version
