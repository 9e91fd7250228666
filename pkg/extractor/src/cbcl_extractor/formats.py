"""Writers for the feature-file and manifest formats the trainer consumes.

These formats are the contract between the extractor and the training
tooling, so they are implemented here against the documented layout rather
than imported from it:

* "CBF" version 1, little-endian: magic ``CBF1``, u16 version, u8 modality
  tag (0 = rgb, 1 = depth), u32 dim, u64 record count, then per record a
  u64 sample id and dim float32 values, and a trailing CRC32 of all
  preceding bytes.
* Manifest: UTF-8 CSV with header ``id,category,split``.

Sample ids are the first 8 bytes (little-endian) of the SHA-256 of the
POSIX-style dataset-relative path.
"""

import csv
import hashlib
import io
import os
import struct
import tempfile
import zlib

import numpy as np

CBF_MAGIC = b"CBF1"
CBF_VERSION = 1
MODALITY_TAGS = {"rgb": 0, "depth": 1}


def path_id(relpath: str) -> int:
    """Stable u64 sample id for a dataset-relative file path."""
    digest = hashlib.sha256(relpath.replace("\\", "/").encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _atomic_write(path, data: bytes) -> None:
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


def write_cbf(path, modality: str, ids, vectors: np.ndarray) -> None:
    """Write one modality's feature matrix as a CBF file."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
    if not np.all(np.isfinite(vectors)):
        raise ValueError("feature matrix contains non-finite values")
    parts = [
        CBF_MAGIC,
        struct.pack(
            "<HBIQ", CBF_VERSION, MODALITY_TAGS[modality], vectors.shape[1], len(ids)
        ),
    ]
    for sample_id, row in zip(ids, vectors):
        parts.append(struct.pack("<Q", sample_id))
        parts.append(row.tobytes())
    body = b"".join(parts)
    _atomic_write(path, body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def write_manifest(path, rows) -> None:
    """Write (id, category, split) rows as the manifest CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "category", "split"])
    for sample_id, category, split in rows:
        writer.writerow([sample_id, category, split])
    _atomic_write(path, buf.getvalue().encode("utf-8"))
