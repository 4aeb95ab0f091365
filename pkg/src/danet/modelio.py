"""Binary container for trained models.

Layout, all integers little-endian::

    b"DANETMDL"            8-byte magic
    uint32                 format version
    uint64                 header length in bytes
    header                 UTF-8 JSON: spec, stats, manifest, entry index, payload digest
    payload                float64 little-endian parameter values, entries back to back
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from danet.errors import ModelFileError
from danet.features import NormStats
from danet.layers import ModelSpec
from danet.training import TrainedModel

MAGIC = b"DANETMDL"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


def model_to_bytes(model: TrainedModel) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, value in model.params.items():
        arr = np.ascontiguousarray(value, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": int(arr.size)})
        chunks.append(arr.tobytes())
        offset += arr.size
    payload = b"".join(chunks)
    header = {
        "spec": model.spec.to_document(),
        "stats": model.stats.to_document(),
        "manifest": model.manifest,
        "entries": entries,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + payload


def model_from_bytes(blob: bytes) -> TrainedModel:
    if len(blob) < _PREFIX.size:
        raise ModelFileError("file is truncated before the header")
    magic, version, head_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise ModelFileError("not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelFileError(f"unsupported format version {version} (expected {FORMAT_VERSION})")
    start = _PREFIX.size
    if len(blob) < start + head_len:
        raise ModelFileError("file is truncated inside the header")
    try:
        header = json.loads(blob[start:start + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"corrupt header: {exc}") from None
    payload = blob[start + head_len:]
    if len(payload) != header["payload_bytes"]:
        raise ModelFileError(f"corrupt or truncated payload: {len(payload)} bytes, "
                             f"expected {header['payload_bytes']}")
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ModelFileError("payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8")
    params = {}
    for e in header["entries"]:
        chunk = values[e["offset"]:e["offset"] + e["count"]]
        params[e["name"]] = chunk.astype(np.float64).reshape(e["shape"])
    spec = ModelSpec.from_document(header["spec"])
    return TrainedModel(spec, params, NormStats(**header["stats"]), header["manifest"])


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise ModelFileError(f"no such model file: {path}")
    return model_from_bytes(path.read_bytes())
