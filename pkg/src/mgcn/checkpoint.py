"""Binary checkpoint format.

Layout (all integers little-endian):

    bytes 0..8    magic  b"MGCNCKPT"
    u32           format version (currently 1)
    u32           header length in bytes
    header        UTF-8 JSON: {"hyper": {...}, "params": [{"name", "shape"}, ...]}
    payload       per parameter, row-major float32 little-endian
    digest        sha256 of every preceding byte (32 bytes)

Parameters are stored as float32; loading widens back to float64.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"MGCNCKPT"
FORMAT_VERSION = 1
_DIGEST_LEN = 32


def save_checkpoint(path, hyper: dict, params: dict[str, np.ndarray]) -> None:
    header = {
        "hyper": hyper,
        "params": [{"name": name, "shape": list(np.asarray(arr).shape)}
                   for name, arr in params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = bytearray()
    body += MAGIC
    body += struct.pack("<II", FORMAT_VERSION, len(header_bytes))
    body += header_bytes
    for arr in params.values():
        body += np.asarray(arr, dtype="<f4").tobytes(order="C")
    body += hashlib.sha256(bytes(body)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(body))


def read_header(path) -> dict:
    """Parse and return only the JSON header (checksum not verified)."""
    with open(path, "rb") as fh:
        blob = fh.read(len(MAGIC) + 8)
        if len(blob) < len(MAGIC) + 8 or blob[:len(MAGIC)] != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
        version, header_len = struct.unpack("<II", blob[len(MAGIC):])
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        header_bytes = fh.read(header_len)
    if len(header_bytes) != header_len:
        raise CheckpointError(f"{path} is truncated inside the header")
    return json.loads(header_bytes.decode("utf-8"))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Return (hyper, name -> float64 array), verifying the whole-file checksum."""
    with open(path, "rb") as fh:
        blob = fh.read()
    base = len(MAGIC) + 8
    if len(blob) < base + _DIGEST_LEN or blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint file (bad magic)")
    version, header_len = struct.unpack("<II", blob[len(MAGIC):base])
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = blob[-_DIGEST_LEN:]
    if hashlib.sha256(blob[:-_DIGEST_LEN]).digest() != digest:
        raise CheckpointError(f"{path} failed its checksum; file is corrupt")
    try:
        header = json.loads(blob[base:base + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path} has an unreadable header: {err}") from err

    params: dict[str, np.ndarray] = {}
    offset = base + header_len
    for record in header["params"]:
        shape = tuple(int(s) for s in record["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        chunk = blob[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path} is truncated inside parameter {record['name']!r}")
        params[record["name"]] = np.frombuffer(chunk, dtype="<f4").astype(np.float64).reshape(shape)
        offset += nbytes
    if offset != len(blob) - _DIGEST_LEN:
        raise CheckpointError(f"{path} has {len(blob) - _DIGEST_LEN - offset} trailing bytes")
    return header["hyper"], params
