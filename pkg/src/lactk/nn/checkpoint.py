"""Parameter checkpoints: a text manifest plus one little-endian binary blob.

The manifest lists one array per line as ``name=... shape=... dtype=...
offset=...`` in write order; the blob concatenates the row-major IEEE-754
payloads at those byte offsets.  Round-trips are bit-exact.
"""

from __future__ import annotations

import os

import numpy as np

from ..errors import FormatError

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def checkpoint_files(stem: str) -> tuple[str, str]:
    return stem + ".manifest", stem + ".bin"


def save_checkpoint(stem: str, named_arrays: list[tuple[str, np.ndarray]]) -> None:
    """Write ``<stem>.manifest`` and ``<stem>.bin`` for the named arrays."""
    manifest_path, blob_path = checkpoint_files(stem)
    lines = []
    chunks = []
    offset = 0
    for name, arr in named_arrays:
        a = np.asarray(arr)
        if a.dtype.name not in _DTYPES:
            raise FormatError(f"checkpoint does not support dtype {a.dtype.name}")
        payload = np.ascontiguousarray(a).astype(_DTYPES[a.dtype.name], copy=False).tobytes()
        shape = ",".join(str(d) for d in a.shape)
        lines.append(f"name={name} shape={shape} dtype={a.dtype.name} offset={offset}")
        chunks.append(payload)
        offset += len(payload)
    os.makedirs(os.path.dirname(os.path.abspath(manifest_path)), exist_ok=True)
    with open(manifest_path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))
    with open(blob_path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(stem: str) -> list[tuple[str, np.ndarray]]:
    """Read back a checkpoint; entries appear in manifest order."""
    manifest_path, blob_path = checkpoint_files(stem)
    try:
        with open(manifest_path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        with open(blob_path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {stem}: {exc}") from exc
    out = []
    expected_offset = 0
    for ln in lines:
        fields = dict(part.split("=", 1) for part in ln.split() if "=" in part)
        missing = {"name", "shape", "dtype", "offset"} - fields.keys()
        if missing:
            raise FormatError(f"{manifest_path}: line {ln!r} missing {sorted(missing)}")
        if fields["dtype"] not in _DTYPES:
            raise FormatError(f"{manifest_path}: unknown dtype {fields['dtype']!r}")
        shape = tuple(int(d) for d in fields["shape"].split(",") if d != "")
        offset = int(fields["offset"])
        if offset != expected_offset:
            raise FormatError(f"{manifest_path}: non-contiguous offset for {fields['name']}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        dt = np.dtype(_DTYPES[fields["dtype"]])
        nbytes = count * dt.itemsize
        if offset + nbytes > len(blob):
            raise FormatError(f"{manifest_path}: blob too short for {fields['name']}")
        arr = np.frombuffer(blob, dtype=dt, count=count, offset=offset)
        arr = arr.reshape(shape).astype(fields["dtype"], copy=True)
        out.append((fields["name"], arr))
        expected_offset = offset + nbytes
    if expected_offset != len(blob):
        raise FormatError(f"{blob_path}: {len(blob) - expected_offset} trailing bytes")
    return out
