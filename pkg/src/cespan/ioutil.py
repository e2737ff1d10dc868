"""Small file helpers: atomic writes and content hashing."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def write_atomic_bytes(path, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_atomic_text(path, text: str) -> None:
    write_atomic_bytes(path, text.encode("utf-8"))


def write_atomic_json(path, obj, indent: int = 2) -> None:
    write_atomic_text(path, json.dumps(obj, indent=indent, sort_keys=True) + "\n")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
