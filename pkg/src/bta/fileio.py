"""Atomic file writes and canonical JSON."""

import json
import os


def atomic_write_bytes(path, data):
    """Write to a sibling temp file, then rename over ``path``."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj):
    """Sorted, indented JSON bytes so identical objects give identical files."""
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")
