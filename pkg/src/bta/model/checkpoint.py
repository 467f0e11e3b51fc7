"""Binary checkpoints: a JSON header with the config, then named float64 tensors.

Layout (little-endian throughout)::

    magic        8 bytes  b"BTACKPT\\0"
    version      u32
    header_len   u32, followed by header_len bytes of UTF-8 JSON
    n_tensors    u32
    per tensor:  u16 name_len, name, u8 kind (0 param, 1 buffer), u8 ndim,
                 ndim * u32 dims, prod(dims) * f8 data
"""

import json
import os
import struct
import tempfile

import numpy as np

from ..errors import DataError
from ..numerics import ParameterStore
from .network import BtaConfig, BtaNetwork

MAGIC = b"BTACKPT\0"
CHECKPOINT_VERSION = 1
FORMAT_NAME = "bta-checkpoint"


def _tensor_bytes(name, kind, value):
    raw = name.encode("utf-8")
    out = [struct.pack("<H", len(raw)), raw, struct.pack("<BB", kind, value.ndim)]
    out.append(struct.pack(f"<{value.ndim}I", *value.shape))
    out.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(out)


def checkpoint_bytes(network):
    header = json.dumps({"format": FORMAT_NAME, "format_version": CHECKPOINT_VERSION,
                         "config": network.config.to_dict()}, sort_keys=True).encode("utf-8")
    st = network.store
    tensors = [(n, 0, st.params[n]) for n in sorted(st.params)]
    tensors += [(n, 1, st.buffers[n]) for n in sorted(st.buffers)]
    parts = [MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(header)), header,
             struct.pack("<I", len(tensors))]
    parts += [_tensor_bytes(*t) for t in tensors]
    return b"".join(parts)


def save_checkpoint(network, path):
    """Write atomically: a temp file in the target directory, then rename."""
    data = checkpoint_bytes(network)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise DataError("checkpoint is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_checkpoint(data):
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise DataError("not a BTA checkpoint (bad magic)")
    version, header_len = r.unpack("<II")
    if version != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(r.take(header_len).decode("utf-8"))
    except ValueError as exc:
        raise DataError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise DataError(f"unexpected checkpoint format {header.get('format')!r}")
    config = BtaConfig.from_dict(header["config"])
    store = ParameterStore()
    (count,) = r.unpack("<I")
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        kind, ndim = r.unpack("<BB")
        shape = r.unpack(f"<{ndim}I")
        size = int(np.prod(shape)) if ndim else 1
        value = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
        if kind == 0:
            store.add(name, value)
        elif kind == 1:
            store.add_buffer(name, value)
        else:
            raise DataError(f"unknown tensor kind {kind} for {name!r}")
    if r.pos != len(data):
        raise DataError("trailing bytes after the last tensor")
    return BtaNetwork(config, store)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return parse_checkpoint(fh.read())
