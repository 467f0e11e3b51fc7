"""In-memory feature datasets and their on-disk format.

A dataset directory holds ``manifest.json`` and ``samples.bin``. The binary
file is a plain concatenation of records, all little-endian::

    int8      label            (0, 1, or -1 when absent)
    uint16    group id length  (bytes)
    bytes     group id         (UTF-8)
    float64   temporal         E*N values, channel-major
    float64   spectral         E*B values, channel-major

E, N, B and the channel order come from the manifest. Raw recordings use a
separate directory layout (``recordings.json`` plus one matrix file per
recording) that :func:`load_recordings` reads.
"""

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..fileio import atomic_write_bytes, dump_json
from .montage import Montage
from .signals import Recording, de_features

FORMAT_NAME = "bta-eeg-dataset"
FORMAT_VERSION = 1
RECORDINGS_FORMAT = "bta-eeg-recordings"


@dataclass
class EegDataset:
    name: str
    channels: list
    sample_rate: float
    bands: tuple
    temporal: np.ndarray  # (n, E, N)
    spectral: np.ndarray  # (n, E, B)
    labels: np.ndarray  # (n,), -1 = absent
    groups: list

    def __post_init__(self):
        self.temporal = np.asarray(self.temporal, dtype=np.float64)
        self.spectral = np.asarray(self.spectral, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.groups = list(self.groups)
        n = len(self.labels)
        if self.temporal.ndim != 3 or self.spectral.ndim != 3:
            raise DataError("temporal and spectral arrays must be (n, E, F)")
        if self.temporal.shape[0] != n or self.spectral.shape[0] != n or len(self.groups) != n:
            raise DataError("sample count mismatch between arrays, labels and groups")
        if self.temporal.shape[1] != len(self.channels) or self.spectral.shape[1] != len(self.channels):
            raise DataError("channel axis does not match the channel list")
        if self.spectral.shape[2] != len(self.bands):
            raise DataError("spectral axis does not match the band table")
        self.bands = tuple((str(b[0]), float(b[1]), float(b[2])) for b in self.bands)

    def __len__(self):
        return len(self.labels)

    @property
    def E(self):
        return self.temporal.shape[1]

    @property
    def N(self):
        return self.temporal.shape[2]

    @property
    def B(self):
        return self.spectral.shape[2]

    def subset(self, idx):
        idx = np.asarray(idx)
        return EegDataset(self.name, self.channels, self.sample_rate, self.bands,
                          self.temporal[idx], self.spectral[idx], self.labels[idx],
                          [self.groups[i] for i in idx])

    @classmethod
    def from_samples(cls, samples, channels, sample_rate, bands, name="dataset"):
        """Stack :class:`EegSample` objects, computing DE features where missing."""
        if not samples:
            raise DataError("no samples")
        temporal = np.stack([s.temporal for s in samples])
        spectral = np.stack([
            s.spectral if s.spectral is not None else de_features(s.temporal, sample_rate, bands)
            for s in samples
        ])
        return cls(name, list(channels), sample_rate, bands, temporal, spectral,
                   [s.label for s in samples], [s.group for s in samples])


def save_dataset(dataset, directory, montage=None):
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "name": dataset.name,
        "E": dataset.E,
        "N": dataset.N,
        "B": dataset.B,
        "sample_rate": dataset.sample_rate,
        "bands": [list(b) for b in dataset.bands],
        "channels": list(dataset.channels),
        "n_samples": len(dataset),
        "byte_order": "little",
    }
    chunks = []
    for i in range(len(dataset)):
        gid = dataset.groups[i].encode("utf-8")
        chunks.append(struct.pack("<bH", int(dataset.labels[i]), len(gid)))
        chunks.append(gid)
        chunks.append(dataset.temporal[i].astype("<f8").tobytes())
        chunks.append(dataset.spectral[i].astype("<f8").tobytes())
    atomic_write_bytes(os.path.join(directory, "samples.bin"), b"".join(chunks))
    atomic_write_bytes(os.path.join(directory, "manifest.json"), dump_json(manifest))
    if montage is not None:
        montage.write(os.path.join(directory, "montage.txt"))


def load_dataset(directory):
    """Read a dataset directory; returns ``(dataset, montage or None)``."""
    try:
        with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read dataset manifest in {directory}: {exc}") from None
    if manifest.get("format") != FORMAT_NAME:
        raise DataError(f"{directory} is not a {FORMAT_NAME} directory")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported dataset format version {manifest.get('format_version')}")
    E, N, B, n = manifest["E"], manifest["N"], manifest["B"], manifest["n_samples"]
    with open(os.path.join(directory, "samples.bin"), "rb") as fh:
        raw = fh.read()
    temporal = np.empty((n, E, N))
    spectral = np.empty((n, E, B))
    labels = np.empty(n, dtype=np.int64)
    groups = []
    off = 0
    try:
        for i in range(n):
            labels[i], glen = struct.unpack_from("<bH", raw, off)
            off += 3
            groups.append(raw[off:off + glen].decode("utf-8"))
            off += glen
            temporal[i] = np.frombuffer(raw, "<f8", E * N, off).reshape(E, N)
            off += 8 * E * N
            spectral[i] = np.frombuffer(raw, "<f8", E * B, off).reshape(E, B)
            off += 8 * E * B
    except (struct.error, ValueError) as exc:
        raise DataError(f"truncated samples.bin in {directory}: {exc}") from None
    if off != len(raw):
        raise DataError(f"samples.bin in {directory} has {len(raw) - off} trailing bytes")
    dataset = EegDataset(manifest["name"], manifest["channels"], manifest["sample_rate"],
                         manifest["bands"], temporal, spectral, labels, groups)
    montage_path = os.path.join(directory, "montage.txt")
    montage = Montage.read(montage_path) if os.path.exists(montage_path) else None
    return dataset, montage


def load_matrix(path):
    """Load a 2-D numeric matrix from ``.npy``, ``.csv`` or whitespace text."""
    try:
        if path.endswith(".npy"):
            m = np.load(path, allow_pickle=False)
        elif path.endswith(".csv"):
            m = np.loadtxt(path, delimiter=",", ndmin=2)
        else:
            m = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load matrix {path}: {exc}") from None
    if m.ndim != 2:
        raise DataError(f"{path}: expected a 2-D matrix, got shape {m.shape}")
    return np.asarray(m, dtype=np.float64)


def save_recordings(recordings, directory):
    """Write recordings as ``recordings.json`` plus one ``.npy`` per recording."""
    if not recordings:
        raise DataError("no recordings to write")
    os.makedirs(directory, exist_ok=True)
    first = recordings[0]
    entries = []
    for i, rec in enumerate(recordings):
        if rec.channels != first.channels or rec.sample_rate != first.sample_rate:
            raise DataError("all recordings must share channels and sample rate")
        fname = f"rec{i:05d}.npy"
        with open(os.path.join(directory, fname), "wb") as fh:
            np.save(fh, rec.signal.astype("<f8"), allow_pickle=False)
        entries.append({"file": fname, "group": rec.group, "label": rec.label})
    manifest = {"format": RECORDINGS_FORMAT, "format_version": FORMAT_VERSION,
                "sample_rate": first.sample_rate, "channels": list(first.channels),
                "recordings": entries}
    atomic_write_bytes(os.path.join(directory, "recordings.json"), dump_json(manifest))


def load_recordings(directory):
    try:
        with open(os.path.join(directory, "recordings.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read recordings manifest in {directory}: {exc}") from None
    if manifest.get("format") != RECORDINGS_FORMAT:
        raise DataError(f"{directory} is not a {RECORDINGS_FORMAT} directory")
    out = []
    for entry in manifest["recordings"]:
        signal = load_matrix(os.path.join(directory, entry["file"]))
        out.append(Recording(manifest["channels"], manifest["sample_rate"], signal,
                             str(entry["group"]), int(entry.get("label", -1))))
    return out
