"""Electrode positions on an idealized unit-sphere head.

Axes: +x toward the nose, +y toward the left ear, +z toward the vertex.
Positions are built the way the 10-20 rules place them: the midline and the
outer ring sit at 10% (18 degree) steps of the nasion-inion arc, and inner
electrodes are arc midpoints between a midline point and its ring partner.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

VERTEX = (0.0, 0.0, 1.0)


def _sph(polar_deg, azimuth_deg):
    t, p = np.radians(polar_deg), np.radians(azimuth_deg)
    return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])


def _slerp(a, b, frac):
    omega = np.arccos(np.clip(a @ b, -1.0, 1.0))
    if omega < 1e-12:
        return a.copy()
    return (np.sin((1 - frac) * omega) * a + np.sin(frac * omega) * b) / np.sin(omega)


def _mirror(v):
    return np.array([v[0], -v[1], v[2]])


def _build_positions():
    pos = {}
    midline = {"Fpz": (72, 0), "AFz": (54, 0), "Fz": (36, 0), "FCz": (18, 0), "Cz": (0, 0),
               "CPz": (18, 180), "Pz": (36, 180), "POz": (54, 180), "Oz": (72, 180)}
    for name, (t, p) in midline.items():
        pos[name] = _sph(t, p)
    # outer ring at polar 72 degrees, left hemisphere (odd numbers)
    ring = {"Fp1": 18, "AF7": 36, "F7": 54, "FT7": 72, "T7": 90, "TP7": 108,
            "P7": 126, "PO7": 144, "O1": 162}
    for name, az in ring.items():
        pos[name] = _sph(72, az)
    # inferior ring at polar 108 degrees
    for name, az in {"F9": 54, "FT9": 72, "T9": 90, "TP9": 108, "P9": 126}.items():
        pos[name] = _sph(108, az)
    rows = {
        "AF": ("AFz", "AF7", {"AF3": 0.5}),
        "F": ("Fz", "F7", {"F1": 0.25, "F3": 0.5, "F5": 0.75}),
        "FC": ("FCz", "FT7", {"FC1": 0.25, "FC3": 0.5, "FC5": 0.75}),
        "C": ("Cz", "T7", {"C1": 0.25, "C3": 0.5, "C5": 0.75}),
        "CP": ("CPz", "TP7", {"CP1": 0.25, "CP3": 0.5, "CP5": 0.75}),
        "P": ("Pz", "P7", {"P1": 0.25, "P3": 0.5, "P5": 0.75}),
        "PO": ("POz", "PO7", {"PO3": 0.5}),
    }
    for mid, lateral, inner in rows.values():
        for name, frac in inner.items():
            pos[name] = _slerp(pos[mid], pos[lateral], frac)
    # mastoids sit below and behind the ear
    pos["M1"] = _sph(115, 110)
    # right hemisphere mirrors the left: odd -> even, 7 -> 8 etc.
    left = [n for n in pos if n[-1].isdigit() and int(n[-1]) % 2 == 1]
    for name in left:
        stem = name.rstrip("0123456789")
        num = int(name[len(stem):])
        pos[f"{stem}{num + 1}"] = _mirror(pos[name])
    aliases = {"T3": "T7", "T4": "T8", "T5": "P7", "T6": "P8", "A1": "M1", "A2": "M2"}
    for alias, name in aliases.items():
        pos[alias] = pos[name]
    return {name: tuple(float(c) for c in v) for name, v in pos.items()}


STANDARD_POSITIONS = _build_positions()


def default_centralities():
    """Vertex, left mastoid, right mastoid."""
    return [VERTEX, STANDARD_POSITIONS["M1"], STANDARD_POSITIONS["M2"]]


@dataclass
class Montage:
    positions: dict
    centralities: list = field(default_factory=default_centralities)

    def __post_init__(self):
        if not self.centralities:
            raise DataError("a montage needs at least one centrality point")
        for name, xyz in self.positions.items():
            if len(xyz) != 3 or np.linalg.norm(xyz) > 1.2:
                raise DataError(f"channel {name!r} has an invalid position {xyz}")
        for c in self.centralities:
            if len(c) != 3 or np.linalg.norm(c) > 1.2:
                raise DataError(f"invalid centrality point {c}")

    @classmethod
    def standard(cls, channels=None, centralities=None):
        positions = STANDARD_POSITIONS
        if channels is not None:
            unknown = [c for c in channels if c not in positions]
            if unknown:
                raise DataError(f"channels not in the standard montage: {unknown}")
            positions = {c: positions[c] for c in channels}
        return cls(dict(positions), list(centralities) if centralities else default_centralities())

    def coordinates(self, channels):
        """(E, 3) array of positions for ``channels`` in order."""
        missing = [c for c in channels if c not in self.positions]
        if missing:
            raise DataError(f"unknown channels: {missing}")
        return np.array([self.positions[c] for c in channels], dtype=np.float64)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for name, (x, y, z) in self.positions.items():
                fh.write(f"{name} {x:.17g} {y:.17g} {z:.17g}\n")
            for x, y, z in self.centralities:
                fh.write(f"@centrality {x:.17g} {y:.17g} {z:.17g}\n")

    @classmethod
    def read(cls, path):
        """Parse ``name x y z`` lines; ``@centrality x y z`` lines are optional."""
        positions, centralities = {}, []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise DataError(f"{path}:{lineno}: expected 'name x y z'")
                try:
                    xyz = tuple(float(v) for v in parts[1:])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad coordinate") from None
                if parts[0] == "@centrality":
                    centralities.append(xyz)
                elif parts[0] in positions:
                    raise DataError(f"{path}:{lineno}: duplicate channel {parts[0]!r}")
                else:
                    positions[parts[0]] = xyz
        return cls(positions, centralities or default_centralities())
