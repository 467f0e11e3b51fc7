"""Spherical coordinates of channels relative to centrality points."""

import math

import numpy as np


def spherical_from_cartesian(point, origin=(0.0, 0.0, 0.0)):
    """(rho, theta, phi) of ``point`` in the frame centred on ``origin``.

    Zenith is +z (straight above), azimuth is measured from +x (straight
    ahead) toward +y. theta lies in [0, pi], phi in (-pi, pi]. Degenerate
    directions resolve to 0.
    """
    v = np.asarray(point, dtype=np.float64) - np.asarray(origin, dtype=np.float64)
    rho = float(np.linalg.norm(v))
    if rho == 0.0:
        return 0.0, 0.0, 0.0
    # same angle as arccos(v_z / rho), but well conditioned near the poles
    theta = math.atan2(math.hypot(v[0], v[1]), v[2])
    if v[0] == 0.0 and v[1] == 0.0:
        phi = 0.0
    else:
        phi = math.atan2(v[1], v[0])
        if phi == -math.pi:
            phi = math.pi
    return rho, theta, phi


def channel_geometry(coords, centralities):
    """(E, M, 3) array of (rho, theta, phi) for every channel and frame."""
    coords = np.asarray(coords, dtype=np.float64)
    out = np.empty((len(coords), len(centralities), 3))
    for i, p in enumerate(coords):
        for j, c in enumerate(centralities):
            out[i, j] = spherical_from_cartesian(p, c)
    return out


def centrality_encoding(geometry_row, c_rho, c_theta, c_phi):
    """rho * c_rho + theta * c_theta + phi * c_phi for one channel in one frame."""
    rho, theta, phi = geometry_row
    return rho * np.asarray(c_rho) + theta * np.asarray(c_theta) + phi * np.asarray(c_phi)
