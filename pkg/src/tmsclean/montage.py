"""Built-in 10-20 electrode geometry for the 32-channel cap.

Positions live on the unit sphere in head coordinates: +x right, +y
anterior, +z up.  Angles are (inclination from vertex, azimuth from the
anterior midline, positive toward the right ear); they are the idealized
10-20 placements, adequate for the spherical forward model.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ChannelInfo

# label -> (inclination deg, azimuth deg)
_ANGLES: dict[str, tuple[float, float]] = {
    "Fp1": (90, -18), "Fp2": (90, 18),
    "F7": (90, -54), "F3": (62, -39), "Fz": (45, 0), "F4": (62, 39), "F8": (90, 54),
    "FC5": (74, -70), "FC1": (34, -32), "FC2": (34, 32), "FC6": (74, 70),
    "T7": (90, -90), "C3": (45, -90), "Cz": (0, 0), "C4": (45, 90), "T8": (90, 90),
    "TP9": (112, -104), "CP5": (74, -110), "CP1": (34, -148), "CP2": (34, 148),
    "CP6": (74, 110), "TP10": (112, 104),
    "P7": (90, -126), "P3": (62, -141), "Pz": (45, 180), "P4": (62, 141), "P8": (90, 126),
    "PO9": (112, -144), "O1": (90, -162), "Oz": (90, 180), "O2": (90, 162),
    "PO10": (112, 144),
}

EASYCAP32 = list(_ANGLES.keys())


def label_position(label: str) -> tuple[float, float, float] | None:
    """Unit-sphere position for a known 10-20 label, else None."""
    ang = _ANGLES.get(label)
    if ang is None:
        return None
    incl, azim = math.radians(ang[0]), math.radians(ang[1])
    x = math.sin(incl) * math.sin(azim)
    y = math.sin(incl) * math.cos(azim)
    z = math.cos(incl)
    return (x, y, z)


def standard_montage(n_channels: int = 32) -> list[ChannelInfo]:
    """First n_channels of the built-in cap as eeg ChannelInfo entries."""
    if not 1 <= n_channels <= len(EASYCAP32):
        raise ValueError(f"n_channels must be in [1, {len(EASYCAP32)}]")
    return [
        ChannelInfo(name=lab, position=label_position(lab), kind="eeg")
        for lab in EASYCAP32[:n_channels]
    ]


def positions(channels: list[ChannelInfo]) -> np.ndarray:
    """(n, 3) position array; raises if any eeg channel lacks geometry."""
    pos = []
    for ch in channels:
        if ch.position is None:
            raise ValueError(f"channel {ch.name} has no position")
        pos.append(ch.position)
    return np.asarray(pos, dtype=float)


def frontal_mask(channels: list[ChannelInfo]) -> np.ndarray:
    """Boolean mask of frontal electrodes (anterior coordinate > 0.5)."""
    out = np.zeros(len(channels), dtype=bool)
    for i, ch in enumerate(channels):
        if ch.position is not None and ch.position[1] > 0.5:
            out[i] = True
    return out
