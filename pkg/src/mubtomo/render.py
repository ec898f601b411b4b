"""Intensity and phase images of single-photon MUB modes.

Each OAM component is a p=0 Laguerre-Gaussian mode with a shared waist,
normalized to unit power, so a MUB vector renders as the field
``sum_l c_l LG_l(r, phi)``.  Images are written as 8-bit binary portable
graymaps (P5) for intensity and pixmaps (P6) for phase, with a JSON sidecar.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError
from .mubs import MubVector


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid: ``size`` pixels across ``[-extent, extent]`` in waist units.

    ``rotation`` turns the azimuth origin by that many radians.
    """

    size: int = 129
    extent: float = 3.0
    waist: float = 1.0
    rotation: float = 0.0

    def __post_init__(self):
        if self.size < 2 or not self.extent > 0 or not self.waist > 0:
            raise ValueError(f"degenerate grid {self}")

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Radius and azimuth arrays; row 0 is the top (+y) edge."""
        x = np.linspace(-self.extent, self.extent, self.size)
        y = x[::-1]
        X, Y = np.meshgrid(x, y)
        return np.hypot(X, Y), np.arctan2(Y, X) - self.rotation


def lg_field(ell: int, grid: GridSpec) -> np.ndarray:
    """Unit-power LG_{p=0}^ell amplitude on the grid."""
    r, phi = grid.coordinates()
    w0 = grid.waist
    norm = math.sqrt(2.0 / (math.pi * math.factorial(abs(ell)))) / w0
    radial = (r * math.sqrt(2.0) / w0) ** abs(ell) * np.exp(-(r**2) / w0**2)
    return norm * radial * np.exp(1j * ell * phi)


@dataclass(frozen=True)
class ModeImage:
    intensity: np.ndarray  # max 1
    phase: np.ndarray  # [-pi, pi)
    grid: GridSpec
    label: dict

    @property
    def width(self) -> int:
        return self.intensity.shape[1]

    @property
    def height(self) -> int:
        return self.intensity.shape[0]


def wrap_phase(phase: np.ndarray) -> np.ndarray:
    return (phase + np.pi) % (2.0 * np.pi) - np.pi


def superposition_field(amplitudes, labels, grid: GridSpec) -> np.ndarray:
    amplitudes = np.asarray(amplitudes, dtype=complex)
    if len(amplitudes) != len(labels):
        raise DimensionMismatchError(
            f"{len(amplitudes)} amplitudes for {len(labels)} OAM labels")
    return sum(c * lg_field(ell, grid) for c, ell in zip(amplitudes, labels) if c != 0)


def render_mub_mode(v: MubVector, labels, grid: GridSpec | None = None) -> ModeImage:
    """Render ``|field|^2`` (scaled to max 1) and ``arg(field)`` for one MUB vector."""
    grid = grid or GridSpec()
    field = superposition_field(v.amplitudes, labels, grid)
    intensity = np.abs(field) ** 2
    intensity = intensity / intensity.max()
    label = {"dim": v.dim, "m": v.basis_index, "i": v.state_index, "oam_labels": list(labels)}
    return ModeImage(intensity, wrap_phase(np.angle(field)), grid, label)


def phase_to_rgb(phase: np.ndarray) -> np.ndarray:
    """Cyclic colour wheel: three cosines 120 degrees apart, values in [0, 1]."""
    offsets = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    return 0.5 + 0.5 * np.cos(phase[..., None] - offsets)


def _to_bytes(values: np.ndarray) -> bytes:
    return np.clip(np.rint(values * 255.0), 0, 255).astype(np.uint8).tobytes()


def write_pgm(path, gray: np.ndarray) -> None:
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(_to_bytes(gray))


def write_ppm(path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(_to_bytes(rgb))


def read_pnm(path) -> np.ndarray:
    """Read an 8-bit P5/P6 file written by this module (no comment lines)."""
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    w, h = (int(x) for x in dims.split())
    channels = {b"P5": 1, b"P6": 3}[magic]
    arr = np.frombuffer(rest, dtype=np.uint8, count=w * h * channels)
    return arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)


def save_mode_image(image: ModeImage, stem, color: bool = True) -> list[Path]:
    """Write ``<stem>_intensity.pgm``, ``<stem>_phase.ppm|pgm`` and ``<stem>.json``."""
    stem = Path(stem)
    intensity_path = stem.with_name(stem.name + "_intensity.pgm")
    write_pgm(intensity_path, image.intensity)
    if color:
        phase_path = stem.with_name(stem.name + "_phase.ppm")
        write_ppm(phase_path, phase_to_rgb(image.phase))
    else:
        phase_path = stem.with_name(stem.name + "_phase.pgm")
        write_pgm(phase_path, (image.phase + np.pi) / (2.0 * np.pi))
    sidecar = stem.with_name(stem.name + ".json")
    sidecar.write_text(json.dumps({
        **image.label,
        "grid": asdict(image.grid),
        "intensity_file": intensity_path.name,
        "phase_file": phase_path.name,
        "phase_encoding": "rgb-cosine-wheel" if color else "gray-linear",
    }, indent=1))
    return [intensity_path, phase_path, sidecar]
