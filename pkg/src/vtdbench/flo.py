"""Binary flow-field codec (little-endian ".flo" layout).

Layout: float32 magic 202021.25, int32 width, int32 height, then
width*height interleaved (u, v) float32 pairs in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

FLO_MAGIC = 202021.25


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement field; data has shape (height, width, 2) float32."""

    height: int
    width: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, 2):
            raise ValidationError(
                f"flow data shape {self.data.shape} != ({self.height}, {self.width}, 2)"
            )

    @property
    def u(self) -> np.ndarray:
        """Horizontal (column) displacement."""
        return self.data[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        """Vertical (row) displacement."""
        return self.data[:, :, 1]


def read_flow(data: bytes) -> FlowField:
    if len(data) < 12:
        raise FormatError(f"flow file too short: {len(data)} bytes")
    magic = struct.unpack("<f", data[:4])[0]
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"bad flow magic {magic!r}, expected {FLO_MAGIC}")
    width, height = struct.unpack("<ii", data[4:12])
    if width <= 0 or height <= 0:
        raise FormatError(f"bad flow dimensions {width}x{height}")
    expected = 12 + width * height * 8
    if len(data) != expected:
        raise FormatError(
            f"flow payload length {len(data)} != expected {expected} for {width}x{height}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=12)
    field = values.reshape((height, width, 2)).astype(np.float32)
    if not np.all(np.isfinite(field)):
        raise FormatError("non-finite values in flow field")
    return FlowField(height=height, width=width, data=field)


def write_flow(flow: FlowField) -> bytes:
    if not np.all(np.isfinite(flow.data)):
        raise ValidationError("cannot encode non-finite flow values")
    header = struct.pack("<fii", FLO_MAGIC, flow.width, flow.height)
    return header + flow.data.astype("<f4").tobytes()


def load_flow(path) -> FlowField:
    with open(path, "rb") as handle:
        return read_flow(handle.read())


def save_flow(path, flow: FlowField) -> None:
    with open(path, "wb") as handle:
        handle.write(write_flow(flow))
