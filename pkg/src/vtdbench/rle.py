"""Run-length mask codec.

Masks are stored as column-major run lengths where the first run counts
background pixels. The on-disk textual form is the COCO-compatible
compressed string (delta-coded counts in 6-bit printable chunks).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError, ValidationError


@dataclass(frozen=True)
class RleMask:
    """Compressed binary mask: height, width and column-major run lengths."""

    height: int
    width: int
    runs: tuple[int, ...]

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValidationError(
                f"mask dimensions must be positive, got {self.height}x{self.width}"
            )
        if any(r < 0 for r in self.runs):
            raise FormatError("negative run length")

    @property
    def size(self) -> tuple[int, int]:
        return (self.height, self.width)

    def pixel_count(self) -> int:
        return sum(self.runs)

    def area(self) -> int:
        """Number of foreground pixels."""
        return sum(self.runs[1::2])

    def foreground_intervals(self) -> list[tuple[int, int]]:
        """Half-open [start, end) foreground intervals in column-major pixel order."""
        out = []
        pos = 0
        for i, run in enumerate(self.runs):
            if i % 2 == 1 and run > 0:
                out.append((pos, pos + run))
            pos += run
        return out


def _normalize_runs(runs: list[int]) -> tuple[int, ...]:
    """Merge interior zero runs; keep at most a single leading zero."""
    spans: list[list] = []  # [value, length] with length > 0
    value = False  # first run counts background
    for run in runs:
        if run > 0:
            if spans and spans[-1][0] == value:
                spans[-1][1] += run
            else:
                spans.append([value, run])
        value = not value
    out: list[int] = []
    expected = False
    for val, length in spans:
        if val != expected:
            out.append(0)
            expected = not expected
        out.append(length)
        expected = not expected
    return tuple(out) if out else (0,)


def rle_encode(mask: np.ndarray) -> RleMask:
    """Encode a dense binary raster into column-major run lengths."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] <= 0 or arr.shape[1] <= 0:
        raise ValidationError(f"expected a non-empty 2-D raster, got shape {arr.shape}")
    height, width = arr.shape
    flat = arr.astype(bool).flatten(order="F")
    # boundaries of value changes
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return RleMask(height=int(height), width=int(width), runs=tuple(int(r) for r in runs))


def rle_decode(mask: RleMask) -> np.ndarray:
    """Decode to a dense boolean raster of shape (height, width)."""
    total = mask.pixel_count()
    expected = mask.height * mask.width
    if total != expected:
        raise FormatError(
            f"corrupt mask: run sum {total} != {mask.height}x{mask.width} = {expected}"
        )
    values = np.zeros(len(mask.runs), dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, np.asarray(mask.runs, dtype=np.int64))
    return flat.reshape((mask.height, mask.width), order="F")


def runs_to_string(runs: tuple[int, ...]) -> str:
    """COCO-style compressed counts: delta-coded, 6-bit chunks offset by 48."""
    chars = []
    prev2 = list(runs)
    for i, count in enumerate(runs):
        x = int(count)
        if i > 2:
            x -= int(prev2[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            chars.append(chr(c + 48))
    return "".join(chars)


def string_to_runs(counts: str) -> tuple[int, ...]:
    """Inverse of runs_to_string."""
    runs: list[int] = []
    pos = 0
    n = len(counts)
    while pos < n:
        x = 0
        k = 0
        more = True
        while more:
            if pos >= n:
                raise FormatError("truncated compressed run string")
            c = ord(counts[pos]) - 48
            if c < 0 or c > 0x3F:
                raise FormatError(f"invalid character in run string at position {pos}")
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            pos += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(runs) > 2:
            x += runs[-2]
        if x < 0:
            raise FormatError("negative run length in compressed string")
        runs.append(x)
    return tuple(runs)


def mask_from_coco(counts: str, size: tuple[int, int]) -> RleMask:
    height, width = int(size[0]), int(size[1])
    runs = _normalize_runs(list(string_to_runs(counts)))
    mask = RleMask(height=height, width=width, runs=runs)
    if mask.pixel_count() != height * width:
        raise FormatError(
            f"corrupt mask: run sum {mask.pixel_count()} != {height}x{width}"
        )
    return mask


def mask_to_coco(mask: RleMask) -> dict:
    return {"counts": runs_to_string(mask.runs), "size": [mask.height, mask.width]}


def mask_intersection_area(a: RleMask, b: RleMask) -> int:
    """Exact foreground overlap computed on runs, without decoding."""
    if a.size != b.size:
        raise ShapeError(f"mask size mismatch: {a.size} vs {b.size}")
    ia = a.foreground_intervals()
    ib = b.foreground_intervals()
    i = j = 0
    inter = 0
    while i < len(ia) and j < len(ib):
        s = max(ia[i][0], ib[j][0])
        e = min(ia[i][1], ib[j][1])
        if s < e:
            inter += e - s
        if ia[i][1] <= ib[j][1]:
            i += 1
        else:
            j += 1
    return inter
