"""Shared domain types, raw video / mask file I/O, and plane arithmetic.

File formats handled here:
  * raw planar YUV 4:2:0 ("I420"), 8-bit or 10-bit little-endian 16-bit
  * binary PGM (P5) instance label maps, one file per frame
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class BitstreamError(ValueError):
    """Raised when a bitstream cannot be parsed."""


@dataclass(frozen=True)
class MotionVector:
    """Quarter-pel motion vector plus reference list position."""

    mvx: int = 0
    mvy: int = 0
    ref_idx: int = 0
    valid: bool = True

    MAX_COMPONENT = 4 * 512

    def __post_init__(self):
        if abs(self.mvx) > self.MAX_COMPONENT or abs(self.mvy) > self.MAX_COMPONENT:
            raise ValueError(f"motion vector out of range: ({self.mvx}, {self.mvy})")


INVALID_MV = MotionVector(0, 0, 0, False)

DIR_UNI_FWD = 0
DIR_UNI_BWD = 1
DIR_BI = 2


@dataclass(frozen=True)
class MotionPair:
    """Motion payload of a segmentation-partitioned block.

    `primary`/`secondary` are the first-direction vectors; in bi mode the
    second direction's pair lives in `primary_b`/`secondary_b`.
    `reverse_idx` declares which mask value marks the primary region and
    the candidate indices record how the vectors were coded.
    """

    primary: MotionVector
    secondary: MotionVector
    reverse_idx: int = 0
    direction: int = DIR_UNI_FWD
    primary_cand_idx: int = 0
    secondary_cand_idx: int = 0
    primary_b: MotionVector = INVALID_MV
    secondary_b: MotionVector = INVALID_MV

    def __post_init__(self):
        if self.reverse_idx not in (0, 1):
            raise ValueError("reverse_idx must be 0 or 1")
        if not 0 <= self.primary_cand_idx <= 70:
            raise ValueError("primary candidate index out of range")
        if not 0 <= self.secondary_cand_idx <= 6:
            raise ValueError("secondary candidate index out of range")
        if self.direction == DIR_BI and not (self.primary.valid and self.primary_b.valid):
            raise ValueError("bi prediction requires valid motion in both directions")


class Frame:
    """One planar 4:2:0 picture. Planes are int32 arrays, immutable by use."""

    __slots__ = ("width", "height", "bit_depth", "y", "u", "v", "poc")

    def __init__(self, y, u, v, bit_depth=8, poc=0):
        y = np.asarray(y, dtype=np.int32)
        u = np.asarray(u, dtype=np.int32)
        v = np.asarray(v, dtype=np.int32)
        h, w = y.shape
        if w % 8 or h % 8:
            raise ValueError(f"frame dimensions must be multiples of 8, got {w}x{h}")
        if u.shape != (h // 2, w // 2) or v.shape != (h // 2, w // 2):
            raise ValueError("chroma planes must be half-size in each dimension")
        if bit_depth not in (8, 10):
            raise ValueError("bit depth must be 8 or 10")
        maxval = (1 << bit_depth) - 1
        for p in (y, u, v):
            if p.min() < 0 or p.max() > maxval:
                raise ValueError(f"sample outside [0, {maxval}]")
        self.width = w
        self.height = h
        self.bit_depth = bit_depth
        self.y = y
        self.u = u
        self.v = v
        self.poc = poc

    @property
    def max_value(self):
        return (1 << self.bit_depth) - 1

    def planes(self):
        return (self.y, self.u, self.v)

    @classmethod
    def blank(cls, width, height, bit_depth=8, poc=0, value=None):
        if value is None:
            value = 1 << (bit_depth - 1)
        y = np.full((height, width), value, dtype=np.int32)
        c = np.full((height // 2, width // 2), value, dtype=np.int32)
        return cls(y, c.copy(), c.copy(), bit_depth, poc)


class SegMask:
    """Instance label map and its binarization for one frame."""

    __slots__ = ("labels", "binary", "poc")

    def __init__(self, labels, poc=0):
        labels = np.asarray(labels, dtype=np.int32)
        if labels.min() < 0:
            raise ValueError("instance labels must be nonnegative")
        self.labels = labels
        self.binary = (labels > 0).astype(np.uint8)
        self.poc = poc

    @property
    def shape(self):
        return self.labels.shape


def pad_replicate(plane, margin):
    """Extend a plane outward by `margin` pixels of edge replication."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if margin == 0:
        return np.array(plane, copy=True)
    return np.pad(plane, margin, mode="edge")


def _frame_bytes(width, height, bit_depth):
    samples = width * height * 3 // 2
    return samples * (1 if bit_depth == 8 else 2)


def read_yuv(path, width, height, bit_depth=8):
    """Read a raw 4:2:0 file into a list of frames, poc assigned in file order."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    if width % 2 or height % 2:
        raise ValueError("dimensions must be even for 4:2:0")
    fb = _frame_bytes(width, height, bit_depth)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) % fb:
        raise IOError(
            f"truncated YUV file {path}: {len(data)} bytes is not a multiple of "
            f"the {fb}-byte frame size (error at offset {len(data) - len(data) % fb})"
        )
    dtype = np.uint8 if bit_depth == 8 else np.dtype("<u2")
    csize = (width // 2) * (height // 2)
    frames = []
    for poc in range(len(data) // fb):
        raw = np.frombuffer(data, dtype=dtype, count=fb // dtype.itemsize if bit_depth != 8 else fb,
                            offset=poc * fb)
        y = raw[: width * height].reshape(height, width)
        u = raw[width * height: width * height + csize].reshape(height // 2, width // 2)
        v = raw[width * height + csize:].reshape(height // 2, width // 2)
        frames.append(Frame(y, u, v, bit_depth, poc))
    return frames


def write_yuv(frames, path):
    """Write frames as raw 4:2:0; returns the byte count written."""
    frames = list(frames)
    if frames:
        w, h, bd = frames[0].width, frames[0].height, frames[0].bit_depth
        for f in frames:
            if (f.width, f.height, f.bit_depth) != (w, h, bd):
                raise ValueError("all frames must share dimensions and bit depth")
    count = 0
    with open(path, "wb") as fh:
        for f in frames:
            dtype = np.uint8 if f.bit_depth == 8 else np.dtype("<u2")
            for plane in f.planes():
                raw = plane.astype(dtype).tobytes()
                fh.write(raw)
                count += len(raw)
    return count


def _pgm_tokens(data):
    """Header tokens of a PGM, honoring '#' comments; yields (token, offset_after)."""
    i = 0
    n = len(data)
    while True:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (10, 13):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise BitstreamError("unexpected end of PGM header")
        yield data[start:i], i


def read_mask_pgm(path, poc=0):
    """Read a binary (P5) PGM whose pixel values are instance labels."""
    with open(path, "rb") as fh:
        data = fh.read()
    toks = _pgm_tokens(data)
    try:
        magic, _ = next(toks)
        if magic != b"P5":
            raise BitstreamError(f"{path}: not a binary PGM (magic {magic!r})")
        width, _ = next(toks)
        height, _ = next(toks)
        maxval, end = next(toks)
        width, height, maxval = int(width), int(height), int(maxval)
    except (StopIteration, ValueError) as exc:
        raise BitstreamError(f"{path}: malformed PGM header") from exc
    if not (0 < maxval <= 255):
        raise BitstreamError(f"{path}: maxval {maxval} unsupported (must be <= 255)")
    pixels = data[end + 1: end + 1 + width * height]
    if len(pixels) != width * height:
        raise BitstreamError(f"{path}: PGM pixel data truncated")
    labels = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return SegMask(labels, poc)


def write_pgm(path, plane, maxval=255):
    """Write a 2-D array of values in [0, maxval] as binary PGM."""
    arr = np.asarray(plane)
    if arr.min() < 0 or arr.max() > maxval:
        raise ValueError("values outside PGM range")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        fh.write(arr.astype(np.uint8).tobytes())


@dataclass
class RefEntry:
    """Everything the prediction path needs from one reference picture."""

    frame: Frame
    mask: SegMask
    mask_c: np.ndarray
    cat: np.ndarray
    cat_c: np.ndarray
    grid: "object" = None


class ReferenceStore:
    """Decoded-picture buffer: frame, mask, motion grid and cached weight
    categories per poc.  The category maps are computed once per reference
    (precompute counter is exposed for instrumentation)."""

    def __init__(self):
        self._entries: dict[int, RefEntry] = {}
        self.precompute_calls = 0

    def __contains__(self, poc):
        return poc in self._entries

    def __len__(self):
        return len(self._entries)

    def pocs(self):
        return sorted(self._entries)

    def add(self, frame, mask, grid=None):
        from . import maskops

        if mask.shape != (frame.height, frame.width):
            raise ValueError(
                f"mask dimensions {mask.shape} do not match frame "
                f"{(frame.height, frame.width)} at poc {frame.poc}"
            )
        cat, cat_c, mask_c = maskops.precompute_weight_map(mask)
        self.precompute_calls += 1
        entry = RefEntry(frame=frame, mask=mask, mask_c=mask_c, cat=cat,
                         cat_c=cat_c, grid=grid)
        self._entries[frame.poc] = entry
        return entry

    def get(self, poc):
        if poc not in self._entries:
            raise ValueError(f"reference poc {poc} not in store")
        return self._entries[poc]

    def nearest_before(self, poc, count):
        """The `count` most recent reference pocs before `poc`, nearest first."""
        prior = [p for p in sorted(self._entries) if p < poc]
        prior.reverse()
        return prior[:count]
