"""Mask geometry: translating reference masks onto coding blocks, gradient
based pixel categories, blend weight maps, and corner patterns."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import MotionVector, SegMask

# 3x3 first-difference operator (full rows); the 5x5 expansion puts the
# +-1 rows two pixels out so it fires exactly one pixel further from an
# edge than the 3x3 one.
PREWITT_3 = np.array([[-1, -1, -1], [0, 0, 0], [1, 1, 1]], dtype=np.int32)
PREWITT_5 = np.array(
    [[-1] * 5, [0] * 5, [0] * 5, [0] * 5, [1] * 5], dtype=np.int32
)

# weight of the region-owning prediction, in fourths, per category
CATEGORY_W0_FOURTHS = np.array([4, 2, 3], dtype=np.uint8)


@dataclass
class BlockMask:
    """Mask window over one coding block; 1 marks the instance side."""

    x: int
    y: int
    w: int
    h: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (self.h, self.w):
            raise ValueError("mask bits must match the block dimensions")


@dataclass
class CategoryMap:
    cat: np.ndarray


@dataclass
class WeightMap:
    """Per-pixel blend weights stored in fourths; rows sum to 4."""

    w0: np.ndarray
    w1: np.ndarray

    @classmethod
    def from_categories(cls, cat):
        w0 = CATEGORY_W0_FOURTHS[cat]
        return cls(w0=w0, w1=(4 - w0).astype(np.uint8))


@dataclass(frozen=True)
class CornerPattern:
    """Which of the four block corners fall in the secondary region."""

    tl: int
    tr: int
    bl: int
    br: int

    @property
    def id(self):
        return self.tl * 8 + self.tr * 4 + self.bl * 2 + self.br

    @classmethod
    def from_id(cls, pid):
        return cls((pid >> 3) & 1, (pid >> 2) & 1, (pid >> 1) & 1, pid & 1)


def round_mv_to_pel(mv: MotionVector):
    """Quarter-pel vector rounded to whole pels, ties away from zero."""

    def r(v):
        s = -1 if v < 0 else 1
        return s * ((abs(v) + 2) >> 2)

    return r(mv.mvx), r(mv.mvy)


def translate_mask(ref_mask: SegMask, x, y, w, h, mv: MotionVector):
    """Window the reference mask at the block position displaced by the
    pel-rounded vector, replicating outside the picture."""
    if not mv.valid:
        raise ValueError("cannot translate by an invalid motion vector")
    dx, dy = round_mv_to_pel(mv)
    bits = kernels.fetch_block(ref_mask.binary, x + dx, y + dy, w, h)
    return BlockMask(x, y, w, h, np.ascontiguousarray(bits, dtype=np.uint8))


def prewitt_g(window, scale=3):
    """Gradient magnitude of a mask window: the larger absolute correlation
    with the row operator and its transpose."""
    window = np.asarray(window, dtype=np.int64)
    if scale == 3:
        op = PREWITT_3
    elif scale == 5:
        op = PREWITT_5
    else:
        raise ValueError("operator scale must be 3 or 5")
    if window.shape != op.shape:
        raise ValueError(f"window must be {op.shape[0]}x{op.shape[0]}")
    return int(max(abs(np.sum(window * op)), abs(np.sum(window * op.T))))


def classify_pixels(bm: BlockMask):
    """Three-way category of every block pixel: 1 beside the partition line,
    2 one pixel further out, 0 elsewhere. Windows replicate at block edges."""
    return CategoryMap(kernels.category_map(bm.bits))


def weight_map(cm: CategoryMap):
    return WeightMap.from_categories(cm.cat)


def classify_pattern(bm: BlockMask):
    """Corner pattern of a block mask whose 1-value marks the primary region:
    a corner is secondary when its 2x2 pixel group is all zero."""
    if bm.w < 4 or bm.h < 4:
        raise ValueError("corner classification needs blocks of at least 4x4")
    b = bm.bits

    def flag(rows, cols):
        return int(not b[rows, cols].any())

    return CornerPattern(
        tl=flag(slice(0, 2), slice(0, 2)),
        tr=flag(slice(0, 2), slice(-2, None)),
        bl=flag(slice(-2, None), slice(0, 2)),
        br=flag(slice(-2, None), slice(-2, None)),
    )


def precompute_weight_map(mask: SegMask):
    """Frame-level category maps for a reference mask, plus the 2:1
    decimated chroma variants.  Block queries slice these so blending is
    seamless across block boundaries."""
    cat = kernels.category_map(mask.binary)
    mask_c = np.ascontiguousarray(mask.binary[::2, ::2])
    cat_c = np.ascontiguousarray(cat[::2, ::2])
    return cat, cat_c, mask_c


def slice_window(plane, x0, y0, w, h):
    """Replicate-padded window of a frame-level map (mask or categories)."""
    return kernels.fetch_block(plane, x0, y0, w, h)
