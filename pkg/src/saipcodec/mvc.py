"""Motion vector coding: merge candidate gathering, the 71-entry primary
list (merge + distance/direction expansion), the corner-pattern-ordered
secondary list, and 4x4-unit motion storage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import INVALID_MV, MotionVector
from .maskops import CornerPattern

MERGE_LIST_LEN = 7
PRIMARY_LIST_LEN = 71
MMVD_BASES = 2
MMVD_DISTANCES = (1, 2, 4, 8, 16, 32, 64, 128)  # quarter-pel
MMVD_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))

# traversal order of the spatial/temporal merge sources
MERGE_ORDER = ("B1", "A1", "B0", "A0", "B2", "T")
SPATIAL_SOURCES = ("B1", "A1", "B0", "A0", "B2")
# near/far tie order used by the secondary list (zero and T have fixed slots)
SECONDARY_TIE_ORDER = ("B1", "B2", "B0", "A0", "A1")

REGION_PRIMARY = 0
REGION_SECONDARY = 1


@dataclass(frozen=True)
class CandidateEntry:
    mv: MotionVector
    source: str


@dataclass(frozen=True)
class JointCand:
    """Candidate with per-direction motion; uni candidates leave mv1 invalid."""

    mv0: MotionVector
    mv1: MotionVector
    source: str

    def key(self):
        return (
            self.mv0.valid, self.mv0.mvx, self.mv0.mvy, self.mv0.ref_idx,
            self.mv1.valid, self.mv1.mvx, self.mv1.mvy, self.mv1.ref_idx,
        )


class MotionGrid:
    """Per-4x4-unit motion cache for one frame, both reference directions."""

    def __init__(self, width, height):
        self.w4 = width // 4
        self.h4 = height // 4
        shape = (2, self.h4, self.w4)
        self.mvx = np.zeros(shape, dtype=np.int32)
        self.mvy = np.zeros(shape, dtype=np.int32)
        self.ref = np.zeros(shape, dtype=np.int8)
        self.valid = np.zeros(shape, dtype=np.uint8)
        self.region = np.zeros((self.h4, self.w4), dtype=np.uint8)

    def unit_at(self, x, y, direction):
        """Stored vector covering luma position (x, y), or invalid."""
        ux, uy = x >> 2, y >> 2
        if not (0 <= ux < self.w4 and 0 <= uy < self.h4):
            return INVALID_MV
        if not self.valid[direction, uy, ux]:
            return INVALID_MV
        return MotionVector(int(self.mvx[direction, uy, ux]),
                            int(self.mvy[direction, uy, ux]),
                            int(self.ref[direction, uy, ux]), True)

    def _write(self, ux, uy, direction, mv: MotionVector):
        self.mvx[direction, uy, ux] = mv.mvx
        self.mvy[direction, uy, ux] = mv.mvy
        self.ref[direction, uy, ux] = mv.ref_idx
        self.valid[direction, uy, ux] = 1 if mv.valid else 0

    def write_block(self, x, y, w, h, mv0, mv1, region=None):
        """Uniform motion over a block; `region` tags all units if given."""
        for uy in range(y >> 2, (y + h) >> 2):
            for ux in range(x >> 2, (x + w) >> 2):
                self._write(ux, uy, 0, mv0)
                self._write(ux, uy, 1, mv1)
                if region is not None:
                    self.region[uy, ux] = region

    def clone(self):
        g = MotionGrid(self.w4 * 4, self.h4 * 4)
        g.mvx = self.mvx.copy()
        g.mvy = self.mvy.copy()
        g.ref = self.ref.copy()
        g.valid = self.valid.copy()
        g.region = self.region.copy()
        return g


def neighbor_anchors(x, y, w, h):
    """Luma pixel positions probed for the five spatial sources."""
    return {
        "A1": (x - 1, y + h - 1),
        "A0": (x - 1, y + h),
        "B1": (x + w - 1, y - 1),
        "B0": (x + w, y - 1),
        "B2": (x - 1, y - 1),
    }


def gather_sources(grid: MotionGrid, x, y, w, h, temporal_grid=None):
    """Raw source -> joint motion mapping for a block.

    Unavailable sources are kept with invalid vectors so the secondary
    list can substitute zero motion without losing its slot.
    """
    anchors = neighbor_anchors(x, y, w, h)
    pool = {}
    for name, (ax, ay) in anchors.items():
        pool[name] = JointCand(grid.unit_at(ax, ay, 0), grid.unit_at(ax, ay, 1), name)
    if temporal_grid is not None:
        cx, cy = x + w // 2, y + h // 2
        pool["T"] = JointCand(temporal_grid.unit_at(cx, cy, 0),
                              temporal_grid.unit_at(cx, cy, 1), "T")
    else:
        pool["T"] = JointCand(INVALID_MV, INVALID_MV, "T")
    pool["zero"] = JointCand(MotionVector(0, 0, 0, True), MotionVector(0, 0, 0, True), "zero")
    return pool


def build_merge_candidates(pool, bi=False, n=MERGE_LIST_LEN):
    """Fixed-order traversal with duplicate pruning, zero-filled to length n."""
    out = []
    seen = set()
    for name in MERGE_ORDER:
        cand = pool[name]
        mv0, mv1 = cand.mv0, cand.mv1
        if not bi:
            mv1 = INVALID_MV
        if not (mv0.valid or mv1.valid):
            continue
        key = JointCand(mv0, mv1, name).key()
        if key in seen:
            continue
        seen.add(key)
        out.append(JointCand(mv0, mv1, name))
        if len(out) == n:
            return out
    zero1 = MotionVector(0, 0, 0, True) if bi else INVALID_MV
    while len(out) < n:
        out.append(JointCand(MotionVector(0, 0, 0, True), zero1, "zero"))
    return out


def build_merge_list(grid: MotionGrid, x, y, w, h, temporal_grid=None):
    """Single-direction merge list as CandidateEntry records (direction 0)."""
    pool = gather_sources(grid, x, y, w, h, temporal_grid)
    return [CandidateEntry(c.mv0 if c.mv0.valid else MotionVector(0, 0, 0, True), c.source)
            for c in build_merge_candidates(pool, bi=False)]


def _offset(mv: MotionVector, dx, dy):
    if not mv.valid:
        return mv
    return MotionVector(mv.mvx + dx, mv.mvy + dy, mv.ref_idx, True)


def mmvd_expand(base: JointCand, dist_idx, dir_idx):
    d = MMVD_DISTANCES[dist_idx]
    sx, sy = MMVD_DIRECTIONS[dir_idx]
    dx, dy = sx * d, sy * d
    return JointCand(_offset(base.mv0, dx, dy), _offset(base.mv1, dx, dy),
                     f"mmvd({base.source},{d},{dir_idx})")


def build_primary_list(merge7):
    """71 candidates: the merge seven, then base-major distance/direction
    expansion of the first two merge entries."""
    if len(merge7) != MERGE_LIST_LEN:
        raise ValueError("primary list expansion needs a merge list of length 7")
    out = list(merge7)
    for b in range(MMVD_BASES):
        for di in range(len(MMVD_DISTANCES)):
            for ki in range(len(MMVD_DIRECTIONS)):
                out.append(mmvd_expand(merge7[b], di, ki))
    assert len(out) == PRIMARY_LIST_LEN
    return out


def primary_index_fields(alpha):
    """Decompose a primary index into (is_merge, merge_idx | (cand, dist, dir))."""
    if alpha < MERGE_LIST_LEN:
        return True, alpha, 0, 0, 0
    r = alpha - MERGE_LIST_LEN
    base = r // (len(MMVD_DISTANCES) * len(MMVD_DIRECTIONS))
    r %= len(MMVD_DISTANCES) * len(MMVD_DIRECTIONS)
    dist = r // len(MMVD_DIRECTIONS)
    direction = r % len(MMVD_DIRECTIONS)
    return False, 0, base, dist, direction


def primary_index_from_fields(is_merge, merge_idx=0, cand=0, dist=0, direction=0):
    if is_merge:
        return merge_idx
    return (MERGE_LIST_LEN + cand * len(MMVD_DISTANCES) * len(MMVD_DIRECTIONS)
            + dist * len(MMVD_DIRECTIONS) + direction)


def _chebyshev(a, b):
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def secondary_source_order(pattern: CornerPattern, w, h):
    """Source order for the secondary list.

    Spatial sources adjacent to a secondary-flagged corner come first,
    the rest after, each group in a fixed order; with no flagged corner
    the regular merge traversal is kept.  Zero motion always sits at
    slot 3 and the temporal source at slot 6.
    """
    corners = []
    if pattern.tl:
        corners.append((0, 0))
    if pattern.tr:
        corners.append((w - 1, 0))
    if pattern.bl:
        corners.append((0, h - 1))
    if pattern.br:
        corners.append((w - 1, h - 1))
    anchors = neighbor_anchors(0, 0, w, h)
    if not corners:
        spatial = [s for s in MERGE_ORDER if s in SPATIAL_SOURCES]
    else:
        near, far = [], []
        for s in SECONDARY_TIE_ORDER:
            d = min(_chebyshev(anchors[s], c) for c in corners)
            (near if d <= 1 else far).append(s)
        spatial = near + far
    order = spatial[:3] + ["zero"] + spatial[3:] + ["T"]
    return order


def build_secondary_list(pool, pattern: CornerPattern, w, h, direction=0):
    """Pattern-ordered secondary candidates; unavailable sources keep their
    slot with zero motion so every list is a 7-source permutation."""
    order = secondary_source_order(pattern, w, h)
    out = []
    for name in order:
        cand = pool[name]
        mv = cand.mv0 if direction == 0 else cand.mv1
        if not mv.valid:
            mv = MotionVector(0, 0, 0, True)
        out.append(CandidateEntry(mv, name))
    return out


def store_motion(grid: MotionGrid, x, y, w, h, mp, bm):
    """Write the block's motion into the 4x4 cache: each unit stores the
    primary motion when at least half its mask pixels are primary."""
    if w % 4 or h % 4:
        raise ValueError("block dimensions must be multiples of 4")
    from .core import DIR_UNI_BWD

    if mp.direction == DIR_UNI_BWD:
        prim, sec = (INVALID_MV, mp.primary), (INVALID_MV, mp.secondary)
    else:
        prim, sec = (mp.primary, mp.primary_b), (mp.secondary, mp.secondary_b)
    bits = bm.bits
    for uy in range(h // 4):
        for ux in range(w // 4):
            n_primary = int(bits[uy * 4:uy * 4 + 4, ux * 4:ux * 4 + 4].sum())
            if n_primary * 2 >= 16:
                mv0, mv1 = prim
                tag = REGION_PRIMARY
            else:
                mv0, mv1 = sec
                tag = REGION_SECONDARY
            gx, gy = (x >> 2) + ux, (y >> 2) + uy
            grid._write(gx, gy, 0, mv0)
            grid._write(gx, gy, 1, mv1)
            grid.region[gy, gx] = tag
    return grid
