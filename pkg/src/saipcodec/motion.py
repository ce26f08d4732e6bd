"""Region-partitioned motion compensation.

The two-region prediction runs in two fused steps: the integer-pel blocks
of both vectors are blended first (so interpolation near the partition
line sees the right neighboring samples), then each region is
interpolated at its own fractional phase and the results are blended
again.  Away from the partition line (category 0) the output is exactly
the plain single-vector prediction of the owning region, so the fused
path only alters the two-pixel edge band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels, maskops
from .core import DIR_BI, DIR_UNI_BWD, Frame, MotionPair, MotionVector, ReferenceStore
from .maskops import CATEGORY_W0_FOURTHS, BlockMask, round_mv_to_pel

LUMA_TAPS = np.array(
    [
        [0, 0, 0, 64, 0, 0, 0, 0],
        [-1, 4, -10, 58, 17, -5, 1, 0],
        [-1, 4, -11, 40, 40, -11, 4, -1],
        [0, 1, -5, 17, 58, -10, 4, -1],
    ],
    dtype=np.int32,
)

CHROMA_TAPS = np.array(
    [
        [0, 64, 0, 0],
        [-2, 58, 10, -2],
        [-4, 54, 16, -2],
        [-6, 46, 28, -4],
        [-4, 36, 36, -4],
        [-4, 28, 46, -6],
        [-2, 16, 54, -4],
        [-2, 10, 58, -2],
    ],
    dtype=np.int32,
)


@dataclass(frozen=True)
class InterpFilter:
    """Per-phase integer filter bank; coefficients of each phase sum to 64."""

    taps: np.ndarray
    shift: int = 6

    def __post_init__(self):
        sums = self.taps.sum(axis=1)
        if not np.all(sums == 1 << self.shift):
            raise ValueError("filter phases must sum to the normalization factor")

    @property
    def ntaps(self):
        return self.taps.shape[1]

    @property
    def margin_before(self):
        return self.ntaps // 2 - 1

    @property
    def margin_after(self):
        return self.ntaps // 2


LUMA_FILTER = InterpFilter(LUMA_TAPS)
CHROMA_FILTER = InterpFilter(CHROMA_TAPS)


@dataclass
class Prediction:
    """Predicted samples for one block, all three planes at 4:2:0 geometry."""

    x: int
    y: int
    w: int
    h: int
    y_plane: np.ndarray
    u_plane: np.ndarray
    v_plane: np.ndarray

    def planes(self):
        return (self.y_plane, self.u_plane, self.v_plane)


def interpolate(src, frac, filt: InterpFilter, out_h, out_w, clip_max=None):
    """Separable fractional interpolation of a margined block.

    `src` must carry margin_before rows/cols on top/left and margin_after
    on bottom/right; phase (0, 0) is an exact copy.
    """
    fx, fy = frac
    need = filt.ntaps - 1
    if src.shape != (out_h + need, out_w + need):
        raise ValueError(
            f"insufficient margin: expected {(out_h + need, out_w + need)}, got {src.shape}"
        )
    out = kernels.interpolate(src, fx, fy, filt.taps, out_h, out_w)
    if clip_max is not None:
        out = np.clip(out, 0, clip_max)
    return out


def _fetch_margined(plane, x, y, w, h, filt):
    mb = filt.margin_before
    need = filt.ntaps - 1
    return kernels.fetch_block(plane, x - mb, y - mb, w + need, h + need)


def luma_mc(frame: Frame, x, y, w, h, mv: MotionVector, clip=True):
    """Plain single-vector luma prediction at quarter-pel precision."""
    ix, fx = mv.mvx >> 2, mv.mvx & 3
    iy, fy = mv.mvy >> 2, mv.mvy & 3
    src = _fetch_margined(frame.y, x + ix, y + iy, w, h, LUMA_FILTER)
    return interpolate(src, (fx, fy), LUMA_FILTER, h, w,
                       frame.max_value if clip else None)


def chroma_mc(plane, max_value, cx, cy, cw, ch, mv: MotionVector, clip=True):
    """Plain single-vector chroma prediction; luma quarter-pel vectors become
    eighth-pel at chroma resolution."""
    ix, fx = mv.mvx >> 3, mv.mvx & 7
    iy, fy = mv.mvy >> 3, mv.mvy & 7
    src = _fetch_margined(plane, cx + ix, cy + iy, cw, ch, CHROMA_FILTER)
    return interpolate(src, (fx, fy), CHROMA_FILTER, ch, cw,
                       max_value if clip else None)


def ormc_blend(p_primary, p_secondary, bm: BlockMask, wm: maskops.WeightMap):
    """Fuse two same-geometry predictions with the per-pixel region weights."""
    if p_primary.shape != p_secondary.shape or p_primary.shape != bm.bits.shape:
        raise ValueError("blend inputs must share geometry")
    if wm.w0.shape != bm.bits.shape:
        raise ValueError("weight map must share the block geometry")
    return kernels.blend(p_primary, p_secondary, bm.bits, wm.w0)


def fetch_integer_block(ref: Frame, x, y, w, h, mv_int=(0, 0)):
    """Whole-pel block copy (chroma follows the codec's half-phase rule)."""
    mv = MotionVector(mv_int[0] * 4, mv_int[1] * 4)
    return baseline_predict_frame(ref, x, y, w, h, mv)


def baseline_predict_frame(ref: Frame, x, y, w, h, mv: MotionVector):
    yb = luma_mc(ref, x, y, w, h, mv)
    ub = chroma_mc(ref.u, ref.max_value, x // 2, y // 2, w // 2, h // 2, mv)
    vb = chroma_mc(ref.v, ref.max_value, x // 2, y // 2, w // 2, h // 2, mv)
    return Prediction(x, y, w, h, yb, ub, vb)


def _average(a, b):
    return (a + b + 1) >> 1


def baseline_predict(store: ReferenceStore, x, y, w, h, mv: MotionVector,
                     ref_lists, mv_b: MotionVector = None):
    """Whole-block translational prediction, uni or bi (equal-weight average)."""
    if mv_b is not None and mv_b.valid and mv.valid:
        pa = baseline_predict_frame(store.get(ref_lists[0][mv.ref_idx]), x, y, w, h, mv)
        pb = baseline_predict_frame(store.get(ref_lists[1][mv_b.ref_idx]), x, y, w, h, mv_b)
        return Prediction(x, y, w, h,
                          _average(pa.y_plane, pb.y_plane),
                          _average(pa.u_plane, pb.u_plane),
                          _average(pa.v_plane, pb.v_plane))
    if mv_b is not None and mv_b.valid and not mv.valid:
        lst, the_mv = 1, mv_b
    else:
        lst, the_mv = 0, mv
    return baseline_predict_frame(store.get(ref_lists[lst][the_mv.ref_idx]),
                                  x, y, w, h, the_mv)


def partition_windows(entry, x, y, w, h, mv_primary, reverse_idx, margined_by=0):
    """Mask and weight windows for a block, translated by the primary vector.

    Returns (pm, w0q) where pm is the j-resolved primary-region indicator
    and w0q the owning-region weights in fourths, both (h + 2m, w + 2m)...
    the extra margin extends the window symmetrically before/after per the
    luma filter convention (3 before, 4 after) when margined_by is set.
    """
    dx, dy = round_mv_to_pel(mv_primary)
    if margined_by:
        mb, ma = margined_by, margined_by + 1
    else:
        mb = ma = 0
    pm = maskops.slice_window(entry.mask.binary, x + dx - mb, y + dy - mb,
                              w + mb + ma, h + mb + ma)
    if reverse_idx:
        pm = (1 - pm).astype(np.uint8)
    else:
        pm = np.ascontiguousarray(pm, dtype=np.uint8)
    cat = maskops.slice_window(entry.cat, x + dx - mb, y + dy - mb,
                               w + mb + ma, h + mb + ma)
    return pm, CATEGORY_W0_FOURTHS[cat], cat


def _direction_luma(entry_p, mvp, entry_s, mvs, reverse_idx, x, y, w, h,
                    two_step=True, mc_cache=None):
    """One direction of the two-region luma prediction (clipped)."""
    maxval = entry_p.frame.max_value

    def plain(entry, mv):
        if mc_cache is not None:
            key = (entry.frame.poc, mv.mvx, mv.mvy)
            hit = mc_cache.get(key)
            if hit is None:
                hit = luma_mc(entry.frame, x, y, w, h, mv)
                mc_cache[key] = hit
            return hit
        return luma_mc(entry.frame, x, y, w, h, mv)

    same_motion = (mvp.mvx, mvp.mvy, entry_p.frame.poc) == (mvs.mvx, mvs.mvy, entry_s.frame.poc)
    if same_motion:
        return plain(entry_p, mvp)

    pm_m, w0q_m, _ = partition_windows(entry_p, x, y, w, h, mvp, reverse_idx,
                                       margined_by=LUMA_FILTER.margin_before)
    lo = int(pm_m.min())
    if lo == int(pm_m.max()):
        # single-region window: the fused pipeline degenerates to plain MC
        return plain(entry_p, mvp) if lo else plain(entry_s, mvs)

    need = LUMA_FILTER.ntaps - 1
    mb = LUMA_FILTER.margin_before
    ixp, fxp = mvp.mvx >> 2, mvp.mvx & 3
    iyp, fyp = mvp.mvy >> 2, mvp.mvy & 3
    ixs, fxs = mvs.mvx >> 2, mvs.mvx & 3
    iys, fys = mvs.mvy >> 2, mvs.mvy & 3
    blk_p = kernels.fetch_block(entry_p.frame.y, x + ixp - mb, y + iyp - mb,
                                w + need, h + need)
    blk_s = kernels.fetch_block(entry_s.frame.y, x + ixs - mb, y + iys - mb,
                                w + need, h + need)
    p_one = kernels.interpolate(blk_p, fxp, fyp, LUMA_TAPS, h, w)
    s_one = kernels.interpolate(blk_s, fxs, fys, LUMA_TAPS, h, w)
    pm_b = pm_m[mb:mb + h, mb:mb + w]
    w0q_b = w0q_m[mb:mb + h, mb:mb + w]
    if two_step:
        fused = kernels.blend(blk_p, blk_s, pm_m, w0q_m)
        f_p = kernels.interpolate(fused, fxp, fyp, LUMA_TAPS, h, w)
        f_s = kernels.interpolate(fused, fxs, fys, LUMA_TAPS, h, w)
        edge = w0q_b != 4
        a = np.where(edge, f_p, p_one)
        b = np.where(edge, f_s, s_one)
    else:
        a, b = p_one, s_one
    out = kernels.blend(a, b, pm_b, w0q_b)
    return np.clip(out, 0, maxval)


def _direction_chroma(plane_attr, entry_p, mvp, entry_s, mvs, reverse_idx,
                      x, y, w, h, two_step=True):
    """One direction of the two-region prediction for one chroma plane."""
    maxval = entry_p.frame.max_value
    cx, cy, cw, ch = x // 2, y // 2, w // 2, h // 2
    plane_p = getattr(entry_p.frame, plane_attr)
    plane_s = getattr(entry_s.frame, plane_attr)

    same_motion = (mvp.mvx, mvp.mvy, entry_p.frame.poc) == (mvs.mvx, mvs.mvy, entry_s.frame.poc)
    if same_motion:
        return chroma_mc(plane_p, maxval, cx, cy, cw, ch, mvp)

    dx, dy = round_mv_to_pel(mvp)
    mb = CHROMA_FILTER.margin_before
    need = CHROMA_FILTER.ntaps - 1
    cdx, cdy = dx >> 1, dy >> 1
    pm_m = maskops.slice_window(entry_p.mask_c, cx + cdx - mb, cy + cdy - mb,
                                cw + need, ch + need)
    if reverse_idx:
        pm_m = (1 - pm_m).astype(np.uint8)
    else:
        pm_m = np.ascontiguousarray(pm_m, dtype=np.uint8)
    lo = int(pm_m.min())
    if lo == int(pm_m.max()):
        plane, mv = (plane_p, mvp) if lo else (plane_s, mvs)
        return chroma_mc(plane, maxval, cx, cy, cw, ch, mv)

    cat_m = maskops.slice_window(entry_p.cat_c, cx + cdx - mb, cy + cdy - mb,
                                 cw + need, ch + need)
    w0q_m = CATEGORY_W0_FOURTHS[cat_m]
    ixp, fxp = mvp.mvx >> 3, mvp.mvx & 7
    iyp, fyp = mvp.mvy >> 3, mvp.mvy & 7
    ixs, fxs = mvs.mvx >> 3, mvs.mvx & 7
    iys, fys = mvs.mvy >> 3, mvs.mvy & 7
    blk_p = kernels.fetch_block(plane_p, cx + ixp - mb, cy + iyp - mb, cw + need, ch + need)
    blk_s = kernels.fetch_block(plane_s, cx + ixs - mb, cy + iys - mb, cw + need, ch + need)
    p_one = kernels.interpolate(blk_p, fxp, fyp, CHROMA_TAPS, ch, cw)
    s_one = kernels.interpolate(blk_s, fxs, fys, CHROMA_TAPS, ch, cw)
    pm_b = pm_m[mb:mb + ch, mb:mb + cw]
    w0q_b = w0q_m[mb:mb + ch, mb:mb + cw]
    if two_step:
        fused = kernels.blend(blk_p, blk_s, pm_m, w0q_m)
        f_p = kernels.interpolate(fused, fxp, fyp, CHROMA_TAPS, ch, cw)
        f_s = kernels.interpolate(fused, fxs, fys, CHROMA_TAPS, ch, cw)
        edge = w0q_b != 4
        a = np.where(edge, f_p, p_one)
        b = np.where(edge, f_s, s_one)
    else:
        a, b = p_one, s_one
    out = kernels.blend(a, b, pm_b, w0q_b)
    return np.clip(out, 0, maxval)


def _resolve_direction(store, ref_lists, mv_p, mv_s, lst):
    entry_p = store.get(ref_lists[lst][mv_p.ref_idx])
    entry_s = store.get(ref_lists[lst][mv_s.ref_idx])
    return entry_p, entry_s


def saip_predict_luma(store: ReferenceStore, x, y, w, h, mp: MotionPair,
                      ref_lists, two_step=True, mc_cache=None):
    """Luma-only two-region prediction (the stage-1 search path)."""
    if mp.direction == DIR_BI:
        ep, es = _resolve_direction(store, ref_lists, mp.primary, mp.secondary, 0)
        fwd = _direction_luma(ep, mp.primary, es, mp.secondary, mp.reverse_idx,
                              x, y, w, h, two_step, mc_cache)
        ep, es = _resolve_direction(store, ref_lists, mp.primary_b, mp.secondary_b, 1)
        bwd = _direction_luma(ep, mp.primary_b, es, mp.secondary_b, mp.reverse_idx,
                              x, y, w, h, two_step, mc_cache)
        return _average(fwd, bwd)
    lst = 1 if mp.direction == DIR_UNI_BWD else 0
    ep, es = _resolve_direction(store, ref_lists, mp.primary, mp.secondary, lst)
    return _direction_luma(ep, mp.primary, es, mp.secondary, mp.reverse_idx,
                           x, y, w, h, two_step, mc_cache)


def saip_predict(store: ReferenceStore, x, y, w, h, mp: MotionPair,
                 ref_lists, two_step=True):
    """Full two-region prediction.

    Returns the prediction and the block's j-resolved primary-region mask
    (first direction), which also drives motion storage.
    """
    if mp.direction == DIR_BI:
        dirs = [(mp.primary, mp.secondary, 0), (mp.primary_b, mp.secondary_b, 1)]
    elif mp.direction == DIR_UNI_BWD:
        dirs = [(mp.primary, mp.secondary, 1)]
    else:
        dirs = [(mp.primary, mp.secondary, 0)]

    outs = []
    for mv_p, mv_s, lst in dirs:
        ep, es = _resolve_direction(store, ref_lists, mv_p, mv_s, lst)
        yb = _direction_luma(ep, mv_p, es, mv_s, mp.reverse_idx, x, y, w, h, two_step)
        ub = _direction_chroma("u", ep, mv_p, es, mv_s, mp.reverse_idx, x, y, w, h, two_step)
        vb = _direction_chroma("v", ep, mv_p, es, mv_s, mp.reverse_idx, x, y, w, h, two_step)
        outs.append((yb, ub, vb))
    if len(outs) == 2:
        planes = tuple(_average(a, b) for a, b in zip(outs[0], outs[1]))
    else:
        planes = outs[0]

    mv_p0, _, lst0 = dirs[0]
    entry0 = store.get(ref_lists[lst0][mv_p0.ref_idx])
    pm, _, _ = partition_windows(entry0, x, y, w, h, mv_p0, mp.reverse_idx)
    bm = BlockMask(x, y, w, h, pm)
    return Prediction(x, y, w, h, *planes), bm
