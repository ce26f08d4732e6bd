"""Per-frame mask acquisition: external label files or a built-in
threshold segmenter, with interval-based label refresh and a simple
overlap-matching propagation between refreshes."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import SegMask, read_mask_pgm

SOURCE_EXTERNAL = "external-files"
SOURCE_BUILTIN = "builtin-threshold"

MASK_FILE_PATTERN = "{prefix}_{poc:05d}.pgm"


@dataclass
class MaskSource:
    kind: str
    prefix: str = ""
    threshold: int = 128
    min_area: int = 16

    def __post_init__(self):
        if self.kind not in (SOURCE_EXTERNAL, SOURCE_BUILTIN):
            raise ValueError(f"unknown mask source kind: {self.kind}")
        if self.kind == SOURCE_EXTERNAL and not self.prefix:
            raise ValueError("external mask source requires a file prefix")


@dataclass
class SegConfig:
    refresh_interval_gops: int = 1
    gop_size: int = 8

    def __post_init__(self):
        if self.refresh_interval_gops < 1:
            raise ValueError("refresh interval must be >= 1")
        if self.gop_size < 1:
            raise ValueError("gop size must be >= 1")

    @property
    def refresh_frames(self):
        return self.refresh_interval_gops * self.gop_size


def binarize(labels):
    """Foreground indicator of an instance map: 1 wherever the label is nonzero."""
    labels = np.asarray(labels)
    if labels.min() < 0:
        raise ValueError("instance labels must be nonnegative")
    return (labels > 0).astype(np.uint8)


def _components(binary):
    """4-connected components relabeled 1..K in raster order of first pixel."""
    labeled, n = ndimage.label(binary, structure=[[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    if n == 0:
        return labeled.astype(np.int32), 0
    flat = labeled.ravel()
    first = {}
    for idx in np.flatnonzero(flat):
        lab = flat[idx]
        if lab not in first:
            first[lab] = idx
            if len(first) == n:
                break
    order = sorted(first, key=first.get)
    remap = np.zeros(n + 1, dtype=np.int32)
    for newlab, oldlab in enumerate(order, start=1):
        remap[oldlab] = newlab
    return remap[labeled], n


def builtin_segment(frame, threshold, min_area):
    """Threshold the luma plane and keep 4-connected bright components of at
    least `min_area` pixels, labeled 1..K in raster order."""
    if not 0 < threshold < (1 << frame.bit_depth):
        raise ValueError("threshold outside sample range")
    bright = (frame.y >= threshold).astype(np.uint8)
    labeled, n = _components(bright)
    if n == 0:
        return SegMask(labeled, frame.poc)
    counts = np.bincount(labeled.ravel(), minlength=n + 1)
    keep = np.flatnonzero(counts[1:] >= min_area) + 1
    remap = np.zeros(n + 1, dtype=np.int32)
    for newlab, oldlab in enumerate(keep, start=1):
        remap[oldlab] = newlab
    return SegMask(remap[labeled], frame.poc)


def _propagate_labels(fresh_labels, prev_labels):
    """Re-tag components of `fresh_labels` with the previous frame's label of
    maximal overlap (ties to the smaller previous label).  Components with no
    overlap are dropped so propagation never invents a label."""
    out = np.zeros_like(fresh_labels)
    for comp in range(1, int(fresh_labels.max()) + 1):
        sel = fresh_labels == comp
        under = prev_labels[sel]
        under = under[under > 0]
        if under.size == 0:
            continue
        counts = np.bincount(under)
        best = int(np.argmax(counts))  # argmax returns the smallest on ties
        out[sel] = best
    return out


class MaskPipeline:
    """Incremental mask source: feed frames in poc order, get one mask each.

    With external files it is a pure loader.  With the built-in segmenter the
    first frame of every refresh interval is labeled fresh and labels inside
    the interval are carried forward by maximal-overlap matching.
    """

    def __init__(self, source: MaskSource, cfg: SegConfig):
        self.source = source
        self.cfg = cfg
        self._prev: SegMask | None = None

    def mask_for(self, frame):
        if self.source.kind == SOURCE_EXTERNAL:
            path = MASK_FILE_PATTERN.format(prefix=self.source.prefix, poc=frame.poc)
            if not os.path.exists(path):
                raise IOError(f"mask file for poc {frame.poc} not found: {path}")
            mask = read_mask_pgm(path, poc=frame.poc)
            if mask.shape != (frame.height, frame.width):
                raise ValueError(
                    f"mask dimensions {mask.shape} do not match frame at poc {frame.poc}"
                )
            self._prev = mask
            return mask
        fresh = builtin_segment(frame, self.source.threshold, self.source.min_area)
        if frame.poc % self.cfg.refresh_frames == 0 or self._prev is None:
            mask = fresh
        else:
            mask = SegMask(_propagate_labels(fresh.labels, self._prev.labels), frame.poc)
        self._prev = mask
        return mask


def run_pipeline(frames, source, cfg):
    """Acquire one mask per frame; see MaskPipeline for the refresh rules."""
    pipe = MaskPipeline(source, cfg)
    return [pipe.mask_for(f) for f in frames]
