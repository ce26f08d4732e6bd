"""Bitstream syntax: sequence header, per-frame records, coding-unit
syntax and residual coefficient coding on top of the adaptive binary
range coder.

The exact layout is documented in docs/FORMAT.md; the trial-rate helpers
used by the encoder share this code path, so measured rates equal the
bits actually emitted for the same symbols.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import BitstreamError

MAGIC = b"SAIP"
VERSION = 1

PROFILE_LDP = 0
PROFILE_LDB = 1
PROFILE_NAMES = {PROFILE_LDP: "ldp", PROFILE_LDB: "ldb"}

SLICE_I = 0
SLICE_P = 1
SLICE_B = 2

SEG_BUILTIN = 0
SEG_EXTERNAL = 1

# context model indices; the segmentation-mode elements get their own
# models, separate from everything else
CTX_SPLIT = 0          # 4 models, one per quadtree depth
CTX_SKIP = 4
CTX_INTRA = 5
CTX_MERGE_IDX = 6
CTX_MVD_FLAG = 7
CTX_CBF_Y = 8
CTX_CBF_U = 9
CTX_CBF_V = 10
CTX_SIG_Y = 11
CTX_SIG_C = 12
CTX_SAIP_FLAG = 13
CTX_SAIP_MERGE_FLAG = 14
CTX_SAIP_MERGE_IDX = 15
CTX_SAIP_BACK_IDX = 16
CTX_SAIP_REVERSE = 17
CTX_SAIP_MMVD_CAND = 18
CTX_SAIP_MMVD_DIST = 19
NUM_CTX = 20

MODE_INTRA = "intra"
MODE_BASELINE = "baseline"
MODE_SAIP_MERGE = "saip-merge"
MODE_SAIP_MMVD = "saip-mmvd"
MODE_SKIP = "skip"


def new_contexts():
    return kernels.new_contexts(NUM_CTX)


@dataclass
class SequenceHeader:
    width: int
    height: int
    bit_depth: int = 8
    gop_size: int = 8
    qp: int = 32
    profile: int = PROFILE_LDP
    ref_count: int = 2
    frame_count: int = 0
    enable_saip_merge: bool = True
    enable_saip_mmvd: bool = True
    et_enabled: bool = True
    max_secondary_candidates: int = 7
    seg_source: int = SEG_BUILTIN
    seg_prefix: str = ""
    seg_threshold: int = 128
    seg_min_area: int = 16
    seg_refresh: int = 1

    def __post_init__(self):
        if not 1 <= self.max_secondary_candidates <= 7:
            raise ValueError("max_secondary_candidates must be in [1, 7]")

    @property
    def saip_enabled(self):
        return self.enable_saip_merge or self.enable_saip_mmvd


class BitWriter:
    """MSB-first bit packer for the fixed header section."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._n = 0

    def write_bit(self, b):
        self._acc = (self._acc << 1) | (b & 1)
        self._n += 1
        if self._n == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._n = 0

    def write_bits(self, value, n):
        for i in reversed(range(n)):
            self.write_bit((value >> i) & 1)

    def write_eg0(self, value):
        v = value + 1
        nbits = v.bit_length()
        self.write_bits(0, nbits - 1)
        self.write_bits(v, nbits)

    def align(self):
        while self._n:
            self.write_bit(0)

    def data(self):
        self.align()
        return bytes(self._buf)


class BitReader:
    def __init__(self, data, offset=0):
        self._data = data
        self._pos = offset
        self._acc = 0
        self._n = 0

    def read_bit(self):
        if self._n == 0:
            if self._pos >= len(self._data):
                raise BitstreamError("unexpected end of header data")
            self._acc = self._data[self._pos]
            self._pos += 1
            self._n = 8
        self._n -= 1
        return (self._acc >> self._n) & 1

    def read_bits(self, n):
        v = 0
        for _ in range(n):
            v = (v << 1) | self.read_bit()
        return v

    def read_eg0(self):
        zeros = 0
        while self.read_bit() == 0:
            zeros += 1
            if zeros > 32:
                raise BitstreamError("malformed exponential-Golomb code")
        v = 1
        for _ in range(zeros):
            v = (v << 1) | self.read_bit()
        return v - 1

    def byte_position(self):
        return self._pos


def write_header(hdr: SequenceHeader):
    out = bytearray()
    out += MAGIC
    out.append(VERSION)
    flags = (
        (1 if hdr.enable_saip_merge else 0)
        | (2 if hdr.enable_saip_mmvd else 0)
        | (4 if hdr.et_enabled else 0)
        | (8 if hdr.seg_source == SEG_EXTERNAL else 0)
    )
    out += struct.pack(
        "<HHBBBBBIB",
        hdr.width, hdr.height, hdr.bit_depth, hdr.gop_size, hdr.qp,
        hdr.profile, hdr.ref_count, hdr.frame_count, flags,
    )
    bw = BitWriter()
    bw.write_eg0(hdr.max_secondary_candidates)
    out += bw.data()
    if hdr.seg_source == SEG_EXTERNAL:
        prefix = hdr.seg_prefix.encode("utf-8")
        out += struct.pack("<H", len(prefix))
        out += prefix
    else:
        out += struct.pack("<HH", hdr.seg_threshold, hdr.seg_min_area)
    out.append(hdr.seg_refresh)
    return bytes(out)


def read_header(data):
    if data[:4] != MAGIC:
        raise BitstreamError("not a saip bitstream (bad magic)")
    if data[4] != VERSION:
        raise BitstreamError(f"unsupported bitstream version {data[4]}")
    fixed = struct.unpack_from("<HHBBBBBIB", data, 5)
    width, height, bit_depth, gop, qp, profile, refs, nframes, flags = fixed
    pos = 5 + struct.calcsize("<HHBBBBBIB")
    br = BitReader(data, pos)
    max_sec = br.read_eg0()
    pos = br.byte_position()
    hdr = SequenceHeader(
        width=width, height=height, bit_depth=bit_depth, gop_size=gop, qp=qp,
        profile=profile, ref_count=refs, frame_count=nframes,
        enable_saip_merge=bool(flags & 1), enable_saip_mmvd=bool(flags & 2),
        et_enabled=bool(flags & 4),
        max_secondary_candidates=max_sec,
        seg_source=SEG_EXTERNAL if flags & 8 else SEG_BUILTIN,
    )
    if hdr.seg_source == SEG_EXTERNAL:
        (plen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        hdr.seg_prefix = data[pos:pos + plen].decode("utf-8")
        pos += plen
    else:
        hdr.seg_threshold, hdr.seg_min_area = struct.unpack_from("<HH", data, pos)
        pos += 4
    hdr.seg_refresh = data[pos]
    pos += 1
    return hdr, pos


def write_frame_record(poc, slice_type, qp, payload):
    return struct.pack("<IBBI", poc, slice_type, qp, len(payload)) + payload


def read_frame_record(data, pos):
    if pos + 10 > len(data):
        raise BitstreamError(f"truncated frame record at byte offset {pos}")
    poc, st, qp, plen = struct.unpack_from("<IBBI", data, pos)
    pos += 10
    if pos + plen > len(data):
        raise BitstreamError(f"truncated frame payload at byte offset {pos}")
    return poc, st, qp, data[pos:pos + plen], pos + plen


@dataclass
class SyntaxCU:
    """Everything signaled for one coding unit (residual levels aside)."""

    skip_flag: int = 0
    merge_idx: int = 0
    intra_flag: int = 0
    saip_flag: int = 0
    saip_merge_flag: int = 1
    saip_merge_idx: int = 0
    saip_mmvd_cand_idx: int = 0
    saip_mmvd_distance_idx: int = 0
    saip_mmvd_direction_idx: int = 0
    saip_back_idx: int = 0
    saip_reverse_idx: int = 0
    mvd_x: int = 0
    mvd_y: int = 0

    def mode(self):
        if self.skip_flag:
            return MODE_SKIP
        if self.intra_flag:
            return MODE_INTRA
        if self.saip_flag:
            return MODE_SAIP_MERGE if self.saip_merge_flag else MODE_SAIP_MMVD
        return MODE_BASELINE


def _write_tu(enc, ctxs, first_ctx, value, vmax):
    # first bin context-coded, the rest bypass
    for k in range(value):
        if k == 0:
            enc.encode(ctxs, first_ctx, 1)
        else:
            enc.encode_bypass(1)
    if value < vmax:
        if value == 0:
            enc.encode(ctxs, first_ctx, 0)
        else:
            enc.encode_bypass(0)


def _read_tu(dec, ctxs, first_ctx, vmax):
    v = 0
    if dec.decode(ctxs, first_ctx) == 0:
        return 0
    v = 1
    while v < vmax and dec.decode_bypass():
        v += 1
    return v


def _write_eg0_bypass(enc, value):
    v = value + 1
    nbits = v.bit_length()
    for _ in range(nbits - 1):
        enc.encode_bypass(0)
    for i in reversed(range(nbits)):
        enc.encode_bypass((v >> i) & 1)


def _read_eg0_bypass(dec):
    zeros = 0
    while dec.decode_bypass() == 0:
        zeros += 1
        if zeros > 32:
            raise BitstreamError("malformed bypass exponential-Golomb code")
    v = 1
    for _ in range(zeros):
        v = (v << 1) | dec.decode_bypass()
    return v - 1


def _signed_to_unsigned(v):
    return 2 * v - 1 if v > 0 else -2 * v


def _unsigned_to_signed(u):
    return (u + 1) // 2 if u & 1 else -(u // 2)


def write_cu_syntax(enc, ctxs, cu: SyntaxCU, hdr: SequenceHeader, is_inter_slice=True):
    """Mode syntax of one coding unit (residual coefficients written separately)."""
    if not is_inter_slice:
        return
    enc.encode(ctxs, CTX_SKIP, cu.skip_flag)
    if cu.skip_flag:
        _write_tu(enc, ctxs, CTX_MERGE_IDX, cu.merge_idx, 6)
        return
    enc.encode(ctxs, CTX_INTRA, cu.intra_flag)
    if cu.intra_flag:
        return
    if hdr.saip_enabled:
        enc.encode(ctxs, CTX_SAIP_FLAG, cu.saip_flag)
    if cu.saip_flag:
        if hdr.enable_saip_merge and hdr.enable_saip_mmvd:
            enc.encode(ctxs, CTX_SAIP_MERGE_FLAG, cu.saip_merge_flag)
        if cu.saip_merge_flag:
            _write_tu(enc, ctxs, CTX_SAIP_MERGE_IDX, cu.saip_merge_idx, 6)
        else:
            enc.encode(ctxs, CTX_SAIP_MMVD_CAND, cu.saip_mmvd_cand_idx)
            _write_tu(enc, ctxs, CTX_SAIP_MMVD_DIST, cu.saip_mmvd_distance_idx, 7)
            enc.encode_bypass((cu.saip_mmvd_direction_idx >> 1) & 1)
            enc.encode_bypass(cu.saip_mmvd_direction_idx & 1)
        _write_tu(enc, ctxs, CTX_SAIP_BACK_IDX, cu.saip_back_idx, 6)
        enc.encode(ctxs, CTX_SAIP_REVERSE, cu.saip_reverse_idx)
    else:
        _write_tu(enc, ctxs, CTX_MERGE_IDX, cu.merge_idx, 6)
        has_mvd = 1 if (cu.mvd_x or cu.mvd_y) else 0
        enc.encode(ctxs, CTX_MVD_FLAG, has_mvd)
        if has_mvd:
            _write_eg0_bypass(enc, _signed_to_unsigned(cu.mvd_x))
            _write_eg0_bypass(enc, _signed_to_unsigned(cu.mvd_y))


def read_cu_syntax(dec, ctxs, hdr: SequenceHeader, is_inter_slice=True):
    cu = SyntaxCU()
    if not is_inter_slice:
        cu.intra_flag = 1
        return cu
    cu.skip_flag = dec.decode(ctxs, CTX_SKIP)
    if cu.skip_flag:
        cu.merge_idx = _read_tu(dec, ctxs, CTX_MERGE_IDX, 6)
        return cu
    cu.intra_flag = dec.decode(ctxs, CTX_INTRA)
    if cu.intra_flag:
        return cu
    if hdr.saip_enabled:
        cu.saip_flag = dec.decode(ctxs, CTX_SAIP_FLAG)
    if cu.saip_flag:
        if hdr.enable_saip_merge and hdr.enable_saip_mmvd:
            cu.saip_merge_flag = dec.decode(ctxs, CTX_SAIP_MERGE_FLAG)
        else:
            cu.saip_merge_flag = 1 if hdr.enable_saip_merge else 0
        if cu.saip_merge_flag:
            cu.saip_merge_idx = _read_tu(dec, ctxs, CTX_SAIP_MERGE_IDX, 6)
        else:
            cu.saip_mmvd_cand_idx = dec.decode(ctxs, CTX_SAIP_MMVD_CAND)
            cu.saip_mmvd_distance_idx = _read_tu(dec, ctxs, CTX_SAIP_MMVD_DIST, 7)
            cu.saip_mmvd_direction_idx = (dec.decode_bypass() << 1) | dec.decode_bypass()
        cu.saip_back_idx = _read_tu(dec, ctxs, CTX_SAIP_BACK_IDX, 6)
        if cu.saip_back_idx >= hdr.max_secondary_candidates:
            raise BitstreamError("secondary candidate index out of range")
        cu.saip_reverse_idx = dec.decode(ctxs, CTX_SAIP_REVERSE)
    else:
        cu.merge_idx = _read_tu(dec, ctxs, CTX_MERGE_IDX, 6)
        if dec.decode(ctxs, CTX_MVD_FLAG):
            cu.mvd_x = _unsigned_to_signed(_read_eg0_bypass(dec))
            cu.mvd_y = _unsigned_to_signed(_read_eg0_bypass(dec))
    return cu


_zigzag_cache: dict[int, np.ndarray] = {}


def zigzag_order(n):
    """Anti-diagonal scan positions for an n*n block."""
    order = _zigzag_cache.get(n)
    if order is None:
        idx = []
        for s in range(2 * n - 1):
            rng = range(max(0, s - n + 1), min(s, n - 1) + 1)
            diag = [(s - j, j) for j in rng]
            if s & 1:
                diag.reverse()
            idx.extend(diag)
        order = np.array([r * n + c for r, c in idx], dtype=np.int64)
        _zigzag_cache[n] = order
    return order


def code_residual(enc, ctxs, levels, sig_ctx):
    """Coded-block flag, last position, significance, magnitudes, signs."""
    n = levels.shape[0]
    if levels.shape != (n, n) or n & (n - 1):
        raise ValueError("residual blocks must be power-of-two squares")
    if np.abs(levels).max(initial=0) > (1 << 15) - 1:
        raise ValueError("coefficient magnitude out of range")
    flat = levels.ravel()[zigzag_order(n)]
    nz = np.flatnonzero(flat)
    cbf = 1 if nz.size else 0
    enc.encode(ctxs, sig_ctx, cbf)
    if not cbf:
        return
    last = int(nz[-1])
    _write_eg0_bypass(enc, last)
    for i in range(last):
        enc.encode(ctxs, sig_ctx, 1 if flat[i] else 0)
    for i in range(last + 1):
        v = int(flat[i])
        if v == 0:
            continue
        _write_eg0_bypass(enc, abs(v) - 1)
        enc.encode_bypass(1 if v < 0 else 0)


def decode_residual(dec, ctxs, n, sig_ctx):
    flat = np.zeros(n * n, dtype=np.int32)
    if dec.decode(ctxs, sig_ctx):
        last = _read_eg0_bypass(dec)
        if last >= n * n:
            raise BitstreamError("residual last position out of range")
        sig = [False] * (last + 1)
        sig[last] = True
        for i in range(last):
            sig[i] = bool(dec.decode(ctxs, sig_ctx))
        for i in range(last + 1):
            if not sig[i]:
                continue
            mag = _read_eg0_bypass(dec) + 1
            if dec.decode_bypass():
                mag = -mag
            flat[i] = mag
    out = np.zeros(n * n, dtype=np.int32)
    out[zigzag_order(n)] = flat
    return out.reshape(n, n)


def measure_bits(ctxs, writer):
    """Exact emitted size, in bits, of `writer(enc, ctxs_clone)` flushed on a
    fresh coder.  Shares the encode path, so trial rates match real rates."""
    enc = kernels.RangeEncoder()
    clone = ctxs.copy()
    writer(enc, clone)
    return len(enc.finish()) * 8
