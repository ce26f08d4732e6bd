"""Pure NumPy implementations of the hot codec kernels.

These are the reference semantics; the optional Cython module `_ckernels`
must produce bit-identical results.  Every function works on int32 sample
planes and uint8 masks and sticks to exact integer arithmetic so encoder
and decoder reconstructions agree to the bit.
"""

import numpy as np

BACKEND = "python"

_PROB_BITS = 15
_PROB_ONE = 1 << _PROB_BITS
_ADAPT_SHIFT = 5
_FULL = 512
_HALF = 256
_QUARTER = 128


def fetch_block(plane, x0, y0, w, h):
    """Copy a w*h window at (x0, y0) with edge replication outside the plane."""
    ph, pw = plane.shape
    ys = np.clip(np.arange(y0, y0 + h), 0, ph - 1)
    xs = np.clip(np.arange(x0, x0 + w), 0, pw - 1)
    return plane[np.ix_(ys, xs)]


def interpolate(src, fx, fy, taps, out_h, out_w):
    """Separable fractional-sample filter, horizontal then vertical.

    `src` carries the filter margin: (taps//2 - 1) rows/cols before the
    block and taps//2 after.  Both passes accumulate unnormalized and a
    single +2048 >> 12 rounding is applied at the end, which is exactly
    equivalent to per-pass 6-bit normalization for coefficients summing
    to 64.  No clipping here; callers clip once at the final output.
    """
    ntaps = taps.shape[1]
    ch = taps[fx].astype(np.int64)
    cv = taps[fy].astype(np.int64)
    if fx == 0 and fy == 0:
        m = ntaps // 2 - 1
        return src[m:m + out_h, m:m + out_w].astype(np.int32)
    s = src.astype(np.int64)
    tmp = np.zeros((src.shape[0], out_w), dtype=np.int64)
    for k in range(ntaps):
        if ch[k]:
            tmp += ch[k] * s[:, k:k + out_w]
    out = np.zeros((out_h, out_w), dtype=np.int64)
    for k in range(ntaps):
        if cv[k]:
            out += cv[k] * tmp[k:k + out_h, :]
    return ((out + 2048) >> 12).astype(np.int32)


def blend(a, b, pm, w0q):
    """Region-weighted fuse of two predictions in fourths: +2 >> 2 rounding.

    Where pm != 0 the first input gets weight w0q/4, elsewhere the roles
    swap (w0q is the weight of the region-owning prediction).
    """
    w = w0q.astype(np.int32)
    wa = np.where(pm != 0, w, 4 - w)
    return (wa * a + (4 - wa) * b + 2) >> 2


def ssd(a, b):
    d = (a - b).astype(np.int64)
    return int(np.sum(d * d))


_H4 = None
_H8 = None


def _hadamard():
    global _H4, _H8
    if _H8 is None:
        h2 = np.array([[1, 1], [1, -1]], dtype=np.int64)
        _H4 = np.kron(h2, h2)
        _H8 = np.kron(_H4, h2)
    return _H4, _H8


def satd(a, b):
    """Hadamard-transformed absolute difference; 8x8 tiles (sum//2) with a
    4x4 unnormalized fallback when dimensions are not multiples of 8."""
    h4, h8 = _hadamard()
    r = (a - b).astype(np.int64)
    hh, ww = r.shape
    total = 0
    if hh % 8 == 0 and ww % 8 == 0:
        t = r.reshape(hh // 8, 8, ww // 8, 8).transpose(0, 2, 1, 3)
        coeffs = h8 @ t @ h8
        total = int(np.sum(np.abs(coeffs)) // 2)
    else:
        t = r.reshape(hh // 4, 4, ww // 4, 4).transpose(0, 2, 1, 3)
        coeffs = h4 @ t @ h4
        total = int(np.sum(np.abs(coeffs)))
    return total


def category_map(mask):
    """Per-pixel 3-way edge-distance category of a binary mask.

    1: a 3x3 gradient fires (next to the partition line); 2: only the 5x5
    gradient fires (one pixel further out); 0 otherwise.  The mask border
    is edge-replicated, matching the window convention used everywhere.
    """
    m = np.pad(mask.astype(np.int32), 2, mode="edge")
    # 3x3 operator: full +1/-1 rows (and its transpose) reduce to
    # differences of 3-sample box sums.
    box3_h = m[:, :-2] + m[:, 1:-1] + m[:, 2:]
    box3_v = m[:-2, :] + m[1:-1, :] + m[2:, :]
    g0v = np.abs(box3_h[4:, 1:-1] - box3_h[:-4, 1:-1])
    g0h = np.abs(box3_v[1:-1, 4:] - box3_v[1:-1, :-4])
    g0 = np.maximum(g0v, g0h)
    # 5x5 expansion: +-1 rows at distance two, zero in between.
    box5_h = box3_h[:, :-2] + m[:, 3:-1] + m[:, 4:]
    box5_v = box3_v[:-2, :] + m[3:-1, :] + m[4:, :]
    g1v = np.abs(box5_h[4:, :] - box5_h[:-4, :])
    g1h = np.abs(box5_v[:, 4:] - box5_v[:, :-4])
    g1 = np.maximum(g1v, g1h)
    cat = np.zeros(mask.shape, dtype=np.uint8)
    cat[g1 > 0] = 2
    cat[g0 > 0] = 1
    return cat


def new_contexts(n):
    return np.full(n, _PROB_ONE // 2, dtype=np.uint16)


class RangeEncoder:
    """9-bit binary range coder with 15-bit adaptive contexts (shift 5)."""

    def __init__(self):
        self._low = 0
        self._high = _FULL - 1
        self._pending = 0
        self._acc = 0
        self._nacc = 0
        self._buf = bytearray()

    def _emit(self, bit):
        self._acc = (self._acc << 1) | bit
        self._nacc += 1
        if self._nacc == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._nacc = 0

    def _emit_with_pending(self, bit):
        self._emit(bit)
        inv = 1 - bit
        while self._pending:
            self._emit(inv)
            self._pending -= 1

    def _encode(self, bit, p1):
        rng = self._high - self._low + 1
        split = (rng * p1) >> _PROB_BITS
        if split < 1:
            split = 1
        elif split > rng - 1:
            split = rng - 1
        if bit:
            self._high = self._low + split - 1
        else:
            self._low += split
        while True:
            if self._high < _HALF:
                self._emit_with_pending(0)
            elif self._low >= _HALF:
                self._emit_with_pending(1)
                self._low -= _HALF
                self._high -= _HALF
            elif self._low >= _QUARTER and self._high < _HALF + _QUARTER:
                self._pending += 1
                self._low -= _QUARTER
                self._high -= _QUARTER
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1

    def encode(self, ctxs, idx, bit):
        p1 = int(ctxs[idx])
        self._encode(bit, p1)
        if bit:
            ctxs[idx] = p1 + ((_PROB_ONE - p1) >> _ADAPT_SHIFT)
        else:
            ctxs[idx] = p1 - (p1 >> _ADAPT_SHIFT)

    def encode_bypass(self, bit):
        self._encode(bit, _PROB_ONE // 2)

    def finish(self):
        self._pending += 1
        if self._low < _QUARTER:
            self._emit_with_pending(0)
        else:
            self._emit_with_pending(1)
        if self._nacc:
            self._acc <<= 8 - self._nacc
            self._buf.append(self._acc)
            self._acc = 0
            self._nacc = 0
        return bytes(self._buf)

    @property
    def bit_count(self):
        return len(self._buf) * 8 + self._nacc


class RangeDecoder:
    """Exact inverse of RangeEncoder; reads 0 bits past the end of data."""

    def __init__(self, data):
        self._data = bytes(data)
        self._pos = 0
        self._acc = 0
        self._nacc = 0
        self._low = 0
        self._high = _FULL - 1
        self._value = 0
        self.bits_read = 0
        for _ in range(9):
            self._value = (self._value << 1) | self._read_bit()

    def _read_bit(self):
        if self._nacc == 0:
            if self._pos >= len(self._data):
                return 0
            self._acc = self._data[self._pos]
            self._pos += 1
            self._nacc = 8
        self._nacc -= 1
        self.bits_read += 1
        return (self._acc >> self._nacc) & 1

    def _decode(self, p1):
        rng = self._high - self._low + 1
        split = (rng * p1) >> _PROB_BITS
        if split < 1:
            split = 1
        elif split > rng - 1:
            split = rng - 1
        if self._value < self._low + split:
            bit = 1
            self._high = self._low + split - 1
        else:
            bit = 0
            self._low += split
        while True:
            if self._high < _HALF:
                pass
            elif self._low >= _HALF:
                self._low -= _HALF
                self._high -= _HALF
                self._value -= _HALF
            elif self._low >= _QUARTER and self._high < _HALF + _QUARTER:
                self._low -= _QUARTER
                self._high -= _QUARTER
                self._value -= _QUARTER
            else:
                break
            self._low <<= 1
            self._high = (self._high << 1) | 1
            self._value = (self._value << 1) | self._read_bit()
        return bit

    def decode(self, ctxs, idx):
        p1 = int(ctxs[idx])
        bit = self._decode(p1)
        if bit:
            ctxs[idx] = p1 + ((_PROB_ONE - p1) >> _ADAPT_SHIFT)
        else:
            ctxs[idx] = p1 - (p1 >> _ADAPT_SHIFT)
        return bit

    def decode_bypass(self):
        return self._decode(_PROB_ONE // 2)
