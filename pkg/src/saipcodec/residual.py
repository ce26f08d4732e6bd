"""Residual transform and quantization.

Fixed-point DCT-II on power-of-two square blocks (8-bit fractional basis)
with uniform scalar dead-zone quantization.  Everything is exact integer
arithmetic so encoder and decoder reconstructions are identical.
"""

from __future__ import annotations

import math

import numpy as np

_BASIS_BITS = 8
_BASIS_ONE = 1 << _BASIS_BITS
_dct_matrices: dict[int, np.ndarray] = {}

# inter-block dead zone of one sixth of the quantization step
DEAD_ZONE_NUM, DEAD_ZONE_DEN = 1, 6

MAX_LEVEL = (1 << 15) - 1


def dct_matrix(n):
    """Integer approximation of the orthonormal DCT-II basis, scaled 256x."""
    m = _dct_matrices.get(n)
    if m is None:
        k = np.arange(n).reshape(-1, 1)
        x = np.arange(n).reshape(1, -1)
        basis = np.cos(math.pi * (2 * x + 1) * k / (2 * n))
        basis[0, :] *= math.sqrt(1.0 / n)
        basis[1:, :] *= math.sqrt(2.0 / n)
        m = np.round(basis * _BASIS_ONE).astype(np.int64)
        _dct_matrices[n] = m
    return m


def forward_transform(block):
    """2-D integer DCT-II of a square residual block."""
    n = block.shape[0]
    if block.shape != (n, n) or n & (n - 1):
        raise ValueError("transform blocks must be power-of-two squares")
    t = dct_matrix(n)
    acc = t @ block.astype(np.int64) @ t.T
    half = 1 << (2 * _BASIS_BITS - 1)
    return ((acc + half) >> (2 * _BASIS_BITS)).astype(np.int32)


def inverse_transform(coeffs):
    n = coeffs.shape[0]
    t = dct_matrix(n)
    acc = t.T @ coeffs.astype(np.int64) @ t
    half = 1 << (2 * _BASIS_BITS - 1)
    return ((acc + half) >> (2 * _BASIS_BITS)).astype(np.int32)


def quant_step_scaled(qp):
    """Quantization step for a QP, scaled by 64 (exact integer)."""
    return max(1, int(round((2.0 ** ((qp - 4) / 6.0)) * 64)))


def quantize(coeffs, qp):
    """Dead-zone scalar quantization: level = floor(|c|/step + 1/6), signed."""
    q = quant_step_scaled(qp)
    c = coeffs.astype(np.int64)
    mag = np.abs(c)
    level = (mag * 64 * DEAD_ZONE_DEN + DEAD_ZONE_NUM * q) // (DEAD_ZONE_DEN * q)
    level = np.minimum(level, MAX_LEVEL)
    return (np.sign(c) * level).astype(np.int32)


def dequantize(levels, qp):
    q = quant_step_scaled(qp)
    lv = levels.astype(np.int64)
    mag = np.abs(lv) * q
    rec = (mag + 32) >> 6
    return (np.sign(lv) * rec).astype(np.int32)


def reconstruct(pred, levels, qp, max_value):
    """Prediction plus dequantized inverse-transformed residual, clipped."""
    res = inverse_transform(dequantize(levels, qp))
    return np.clip(pred + res, 0, max_value).astype(np.int32)
