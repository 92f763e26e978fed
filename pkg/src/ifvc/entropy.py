"""Lossless entropy layer for quantized semantic residuals.

Pipeline per frame: quantize the 14 residuals to signed integers,
zigzag-map them onto the unsigned domain, binarize with the zero-order
exponential-Golomb code, then compress the concatenated bit-string with
a binary PPM context model driving a 32-bit carry-propagating range
coder.  Everything here is deterministic: identical inputs produce
byte-identical payloads on every platform.

The PPM model codes the bit alphabet {0, 1} with contexts of up to
``max_order`` previous bits (default 8).  Escape estimation follows
method C (escape count = number of distinct symbols seen in the
context) with binary exclusion: after an escape the symbol that was
seen in the higher-order context cannot reoccur and is masked out of
every lower-order estimate.  Context counts are halved when either
count reaches 2**16.  Statistics persist across frames within one
stream and reset at stream start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DecodeError, ValidationError
from .semantics import COMPONENT_NAMES, DIM

INT31_MAX = 2**31 - 1

#: Default per-component quantization steps in flatten order:
#: mouth x6, eye, rot x3 (radians), trans x3, loc.
DEFAULT_STEPS = (0.02,) * 6 + (0.05,) + (0.005,) * 3 + (0.01,) * 3 + (0.01,)


@dataclass(frozen=True)
class QuantConfig:
    """Per-component quantization step sizes, flatten order."""

    steps: tuple[float, ...] = DEFAULT_STEPS

    def __post_init__(self):
        steps = tuple(float(s) for s in self.steps)
        if len(steps) != DIM:
            raise ValidationError(f"need {DIM} step sizes, got {len(steps)}")
        for name, s in zip(COMPONENT_NAMES, steps):
            if not (math.isfinite(s) and s > 0):
                raise ValidationError(f"step for {name} must be finite and > 0, got {s}")
        object.__setattr__(self, "steps", steps)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.steps, dtype=np.float64)


@dataclass(frozen=True)
class SymbolBlock:
    """Quantized residual for one frame: 14 signed integers."""

    symbols: tuple[int, ...]

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        if len(syms) != DIM:
            raise ValidationError(f"need {DIM} symbols, got {len(syms)}")
        for name, s in zip(COMPONENT_NAMES, syms):
            if abs(s) > INT31_MAX:
                raise OverflowError(f"symbol for {name} exceeds 31-bit range: {s}")
        object.__setattr__(self, "symbols", syms)


def quantize(residual, cfg: QuantConfig) -> SymbolBlock:
    """Quantize residuals: symbol[i] = round(residual[i] / step[i]), ties away from zero."""
    res = np.asarray(residual, dtype=np.float64)
    if res.shape != (DIM,):
        raise ValidationError(f"residual must have {DIM} components, got shape {res.shape}")
    if not np.all(np.isfinite(res)):
        bad = COMPONENT_NAMES[int(np.flatnonzero(~np.isfinite(res))[0])]
        raise ValidationError(f"residual component {bad} is not finite")
    mag = np.floor(np.abs(res) / cfg.as_array() + 0.5)
    if np.any(mag > INT31_MAX):
        bad = COMPONENT_NAMES[int(np.flatnonzero(mag > INT31_MAX)[0])]
        raise OverflowError(f"quantized symbol for {bad} exceeds 31-bit range")
    syms = (np.sign(res) * mag).astype(np.int64)
    return SymbolBlock(tuple(int(s) for s in syms))


def dequantize(block: SymbolBlock, cfg: QuantConfig) -> np.ndarray:
    """Inverse quantization: out[i] = symbol[i] * step[i]."""
    return np.asarray(block.symbols, dtype=np.float64) * cfg.as_array()


def zigzag(n: int) -> int:
    """Map signed to unsigned: 0,-1,1,-2,2,... -> 0,1,2,3,4,..."""
    if abs(n) > INT31_MAX:
        raise OverflowError(f"zigzag input out of 31-bit range: {n}")
    return -2 * n - 1 if n < 0 else 2 * n


def unzigzag(u: int) -> int:
    if u < 0:
        raise ValueError(f"unzigzag input must be non-negative: {u}")
    return (u >> 1) ^ -(u & 1)


def zigzag_array(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    return np.where(n < 0, -2 * n - 1, 2 * n)


def unzigzag_array(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.int64)
    return (u >> 1) ^ -(u & 1)


# ---------------------------------------------------------------------------
# Zero-order exponential-Golomb code
# ---------------------------------------------------------------------------

def eg0_encode(u: int) -> str:
    """Codeword for u >= 0: floor(log2(u+1)) zero bits, then binary(u+1)."""
    if u < 0:
        raise ValueError(f"exp-Golomb input must be non-negative: {u}")
    m = (u + 1).bit_length() - 1
    return "0" * m + format(u + 1, "b")


def eg0_decode(bits: str, start: int = 0) -> tuple[int, int]:
    """Decode exactly one codeword from ``bits[start:]``.

    Returns (value, end index).  Raises DecodeError on truncation.
    """
    n = len(bits)
    p = start
    while p < n and bits[p] == "0":
        p += 1
    if p >= n:
        raise DecodeError("truncated exp-Golomb stream: no leading 1 bit found")
    m = p - start
    end = p + m + 1
    if end > n:
        raise DecodeError("truncated exp-Golomb codeword")
    return int(bits[p:end], 2) - 1, end


def eg0_encode_array(values) -> np.ndarray:
    """Concatenated exp-Golomb bits for a vector of unsigned ints.

    Returns a uint8 array of 0/1 values.  Bit identical to joining
    :func:`eg0_encode` outputs.
    """
    u = np.asarray(values, dtype=np.uint64)
    if u.size == 0:
        return np.zeros(0, dtype=np.uint8)
    # frexp gives the exact exponent: u+1 in [2^(e-1), 2^e) => bit_length e.
    _, exp = np.frexp((u + np.uint64(1)).astype(np.float64))
    m = exp.astype(np.int64) - 1
    lens = 2 * m + 1
    out = np.zeros(int(lens.sum()), dtype=np.uint8)
    starts = np.concatenate(([0], np.cumsum(lens)[:-1])) + m
    reps = m + 1
    seg = np.arange(int(reps.sum()), dtype=np.int64) - np.repeat(np.cumsum(reps) - reps, reps)
    shifts = (np.repeat(m, reps) - seg).astype(np.uint64)
    vals = np.repeat(u + np.uint64(1), reps)
    out[np.repeat(starts, reps) + seg] = ((vals >> shifts) & np.uint64(1)).astype(np.uint8)
    return out


_BIT_WEIGHTS = (np.uint64(1) << np.arange(63, dtype=np.uint64))[::-1].copy()


def eg0_decode_array(bits: np.ndarray, count: int) -> tuple[np.ndarray, int]:
    """Decode ``count`` codewords from a 0/1 uint8 array.

    Returns (values, bits consumed).  Raises DecodeError on truncation.
    """
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    ones = np.flatnonzero(bits)
    out = np.empty(count, dtype=np.int64)
    cursor = 0
    for i in range(count):
        j = int(np.searchsorted(ones, cursor))
        if j >= ones.size:
            raise DecodeError("truncated exp-Golomb stream: no leading 1 bit found")
        p = int(ones[j])
        m = p - cursor
        end = p + m + 1
        if end > bits.size:
            raise DecodeError("truncated exp-Golomb codeword")
        out[i] = int(bits[p:end].astype(np.uint64) @ _BIT_WEIGHTS[63 - (m + 1):]) - 1
        cursor = end
    return out, cursor


# ---------------------------------------------------------------------------
# Binary PPM model + 32-bit range coder (numba kernels)
# ---------------------------------------------------------------------------

_RC_TOP = 1 << 24
_RC_MASK = (1 << 32) - 1
_COUNT_LIMIT = 1 << 16


@dataclass
class PpmModel:
    """Adaptive binary context model; order-k tables for k = 0..max_order.

    ``counts`` is a flat int64 array: the order-k table starts at entry
    2*(2**k - 1) and is indexed by the last k bits of history, two
    counts (for bit 0 and bit 1) per context.
    """

    max_order: int = 8
    counts: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not (0 <= self.max_order <= 16):
            raise ValidationError(f"max_order must be in [0, 16], got {self.max_order}")
        size = 2 * ((1 << (self.max_order + 1)) - 1)
        if self.counts is None:
            self.counts = np.zeros(size, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
            if self.counts.shape != (size,):
                raise ValidationError("counts array has wrong shape for max_order")
            if np.any(self.counts < 0):
                raise ValidationError("context counts must be non-negative")

    def reset(self) -> None:
        self.counts[:] = 0

    def copy(self) -> "PpmModel":
        return PpmModel(self.max_order, self.counts.copy())

    def state_equals(self, other: "PpmModel") -> bool:
        return self.max_order == other.max_order and np.array_equal(self.counts, other.counts)


@njit(cache=True)
def _rc_shift_low(low, cache, cache_size, out, opos):
    if low < 0xFF000000 or low > _RC_MASK:
        carry = low >> 32
        out[opos] = (cache + carry) & 0xFF
        opos += 1
        fill = (0xFF + carry) & 0xFF
        for _ in range(cache_size - 1):
            out[opos] = fill
            opos += 1
        cache_size = 0
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low << 8) & _RC_MASK
    return low, cache, cache_size, opos


@njit(cache=True)
def _rc_encode(low, rng, cache, cache_size, out, opos, cum, freq, total):
    r = rng // total
    low += r * cum
    rng = r * freq
    while rng < _RC_TOP:
        low, cache, cache_size, opos = _rc_shift_low(low, cache, cache_size, out, opos)
        rng <<= 8
    return low, rng, cache, cache_size, opos


@njit(cache=True)
def _ppm_encode_kernel(bits, counts, max_order, out):
    low = 0
    rng = _RC_MASK
    cache = 0
    cache_size = 1
    opos = 0
    hist = 0
    nhist = 0
    hist_mask = (1 << max_order) - 1
    for i in range(bits.size):
        b = int(bits[i])
        excl = -1
        coded = False
        k = nhist if nhist < max_order else max_order
        while k >= 0:
            base = 2 * ((1 << k) - 1 + (hist & ((1 << k) - 1)))
            c0 = counts[base]
            c1 = counts[base + 1]
            if excl == 0:
                c0 = 0
            elif excl == 1:
                c1 = 0
            distinct = (1 if c0 > 0 else 0) + (1 if c1 > 0 else 0)
            if distinct > 0:
                total = c0 + c1 + distinct
                cb = c1 if b == 1 else c0
                if cb > 0:
                    cum = c0 if b == 1 else 0
                    low, rng, cache, cache_size, opos = _rc_encode(
                        low, rng, cache, cache_size, out, opos, cum, cb, total)
                    coded = True
                    break
                # b is novel here; the single seen symbol is 1-b
                low, rng, cache, cache_size, opos = _rc_encode(
                    low, rng, cache, cache_size, out, opos, c0 + c1, distinct, total)
                excl = 1 - b
            k -= 1
        if not coded and excl < 0:
            low, rng, cache, cache_size, opos = _rc_encode(
                low, rng, cache, cache_size, out, opos, b, 1, 2)
        # when excl >= 0 and nothing coded, the bit is fully determined: no output
        kmax = nhist if nhist < max_order else max_order
        for k2 in range(kmax + 1):
            idx = 2 * ((1 << k2) - 1 + (hist & ((1 << k2) - 1)))
            counts[idx + b] += 1
            if counts[idx + b] >= _COUNT_LIMIT:
                counts[idx] >>= 1
                counts[idx + 1] >>= 1
        hist = ((hist << 1) | b) & hist_mask
        if nhist < max_order:
            nhist += 1
    for _ in range(5):
        low, cache, cache_size, opos = _rc_shift_low(low, cache, cache_size, out, opos)
    return opos


@njit(cache=True)
def _ppm_decode_kernel(data, counts, max_order, out_bits):
    # Returns 0 on success, 1 on a range violation (corrupt stream),
    # 2 on a truncated payload.
    n = out_bits.size
    if n == 0:
        return 0
    if data.size < 5:
        return 2
    pos = 1  # skip the encoder's initial cache byte
    code = 0
    for _ in range(4):
        code = (code << 8) | int(data[pos])
        pos += 1
    rng = _RC_MASK
    hist = 0
    nhist = 0
    hist_mask = (1 << max_order) - 1
    for i in range(n):
        b = -1
        excl = -1
        k = nhist if nhist < max_order else max_order
        while k >= 0:
            base = 2 * ((1 << k) - 1 + (hist & ((1 << k) - 1)))
            c0 = counts[base]
            c1 = counts[base + 1]
            if excl == 0:
                c0 = 0
            elif excl == 1:
                c1 = 0
            distinct = (1 if c0 > 0 else 0) + (1 if c1 > 0 else 0)
            if distinct > 0:
                total = c0 + c1 + distinct
                r = rng // total
                dv = code // r
                if dv >= total:
                    return 1
                if dv < c0:
                    sym = 0
                    cum = 0
                    freq = c0
                elif dv < c0 + c1:
                    sym = 1
                    cum = c0
                    freq = c1
                else:
                    sym = 2
                    cum = c0 + c1
                    freq = distinct
                code -= r * cum
                rng = r * freq
                while rng < _RC_TOP:
                    if pos >= data.size:
                        return 2
                    code = ((code << 8) | int(data[pos])) & _RC_MASK
                    pos += 1
                    rng <<= 8
                if sym != 2:
                    b = sym
                    break
                if distinct == 2:
                    return 1  # encoder never escapes when both symbols are seen
                excl = 0 if c0 > 0 else 1
            k -= 1
        if b < 0:
            if excl < 0:
                r = rng // 2
                dv = code // r
                if dv >= 2:
                    return 1
                b = dv
                code -= r * dv
                rng = r
                while rng < _RC_TOP:
                    if pos >= data.size:
                        return 2
                    code = ((code << 8) | int(data[pos])) & _RC_MASK
                    pos += 1
                    rng <<= 8
            else:
                b = 1 - excl
        out_bits[i] = b
        kmax = nhist if nhist < max_order else max_order
        for k2 in range(kmax + 1):
            idx = 2 * ((1 << k2) - 1 + (hist & ((1 << k2) - 1)))
            counts[idx + b] += 1
            if counts[idx + b] >= _COUNT_LIMIT:
                counts[idx] >>= 1
                counts[idx + 1] >>= 1
        hist = ((hist << 1) | b) & hist_mask
        if nhist < max_order:
            nhist += 1
    return 0


def _as_bit_array(bits) -> np.ndarray:
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        if np.any(arr > 1):
            raise ValidationError("bit-string may contain only '0' and '1'")
        return arr
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or np.any(arr > 1):
        raise ValidationError("bit array must be one-dimensional with 0/1 values")
    return arr


def ppm_encode(bits, model: PpmModel) -> bytes:
    """Compress a bit-string; updates ``model`` in place.

    The decoder must be handed an identically initialized model plus
    the exact bit count (the container stores it).
    """
    arr = _as_bit_array(bits)
    if arr.size == 0:
        return b""
    out = np.empty(arr.size * 20 + 64, dtype=np.uint8)
    n = _ppm_encode_kernel(arr, model.counts, model.max_order, out)
    return bytes(out[:n])


def ppm_decode(payload: bytes, nbits: int, model: PpmModel) -> np.ndarray:
    """Inverse of :func:`ppm_encode`; returns a 0/1 uint8 array of ``nbits``."""
    if nbits < 0:
        raise DecodeError("negative bit count")
    if nbits == 0:
        if payload:
            raise DecodeError("zero-bit payload must be empty")
        return np.zeros(0, dtype=np.uint8)
    data = np.frombuffer(payload, dtype=np.uint8)
    if data.size < 5:
        raise DecodeError("truncated entropy payload")
    out = np.empty(nbits, dtype=np.uint8)
    status = _ppm_decode_kernel(data, model.counts, model.max_order, out)
    if status == 1:
        raise DecodeError("arithmetic-decoder range violation (corrupt payload)")
    if status == 2:
        raise DecodeError("truncated entropy payload")
    return out


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits, dtype=np.uint8))
