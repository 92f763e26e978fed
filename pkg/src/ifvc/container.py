"""Closed-loop predictive semantic coder and the .ifvc binary container.

The first frame is predicted from the key frame's own semantics, every
later frame from the *reconstructed* previous frame, never the
original, so the encoder mirrors the decoder exactly and the
reconstruction error stays bounded by step/2 per component with no
growth over time.

Container layout (all integers little-endian):

    magic   4s   b"IFVC"
    version u16
    fps     u16  fixed point 8.8
    frames  u32
    width   u16
    height  u16
    steps   14 x f64
    model_id     u16 length + UTF-8 bytes
    key_tag 4s   fourCC of the key payload codec (default b"LSLS":
                 a lossless image file embedded verbatim)
    key_payload  u32 length + bytes (opaque)
    key_semantics: id/alb/illum/exp vectors (u16 count + f64 each),
                   then the key pose as 14 x f64
    per frame:   u32 eg0 bit count, u32 payload byte count, payload
    crc32   u32  of every preceding byte

The trailing CRC makes any single-byte corruption detectable instead
of surfacing as garbage semantics.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .entropy import (
    DIM,
    INT31_MAX,
    PpmModel,
    QuantConfig,
    eg0_decode_array,
    eg0_encode_array,
    ppm_decode,
    ppm_encode,
    quantize,
    unzigzag_array,
    zigzag_array,
)
from .errors import ContainerError, DecodeError, ValidationError
from .semantics import KeyFrameSemantics, SemanticTrace, SemanticVector, flatten, unflatten

MAGIC = b"IFVC"
VERSION = 1
KEY_TAG_LOSSLESS = b"LSLS"

_EYE_IDX = 6
_ROT_SLICE = slice(7, 10)


@dataclass(frozen=True)
class StreamHeader:
    fps: float
    frame_count: int
    width: int
    height: int
    quant: QuantConfig
    model_id: str

    def __post_init__(self):
        if self.frame_count <= 0:
            raise ContainerError(f"frame_count must be positive, got {self.frame_count}")
        fixed = _fps_to_fixed(self.fps)
        object.__setattr__(self, "fps", fixed / 256.0)
        for name in ("width", "height"):
            v = getattr(self, name)
            if not (0 < v <= 0xFFFF):
                raise ContainerError(f"{name} out of u16 range: {v}")


@dataclass(frozen=True)
class CodedStream:
    header: StreamHeader
    key_tag: bytes
    key_payload: bytes
    key_semantics: KeyFrameSemantics
    frame_payloads: tuple[tuple[int, bytes], ...]

    def __post_init__(self):
        if len(self.key_tag) != 4:
            raise ContainerError("key_tag must be exactly 4 bytes")
        if not self.key_payload:
            raise ContainerError("key payload must be non-empty")
        if len(self.frame_payloads) != self.header.frame_count:
            raise ContainerError(
                f"header says {self.header.frame_count} frames but "
                f"{len(self.frame_payloads)} payloads present")
        object.__setattr__(self, "frame_payloads", tuple(
            (int(n), bytes(p)) for n, p in self.frame_payloads))


def _fps_to_fixed(fps: float) -> int:
    if not (math.isfinite(fps) and fps > 0):
        raise ContainerError(f"fps must be positive and finite, got {fps}")
    fixed = int(round(fps * 256))
    if not (1 <= fixed <= 0xFFFF):
        raise ContainerError(f"fps {fps} not representable as u16 8.8 fixed point")
    return fixed


def _clamp_reconstruction(flat: np.ndarray) -> np.ndarray:
    # Quantization can overshoot a range bound by up to step/2; clamping
    # (identically on both sides) keeps vectors valid and never increases
    # the error against an in-range original.
    flat[_EYE_IDX] = min(5.0, max(0.0, flat[_EYE_IDX]))
    np.clip(flat[_ROT_SLICE], -math.pi, math.pi, out=flat[_ROT_SLICE])
    return flat


@dataclass
class CoderState:
    """Prediction state advanced identically by encoder and decoder.

    Holds the previous frame's reconstructed semantics (the predictor)
    and the persistent entropy-model statistics; after both sides have
    processed the same frame prefix these are bit-identical.
    """

    reconstructed_prev: np.ndarray
    ppm: PpmModel

    @staticmethod
    def fresh(key: KeyFrameSemantics) -> "CoderState":
        return CoderState(
            reconstructed_prev=np.asarray(flatten(key.pose), dtype=np.float64),
            ppm=PpmModel())

    def advance(self, symbols: np.ndarray, steps: np.ndarray) -> np.ndarray:
        """Apply one frame's dequantized residual; returns the reconstruction."""
        recon = _clamp_reconstruction(self.reconstructed_prev + symbols * steps)
        self.reconstructed_prev = recon
        return recon

    def state_equals(self, other: "CoderState") -> bool:
        return (np.array_equal(self.reconstructed_prev, other.reconstructed_prev)
                and self.ppm.state_equals(other.ppm))


def encode_stream(trace: SemanticTrace, key_payload: bytes,
                  cfg: QuantConfig = QuantConfig(), *,
                  width: int = 256, height: int = 256,
                  key_tag: bytes = KEY_TAG_LOSSLESS,
                  model_id: str = "synthetic-v1") -> CodedStream:
    """Encode a semantic trace against an opaque key-frame payload."""
    stream, _ = encode_stream_with_recon(
        trace, key_payload, cfg, width=width, height=height,
        key_tag=key_tag, model_id=model_id)
    return stream


def encode_stream_with_recon(trace: SemanticTrace, key_payload: bytes,
                             cfg: QuantConfig = QuantConfig(), *,
                             width: int = 256, height: int = 256,
                             key_tag: bytes = KEY_TAG_LOSSLESS,
                             model_id: str = "synthetic-v1",
                             ) -> tuple[CodedStream, SemanticTrace]:
    """Encode and also return the encoder-side reconstructed trace.

    The reconstruction is what the decoder will produce, bit for bit;
    tests use it to assert drift-freedom.
    """
    if not key_payload:
        raise ContainerError("key payload must be non-empty")
    header = StreamHeader(fps=trace.fps, frame_count=len(trace.frames),
                          width=width, height=height, quant=cfg, model_id=model_id)
    steps = cfg.as_array()
    state = CoderState.fresh(trace.key)
    payloads = []
    recon_frames = []
    for v in trace.frames:
        target = np.asarray(flatten(v), dtype=np.float64)
        block = quantize(target - state.reconstructed_prev, cfg)
        syms = np.asarray(block.symbols, dtype=np.int64)
        bits = eg0_encode_array(zigzag_array(syms))
        payloads.append((bits.size, ppm_encode(bits, state.ppm)))
        recon_frames.append(unflatten(state.advance(syms, steps)))
    stream = CodedStream(header=header, key_tag=bytes(key_tag),
                         key_payload=bytes(key_payload),
                         key_semantics=trace.key,
                         frame_payloads=tuple(payloads))
    recon_trace = SemanticTrace(fps=header.fps, frames=tuple(recon_frames), key=trace.key)
    return stream, recon_trace


def decode_stream(stream: CodedStream) -> SemanticTrace:
    """Reconstruct the semantic trace carried by a coded stream."""
    steps = stream.header.quant.as_array()
    state = CoderState.fresh(stream.key_semantics)
    frames = []
    for index, (nbits, payload) in enumerate(stream.frame_payloads):
        try:
            bits = ppm_decode(payload, nbits, state.ppm)
            syms, consumed = eg0_decode_array(bits, DIM)
        except DecodeError as exc:
            raise DecodeError(f"frame {index}: {exc}") from exc
        if consumed != bits.size:
            raise DecodeError(f"frame {index}: {bits.size - consumed} trailing bits in payload")
        syms = unzigzag_array(syms)
        if np.any(np.abs(syms) > INT31_MAX):
            raise DecodeError(f"frame {index}: decoded symbol out of 31-bit range")
        try:
            frames.append(unflatten(state.advance(syms, steps)))
        except ValidationError as exc:
            raise DecodeError(f"frame {index}: reconstructed semantics invalid: {exc}") from exc
    return SemanticTrace(fps=stream.header.fps, frames=tuple(frames),
                         key=stream.key_semantics)


@dataclass(frozen=True)
class StreamReport:
    """Bitrate summary produced by :func:`inspect_stream`."""

    fps: float
    frame_count: int
    width: int
    height: int
    model_id: str
    steps: tuple[float, ...]
    key_tag: str
    key_payload_bytes: int
    payload_bytes: int
    frame_payload_bits: tuple[int, ...]
    frame_code_bits: tuple[int, ...]

    @property
    def kbps(self) -> float:
        """Semantic-payload rate; the key payload is reported separately."""
        return 8.0 * self.payload_bytes * self.fps / self.frame_count / 1000.0

    def to_text(self) -> str:
        lines = [
            f"fps           {self.fps:g}",
            f"frames        {self.frame_count}",
            f"size          {self.width}x{self.height}",
            f"model_id      {self.model_id}",
            f"steps         {' '.join(f'{s:g}' for s in self.steps)}",
            f"key payload   {self.key_payload_bytes} bytes ({self.key_tag})",
            f"semantic payload {self.payload_bytes} bytes",
            f"bitrate       {self.kbps:.3f} kbps (excl. key payload)",
            "frame  code_bits  payload_bits",
        ]
        for i, (cb, pb) in enumerate(zip(self.frame_code_bits, self.frame_payload_bits)):
            lines.append(f"{i:5d}  {cb:9d}  {pb:12d}")
        return "\n".join(lines)


def inspect_stream(stream: CodedStream) -> StreamReport:
    h = stream.header
    payload_bytes = sum(len(p) for _, p in stream.frame_payloads)
    return StreamReport(
        fps=h.fps, frame_count=h.frame_count, width=h.width, height=h.height,
        model_id=h.model_id, steps=h.quant.steps,
        key_tag=stream.key_tag.decode("ascii", errors="replace"),
        key_payload_bytes=len(stream.key_payload),
        payload_bytes=payload_bytes,
        frame_payload_bits=tuple(8 * len(p) for _, p in stream.frame_payloads),
        frame_code_bits=tuple(n for n, _ in stream.frame_payloads),
    )


# ---------------------------------------------------------------------------
# Wire format
# ---------------------------------------------------------------------------

def serialize(stream: CodedStream) -> bytes:
    h = stream.header
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HHIHH", VERSION, _fps_to_fixed(h.fps),
                       h.frame_count, h.width, h.height)
    buf += struct.pack("<14d", *h.quant.steps)
    mid = h.model_id.encode("utf-8")
    if len(mid) > 0xFFFF:
        raise ContainerError("model_id too long")
    buf += struct.pack("<H", len(mid)) + mid
    buf += stream.key_tag
    buf += struct.pack("<I", len(stream.key_payload)) + stream.key_payload
    ks = stream.key_semantics
    for vec in (ks.id_coeffs, ks.alb_coeffs, ks.illum_coeffs, ks.exp_coeffs):
        if len(vec) > 0xFFFF:
            raise ContainerError("coefficient vector too long")
        buf += struct.pack("<H", len(vec)) + struct.pack(f"<{len(vec)}d", *vec)
    buf += struct.pack("<14d", *flatten(ks.pose))
    for nbits, payload in stream.frame_payloads:
        buf += struct.pack("<II", nbits, len(payload)) + payload
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    return bytes(buf)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerError(
                f"truncated container: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse(data: bytes) -> CodedStream:
    """Parse container bytes; raises ContainerError on any corruption."""
    if len(data) < 12:
        raise ContainerError("file too short to be an .ifvc container")
    if data[:4] != MAGIC:
        raise ContainerError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise ContainerError(
            f"checksum mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    r = _Reader(data[:-4])
    r.take(4)  # magic
    version, fps_fixed, frame_count, width, height = r.unpack("<HHIHH")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    if fps_fixed == 0:
        raise ContainerError("fps field is zero")
    steps = r.unpack("<14d")
    try:
        quant = QuantConfig(steps)
    except ValidationError as exc:
        raise ContainerError(f"invalid quantization steps: {exc}") from exc
    (mid_len,) = r.unpack("<H")
    try:
        model_id = r.take(mid_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ContainerError(f"model_id is not valid UTF-8: {exc}") from exc
    key_tag = r.take(4)
    (key_len,) = r.unpack("<I")
    key_payload = r.take(key_len)
    vecs = []
    for _ in range(4):
        (count,) = r.unpack("<H")
        vecs.append(r.unpack(f"<{count}d"))
    pose_vals = r.unpack("<14d")
    try:
        pose = unflatten(pose_vals)
        key_semantics = KeyFrameSemantics(
            id_coeffs=vecs[0], alb_coeffs=vecs[1], illum_coeffs=vecs[2],
            exp_coeffs=vecs[3], pose=pose)
        header = StreamHeader(fps=fps_fixed / 256.0, frame_count=frame_count,
                              width=width, height=height, quant=quant,
                              model_id=model_id)
    except (ValidationError, ContainerError) as exc:
        raise ContainerError(f"invalid stream metadata: {exc}") from exc
    payloads = []
    for i in range(frame_count):
        nbits, byte_len = r.unpack("<II")
        payloads.append((nbits, r.take(byte_len)))
    if r.pos != len(r.data):
        raise ContainerError(f"{len(r.data) - r.pos} trailing bytes after last payload")
    try:
        return CodedStream(header=header, key_tag=key_tag, key_payload=key_payload,
                           key_semantics=key_semantics, frame_payloads=tuple(payloads))
    except ContainerError:
        raise
    except ValidationError as exc:
        raise ContainerError(f"invalid stream contents: {exc}") from exc


def save_stream(stream: CodedStream, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(stream))


def load_stream(path: str) -> CodedStream:
    with open(path, "rb") as fh:
        return parse(fh.read())
