"""Interactive decoding sessions: edit logs, virtual characters, export.

Edits are kept as an ordered log and replayed over the freshly decoded
trace on every read; the decoded data itself is never mutated, so
removing a log entry is a perfect undo and an identical log always
reproduces identical semantics.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .container import (
    CodedStream,
    KEY_TAG_LOSSLESS,
    decode_stream,
    encode_stream,
    load_stream,
    save_stream,
)
from .errors import DimensionError, RangeError, ValidationError
from .facemodel import (
    CameraIntrinsics,
    EyeRegion,
    Mesh,
    MorphableModel,
    default_camera,
    mesh_for_frame,
    recalibrate_eyes,
)
from .motion import FlowField, PreviewFrame, coarse_flow, warp_frame
from .semantics import (
    COMPONENT_INDEX,
    COMPONENT_NAMES,
    KeyFrameSemantics,
    SemanticTrace,
    flatten,
    unflatten,
)

#: Editable component names, as accepted by EditOp.target.  ``rot_1`` style
#: aliases map onto the canonical flatten-order names.
_TARGET_ALIASES = {
    **{f"mouth_{i}": f"mouth{i}" for i in range(6)},
    **{f"rot_{i}": "rot" + "xyz"[i] for i in range(3)},
    **{f"trans_{i}": "trans" + "xyz"[i] for i in range(3)},
}

EDIT_MODES = ("set", "offset", "scale")

_EYE_IDX = COMPONENT_INDEX["eye"]
_ROT_IDX = tuple(COMPONENT_INDEX[n] for n in ("rotx", "roty", "rotz"))


@dataclass(frozen=True)
class EditOp:
    """One semantic edit: set/offset/scale a component over a frame range.

    ``frames`` is an inclusive (first, last) pair, or None for every
    frame.
    """

    target: str
    mode: str
    value: float
    frames: tuple[int, int] | None = None

    def __post_init__(self):
        target = _TARGET_ALIASES.get(self.target, self.target)
        if target not in COMPONENT_INDEX:
            raise ValidationError(
                f"unknown edit target {self.target!r}; expected one of "
                f"{', '.join(COMPONENT_NAMES)}")
        object.__setattr__(self, "target", target)
        if self.mode not in EDIT_MODES:
            raise ValidationError(f"unknown edit mode {self.mode!r}")
        value = float(self.value)
        if not math.isfinite(value):
            raise ValidationError(f"edit value must be finite, got {value}")
        object.__setattr__(self, "value", value)
        if self.frames is not None:
            a, b = int(self.frames[0]), int(self.frames[1])
            if a > b:
                raise RangeError(f"frame range {a}..{b} is reversed")
            object.__setattr__(self, "frames", (a, b))

    @property
    def component(self) -> int:
        return COMPONENT_INDEX[self.target]

    def check_range(self, frame_count: int) -> None:
        if self.frames is None:
            return
        a, b = self.frames
        if a < 0 or b >= frame_count:
            raise RangeError(
                f"frame range {a}..{b} outside stream of {frame_count} frames")

    def to_dict(self) -> dict:
        return {"target": self.target, "mode": self.mode, "value": self.value,
                "frames": list(self.frames) if self.frames is not None else None}

    @staticmethod
    def from_dict(obj: dict) -> "EditOp":
        frames = obj.get("frames")
        return EditOp(target=obj["target"], mode=obj["mode"], value=obj["value"],
                      frames=tuple(frames) if frames is not None else None)


def _apply_ops(matrix: np.ndarray, edits: list[EditOp]) -> np.ndarray:
    """Replay an edit log over a (frames, 14) semantics matrix."""
    out = matrix.copy()
    n = out.shape[0]
    for op in edits:
        a, b = op.frames if op.frames is not None else (0, n - 1)
        col = op.component
        if op.mode == "set":
            out[a:b + 1, col] = op.value
        elif op.mode == "offset":
            out[a:b + 1, col] += op.value
        else:
            out[a:b + 1, col] *= op.value
    # edits must leave valid semantics behind: clamp the bounded components
    out[:, _EYE_IDX] = np.clip(out[:, _EYE_IDX], 0.0, 5.0)
    for idx in _ROT_IDX:
        out[:, idx] = np.clip(out[:, idx], -math.pi, math.pi)
    return out


class Session:
    """One open stream plus its edit log and active key image.

    Reads are pure functions of (stream bytes, edit log, request);
    mutations are serialized by an internal lock.
    """

    def __init__(self, stream: CodedStream, model: MorphableModel | None = None):
        self.stream = stream
        self.decoded: SemanticTrace = decode_stream(stream)
        self.edits: list[EditOp] = []
        self.model = model
        self.lock = threading.Lock()
        self._base = np.array([flatten(v) for v in self.decoded.frames])
        self._current: np.ndarray | None = None
        # active key image defaults to the embedded key payload
        self._key_image: PreviewFrame | None = None
        self._key_semantics: KeyFrameSemantics = stream.key_semantics
        self._key_payload: bytes = stream.key_payload
        self._substituted = False

    # -- key image ---------------------------------------------------------

    @property
    def substituted(self) -> bool:
        return self._substituted

    @property
    def active_key_semantics(self) -> KeyFrameSemantics:
        return self._key_semantics

    def key_image(self) -> PreviewFrame:
        if self._key_image is None:
            if self.stream.key_tag != KEY_TAG_LOSSLESS:
                raise DimensionError(
                    f"key payload codec {self.stream.key_tag!r} is not the embedded "
                    f"lossless image format; supply a decoded image via substitute_key")
            img = PreviewFrame.from_png(self._key_payload)
            self._check_size(img)
            self._key_image = img
        return self._key_image

    def _check_size(self, img: PreviewFrame) -> None:
        expect = (self.stream.header.width, self.stream.header.height)
        if img.size != expect:
            raise DimensionError(f"key image size {img.size} != stream size {expect}")

    def substitute_key(self, image: PreviewFrame,
                       key_semantics: KeyFrameSemantics | None = None) -> None:
        """Make a virtual character the active key reference.

        The semantic stream is untouched; subsequent previews warp the
        substituted image, using the substituted identity coefficients
        (when given) with the original per-frame motion semantics.
        """
        self._check_size(image)
        with self.lock:
            self._key_image = image
            self._key_payload = image.to_png()
            if key_semantics is not None:
                self._key_semantics = key_semantics
            self._substituted = True

    # -- edits ---------------------------------------------------------------

    @property
    def frame_count(self) -> int:
        return len(self.decoded.frames)

    def apply_edit(self, op: EditOp) -> int:
        """Append an edit to the log; returns its log index."""
        op.check_range(self.frame_count)
        with self.lock:
            self.edits.append(op)
            self._current = None
        return len(self.edits) - 1

    def remove_edit(self, index: int) -> EditOp:
        with self.lock:
            if not (0 <= index < len(self.edits)):
                raise RangeError(f"no edit at index {index}")
            op = self.edits.pop(index)
            self._current = None
        return op

    def current_matrix(self) -> np.ndarray:
        """Edited semantics as a (frames, 14) matrix (replayed, cached)."""
        if self._current is None:
            self._current = _apply_ops(self._base, list(self.edits))
        return self._current

    def frame_semantics(self, index: int):
        if not (0 <= index < self.frame_count):
            raise RangeError(f"frame {index} outside stream of {self.frame_count} frames")
        return unflatten(self.current_matrix()[index])

    def current_trace(self) -> SemanticTrace:
        frames = tuple(unflatten(row) for row in self.current_matrix())
        return SemanticTrace(fps=self.decoded.fps, frames=frames, key=self.decoded.key)

    # -- geometry / previews -------------------------------------------------

    def _require_model(self) -> MorphableModel:
        if self.model is None:
            raise ValidationError("no face model attached to this session")
        return self.model

    def camera(self) -> CameraIntrinsics:
        return default_camera(self.stream.header.width, self.stream.header.height)

    def frame_mesh(self, index: int) -> tuple[Mesh, EyeRegion, EyeRegion, np.ndarray]:
        """Projected mesh plus recalibrated eye regions for one frame."""
        model = self._require_model()
        frame = self.frame_semantics(index)
        cam = self.camera()
        mesh = mesh_for_frame(model, self._key_semantics, frame, cam)
        size = (self.stream.header.width, self.stream.header.height)
        left, right, emap = recalibrate_eyes(mesh, model, frame.eye, size)
        return mesh, left, right, emap

    def key_mesh(self) -> Mesh:
        model = self._require_model()
        return mesh_for_frame(model, self._key_semantics, None, self.camera())

    def frame_flow(self, index: int) -> FlowField:
        mesh, _, _, _ = self.frame_mesh(index)
        size = (self.stream.header.width, self.stream.header.height)
        return coarse_flow(self.key_mesh(), mesh, size)

    def preview(self, index: int) -> PreviewFrame:
        """Deterministic warped preview of one frame from the active key image."""
        return warp_frame(self.key_image(), self.frame_flow(index))

    # -- export ----------------------------------------------------------------

    def export_stream(self) -> CodedStream:
        """Re-encode the edited semantics with the original config.

        Uses the active key payload (the substituted image if one was
        provided).  The session itself is not modified.
        """
        trace = self.current_trace()
        h = self.stream.header
        tag = KEY_TAG_LOSSLESS if self._substituted else self.stream.key_tag
        return encode_stream(trace, self._key_payload, h.quant,
                             width=h.width, height=h.height,
                             key_tag=tag, model_id=h.model_id)

    def export(self, path: str) -> None:
        save_stream(self.export_stream(), path)


def open_session(path: str, model: MorphableModel | None = None) -> Session:
    """Open an .ifvc file: parse, decode once, empty edit log."""
    return Session(load_stream(path), model=model)
