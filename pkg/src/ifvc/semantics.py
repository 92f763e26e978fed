"""Semantic parameter types and trace file ingestion.

A frame is described by 14 transmitted scalars: six mouth expression
coefficients, one eye-blink intensity, three Euler angles, three
translations and one depth offset.  The canonical wire order is
mouth, eye, rot, trans, loc; ``flatten``/``unflatten`` convert between
the structured vector and that order.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ParseError, ValidationError

MOUTH_DIM = 6
DIM = 14
EYE_MIN, EYE_MAX = 0.0, 5.0

#: Column names in flattened order; also the CSV header.
COMPONENT_NAMES = (
    "mouth0", "mouth1", "mouth2", "mouth3", "mouth4", "mouth5",
    "eye",
    "rotx", "roty", "rotz",
    "transx", "transy", "transz",
    "loc",
)

COMPONENT_INDEX = {name: i for i, name in enumerate(COMPONENT_NAMES)}


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class SemanticVector:
    """One frame's transmitted facial semantics (total dimension 14).

    Invariants enforced on construction: eye in [0, 5], rotation angles
    in [-pi, pi] radians, every component finite.  trans and loc are
    unconstrained apart from finiteness.
    """

    mouth: tuple[float, ...]
    eye: float
    rot: tuple[float, float, float]
    trans: tuple[float, float, float]
    loc: float

    def __post_init__(self):
        if len(self.mouth) != MOUTH_DIM:
            raise ValidationError(f"mouth needs {MOUTH_DIM} components, got {len(self.mouth)}")
        if len(self.rot) != 3 or len(self.trans) != 3:
            raise ValidationError("rot and trans need 3 components each")
        object.__setattr__(self, "mouth", tuple(_check_finite(f"mouth{i}", v)
                                                for i, v in enumerate(self.mouth)))
        eye = _check_finite("eye", self.eye)
        if not (EYE_MIN <= eye <= EYE_MAX):
            raise ValidationError(f"eye must lie in [{EYE_MIN}, {EYE_MAX}], got {eye}")
        object.__setattr__(self, "eye", eye)
        rot = tuple(_check_finite(n, v) for n, v in zip(("rotx", "roty", "rotz"), self.rot))
        for name, angle in zip(("rotx", "roty", "rotz"), rot):
            if abs(angle) > math.pi:
                raise ValidationError(f"{name} must lie in [-pi, pi], got {angle}")
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "trans", tuple(
            _check_finite(n, v) for n, v in zip(("transx", "transy", "transz"), self.trans)))
        object.__setattr__(self, "loc", _check_finite("loc", self.loc))

    @staticmethod
    def zeros() -> "SemanticVector":
        return SemanticVector((0.0,) * MOUTH_DIM, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0)


def flatten(v: SemanticVector) -> tuple[float, ...]:
    """Return the 14 components in canonical wire order."""
    return v.mouth + (v.eye,) + v.rot + v.trans + (v.loc,)


def unflatten(values: Sequence[float]) -> SemanticVector:
    """Inverse of :func:`flatten`; validates the result."""
    vals = [float(x) for x in values]
    if len(vals) != DIM:
        raise ValidationError(f"expected {DIM} components, got {len(vals)}")
    return SemanticVector(
        mouth=tuple(vals[0:6]),
        eye=vals[6],
        rot=(vals[7], vals[8], vals[9]),
        trans=(vals[10], vals[11], vals[12]),
        loc=vals[13],
    )


@dataclass(frozen=True)
class KeyFrameSemantics:
    """Per-session coefficients taken from the key-reference frame.

    Identity/albedo/illumination/expression vectors are never
    transmitted per frame; their lengths must match whatever face model
    they are eventually used with (checked at synthesis time, since a
    trace can be coded without any model loaded).
    """

    id_coeffs: tuple[float, ...]
    alb_coeffs: tuple[float, ...]
    illum_coeffs: tuple[float, ...]
    exp_coeffs: tuple[float, ...]
    pose: SemanticVector

    def __post_init__(self):
        for name in ("id_coeffs", "alb_coeffs", "illum_coeffs", "exp_coeffs"):
            vals = tuple(_check_finite(f"{name}[{i}]", v)
                         for i, v in enumerate(getattr(self, name)))
            object.__setattr__(self, name, vals)

    @staticmethod
    def neutral(pose: SemanticVector | None = None,
                ranks: tuple[int, int, int, int] = (0, 0, 0, 0)) -> "KeyFrameSemantics":
        """All-zero coefficients; default stand-in when a trace file carries no key block."""
        r_id, r_alb, r_ill, r_exp = ranks
        return KeyFrameSemantics(
            id_coeffs=(0.0,) * r_id,
            alb_coeffs=(0.0,) * r_alb,
            illum_coeffs=(0.0,) * r_ill,
            exp_coeffs=(0.0,) * r_exp,
            pose=pose if pose is not None else SemanticVector.zeros(),
        )


@dataclass(frozen=True)
class SemanticTrace:
    """An ordered semantic parameter sequence plus its key-frame block."""

    fps: float
    frames: tuple[SemanticVector, ...]
    key: KeyFrameSemantics

    def __post_init__(self):
        fps = _check_finite("fps", self.fps)
        if fps <= 0:
            raise ValidationError(f"fps must be positive, got {fps}")
        object.__setattr__(self, "fps", fps)
        if not self.frames:
            raise ValidationError("trace has no frames")
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)


def _detect_format(path: str) -> str:
    ext = os.path.splitext(path)[1].lower()
    if ext == ".csv":
        return "csv"
    if ext == ".json":
        return "json"
    raise ParseError(f"cannot infer trace format from extension {ext!r}; pass format explicitly")


def _frame_from_row(values: Sequence[float], index: int) -> SemanticVector:
    try:
        return unflatten(values)
    except ValidationError as exc:
        raise ValidationError(f"frame {index}: {exc}") from exc


def load_trace(path: str, format: str = "auto", fps: float = 25.0) -> SemanticTrace:
    """Load a semantic trace from a CSV or JSON file.

    CSV files carry frames only; ``fps`` supplies the rate and the key
    block defaults to zero coefficients with the first frame as the key
    pose.  JSON files carry fps and the key block explicitly.
    """
    fmt = _detect_format(path) if format == "auto" else format
    if fmt == "csv":
        return _load_csv(path, fps)
    if fmt == "json":
        return _load_json(path)
    raise ParseError(f"unknown trace format {fmt!r}")


def _load_csv(path: str, fps: float) -> SemanticTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty CSV") from None
        header = [h.strip() for h in header]
        if header != list(COMPONENT_NAMES):
            raise ParseError(f"{path}: bad CSV header {header!r}, "
                             f"expected {','.join(COMPONENT_NAMES)}")
        frames = []
        for i, row in enumerate(reader):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # trailing blank line
            if len(row) != DIM:
                raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {DIM}")
            vals = []
            for name, cell in zip(COMPONENT_NAMES, row):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}: row {i}, field {name!r}: "
                                     f"not a number: {cell!r}") from None
            frames.append(_frame_from_row(vals, i))
    if not frames:
        raise ParseError(f"{path}: CSV contains no frames")
    key = KeyFrameSemantics.neutral(pose=frames[0])
    return SemanticTrace(fps=fps, frames=tuple(frames), key=key)


def _coeffs(obj, name: str) -> tuple[float, ...]:
    raw = obj.get(name, [])
    if not isinstance(raw, list):
        raise ParseError(f"key field {name!r} must be a list")
    return tuple(float(x) for x in raw)


def _load_json(path: str) -> SemanticTrace:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    try:
        fps = float(doc["fps"])
        raw_frames = doc["frames"]
        key_obj = doc.get("key", {})
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: missing required field: {exc}") from exc
    if not isinstance(raw_frames, list) or not raw_frames:
        raise ParseError(f"{path}: 'frames' must be a non-empty list")
    frames = []
    for i, row in enumerate(raw_frames):
        if not isinstance(row, list) or len(row) != DIM:
            raise ParseError(f"{path}: frame {i} must be a list of {DIM} numbers")
        frames.append(_frame_from_row(row, i))
    if "pose" in key_obj:
        pose = _frame_from_row(key_obj["pose"], -1)
    else:
        pose = frames[0]
    key = KeyFrameSemantics(
        id_coeffs=_coeffs(key_obj, "id"),
        alb_coeffs=_coeffs(key_obj, "alb"),
        illum_coeffs=_coeffs(key_obj, "illum"),
        exp_coeffs=_coeffs(key_obj, "exp"),
        pose=pose,
    )
    return SemanticTrace(fps=fps, frames=tuple(frames), key=key)


def export_trace(trace: SemanticTrace, path: str, format: str = "auto") -> None:
    """Write a trace back to disk; inverse of :func:`load_trace`.

    Values are serialized with ``repr`` so a load/export round trip is
    exact for 64-bit floats.
    """
    fmt = _detect_format(path) if format == "auto" else format
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COMPONENT_NAMES)
            for v in trace.frames:
                writer.writerow([repr(x) for x in flatten(v)])
    elif fmt == "json":
        doc = {
            "fps": trace.fps,
            "key": {
                "id": list(trace.key.id_coeffs),
                "alb": list(trace.key.alb_coeffs),
                "illum": list(trace.key.illum_coeffs),
                "exp": list(trace.key.exp_coeffs),
                "pose": list(flatten(trace.key.pose)),
            },
            "frames": [list(flatten(v)) for v in trace.frames],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)
    else:
        raise ParseError(f"unknown trace format {fmt!r}")
