"""Linear 3D face model: shape/texture synthesis, pose, projection, eyes.

Geometry conventions used throughout:

* flat coefficient vectors are vertex-major: entry ``3*i + c`` is
  coordinate ``c`` of vertex ``i``;
* the image vertical axis points down, so the "highest" point of an
  eye region is the one with the minimum row coordinate;
* rotations are intrinsic ``R = Rx(pitch) @ Ry(yaw) @ Rz(roll)`` in
  radians;
* the head-location scalar enters as an additive depth offset on the
  z translation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError

from .errors import (
    DegenerateError,
    DimensionError,
    ParseError,
    RangeError,
    ValidationError,
)
from .semantics import KeyFrameSemantics, SemanticVector

EYE_FULL_OPEN = 0.0
EYE_FULL_CLOSED = 5.0


@dataclass(frozen=True)
class MorphableModel:
    """Mean shape/texture plus linear bases and eye-region index sets."""

    mean_shape: np.ndarray      # (3, N)
    mean_texture: np.ndarray    # (3, N)
    id_basis: np.ndarray        # (3N, r_id)
    exp_basis: np.ndarray       # (3N, r_exp)
    alb_basis: np.ndarray       # (3N, r_alb)
    illum_basis: np.ndarray     # (3N, r_ill)
    triangles: np.ndarray       # (M, 3) int
    eye_left: tuple[int, ...]
    eye_right: tuple[int, ...]

    def __post_init__(self):
        for name in ("mean_shape", "mean_texture"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != 3:
                raise ValidationError(f"{name} must be 3xN, got {arr.shape}")
            object.__setattr__(self, name, arr)
        n = self.mean_shape.shape[1]
        if self.mean_texture.shape[1] != n:
            raise ValidationError("mean_texture vertex count differs from mean_shape")
        for name in ("id_basis", "exp_basis", "alb_basis", "illum_basis"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != 3 * n:
                raise ValidationError(f"{name} must have 3N={3 * n} rows, got {arr.shape}")
            object.__setattr__(self, name, arr)
        tri = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValidationError(f"triangles must be Mx3, got {tri.shape}")
        if tri.size and (tri.min() < 0 or tri.max() >= n):
            raise ValidationError("triangle index out of vertex range")
        object.__setattr__(self, "triangles", tri)
        left = tuple(int(i) for i in self.eye_left)
        right = tuple(int(i) for i in self.eye_right)
        if not left or not right:
            raise ValidationError("eye index sets must be non-empty")
        if set(left) & set(right):
            raise ValidationError("eye index sets must be disjoint")
        for i in left + right:
            if not (0 <= i < n):
                raise ValidationError(f"eye vertex index {i} out of range")
        object.__setattr__(self, "eye_left", left)
        object.__setattr__(self, "eye_right", right)

    @property
    def n_vertices(self) -> int:
        return self.mean_shape.shape[1]

    @property
    def ranks(self) -> tuple[int, int, int, int]:
        """(r_id, r_alb, r_ill, r_exp) — matches KeyFrameSemantics field order."""
        return (self.id_basis.shape[1], self.alb_basis.shape[1],
                self.illum_basis.shape[1], self.exp_basis.shape[1])


def _coeff_column(name: str, coeffs, rank: int) -> np.ndarray:
    vec = np.asarray(coeffs, dtype=np.float64)
    if vec.size == 0:
        # traces ingested without a key block (CSV) carry empty vectors,
        # which read as the neutral coefficients for any model
        return np.zeros(rank)
    if vec.shape != (rank,):
        raise DimensionError(f"{name} has {vec.size} coefficients, model expects {rank}")
    return vec


def synthesize_shape(model: MorphableModel, key: KeyFrameSemantics,
                     frame: SemanticVector | None = None) -> np.ndarray:
    """Synthesize 3D vertex positions (3, N) in model space.

    For inter frames the expression vector is the frame's six mouth
    coefficients zero-padded to the basis rank; for the key frame
    (``frame=None``) it is the key's full expression vector.
    """
    r_exp = model.exp_basis.shape[1]
    did = _coeff_column("id_coeffs", key.id_coeffs, model.id_basis.shape[1])
    if frame is None:
        dexp = _coeff_column("exp_coeffs", key.exp_coeffs, r_exp)
    else:
        if r_exp < 6:
            raise DimensionError(f"expression basis rank {r_exp} cannot hold 6 mouth coefficients")
        dexp = np.zeros(r_exp)
        dexp[:6] = frame.mouth
    flat = (model.mean_shape.T.reshape(-1)
            + model.id_basis @ did
            + model.exp_basis @ dexp)
    return flat.reshape(-1, 3).T


def synthesize_texture(model: MorphableModel, key: KeyFrameSemantics) -> np.ndarray:
    """Per-vertex texture (3, N) from albedo and illumination coefficients."""
    dalb = _coeff_column("alb_coeffs", key.alb_coeffs, model.alb_basis.shape[1])
    dill = _coeff_column("illum_coeffs", key.illum_coeffs, model.illum_basis.shape[1])
    flat = (model.mean_texture.T.reshape(-1)
            + model.alb_basis @ dalb
            + model.illum_basis @ dill)
    return flat.reshape(-1, 3).T


def rotation_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class RigidPose:
    R: np.ndarray  # (3, 3)
    t: np.ndarray  # (3,)

    def __post_init__(self):
        R = np.ascontiguousarray(self.R, dtype=np.float64)
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValidationError("pose needs a 3x3 rotation and 3-vector translation")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-12:
            raise ValidationError("rotation matrix is not orthonormal within 1e-12")
        if abs(np.linalg.det(R) - 1.0) > 1e-12:
            raise ValidationError("rotation matrix determinant is not 1 within 1e-12")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)


def pose_from_semantics(v: SemanticVector) -> RigidPose:
    """Rigid pose from rotation/translation/location coefficients."""
    R = rotation_x(v.rot[0]) @ rotation_y(v.rot[1]) @ rotation_z(v.rot[2])
    t = np.array([v.trans[0], v.trans[1], v.trans[2] + v.loc])
    return RigidPose(R=R, t=t)


@dataclass(frozen=True)
class CameraIntrinsics:
    focal: float
    principal: tuple[float, float]
    width: int
    height: int

    def __post_init__(self):
        if not self.focal > 0:
            raise ValidationError(f"focal length must be positive, got {self.focal}")
        object.__setattr__(self, "principal",
                           (float(self.principal[0]), float(self.principal[1])))


def default_camera(width: int, height: int) -> CameraIntrinsics:
    """Width-scaled pinhole: focal = 1.2*width, principal point at the center."""
    return CameraIntrinsics(focal=1.2 * width, principal=(width / 2.0, height / 2.0),
                            width=width, height=height)


@dataclass(frozen=True)
class Mesh:
    """Camera-space vertices, their pinhole projection, and visibility flags."""

    vertices3d: np.ndarray   # (3, N) camera space
    projected2d: np.ndarray  # (2, N); (0, 0) where invisible
    visible: np.ndarray      # (N,) bool

    @property
    def n_vertices(self) -> int:
        return self.vertices3d.shape[1]


def project(vertices: np.ndarray, pose: RigidPose, cam: CameraIntrinsics) -> Mesh:
    """Apply the rigid transform and pinhole projection to model-space vertices.

    Vertices with non-positive camera-space depth are flagged invisible;
    raises DegenerateError when nothing is visible.
    """
    V = np.asarray(vertices, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != 3:
        raise ValidationError(f"vertices must be 3xN, got {V.shape}")
    cam_v = pose.R @ V + pose.t[:, None]
    z = cam_v[2]
    visible = z > 0
    if not visible.any():
        raise DegenerateError("all vertices have non-positive camera-space depth")
    proj = np.zeros((2, V.shape[1]))
    zs = np.where(visible, z, 1.0)
    proj[0] = np.where(visible, cam.focal * cam_v[0] / zs + cam.principal[0], 0.0)
    proj[1] = np.where(visible, cam.focal * cam_v[1] / zs + cam.principal[1], 0.0)
    return Mesh(vertices3d=cam_v, projected2d=proj, visible=visible)


# ---------------------------------------------------------------------------
# Eye-blink recalibration
# ---------------------------------------------------------------------------

def blink_recalibrated_top(top: float, bottom: float, intensity: float) -> float:
    """New top coordinate of an eye region for a blink intensity in [0, 5].

    With the vertical axis pointing down: intensity 0 keeps the original
    gap (fully open), intensity 5 collapses it to the bottom point
    (fully closed), linear in between.
    """
    if not (EYE_FULL_OPEN <= intensity <= EYE_FULL_CLOSED):
        raise RangeError(f"eye intensity must lie in [0, 5], got {intensity}")
    return bottom - (5.0 - intensity) / 5.0 * abs(bottom - top)


@dataclass(frozen=True)
class EyeRegion:
    """One eye's projected vertex set before/after blink recalibration."""

    indices: tuple[int, ...]
    p_hp: np.ndarray       # original highest point (min row)
    p_lp: np.ndarray       # lowest point (max row)
    p_hp_new: np.ndarray   # recalibrated highest point
    points: np.ndarray     # (2, K) recalibrated vertex positions

    @property
    def gap(self) -> float:
        """Vertical extent after recalibration."""
        return float(self.p_lp[1] - self.p_hp_new[1])


def _recalibrate_region(proj: np.ndarray, indices: tuple[int, ...],
                        intensity: float) -> EyeRegion:
    pts = proj[:, list(indices)].copy()
    ys = pts[1]
    i_hp = int(np.argmin(ys))
    i_lp = int(np.argmax(ys))
    p_hp = pts[:, i_hp].copy()
    p_lp = pts[:, i_lp].copy()
    top_new = blink_recalibrated_top(p_hp[1], p_lp[1], intensity)
    gap0 = p_lp[1] - p_hp[1]
    if gap0 > 0:
        # squeeze every vertex's row linearly into [top_new, bottom]
        scale = (p_lp[1] - top_new) / gap0
        pts[1] = p_lp[1] - (p_lp[1] - ys) * scale
    p_hp_new = np.array([p_hp[0], top_new])
    return EyeRegion(indices=tuple(indices), p_hp=p_hp, p_lp=p_lp,
                     p_hp_new=p_hp_new, points=pts)


def _fill_convex(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Rasterize the convex hull of (2, K) points into a bool mask."""
    mask = np.zeros((height, width), dtype=bool)
    pts = points.T
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return mask  # collapsed region: zero area, nothing to fill
    poly = pts[hull.vertices]  # counter-clockwise
    x0 = max(0, int(np.floor(poly[:, 0].min())))
    x1 = min(width - 1, int(np.ceil(poly[:, 0].max())))
    y0 = max(0, int(np.floor(poly[:, 1].min())))
    y1 = min(height - 1, int(np.ceil(poly[:, 1].max())))
    if x1 < x0 or y1 < y0:
        return mask
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    inside = np.ones(gx.shape, dtype=bool)
    for i in range(len(poly)):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % len(poly)]
        cross = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        inside &= cross >= 0
    mask[y0:y1 + 1, x0:x1 + 1] = inside
    return mask


def recalibrate_eyes(mesh: Mesh, model: MorphableModel, eye_intensity: float,
                     size: tuple[int, int]) -> tuple[EyeRegion, EyeRegion, np.ndarray]:
    """Recalibrate both eye regions for a blink intensity and rasterize them.

    Returns (left, right, eye_map) where eye_map is a bool (h, w) raster
    of the recalibrated eye polygons.
    """
    left = _recalibrate_region(mesh.projected2d, model.eye_left, eye_intensity)
    right = _recalibrate_region(mesh.projected2d, model.eye_right, eye_intensity)
    w, h = size
    emap = _fill_convex(left.points, w, h) | _fill_convex(right.points, w, h)
    return left, right, emap


# ---------------------------------------------------------------------------
# Model file I/O (.mmb): JSON header + raw little-endian blobs
# ---------------------------------------------------------------------------

_MMB_MAGIC = b"MMB1"


def save_model(model: MorphableModel, path: str) -> None:
    n = model.n_vertices
    head = {
        "n": n,
        "r_id": model.id_basis.shape[1],
        "r_exp": model.exp_basis.shape[1],
        "r_alb": model.alb_basis.shape[1],
        "r_ill": model.illum_basis.shape[1],
        "n_tri": int(model.triangles.shape[0]),
        "eye_left": list(model.eye_left),
        "eye_right": list(model.eye_right),
    }
    head_bytes = json.dumps(head, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MMB_MAGIC)
        fh.write(struct.pack("<I", len(head_bytes)))
        fh.write(head_bytes)
        for arr in (model.mean_shape.T.reshape(-1), model.mean_texture.T.reshape(-1),
                    model.id_basis.reshape(-1, order="F"),
                    model.exp_basis.reshape(-1, order="F"),
                    model.alb_basis.reshape(-1, order="F"),
                    model.illum_basis.reshape(-1, order="F")):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.triangles.reshape(-1), dtype="<i4").tobytes())


def load_model(path: str) -> MorphableModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MMB_MAGIC:
        raise ParseError(f"{path}: not an .mmb model file")
    if len(data) < 8:
        raise ParseError(f"{path}: truncated model file")
    (head_len,) = struct.unpack("<I", data[4:8])
    try:
        head = json.loads(data[8:8 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: bad model header: {exc}") from exc
    pos = 8 + head_len
    n = head["n"]

    def take_f64(count):
        nonlocal pos
        nbytes = 8 * count
        if pos + nbytes > len(data):
            raise ParseError(f"{path}: truncated model arrays")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos)
        pos += nbytes
        return arr

    mean_shape = take_f64(3 * n).reshape(n, 3).T
    mean_texture = take_f64(3 * n).reshape(n, 3).T
    id_basis = take_f64(3 * n * head["r_id"]).reshape(3 * n, head["r_id"], order="F")
    exp_basis = take_f64(3 * n * head["r_exp"]).reshape(3 * n, head["r_exp"], order="F")
    alb_basis = take_f64(3 * n * head["r_alb"]).reshape(3 * n, head["r_alb"], order="F")
    illum_basis = take_f64(3 * n * head["r_ill"]).reshape(3 * n, head["r_ill"], order="F")
    tri_count = 3 * head["n_tri"]
    if pos + 4 * tri_count > len(data):
        raise ParseError(f"{path}: truncated triangle data")
    triangles = np.frombuffer(data, dtype="<i4", count=tri_count,
                              offset=pos).reshape(-1, 3)
    return MorphableModel(
        mean_shape=mean_shape, mean_texture=mean_texture,
        id_basis=id_basis, exp_basis=exp_basis,
        alb_basis=alb_basis, illum_basis=illum_basis,
        triangles=triangles,
        eye_left=tuple(head["eye_left"]), eye_right=tuple(head["eye_right"]))


# ---------------------------------------------------------------------------
# Synthetic test model
# ---------------------------------------------------------------------------

def _smooth_field(rng: np.random.Generator, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Random low-order polynomial over the (u, v) parameterization."""
    c = rng.standard_normal(6)
    return c[0] + c[1] * u + c[2] * v + c[3] * u * v + c[4] * u * u + c[5] * v * v


def make_synthetic_model(seed: int = 7, grid: int = 10) -> MorphableModel:
    """Small deterministic face-shaped model (about 100 vertices).

    A full-resolution basis is a user-supplied asset; this one exists so
    the geometry pipeline can be exercised and tested hermetically.
    """
    rng = np.random.default_rng(seed)
    lin = np.linspace(-1.0, 1.0, grid)
    uu, vv = np.meshgrid(lin, lin)
    u = uu.reshape(-1)
    v = vv.reshape(-1)
    # two eye rings; vertical axis points down, so eyes sit at negative v
    ring_angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    for cx in (-0.33, 0.33):
        u = np.concatenate([u, cx + 0.13 * np.cos(ring_angles)])
        v = np.concatenate([v, -0.35 + 0.10 * np.sin(ring_angles)])
    n = u.size
    bulge = 0.35 * (1.0 - 0.5 * (u**2 + v**2))
    verts = np.stack([0.8 * u, v, bulge])
    n_grid = grid * grid
    eye_left = tuple(range(n_grid, n_grid + 8))
    eye_right = tuple(range(n_grid + 8, n_grid + 16))
    triangles = Delaunay(np.stack([u, v], axis=1)).simplices.astype(np.int32)

    r_id, r_exp, r_alb, r_ill = 8, 10, 4, 4
    id_basis = np.empty((3 * n, r_id))
    for j in range(r_id):
        for c in range(3):
            id_basis[c::3, j] = 0.04 * _smooth_field(rng, u, v)
    # mouth sits low on the face; the first six expression columns move it
    mouth_w = np.exp(-((u / 0.45)**2 + ((v - 0.55) / 0.28)**2))
    exp_basis = np.zeros((3 * n, r_exp))
    exp_basis[1::3, 0] = 0.15 * mouth_w                # jaw open
    exp_basis[0::3, 1] = 0.12 * mouth_w * np.sign(u)   # widen
    exp_basis[1::3, 2] = -0.10 * mouth_w               # press
    exp_basis[2::3, 3] = 0.10 * mouth_w                # pout
    exp_basis[0::3, 4] = 0.08 * mouth_w * u
    exp_basis[1::3, 5] = 0.08 * mouth_w * np.abs(u)
    for j in range(6, r_exp):
        for c in range(3):
            exp_basis[c::3, j] = 0.03 * _smooth_field(rng, u, v)
    alb_basis = np.empty((3 * n, r_alb))
    illum_basis = np.empty((3 * n, r_ill))
    for j in range(r_alb):
        for c in range(3):
            alb_basis[c::3, j] = 0.05 * _smooth_field(rng, u, v)
    for j in range(r_ill):
        for c in range(3):
            illum_basis[c::3, j] = 0.05 * _smooth_field(rng, u, v)
    skin = np.array([0.80, 0.62, 0.55])
    mean_texture = skin[:, None] + 0.05 * np.stack([v, u, -v])
    return MorphableModel(
        mean_shape=verts, mean_texture=mean_texture,
        id_basis=id_basis, exp_basis=exp_basis,
        alb_basis=alb_basis, illum_basis=illum_basis,
        triangles=triangles, eye_left=eye_left, eye_right=eye_right)


def neutral_key_for(model: MorphableModel,
                    pose: SemanticVector | None = None) -> KeyFrameSemantics:
    """Zero-coefficient key block with ranks matching ``model``."""
    if pose is None:
        pose = SemanticVector((0.0,) * 6, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 3.0), 0.0)
    return KeyFrameSemantics.neutral(pose=pose, ranks=model.ranks)


def mesh_for_frame(model: MorphableModel, key: KeyFrameSemantics,
                   frame: SemanticVector | None, cam: CameraIntrinsics) -> Mesh:
    """Synthesize, pose and project one frame (or the key frame if None)."""
    shape = synthesize_shape(model, key, frame)
    pose = pose_from_semantics(frame if frame is not None else key.pose)
    return project(shape, pose, cam)
