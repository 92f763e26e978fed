"""Coarse mesh-based motion fields and deterministic warped previews.

The dense field is a piecewise-linear interpolation (Delaunay over the
anchor points) of per-vertex displacements between two projected
meshes, anchored at the inter frame's vertices so that back-warping
the key image with it is well posed.  Pixels outside the anchors'
convex hull keep displacement (0, 0) and are marked in the fill mask:
background motion is out of scope here.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import QhullError

from .errors import DegenerateError, DimensionError, ValidationError
from .facemodel import Mesh

WIREFRAME_EDGE_COLOR = (70, 220, 120)
WIREFRAME_EYE_COLOR = (230, 70, 70)


@dataclass(frozen=True)
class FlowField:
    """Dense displacement grid: flow[y, x] = (dx, dy) pixels."""

    flow: np.ndarray       # (h, w, 2) float64
    fill_mask: np.ndarray  # (h, w) bool, True outside the anchor hull

    def __post_init__(self):
        flow = np.ascontiguousarray(self.flow, dtype=np.float64)
        mask = np.ascontiguousarray(self.fill_mask, dtype=bool)
        if flow.ndim != 3 or flow.shape[2] != 2:
            raise ValidationError(f"flow must be (h, w, 2), got {flow.shape}")
        if mask.shape != flow.shape[:2]:
            raise ValidationError("fill mask shape differs from flow grid")
        if not np.all(np.isfinite(flow)):
            raise ValidationError("flow contains non-finite values")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "fill_mask", mask)

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.flow.shape[:2]
        return (w, h)


@dataclass(frozen=True)
class PreviewFrame:
    """8-bit RGB raster."""

    pixels: np.ndarray  # (h, w, 3) uint8

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValidationError(f"preview must be (h, w, 3) uint8, got "
                                  f"{px.shape} {px.dtype}")
        object.__setattr__(self, "pixels", px)

    @property
    def size(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return (w, h)

    def to_png(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, "RGB").save(buf, format="PNG")
        return buf.getvalue()

    @staticmethod
    def from_png(data: bytes) -> "PreviewFrame":
        img = Image.open(io.BytesIO(data)).convert("RGB")
        return PreviewFrame(np.asarray(img, dtype=np.uint8))


def coarse_flow(mesh_key: Mesh, mesh_inter: Mesh, size: tuple[int, int]) -> FlowField:
    """Dense backward flow from the inter frame toward the key frame.

    Anchors are the inter mesh's projected vertices; each carries the
    displacement key_projection - inter_projection.  Only vertices
    visible in both meshes anchor the field.
    """
    if mesh_key.n_vertices != mesh_inter.n_vertices:
        raise DimensionError("meshes come from different models (vertex counts differ)")
    w, h = size
    usable = mesh_key.visible & mesh_inter.visible
    anchors = mesh_inter.projected2d[:, usable].T
    disp = (mesh_key.projected2d[:, usable] - mesh_inter.projected2d[:, usable]).T
    if anchors.shape[0] < 3:
        raise DegenerateError("need at least 3 anchor vertices for interpolation")
    try:
        interp = LinearNDInterpolator(anchors, disp)
    except QhullError as exc:
        raise DegenerateError(f"anchor points admit no triangulation: {exc}") from exc
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    values = interp(np.stack([gx.reshape(-1), gy.reshape(-1)], axis=1))
    values = values.reshape(h, w, 2)
    mask = ~np.isfinite(values[:, :, 0])
    values[mask] = 0.0
    return FlowField(flow=values, fill_mask=mask)


def warp_frame(key_image: PreviewFrame, flow: FlowField) -> PreviewFrame:
    """Backward-warp: out(p) = bilinear sample of the key image at p + flow(p).

    Sample positions outside the image clamp to the border.  A zero
    flow reproduces the input byte-exactly.
    """
    if key_image.size != flow.size:
        raise DimensionError(f"image size {key_image.size} != flow size {flow.size}")
    img = key_image.pixels.astype(np.float64)
    h, w = img.shape[:2]
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    sx = np.clip(gx + flow.flow[:, :, 0], 0.0, w - 1.0)
    sy = np.clip(gy + flow.flow[:, :, 1], 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[:, :, None]
    fy = (sy - y0)[:, :, None]
    out = ((1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x1])
           + fy * ((1 - fx) * img[y1, x0] + fx * img[y1, x1]))
    return PreviewFrame(np.rint(out).astype(np.uint8))


def _draw_line(canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int,
               color: tuple[int, int, int]) -> None:
    """Integer Bresenham; pixels outside the canvas are skipped."""
    h, w = canvas.shape[:2]
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        if 0 <= x0 < w and 0 <= y0 < h:
            canvas[y0, x0] = color
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def render_wireframe(mesh: Mesh, eye_map: np.ndarray | None,
                     size: tuple[int, int],
                     triangles: np.ndarray | None = None) -> PreviewFrame:
    """Rasterize triangle edges plus the recalibrated eye map.

    Edges are drawn with Bresenham between rounded projected vertices;
    only edges with both endpoints visible are drawn.  Deterministic
    for identical inputs.
    """
    w, h = size
    canvas = np.zeros((h, w, 3), dtype=np.uint8)
    if eye_map is not None:
        canvas[np.asarray(eye_map, dtype=bool)] = WIREFRAME_EYE_COLOR
    if triangles is not None and mesh.visible.any():
        pts = np.rint(mesh.projected2d).astype(np.int64)
        edges = set()
        for a, b, c in np.asarray(triangles, dtype=np.int64):
            for i, j in ((a, b), (b, c), (c, a)):
                if mesh.visible[i] and mesh.visible[j]:
                    edges.add((min(i, j), max(i, j)))
        for i, j in sorted(edges):
            _draw_line(canvas, pts[0, i], pts[1, i], pts[0, j], pts[1, j],
                       WIREFRAME_EDGE_COLOR)
    return PreviewFrame(canvas)


def make_synthetic_portrait(width: int = 128, height: int = 128,
                            seed: int = 0) -> PreviewFrame:
    """Deterministic face-like test image: head, eyes, mouth on a gradient."""
    rng = np.random.default_rng(seed)
    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    u = (gx - width / 2) / (width / 2)
    v = (gy - height / 2) / (height / 2)
    img = np.zeros((height, width, 3))
    img[:, :, 0] = 60 + 40 * v
    img[:, :, 1] = 70 + 30 * u
    img[:, :, 2] = 110 - 30 * v
    head = (u / 0.62)**2 + (v / 0.80)**2 <= 1.0
    for c, val in enumerate((205, 165, 140)):
        img[:, :, c] = np.where(head, val + 12 * v * val / 205, img[:, :, c])
    for ex in (-0.26, 0.26):
        eye = ((u - ex) / 0.12)**2 + ((v + 0.28) / 0.07)**2 <= 1.0
        iris = ((u - ex) / 0.05)**2 + ((v + 0.28) / 0.05)**2 <= 1.0
        img[eye] = (245, 245, 245)
        img[iris] = (60, 45, 35)
    mouth = (u / 0.22)**2 + ((v - 0.42) / 0.06)**2 <= 1.0
    img[mouth] = (150, 60, 60)
    img += rng.normal(0.0, 1.5, img.shape)  # mild texture so warps are visible
    return PreviewFrame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# Flow file dumps (.flo layout: magic, w, h, row-major float32 pairs)
# ---------------------------------------------------------------------------

_FLO_MAGIC = b"PIEH"


def write_flo(flow: FlowField, path: str) -> None:
    w, h = flow.size
    with open(path, "wb") as fh:
        fh.write(_FLO_MAGIC)
        fh.write(struct.pack("<ii", w, h))
        fh.write(flow.flow.astype("<f4").tobytes())


def read_flo(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _FLO_MAGIC:
        raise ValidationError(f"{path}: not a flow dump")
    w, h = struct.unpack("<ii", data[4:12])
    return np.frombuffer(data, dtype="<f4", count=w * h * 2,
                         offset=12).reshape(h, w, 2).astype(np.float64)
