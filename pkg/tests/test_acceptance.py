"""Acceptance suite: one test per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion with the measured numbers.
"""

import math
import os
import time

import numpy as np
import pytest

from ifvc import (
    CameraIntrinsics,
    CodecError,
    EditOp,
    FlowField,
    Mesh,
    PpmModel,
    QuantConfig,
    RigidPose,
    SemanticTrace,
    SemanticVector,
    Session,
    blink_recalibrated_top,
    coarse_flow,
    decode_stream,
    encode_stream,
    encode_stream_with_recon,
    eg0_encode,
    flatten,
    inspect_stream,
    load_stream,
    make_synthetic_portrait,
    parse,
    pose_from_semantics,
    ppm_decode,
    ppm_encode,
    project,
    warp_frame,
)
from ifvc.entropy import eg0_decode_array, eg0_encode_array, unzigzag_array, zigzag_array

from conftest import random_trace


def test_lossless_entropy_pipeline():
    """1,000 random symbol-block sequences (<=500 frames): bit-exact, < 60 s."""
    rng = np.random.default_rng(2024)
    start = time.monotonic()
    for i in range(1000):
        n_frames = int(rng.integers(1, 501))
        n_syms = n_frames * 14
        # residual-like mixture: mostly near zero, tails out to large values
        small = rng.geometric(0.35, n_syms) - 1
        signs = rng.choice((-1, 1), n_syms)
        syms = small * signs
        big_at = rng.random(n_syms) < 0.01
        syms[big_at] = rng.integers(-2**20, 2**20, int(big_at.sum()))
        if i % 100 == 0:
            syms[0] = 2**31 - 1  # magnitude limit must survive the pipeline
            syms[1] = -(2**31 - 1)
        bits = eg0_encode_array(zigzag_array(syms))
        payload = ppm_encode(bits, PpmModel())
        out_bits = ppm_decode(payload, bits.size, PpmModel())
        decoded, used = eg0_decode_array(out_bits, n_syms)
        assert used == out_bits.size
        assert np.array_equal(unzigzag_array(decoded), syms), f"sequence {i} mismatch"
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"entropy pipeline took {elapsed:.1f}s (budget 60s)"
    print(f"\nPASS lossless entropy pipeline: 1000 sequences bit-exact in {elapsed:.1f}s")


def test_drift_free_closed_loop():
    """100 random 250-frame traces: encoder recon == decoder output bit-exact,
    per-component error <= step/2 for every frame."""
    cfg = QuantConfig()
    steps = cfg.as_array()
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        trace = random_trace(rng, 250)
        stream, recon = encode_stream_with_recon(trace, b"key", cfg)
        decoded = decode_stream(stream)
        for a, b in zip(recon.frames, decoded.frames):
            assert flatten(a) == flatten(b), "encoder/decoder state diverged"
        for orig, rec in zip(trace.frames, decoded.frames):
            err = np.abs(np.asarray(flatten(orig)) - np.asarray(flatten(rec)))
            worst = max(worst, float(np.max(err / steps)))
            assert np.all(err <= steps * 0.5 * (1 + 1e-9)), \
                f"error {err / steps} exceeds step/2"
    print(f"\nPASS drift-free closed loop: 100x250 frames, worst err/step {worst:.6f}")


def test_exp_golomb_golden_vectors():
    """First 16 codewords match the definitional table exactly."""
    table = ["1", "010", "011", "00100", "00101", "00110", "00111",
             "0001000", "0001001", "0001010", "0001011", "0001100",
             "0001101", "0001110", "0001111", "000010000"]
    for u, want in enumerate(table):
        assert eg0_encode(u) == want, f"eg0({u}) = {eg0_encode(u)} != {want}"
    print("\nPASS exp-Golomb golden vectors: first 16 codewords exact")


def test_rotation_projection_invariants():
    """1e5 random poses orthonormal within 1e-12; pinhole examples exact to 1e-12."""
    rng = np.random.default_rng(7)
    rots = rng.uniform(-math.pi, math.pi, (100_000, 3))
    Rs = np.empty((rots.shape[0], 3, 3))
    for i, (p, y, r) in enumerate(rots):
        Rs[i] = pose_from_semantics(SemanticVector(
            (0.0,) * 6, 0.0, (p, y, r), (0.0, 0.0, 0.0), 0.0)).R
    gram = np.einsum("nij,nik->njk", Rs, Rs)
    ortho_err = np.abs(gram - np.eye(3)).max()
    det_err = np.abs(np.linalg.det(Rs) - 1.0).max()
    assert ortho_err <= 1e-12, f"orthogonality error {ortho_err}"
    assert det_err <= 1e-12, f"determinant error {det_err}"

    cam = CameraIntrinsics(focal=1.0, principal=(0.0, 0.0), width=4, height=4)
    pose = RigidPose(R=np.eye(3), t=np.array([0.0, 0.0, 2.0]))
    mesh = project(np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]), pose, cam)
    assert np.max(np.abs(mesh.projected2d[:, 0] - [0.0, 0.0])) <= 1e-12
    assert np.max(np.abs(mesh.projected2d[:, 1] - [0.5, 0.0])) <= 1e-12
    print(f"\nPASS rotation/projection invariants: 1e5 poses, "
          f"ortho {ortho_err:.2e}, det {det_err:.2e}")


def test_eye_recalibration_endpoints():
    """Blink formula endpoints on the 10/20 fixture, exact to 1e-12."""
    cases = [(5.0, 20.0, 0.0), (0.0, 10.0, 10.0), (2.5, 15.0, 5.0)]
    for intensity, want_top, want_gap in cases:
        top = blink_recalibrated_top(10.0, 20.0, intensity)
        assert abs(top - want_top) <= 1e-12
        assert abs((20.0 - top) - want_gap) <= 1e-12
    print("\nPASS eye recalibration endpoints: intensity 5/0/2.5 -> gap 0/10/5")


def test_flow_exactness_and_zero_warp():
    """Anchor nodes to 1e-9; affine fields in-hull to 1e-6; zero warp byte-exact."""
    rng = np.random.default_rng(11)
    pts = [(float(x), float(y)) for x in (2, 16, 30) for y in (2, 16, 30)]

    def mesh_at(points):
        arr = np.asarray(points, dtype=np.float64).T
        return Mesh(vertices3d=np.vstack([arr, np.ones(arr.shape[1])]),
                    projected2d=arr, visible=np.ones(arr.shape[1], bool))

    disp = rng.normal(0, 2.5, (len(pts), 2))
    field = coarse_flow(mesh_at(np.asarray(pts) + disp), mesh_at(pts), (32, 32))
    anchor_err = max(np.max(np.abs(field.flow[int(y), int(x)] - d))
                     for (x, y), d in zip(pts, disp))
    assert anchor_err <= 1e-9, f"anchor error {anchor_err}"

    A = rng.normal(0, 0.04, (2, 2))
    b = rng.normal(0, 1.5, 2)
    affine_disp = np.asarray(pts) @ A.T + b
    field = coarse_flow(mesh_at(np.asarray(pts) + affine_disp), mesh_at(pts), (32, 32))
    gx, gy = np.meshgrid(np.arange(32.0), np.arange(32.0))
    want = np.stack([gx, gy], axis=-1) @ A.T + b
    in_hull = ~field.fill_mask
    affine_err = np.max(np.abs(field.flow[in_hull] - want[in_hull]))
    assert affine_err <= 1e-6, f"affine error {affine_err}"

    img = make_synthetic_portrait(32, 32, seed=5)
    zero = FlowField(flow=np.zeros((32, 32, 2)), fill_mask=np.zeros((32, 32), bool))
    assert np.array_equal(warp_frame(img, zero).pixels, img.pixels)
    print(f"\nPASS flow exactness: anchors {anchor_err:.1e}, affine {affine_err:.1e}, "
          f"zero-warp byte-identical")


def _smooth_acceptance_trace() -> SemanticTrace:
    """250 frames, 25 fps: sinusoidal yaw +/-0.3 rad, a blink every 2 s."""
    from ifvc import KeyFrameSemantics
    frames = []
    eye = np.zeros(250)
    for start in range(25, 250, 50):
        for j in range(9):
            if start + j < 250:
                eye[start + j] = 5.0 * (1.0 - abs(j - 4) / 4.0)
    for i in range(250):
        t = i / 25.0
        frames.append(SemanticVector(
            mouth=(0.0,) * 6,
            eye=float(eye[i]),
            rot=(0.0, 0.3 * math.sin(2 * math.pi * t / 5.0), 0.0),
            trans=(0.0, 0.0, 3.0), loc=0.0))
    key = KeyFrameSemantics.neutral(pose=frames[0])
    return SemanticTrace(fps=25.0, frames=tuple(frames), key=key)


def test_bitrate_sanity():
    """Smooth 250-frame trace at <= 5.0 kbps with default steps, < 10 s."""
    start = time.monotonic()
    trace = _smooth_acceptance_trace()
    stream = encode_stream(trace, b"opaque-key-payload", QuantConfig(),
                           width=128, height=128)
    report = inspect_stream(stream)
    elapsed = time.monotonic() - start
    assert report.kbps <= 5.0, f"{report.kbps:.3f} kbps exceeds the 5.0 gate"
    assert elapsed < 10.0, f"encode took {elapsed:.1f}s (budget 10s)"
    print(f"\nPASS bitrate sanity: {report.kbps:.3f} kbps "
          f"({report.payload_bytes} payload bytes) in {elapsed:.2f}s")


def test_edit_locality(golden_stream_path):
    """offset rot_1 +0.2 on frames 10-20 changes nothing else, bit for bit."""
    session = Session(load_stream(golden_stream_path))
    before = session.current_matrix().copy()
    session.apply_edit(EditOp(target="rot_1", mode="offset", value=0.2,
                              frames=(10, 20)))
    after = session.current_matrix()
    col = 8  # roty in flatten order
    assert after.shape[0] == 250
    assert np.array_equal(after[10:21, col], before[10:21, col] + 0.2)
    untouched = np.ones_like(before, dtype=bool)
    untouched[10:21, col] = False
    assert np.array_equal(after[untouched], before[untouched]), \
        "edit leaked outside its target range/component"
    print("\nPASS edit locality: 11 frames x 1 component changed, "
          f"{int(untouched.sum())} other cells bit-identical")


def test_container_fuzzing(golden_stream_path):
    """1,000 single-byte corruptions: no crash, no silent wrong-length output,
    >= 99% structured errors."""
    blob = bytearray(open(golden_stream_path, "rb").read())
    frame_count = parse(bytes(blob)).header.frame_count
    rng = np.random.default_rng(99)
    structured = 0
    silent = 0
    for _ in range(1000):
        pos = int(rng.integers(0, len(blob)))
        new = int(rng.integers(0, 256))
        if new == blob[pos]:
            new ^= 0xFF
        corrupted = bytes(blob[:pos]) + bytes([new]) + bytes(blob[pos + 1:])
        try:
            decoded = decode_stream(parse(corrupted))
        except CodecError:
            structured += 1
        else:
            silent += 1
            assert len(decoded.frames) == frame_count, "silent wrong-length output"
    assert structured >= 990, f"only {structured}/1000 corruptions raised"
    print(f"\nPASS container fuzzing: {structured}/1000 structured errors, "
          f"{silent} undetected (all length-preserving)")
