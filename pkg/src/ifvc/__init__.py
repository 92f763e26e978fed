"""ifvc: semantic talking-face video codec with interactive decoding.

A session is compressed to one opaque key-reference image payload plus
a per-frame stream of 14 facial semantics (mouth, eye blink, rotation,
translation, depth), predictively coded and entropy compressed.  The
decoder reconstructs semantics bit-exactly against the encoder, builds
3D face meshes, dense motion fields and deterministic warped previews,
and supports editing the bitstream at the semantic level.
"""

from .container import (
    CodedStream,
    CoderState,
    StreamHeader,
    StreamReport,
    decode_stream,
    encode_stream,
    encode_stream_with_recon,
    inspect_stream,
    load_stream,
    parse,
    save_stream,
    serialize,
)
from .entropy import (
    DEFAULT_STEPS,
    PpmModel,
    QuantConfig,
    SymbolBlock,
    dequantize,
    eg0_decode,
    eg0_encode,
    ppm_decode,
    ppm_encode,
    quantize,
    unzigzag,
    zigzag,
)
from .errors import (
    CodecError,
    ContainerError,
    DecodeError,
    DegenerateError,
    DimensionError,
    ParseError,
    RangeError,
    ValidationError,
)
from .facemodel import (
    CameraIntrinsics,
    EyeRegion,
    Mesh,
    MorphableModel,
    RigidPose,
    blink_recalibrated_top,
    default_camera,
    load_model,
    make_synthetic_model,
    mesh_for_frame,
    neutral_key_for,
    pose_from_semantics,
    project,
    recalibrate_eyes,
    save_model,
    synthesize_shape,
    synthesize_texture,
)
from .motion import (
    FlowField,
    PreviewFrame,
    coarse_flow,
    make_synthetic_portrait,
    render_wireframe,
    warp_frame,
)
from .semantics import (
    KeyFrameSemantics,
    SemanticTrace,
    SemanticVector,
    export_trace,
    flatten,
    load_trace,
    unflatten,
)
from .session import EditOp, Session, open_session

__version__ = "0.1.0"
