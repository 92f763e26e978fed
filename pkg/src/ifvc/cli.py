"""Command line interface: encode, decode, inspect, mesh, preview, serve."""

from __future__ import annotations

import io
import json
import sys

import click
from PIL import Image, UnidentifiedImageError

from .container import (
    KEY_TAG_LOSSLESS,
    encode_stream,
    inspect_stream,
    load_stream,
    save_stream,
)
from .entropy import QuantConfig
from .errors import CodecError
from .facemodel import load_model, make_synthetic_model, save_model
from .motion import make_synthetic_portrait, write_flo
from .semantics import export_trace, load_trace
from .session import Session


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise click.BadParameter(f"size must look like 256x256, got {text!r}") from None


def _parse_steps(text: str | None) -> QuantConfig:
    if not text:
        return QuantConfig()
    return QuantConfig(tuple(float(s) for s in text.split(",")))


@click.group()
def main():
    """Semantic talking-face codec tools."""


@main.command()
@click.option("--trace", "trace_path", required=True, type=click.Path(exists=True),
              help="Semantic trace (.csv or .json).")
@click.option("--key", "key_path", required=True, type=click.Path(exists=True),
              help="Key-reference image (embedded verbatim) or opaque payload.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--steps", default=None,
              help="14 comma-separated quantization steps (defaults built in).")
@click.option("--fps", default=25.0, show_default=True,
              help="Frame rate for CSV traces (JSON traces carry their own).")
@click.option("--size", default=None,
              help="WxH when the key payload is not a decodable image.")
@click.option("--model-id", default="synthetic-v1", show_default=True)
def encode(trace_path, key_path, out_path, steps, fps, size, model_id):
    """Encode a trace plus key payload into an .ifvc stream."""
    trace = load_trace(trace_path, fps=fps)
    with open(key_path, "rb") as fh:
        key_payload = fh.read()
    tag = KEY_TAG_LOSSLESS
    try:
        with Image.open(io.BytesIO(key_payload)) as img:
            width, height = img.size
    except UnidentifiedImageError:
        tag = b"OPAQ"
        if not size:
            raise click.BadParameter(
                "--size is required when the key payload is not an image")
        width, height = _parse_size(size)
    if size:
        width, height = _parse_size(size)
    stream = encode_stream(trace, key_payload, _parse_steps(steps),
                           width=width, height=height, key_tag=tag,
                           model_id=model_id)
    save_stream(stream, out_path)
    rep = inspect_stream(stream)
    click.echo(f"{out_path}: {rep.frame_count} frames, {rep.kbps:.3f} kbps "
               f"(+{rep.key_payload_bytes} key bytes)")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output trace (.csv or .json).")
def decode(in_path, out_path):
    """Decode an .ifvc stream back to a semantic trace file."""
    from .container import decode_stream
    trace = decode_stream(load_stream(in_path))
    export_trace(trace, out_path)
    click.echo(f"{out_path}: {len(trace.frames)} frames at {trace.fps:g} fps")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True, help="Emit a JSON report.")
def inspect(in_path, as_json):
    """Per-frame bits, total kbps and a header dump."""
    rep = inspect_stream(load_stream(in_path))
    if as_json:
        click.echo(json.dumps({
            "fps": rep.fps, "frame_count": rep.frame_count,
            "width": rep.width, "height": rep.height,
            "model_id": rep.model_id, "steps": list(rep.steps),
            "key_tag": rep.key_tag, "key_payload_bytes": rep.key_payload_bytes,
            "payload_bytes": rep.payload_bytes, "kbps": rep.kbps,
            "frame_payload_bits": list(rep.frame_payload_bits),
            "frame_code_bits": list(rep.frame_code_bits),
        }))
    else:
        click.echo(rep.to_text())


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--frame", "frame_index", required=True, type=int)
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def mesh(in_path, frame_index, model_path, out_path):
    """Dump one frame's projected 2D mesh as JSON for tooling/UI."""
    session = Session(load_stream(in_path), model=load_model(model_path))
    m, left, right, _ = session.frame_mesh(frame_index)
    doc = {
        "frame": frame_index,
        "vertices": m.projected2d.T.tolist(),
        "visible": m.visible.tolist(),
        "triangles": session.model.triangles.tolist(),
        "eye_left": left.points.T.tolist(),
        "eye_right": right.points.T.tolist(),
    }
    with open(out_path, "w") as fh:
        json.dump(doc, fh)
    click.echo(f"{out_path}: {m.n_vertices} vertices")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--frames", "frame_range", default=None,
              help="Inclusive range a..b (defaults to the whole stream).")
@click.option("--outdir", required=True, type=click.Path())
@click.option("--flow", "dump_flow", is_flag=True, help="Also write .flo dumps.")
def preview(in_path, model_path, frame_range, outdir, dump_flow):
    """Write warped preview PNGs (and optional flow dumps) per frame."""
    import os
    session = Session(load_stream(in_path), model=load_model(model_path))
    if frame_range:
        a, b = frame_range.split("..")
        first, last = int(a), int(b)
    else:
        first, last = 0, session.frame_count - 1
    os.makedirs(outdir, exist_ok=True)
    for index in range(first, last + 1):
        img = session.preview(index)
        with open(os.path.join(outdir, f"frame{index:05d}.png"), "wb") as fh:
            fh.write(img.to_png())
        if dump_flow:
            write_flo(session.frame_flow(index),
                      os.path.join(outdir, f"frame{index:05d}.flo"))
    click.echo(f"{outdir}: wrote frames {first}..{last}")


@main.command()
@click.option("--file", "in_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True),
              help="Face model (.mmb); defaults to the built-in synthetic one.")
@click.option("--port", default=8897, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(in_path, model_path, port, host):
    """Serve the interactive editing API for one stream."""
    import uvicorn
    from .service import create_app
    model = load_model(model_path) if model_path else make_synthetic_model()
    session = Session(load_stream(in_path), model=model)
    uvicorn.run(create_app(session), host=host, port=port, log_level="warning")


@main.command("make-model")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed", default=7, show_default=True, type=int)
def make_model(out_path, seed):
    """Write the synthetic test face model to an .mmb file."""
    model = make_synthetic_model(seed=seed)
    save_model(model, out_path)
    click.echo(f"{out_path}: {model.n_vertices} vertices")


@main.command("make-key")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--size", default="128x128", show_default=True)
@click.option("--seed", default=0, show_default=True, type=int)
def make_key(out_path, size, seed):
    """Write a deterministic synthetic portrait PNG (demo key image)."""
    w, h = _parse_size(size)
    img = make_synthetic_portrait(w, h, seed=seed)
    with open(out_path, "wb") as fh:
        fh.write(img.to_png())
    click.echo(f"{out_path}: {w}x{h}")


def cli_main():
    try:
        main(standalone_mode=True)
    except CodecError as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    cli_main()
