/** Canvas overlay: mesh edges and eye polygons drawn over the preview.
 *
 * The canvas backing store matches the stream resolution exactly, so
 * drawing uses raw service coordinates; CSS scales canvas and preview
 * image together, keeping the overlay aligned 1:1 at any window size.
 */

import type { EyePayload, MeshPayload } from "./api.js";

export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

function isPair(x: unknown): x is [number, number] {
  return Array.isArray(x) && x.length === 2 &&
    typeof x[0] === "number" && typeof x[1] === "number";
}

function checkEye(x: unknown, name: string): EyePayload {
  const eye = x as EyePayload;
  if (!eye || typeof eye !== "object" || typeof eye.gap !== "number" ||
      !Array.isArray(eye.polygon) || !eye.polygon.every(isPair) ||
      !isPair(eye.p_hp) || !isPair(eye.p_lp) || !isPair(eye.p_hp_new)) {
    throw new SchemaError(`mesh payload field ${name} has an unexpected shape`);
  }
  return eye;
}

/** Validate a mesh payload from the service; throws SchemaError on mismatch. */
export function validateMesh(doc: unknown): MeshPayload {
  const mesh = doc as MeshPayload;
  if (!mesh || typeof mesh !== "object") throw new SchemaError("mesh payload is not an object");
  if (typeof mesh.frame !== "number") throw new SchemaError("mesh payload lacks a frame index");
  if (!Array.isArray(mesh.vertices) || !mesh.vertices.every(isPair)) {
    throw new SchemaError("mesh vertices must be [x, y] pairs");
  }
  if (!Array.isArray(mesh.visible) || mesh.visible.length !== mesh.vertices.length ||
      !mesh.visible.every((v) => typeof v === "boolean")) {
    throw new SchemaError("mesh visibility flags do not match the vertex list");
  }
  if (!Array.isArray(mesh.triangles) ||
      !mesh.triangles.every((t) => Array.isArray(t) && t.length === 3 &&
        t.every((i) => Number.isInteger(i) && i >= 0 && i < mesh.vertices.length))) {
    throw new SchemaError("mesh triangles are not valid vertex index triples");
  }
  checkEye(mesh.eye_left, "eye_left");
  checkEye(mesh.eye_right, "eye_right");
  return mesh;
}

/** Unique undirected edges whose endpoints are both visible. */
export function visibleEdges(mesh: MeshPayload): [number, number][] {
  const seen = new Set<number>();
  const out: [number, number][] = [];
  const n = mesh.vertices.length;
  for (const [a, b, c] of mesh.triangles) {
    for (const [i, j] of [[a, b], [b, c], [c, a]] as [number, number][]) {
      if (!mesh.visible[i] || !mesh.visible[j]) continue;
      const key = Math.min(i, j) * n + Math.max(i, j);
      if (!seen.has(key)) {
        seen.add(key);
        out.push([Math.min(i, j), Math.max(i, j)]);
      }
    }
  }
  return out;
}

export const EDGE_STYLE = "rgba(80, 230, 140, 0.75)";
export const EYE_STYLE = "rgba(240, 80, 80, 0.85)";

export class MeshOverlay {
  lastMesh: MeshPayload | null = null;

  constructor(private readonly canvas: HTMLCanvasElement) {}

  /** Gap of each eye region after recalibration, from the last drawn mesh. */
  eyeGaps(): { left: number; right: number } | null {
    if (!this.lastMesh) return null;
    return { left: this.lastMesh.eye_left.gap, right: this.lastMesh.eye_right.gap };
  }

  clear(): void {
    this.lastMesh = null;
    const ctx = this.canvas.getContext("2d");
    if (ctx) ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
  }

  draw(doc: unknown, streamWidth: number, streamHeight: number): MeshPayload {
    const mesh = validateMesh(doc);
    this.lastMesh = mesh;
    if (this.canvas.width !== streamWidth) this.canvas.width = streamWidth;
    if (this.canvas.height !== streamHeight) this.canvas.height = streamHeight;
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return mesh; // headless test environment: geometry still recorded
    ctx.clearRect(0, 0, streamWidth, streamHeight);
    if (!mesh.visible.some((v) => v)) return mesh; // nothing visible: overlay hidden
    ctx.strokeStyle = EDGE_STYLE;
    ctx.lineWidth = 1;
    ctx.beginPath();
    for (const [i, j] of visibleEdges(mesh)) {
      const a = mesh.vertices[i]!;
      const b = mesh.vertices[j]!;
      ctx.moveTo(a[0], a[1]);
      ctx.lineTo(b[0], b[1]);
    }
    ctx.stroke();
    ctx.fillStyle = EYE_STYLE;
    for (const eye of [mesh.eye_left, mesh.eye_right]) {
      if (eye.polygon.length < 3) continue;
      ctx.beginPath();
      const first = eye.polygon[0]!;
      ctx.moveTo(first[0], first[1]);
      for (const p of eye.polygon.slice(1)) ctx.lineTo(p[0], p[1]);
      ctx.closePath();
      ctx.fill();
    }
    return mesh;
  }
}
