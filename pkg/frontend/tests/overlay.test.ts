import { describe, expect, it } from "vitest";

import type { MeshPayload } from "../src/api.js";
import { MeshOverlay, SchemaError, validateMesh, visibleEdges } from "../src/overlay.js";

function squareMesh(overrides: Partial<MeshPayload> = {}): MeshPayload {
  return {
    frame: 0,
    vertices: [[2, 2], [9, 2], [2, 9], [9, 9]],
    visible: [true, true, true, true],
    triangles: [[0, 1, 2], [1, 3, 2]],
    eye_left: { polygon: [[3, 3], [4, 3], [4, 4]], p_hp: [3, 3], p_lp: [4, 4],
                p_hp_new: [3, 3], gap: 1.0 },
    eye_right: { polygon: [[6, 3], [7, 3], [7, 4]], p_hp: [6, 3], p_lp: [7, 4],
                 p_hp_new: [6, 3], gap: 1.0 },
    ...overrides,
  };
}

describe("validateMesh", () => {
  it("accepts a well-formed payload", () => {
    expect(validateMesh(squareMesh()).vertices.length).toBe(4);
  });

  it.each([
    ["not an object", null],
    ["missing frame", { ...squareMesh(), frame: "x" }],
    ["bad vertices", { ...squareMesh(), vertices: [[1]] }],
    ["visible length mismatch", { ...squareMesh(), visible: [true] }],
    ["triangle index out of range", { ...squareMesh(), triangles: [[0, 1, 9]] }],
    ["bad eye", { ...squareMesh(), eye_left: { polygon: "zebra" } }],
  ])("rejects %s", (_name, doc) => {
    expect(() => validateMesh(doc)).toThrow(SchemaError);
  });
});

describe("visibleEdges", () => {
  it("deduplicates shared edges", () => {
    const edges = visibleEdges(squareMesh());
    // 2 triangles sharing the (1,2) diagonal: 5 unique edges
    expect(edges.length).toBe(5);
    const keys = edges.map(([a, b]) => `${a}-${b}`);
    expect(new Set(keys).size).toBe(5);
    expect(keys).toContain("1-2");
  });

  it("drops edges with an invisible endpoint", () => {
    const edges = visibleEdges(squareMesh({ visible: [true, true, true, false] }));
    expect(edges.length).toBe(3); // only the first triangle's edges remain
  });
});

describe("MeshOverlay", () => {
  it("records geometry and exposes eye gaps", () => {
    const canvas = document.createElement("canvas");
    const overlay = new MeshOverlay(canvas);
    overlay.draw(squareMesh(), 128, 128);
    expect(canvas.width).toBe(128);
    expect(canvas.height).toBe(128);
    expect(overlay.eyeGaps()).toEqual({ left: 1.0, right: 1.0 });
    overlay.clear();
    expect(overlay.eyeGaps()).toBeNull();
  });

  it("throws SchemaError without clobbering the previous mesh", () => {
    const overlay = new MeshOverlay(document.createElement("canvas"));
    overlay.draw(squareMesh(), 128, 128);
    expect(() => overlay.draw({ junk: true }, 128, 128)).toThrow(SchemaError);
    expect(overlay.eyeGaps()).not.toBeNull();
  });

  it("keeps the backing store at stream resolution for 1:1 alignment", () => {
    const canvas = document.createElement("canvas");
    const overlay = new MeshOverlay(canvas);
    overlay.draw(squareMesh(), 320, 200);
    expect([canvas.width, canvas.height]).toEqual([320, 200]);
    // CSS scales the canvas with the preview; the backing store never changes
    overlay.draw(squareMesh(), 320, 200);
    expect([canvas.width, canvas.height]).toEqual([320, 200]);
  });
});
