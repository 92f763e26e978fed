/** Typed client for the interactive decoder's HTTP API. */

export interface Meta {
  fps: number;
  frame_count: number;
  width: number;
  height: number;
  model_id: string;
  steps: number[];
  component_names: string[];
  key_tag: string;
  substituted: boolean;
  edit_count: number;
}

export interface SemanticsResponse {
  frame: number;
  values: number[];
  named: Record<string, number>;
}

export interface EyePayload {
  polygon: [number, number][];
  p_hp: [number, number];
  p_lp: [number, number];
  p_hp_new: [number, number];
  gap: number;
}

export interface MeshPayload {
  frame: number;
  vertices: [number, number][];
  visible: boolean[];
  triangles: [number, number, number][];
  eye_left: EyePayload;
  eye_right: EyePayload;
}

export type EditMode = "set" | "offset" | "scale";

export interface EditBody {
  target: string;
  mode: EditMode;
  value: number;
  frames: [number, number] | null;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ServiceError";
  }
}

async function parseError(resp: Response): Promise<ServiceError> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = (await resp.json()) as { detail?: unknown; error?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
    else if (typeof body.error === "string") detail = body.error;
  } catch {
    /* non-JSON error body: keep the status line */
  }
  return new ServiceError(resp.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.url(path), init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  meta(): Promise<Meta> {
    return this.json<Meta>("/meta");
  }

  semantics(frame: number): Promise<SemanticsResponse> {
    return this.json<SemanticsResponse>(`/frames/${frame}/semantics`);
  }

  mesh(frame: number): Promise<MeshPayload> {
    return this.json<MeshPayload>(`/frames/${frame}/mesh`);
  }

  async previewPng(frame: number): Promise<ArrayBuffer> {
    const resp = await fetch(this.url(`/frames/${frame}/preview.png`));
    if (!resp.ok) throw await parseError(resp);
    return resp.arrayBuffer();
  }

  postEdit(edit: EditBody): Promise<{ index: number; edit_count: number }> {
    return this.json("/edits", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(edit),
    });
  }

  deleteEdit(index: number): Promise<{ edit_count: number }> {
    return this.json(`/edits/${index}`, { method: "DELETE" });
  }

  listEdits(): Promise<{ edits: EditBody[] }> {
    return this.json("/edits");
  }

  async uploadKey(image: Blob, filename = "key.png",
                  semantics?: object): Promise<{ substituted: boolean }> {
    const form = new FormData();
    form.append("image", image, filename);
    if (semantics) form.append("semantics", JSON.stringify(semantics));
    const resp = await fetch(this.url("/key"), { method: "POST", body: form });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as { substituted: boolean };
  }

  async exportStream(path?: string): Promise<ArrayBuffer | { path: string }> {
    const resp = await fetch(this.url("/export"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(path ? { path } : {}),
    });
    if (!resp.ok) throw await parseError(resp);
    const ct = resp.headers.get("content-type") ?? "";
    if (ct.includes("application/json")) return (await resp.json()) as { path: string };
    return resp.arrayBuffer();
  }
}
