/** Editor app: timeline + sliders + preview with mesh overlay.
 *
 * All state lives on the service; the UI fetches after every
 * acknowledged mutation, polls nothing, and keeps at most one mutation
 * request in flight.  Slider drags are debounced at 100 ms.
 */

import { ApiClient, ServiceError } from "./api.js";
import type { EditBody } from "./api.js";
import { debounce, type Debounced } from "./debounce.js";
import { MeshOverlay, SchemaError } from "./overlay.js";
import { SliderPanel } from "./sliders.js";
import { initialState, frameInRange, MutationQueue, type UiSessionState } from "./state.js";
import { Timeline } from "./timeline.js";
import { Toasts } from "./toast.js";

export const SLIDER_DEBOUNCE_MS = 100;

function bufferToDataUrl(buf: ArrayBuffer): string {
  const bytes = new Uint8Array(buf);
  let binary = "";
  const chunk = 0x2000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return "data:image/png;base64," + btoa(binary);
}

export class App {
  readonly state: UiSessionState = initialState();
  readonly api: ApiClient;
  readonly toasts: Toasts;
  readonly timeline: Timeline;
  readonly sliders: SliderPanel;
  readonly overlay: MeshOverlay;
  readonly previewImg: HTMLImageElement;
  private readonly queue: MutationQueue;
  private debouncers = new Map<string, Debounced<[number]>>();
  private refreshPromise: Promise<void> = Promise.resolve();

  constructor(private readonly doc: Document, root: HTMLElement, baseUrl: string) {
    this.api = new ApiClient(baseUrl);
    this.toasts = new Toasts(doc);

    const header = doc.createElement("div");
    header.className = "header";
    header.textContent = "ifvc editor";
    const meta = doc.createElement("span");
    meta.className = "meta";
    header.append(meta);

    const stage = doc.createElement("div");
    stage.className = "stage";
    this.previewImg = doc.createElement("img");
    this.previewImg.className = "preview";
    this.previewImg.alt = "warped preview";
    const canvas = doc.createElement("canvas");
    canvas.className = "overlay";
    stage.append(this.previewImg, canvas);
    this.overlay = new MeshOverlay(canvas);

    this.timeline = new Timeline(doc, (frame) => void this.seek(frame));
    this.sliders = new SliderPanel(doc, (target, value) => this.sliderMoved(target, value));

    const controls = doc.createElement("div");
    controls.className = "controls";
    const keyInput = doc.createElement("input");
    keyInput.type = "file";
    keyInput.accept = "image/png";
    keyInput.id = "key-upload";
    keyInput.addEventListener("change", () => {
      const file = keyInput.files?.[0];
      if (file) void this.substituteKey(file);
    });
    const keyLabel = doc.createElement("label");
    keyLabel.textContent = "virtual character: ";
    keyLabel.append(keyInput);
    const exportBtn = doc.createElement("button");
    exportBtn.textContent = "export edited stream";
    exportBtn.addEventListener("click", () => void this.exportStream());
    controls.append(keyLabel, exportBtn);

    root.append(this.toasts.element, header, stage, this.timeline.element,
                this.sliders.element, controls);
    this.metaEl = meta;
    this.queue = new MutationQueue(
      async (edit) => {
        const r = await this.api.postEdit(edit);
        this.state.editCount = r.edit_count;
      },
      (err, edit) => this.surfaceError(err, `edit ${edit.target}`),
      () => this.refreshFrame(),
    );
  }

  private metaEl: HTMLElement;

  async start(): Promise<void> {
    const meta = await this.api.meta();
    this.state.meta = meta;
    this.state.editCount = meta.edit_count;
    this.state.keySource = meta.substituted ? "custom" : "stream";
    this.metaEl.textContent =
      ` ${meta.frame_count} frames @ ${meta.fps} fps, ${meta.width}x${meta.height}, ` +
      `model ${meta.model_id}`;
    this.timeline.setFrameCount(meta.frame_count);
    this.sliders.setEnabled(true);
    await this.seek(0);
  }

  /** Pending work settles: debounces flushed, queue drained, refresh done. */
  async settle(): Promise<void> {
    for (const d of this.debouncers.values()) d.flush();
    await this.queue.idle();
    await this.refreshPromise;
  }

  private surfaceError(err: unknown, what: string): void {
    if (err instanceof SchemaError) {
      this.toasts.showBanner(err.message);
    } else if (err instanceof ServiceError) {
      this.toasts.error(`${what}: ${err.message}`);
    } else {
      this.toasts.error(`${what}: ${String(err)}`);
    }
  }

  private sliderMoved(target: string, value: number): void {
    if (!frameInRange(this.state, this.state.frame)) {
      this.sliders.setEnabled(false); // out-of-range frame: no request
      return;
    }
    let d = this.debouncers.get(target);
    if (!d) {
      d = debounce((v: number) => this.issueEdit(target, v), SLIDER_DEBOUNCE_MS);
      this.debouncers.set(target, d);
    }
    d(value);
  }

  private issueEdit(target: string, value: number): void {
    const frame = this.state.frame;
    this.pushEdit({ target, mode: "set", value, frames: [frame, frame] });
  }

  /** Queue an arbitrary edit through the single-in-flight mutation path. */
  pushEdit(edit: EditBody): void {
    this.queue.push(edit);
  }

  async seek(frame: number): Promise<void> {
    this.state.frame = frame;
    this.timeline.setDisplayed(frame);
    await (this.refreshPromise = this.refreshFrame());
  }

  private async refreshFrame(): Promise<void> {
    const meta = this.state.meta;
    if (!meta || !frameInRange(this.state, this.state.frame)) return;
    const frame = this.state.frame;
    try {
      const [semantics, mesh, png] = await Promise.all([
        this.api.semantics(frame),
        this.api.mesh(frame),
        this.api.previewPng(frame),
      ]);
      if (frame !== this.state.frame) return; // user already scrubbed on
      this.state.semantics = semantics.values;
      this.sliders.setValues(meta.component_names, semantics.values);
      this.state.mesh = this.overlay.draw(mesh, meta.width, meta.height);
      this.toasts.clearBanner();
      this.previewImg.src = bufferToDataUrl(png);
    } catch (err) {
      this.surfaceError(err, `frame ${frame}`);
    }
  }

  private async substituteKey(file: Blob): Promise<void> {
    try {
      await this.api.uploadKey(file);
      this.state.keySource = "custom";
      await (this.refreshPromise = this.refreshFrame());
    } catch (err) {
      this.surfaceError(err, "key upload");
    }
  }

  private async exportStream(): Promise<void> {
    try {
      const result = await this.api.exportStream();
      if (result instanceof ArrayBuffer) {
        const url = URL.createObjectURL?.(new Blob([result], { type: "application/octet-stream" }));
        if (url) {
          const a = this.doc.createElement("a");
          a.href = url;
          a.download = "edited.ifvc";
          a.click();
          URL.revokeObjectURL?.(url);
        }
        this.toasts.error(`exported ${result.byteLength} bytes`);
      }
    } catch (err) {
      this.surfaceError(err, "export");
    }
  }
}

export async function boot(root: HTMLElement, baseUrl: string,
                           doc: Document = document): Promise<App> {
  const app = new App(doc, root, baseUrl);
  await app.start();
  return app;
}
