/** Frame scrubber: range input plus step buttons and a frame counter. */

export class Timeline {
  readonly element: HTMLElement;
  readonly scrubber: HTMLInputElement;
  private counter: HTMLElement;
  private frameCount = 0;
  private muted = false;

  constructor(doc: Document, private readonly onSeek: (frame: number) => void) {
    this.element = doc.createElement("div");
    this.element.className = "timeline";
    const prev = doc.createElement("button");
    prev.textContent = "<";
    prev.title = "previous frame";
    const next = doc.createElement("button");
    next.textContent = ">";
    next.title = "next frame";
    this.scrubber = doc.createElement("input");
    this.scrubber.type = "range";
    this.scrubber.min = "0";
    this.scrubber.max = "0";
    this.scrubber.step = "1";
    this.scrubber.value = "0";
    this.scrubber.disabled = true;
    this.counter = doc.createElement("span");
    this.counter.className = "frame-counter";
    this.counter.textContent = "-/-";
    this.scrubber.addEventListener("input", () => {
      if (!this.muted) this.seek(Number(this.scrubber.value));
    });
    prev.addEventListener("click", () => this.seek(Number(this.scrubber.value) - 1));
    next.addEventListener("click", () => this.seek(Number(this.scrubber.value) + 1));
    this.element.append(prev, this.scrubber, next, this.counter);
  }

  setFrameCount(count: number): void {
    this.frameCount = count;
    this.scrubber.max = String(Math.max(0, count - 1));
    this.scrubber.disabled = count <= 0;
  }

  /** Clamp, update the display, and notify. */
  seek(frame: number): void {
    if (this.frameCount <= 0) return;
    const clamped = Math.min(Math.max(0, Math.round(frame)), this.frameCount - 1);
    this.setDisplayed(clamped);
    this.onSeek(clamped);
  }

  setDisplayed(frame: number): void {
    this.muted = true;
    try {
      this.scrubber.value = String(frame);
      this.counter.textContent = `${frame}/${Math.max(0, this.frameCount - 1)}`;
    } finally {
      this.muted = false;
    }
  }
}
