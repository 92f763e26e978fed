/** Error toasts and the persistent schema-mismatch banner. */

export class Toasts {
  readonly element: HTMLElement;
  private banner: HTMLElement | null = null;
  /** retained for tests and debugging */
  readonly log: string[] = [];

  constructor(private readonly doc: Document, private readonly ttlMs = 4000) {
    this.element = doc.createElement("div");
    this.element.className = "toasts";
  }

  error(message: string): void {
    this.log.push(message);
    const toast = this.doc.createElement("div");
    toast.className = "toast toast-error";
    toast.textContent = message;
    this.element.append(toast);
    setTimeout(() => toast.remove(), this.ttlMs);
  }

  /** Sticky banner for payload schema mismatches; replaces any previous one. */
  showBanner(message: string): void {
    this.log.push(`banner: ${message}`);
    if (this.banner) this.banner.remove();
    this.banner = this.doc.createElement("div");
    this.banner.className = "banner banner-error";
    this.banner.textContent = message;
    this.element.prepend(this.banner);
  }

  clearBanner(): void {
    if (this.banner) {
      this.banner.remove();
      this.banner = null;
    }
  }
}
