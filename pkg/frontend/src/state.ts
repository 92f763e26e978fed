/** Session state and the single-in-flight mutation queue.
 *
 * The UI never keeps edited values locally: every acknowledged mutation
 * triggers a refetch, so what is displayed is always what the service
 * returned last.  Failed edits surface through onError and are dropped
 * from the queue, never silently.
 */

import type { EditBody, Meta, MeshPayload } from "./api.js";

export interface UiSessionState {
  meta: Meta | null;
  frame: number;
  /** values per component, as last fetched from the service */
  semantics: number[] | null;
  mesh: MeshPayload | null;
  /** where the active key image came from */
  keySource: "stream" | "custom";
  /** service-acknowledged edit count */
  editCount: number;
}

export function initialState(): UiSessionState {
  return { meta: null, frame: 0, semantics: null, mesh: null,
           keySource: "stream", editCount: 0 };
}

export function frameInRange(state: UiSessionState, frame: number): boolean {
  return state.meta !== null && frame >= 0 && frame < state.meta.frame_count;
}

export class MutationQueue {
  private queue: EditBody[] = [];
  private running = false;
  private waiters: (() => void)[] = [];

  constructor(
    private readonly send: (edit: EditBody) => Promise<void>,
    private readonly onError: (err: unknown, edit: EditBody) => void,
    private readonly onSettled: () => Promise<void> | void,
  ) {}

  get busy(): boolean {
    return this.running || this.queue.length > 0;
  }

  push(edit: EditBody): void {
    this.queue.push(edit);
    void this.pump();
  }

  /** Resolves once the queue is drained and the settle refresh ran. */
  idle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  private async pump(): Promise<void> {
    if (this.running) return;
    this.running = true;
    let attempted = 0;
    try {
      while (this.queue.length > 0) {
        const edit = this.queue.shift()!;
        attempted += 1;
        try {
          await this.send(edit);
        } catch (err) {
          this.onError(err, edit);
        }
      }
      if (attempted > 0) {
        await this.onSettled();
      }
    } finally {
      this.running = false;
      if (this.queue.length > 0) {
        void this.pump();
      } else {
        const waiters = this.waiters;
        this.waiters = [];
        for (const w of waiters) w();
      }
    }
  }
}
