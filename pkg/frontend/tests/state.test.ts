import { describe, expect, it } from "vitest";

import type { EditBody } from "../src/api.js";
import { frameInRange, initialState, MutationQueue } from "../src/state.js";

const EDIT: EditBody = { target: "eye", mode: "set", value: 5, frames: [0, 0] };

function deferred<T = void>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => { resolve = res; reject = rej; });
  return { promise, resolve, reject };
}

describe("MutationQueue", () => {
  it("keeps at most one request in flight", async () => {
    let inFlight = 0;
    let maxInFlight = 0;
    let sent = 0;
    const queue = new MutationQueue(
      async () => {
        inFlight += 1;
        maxInFlight = Math.max(maxInFlight, inFlight);
        await new Promise((r) => setTimeout(r, 5));
        inFlight -= 1;
        sent += 1;
      },
      () => { throw new Error("unexpected"); },
      () => {},
    );
    for (let i = 0; i < 5; i++) queue.push({ ...EDIT, value: i });
    await queue.idle();
    expect(sent).toBe(5);
    expect(maxInFlight).toBe(1);
  });

  it("refreshes once after the burst settles", async () => {
    let refreshes = 0;
    const queue = new MutationQueue(
      async () => { await new Promise((r) => setTimeout(r, 2)); },
      () => {},
      () => { refreshes += 1; },
    );
    queue.push(EDIT);
    queue.push(EDIT);
    queue.push(EDIT);
    await queue.idle();
    expect(refreshes).toBe(1);
  });

  it("surfaces failures and keeps processing", async () => {
    const failures: string[] = [];
    const ok: number[] = [];
    const queue = new MutationQueue(
      async (edit) => {
        if (edit.value < 0) throw new Error("rejected");
        ok.push(edit.value);
      },
      (_err, edit) => failures.push(edit.target),
      () => {},
    );
    queue.push({ ...EDIT, value: -1 });
    queue.push({ ...EDIT, value: 2 });
    await queue.idle();
    expect(failures).toEqual(["eye"]);   // never silently dropped
    expect(ok).toEqual([2]);
  });

  it("idle resolves immediately when nothing is queued", async () => {
    const queue = new MutationQueue(async () => {}, () => {}, () => {});
    await queue.idle();
    expect(queue.busy).toBe(false);
  });

  it("processes edits pushed while a send is in flight", async () => {
    const gate = deferred();
    const sent: number[] = [];
    const queue = new MutationQueue(
      async (edit) => {
        sent.push(edit.value);
        if (edit.value === 0) await gate.promise;
      },
      () => {},
      () => {},
    );
    queue.push({ ...EDIT, value: 0 });
    await new Promise((r) => setTimeout(r, 1));
    queue.push({ ...EDIT, value: 1 });
    gate.resolve();
    await queue.idle();
    expect(sent).toEqual([0, 1]);
  });
});

describe("frameInRange", () => {
  it("is false with no metadata and outside bounds", () => {
    const state = initialState();
    expect(frameInRange(state, 0)).toBe(false);
    state.meta = { frame_count: 10 } as never;
    expect(frameInRange(state, 0)).toBe(true);
    expect(frameInRange(state, 9)).toBe(true);
    expect(frameInRange(state, 10)).toBe(false);
    expect(frameInRange(state, -1)).toBe(false);
  });
});
