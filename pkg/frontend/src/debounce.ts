/** Trailing-edge debounce with explicit flush, for slider drags. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  /** Fire a pending call immediately (used on drag end and in tests). */
  flush(): void;
  cancel(): void;
  readonly pending: boolean;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let lastArgs: A | null = null;

  const fire = () => {
    timer = null;
    if (lastArgs !== null) {
      const args = lastArgs;
      lastArgs = null;
      fn(...args);
    }
  };

  const wrapped = (...args: A) => {
    lastArgs = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(fire, waitMs);
  };
  wrapped.flush = () => {
    if (timer !== null) clearTimeout(timer);
    fire();
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    lastArgs = null;
  };
  Object.defineProperty(wrapped, "pending", { get: () => lastArgs !== null });
  return wrapped as Debounced<A>;
}
