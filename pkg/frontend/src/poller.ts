// Sequential polling: the next tick is scheduled only after the current
// one settles, so a slow server never stacks requests.

export interface PollHandle {
  stop(): void;
}

export interface Scheduler {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const realScheduler: Scheduler = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export const DEFAULT_POLL_MS = 2000;

export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number = DEFAULT_POLL_MS,
  scheduler: Scheduler = realScheduler,
): PollHandle {
  let stopped = false;
  let pending: unknown = null;

  const loop = async () => {
    try {
      await tick();
    } catch {
      // poll errors are transient; the next tick retries
    }
    if (!stopped) {
      pending = scheduler.set(loop, intervalMs);
    }
  };
  pending = scheduler.set(loop, 0);

  return {
    stop() {
      stopped = true;
      if (pending !== null) scheduler.clear(pending);
    },
  };
}
