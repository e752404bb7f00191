/**
 * Repeating fetch with at most one request in flight per view.
 *
 * A tick that fires while the previous request is still pending is dropped,
 * not queued; the next interval tries again. A failed fetch keeps the last
 * good payload and marks it stale until a fetch succeeds again.
 */
export class Poller<T> {
  readonly intervalS: number;

  data: T | null = null;
  lastUpdatedMs: number | null = null;
  stale = false;
  lastError: string | null = null;

  private readonly fetcher: () => Promise<T>;
  private readonly now: () => number;
  private inflight = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(fetcher: () => Promise<T>, intervalS = 5, now: () => number = Date.now) {
    if (!Number.isInteger(intervalS) || intervalS < 1) {
      throw new RangeError("poll interval must be an integer number of seconds, at least 1");
    }
    this.fetcher = fetcher;
    this.intervalS = intervalS;
    this.now = now;
  }

  /** Runs one poll; returns false when dropped because one is already running. */
  async tick(): Promise<boolean> {
    if (this.inflight) {
      return false;
    }
    this.inflight = true;
    try {
      const payload = await this.fetcher();
      this.data = payload;
      this.lastUpdatedMs = this.now();
      this.stale = false;
      this.lastError = null;
    } catch (err) {
      this.stale = true;
      this.lastError = err instanceof Error ? err.message : String(err);
    } finally {
      this.inflight = false;
    }
    return true;
  }

  start(): void {
    if (this.timer) {
      return;
    }
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalS * 1000);
    // let the process exit even if a caller forgets stop(); browsers lack unref
    (this.timer as { unref?: () => void }).unref?.();
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}

/** Banner text when showing possibly-outdated data, or null when fresh. */
export function renderStaleBanner(p: { stale: boolean; lastUpdatedMs: number | null }): string | null {
  if (!p.stale) {
    return null;
  }
  const when = p.lastUpdatedMs === null ? "never" : new Date(p.lastUpdatedMs).toISOString();
  return `connection lost, showing data last updated ${when}`;
}
