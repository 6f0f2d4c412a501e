/** Polling loop with staleness tracking. The dashboard polls rather
 * than streams; when the gateway is unreachable the views keep their
 * last data and render the age of the last successful fetch. */

export const DEFAULT_POLL_MS = 5000;

export interface PollerState {
  lastSuccessAt: number | null;
  lastError: string | null;
}

export class Poller {
  readonly state: PollerState = { lastSuccessAt: null, lastError: null };
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly fetchOnce: () => Promise<void>,
    private readonly intervalMs: number = DEFAULT_POLL_MS,
    private readonly now: () => number = () => Date.now(),
  ) {}

  /** One poll: on failure the previous data stays up and the error is
   * recorded for the banner. */
  async tick(): Promise<boolean> {
    try {
      await this.fetchOnce();
      this.state.lastSuccessAt = this.now();
      this.state.lastError = null;
      return true;
    } catch (error) {
      this.state.lastError = String(error);
      return false;
    }
  }

  start(): void {
    if (this.timer === null) {
      void this.tick();
      this.timer = setInterval(() => void this.tick(), this.intervalMs);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  banner(): string | null {
    if (this.state.lastError === null) return null;
    if (this.state.lastSuccessAt === null) return "gateway unreachable";
    const age = Math.round((this.now() - this.state.lastSuccessAt) / 1000);
    return `gateway unreachable; showing data from ${age}s ago`;
  }
}
