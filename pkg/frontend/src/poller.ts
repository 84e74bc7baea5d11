/**
 * Poll a run handle until it reaches a terminal state.
 *
 * Cadence is clamped to at least one second so the portal never hammers the
 * service, and there is at most one in-flight request per poller.
 */

import { RepositoryApi, RunStatus } from "./api.js";

export const MIN_POLL_MS = 1000;

export const TERMINAL_STATES = ["finished", "failed"] as const;

export function isTerminal(status: RunStatus): boolean {
  return (TERMINAL_STATES as readonly string[]).includes(status.state);
}

export interface PollerOptions {
  cadenceMs?: number;
  onUpdate?: (status: RunStatus) => void;
}

export class RunPoller {
  readonly cadenceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private api: RepositoryApi,
    private handleId: string,
    private options: PollerOptions = {},
  ) {
    this.cadenceMs = Math.max(MIN_POLL_MS, options.cadenceMs ?? MIN_POLL_MS);
  }

  /** Resolves with the terminal status; rejects if a poll request fails. */
  start(): Promise<RunStatus> {
    return new Promise((resolve, reject) => {
      const tick = async () => {
        if (this.stopped) {
          return;
        }
        let status: RunStatus;
        try {
          status = await this.api.runStatus(this.handleId);
        } catch (err) {
          this.stop();
          reject(err);
          return;
        }
        this.options.onUpdate?.(status);
        if (isTerminal(status)) {
          this.stop();
          resolve(status);
          return;
        }
        this.timer = setTimeout(tick, this.cadenceMs);
      };
      void tick();
    });
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }
}
