/** Job polling: fixed base interval with capped backoff, cancellable so a
 * scope change can abandon a stale job. */

import { ApiClient, JobStatus } from './api.js';

export interface PollOptions {
  intervalMs?: number;
  maxIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (status: JobStatus) => void;
}

export interface PollHandle {
  cancelled: boolean;
  cancel(): void;
}

export function makeHandle(): PollHandle {
  return {
    cancelled: false,
    cancel() {
      this.cancelled = true;
    },
  };
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/** Poll until the job reaches done/failed; resolves with the terminal status.
 * Rejects with the string 'cancelled' when the handle is cancelled. */
export async function pollJob(
  client: ApiClient,
  jobId: string,
  handle: PollHandle,
  options: PollOptions = {},
): Promise<JobStatus> {
  const base = options.intervalMs ?? 2000;
  const cap = options.maxIntervalMs ?? 10000;
  const sleep = options.sleep ?? defaultSleep;
  let interval = base;
  for (;;) {
    if (handle.cancelled) throw new Error('cancelled');
    const status = await client.jobStatus(jobId);
    options.onUpdate?.(status);
    if (status.state === 'done' || status.state === 'failed') {
      return status;
    }
    await sleep(interval);
    interval = Math.min(Math.round(interval * 1.5), cap);
  }
}
