/**
 * Client for the edit-job service: submit, poll until terminal, fetch the
 * result bytes. Polling starts at 500 ms and backs off to 2 s. Validation
 * failures (400) carry field-level issues so the form can annotate the
 * offending input; a full queue (503) and network failures are distinct
 * error types so the page can react accordingly.
 */

export interface EditConfigPayload {
  mode?: "object" | "background";
  steps?: number;
  seed?: number;
  encode_ratio?: number;
  pixel_blend_fraction?: number;
  tail_drop_fraction?: number;
  pfb_blocks?: [number, number];
  am_blocks?: [number, number];
  am_words?: string[];
}

export interface EditSubmission {
  imagePpm: Uint8Array;
  maskPgm: Uint8Array;
  sourcePrompt: string;
  targetPrompt: string;
  config: EditConfigPayload;
}

export interface FieldIssue {
  field: string;
  code: string;
  message: string;
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  id: string;
  status: JobStatus;
  error: string | null;
  result_path: string | null;
  created_at: string;
  started_at: string | null;
  finished_at: string | null;
}

export class ValidationError extends Error {
  issues: FieldIssue[];
  constructor(issues: FieldIssue[]) {
    super(issues.map((i) => `${i.field}: ${i.message}`).join("; ") || "validation failed");
    this.issues = issues;
  }
}

export class QueueFullError extends Error {
  constructor() {
    super("the service job queue is full");
  }
}

export class JobFailedError extends Error {
  record: JobRecord;
  constructor(record: JobRecord) {
    super(record.error ?? "job failed");
    this.record = record;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type SleepFn = (ms: number) => Promise<void>;

const defaultSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export function toBase64(bytes: Uint8Array): string {
  if (typeof btoa === "function") {
    let binary = "";
    const chunk = 0x8000;
    for (let i = 0; i < bytes.length; i += chunk) {
      binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
    }
    return btoa(binary);
  }
  // node (tests)
  return Buffer.from(bytes).toString("base64");
}

export interface ClientOptions {
  fetchFn?: FetchLike;
  sleep?: SleepFn;
  initialPollMs?: number;
  maxPollMs?: number;
  backoff?: number;
}

export class EditServiceClient {
  readonly baseUrl: string;
  private fetchFn: FetchLike;
  private sleep: SleepFn;
  private initialPollMs: number;
  private maxPollMs: number;
  private backoff: number;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = options.fetchFn ?? ((url, init) => fetch(url, init));
    this.sleep = options.sleep ?? defaultSleep;
    this.initialPollMs = options.initialPollMs ?? 500;
    this.maxPollMs = options.maxPollMs ?? 2000;
    this.backoff = options.backoff ?? 1.5;
  }

  async submit(submission: EditSubmission): Promise<string> {
    const body = JSON.stringify({
      image: toBase64(submission.imagePpm),
      mask: toBase64(submission.maskPgm),
      source_prompt: submission.sourcePrompt,
      target_prompt: submission.targetPrompt,
      config: submission.config,
    });
    const resp = await this.fetchFn(`${this.baseUrl}/v1/edits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body,
    });
    if (resp.status === 400) {
      const report = await resp.json();
      throw new ValidationError(report.issues ?? []);
    }
    if (resp.status === 503) throw new QueueFullError();
    if (resp.status !== 202) throw new Error(`unexpected status ${resp.status}`);
    const record = await resp.json();
    return record.id;
  }

  async getJob(jobId: string): Promise<JobRecord> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/edits/${jobId}`);
    if (!resp.ok) throw new Error(`job lookup failed with ${resp.status}`);
    return (await resp.json()) as JobRecord;
  }

  /** Poll at 500 ms, backing off 1.5x per poll up to 2 s, until terminal. */
  async pollUntilDone(jobId: string): Promise<JobRecord> {
    let interval = this.initialPollMs;
    for (;;) {
      const record = await this.getJob(jobId);
      if (record.status === "done") return record;
      if (record.status === "failed") throw new JobFailedError(record);
      await this.sleep(interval);
      interval = Math.min(this.maxPollMs, interval * this.backoff);
    }
  }

  async fetchResult(jobId: string): Promise<Uint8Array> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/edits/${jobId}/result`);
    if (resp.status === 409) throw new Error("result requested before the job finished");
    if (!resp.ok) throw new Error(`result fetch failed with ${resp.status}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  /** Submit, poll to completion, and return the record plus result bytes. */
  async submitAndPoll(submission: EditSubmission): Promise<{ record: JobRecord; result: Uint8Array }> {
    const jobId = await this.submit(submission);
    const record = await this.pollUntilDone(jobId);
    const result = await this.fetchResult(jobId);
    return { record, result };
  }

  async fetchDefaults(): Promise<Record<string, EditConfigPayload>> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/config/defaults`);
    if (!resp.ok) throw new Error(`defaults fetch failed with ${resp.status}`);
    return await resp.json();
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }
}
