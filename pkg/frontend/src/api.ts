import type {
  ExtremalSuggestion,
  PreviewResponse,
  RetargetRequest,
  UploadResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class ExtremalRequired extends ApiError {
  constructor(public suggestion: ExtremalSuggestion, status: number) {
    super(suggestion.message, status);
  }
}

export async function uploadImage(
  body: Blob | ArrayBuffer,
  fetchFn: FetchLike = fetch,
): Promise<UploadResponse> {
  const response = await fetchFn("/api/images", { method: "POST", body: body as BodyInit });
  if (!response.ok) {
    throw new ApiError(await describeError(response), response.status);
  }
  return (await response.json()) as UploadResponse;
}

export async function requestRetarget(
  request: RetargetRequest,
  signal?: AbortSignal,
  fetchFn: FetchLike = fetch,
): Promise<PreviewResponse> {
  const response = await fetchFn("/api/retarget", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(request),
    signal,
  });
  if (response.status === 422) {
    const payload = await response.json();
    const detail = payload.detail ?? payload;
    const suggestion: ExtremalSuggestion =
      typeof detail === "string" ? { message: detail } : detail;
    throw new ExtremalRequired(suggestion, response.status);
  }
  if (!response.ok) {
    throw new ApiError(await describeError(response), response.status);
  }
  return (await response.json()) as PreviewResponse;
}

async function describeError(response: Response): Promise<string> {
  try {
    const payload = await response.json();
    const detail = payload.detail ?? payload;
    return typeof detail === "string" ? detail : JSON.stringify(detail);
  } catch {
    return `request failed with status ${response.status}`;
  }
}

/** Debounced single-flight runner: rapid calls collapse into one request
 * after the delay, and starting a new request aborts the stale one. */
export class PreviewScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private controller: AbortController | null = null;

  constructor(
    private readonly runner: (signal: AbortSignal) => Promise<void>,
    private readonly delayMs = 300,
  ) {}

  /** Debounced trigger (ratio slider drags etc.). */
  schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire();
    }, this.delayMs);
  }

  /** Immediate trigger (button clicks); cancels any pending debounce. */
  fireNow(): Promise<void> {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    return this.fire();
  }

  private async fire(): Promise<void> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    try {
      await this.runner(controller.signal);
    } finally {
      if (this.controller === controller) {
        this.controller = null;
      }
    }
  }
}
