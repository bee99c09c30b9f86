import type { BankMeta, FieldErrorBody, PredictRequestBody, PredictResponse } from "./types.js";

export class ApiFieldError extends Error {
  constructor(public fields: { field: string; message: string }[]) {
    super(fields.map((f) => `${f.field}: ${f.message}`).join("; "));
    this.name = "ApiFieldError";
  }
}

export class ApiServerError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiServerError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin client over the prediction service; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getMeta(): Promise<BankMeta> {
    const resp = await this.fetchFn(`${this.baseUrl}/bank/meta`);
    if (!resp.ok) {
      throw new ApiServerError(resp.status, `bank metadata unavailable (${resp.status})`);
    }
    return (await resp.json()) as BankMeta;
  }

  async predict(body: PredictRequestBody, signal?: AbortSignal): Promise<PredictResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (resp.status >= 400 && resp.status < 500) {
      const parsed = (await resp.json()) as FieldErrorBody;
      throw new ApiFieldError(parsed.error.fields ?? [{ field: "body", message: "invalid request" }]);
    }
    if (!resp.ok) {
      throw new ApiServerError(resp.status, `prediction service error (${resp.status})`);
    }
    return (await resp.json()) as PredictResponse;
  }
}
