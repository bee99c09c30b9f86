import type { BankMeta, PredictResponse } from "../src/types.js";

export const TEST_META: BankMeta = {
  schema_version: "1",
  fingerprint: "f".repeat(64),
  format: "pcrisk-bank/1",
  factors: [
    { name: "psa", kind: "continuous", mandatory: true, label: "PSA", unit: "ng/mL",
      levels: null, minimum: 0, maximum: null },
    { name: "age", kind: "continuous", mandatory: true, label: "Age", unit: "years",
      levels: null, minimum: 18, maximum: 120 },
    { name: "dre", kind: "categorical", mandatory: false, label: "Digital rectal exam",
      unit: null, levels: ["normal", "abnormal"], minimum: null, maximum: null },
    { name: "volume", kind: "continuous", mandatory: false, label: "Prostate volume",
      unit: "cc", levels: null, minimum: 0, maximum: null },
    { name: "prior_biopsy", kind: "binary", mandatory: false,
      label: "Prior negative biopsy", unit: null, levels: null, minimum: null, maximum: null },
    { name: "fh_pca_first", kind: "binary", mandatory: false,
      label: "First-degree prostate cancer family history", unit: null, levels: null,
      minimum: null, maximum: null },
  ],
  pattern_count: 1024,
  fittable_count: 1024,
  training_n: 12703,
  n_summary: { min: 1000, q25: 5000, median: 7000, q75: 9000, max: 12703 },
};

export function okResponse(body: Partial<PredictResponse> = {}): PredictResponse {
  return {
    status: "ok",
    risk: 0.0625,
    pattern: 0,
    requested_pattern: 0,
    fallback: false,
    substituted_pattern: null,
    n: 12703,
    cohorts: 10,
    model_version: TEST_META.fingerprint,
    warnings: [],
    ...body,
  };
}

export interface RecordedCall {
  url: string;
  body: unknown;
  signal: AbortSignal | undefined;
}

/** fetch stub that records every /predict body and returns queued responses. */
export function makeFetchStub(respond: (call: RecordedCall, index: number) => Response | Promise<Response>) {
  const calls: RecordedCall[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const call: RecordedCall = {
      url,
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      signal: init?.signal ?? undefined,
    };
    if (url.endsWith("/bank/meta")) {
      return new Response(JSON.stringify(TEST_META), { status: 200 });
    }
    calls.push(call);
    if (call.signal?.aborted) {
      throw abortError();
    }
    return respond(call, calls.length - 1);
  };
  return { calls, fetchFn };
}

export function jsonResponse(obj: unknown, status = 200): Response {
  return new Response(JSON.stringify(obj), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function abortError(): Error {
  const err = new Error("The operation was aborted");
  err.name = "AbortError";
  return err;
}

/** Response that resolves only when released, and honors abort signals. */
export function deferredResponse(signal: AbortSignal | undefined, obj: unknown) {
  let release!: () => void;
  const promise = new Promise<Response>((resolve, reject) => {
    release = () => resolve(jsonResponse(obj));
    signal?.addEventListener("abort", () => reject(abortError()));
  });
  return { promise, release };
}
