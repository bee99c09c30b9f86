import type { FactorSchema, PredictRequestBody } from "./types.js";

/**
 * Tri-state form model. Every optional factor is either unknown or carries a
 * value; "unknown" means the field is left out of the request body entirely,
 * never defaulted — missingness routes to a different model on the server.
 */
export type FieldState = { kind: "unknown" } | { kind: "value"; value: number | string };

export interface FormState {
  psa: string; // raw text as typed
  age: string;
  optional: Record<string, FieldState>;
}

export function initialFormState(factors: FactorSchema[]): FormState {
  const optional: Record<string, FieldState> = {};
  for (const f of factors) {
    if (!f.mandatory) optional[f.name] = { kind: "unknown" };
  }
  return { psa: "", age: "", optional };
}

function parsePositive(raw: string): number | null {
  const v = Number(raw);
  return raw.trim() !== "" && Number.isFinite(v) && v > 0 ? v : null;
}

export function psaValue(state: FormState): number | null {
  return parsePositive(state.psa);
}

export function ageValue(state: FormState): number | null {
  const v = Number(state.age);
  return state.age.trim() !== "" && Number.isFinite(v) && v >= 18 && v <= 120 ? v : null;
}

/** Submission is allowed exactly when both mandatory fields are valid. */
export function canSubmit(state: FormState): boolean {
  return psaValue(state) !== null && ageValue(state) !== null;
}

/** Build the request body; unknown fields are absent keys, not nulls or defaults. */
export function buildRequest(state: FormState): PredictRequestBody {
  const psa = psaValue(state);
  const age = ageValue(state);
  if (psa === null || age === null) {
    throw new Error("mandatory fields are not valid");
  }
  const body: PredictRequestBody = { psa, age };
  for (const [name, field] of Object.entries(state.optional)) {
    if (field.kind === "value") {
      body[name] = field.value;
    }
  }
  return body;
}

/** Cycle a tri-state control: unknown -> first level -> second level -> unknown. */
export function cycleField(current: FieldState, levels: [number | string, number | string]): FieldState {
  if (current.kind === "unknown") return { kind: "value", value: levels[0] };
  if (current.value === levels[0]) return { kind: "value", value: levels[1] };
  return { kind: "unknown" };
}

/** Human-readable summary of the known factors, for the what-if history. */
export function describeSelection(state: FormState, factors: FactorSchema[]): string {
  const parts: string[] = [`psa ${state.psa}`, `age ${state.age}`];
  for (const f of factors) {
    if (f.mandatory) continue;
    const field = state.optional[f.name];
    if (field && field.kind === "value") {
      parts.push(`${f.label.toLowerCase()} ${field.value}`);
    }
  }
  return parts.join(", ");
}
