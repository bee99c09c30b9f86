/** Wire types of the prediction service. */

export interface FactorSchema {
  name: string;
  kind: "continuous" | "categorical" | "binary";
  mandatory: boolean;
  label: string;
  unit: string | null;
  levels: string[] | null;
  minimum: number | null;
  maximum: number | null;
}

export interface BankMeta {
  schema_version: string;
  fingerprint: string;
  format: string;
  factors: FactorSchema[];
  pattern_count: number;
  fittable_count: number;
  training_n: number;
  n_summary: { min: number; q25: number; median: number; q75: number; max: number };
}

/** Optional factors are tri-state: absent from the body means "unknown". */
export type PredictRequestBody = {
  psa: number;
  age: number;
} & Partial<Record<string, number | string>>;

export interface PredictResponse {
  status: "ok";
  risk: number;
  pattern: number;
  requested_pattern: number;
  fallback: boolean;
  substituted_pattern: number | null;
  n: number;
  cohorts: number;
  model_version: string;
  warnings: string[];
}

export interface FieldErrorBody {
  error: { type: string; fields?: { field: string; message: string }[]; message?: string };
}
