import { ApiClient, ApiFieldError } from "./api.js";
import {
  FieldState,
  FormState,
  buildRequest,
  canSubmit,
  describeSelection,
  initialFormState,
} from "./form.js";
import { formatRiskPercent } from "./rounding.js";
import type { BankMeta, PredictResponse } from "./types.js";

export interface WhatIfEntry {
  selection: string;
  riskText: string;
  pattern: number;
  n: number;
  cohorts: number;
  fallback: boolean;
}

export interface ViewModel {
  pending: boolean;
  canSubmit: boolean;
  riskText: string | null;
  response: PredictResponse | null;
  fieldErrors: { field: string; message: string }[];
  globalError: string | null;
  history: WhatIfEntry[];
}

const HISTORY_LIMIT = 5;

/**
 * Drives the calculator: field edits re-query automatically once the
 * mandatory fields are valid, at most one request is in flight (newer
 * submissions cancel older ones), and every displayed number comes straight
 * from an API response — the UI does no risk arithmetic of its own.
 */
export class CalculatorController {
  readonly state: FormState;
  /** View subscription; replaced by the DOM layer after mounting. */
  onChange: (vm: ViewModel) => void = () => {};
  private abort: AbortController | null = null;
  private vm: ViewModel = {
    pending: false,
    canSubmit: false,
    riskText: null,
    response: null,
    fieldErrors: [],
    globalError: null,
    history: [],
  };

  constructor(private api: ApiClient, private meta: BankMeta) {
    this.state = initialFormState(meta.factors);
  }

  get viewModel(): ViewModel {
    return this.vm;
  }

  private notify(patch: Partial<ViewModel>): void {
    this.vm = { ...this.vm, ...patch, canSubmit: canSubmit(this.state) };
    this.onChange(this.vm);
  }

  setMandatory(name: "psa" | "age", raw: string): Promise<void> {
    this.state[name] = raw;
    return this.submitIfReady();
  }

  setOptional(name: string, field: FieldState): Promise<void> {
    this.state.optional[name] = field;
    return this.submitIfReady();
  }

  /** One field change triggers at most one request. */
  private submitIfReady(): Promise<void> {
    if (!canSubmit(this.state)) {
      this.notify({ riskText: null, response: null, fieldErrors: [] });
      return Promise.resolve();
    }
    return this.submit();
  }

  async submit(): Promise<void> {
    this.abort?.abort();
    const controller = new AbortController();
    this.abort = controller;
    const body = buildRequest(this.state);
    this.notify({ pending: true, globalError: null, fieldErrors: [] });
    try {
      const response = await this.api.predict(body, controller.signal);
      if (this.abort !== controller) return; // superseded by a newer submission
      const entry: WhatIfEntry = {
        selection: describeSelection(this.state, this.meta.factors),
        riskText: formatRiskPercent(response.risk),
        pattern: response.pattern,
        n: response.n,
        cohorts: response.cohorts,
        fallback: response.fallback,
      };
      this.notify({
        pending: false,
        response,
        riskText: entry.riskText,
        history: [entry, ...this.vm.history].slice(0, HISTORY_LIMIT),
      });
    } catch (err) {
      if (controller.signal.aborted) return; // cancelled: a newer request owns the view
      if (err instanceof ApiFieldError) {
        this.notify({ pending: false, fieldErrors: err.fields, riskText: null, response: null });
      } else {
        const message = err instanceof Error ? err.message : String(err);
        this.notify({ pending: false, globalError: message });
      }
    }
  }
}
