import { CalculatorController, ViewModel } from "./controller.js";
import { FieldState, cycleField } from "./form.js";
import type { BankMeta, FactorSchema } from "./types.js";

/** DOM layer: builds the form from the service schema (never hard-coded). */

function fieldStateLabel(f: FactorSchema, field: FieldState): string {
  if (field.kind === "unknown") return "unknown";
  if (f.kind === "categorical") return String(field.value);
  return field.value === 1 ? "yes" : "no";
}

function cycleLevels(f: FactorSchema): [number | string, number | string] {
  if (f.kind === "categorical" && f.levels) {
    return [f.levels[0], f.levels[1]];
  }
  return [0, 1];
}

export function renderApp(
  root: HTMLElement,
  meta: BankMeta,
  controller: CalculatorController,
): void {
  root.innerHTML = "";
  const form = document.createElement("form");
  form.className = "calculator";
  form.addEventListener("submit", (e) => e.preventDefault());

  for (const f of meta.factors) {
    const row = document.createElement("label");
    row.className = f.mandatory ? "field mandatory" : "field";
    const caption = document.createElement("span");
    caption.textContent = f.mandatory ? `${f.label} *` : f.label;
    if (f.unit) caption.textContent += ` (${f.unit})`;
    row.appendChild(caption);

    if (f.mandatory) {
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.name = f.name;
      input.required = true;
      input.addEventListener("input", () => {
        void controller.setMandatory(f.name as "psa" | "age", input.value);
      });
      row.appendChild(input);
    } else if (f.kind === "continuous") {
      const input = document.createElement("input");
      input.type = "number";
      input.step = "any";
      input.placeholder = "unknown";
      input.name = f.name;
      input.addEventListener("input", () => {
        const v = Number(input.value);
        const state: FieldState =
          input.value.trim() === "" || !Number.isFinite(v) || v <= 0
            ? { kind: "unknown" }
            : { kind: "value", value: v };
        void controller.setOptional(f.name, state);
      });
      row.appendChild(input);
    } else {
      const button = document.createElement("button");
      button.type = "button";
      button.name = f.name;
      button.textContent = "unknown";
      button.addEventListener("click", () => {
        const next = cycleField(controller.state.optional[f.name], cycleLevels(f));
        button.textContent = fieldStateLabel(f, next);
        void controller.setOptional(f.name, next);
      });
      row.appendChild(button);
    }
    form.appendChild(row);
  }

  const result = document.createElement("section");
  result.className = "result";
  const history = document.createElement("section");
  history.className = "history";
  root.append(form, result, history);

  controller.onChange = (vm: ViewModel) => renderResult(result, history, vm);
  renderResult(result, history, controller.viewModel);
}

export function renderResult(
  resultEl: HTMLElement,
  historyEl: HTMLElement,
  vm: ViewModel,
): void {
  resultEl.innerHTML = "";
  if (vm.globalError) {
    const banner = document.createElement("div");
    banner.className = "banner error";
    banner.textContent = vm.globalError;
    resultEl.appendChild(banner);
    return;
  }
  if (!vm.canSubmit) {
    resultEl.textContent = "Enter PSA and age to see a risk estimate.";
    return;
  }
  if (vm.pending) {
    resultEl.textContent = "Computing...";
    return;
  }
  for (const err of vm.fieldErrors) {
    const line = document.createElement("div");
    line.className = "field-error";
    line.textContent = `${err.field}: ${err.message}`;
    resultEl.appendChild(line);
  }
  if (vm.response && vm.riskText) {
    const r = vm.response;
    const risk = document.createElement("div");
    risk.className = "risk";
    risk.textContent = vm.riskText;
    const detail = document.createElement("div");
    detail.className = "model-detail";
    const label = r.pattern === 0 ? "PSA + age model" : `pattern ${r.pattern}`;
    detail.textContent =
      `${label} - fitted on ${r.n.toLocaleString()} biopsies ` +
      `from ${r.cohorts} cohorts (bank ${r.model_version.slice(0, 8)})`;
    resultEl.append(risk, detail);
    if (r.fallback) {
      const warn = document.createElement("div");
      warn.className = "banner warning";
      warn.textContent =
        `Requested pattern ${r.requested_pattern} had no fittable model; ` +
        `used ${r.pattern} instead.`;
      resultEl.appendChild(warn);
    }
  }
  historyEl.innerHTML = "";
  if (vm.history.length > 1) {
    const caption = document.createElement("h3");
    caption.textContent = "What-if comparison";
    historyEl.appendChild(caption);
    for (const entry of vm.history) {
      const row = document.createElement("div");
      row.className = "history-row";
      row.textContent =
        `${entry.riskText} - pattern ${entry.pattern}, n=${entry.n}, ` +
        `${entry.cohorts} cohorts - ${entry.selection}`;
      historyEl.appendChild(row);
    }
  }
}

export function renderServiceDown(root: HTMLElement, retry: () => void): void {
  root.innerHTML = "";
  const banner = document.createElement("div");
  banner.className = "banner error";
  banner.textContent = "The prediction service is unreachable.";
  const button = document.createElement("button");
  button.type = "button";
  button.textContent = "Retry";
  button.addEventListener("click", retry);
  root.append(banner, button);
}
