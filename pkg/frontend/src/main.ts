import { ApiClient } from "./api.js";
import { CalculatorController } from "./controller.js";
import { renderApp, renderServiceDown } from "./view.js";

const BASE_URL =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8000";

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const api = new ApiClient(BASE_URL);
  try {
    const meta = await api.getMeta();
    const controller = new CalculatorController(api, meta);
    renderApp(root, meta, controller);
  } catch {
    renderServiceDown(root, () => void boot());
  }
}

void boot();
