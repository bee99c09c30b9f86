import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { CalculatorController } from "../src/controller.js";
import {
  TEST_META,
  deferredResponse,
  jsonResponse,
  makeFetchStub,
  okResponse,
} from "./helpers.js";

function makeController(
  respond: Parameters<typeof makeFetchStub>[0] = () => jsonResponse(okResponse()),
) {
  const { calls, fetchFn } = makeFetchStub(respond);
  const api = new ApiClient("http://test", fetchFn);
  const controller = new CalculatorController(api, TEST_META);
  return { controller, calls };
}

describe("calculator controller", () => {
  it("does not query while mandatory fields are incomplete", async () => {
    const { controller, calls } = makeController();
    await controller.setMandatory("psa", "8");
    expect(calls.length).toBe(0);
    expect(controller.viewModel.canSubmit).toBe(false);
  });

  it("submits absent (not defaulted) unknown fields", async () => {
    const { controller, calls } = makeController();
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    expect(calls.length).toBe(1);
    expect(calls[0].body).toEqual({ psa: 8, age: 65 });
  });

  it("toggling a factor triggers exactly one new request", async () => {
    const { controller, calls } = makeController();
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    const before = calls.length;
    await controller.setOptional("dre", { kind: "value", value: "abnormal" });
    expect(calls.length).toBe(before + 1);
    expect(calls[calls.length - 1].body).toEqual({ psa: 8, age: 65, dre: "abnormal" });
    await controller.setOptional("dre", { kind: "unknown" });
    expect(calls.length).toBe(before + 2);
    expect(calls[calls.length - 1].body).toEqual({ psa: 8, age: 65 });
  });

  it("displays the API risk rounded half-even to one decimal percent", async () => {
    const { controller } = makeController(() =>
      jsonResponse(okResponse({ risk: 0.1875 })),
    );
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    expect(controller.viewModel.riskText).toBe("18.8%"); // 18.75 -> even tenth
    expect(controller.viewModel.response?.risk).toBe(0.1875);
  });

  it("keeps model metadata alongside the risk", async () => {
    const { controller } = makeController(() =>
      jsonResponse(okResponse({ risk: 0.25, pattern: 5, n: 12419, cohorts: 10 })),
    );
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    const vm = controller.viewModel;
    expect(vm.response?.pattern).toBe(5);
    expect(vm.response?.n).toBe(12419);
    expect(vm.history[0]).toMatchObject({ pattern: 5, n: 12419, riskText: "25.0%" });
  });

  it("cancels the in-flight request when a newer submission starts", async () => {
    let firstRelease: () => void = () => {};
    const { controller, calls } = makeController((call, index) => {
      if (index === 0) {
        const deferred = deferredResponse(call.signal, okResponse({ risk: 0.9 }));
        firstRelease = deferred.release;
        return deferred.promise;
      }
      return jsonResponse(okResponse({ risk: 0.1 }));
    });
    await controller.setMandatory("psa", "8");
    const first = controller.setMandatory("age", "65"); // starts request 0, stays pending
    const second = controller.setOptional("dre", { kind: "value", value: "normal" });
    await Promise.all([first, second]);
    firstRelease();
    expect(calls.length).toBe(2);
    expect(calls[0].signal?.aborted).toBe(true);
    expect(controller.viewModel.riskText).toBe("10.0%"); // newest request wins
  });

  it("builds a what-if history with the newest entry first", async () => {
    let risk = 0.1;
    const { controller } = makeController(() => jsonResponse(okResponse({ risk: (risk += 0.1) })));
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    await controller.setOptional("dre", { kind: "value", value: "abnormal" });
    await controller.setOptional("prior_biopsy", { kind: "value", value: 1 });
    const history = controller.viewModel.history;
    expect(history.length).toBe(3);
    expect(history[0].selection).toContain("prior negative biopsy");
    expect(history[2].selection).not.toContain("digital rectal exam");
  });

  it("surfaces field errors inline and recovers", async () => {
    const { controller } = makeController((_call, index) =>
      index === 0
        ? jsonResponse({ error: { type: "validation",
                                  fields: [{ field: "psa", message: "must be > 0" }] } }, 422)
        : jsonResponse(okResponse()),
    );
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    expect(controller.viewModel.fieldErrors).toEqual([{ field: "psa", message: "must be > 0" }]);
    expect(controller.viewModel.riskText).toBeNull();
    await controller.setOptional("dre", { kind: "value", value: "normal" });
    expect(controller.viewModel.fieldErrors).toEqual([]);
    expect(controller.viewModel.riskText).toBe("6.2%");
  });

  it("raises a global banner on server errors", async () => {
    const { controller } = makeController(() =>
      jsonResponse({ error: { type: "bank_unavailable", message: "no bank" } }, 503),
    );
    await controller.setMandatory("psa", "8");
    await controller.setMandatory("age", "65");
    expect(controller.viewModel.globalError).toContain("503");
    expect(controller.viewModel.riskText).toBeNull();
  });
});
