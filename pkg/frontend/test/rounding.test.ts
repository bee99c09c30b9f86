import { describe, expect, it } from "vitest";

import { formatRiskPercent, roundHalfEvenPercent } from "../src/rounding.js";

describe("half-even percent rounding", () => {
  it("rounds exact halves to the even tenth", () => {
    expect(roundHalfEvenPercent(0.0625)).toBe(6.2); // 6.25 -> 6.2
    expect(roundHalfEvenPercent(0.1875)).toBe(18.8); // 18.75 -> 18.8
    expect(roundHalfEvenPercent(0.3125)).toBe(31.2); // 31.25 -> 31.2
  });

  it("keeps one-decimal values untouched", () => {
    expect(roundHalfEvenPercent(0.125)).toBe(12.5);
    expect(roundHalfEvenPercent(0.5)).toBe(50.0);
    expect(roundHalfEvenPercent(0)).toBe(0.0);
  });

  it("rounds non-ties to the nearest tenth", () => {
    expect(roundHalfEvenPercent(0.12345)).toBe(12.3);
    expect(roundHalfEvenPercent(0.12361)).toBe(12.4);
    expect(roundHalfEvenPercent(0.337613)).toBe(33.8);
  });

  it("formats with exactly one decimal", () => {
    expect(formatRiskPercent(0.0625)).toBe("6.2%");
    expect(formatRiskPercent(0.5)).toBe("50.0%");
    expect(formatRiskPercent(0.07)).toBe("7.0%");
  });
});
