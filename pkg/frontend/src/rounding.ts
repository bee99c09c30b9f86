/** Display rule: risks are shown as percentages rounded half-even to one decimal. */

const HALF_EPS = 1e-9;

/** Round a risk in [0,1] to a percentage with one decimal, ties to even. */
export function roundHalfEvenPercent(risk: number): number {
  const scaled = risk * 1000; // tenths of a percent
  const floor = Math.floor(scaled);
  const frac = scaled - floor;
  let tenths: number;
  if (Math.abs(frac - 0.5) < HALF_EPS) {
    tenths = floor % 2 === 0 ? floor : floor + 1;
  } else {
    tenths = Math.round(scaled);
  }
  return tenths / 10;
}

export function formatRiskPercent(risk: number): string {
  return `${roundHalfEvenPercent(risk).toFixed(1)}%`;
}
