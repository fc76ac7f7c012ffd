/**
 * Number formatting shared by every view.  All quantities render at two
 * decimals with halves away from zero, matching the engine's tables.
 */

/** Round to 2 decimals, halves away from zero. */
export function round2(x: number): number {
  if (!Number.isFinite(x)) return x;
  // re-quantize before rounding so 1.005 * 100 = 100.4999... still goes up
  const scaled = Number((Math.abs(x) * 100).toPrecision(12));
  return (Math.sign(x) || 1) * (Math.round(scaled) / 100);
}

export function fmt2(x: number): string {
  return round2(x).toFixed(2);
}

/** Two decimals with an explicit sign, for delta columns. */
export function fmtSigned(x: number): string {
  const r = round2(x);
  return r > 0 ? `+${r.toFixed(2)}` : r.toFixed(2);
}

export function escapeHtml(value: unknown): string {
  return String(value ?? '')
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}
