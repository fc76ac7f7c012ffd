/**
 * What-if comparison between two solved plans: a pinned baseline and the
 * latest solve.  Pure data + rendering; all amounts come from the service.
 */

import { escapeHtml, fmt2, fmtSigned, round2 } from './format.js';
import type { PlanPayload } from './types.js';

export interface CompareRow {
  region: string;
  baseline: number;
  candidate: number;
  delta: number;
}

/**
 * Per-region final-allocation differences (candidate minus baseline),
 * sorted by absolute change, largest first.  The two plans must cover the
 * same regions; comparing mismatched sets would silently drop rows, so it
 * raises instead and names the regions on each side only.
 */
export function comparePlans(baseline: PlanPayload, candidate: PlanPayload): CompareRow[] {
  const left = new Set(baseline.regions);
  const right = new Set(candidate.regions);
  const onlyLeft = baseline.regions.filter((r) => !right.has(r)).sort();
  const onlyRight = candidate.regions.filter((r) => !left.has(r)).sort();
  if (onlyLeft.length > 0 || onlyRight.length > 0) {
    const parts: string[] = [];
    if (onlyLeft.length > 0) parts.push(`only in baseline: ${onlyLeft.join(', ')}`);
    if (onlyRight.length > 0) parts.push(`only in candidate: ${onlyRight.join(', ')}`);
    throw new Error(`plans cover different regions (${parts.join('; ')})`);
  }

  const rows = baseline.regions.map((region) => {
    const before = baseline.stage_final[region];
    const after = candidate.stage_final[region];
    return { region, baseline: before, candidate: after, delta: after - before };
  });
  rows.sort(
    (a, b) => Math.abs(b.delta) - Math.abs(a.delta) || a.region.localeCompare(b.region),
  );
  return rows;
}

/** Side-by-side table of the comparison, deltas signed and 2-decimal. */
export function whatifView(baseline: PlanPayload, candidate: PlanPayload): string {
  let rows: CompareRow[];
  try {
    rows = comparePlans(baseline, candidate);
  } catch (error) {
    const message = error instanceof Error ? error.message : String(error);
    return `<div class="whatif-error" role="alert">${escapeHtml(message)}</div>`;
  }

  const body = rows
    .map((row) => {
      const changed = round2(row.delta) !== 0 ? ' class="changed"' : '';
      return `<tr${changed}><td>${escapeHtml(row.region)}</td><td>${fmt2(row.baseline)}</td>` +
        `<td>${fmt2(row.candidate)}</td><td>${fmtSigned(row.delta)}</td></tr>`;
    })
    .join('\n');

  return `<section class="whatif-view">
<h3>What-if comparison</h3>
<table>
  <thead><tr><th>Region</th><th>Baseline</th><th>Candidate</th><th>&Delta;</th></tr></thead>
  <tbody>
${body}
  </tbody>
</table>
</section>`;
}
