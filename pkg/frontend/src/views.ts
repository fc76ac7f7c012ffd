/**
 * Pure string renderers for the dashboard.  Every number shown comes
 * straight out of a service payload; these functions format, they never
 * compute allocations.
 */

import { escapeHtml, fmt2 } from './format.js';
import type { PlanPayload, ScenarioPatch, ScenarioPayload } from './types.js';

/** Inline field errors keyed by "supply", "<region>.demand", "<region>.severity". */
export type FieldErrors = Record<string, string>;

export interface EditorState {
  errors?: FieldErrors;
  conflict?: { storedRevision: number } | null;
}

export type EditableField = 'supply' | 'demand' | 'severity';

/**
 * Validate one edited field the same way the service will.  Returns the
 * parsed value, or an error message to surface inline (in which case the
 * caller must not send a PATCH).
 */
export function validateField(
  field: EditableField,
  raw: string,
): { value: number | null; error: string | null } {
  const value = Number(raw);
  if (raw.trim() === '' || !Number.isFinite(value)) {
    return { value: null, error: 'enter a number' };
  }
  if (field === 'demand' && value < 0) {
    return { value: null, error: 'demand must be >= 0' };
  }
  if ((field === 'severity' || field === 'supply') && value <= 0) {
    return { value: null, error: `${field} must be > 0` };
  }
  return { value, error: null };
}

export type EditOutcome =
  | { patch: ScenarioPatch; error: null }
  | { patch: null; error: string };

/**
 * Turn one edited input into either a PATCH body or an inline error.
 * Invalid values never produce a patch; the bad edit stays local.
 */
export function editToPatch(
  field: EditableField,
  region: string | undefined,
  raw: string,
): EditOutcome {
  const { value, error } = validateField(field, raw);
  if (error !== null || value === null) {
    return { patch: null, error: error ?? 'enter a number' };
  }
  if (region) {
    return { patch: { regions: [{ name: region, [field]: value }] }, error: null };
  }
  return { patch: { [field]: value } as ScenarioPatch, error: null };
}

/**
 * Apply a patch to a local scenario copy, mirroring the service's merge
 * semantics: region entries update by name and keep unmentioned fields.
 * Used for the optimistic render while the PATCH is in flight.
 */
export function applyPatch(scenario: ScenarioPayload, patch: ScenarioPatch): ScenarioPayload {
  const next: ScenarioPayload = { ...scenario, regions: scenario.regions.map((r) => ({ ...r })) };
  if (patch.name !== undefined) next.name = patch.name;
  if (patch.supply !== undefined) next.supply = patch.supply;
  for (const edit of patch.regions ?? []) {
    const region = next.regions.find((r) => r.name === edit.name);
    if (!region) continue;
    if (edit.demand !== undefined) region.demand = edit.demand;
    if (edit.severity !== undefined) region.severity = edit.severity;
  }
  return next;
}

function fieldErrorSpan(errors: FieldErrors, key: string): string {
  const message = errors[key];
  return message ? `<span class="field-error">${escapeHtml(message)}</span>` : '';
}

/**
 * Editable scenario table: per-region demand and severity inputs plus the
 * supply field.  A stale-revision conflict renders as a banner with a
 * reload action instead of silently dropping the other editor's change.
 */
export function scenarioEditorView(
  scenario: ScenarioPayload,
  revision: number,
  state: EditorState = {},
): string {
  const errors = state.errors ?? {};
  const rows = scenario.regions
    .map((region) => {
      const name = escapeHtml(region.name);
      return `<tr data-region-row="${name}">
  <td>${name}</td>
  <td><input type="number" min="0" step="any" data-region="${name}" data-field="demand"
      value="${escapeHtml(String(region.demand))}">${fieldErrorSpan(errors, `${region.name}.demand`)}</td>
  <td><input type="number" step="any" data-region="${name}" data-field="severity"
      value="${escapeHtml(String(region.severity))}">${fieldErrorSpan(errors, `${region.name}.severity`)}</td>
</tr>`;
    })
    .join('\n');

  const conflict = state.conflict
    ? `<div class="conflict-banner" role="alert">
  Scenario changed elsewhere (server has revision ${state.conflict.storedRevision},
  you edited revision ${revision}). Your change was not saved.
  <button type="button" data-action="reload">Reload latest</button>
</div>`
    : '';

  return `<section class="scenario-editor" data-revision="${revision}">
${conflict}
<h2>${escapeHtml(scenario.name)} <small>(${escapeHtml(scenario.resource_name)})</small></h2>
<label class="supply-field">Total supply
  <input type="number" step="any" data-field="supply" value="${escapeHtml(String(scenario.supply))}">
  ${fieldErrorSpan(errors, 'supply')}
</label>
<table class="region-table">
  <thead><tr><th>Region</th><th>Demand</th><th>Severity</th></tr></thead>
  <tbody>
${rows}
  </tbody>
</table>
<button type="button" data-action="solve">Solve</button>
<button type="button" data-action="pin-baseline">Pin current plan as baseline</button>
</section>`;
}

/** Regions whose re-optimised amount was cut back to demand afterwards. */
export function cappedRegions(plan: PlanPayload): string[] {
  const optimized = plan.stage_optimized;
  if (!optimized) return [];
  return optimized.regions.filter(
    (region) => plan.stage_final[region] < optimized.amounts[region] - 1e-9,
  );
}

function mdTable(headers: string[], rows: string[][]): string {
  const head = headers.map((h) => `<th>${escapeHtml(h)}</th>`).join('');
  const body = rows
    .map((row) => `<tr>${row.map((cell) => `<td>${cell}</td>`).join('')}</tr>`)
    .join('\n');
  return `<table><thead><tr>${head}</tr></thead><tbody>\n${body}\n</tbody></table>`;
}

function deltaBar(demand: number, finalAmount: number): string {
  const coverage = demand > 0 ? Math.max(0, Math.min(1, finalAmount / demand)) : 1;
  const width = Math.round(100 * coverage);
  const delta = demand - finalAmount;
  return `<div class="bar" title="unmet ${fmt2(Math.max(0, delta))}">
<div class="bar-fill" style="width: ${width}%"></div></div>`;
}

/**
 * Staged allocation tables for one solved plan: ideal shares, pre-pass,
 * re-optimised amounts, and the final column with demand-coverage bars,
 * capped flags, and the conservation footer.
 */
export function allocationView(plan: PlanPayload): string {
  const sections: string[] = [
    `<h2>${escapeHtml(plan.resource)} allocation
 <small>(${escapeHtml(plan.level)} level, ${escapeHtml(plan.redistribution)} redistribution)</small></h2>`,
  ];

  if (plan.stage_ideal) {
    const ideal = plan.stage_ideal;
    sections.push('<h3>Ideal shares</h3>');
    sections.push(
      mdTable(
        ['Region', 'Ideal'],
        Object.keys(ideal).map((region) => [escapeHtml(region), fmt2(ideal[region])]),
      ),
    );
  }

  if (plan.stage_prepass) {
    const prepass = plan.stage_prepass;
    sections.push('<h3>Fully met in pre-pass</h3>');
    sections.push(
      mdTable(
        ['Region', 'Allocated'],
        Object.keys(prepass.satisfied).map((region) => [
          escapeHtml(region),
          fmt2(prepass.satisfied[region]),
        ]),
      ),
    );
    sections.push(
      `<p>Remaining supply ${fmt2(prepass.remaining_supply)},
 balance demand ${fmt2(prepass.balance_demand)}.</p>`,
    );
  }

  if (plan.stage_optimized) {
    const optimized = plan.stage_optimized;
    sections.push('<h3>Re-optimised</h3>');
    sections.push(
      mdTable(
        ['Region', 'Ideal', 'Amount'],
        optimized.regions.map((region) => [
          escapeHtml(region),
          fmt2(optimized.ideals[region]),
          fmt2(optimized.amounts[region]),
        ]),
      ),
    );
  }

  const capped = new Set(cappedRegions(plan));
  sections.push('<h3>Final allocation</h3>');
  sections.push(
    mdTable(
      ['Region', 'Demand', 'Final', 'Coverage', ''],
      plan.regions.map((region) => [
        escapeHtml(region),
        fmt2(plan.demands[region]),
        fmt2(plan.stage_final[region]),
        deltaBar(plan.demands[region], plan.stage_final[region]),
        capped.has(region) ? '<span class="flag-capped">capped</span>' : '',
      ]),
    ),
  );

  const total = plan.regions.reduce((sum, region) => sum + plan.stage_final[region], 0);
  const surplus = plan.surplus > 0 ? `, surplus ${fmt2(plan.surplus)}` : '';
  sections.push(
    `<p class="conservation-footer">Total allocated ${fmt2(total)}
 of ${fmt2(plan.conservation_total)}${surplus}.</p>`,
  );

  return `<section class="allocation-view">\n${sections.join('\n')}\n</section>`;
}

/** A solve rejected by the engine, rendered with its pipeline stage. */
export function stageErrorView(stage: string, message: string): string {
  return `<div class="stage-error" role="alert">
Solve failed at the <strong>${escapeHtml(stage)}</strong> stage: ${escapeHtml(message)}
</div>`;
}
