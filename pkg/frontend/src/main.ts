/**
 * Browser bootstrap.  Wires the rendered views to the allocation service:
 * edits PATCH with optimistic concurrency, solves re-render the staged
 * tables, and a pinned baseline enables the what-if comparison.
 */

import { AllocationClient, ConflictError, StageError } from './api.js';
import {
  allocationView,
  applyPatch,
  editToPatch,
  scenarioEditorView,
  stageErrorView,
} from './views.js';
import type { EditableField, FieldErrors } from './views.js';
import type { PlanPayload, ScenarioPayload } from './types.js';
import { whatifView } from './whatif.js';

interface AppState {
  scenarioId: string;
  revision: number;
  scenario: ScenarioPayload;
  plan: PlanPayload | null;
  baseline: PlanPayload | null;
  errors: FieldErrors;
  conflict: { storedRevision: number } | null;
  solveError: string | null;
}

async function boot(root: HTMLElement): Promise<void> {
  const client = new AllocationClient();
  let state: AppState;

  function render(): void {
    const parts = [
      scenarioEditorView(state.scenario, state.revision, {
        errors: state.errors,
        conflict: state.conflict,
      }),
    ];
    if (state.solveError) parts.push(state.solveError);
    else if (state.plan) parts.push(allocationView(state.plan));
    if (state.baseline && state.plan && !state.solveError) {
      parts.push(whatifView(state.baseline, state.plan));
    }
    root.innerHTML = parts.join('\n');
  }

  async function reload(): Promise<void> {
    const stored = await client.getScenario(state.scenarioId);
    state.scenario = stored.scenario;
    state.revision = stored.revision;
    state.conflict = null;
    state.errors = {};
    render();
  }

  async function solve(): Promise<void> {
    try {
      const result = await client.solve(state.scenarioId);
      state.plan = result.plan;
      state.solveError = null;
    } catch (error) {
      if (error instanceof StageError) {
        state.solveError = stageErrorView(error.stage, error.message);
      } else {
        throw error;
      }
    }
    render();
  }

  async function applyEdit(target: HTMLInputElement): Promise<void> {
    const field = target.dataset.field as EditableField;
    const region = target.dataset.region;
    const key = region ? `${region}.${field}` : field;
    const { patch, error } = editToPatch(field, region, target.value);
    if (patch === null) {
      state.errors[key] = error;
      render();
      return;
    }
    delete state.errors[key];

    // optimistic: show the edit immediately, roll back if the write loses
    const before = state.scenario;
    state.scenario = applyPatch(before, patch);
    render();
    try {
      const stored = await client.patchScenario(state.scenarioId, patch, state.revision);
      state.scenario = stored.scenario;
      state.revision = stored.revision;
      state.conflict = null;
      render();
    } catch (err) {
      state.scenario = before;
      if (err instanceof ConflictError) {
        state.conflict = { storedRevision: err.storedRevision };
        render();
        return;
      }
      render();
      throw err;
    }
  }

  root.addEventListener('change', (event) => {
    const target = event.target as HTMLInputElement;
    if (target.matches('input[data-field]')) void applyEdit(target);
  });
  root.addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    const action = target.dataset.action;
    if (action === 'solve') void solve();
    else if (action === 'reload') void reload();
    else if (action === 'pin-baseline' && state.plan) {
      state.baseline = state.plan;
      render();
    }
  });

  const fixture = await client.caseStudy();
  const created = await client.createScenario(fixture);
  state = {
    scenarioId: created.scenario.id as string,
    revision: created.revision,
    scenario: created.scenario,
    plan: null,
    baseline: null,
    errors: {},
    conflict: null,
    solveError: null,
  };
  render();
  await solve();
}

if (typeof document !== 'undefined') {
  const root = document.getElementById('app');
  if (root) void boot(root);
}
