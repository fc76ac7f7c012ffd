/**
 * Wire types for the allocation service's /api/v1 JSON payloads.
 * These mirror the service responses field by field; the UI never
 * derives numbers of its own from them.
 */

export interface RegionPayload {
  name: string;
  demand: number;
  severity: number;
  history: Array<{ date: string; active: number }>;
}

export interface ScenarioConfigPayload {
  horizon: number;
  smoothing_level: number;
  smoothing_trend: number;
  redistribution: string;
  district_strategy: string;
  prepass_recheck: boolean;
  conservation_tol: number;
}

export interface ScenarioPayload {
  name: string;
  resource_name: string;
  supply: number;
  regions: RegionPayload[];
  config: ScenarioConfigPayload;
  id: string | null;
}

/** A scenario as returned by GET/POST/PATCH, with its revision token. */
export interface VersionedScenario {
  scenario: ScenarioPayload;
  revision: number;
}

export interface ScenarioSummary {
  id: string;
  name: string;
  resource_name: string;
  supply: number;
  region_count: number;
  revision: number;
}

export interface PrepassPayload {
  satisfied: Record<string, number>;
  remaining_supply: number;
  balance_demand: number;
}

export interface OptimizedPayload {
  regions: string[];
  ideals: Record<string, number>;
  fractions: Record<string, number>;
  amounts: Record<string, number>;
  multiplier: number;
  active_set: string[];
  kkt_residual: number;
}

export interface PlanPayload {
  schema: string;
  resource: string;
  level: string;
  redistribution: string;
  conservation_total: number;
  regions: string[];
  demands: Record<string, number>;
  stage_ideal: Record<string, number> | null;
  stage_prepass: PrepassPayload | null;
  stage_optimized: OptimizedPayload | null;
  stage_final: Record<string, number>;
  surplus: number;
}

export interface SolveResponse {
  scenario_id: string;
  revision: number;
  plan: PlanPayload;
}

export interface SolveOptions {
  level?: 'center' | 'district' | 'proportional';
  redistribution?: 'proportional' | 'equal';
  use_fixture_predicted?: boolean;
}

export interface ForecastEntry {
  region: string;
  fitted_level: number;
  fitted_trend: number;
  predicted: number[];
  horizon_max: number;
}

export interface ForecastResponse {
  scenario_id: string;
  revision: number;
  horizon: number;
  forecasts: ForecastEntry[];
}

export interface Violation {
  region: string;
  field: string;
  message: string;
}

/** Fields the PATCH endpoint accepts for a region row. */
export interface RegionPatch {
  name: string;
  demand?: number;
  severity?: number;
}

export interface ScenarioPatch {
  name?: string;
  supply?: number;
  regions?: RegionPatch[];
  config?: Partial<ScenarioConfigPayload>;
}
