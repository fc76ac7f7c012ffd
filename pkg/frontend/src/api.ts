/**
 * Typed client for the allocation service.
 *
 * Revision handling: every scenario read captures the ETag; every write
 * sends it back as If-Match.  A 409 surfaces as ConflictError carrying
 * the revision currently stored, so callers can reload and retry.
 */

import type {
  ForecastResponse,
  ScenarioPatch,
  ScenarioPayload,
  ScenarioSummary,
  SolveOptions,
  SolveResponse,
  VersionedScenario,
  Violation,
} from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = 'ApiError';
  }
}

/** A write raced another editor; `storedRevision` is what the server has now. */
export class ConflictError extends ApiError {
  constructor(message: string, readonly storedRevision: number) {
    super(message, 409);
    this.name = 'ConflictError';
  }
}

/** The scenario payload was rejected; one entry per offending field. */
export class ValidationError extends ApiError {
  constructor(message: string, readonly violations: Violation[], status: number) {
    super(message, status);
    this.name = 'ValidationError';
  }
}

/** A solve or forecast failed inside the engine at a named pipeline stage. */
export class StageError extends ApiError {
  constructor(message: string, readonly stage: string, status: number) {
    super(message, status);
    this.name = 'StageError';
  }
}

export interface ClientOptions {
  /** Service origin, e.g. http://127.0.0.1:8000; empty for same-origin. */
  baseUrl?: string;
  /** Injectable fetch for tests. */
  fetchImpl?: typeof fetch;
}

const API = '/api/v1';

function parseEtag(response: Response): number {
  const raw = response.headers.get('etag') ?? '';
  const token = raw.replace(/^W\//, '').replace(/"/g, '').trim();
  const revision = Number(token);
  return Number.isFinite(revision) ? revision : 0;
}

export class AllocationClient {
  private readonly baseUrl: string;
  private readonly doFetch: typeof fetch;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? '').replace(/\/+$/, '');
    this.doFetch = options.fetchImpl ?? globalThis.fetch.bind(globalThis);
  }

  async listScenarios(): Promise<ScenarioSummary[]> {
    const response = await this.request('GET', `${API}/scenarios`);
    const body = (await response.json()) as { scenarios: ScenarioSummary[] };
    return body.scenarios;
  }

  async getScenario(id: string): Promise<VersionedScenario> {
    const response = await this.request('GET', `${API}/scenarios/${id}`);
    return this.versioned(response);
  }

  async createScenario(scenario: Partial<ScenarioPayload>): Promise<VersionedScenario> {
    const response = await this.request('POST', `${API}/scenarios`, scenario);
    return this.versioned(response);
  }

  /**
   * Apply a partial edit under optimistic concurrency.  Pass the revision
   * from the last read; a stale one rejects with ConflictError.
   */
  async patchScenario(
    id: string,
    patch: ScenarioPatch,
    revision: number,
  ): Promise<VersionedScenario> {
    const response = await this.request('PATCH', `${API}/scenarios/${id}`, patch, {
      'If-Match': `"${revision}"`,
    });
    return this.versioned(response);
  }

  async deleteScenario(id: string): Promise<void> {
    await this.request('DELETE', `${API}/scenarios/${id}`);
  }

  /** Run the allocation waterfall server-side; never mutates the scenario. */
  async solve(id: string, options: SolveOptions = {}): Promise<SolveResponse> {
    const response = await this.request('POST', `${API}/scenarios/${id}/solve`, options);
    return (await response.json()) as SolveResponse;
  }

  async forecast(id: string, horizon?: number): Promise<ForecastResponse> {
    const query = horizon === undefined ? '' : `?horizon=${horizon}`;
    const response = await this.request('GET', `${API}/scenarios/${id}/forecast${query}`);
    return (await response.json()) as ForecastResponse;
  }

  /** The bundled oxygen scenario, ready to POST as a new scenario. */
  async caseStudy(): Promise<ScenarioPayload> {
    const response = await this.request('GET', `${API}/fixtures/case-study`);
    return (await response.json()) as ScenarioPayload;
  }

  private async request(
    method: string,
    path: string,
    body?: unknown,
    headers: Record<string, string> = {},
  ): Promise<Response> {
    const init: RequestInit = { method, headers: { ...headers } };
    if (body !== undefined) {
      init.headers = { 'Content-Type': 'application/json', ...headers };
      init.body = JSON.stringify(body);
    }
    const response = await this.doFetch(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      await raise(response);
    }
    return response;
  }

  private async versioned(response: Response): Promise<VersionedScenario> {
    const scenario = (await response.json()) as ScenarioPayload & { revision?: number };
    const revision = scenario.revision ?? parseEtag(response);
    delete scenario.revision;
    return { scenario, revision };
  }
}

async function raise(response: Response): Promise<never> {
  let payload: Record<string, unknown> = {};
  try {
    payload = (await response.json()) as Record<string, unknown>;
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  const message =
    typeof payload.error === 'string'
      ? payload.error
      : `request failed with status ${response.status}`;
  if (response.status === 409) {
    throw new ConflictError(message, Number(payload.revision ?? 0));
  }
  if (Array.isArray(payload.violations)) {
    throw new ValidationError(message, payload.violations as Violation[], response.status);
  }
  if (typeof payload.stage === 'string') {
    throw new StageError(message, payload.stage, response.status);
  }
  throw new ApiError(message, response.status);
}
