/**
 * Typed client for the conduct service JSON API.
 *
 * All decision logic lives server-side; this module only moves payloads.
 */

export interface CellPayload {
  i: number;
  j: number;
  y: number;
  n: number;
  xi: number;
  excluded: boolean;
  is_current: boolean;
  /** Which adjacent candidate set of the current cell this cell belongs to. */
  candidate_set: "E" | "S" | "D" | null;
}

export interface CandidatePayload {
  dc: [number, number];
  xi: number;
}

export interface RecommendationPayload {
  dc: [number, number] | null;
  stop_reason: string | null;
  decision: string | null;
  rule: string;
  candidates: CandidatePayload[];
}

export interface HistoryEntry {
  cohort: number;
  dc: [number, number];
  dlt: number;
  stage: string;
}

export interface StatePayload {
  id: string;
  version: number;
  stage: string;
  stop_reason: string | null;
  grid: { levels_a: number; levels_b: number };
  params: Record<string, unknown>;
  enrolled: number;
  cohort_size: number;
  cells: CellPayload[];
  recommendation: RecommendationPayload;
  history: HistoryEntry[];
}

export interface WhatIfPayload {
  dlt: number;
  treated: [number, number];
  decision: string | null;
  next: RecommendationPayload;
  would_stop: boolean;
  version: number;
}

export interface FinalizePayload {
  selected: [number, number] | null;
  stop_reason: string | null;
  raw_means: number[][];
  isotonic_means: number[][];
  eliminated: { dc: [number, number]; reasons: string[] }[];
  overrides: number[];
  stopped: boolean;
  version: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

async function request<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  const response = await fetch(base + path, {
    method,
    headers: { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, payload as ApiErrorBody);
  }
  return payload as T;
}

export class ConductApi {
  constructor(private readonly base: string = "") {}

  createTrial(design: Record<string, unknown>, grid: { levels_a: number; levels_b: number }): Promise<StatePayload> {
    return request<StatePayload>(this.base, "POST", "/trials", { design, grid });
  }

  getState(trialId: string): Promise<StatePayload> {
    return request<StatePayload>(this.base, "GET", `/trials/${trialId}`);
  }

  postCohort(
    trialId: string,
    dc: [number, number],
    dlt: number,
    version: number,
    override = false,
  ): Promise<StatePayload> {
    return request<StatePayload>(this.base, "POST", `/trials/${trialId}/cohorts`, {
      dc: { i: dc[0], j: dc[1] },
      dlt,
      version,
      override,
    });
  }

  whatIf(trialId: string, dlt: number): Promise<WhatIfPayload> {
    return request<WhatIfPayload>(this.base, "POST", `/trials/${trialId}/what-if`, { dlt });
  }

  finalize(trialId: string): Promise<FinalizePayload> {
    return request<FinalizePayload>(this.base, "POST", `/trials/${trialId}/finalize`);
  }
}
