/**
 * Conduct session controller: owns the last-acknowledged state and version,
 * submits cohorts with optimistic concurrency, and exposes what-if previews.
 *
 * On a version conflict the controller refetches the authoritative state and
 * reports the conflict through the callback instead of retrying silently.
 */

import { ApiError, ConductApi } from "./api.js";
import type { FinalizePayload, StatePayload, WhatIfPayload } from "./api.js";

export interface ControllerEvents {
  onState?: (state: StatePayload) => void;
  onConflict?: (message: string, refreshed: StatePayload) => void;
}

export class ConductController {
  private state: StatePayload | null = null;

  constructor(
    private readonly api: ConductApi,
    private readonly events: ControllerEvents = {},
  ) {}

  get current(): StatePayload {
    if (!this.state) throw new Error("no trial loaded");
    return this.state;
  }

  get version(): number {
    return this.current.version;
  }

  private accept(state: StatePayload): StatePayload {
    this.state = state;
    this.events.onState?.(state);
    return state;
  }

  async create(design: Record<string, unknown>, grid: { levels_a: number; levels_b: number }): Promise<StatePayload> {
    return this.accept(await this.api.createTrial(design, grid));
  }

  async load(trialId: string): Promise<StatePayload> {
    return this.accept(await this.api.getState(trialId));
  }

  async refresh(): Promise<StatePayload> {
    return this.accept(await this.api.getState(this.current.id));
  }

  /**
   * Record the next cohort's DLT count at the recommended combination.
   * Returns the updated state, or null when the submission lost a version
   * race (the refreshed state is delivered through onConflict).
   */
  async submitCohort(dlt: number): Promise<StatePayload | null> {
    const state = this.current;
    const dc = state.recommendation.dc;
    if (dc === null) throw new Error("trial has stopped; nothing to submit");
    try {
      return this.accept(await this.api.postCohort(state.id, dc, dlt, state.version));
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        const refreshed = await this.refresh();
        this.events.onConflict?.(err.message, refreshed);
        return null;
      }
      throw err;
    }
  }

  whatIf(dlt: number): Promise<WhatIfPayload> {
    return this.api.whatIf(this.current.id, dlt);
  }

  /** Preview every possible outcome of the next cohort, in DLT order. */
  async whatIfTable(): Promise<WhatIfPayload[]> {
    const out: WhatIfPayload[] = [];
    for (let dlt = 0; dlt <= this.current.cohort_size; dlt++) {
      out.push(await this.whatIf(dlt));
    }
    return out;
  }

  finalize(): Promise<FinalizePayload> {
    return this.api.finalize(this.current.id);
  }
}
