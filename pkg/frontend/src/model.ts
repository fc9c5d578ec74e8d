/**
 * View-model: pure mappings from service payloads to renderable structures.
 *
 * Everything here is derived strictly from the server response; the client
 * never re-computes decisions or posteriors.
 */

import type { StatePayload, CellPayload, WhatIfPayload } from "./api.js";

export interface GridCellVM {
  i: number;
  j: number;
  label: string;
  counts: string;
  xi: number;
  excluded: boolean;
  isCurrent: boolean;
  isRecommended: boolean;
  candidate: "E" | "S" | "D" | null;
  cssClasses: string[];
}

export interface GridVM {
  /** Rows ordered for display: highest agent-A level first. */
  rows: GridCellVM[][];
  banner: string;
  recommendationText: string;
  stopped: boolean;
  version: number;
  enrolled: number;
  cohortSize: number;
}

function cellLabel(i: number, j: number): string {
  return `d${i}${j}`;
}

function cssFor(cell: CellPayload, recommended: boolean): string[] {
  const classes = ["cell"];
  if (cell.excluded) classes.push("excluded");
  if (cell.is_current) classes.push("current");
  if (recommended) classes.push("recommended");
  if (cell.candidate_set === "E") classes.push("cand-escalate");
  if (cell.candidate_set === "S") classes.push("cand-stay");
  if (cell.candidate_set === "D") classes.push("cand-deescalate");
  return classes;
}

export function gridViewModel(state: StatePayload): GridVM {
  const rec = state.recommendation;
  const recDc = rec.dc;
  const byCoord = new Map<string, CellPayload>();
  for (const cell of state.cells) {
    byCoord.set(`${cell.i},${cell.j}`, cell);
  }
  const rows: GridCellVM[][] = [];
  for (let i = state.grid.levels_a; i >= 1; i--) {
    const row: GridCellVM[] = [];
    for (let j = 1; j <= state.grid.levels_b; j++) {
      const cell = byCoord.get(`${i},${j}`);
      if (!cell) throw new Error(`state payload is missing cell (${i},${j})`);
      const recommended = recDc !== null && recDc[0] === i && recDc[1] === j;
      row.push({
        i,
        j,
        label: cellLabel(i, j),
        counts: `${cell.y}/${cell.n}`,
        xi: cell.xi,
        excluded: cell.excluded,
        isCurrent: cell.is_current,
        isRecommended: recommended,
        candidate: cell.candidate_set,
        cssClasses: cssFor(cell, recommended),
      });
    }
    rows.push(row);
  }

  const stopped = state.stage === "stopped";
  let banner: string;
  if (stopped) {
    banner =
      state.stop_reason === "d11_toxic"
        ? "Trial stopped: the lowest combination is overly toxic"
        : "Trial stopped: maximum sample size reached";
  } else if (state.stage === "stage1") {
    banner = "Stage I: escalation along the run-in path";
  } else {
    banner = "Stage II: adaptive exploration";
  }

  let recommendationText: string;
  if (recDc === null) {
    recommendationText = "No further cohorts; finalize to select the MTDC";
  } else {
    const dec = rec.decision ? `decision ${rec.decision}, ` : "";
    recommendationText = `${dec}next cohort at ${cellLabel(recDc[0], recDc[1])}`;
  }

  return {
    rows,
    banner,
    recommendationText,
    stopped,
    version: state.version,
    enrolled: state.enrolled,
    cohortSize: state.cohort_size,
  };
}

export interface WhatIfRowVM {
  dlt: number;
  decision: string;
  outcome: string;
}

export function whatIfRow(preview: WhatIfPayload): WhatIfRowVM {
  const next = preview.next;
  let outcome: string;
  if (next.dc === null) {
    outcome = next.stop_reason === "d11_toxic" ? "stop (lowest combination toxic)" : "stop (max N)";
  } else {
    outcome = cellLabel(next.dc[0], next.dc[1]);
  }
  return { dlt: preview.dlt, decision: preview.decision ?? "-", outcome };
}

export interface HistoryRowVM {
  cohort: number;
  dc: string;
  dlt: number;
  stage: string;
}

export function historyRows(state: StatePayload): HistoryRowVM[] {
  return state.history.map((entry) => ({
    cohort: entry.cohort,
    dc: cellLabel(entry.dc[0], entry.dc[1]),
    dlt: entry.dlt,
    stage: entry.stage === "stage1" ? "I" : "II",
  }));
}
