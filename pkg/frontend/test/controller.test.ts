import assert from "node:assert/strict";
import { test } from "node:test";

import { ConductApi } from "../src/api.js";
import { ConductController } from "../src/controller.js";

type StubResponse = { status: number; body: unknown };

function stubFetch(script: Record<string, StubResponse[]>): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const key = `${init?.method ?? "GET"} ${url}`;
    const queue = script[key];
    if (!queue || !queue.length) throw new Error(`unexpected request ${key}`);
    const next = queue.shift()!;
    return {
      ok: next.status < 400,
      status: next.status,
      json: async () => next.body,
    } as Response;
  }) as typeof fetch;
}

function statePayload(version: number, dc: [number, number] | null = [1, 1]) {
  return {
    id: "t1",
    version,
    stage: "stage1",
    stop_reason: null,
    grid: { levels_a: 2, levels_b: 2 },
    params: {},
    enrolled: version * 3,
    cohort_size: 3,
    cells: [
      { i: 1, j: 1, y: 0, n: 0, xi: 0.1, excluded: false, is_current: true, candidate_set: "S" },
      { i: 1, j: 2, y: 0, n: 0, xi: 0.1, excluded: false, is_current: false, candidate_set: "E" },
      { i: 2, j: 1, y: 0, n: 0, xi: 0.1, excluded: false, is_current: false, candidate_set: "E" },
      { i: 2, j: 2, y: 0, n: 0, xi: 0.1, excluded: false, is_current: false, candidate_set: null },
    ],
    recommendation: { dc, stop_reason: null, decision: null, rule: "first-cohort", candidates: [] },
    history: [],
  };
}

test("submit sends the acknowledged version and adopts the response", async () => {
  const fetchStub = stubFetch({
    "GET /trials/t1": [{ status: 200, body: statePayload(0) }],
    "POST /trials/t1/cohorts": [{ status: 200, body: statePayload(1) }],
  });
  globalThis.fetch = fetchStub;
  const controller = new ConductController(new ConductApi(""));
  await controller.load("t1");
  assert.equal(controller.version, 0);
  const updated = await controller.submitCohort(0);
  assert.ok(updated);
  assert.equal(controller.version, 1);
});

test("a 409 triggers a refetch and the conflict callback, not a retry", async () => {
  let conflictMessage = "";
  const fetchStub = stubFetch({
    "GET /trials/t1": [
      { status: 200, body: statePayload(0) },
      { status: 200, body: statePayload(2) },  // refreshed after conflict
    ],
    "POST /trials/t1/cohorts": [
      {
        status: 409,
        body: { code: "version_conflict", message: "expected version 0 but trial is at 2", detail: {} },
      },
    ],
  });
  globalThis.fetch = fetchStub;
  const controller = new ConductController(new ConductApi(""), {
    onConflict: (message) => {
      conflictMessage = message;
    },
  });
  await controller.load("t1");
  const result = await controller.submitCohort(1);
  assert.equal(result, null);
  assert.match(conflictMessage, /version/);
  assert.equal(controller.version, 2);  // the acknowledged version caught up
});

test("submitting on a stopped trial is rejected client-side", async () => {
  globalThis.fetch = stubFetch({
    "GET /trials/t1": [{ status: 200, body: statePayload(3, null) }],
  });
  const controller = new ConductController(new ConductApi(""));
  await controller.load("t1");
  await assert.rejects(() => controller.submitCohort(0), /stopped/);
});

test("what-if table walks every DLT count without mutating the version", async () => {
  const previews = [0, 1, 2, 3].map((dlt) => ({
    status: 200,
    body: {
      dlt,
      treated: [1, 1],
      decision: "E",
      next: { dc: [2, 1], stop_reason: null, decision: "E", rule: "argmax-xi", candidates: [] },
      would_stop: false,
      version: 0,
    },
  }));
  globalThis.fetch = stubFetch({
    "GET /trials/t1": [{ status: 200, body: statePayload(0) }],
    "POST /trials/t1/what-if": previews,
  });
  const controller = new ConductController(new ConductApi(""));
  await controller.load("t1");
  const table = await controller.whatIfTable();
  assert.deepEqual(
    table.map((p) => p.dlt),
    [0, 1, 2, 3],
  );
  assert.equal(controller.version, 0);
});
