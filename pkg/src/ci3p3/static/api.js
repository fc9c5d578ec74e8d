/**
 * Typed client for the conduct service JSON API.
 *
 * All decision logic lives server-side; this module only moves payloads.
 */
export class ApiError extends Error {
    status;
    body;
    constructor(status, body) {
        super(body.message);
        this.status = status;
        this.body = body;
    }
}
async function request(base, method, path, body) {
    const response = await fetch(base + path, {
        method,
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
        throw new ApiError(response.status, payload);
    }
    return payload;
}
export class ConductApi {
    base;
    constructor(base = "") {
        this.base = base;
    }
    createTrial(design, grid) {
        return request(this.base, "POST", "/trials", { design, grid });
    }
    getState(trialId) {
        return request(this.base, "GET", `/trials/${trialId}`);
    }
    postCohort(trialId, dc, dlt, version, override = false) {
        return request(this.base, "POST", `/trials/${trialId}/cohorts`, {
            dc: { i: dc[0], j: dc[1] },
            dlt,
            version,
            override,
        });
    }
    whatIf(trialId, dlt) {
        return request(this.base, "POST", `/trials/${trialId}/what-if`, { dlt });
    }
    finalize(trialId) {
        return request(this.base, "POST", `/trials/${trialId}/finalize`);
    }
}
