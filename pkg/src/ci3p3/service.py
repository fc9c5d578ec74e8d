"""HTTP/JSON conduct service: persistent trials as versioned state machines.

Per-trial persistence is an append-only event log (``events.ndjson``) plus
a convenience snapshot; the log replayed through the engine is the source
of truth.  Mutations take an expected version (optimistic concurrency) and
are serialized per trial, so exactly one of two concurrent submissions for
the same version can win.

Endpoints (JSON bodies):
  POST /trials                      {design?, grid?}        -> created record
  GET  /trials/{id}                                          -> full snapshot
  GET  /trials/{id}/recommendation                           -> next assignment
  POST /trials/{id}/cohorts         {dc:{i,j}, dlt, version, override?}
  POST /trials/{id}/what-if         {dlt}                    -> preview, no mutation
  GET  /trials/{id}/decision-table                           -> table cells
  POST /trials/{id}/finalize                                 -> MTDC report
Static assets for the companion UI are served under /.
"""

from __future__ import annotations

import json
import re
import secrets
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from .engine import (
    DesignParams,
    TrialError,
    TrialState,
    enrolled,
    new_trial,
    next_assignment,
    params_from_dict,
    params_to_dict,
    record_cohort,
    state_to_dict,
)
from .grid import DoseGrid, adjacent_sets
from .rules import decision_table
from .selection import select_mtdc, selection_report

RECORD_SCHEMA = "ci3p3-record/1"
SNAPSHOT_EVERY = 5


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str, detail: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.detail = detail or {}


class NotFound(ServiceError):
    def __init__(self, trial_id: str):
        super().__init__(404, "not_found", f"no trial {trial_id!r}")


class VersionConflict(ServiceError):
    def __init__(self, expected: int, actual: int):
        super().__init__(
            409,
            "version_conflict",
            f"expected version {expected} but trial is at {actual}",
            {"expected": expected, "actual": actual},
        )


@dataclass
class TrialRecord:
    trial_id: str
    state: TrialState
    version: int = 0
    events: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class TrialStore:
    """Trials on disk under ``data_dir/trials/{id}/`` with in-memory cache."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        (self.root / "trials").mkdir(parents=True, exist_ok=True)
        self._records: dict[str, TrialRecord] = {}
        self._registry_lock = threading.Lock()

    def _dir(self, trial_id: str) -> Path:
        return self.root / "trials" / trial_id

    def _append_event(self, trial_id: str, event: dict) -> None:
        with (self._dir(trial_id) / "events.ndjson").open("a") as fh:
            fh.write(json.dumps(event) + "\n")

    def _write_snapshot(self, record: TrialRecord) -> None:
        doc = {
            "schema": RECORD_SCHEMA,
            "id": record.trial_id,
            "version": record.version,
            "state": state_to_dict(record.state),
        }
        (self._dir(record.trial_id) / "snapshot.json").write_text(json.dumps(doc, indent=2))

    def create(self, grid: DoseGrid, params: DesignParams) -> TrialRecord:
        trial_id = secrets.token_hex(8)
        self._dir(trial_id).mkdir(parents=True)
        state = new_trial(grid, params)
        event = {
            "type": "created",
            "ts": time.time(),
            "grid": {"levels_a": grid.levels_a, "levels_b": grid.levels_b},
            "params": params_to_dict(params),
        }
        record = TrialRecord(trial_id=trial_id, state=state, version=0, events=[event])
        self._append_event(trial_id, event)
        self._write_snapshot(record)
        with self._registry_lock:
            self._records[trial_id] = record
        return record

    def get(self, trial_id: str) -> TrialRecord:
        if not re.fullmatch(r"[0-9a-f]{16}", trial_id or ""):
            raise NotFound(trial_id)
        with self._registry_lock:
            record = self._records.get(trial_id)
            if record is not None:
                return record
        record = self._load(trial_id)
        with self._registry_lock:
            return self._records.setdefault(trial_id, record)

    def _load(self, trial_id: str) -> TrialRecord:
        log_path = self._dir(trial_id) / "events.ndjson"
        if not log_path.exists():
            raise NotFound(trial_id)
        events = [json.loads(line) for line in log_path.read_text().splitlines() if line.strip()]
        if not events or events[0].get("type") != "created":
            raise ServiceError(500, "corrupt_log", f"trial {trial_id} event log has no creation event")
        head = events[0]
        grid = DoseGrid(int(head["grid"]["levels_a"]), int(head["grid"]["levels_b"]))
        state = new_trial(grid, params_from_dict(head["params"]))
        version = 0
        for event in events[1:]:
            if event.get("type") != "cohort":
                continue
            record_cohort(state, (int(event["dc"][0]), int(event["dc"][1])), int(event["dlt"]))
            version += 1
        return TrialRecord(trial_id=trial_id, state=state, version=version, events=events)

    def post_cohort(
        self,
        trial_id: str,
        dc: tuple[int, int],
        dlt: int,
        expected_version: int,
        override: bool = False,
    ) -> TrialRecord:
        record = self.get(trial_id)
        with record.lock:
            if expected_version != record.version:
                raise VersionConflict(expected_version, record.version)
            recommendation = next_assignment(record.state)
            if recommendation.coord is None:
                raise ServiceError(400, "trial_stopped", "trial has stopped; no further cohorts")
            if dc != recommendation.coord and not override:
                raise ServiceError(
                    400,
                    "off_recommendation",
                    f"dc {list(dc)} is not the recommended {list(recommendation.coord)}; "
                    "set override to record it anyway",
                    {"recommended": list(recommendation.coord)},
                )
            try:
                record_cohort(record.state, dc, dlt)
            except (TrialError, ValueError) as exc:
                raise ServiceError(400, "invalid_cohort", str(exc)) from exc
            record.version += 1
            event = {
                "type": "cohort",
                "ts": time.time(),
                "dc": list(dc),
                "dlt": dlt,
                "version": record.version,
                "override": bool(override),
            }
            record.events.append(event)
            self._append_event(trial_id, event)
            if record.version % SNAPSHOT_EVERY == 0:
                self._write_snapshot(record)
            return record


# -- payload builders --------------------------------------------------------


def _assignment_payload(assignment) -> dict:
    return {
        "dc": list(assignment.coord) if assignment.coord else None,
        "stop_reason": assignment.stop.value if assignment.stop else None,
        "decision": assignment.decision.value if assignment.decision else None,
        "rule": assignment.rule,
        "candidates": [
            {"dc": list(c), "xi": xi} for c, xi in assignment.considered
        ],
    }


def state_payload(record: TrialRecord) -> dict:
    state = record.state
    tables = state.tables
    recommendation = next_assignment(state)
    sets = adjacent_sets(state.grid, state.current)
    membership: dict[tuple[int, int], str] = {}
    for name, coords in (
        ("E", sets.escalate),
        ("S", sets.stay),
        ("D", sets.deescalate),
    ):
        for c in coords:
            membership[c] = name
    cells = []
    for coord in state.grid.coords():
        y, n = state.counts(coord)
        cells.append(
            {
                "i": coord[0],
                "j": coord[1],
                "y": y,
                "n": n,
                "xi": tables.xi(y, n),
                "excluded": state.is_excluded(coord),
                "is_current": coord == state.current and bool(state.log),
                "candidate_set": membership.get(coord),
            }
        )
    return {
        "id": record.trial_id,
        "version": record.version,
        "stage": state.stage.value,
        "stop_reason": state.stop_reason.value if state.stop_reason else None,
        "grid": {"levels_a": state.grid.levels_a, "levels_b": state.grid.levels_b},
        "params": params_to_dict(state.params),
        "enrolled": enrolled(state),
        "cohort_size": state.params.cohort_size,
        "cells": cells,
        "recommendation": _assignment_payload(recommendation),
        "history": [
            {"cohort": k + 1, "dc": list(rec.coord), "dlt": rec.dlt, "stage": rec.stage.value}
            for k, rec in enumerate(state.log)
        ],
    }


def what_if_payload(record: TrialRecord, dlt: int) -> dict:
    state = record.state
    recommendation = next_assignment(state)
    if recommendation.coord is None:
        raise ServiceError(400, "trial_stopped", "trial has stopped; nothing to preview")
    if not 0 <= dlt <= state.params.cohort_size:
        raise ServiceError(400, "invalid_dlt", f"dlt must be in [0, {state.params.cohort_size}]")
    preview = state.clone()
    record_cohort(preview, recommendation.coord, dlt)
    outcome = next_assignment(preview)
    return {
        "dlt": dlt,
        "treated": list(recommendation.coord),
        "decision": outcome.decision.value if outcome.decision else None,
        "next": _assignment_payload(outcome),
        "would_stop": outcome.coord is None,
    }


def decision_table_payload(record: TrialRecord) -> dict:
    params = record.state.params
    table = decision_table(
        params.ei, n_max=params.max_n, threshold=params.exclusion_threshold
    )
    return {
        "target": params.ei.target,
        "interval": [params.ei.lower, params.ei.upper],
        "n_max": table.n_max,
        "cells": [
            {"n": n, "y": y, "decision": dec.value} for n, y, dec in table.rows()
        ],
    }


# -- HTTP plumbing ------------------------------------------------------------

_ROUTES = (
    ("POST", re.compile(r"^/trials$"), "create_trial"),
    ("GET", re.compile(r"^/trials/([0-9a-f]+)$"), "get_trial"),
    ("GET", re.compile(r"^/trials/([0-9a-f]+)/recommendation$"), "get_recommendation"),
    ("POST", re.compile(r"^/trials/([0-9a-f]+)/cohorts$"), "post_cohort"),
    ("POST", re.compile(r"^/trials/([0-9a-f]+)/what-if$"), "what_if"),
    ("GET", re.compile(r"^/trials/([0-9a-f]+)/decision-table$"), "get_decision_table"),
    ("POST", re.compile(r"^/trials/([0-9a-f]+)/finalize$"), "finalize"),
)

_MIME = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript",
    ".css": "text/css",
    ".map": "application/json",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
}


class ConductHandler(BaseHTTPRequestHandler):
    store: TrialStore
    static_dir: Optional[Path]

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            raise ServiceError(400, "bad_json", f"request body is not valid JSON: {exc}") from exc

    def _dispatch(self, method: str) -> None:
        path = self.path.split("?", 1)[0]
        try:
            for verb, pattern, name in _ROUTES:
                if verb != method:
                    continue
                match = pattern.match(path)
                if match:
                    getattr(self, name)(*match.groups())
                    return
            if method == "GET" and self._serve_static(path):
                return
            raise ServiceError(404, "not_found", f"no route for {method} {path}")
        except ServiceError as exc:
            self._send_json(
                exc.status, {"code": exc.code, "message": str(exc), "detail": exc.detail}
            )
        except Exception as exc:  # pragma: no cover - last-resort guard
            self._send_json(500, {"code": "internal", "message": str(exc), "detail": {}})

    def do_GET(self):  # noqa: N802 - http.server API
        self._dispatch("GET")

    def do_POST(self):  # noqa: N802
        self._dispatch("POST")

    # -- handlers -----------------------------------------------------------

    def _locked_payload(self, record: TrialRecord) -> dict:
        with record.lock:
            return state_payload(record)

    def create_trial(self) -> None:
        body = self._read_json()
        try:
            params = params_from_dict(body.get("design", {}))
            grid_cfg = body.get("grid", {})
            grid = DoseGrid(int(grid_cfg.get("levels_a", 4)), int(grid_cfg.get("levels_b", 4)))
        except ValueError as exc:
            raise ServiceError(400, "bad_design", str(exc)) from exc
        record = self.store.create(grid, params)
        self._send_json(201, self._locked_payload(record))

    def get_trial(self, trial_id: str) -> None:
        self._send_json(200, self._locked_payload(self.store.get(trial_id)))

    def get_recommendation(self, trial_id: str) -> None:
        record = self.store.get(trial_id)
        with record.lock:
            payload = _assignment_payload(next_assignment(record.state))
            payload["version"] = record.version
        self._send_json(200, payload)

    def post_cohort(self, trial_id: str) -> None:
        body = self._read_json()
        try:
            dc = (int(body["dc"]["i"]), int(body["dc"]["j"]))
            dlt = int(body["dlt"])
            version = int(body["version"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(
                400, "bad_request", "body must carry dc:{i,j}, dlt and version"
            ) from exc
        record = self.store.post_cohort(
            trial_id, dc, dlt, version, override=bool(body.get("override", False))
        )
        self._send_json(200, self._locked_payload(record))

    def what_if(self, trial_id: str) -> None:
        body = self._read_json()
        record = self.store.get(trial_id)
        if "dlt" not in body:
            raise ServiceError(400, "bad_request", "body must carry dlt")
        with record.lock:
            payload = what_if_payload(record, int(body["dlt"]))
            payload["version"] = record.version
        self._send_json(200, payload)

    def get_decision_table(self, trial_id: str) -> None:
        self._send_json(200, decision_table_payload(self.store.get(trial_id)))

    def finalize(self, trial_id: str) -> None:
        record = self.store.get(trial_id)
        with record.lock:
            result = select_mtdc(record.state)
            payload = selection_report(result)
            payload["version"] = record.version
            payload["stopped"] = record.state.stage.value == "stopped"
            payload["overrides"] = [
                e["version"] for e in record.events if e.get("type") == "cohort" and e.get("override")
            ]
        self._send_json(200, payload)

    # -- static assets --------------------------------------------------------

    def _serve_static(self, path: str) -> bool:
        if self.static_dir is None:
            return False
        rel = path.lstrip("/") or "index.html"
        target = (self.static_dir / rel).resolve()
        try:
            target.relative_to(self.static_dir.resolve())
        except ValueError:
            return False
        if not target.is_file():
            return False
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", _MIME.get(target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)
        return True


def default_static_dir() -> Optional[Path]:
    bundled = Path(__file__).parent / "static"
    return bundled if bundled.is_dir() else None


def make_server(
    host: str, port: int, data_dir: str | Path, static_dir: str | Path | None = None
) -> ThreadingHTTPServer:
    store = TrialStore(data_dir)
    static = Path(static_dir) if static_dir else default_static_dir()

    class BoundHandler(ConductHandler):
        pass

    BoundHandler.store = store
    BoundHandler.static_dir = static
    return ThreadingHTTPServer((host, port), BoundHandler)
