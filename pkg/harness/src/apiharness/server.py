"""Stdio serve loop: one JSON request per line, one JSON response per line.

Requests and responses strictly alternate. Malformed requests and unknown
actions produce an error response; the loop always keeps serving.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from apiharness.catalog import CatalogError, scan_library
from apiharness.executor import execute_program
from apiharness.instrument import DEFAULT_VALUE_CAP, InstrumentError, instrument_program


def handle_request(request: dict) -> dict:
    action = request.get("action")
    if action == "catalog":
        try:
            records = scan_library(str(request["library_ref"]))
        except CatalogError as exc:
            return {"status": "error", "error": str(exc)}
        return {"status": "ok", "records": records}
    if action == "instrument":
        try:
            program = instrument_program(
                str(request["program"]),
                value_cap=int(request.get("value_cap", DEFAULT_VALUE_CAP)),
            )
        except InstrumentError as exc:
            return {"status": "error", "error": str(exc)}
        return {"status": "ok", "program": program}
    if action == "execute":
        return execute_program(
            str(request["program"]), float(request.get("timeout_seconds", 30.0))
        )
    return {"status": "error", "error": f"unknown action {action!r}"}


def serve(stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            if not isinstance(request, dict):
                raise ValueError("request must be a JSON object")
            response = handle_request(request)
        except Exception as exc:
            response = {"status": "error", "error": str(exc)}
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()
