"""Clients for the central server: over HTTP, or bound to an in-process instance.

Both expose the same methods, so apps, participants and the simulator can
switch between wire and in-process mode without code changes.
"""

from __future__ import annotations

import json

import httpx

from ..errors import LivingLabError
from ..model import SystemRecord
from .core import CentralServer


class ServerError(LivingLabError):
    def __init__(self, status: int, body):
        self.status = status
        self.body = body
        super().__init__(f"server answered {status}: {body}")


class ServerClient:
    def __init__(self, base_url: str, token: str | None = None, timeout_s: float = 30.0):
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout_s)

    def _check(self, resp: httpx.Response, ok=(200, 201)):
        if resp.status_code not in ok:
            try:
                body = resp.json()
            except ValueError:
                body = resp.text
            raise ServerError(resp.status_code, body)
        return resp

    def register_system(self, record: SystemRecord) -> dict:
        return self._check(self._http.post("/api/systems", json=record.to_dict())).json()

    def upload_run(self, system_id: str, text: str) -> dict:
        resp = self._http.put(f"/api/systems/{system_id}/run", content=text.encode("utf-8"))
        return self._check(resp, ok=(200, 422)).json()

    def set_status(self, system_id: str, status: str) -> dict:
        resp = self._http.post(f"/api/systems/{system_id}/status", json={"status": status})
        return self._check(resp).json()

    def list_systems(self) -> list[dict]:
        return self._check(self._http.get("/api/systems")).json()

    def get_run(self, system_id: str) -> str:
        return self._check(self._http.get(f"/api/systems/{system_id}/run")).text

    def push_snapshot(self, segment: dict) -> dict:
        return self._check(self._http.post("/api/snapshots", json=segment)).json()

    def report_json(self) -> str:
        return self._check(self._http.get("/api/report")).text

    def report(self) -> dict:
        return json.loads(self.report_json())

    def report_text(self) -> str:
        return self._check(self._http.get("/report.txt")).text

    def close(self) -> None:
        self._http.close()


class LocalServerClient:
    """Same surface as ``ServerClient``; segments go through a JSON round trip."""

    def __init__(self, server: CentralServer, token: str | None = None):
        self.server = server
        self.token = token

    def register_system(self, record: SystemRecord) -> dict:
        return self.server.register_system(record, self.token).to_dict()

    def upload_run(self, system_id: str, text: str) -> dict:
        return self.server.upload_run(system_id, text, self.token).to_dict()

    def set_status(self, system_id: str, status: str) -> dict:
        return self.server.set_status(system_id, status, self.token).to_dict()

    def list_systems(self) -> list[dict]:
        return self.server.list_systems()

    def get_run(self, system_id: str) -> str:
        return self.server.get_run(system_id)

    def push_snapshot(self, segment: dict) -> dict:
        return self.server.ingest_app_snapshot(json.loads(json.dumps(segment)), self.token)

    def report_json(self) -> str:
        return self.server.report_json()

    def report(self) -> dict:
        return json.loads(self.report_json())

    def report_text(self) -> str:
        return self.server.report_text()

    def close(self) -> None:
        pass
