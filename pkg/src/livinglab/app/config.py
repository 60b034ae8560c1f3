"""Site-app configuration (JSON file).

Example::

    {
      "app_id": "portal-app",
      "host": "127.0.0.1", "port": 8100,
      "log_path": "var/app.log",
      "candidates": "data/candidates.tsv",
      "queries": "data/queries.tsv",
      "salt": "portal-2021", "k_min": 3, "k_max": 10,
      "deadline_ms": 800, "page_size": 10,
      "baselines": {
        "adhoc": {"system_id": "search-bm25", "endpoint": "http://127.0.0.1:9001"},
        "recommendation": {"system_id": "datasets-default"}
      },
      "systems": [
        {"system_id": "teamA", "task": "adhoc", "endpoint": "http://127.0.0.1:9002"},
        {"system_id": "teamB", "task": "recommendation", "run": "runs/teamB.run"}
      ],
      "server": {"url": "http://127.0.0.1:8000", "token": "app-secret",
                 "sync": true, "push_interval_s": 5}
    }

A baseline without ``endpoint`` or ``run`` serves the candidate list order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import InvalidValue
from ..model import SystemKind, SystemRecord, Task


@dataclass
class AppConfig:
    app_id: str = "app"
    experiment_id: str = "recommendation-ab"
    salt: str = "ab-salt"
    k_min: int = 3
    k_max: int = 10
    deadline_ms: int = 800
    page_size: int = 10
    baselines: dict[Task, SystemRecord] = field(default_factory=dict)
    systems: list[SystemRecord] = field(default_factory=list)
    run_paths: dict[str, str] = field(default_factory=dict)
    candidates_path: str | None = None
    queries_path: str | None = None
    log_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8100
    server_url: str | None = None
    server_token: str | None = None
    server_sync: bool = False
    push_interval_s: float = 5.0

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | os.PathLike = ".") -> "AppConfig":
        base = Path(base_dir)

        def path(p):
            return None if p is None else str(base / p)

        run_paths: dict[str, str] = {}

        def system(entry: dict, task: Task | None, baseline: bool) -> SystemRecord:
            sid = entry["system_id"]
            task = task or Task(entry["task"])
            if "run" in entry:
                run_paths[sid] = path(entry["run"])
            run_ref = sid if "run" in entry else None
            endpoint = entry.get("endpoint")
            if baseline:
                kind = SystemKind.BASELINE
            elif endpoint:
                kind = SystemKind.ENDPOINT_BACKED
            else:
                kind = SystemKind.RUN_BACKED
            return SystemRecord(sid, kind, task, endpoint, run_ref).validate()

        baselines = {
            Task(t): system(entry, Task(t), True) for t, entry in d.get("baselines", {}).items()
        }
        systems = [system(entry, None, False) for entry in d.get("systems", [])]
        ids = [s.system_id for s in systems] + [b.system_id for b in baselines.values()]
        if len(set(ids)) != len(ids):
            raise InvalidValue("system ids in the app config must be unique")
        server = d.get("server") or {}
        return cls(
            app_id=d.get("app_id", "app"),
            experiment_id=d.get("experiment_id", "recommendation-ab"),
            salt=d.get("salt", "ab-salt"),
            k_min=int(d.get("k_min", 3)),
            k_max=int(d.get("k_max", 10)),
            deadline_ms=int(d.get("deadline_ms", 800)),
            page_size=int(d.get("page_size", 10)),
            baselines=baselines,
            systems=systems,
            run_paths=run_paths,
            candidates_path=path(d.get("candidates")),
            queries_path=path(d.get("queries")),
            log_path=path(d.get("log_path")),
            host=d.get("host", "127.0.0.1"),
            port=int(d.get("port", 8100)),
            server_url=server.get("url"),
            server_token=server.get("token"),
            server_sync=bool(server.get("sync", False)),
            push_interval_s=float(server.get("push_interval_s", 5.0)),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "AppConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)
