"""Central server: registry, run uploads, snapshot aggregation and dashboard."""

from .client import LocalServerClient, ServerClient, ServerError
from .core import CentralServer, RegistryEntry, ServerConfig, Status, format_report_text

__all__ = [
    "CentralServer",
    "LocalServerClient",
    "RegistryEntry",
    "ServerClient",
    "ServerConfig",
    "ServerError",
    "Status",
    "format_report_text",
]
