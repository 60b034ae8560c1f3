"""Site app: serves interleaved rankings and A/B recommendations, logs feedback."""

from .config import AppConfig
from .core import RankingRequest, RecommendationRequest, SiteApp
from .endpoint import EndpointClient, HttpxTransport, query_endpoint_system

__all__ = [
    "AppConfig",
    "EndpointClient",
    "HttpxTransport",
    "RankingRequest",
    "RecommendationRequest",
    "SiteApp",
    "query_endpoint_system",
]
