"""Session-keyed A/B arm assignment and recommendation panel sizing."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidValue
from .model import SystemId, Task, check_token

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV64_PRIME) & _MASK64
    return h


def fmix64(h: int) -> int:
    """64-bit avalanche finalizer (MurmurHash3)."""
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB93FE53A8B63) & _MASK64
    h ^= h >> 33
    return h


def session_hash(salt: str, session_id: str) -> int:
    # FNV-1a alone leaves its low bits depending only on the low bits of each
    # input byte, so h mod 4 would ignore most of the id; the finalizer mixes
    # every input bit into every output bit before the modulo
    return fmix64(fnv1a_64(salt.encode("utf-8") + b"\x00" + session_id.encode("utf-8")))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    task: Task
    arms: tuple[SystemId, ...]
    salt: str
    k_min: int = 3
    k_max: int = 10

    def __post_init__(self):
        if not isinstance(self.arms, tuple):
            object.__setattr__(self, "arms", tuple(self.arms))

    def validate(self) -> "ExperimentConfig":
        check_token(self.experiment_id, "experiment id")
        if not self.arms:
            raise InvalidValue("an experiment needs at least one arm")
        if len(set(self.arms)) != len(self.arms):
            raise InvalidValue("experiment arms must be distinct")
        if not 1 <= self.k_min <= self.k_max:
            raise InvalidValue(f"need 1 <= k_min <= k_max, got {self.k_min}, {self.k_max}")
        return self

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "task": self.task.value,
            "arms": list(self.arms),
            "salt": self.salt,
            "k_min": self.k_min,
            "k_max": self.k_max,
        }


def assign_session(session_id: str, cfg: ExperimentConfig) -> SystemId:
    """Pick the arm for a session. Pure in (salt, session_id, arms)."""
    return cfg.arms[session_hash(cfg.salt, session_id) % len(cfg.arms)]


def clamp_k(requested: int, available: int, cfg: ExperimentConfig) -> int | None:
    """Panel size for a recommendation request, or None when no panel is shown."""
    if requested < 0 or available < 0:
        raise ValueError("requested and available must be non-negative")
    if available < cfg.k_min:
        return None
    return min(max(requested, cfg.k_min), cfg.k_max, available)
