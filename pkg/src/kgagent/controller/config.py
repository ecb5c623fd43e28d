from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

SOLVE_MODES = ("QUERY", "SCRIPT", "DIRECT")
BACKENDS = ("property_graph", "adjacency")

# Fields that change what a run computes; they make up the report fingerprint.
_BEHAVIOUR_FIELDS = (
    "max_iterations", "num_next_steps_decision", "max_retrieve_query_retry",
    "max_cypher_fixing_retry", "max_final_solution_parsing", "max_tool_retries",
    "solve_mode", "backend", "model", "vote_temperature", "temperature", "seed",
)

_PATH_FIELDS = ("fixture_root", "corpus", "transcript", "transcript_dir", "pricing",
                "snapshot_dir", "work_dir")


class ConfigError(ValueError):
    pass


@dataclass
class ControllerConfig:
    max_iterations: int = 7
    num_next_steps_decision: int = 5
    max_retrieve_query_retry: int = 3
    max_cypher_fixing_retry: int = 3
    max_final_solution_parsing: int = 3
    max_tool_retries: int = 6
    solve_mode: str = "QUERY"
    backend: str = "property_graph"

    model: str = "scripted"
    vote_temperature: float = 0.7
    temperature: float = 0.0
    seed: int = 0
    backoff_min: float = 1.0
    backoff_max: float = 60.0
    backoff_attempts: int = 6
    direct_max_tokens: int = 100_000

    api_base: str | None = None
    transcript: str | None = None
    transcript_dir: str | None = None
    pricing: str | None = None
    fixture_root: str = "."
    corpus: str | None = None
    snapshot_dir: str | None = None
    work_dir: str | None = None
    plugins: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("max_iterations", "num_next_steps_decision", "max_retrieve_query_retry",
                     "max_cypher_fixing_retry", "max_final_solution_parsing", "max_tool_retries",
                     "backoff_attempts", "direct_max_tokens"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {value!r}")
        if self.solve_mode not in SOLVE_MODES:
            raise ConfigError(f"solve_mode must be one of {', '.join(SOLVE_MODES)}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {', '.join(BACKENDS)}")
        for name in ("vote_temperature", "temperature"):
            if not 0.0 <= getattr(self, name) <= 2.0:
                raise ConfigError(f"{name} must lie in [0, 2]")
        if not 0 <= self.backoff_min <= self.backoff_max:
            raise ConfigError("need 0 <= backoff_min <= backoff_max")
        for i, plugin in enumerate(self.plugins):
            if (not isinstance(plugin, dict) or not isinstance(plugin.get("name"), str)
                    or not isinstance(plugin.get("command"), list) or not plugin["command"]):
                raise ConfigError(f"plugins[{i}] needs a 'name' string and a non-empty 'command' list")

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> "ControllerConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        data = dict(data)
        if base_dir is not None:
            for key in _PATH_FIELDS:
                if data.get(key) is not None:
                    data[key] = str((base_dir / data[key]).resolve()) if not Path(data[key]).is_absolute() else data[key]
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ControllerConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def fingerprint(self) -> str:
        core = {k: getattr(self, k) for k in _BEHAVIOUR_FIELDS}
        digest = hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()[:12]
        return f"{self.backend}/{self.solve_mode}/{digest}"
