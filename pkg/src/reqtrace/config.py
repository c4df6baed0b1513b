"""Run configuration: defaults, TOML file loading, CLI overrides.

Precedence: CLI flags over file values over built-in defaults. Unknown
sections or keys are rejected so typos fail fast.
"""

from __future__ import annotations

from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import ConfigError

DEFAULTS: dict[str, dict[str, object]] = {
    "llm": {
        "endpoint": "",
        "model": "mock-1",
        "temperature": 0.0,
        "max_output_tokens": 1024,
        "max_retries": 3,
    },
    "search": {
        "backend": "stub",
        "endpoint": "",
        "max_knowledge_items": 3,
    },
    "pipeline": {
        "max_rounds": 3,
        "approval_floor": 4,
        "max_urs_per_community": 3,
        "verifier_code_chars": 2000,
        "max_prompt_chars": 4000,
    },
    "leiden": {
        "resolution": 1.0,
        "seed": 0,
    },
    "community": {
        "max_files": 20,
    },
    "cache": {
        "dir": ".reqtrace-cache",
    },
    "eval": {
        "theta": 0.5,
        "ur_match_threshold": 0.5,
        "matcher": "lexical",
        "sweep_step": 0.01,
    },
}


class RunConfig:
    def __init__(self, values: dict[str, dict[str, object]]):
        self._values = values

    def get(self, section: str, key: str):
        return self._values[section][key]

    def as_dict(self) -> dict:
        return {s: dict(kv) for s, kv in self._values.items()}

    def with_overrides(self, overrides: dict[tuple[str, str], object]) -> "RunConfig":
        values = self.as_dict()
        for (section, key), value in overrides.items():
            _check_key(section, key)
            values[section][key] = _coerce(section, key, value)
        return RunConfig(values)


def _check_key(section: str, key: str) -> None:
    if section not in DEFAULTS:
        raise ConfigError(f"unknown config section: [{section}]")
    if key not in DEFAULTS[section]:
        raise ConfigError(f"unknown config key: {section}.{key}")


def _coerce(section: str, key: str, value):
    default = DEFAULTS[section][key]
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config value {section}.{key}={value!r} is invalid: {exc}") from exc


def load_config(path: str | Path | None = None) -> RunConfig:
    values = {s: dict(kv) for s, kv in DEFAULTS.items()}
    if path is not None:
        raw = Path(path).read_bytes()
        try:
            doc = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
        for section, table in doc.items():
            if not isinstance(table, dict):
                raise ConfigError(f"config file top level must be sections, got key {section!r}")
            for key, value in table.items():
                _check_key(section, key)
                values[section][key] = _coerce(section, key, value)
    return RunConfig(values)


def print_defaults() -> str:
    lines = []
    for section in sorted(DEFAULTS):
        lines.append(f"[{section}]")
        for key in sorted(DEFAULTS[section]):
            value = DEFAULTS[section][key]
            rendered = f'"{value}"' if isinstance(value, str) else repr(value)
            lines.append(f"{key} = {rendered}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
