"""Engine configuration files: EnvironmentConfig plus artifact paths."""

from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass

from .environment import EnvironmentConfig

PATH_KEYS = ("checkpoint", "model", "source", "input", "session_log", "output_wav")


@dataclass
class EngineConfigFile:
    environment: EnvironmentConfig
    paths: dict

    @classmethod
    def load(cls, path) -> "EngineConfigFile":
        path = pathlib.Path(path)
        raw = json.loads(path.read_text())
        env = EnvironmentConfig.from_dict(raw.get("environment", {}))
        paths = {}
        for key, value in raw.get("paths", {}).items():
            if key not in PATH_KEYS:
                raise ValueError(f"unknown path key {key!r}; expected one of {PATH_KEYS}")
            paths[key] = str((path.parent / value).resolve())
        for required in ("checkpoint", "model", "source"):
            if required not in paths:
                raise ValueError(f"config {path} is missing paths.{required}")
        return cls(environment=env, paths=paths)

    def save(self, path) -> None:
        payload = {"environment": self.environment.to_dict(), "paths": self.paths}
        pathlib.Path(path).write_text(json.dumps(payload, indent=1))
