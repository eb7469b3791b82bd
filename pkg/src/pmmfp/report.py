"""Schema-versioned JSON report envelopes."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import enum
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

SCHEMA_VERSION = "1.0.0"

_SEVERITIES = ("info", "warning", "error")


@dataclass(frozen=True)
class ReportWarning:
    code: str
    message: str
    severity: str = "warning"

    def __post_init__(self):
        if self.severity not in _SEVERITIES:
            raise ValueError(f"severity must be one of {_SEVERITIES}")

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "severity": self.severity}


@dataclass
class ReportEnvelope:
    payload: dict
    seed: int | None = None
    config: dict = field(default_factory=dict)
    warnings: list[ReportWarning] = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc)
                           .isoformat(timespec="seconds"))
    schema_version: str = SCHEMA_VERSION

    def warn(self, code: str, message: str, severity: str = "warning"):
        self.warnings.append(ReportWarning(code, message, severity))

    @property
    def has_warnings(self) -> bool:
        return any(w.severity != "info" for w in self.warnings)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "timestamp": self.timestamp,
            "seed": self.seed,
            "config": jsonable(self.config),
            "payload": jsonable(self.payload),
            "warnings": [w.to_dict() for w in self.warnings],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def payload_json(self) -> str:
        """Canonical payload text, excluding the timestamp; used for determinism checks."""
        return json.dumps(jsonable(self.payload), sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, data: dict) -> "ReportEnvelope":
        validate(data)
        return cls(
            payload=data["payload"],
            seed=data["seed"],
            config=data["config"],
            warnings=[ReportWarning(**w) for w in data["warnings"]],
            timestamp=data["timestamp"],
            schema_version=data["schema_version"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ReportEnvelope":
        return cls.from_dict(json.loads(text))


def jsonable(obj):
    """Convert numpy values, dataclasses, enums and tuples to JSON-ready types.

    Non-finite floats become ``None``.
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return jsonable(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        to_dict = getattr(obj, "to_dict", None)
        return jsonable(to_dict() if to_dict else dataclasses.asdict(obj))
    return obj


def load_schema() -> dict:
    text = resources.files("pmmfp").joinpath("schema/report.schema.json").read_text("utf-8")
    return json.loads(text)


def validate(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``data`` breaks the report schema."""
    jsonschema.validate(data, load_schema())
