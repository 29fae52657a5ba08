"""Run reports and CSV emission for the CLI and service.

Numeric formatting is locale-independent (dot decimal separator, %.10g) and
the written artifacts contain nothing non-deterministic: wall time is
printed to the console only, never persisted, so identical inputs yield
byte-identical CSV/JSON outputs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class RunReport:
    command: list
    input_digest: str
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"command": list(self.command),
                "input_digest": self.input_digest,
                "outputs": list(self.outputs),
                "summary": self.summary,
                "warnings": list(self.warnings)}

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def fmt(value) -> str:
    """One float cell; empty for NaN (singular / unavailable samples)."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(path, header, rows, summary=None) -> None:
    """Write a curve CSV; summary key=value lines go in as trailing comments."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    for key in sorted(summary or {}):
        lines.append(f"# {key}={fmt((summary or {})[key])}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
