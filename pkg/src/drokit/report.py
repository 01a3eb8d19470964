"""Report assembly and rendering.

A report carries the command echo, an input digest, a results mapping, and a
list of pass/fail checks with residuals. The JSON rendering is canonical
(sorted keys, fixed separators) so identical inputs, flags, and seed produce
byte-identical documents; the text rendering formats every number through the
same JSON serializer so each numeric appears verbatim in both forms. Timing
is deliberately not part of the report (it would break determinism); the CLI
prints it to stderr instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    residual: Optional[float] = None
    detail: str = ""


@dataclass
class Report:
    command: str
    inputs_digest: str
    results: dict[str, Any] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _jsonable(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, float):
        if value != value:
            return "nan"
        if value == float("inf"):
            return "inf"
        if value == float("-inf"):
            return "-inf"
        return value
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "item"):  # numpy scalars
        return _jsonable(value.item())
    return value


def to_json(report: Report) -> str:
    doc = {
        "command": report.command,
        "inputs_digest": report.inputs_digest,
        "results": _jsonable(report.results),
        "checks": [
            {
                "name": c.name,
                "passed": bool(c.passed),
                "residual": _jsonable(c.residual),
                "detail": c.detail,
            }
            for c in report.checks
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def _render_value(value: Any) -> str:
    value = _jsonable(value)
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return json.dumps(value)


def to_text(report: Report) -> str:
    lines = [f"command: {report.command}", f"inputs:  {report.inputs_digest}"]
    if report.results:
        lines.append("results:")
        width = max(len(k) for k in report.results)
        for key, value in report.results.items():
            lines.append(f"  {key.ljust(width)}  {_render_value(value)}")
    if report.checks:
        lines.append("checks:")
        width = max(len(c.name) for c in report.checks)
        for c in report.checks:
            status = "PASS" if c.passed else "FAIL"
            res = "" if c.residual is None else f"  residual={_render_value(c.residual)}"
            det = f"  {c.detail}" if c.detail else ""
            lines.append(f"  [{status}] {c.name.ljust(width)}{res}{det}")
    return "\n".join(lines) + "\n"


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    """Delimited rendering of homogeneous rows using the shared numeric
    formatting (strings stay unquoted for spreadsheet friendliness)."""
    out = [",".join(columns)]
    for row in rows:
        cells = []
        for col in columns:
            v = _jsonable(row[col])
            cells.append(v if isinstance(v, str) else json.dumps(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"
