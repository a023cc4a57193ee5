"""Report rows and their CSV / JSON serialization.

Report bodies never contain wall-clock data, so identical configurations
produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

SCHEMA_VERSION = 1

PASS = "pass"
FAIL = "fail"
INFO = "info"


@dataclass
class Row:
    name: str
    value: float | None
    stderr: float | None = None
    bound: float | None = None
    margin_sigma: float | None = None
    verdict: str = INFO


@dataclass
class Report:
    command: str
    config: dict[str, Any]
    seeds: list = field(default_factory=list)
    groups: dict[str, list[Row]] = field(default_factory=dict)

    def add(self, group: str, row: Row) -> Row:
        self.groups.setdefault(group, []).append(row)
        return row

    def extend(self, group: str, rows) -> None:
        for row in rows:
            self.add(group, row)

    def rows(self):
        for group, rows in self.groups.items():
            for row in rows:
                yield group, row

    @property
    def failed(self) -> list[tuple[str, Row]]:
        return [(g, r) for g, r in self.rows() if r.verdict == FAIL]

    def to_json(self) -> str:
        body = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "seeds": self.seeds,
            "results": {g: [_clean(asdict(r)) for r in rows] for g, rows in self.groups.items()},
        }
        return json.dumps(body, indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
        buf.write(f"# command: {self.command}\n")
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        buf.write("# seeds: " + json.dumps(self.seeds) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "group", "name", "value", "stderr", "bound",
                    "margin_sigma", "verdict"])
        for group, r in self.rows():
            w.writerow([SCHEMA_VERSION, group, r.name, _fmt(r.value), _fmt(r.stderr),
                        _fmt(r.bound), _fmt(r.margin_sigma), r.verdict])
        return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _clean(d: dict) -> dict:
    # strict JSON has no inf/nan
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}
