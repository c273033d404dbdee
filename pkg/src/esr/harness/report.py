"""Run reports: a text summary plus CSV tables with frozen headers."""

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    ok: bool


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)


def fmt(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunReport:
    kind: str
    provenance: dict
    sections: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def add_check(self, name, value, tolerance, ok=None):
        if ok is None:
            ok = abs(value) <= tolerance
        self.checks.append(Check(name, float(value), float(tolerance), bool(ok)))

    def table(self, name, columns) -> Table:
        return self.tables.setdefault(name, Table(tuple(columns)))

    def table_csv(self, name) -> str:
        t = self.tables[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(t.columns)
        for row in t.rows:
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"ESR run report ({self.kind})"]
        for k in sorted(self.provenance):
            lines.append(f"  {k}: {self.provenance[k]}")
        for title, body in self.sections:
            lines.append("")
            lines.append(f"== {title}")
            lines.extend(f"  {b}" for b in body)
        if self.checks:
            lines.append("")
            lines.append("== checks")
            for c in self.checks:
                status = "PASS" if c.ok else "FAIL"
                lines.append(f"  [{status}] {c.name}: {c.value:.3e} (tol {c.tolerance:.1e})")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        parts = []
        for name in self.tables:
            parts.append(f"# {name}\n" + self.table_csv(name))
        return "\n".join(parts)

    def write(self, out_dir) -> list:
        """Write ``report.txt``, one CSV per table and ``records.jsonl`` when present."""
        os.makedirs(out_dir, exist_ok=True)
        written = []
        path = os.path.join(out_dir, "report.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())
        written.append(path)
        for name in self.tables:
            path = os.path.join(out_dir, f"{name}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(self.table_csv(name))
            written.append(path)
        if self.records:
            path = os.path.join(out_dir, "records.jsonl")
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                for rec in self.records:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
            written.append(path)
        return written
