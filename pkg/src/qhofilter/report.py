"""Synthesis reports (JSON) and optimizer traces (CSV).

Reports are deterministic given the configuration and seed list, except
for ``timestamp`` and ``wall_clock_s``, which are excluded from
``report_hash``.  Both files are written atomically.
"""

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields

from .cqf.optimize import TRACE_COLUMNS
from .errors import ReportFormatError

SCHEMA_VERSION = 1
VOLATILE_FIELDS = ("timestamp", "wall_clock_s", "report_hash")


@dataclass(frozen=True)
class SynthesisReport:
    schema_version: int
    library_version: str
    mode: str
    status: str
    input: dict
    input_hash: str
    best_seed: object
    L: list
    M: list
    cost: dict
    stationarity: dict
    admissibility: dict
    runs: list
    multiple_stationary_values: bool
    trace_summary: dict
    timestamp: str
    wall_clock_s: float
    report_hash: str = ""

    def content_hash(self):
        data = {k: v for k, v in asdict(self).items() if k not in VOLATILE_FIELDS}
        return hashlib.sha256(_dumps(data).encode()).hexdigest()

    def sealed(self):
        """Copy with ``report_hash`` filled in."""
        d = asdict(self)
        d["report_hash"] = self.content_hash()
        return SynthesisReport(**d)

    def to_json(self):
        return _dumps(asdict(self), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ReportFormatError("report must be a JSON object")
        names = [f.name for f in fields(cls)]
        unknown = sorted(set(data) - set(names))
        if unknown:
            raise ReportFormatError(f"unknown report field(s): {unknown}")
        missing = sorted(set(names) - set(data))
        if missing:
            raise ReportFormatError(f"missing report field(s): {missing}")
        if data["schema_version"] != SCHEMA_VERSION:
            raise ReportFormatError(
                f"schema version {data['schema_version']!r} is not {SCHEMA_VERSION}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ReportFormatError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _dumps(data, indent=None):
    # repr-based float output is the shortest string that round-trips binary64.
    return json.dumps(data, indent=indent, sort_keys=True, allow_nan=True)


def _float(x):
    return None if x is None else float(x)


def cost_dict(breakdown):
    return {
        "total": breakdown.total,
        "error_part": breakdown.error_part,
        "backaction_part": breakdown.backaction_part,
        "dual_total": breakdown.dual_total,
        "constraint_value": breakdown.constraint_value,
        "duality_gap": breakdown.duality_gap,
    }


def stationarity_dict(report, rtol):
    d = {k: (_float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v)
         for k, v in report.as_dict().items()}
    d["rtol"] = rtol
    d["stationary"] = report.is_stationary(rtol)
    return d


def trace_summary(trace):
    costs = [row.cost for row in trace]
    return {
        "iterations": len(trace) - 1,
        "initial_cost": costs[0] if costs else math.nan,
        "final_cost": costs[-1] if costs else math.nan,
        "monotone": all(b <= a for a, b in zip(costs, costs[1:])),
        "final_grad_L_norm": trace[-1].grad_L_norm if trace else math.nan,
        "final_grad_M_norm": trace[-1].grad_M_norm if trace else math.nan,
    }


def trace_csv(trace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace:
        writer.writerow([str(row.iter)] + ["%.17g" % x for x in row.as_tuple()[1:]])
    return buf.getvalue()


def read_trace_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise ReportFormatError(f"trace header must be {','.join(TRACE_COLUMNS)}")
    return [(int(r[0]), *map(float, r[1:])) for r in rows[1:]]


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


__all__ = [
    "SCHEMA_VERSION",
    "SynthesisReport",
    "ReportFormatError",
    "cost_dict",
    "stationarity_dict",
    "trace_summary",
    "trace_csv",
    "read_trace_csv",
    "write_atomic",
]
