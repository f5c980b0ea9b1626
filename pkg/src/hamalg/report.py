"""Check reports and their JSON / human renderings."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .checks import CheckResult

REPORT_VERSION = 1
SKIPPED_PRECONDITION = "skipped:precondition"


class DuplicateCheckError(ValueError):
    pass


@dataclass
class Report:
    scenario: str
    suite: str
    settings: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    timing: bool = False
    _seen: set = field(default_factory=set, repr=False)

    def add(self, recs, wall_time=None):
        if isinstance(recs, CheckResult):
            recs = [recs]
        for r in recs:
            if r.check_id in self._seen:
                raise DuplicateCheckError(f"check {r.check_id!r} recorded twice")
            self._seen.add(r.check_id)
            if wall_time is not None:
                r.details.setdefault("_wall_time", wall_time)
            self.records.append(r)
        return recs

    def get(self, check_id) -> CheckResult | None:
        for r in self.records:
            if r.check_id == check_id:
                return r
        return None

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def summary(self):
        n = len(self.records)
        skipped = sum(1 for r in self.records if r.status.startswith("skipped"))
        ok = sum(1 for r in self.records if r.passed)
        return {"total": n, "passed": ok, "failed": n - ok - skipped, "skipped": skipped}

    def to_dict(self):
        return {
            "report_version": REPORT_VERSION,
            "scenario": self.scenario,
            "suite": self.suite,
            "settings": _clean(self.settings),
            "all_passed": self.passed,
            "summary": self.summary(),
            "notes": list(self.notes),
            "checks": [record_dict(r, self.timing, self.settings.get("seed")) for r in self.records],
        }


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def record_dict(r: CheckResult, timing=False, seed=None):
    details = {k: v for k, v in r.details.items() if not k.startswith("_")}
    out = {
        "check_id": r.check_id,
        "anchor": r.anchor,
        "passed": bool(r.passed),
        "status": r.status,
        "max_residual": _clean(r.max_residual) if r.max_residual is not None else None,
        "worst_point": _clean(r.worst_point),
        "tolerance": _clean(r.tolerance),
        "samples": int(r.samples),
        "seed": r.details.get("_seed", seed),
        "details": _clean(details),
    }
    if timing:
        out["wall_time"] = _clean(r.details.get("_wall_time"))
    return out


def emit_report(report: Report, fmt="json") -> bytes:
    if fmt == "json":
        text = json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)
        return (text + "\n").encode("utf-8")
    if fmt == "human":
        return _human(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.3e}"


def _human(report: Report) -> str:
    rows = [(r.status.upper(), r.check_id, _fmt(r.max_residual), _fmt(r.tolerance), r.anchor)
            for r in report.records]
    w0 = max([6] + [len(x[0]) for x in rows])
    w1 = max([5] + [len(x[1]) for x in rows])
    lines = [f"scenario {report.scenario}  suite {report.suite}",
             f"{'STATUS':<{w0}}  {'CHECK':<{w1}}  {'RESIDUAL':>10}  {'TOL':>10}  ANCHOR"]
    for st, cid, res, tol, anc in rows:
        lines.append(f"{st:<{w0}}  {cid:<{w1}}  {res:>10}  {tol:>10}  {anc}")
    s = report.summary()
    for note in report.notes:
        lines.append(f"note: {note}")
    lines.append(f"{s['passed']}/{s['total']} passed, {s['failed']} failed, "
                 f"{s['skipped']} skipped")
    return "\n".join(lines) + "\n"
