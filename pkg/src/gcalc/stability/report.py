"""Stability reports and their CSV / JSON encodings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

SCHEMA = "gcalc-report/1"
CSV_COLUMNS = ("param", "t", "gap", "bound", "coeff_gap", "verdict")
# verdicts that decide pass/fail; the rest are informational
REQUIRED_VERDICTS = ("zero_at_zero", "nonincreasing", "below_floor", "within_bound")


@dataclass
class StabilityRow:
    param: float
    t: float
    gap: float
    bound: float | None
    coeff_gap: float
    verdict: str


@dataclass
class StabilityReport:
    kind: str
    family: str
    rows: list
    constants: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts[k] for k in REQUIRED_VERDICTS if k in self.verdicts)

    def gaps(self, t: float | None = None) -> list:
        """Gaps in row order (parameter order), optionally at a single time."""
        return [r.gap for r in self.rows if t is None or math.isclose(r.t, t, abs_tol=1e-12)]

    def params(self) -> list:
        seen = []
        for r in self.rows:
            if r.param not in seen:
                seen.append(r.param)
        return seen

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    repr(float(r.param)),
                    repr(float(r.t)),
                    repr(float(r.gap)),
                    "" if r.bound is None else repr(float(r.bound)),
                    repr(float(r.coeff_gap)),
                    r.verdict,
                ]
            )
        return buf.getvalue()

    def to_dict(self, config: dict | None = None) -> dict:
        return {
            "schema": SCHEMA,
            "kind": self.kind,
            "family": self.family,
            "config": config or {},
            "constants": self.constants,
            "verdicts": self.verdicts,
            "rows": [
                {
                    "param": r.param,
                    "t": r.t,
                    "gap": r.gap,
                    "bound": r.bound,
                    "coeff_gap": r.coeff_gap,
                    "verdict": r.verdict,
                }
                for r in self.rows
            ],
        }

    def to_json(self, config: dict | None = None) -> str:
        return dumps(self.to_dict(config))


def dumps(payload) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj
