"""Small report records shared by the bound checkers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class BoundReport:
    """One inequality ``lhs <= rhs``; ``slack = rhs - lhs``."""

    name: str
    lhs: float
    rhs: float
    hypotheses_ok: bool = True

    @property
    def satisfied(self) -> bool:
        # an overflowed lhs proves nothing, whatever the rhs
        return bool(self.lhs <= self.rhs) and not math.isinf(self.lhs)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def as_dict(self) -> dict:
        out = asdict(self)
        out["satisfied"] = self.satisfied
        out["slack"] = self.slack
        return out


CSV_COLUMNS = ("name", "lhs", "rhs", "slack", "satisfied", "hypotheses_ok")


def _fmt(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def reports_to_csv(reports, provenance: str = "formula") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS + ("provenance",))
    for r in reports:
        d = r.as_dict()
        writer.writerow([_fmt(d[c]) for c in CSV_COLUMNS] + [provenance])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2, sort_keys=True)
