"""Machine-readable records of verified identities."""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class DefectReport:
    """One checked identity: ``passed`` is always ``defect <= tolerance``."""

    check: str
    system: str
    depth: int | None
    defect: float
    tolerance: float
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self):
        return bool(self.defect <= self.tolerance)

    def to_dict(self):
        return {
            "check": self.check,
            "system": self.system,
            "depth": self.depth,
            "params": _jsonable(self.params),
            "defect": float(self.defect),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "details": _jsonable(self.details),
            "wall_time": float(self.wall_time),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc):
        return cls(
            check=doc["check"],
            system=doc["system"],
            depth=doc.get("depth"),
            defect=float(doc["defect"]),
            tolerance=float(doc["tolerance"]),
            params=doc.get("params", {}),
            details=doc.get("details", {}),
            wall_time=float(doc.get("wall_time", 0.0)),
        )

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        depth = "" if self.depth is None else f" depth={self.depth}"
        return f"[{status}] {self.check} on {self.system}{depth}: defect={self.defect:.3e} tol={self.tolerance:.3e}"


@contextmanager
def timed():
    """Yields a one-element list that receives the elapsed seconds on exit."""
    box = [0.0]
    start = time.perf_counter()
    try:
        yield box
    finally:
        box[0] = time.perf_counter() - start
