"""CSV output and run manifests.

All numbers are written with 17 significant digits and a period decimal
separator, independent of locale; rows end with ``\\n``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from egamma_dp import __version__
from egamma_dp.accountant import CurveRow

CURVE_HEADER = ("epsilon", "delta_thm", "delta_baseline", "method", "i", "n")
PROPAGATE_HEADER = ("epsilon", "empirical_delta", "theoretical_delta", "slack")

DELTA_FLOOR = 1e-300


def format_float(x: Optional[float]) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def format_delta(x: Optional[float]) -> str:
    """Like :func:`format_float`, with deltas below 1e-300 written as 0."""
    if x is None:
        return ""
    x = float(x)
    if 0.0 <= x < DELTA_FLOOR:
        x = 0.0
    return format(x, ".17g")


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_curve_csv(rows: Sequence[CurveRow], path) -> Path:
    return write_rows(path, CURVE_HEADER, (
        (format_float(r.epsilon), format_delta(r.delta_thm), format_delta(r.delta_baseline),
         str(r.method), str(r.i), str(r.n)) for r in rows))


def read_curve_csv(path) -> List[Dict[str, Any]]:
    """Parses a curve CSV back into dicts with numeric fields converted."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append({
                "epsilon": float(rec["epsilon"]),
                "delta_thm": float(rec["delta_thm"]),
                "delta_baseline": float(rec["delta_baseline"]) if rec["delta_baseline"] else None,
                "method": rec["method"],
                "i": int(rec["i"]),
                "n": int(rec["n"]),
            })
    return out


@dataclasses.dataclass
class RunManifest:
    """What is needed to reproduce one CLI invocation.

    ``config`` is the resolved configuration mapping; ``config_arg`` is the
    position in ``argv`` of the configuration path, which a replay swaps for a
    copy of ``config``.
    """
    command: str
    argv: List[str]
    config: Optional[Dict[str, Any]]
    seed: Optional[int]
    outputs: List[str]
    config_arg: Optional[int] = None
    version: str = __version__
    python: str = dataclasses.field(default_factory=lambda: sys.version.split()[0])

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        return cls(**data)


def manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")
