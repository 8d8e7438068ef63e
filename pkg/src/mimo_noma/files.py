"""Scenario files and CSV/JSON output.

Numbers are written in the shortest decimal form that reads back to the same
double, files are UTF-8 with LF line endings.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DomainError
from .system import SystemConfig

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

ARTIFACTS = ("densities", "rates", "regions", "verify")

DEFAULT_SCENARIO = {
    "N": 5, "M1": 3, "M2": 3, "d1_m": 100.0, "d2_m": 10.0,
    "sigma2_dbm": -35.0, "pmax_dbm": 20.0, "seed": 2024, "trials": 10_000,
}


@dataclass(frozen=True)
class Campaign:
    """A configuration plus the Monte-Carlo settings and requested artifacts."""

    config: SystemConfig
    trials: int = 10_000
    seed: int = 2024
    outputs: tuple = field(default_factory=tuple)
    scenario: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        unknown = set(self.outputs) - set(ARTIFACTS)
        if unknown:
            raise DomainError(f"unknown artifacts {sorted(unknown)}; known: {list(ARTIFACTS)}")


def campaign_from_mapping(data: dict) -> Campaign:
    unknown = set(data) - set(DEFAULT_SCENARIO) - {"outputs"}
    if unknown:
        raise DomainError(f"unknown scenario keys {sorted(unknown)}")
    s = {**DEFAULT_SCENARIO, **data}
    outputs = tuple(s.pop("outputs", ()))
    try:
        config = SystemConfig.from_distances(int(s["N"]), int(s["M1"]), int(s["M2"]), float(s["d1_m"]),
                                             float(s["d2_m"]), float(s["sigma2_dbm"]), float(s["pmax_dbm"]))
    except (TypeError, ValueError) as exc:
        raise DomainError(str(exc)) from exc
    return Campaign(config, s["trials"], s["seed"], outputs, s)


def load_campaign(path) -> Campaign:
    """Read a TOML scenario; missing keys take the defaults of ``DEFAULT_SCENARIO``."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DomainError(f"{path}: {exc}") from exc
    return campaign_from_mapping(data)


def config_dict(config: SystemConfig) -> dict:
    return {k: getattr(config, k) for k in ("N", "M1", "M2", "Pi1", "Pi2", "sigma2", "Pmax")}


def config_hash(config: SystemConfig) -> str:
    text = json.dumps(config_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    try:
        return repr(float(x))
    except (TypeError, ValueError):
        return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _parse_cell(cell: str):
    if cell in ("true", "false"):
        return cell == "true"
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path) -> list[dict]:
    """Rows as dicts with numeric cells converted back to numbers."""
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]

