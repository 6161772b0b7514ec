"""Canonical JSON helpers shared by every serializable type."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any


def dumps(obj: Any) -> str:
    # compact separators and no NaN so identical values give identical bytes
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def check_fields(d: Any, allowed: set[str], required: set[str] = frozenset(), what: str = "object") -> None:
    """Reject documents with unknown or missing fields."""
    if not isinstance(d, dict):
        raise ValueError(f"{what} must be a JSON object")
    extra = set(d) - set(allowed)
    if extra:
        raise ValueError(f"{what} has unexpected fields {sorted(extra)}")
    missing = set(required) - set(d)
    if missing:
        raise ValueError(f"{what} is missing fields {sorted(missing)}")
