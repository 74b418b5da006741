"""Deterministic number formatting for reports (12 significant digits)."""

from __future__ import annotations

import json
import math
from typing import Any

SIG_DIGITS = 12


def fmt(v: float | None) -> str:
    """CSV/text cell: ``NA`` for undefined, ``inf``/``-inf`` for sentinels."""
    if v is None:
        return "NA"
    v = float(v)
    if math.isnan(v):
        return "NA"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    out = format(v, f".{SIG_DIGITS}g")
    return "0" if out == "-0" else out


def jsonable(obj: Any) -> Any:
    """Round floats to 12 significant digits and map non-finite values to strings."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return fmt(obj)
        r = float(format(obj, f".{SIG_DIGITS}g"))
        return 0.0 if r == 0 else r
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return jsonable(obj.item())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"
