"""
core/report_io.py
Deterministic CSV / JSON rendering for simulate, sweep and verify output.

Every float is written with 17 significant digits so values round-trip
exactly.  Nothing here adds timestamps: identical inputs give identical bytes.
"""

import csv
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

logger = logging.getLogger(__name__)


def format_number(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def _json_value(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g") if math.isfinite(value) else "null"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        body = ",\n".join(
            f"{pad}{json.dumps(str(k))}: {_json_value(v, indent, level + 1)}" for k, v in value.items()
        )
        return "{\n" + body + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        body = ",\n".join(f"{pad}{_json_value(v, indent, level + 1)}" for v in value)
        return "[\n" + body + "\n" + end + "]"
    # numpy scalars and the like
    return _json_value(float(value), indent, level)


def to_json(document, indent: int = 2) -> str:
    """json.dumps look-alike that keeps 17 significant digits and maps NaN to null."""
    return _json_value(document, indent, 0) + "\n"


def to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_output(text: str, path: Optional[str] = None):
    """Write to `path`, or stdout when path is None or '-'.  OSError propagates."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.write_text(text, encoding="utf-8", newline="\n")
    logger.info(f"[IO] wrote {len(text)} bytes to {target}")
