"""
core/parsing.py
Lenient readers for command-line values.  Accepted forms:
  - complex amplitudes:  "0.6,0.8"  "(0.6, 0.8)"  "sqrt(1/2),0"  "-1/2,0"  "0.6+0.8j"  "0.8j"  "1"
  - integer lists:       "3"  "3,4"  "2 3 4"
  - float lists / grids: "0.2,0.6,0.8"  "0.01:0.99:0.01"  "0.1:0.5:0.1,0.75"
Grids are inclusive of their end point when it lies on the step.
"""

import logging
import math
import re
from typing import List

import numpy as np

from core.errors import ConfigError

logger = logging.getLogger(__name__)

_NUMBER = r"(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RATIO = rf"{_NUMBER}(?:\s*/\s*{_NUMBER})?"
_COMPONENT = rf"[-+]?\s*(?:sqrt\(\s*{_RATIO}\s*\)|{_RATIO})"
_PAIR = re.compile(rf"^\(?\s*({_COMPONENT})\s*,\s*({_COMPONENT})\s*\)?$", re.IGNORECASE)
_SEPARATORS = re.compile(r"[,\s;]+")


def _component(text: str) -> float:
    """'-sqrt(1/2)' -> -0.7071..., '3/5' -> 0.6"""
    text = text.replace(" ", "").lower()
    sign = -1.0 if text.startswith("-") else 1.0
    text = text.lstrip("+-")
    root = text.startswith("sqrt(")
    if root:
        text = text[len("sqrt("):-1]
    num, _, den = text.partition("/")
    value = float(num) / float(den) if den else float(num)
    return sign * (math.sqrt(value) if root else value)


def parse_complex(text: str) -> complex:
    if text is None or not str(text).strip():
        raise ConfigError("empty complex amplitude")
    raw = str(text).strip()

    # 1. "re,im" pair, optionally parenthesised
    match = _PAIR.match(raw)
    if match:
        try:
            return complex(_component(match.group(1)), _component(match.group(2)))
        except ZeroDivisionError:
            raise ConfigError(f"division by zero in {raw!r}") from None

    # 2. Python literal: "0.6+0.8j", "0.8j", "1"
    try:
        return complex(raw.replace(" ", "").replace("i", "j"))
    except ValueError:
        pass

    logger.warning(f"parse_complex: could not read {raw!r}")
    raise ConfigError(f"cannot read complex amplitude {raw!r}; use 're,im'")


def parse_int_list(text: str) -> List[int]:
    values = []
    for chunk in _SEPARATORS.split(str(text or "").strip()):
        if not chunk:
            continue
        try:
            values.append(int(chunk))
        except ValueError:
            raise ConfigError(f"cannot read integer {chunk!r} in {text!r}") from None
    if not values:
        raise ConfigError("empty integer list")
    return values


def parse_grid(text: str) -> List[float]:
    """start:stop:step, stop included when it is reached (to 1e-9 of a step)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r} must look like start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"cannot read grid {text!r}") from None
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ConfigError(f"grid {text!r} runs backwards")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps 0.01:0.99:0.01 on the decimal grid instead of accumulating drift
    return [float(v) for v in np.round(start + step * np.arange(count), 12)]


def parse_float_list(text: str) -> List[float]:
    values: List[float] = []
    for chunk in _SEPARATORS.split(str(text or "").strip()):
        if not chunk:
            continue
        if ":" in chunk:
            values.extend(parse_grid(chunk))
            continue
        try:
            values.append(float(chunk))
        except ValueError:
            raise ConfigError(f"cannot read number {chunk!r} in {text!r}") from None
    if not values:
        raise ConfigError("empty number list")
    return values
