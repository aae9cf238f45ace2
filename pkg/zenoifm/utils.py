"""Utility functions: value validation, formatting, hashing and random streams."""
import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np
from pytz import timezone

from zenoifm.config import TIMEZONE

TZ = timezone(TIMEZONE)


def validate_float(value_str: str, minimum: float | None = None, strict: bool = False) -> tuple[bool, float | None, str]:
    """
    Validate a real number, optionally bounded from below.

    Returns:
        (is_valid, value, error_message)
    """
    try:
        value = float(str(value_str).strip().replace(",", "."))
    except ValueError:
        return False, None, f"'{value_str}' is not a number."

    if not math.isfinite(value):
        return False, None, f"'{value_str}' is not finite."
    if minimum is not None:
        if strict and value <= minimum:
            return False, None, f"{value} must be greater than {minimum}."
        if not strict and value < minimum:
            return False, None, f"{value} must be at least {minimum}."
    return True, value, ""


def validate_fraction(value_str: str) -> tuple[bool, float | None, str]:
    """Validate a number strictly inside (0, 1)."""
    ok, value, error = validate_float(value_str)
    if not ok:
        return ok, value, error
    if not 0.0 < value < 1.0:
        return False, None, f"{value} must lie strictly between 0 and 1."
    return True, value, ""


def validate_probability(value_str: str) -> tuple[bool, float | None, str]:
    """Validate a number in [0, 1]."""
    ok, value, error = validate_float(value_str)
    if not ok:
        return ok, value, error
    if not 0.0 <= value <= 1.0:
        return False, None, f"{value} must lie in [0, 1]."
    return True, value, ""


def validate_count(value_str: str, minimum: int = 0) -> tuple[bool, int | None, str]:
    """Validate an integer not below `minimum`."""
    text = str(value_str).strip()
    try:
        value = int(text)
    except ValueError:
        return False, None, f"'{value_str}' is not an integer."
    if value < minimum:
        return False, None, f"{value} must be at least {minimum}."
    return True, value, ""


def validate_flag(value_str: str) -> tuple[bool, bool | None, str]:
    """Validate a boolean written as true/false, yes/no or 1/0."""
    text = str(value_str).strip().lower()
    if text in ("true", "yes", "1", "on"):
        return True, True, ""
    if text in ("false", "no", "0", "off"):
        return True, False, ""
    return False, None, f"'{value_str}' is not a boolean."


def parse_grid(value_str: str, minimum: float | None = 0.0) -> tuple[bool, tuple[float, ...] | None, str]:
    """
    Parse a comma-separated list of numbers, e.g. "0,15,59".

    Returns:
        (is_valid, values, error_message); an empty string gives an empty tuple.
    """
    text = str(value_str).strip()
    if not text:
        return True, (), ""
    values = []
    for item in text.split(","):
        ok, value, error = validate_float(item, minimum)
        if not ok:
            return False, None, f"Grid entry {error}"
        values.append(value)
    return True, tuple(values), ""


def format_float(value: float) -> str:
    """Format a float with 17 significant digits (exact round trip)."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def config_hash(payload: dict) -> str:
    """SHA-256 of the canonical JSON form of a configuration mapping."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def tz_converter(timestamp: float):
    """logging.Formatter converter rendering record times in the configured timezone."""
    return datetime.fromtimestamp(timestamp, TZ).timetuple()


@dataclass(frozen=True)
class ShotStreams:
    """Independent random streams for one Monte Carlo task."""
    condensate: np.random.Generator
    fock: np.random.Generator
    quadrature: np.random.Generator
    noise: np.random.Generator


def make_streams(seed: int, task: int = 0) -> ShotStreams:
    """Deterministically derive the streams of task `task` from the master seed."""
    root = np.random.SeedSequence([seed, task])
    ss_condensate, ss_fock, ss_quadrature, ss_noise = root.spawn(4)
    return ShotStreams(
        condensate=np.random.default_rng(ss_condensate),
        fock=np.random.default_rng(ss_fock),
        quadrature=np.random.default_rng(ss_quadrature),
        noise=np.random.default_rng(ss_noise),
    )


def make_rng(seed: int, task: int = 0) -> np.random.Generator:
    """Single generator for task `task` of the master seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, task]))
