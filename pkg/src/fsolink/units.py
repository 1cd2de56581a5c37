"""Unit-tagged scalars and conversions.

The tags are ``typing.NewType`` aliases over ``float``: they cost nothing at
runtime and exist so signatures say which unit a number carries. Range checks
live in the operations that consume the values.
"""
from __future__ import annotations

import math
from typing import NewType

PowerDbm = NewType("PowerDbm", float)
PowerWatts = NewType("PowerWatts", float)
LengthKm = NewType("LengthKm", float)
SpecificAttenuationDbPerKm = NewType("SpecificAttenuationDbPerKm", float)
ExtinctionPerKm = NewType("ExtinctionPerKm", float)
VisibilityKm = NewType("VisibilityKm", float)
RainRateMmHr = NewType("RainRateMmHr", float)
WavelengthNm = NewType("WavelengthNm", float)
DivergenceMrad = NewType("DivergenceMrad", float)
ApertureM = NewType("ApertureM", float)

# dB per neper-of-power: 10 / ln(10)
DB_PER_NEPER = 10.0 / math.log(10.0)


class DomainError(ValueError):
    """A value lies outside the mathematical domain of an operation."""


def dbm_to_watts(p: PowerDbm) -> PowerWatts:
    return PowerWatts(1e-3 * 10.0 ** (p / 10.0))


def watts_to_dbm(p: PowerWatts) -> PowerDbm:
    if not p > 0:
        raise DomainError(f"power must be positive to express in dBm, got {p!r} W")
    return PowerDbm(10.0 * math.log10(p / 1e-3))


def extinction_to_db(e: ExtinctionPerKm) -> SpecificAttenuationDbPerKm:
    """Convert an extinction coefficient in 1/km to specific attenuation in dB/km."""
    return SpecificAttenuationDbPerKm(e * DB_PER_NEPER)


def db_to_extinction(a: SpecificAttenuationDbPerKm) -> ExtinctionPerKm:
    return ExtinctionPerKm(a / DB_PER_NEPER)


def require_non_negative(name: str, value: float) -> float:
    if not value >= 0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return value


def require_positive(name: str, value: float) -> float:
    if not value > 0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return value
