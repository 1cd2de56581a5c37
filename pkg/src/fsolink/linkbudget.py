"""Link closure: received power, margin, range limit and feasibility class."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .attenuation import GeometryParams, geometric_capture_fraction, path_loss_db
from .units import LengthKm, PowerDbm, SpecificAttenuationDbPerKm, require_non_negative

DEFAULT_TX_POWER_DBM = 5.0
DEFAULT_SENSITIVITY_DBM = -40.0
SENSITIVITY_WINDOW_DBM = (-60.0, 0.0)
RAIN_PENETRATION_MARGIN_DB = 25.0
DEFAULT_THRESHOLDS = (0.0, RAIN_PENETRATION_MARGIN_DB)
MAX_RANGE_CAP_KM = 100.0
MAX_RANGE_RESOLUTION_KM = 1e-3
MAX_BISECTION_STEPS = 60


class ConfigurationError(ValueError):
    pass


class LinkClass(str, enum.Enum):
    FEASIBLE = "Feasible"
    MARGINAL = "Marginal"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class LinkBudgetInput:
    """Inputs of a single link budget.

    ``geometry=None`` means ideal capture (no beam-spread loss).
    """

    tx_power: PowerDbm = PowerDbm(DEFAULT_TX_POWER_DBM)
    geometry: Optional[GeometryParams] = None
    alpha: SpecificAttenuationDbPerKm = SpecificAttenuationDbPerKm(0.0)
    length: LengthKm = LengthKm(0.0)
    extra_loss_db: float = 0.0
    sensitivity: PowerDbm = PowerDbm(DEFAULT_SENSITIVITY_DBM)

    def __post_init__(self) -> None:
        require_non_negative("length", self.length)
        require_non_negative("alpha", self.alpha)
        require_non_negative("extra_loss_db", self.extra_loss_db)
        lo, hi = SENSITIVITY_WINDOW_DBM
        if not lo <= self.sensitivity <= hi:
            raise ConfigurationError(
                f"sensitivity {self.sensitivity} dBm outside sanity window [{lo}, {hi}] dBm"
            )

    def at_length(self, length: float) -> "LinkBudgetInput":
        return replace(self, length=LengthKm(length))


@dataclass(frozen=True)
class LinkBudgetResult:
    received_power: PowerDbm
    margin_db: float
    link_class: LinkClass


def capture_fraction(geometry: Optional[GeometryParams], length: LengthKm) -> float:
    if geometry is None:
        return 1.0
    return geometric_capture_fraction(geometry, length)


def total_path_loss_db(inp: LinkBudgetInput) -> float:
    geo = capture_fraction(inp.geometry, inp.length)
    return path_loss_db(geo, inp.alpha, inp.length, inp.extra_loss_db)


def received_power(inp: LinkBudgetInput) -> PowerDbm:
    return PowerDbm(inp.tx_power - total_path_loss_db(inp))


def link_margin(p_r: PowerDbm, s: PowerDbm) -> float:
    """Link margin in dB.

    ``10 log10(P_R / s)`` with both powers in linear units is the same number
    as ``P_R[dBm] - s[dBm]``; the subtraction form is used since both are
    carried in dBm.
    """
    return p_r - s


def classify(
    margin_db: float, thresholds: tuple[float, float] = DEFAULT_THRESHOLDS
) -> LinkClass:
    """Map a margin to a feasibility class.

    ``thresholds`` is ``(marginal, feasible)``; both boundaries are inclusive
    on the upper side, so a margin equal to the feasible threshold is Feasible.
    """
    marginal, feasible = thresholds
    if marginal > feasible:
        raise ConfigurationError(f"marginal threshold {marginal} exceeds feasible threshold {feasible}")
    if margin_db >= feasible:
        return LinkClass.FEASIBLE
    if margin_db >= marginal:
        return LinkClass.MARGINAL
    return LinkClass.INFEASIBLE


def evaluate(
    inp: LinkBudgetInput, thresholds: tuple[float, float] = DEFAULT_THRESHOLDS
) -> LinkBudgetResult:
    p_r = received_power(inp)
    margin = link_margin(p_r, inp.sensitivity)
    return LinkBudgetResult(p_r, margin, classify(margin, thresholds))


def max_range(
    inp: LinkBudgetInput,
    required_margin_db: float = 0.0,
    cap_km: float = MAX_RANGE_CAP_KM,
    resolution_km: float = MAX_RANGE_RESOLUTION_KM,
) -> Optional[LengthKm]:
    """Longest path length that still meets ``required_margin_db``.

    ``inp.length`` is ignored. Returns ``None`` when the margin requirement
    fails even at zero length, and ``cap_km`` when it still holds at the cap
    (e.g. a lossless path). Otherwise the result is the feasible end of a
    bisection bracket no wider than ``resolution_km``.
    """

    def meets(length: float) -> bool:
        return link_margin(received_power(inp.at_length(length)), inp.sensitivity) >= required_margin_db

    if not meets(0.0):
        return None
    if meets(cap_km):
        return LengthKm(cap_km)
    lo, hi = 0.0, cap_km
    for _ in range(MAX_BISECTION_STEPS):
        if hi - lo <= resolution_km:
            return LengthKm(lo)
        mid = 0.5 * (lo + hi)
        if meets(mid):
            lo = mid
        else:
            hi = mid
    raise RuntimeError("max_range bisection did not converge")
