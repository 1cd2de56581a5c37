"""Loss mechanisms of a horizontal free-space optical path.

Covers beam-spread (geometric) loss, exponential extinction, visibility-driven
fog attenuation and rain-rate-driven attenuation. Specific attenuations are
always returned in dB/km; extinction coefficients (1/km) are converted through
:func:`fsolink.units.extinction_to_db` and never mixed with dB values.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .units import (
    ApertureM,
    DivergenceMrad,
    DomainError,
    ExtinctionPerKm,
    LengthKm,
    RainRateMmHr,
    SpecificAttenuationDbPerKm,
    VisibilityKm,
    WavelengthNm,
    extinction_to_db,
    require_non_negative,
    require_positive,
)

# Visibility is defined at 2% contrast: -ln(0.02) = 3.912, conventionally 3.91.
VISIBILITY_CONTRAST_CONSTANT = 3.91
VISIBILITY_REFERENCE_NM = 550.0


class FogModel(str, enum.Enum):
    KIM = "kim"
    KRUSE = "kruse"
    NABOULSI_ADVECTION = "naboulsi-advection"
    NABOULSI_CONVECTION = "naboulsi-convection"


class UnsupportedModelError(ValueError):
    pass


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class GeometryParams:
    """Transmit/receive aperture diameters and full-angle beam divergence.

    The beam diameter at range ``l`` is ``d_tx + divergence * l``; for a
    half-angle divergence specification pass twice the value.
    """

    d_tx: ApertureM
    d_rx: ApertureM
    divergence: DivergenceMrad

    def __post_init__(self) -> None:
        require_positive("d_tx", self.d_tx)
        require_positive("d_rx", self.d_rx)
        require_positive("divergence", self.divergence)


@dataclass(frozen=True)
class RainCurve:
    """Measured (rain rate, specific attenuation) points for interpolation."""

    rates: tuple[float, ...]
    attenuations: tuple[float, ...]

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.rates)
        atts = tuple(float(a) for a in self.attenuations)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "attenuations", atts)
        if len(rates) != len(atts):
            raise ValueError("rates and attenuations differ in length")
        if len(rates) < 2:
            raise ValueError("a rain curve needs at least 2 points")
        if any(r < 0 for r in rates) or any(a < 0 for a in atts):
            raise ValueError("rain curve values must be non-negative")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("rain rates must be strictly increasing")
        if any(b < a for a, b in zip(atts, atts[1:])):
            raise ValueError("rain attenuations must be non-decreasing")

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "RainCurve":
        pts = list(points)
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    @classmethod
    def from_csv(cls, path: str | Path) -> "RainCurve":
        """Load a ``rate_mm_hr,atten_db_km`` CSV file."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                "rate_mm_hr",
                "atten_db_km",
            ]:
                raise ValueError(f"{path}: expected header 'rate_mm_hr,atten_db_km'")
            points = []
            for lineno, row in enumerate(reader, start=2):
                try:
                    points.append((float(row["rate_mm_hr"]), float(row["atten_db_km"])))
                except (TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad rain curve row {row!r}") from exc
        return cls.from_points(points)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rate_mm_hr", "atten_db_km"])
            writer.writerows(zip(self.rates, self.attenuations))


# Reference optical rain attenuation at 25/50/100/150 mm/h.
REFERENCE_RAIN_CURVE = RainCurve((25.0, 50.0, 100.0, 150.0), (7.3, 14.6, 23.8, 30.38))


def geometric_capture_fraction(g: GeometryParams, l: LengthKm) -> float:
    """Fraction of transmitted power collected by the receive aperture.

    ``divergence`` in mrad times ``l`` in km gives the beam growth directly
    in metres. Clamped to 1 when the aperture is larger than the beam.
    """
    require_non_negative("l", l)
    beam = g.d_tx + g.divergence * l
    return min(1.0, (g.d_rx / beam) ** 2)


def transmittance(sigma: ExtinctionPerKm, l: LengthKm) -> float:
    """Beer-Lambert transmittance ``exp(-sigma * l)``.

    The same exponential law describes both the link transmittance over the
    path length and intensity decay at an arbitrary point ``x``.
    """
    return math.exp(-sigma * l)


def fog_q_exponent(v: VisibilityKm, model: FogModel) -> float:
    """Wavelength-dependence exponent ``q`` of the Kim or Kruse model."""
    require_positive("visibility", v)
    model = FogModel(model)
    if model is FogModel.KRUSE:
        if v > 50:
            return 1.6
        if v > 6:
            return 1.3
        return 0.585 * v ** (1.0 / 3.0)
    if model is FogModel.KIM:
        if v > 50:
            return 1.6
        if v > 6:
            return 1.3
        if v > 1:
            return 0.16 * v + 0.34
        if v > 0.5:
            return v - 0.5
        return 0.0
    raise UnsupportedModelError(f"{model.value} does not use a q exponent")


def fog_specific_attenuation(
    v: VisibilityKm, wavelength: WavelengthNm, model: FogModel
) -> SpecificAttenuationDbPerKm:
    """Specific fog attenuation in dB/km from visibility.

    Kim and Kruse scale the 2%-contrast extinction ``3.91 / v`` by
    ``(lambda / 550 nm) ** -q``. The Al Naboulsi advection and convection
    fits are linear/quadratic in wavelength (micrometres) over ``v``.
    """
    require_positive("visibility", v)
    require_positive("wavelength", wavelength)
    model = FogModel(model)
    if model in (FogModel.KIM, FogModel.KRUSE):
        q = fog_q_exponent(v, model)
        sigma = VISIBILITY_CONTRAST_CONSTANT / v * (wavelength / VISIBILITY_REFERENCE_NM) ** (-q)
    else:
        lam_um = wavelength / 1000.0
        if model is FogModel.NABOULSI_ADVECTION:
            sigma = (0.11478 * lam_um + 3.8367) / v
        else:
            sigma = (0.18126 * lam_um**2 + 0.13709 * lam_um + 3.7502) / v
    return extinction_to_db(ExtinctionPerKm(sigma))


def rain_specific_attenuation(
    r: RainRateMmHr, curve: RainCurve = REFERENCE_RAIN_CURVE
) -> SpecificAttenuationDbPerKm:
    """Piecewise-linear interpolation of a rain curve.

    Below the first point the line runs through the origin; above the last
    point the final segment is extended.
    """
    require_non_negative("rain rate", r)
    rates = list(curve.rates)
    atts = list(curve.attenuations)
    if rates[0] > 0:
        rates.insert(0, 0.0)
        atts.insert(0, 0.0)
    if r <= rates[-1]:
        return SpecificAttenuationDbPerKm(float(np.interp(r, rates, atts)))
    slope = (atts[-1] - atts[-2]) / (rates[-1] - rates[-2])
    return SpecificAttenuationDbPerKm(atts[-1] + slope * (r - rates[-1]))


def fit_rain_powerlaw(curve: RainCurve) -> tuple[float, float]:
    """Least-squares fit of ``A = k * R**a`` in log-log space.

    Returns
    -------
    (k, a) : tuple of float
    """
    rates = np.asarray(curve.rates, dtype=float)
    atts = np.asarray(curve.attenuations, dtype=float)
    if rates.size < 2:
        raise FitError("need at least 2 points")
    if np.any(rates <= 0) or np.any(atts <= 0):
        raise FitError("power-law fit needs strictly positive rates and attenuations")
    x = np.log(rates)
    if np.ptp(x) == 0:
        raise FitError("all rain rates are equal")
    a, log_k = np.polyfit(x, np.log(atts), 1)
    return float(math.exp(log_k)), float(a)


def powerlaw_attenuation(r: RainRateMmHr, k: float, a: float) -> SpecificAttenuationDbPerKm:
    require_non_negative("rain rate", r)
    return SpecificAttenuationDbPerKm(k * r**a)


def path_loss_db(
    geo_fraction: float,
    alpha: SpecificAttenuationDbPerKm,
    l: LengthKm,
    extra_db: float = 0.0,
) -> float:
    """Total positive path loss: geometric + atmospheric + lumped extra, in dB."""
    if not geo_fraction > 0 or geo_fraction > 1:
        raise DomainError(f"geometric capture fraction must be in (0, 1], got {geo_fraction!r}")
    require_non_negative("alpha", alpha)
    require_non_negative("length", l)
    require_non_negative("extra loss", extra_db)
    return -10.0 * math.log10(geo_fraction) + alpha * l + extra_db

