"""Batch evaluation of a link topology against weather records."""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import linkbudget as lb
from .attenuation import (
    REFERENCE_RAIN_CURVE,
    FogModel,
    GeometryParams,
    RainCurve,
    fog_specific_attenuation,
    rain_specific_attenuation,
)
from .physim import SimConfig, simulate_link
from .units import LengthKm, SpecificAttenuationDbPerKm, WavelengthNm

# Haze-free near-IR extinction; a planning default, not a measured value.
CLEAR_AIR_ATTEN_DB_KM = 0.2

WEATHER_HEADER = ["label", "condition", "rain_rate_mm_hr", "visibility_km", "override_atten_db_km"]
REPORT_HEADER = [
    "link_id",
    "weather_label",
    "alpha_db_km",
    "rx_power_dbm",
    "margin_db",
    "class",
    "q_factor",
    "ber",
    "error",
]


class SchemaError(ValueError):
    """Input file does not follow its schema; message names row and column."""


class RecordError(ValueError):
    pass


class WeatherCondition(str, enum.Enum):
    CLEAR = "Clear"
    RAIN = "Rain"
    FOG = "Fog"


@dataclass(frozen=True)
class LinkDefinition:
    id: int
    tx_building: str
    rx_building: str
    distance: LengthKm

    def __post_init__(self) -> None:
        if not self.distance > 0:
            raise ValueError(f"link {self.id}: distance must be positive")


@dataclass(frozen=True)
class WeatherRecord:
    label: str
    condition: WeatherCondition
    rain_rate: Optional[float] = None
    visibility: Optional[float] = None
    override_atten: Optional[float] = None


@dataclass(frozen=True)
class BudgetParams:
    """Everything besides link and weather that a report row depends on."""

    tx_power: float = lb.DEFAULT_TX_POWER_DBM
    geometry: Optional[GeometryParams] = None
    extra_loss_db: float = 0.0
    sensitivity: float = lb.DEFAULT_SENSITIVITY_DBM
    thresholds: tuple[float, float] = lb.DEFAULT_THRESHOLDS
    wavelength: WavelengthNm = WavelengthNm(1550.0)
    fog_model: FogModel = FogModel.KIM
    rain_curve: RainCurve = REFERENCE_RAIN_CURVE
    clear_air_atten: float = CLEAR_AIR_ATTEN_DB_KM
    sim: SimConfig = field(default_factory=SimConfig)


@dataclass(frozen=True)
class ScenarioRow:
    link_id: int
    weather_label: str
    alpha_db_km: Optional[float] = None
    rx_power_dbm: Optional[float] = None
    margin_db: Optional[float] = None
    link_class: Optional[lb.LinkClass] = None
    q_factor: Optional[float] = None
    ber: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class ScenarioReport:
    rows: tuple[ScenarioRow, ...]

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    r.link_id,
                    r.weather_label,
                    _cell(r.alpha_db_km),
                    _cell(r.rx_power_dbm),
                    _cell(r.margin_db),
                    r.link_class.value if r.link_class else "",
                    _cell(r.q_factor),
                    _cell(r.ber),
                    r.error or "",
                ]
            )

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _cell(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


# --- topology --------------------------------------------------------------

_BUILTIN_LINKS = (
    (1, "Cisco Systems", "KPMG Taseer Hadi & Co", 0.047),
    (2, "Cisco Systems", "Shaheed-e-Millat Secretariat", 0.132),
    (3, "Shaheed-e-Millat Secretariat", "OGDCL", 0.153),
    (4, "OGDCL", "United Bank Limited", 0.068),
    (5, "OGDCL", "Green Trust Tower", 0.103),
    (6, "Green Trust Tower", "HR Consultants", 0.522),
    (7, "Green Trust Tower", "NIC building", 1.452),
    (8, "NIC building", "Huawei technologies Pakistan", 0.191),
    (9, "NIC building", "State Life Tower", 0.064),
    (10, "Huawei technologies Pakistan", "Ufone Tower", 0.659),
    (11, "Ufone Tower", "Islamabad Stock Exchange", 0.050),
    (12, "Ufone Tower", "Centaurs", 0.851),
    (13, "Centaurs", "ZTBL", 1.728),
)


def builtin_topology() -> list[LinkDefinition]:
    """The 13 proposed building-to-building links in Islamabad's Blue Area."""
    return [LinkDefinition(i, tx, rx, LengthKm(d)) for i, tx, rx, d in _BUILTIN_LINKS]


def bundled_links_path() -> Path:
    return Path(str(resources.files("fsolink") / "data" / "islamabad_links.json"))


def bundled_weather_path() -> Path:
    return Path(str(resources.files("fsolink") / "data" / "weather_illustrative.csv"))


def parse_links(data: object, source: str = "<links>") -> list[LinkDefinition]:
    if not isinstance(data, list) or not data:
        raise SchemaError(f"{source}: expected a non-empty JSON array of links")
    links, seen = [], set()
    for i, obj in enumerate(data):
        if not isinstance(obj, dict):
            raise SchemaError(f"{source}: entry {i} is not an object")
        for key in ("id", "tx_building", "rx_building", "distance_km"):
            if key not in obj:
                raise SchemaError(f"{source}: entry {i} missing '{key}'")
        try:
            link = LinkDefinition(
                int(obj["id"]), str(obj["tx_building"]), str(obj["rx_building"]), LengthKm(float(obj["distance_km"]))
            )
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{source}: entry {i}: {exc}") from exc
        if link.id in seen:
            raise SchemaError(f"{source}: entry {i}: duplicate link id {link.id}")
        seen.add(link.id)
        links.append(link)
    return links


def load_links(path: str | Path) -> list[LinkDefinition]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return parse_links(data, str(path))


def dump_links(links: Iterable[LinkDefinition]) -> str:
    return json.dumps(
        [
            {"id": l.id, "tx_building": l.tx_building, "rx_building": l.rx_building, "distance_km": l.distance}
            for l in links
        ],
        indent=2,
    )


# --- weather ---------------------------------------------------------------


def _optional_float(text: str, path: str, lineno: int, column: str) -> Optional[float]:
    text = (text or "").strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{path}:{lineno}: column '{column}' is not a number: {text!r}") from None
    if not math.isfinite(value) or value < 0:
        raise SchemaError(f"{path}:{lineno}: column '{column}' must be a finite non-negative number")
    return value


def read_weather_csv(fh, source: str = "<weather>") -> list[WeatherRecord]:
    reader = csv.DictReader(fh)
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != WEATHER_HEADER:
        raise SchemaError(f"{source}: expected header '{','.join(WEATHER_HEADER)}'")
    records = []
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise SchemaError(f"{source}:{lineno}: expected {len(WEATHER_HEADER)} columns")
        try:
            condition = WeatherCondition(row["condition"].strip().capitalize())
        except ValueError:
            raise SchemaError(
                f"{source}:{lineno}: column 'condition' must be Clear, Rain or Fog, got {row['condition']!r}"
            ) from None
        records.append(
            WeatherRecord(
                label=row["label"].strip(),
                condition=condition,
                rain_rate=_optional_float(row["rain_rate_mm_hr"], source, lineno, "rain_rate_mm_hr"),
                visibility=_optional_float(row["visibility_km"], source, lineno, "visibility_km"),
                override_atten=_optional_float(row["override_atten_db_km"], source, lineno, "override_atten_db_km"),
            )
        )
    return records


def load_weather(path: str | Path) -> list[WeatherRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_weather_csv(fh, str(path))


def record_to_attenuation(
    r: WeatherRecord,
    wavelength: WavelengthNm = WavelengthNm(1550.0),
    fog_model: FogModel = FogModel.KIM,
    rain_curve: RainCurve = REFERENCE_RAIN_CURVE,
    clear_air_atten: float = CLEAR_AIR_ATTEN_DB_KM,
) -> SpecificAttenuationDbPerKm:
    """Specific attenuation implied by one weather record.

    An explicit override wins; otherwise rain uses the rain curve, fog the
    chosen visibility model, and clear air a fixed planning constant.
    """
    if r.override_atten is not None:
        return SpecificAttenuationDbPerKm(r.override_atten)
    if r.condition is WeatherCondition.RAIN:
        if r.rain_rate is None:
            raise RecordError(f"record {r.label!r}: Rain needs rain_rate_mm_hr or override_atten_db_km")
        return rain_specific_attenuation(r.rain_rate, rain_curve)
    if r.condition is WeatherCondition.FOG:
        if r.visibility is None:
            raise RecordError(f"record {r.label!r}: Fog needs visibility_km or override_atten_db_km")
        if not r.visibility > 0:
            raise RecordError(f"record {r.label!r}: visibility must be positive")
        return fog_specific_attenuation(r.visibility, wavelength, fog_model)
    return SpecificAttenuationDbPerKm(clear_air_atten)


# --- batch -----------------------------------------------------------------


def evaluate_pair(
    link: LinkDefinition, record: WeatherRecord, params: BudgetParams, run_physim: bool = False
) -> ScenarioRow:
    try:
        alpha = record_to_attenuation(
            record, params.wavelength, params.fog_model, params.rain_curve, params.clear_air_atten
        )
        inp = lb.LinkBudgetInput(
            tx_power=params.tx_power,
            geometry=params.geometry,
            alpha=alpha,
            length=link.distance,
            extra_loss_db=params.extra_loss_db,
            sensitivity=params.sensitivity,
        )
        result = lb.evaluate(inp, params.thresholds)
        q = ber = None
        if run_physim:
            cfg = replace(params.sim, laser_power=params.tx_power, channel_loss_db=lb.total_path_loss_db(inp))
            metrics, _ = simulate_link(cfg)
            q, ber = metrics.q_factor, metrics.ber
    except ValueError as exc:
        return ScenarioRow(link.id, record.label, error=f"{type(exc).__name__}: {exc}")
    return ScenarioRow(
        link.id, record.label, alpha, result.received_power, result.margin_db, result.link_class, q, ber
    )


def evaluate_matrix(
    links: Sequence[LinkDefinition],
    records: Sequence[WeatherRecord],
    params: BudgetParams = BudgetParams(),
    run_physim: bool = False,
    max_workers: Optional[int] = None,
) -> ScenarioReport:
    """Evaluate every (link, record) pair; link-major, record-minor order.

    Row-level failures are captured in the row's ``error`` field. With
    ``max_workers > 1`` pairs run on a thread pool; ordering is unchanged.
    """
    if not links:
        raise ValueError("no links to evaluate")
    if not records:
        raise ValueError("no weather records to evaluate")
    pairs = [(l, r) for l in links for r in records]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            rows = list(pool.map(lambda p: evaluate_pair(p[0], p[1], params, run_physim), pairs))
    else:
        rows = [evaluate_pair(l, r, params, run_physim) for l, r in pairs]
    return ScenarioReport(tuple(rows))


def availability(report: ScenarioReport, margin_threshold_db: float = 0.0) -> dict[int, float]:
    """Per link, the fraction of weather records whose margin meets the threshold.

    Rows that errored count as unavailable.
    """
    if not report.rows:
        raise ValueError("empty report")
    total: dict[int, int] = {}
    passed: dict[int, int] = {}
    for r in report.rows:
        total[r.link_id] = total.get(r.link_id, 0) + 1
        ok = r.margin_db is not None and r.margin_db >= margin_threshold_db
        passed[r.link_id] = passed.get(r.link_id, 0) + int(ok)
    return {k: passed[k] / total[k] for k in total}
