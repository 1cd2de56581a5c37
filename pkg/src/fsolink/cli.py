"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 input/schema error, 4 domain error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

from . import linkbudget as lb
from . import physim, scenarios
from .attenuation import (
    REFERENCE_RAIN_CURVE,
    FogModel,
    GeometryParams,
    RainCurve,
    fog_specific_attenuation,
    rain_specific_attenuation,
)
from .units import DomainError

EXIT_OK, EXIT_USAGE, EXIT_SCHEMA, EXIT_DOMAIN = 0, 2, 3, 4


class UsageError(Exception):
    pass


# --- argument types --------------------------------------------------------


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = _finite(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _pos(text: str) -> float:
    v = _finite(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _pos_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return v


def _extinction(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return _pos(text)


def parse_range(text: str) -> list[float]:
    """``a:b:step`` -> inclusive list of sweep points starting at ``a``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--range must look like a:b:step, got {text!r}")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--range has a non-numeric field: {text!r}") from None
    if not step > 0:
        raise UsageError("--range step must be > 0")
    if b < a:
        raise UsageError(f"--range is inverted: {a} > {b}")
    n = int(math.floor((b - a) / step + 1e-9))
    return [a + i * step for i in range(n + 1)]


# --- output ----------------------------------------------------------------


def _csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render(records: list[dict[str, Any]], fmt: str, single: bool = False) -> str:
    if fmt == "json":
        return json.dumps(records[0] if single else records, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(records[0].keys()) if records else []
    writer.writerow(header)
    for rec in records:
        writer.writerow([_csv_value(rec[k]) for k in header])
    return buf.getvalue()


def _write(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- shared flag groups ----------------------------------------------------


def _add_common(p: argparse.ArgumentParser, default_format: str = "json") -> None:
    p.add_argument("--output", help="write result to this file instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=default_format)
    p.add_argument("--seed", type=_pos_int, default=1, help="PRBS seed (default 1)")


def _add_budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tx-power", type=_finite, default=lb.DEFAULT_TX_POWER_DBM, help="dBm")
    p.add_argument("--sensitivity", type=_finite, default=lb.DEFAULT_SENSITIVITY_DBM, help="dBm")
    p.add_argument("--extra-loss", type=_nonneg, default=0.0, help="lumped extra loss, dB")
    p.add_argument("--geo", choices=("ideal", "aperture"), default="ideal")
    p.add_argument("--d-tx", type=_pos, default=0.05, help="transmit aperture, m")
    p.add_argument("--d-rx", type=_pos, default=0.2, help="receive aperture, m")
    p.add_argument("--divergence", type=_pos, default=2.0, help="full-angle divergence, mrad")
    p.add_argument("--marginal-threshold", type=_finite, default=lb.DEFAULT_THRESHOLDS[0])
    p.add_argument("--feasible-threshold", type=_finite, default=lb.DEFAULT_THRESHOLDS[1])


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bit-rate", type=_pos, default=10e9)
    p.add_argument("--sequence-length", type=_pos_int, default=128)
    p.add_argument("--samples-per-bit", type=_pos_int, default=64)
    p.add_argument("--extinction", type=_extinction, default=30.0, help="MZM extinction ratio, dB")
    p.add_argument("--prbs-order", type=int, default=7)
    p.add_argument("--rx-cutoff", type=_pos, default=None, help="Hz (default 0.75 x bit rate)")
    p.add_argument("--rx-order", type=int, default=4)
    p.add_argument("--gain", type=_finite, default=3.0)
    p.add_argument("--responsivity", type=_pos, default=1.0)
    p.add_argument("--ionization-ratio", type=_finite, default=0.9)
    p.add_argument("--dark-current", type=_pos, default=10e-9)
    p.add_argument("--temperature", type=_pos, default=293.0)
    p.add_argument("--load-resistance", type=_pos, default=50.0)


def _geometry(args) -> Optional[GeometryParams]:
    if args.geo == "ideal":
        return None
    return GeometryParams(args.d_tx, args.d_rx, args.divergence)


def _thresholds(args) -> tuple[float, float]:
    return (args.marginal_threshold, args.feasible_threshold)


def _budget_input(args, alpha: float, length: float) -> lb.LinkBudgetInput:
    try:
        return lb.LinkBudgetInput(
            tx_power=args.tx_power,
            geometry=_geometry(args),
            alpha=alpha,
            length=length,
            extra_loss_db=args.extra_loss,
            sensitivity=args.sensitivity,
        )
    except lb.ConfigurationError as exc:
        raise DomainError(f"--sensitivity: {exc}") from exc


def _sim_config(args, loss_db: float = 0.0) -> physim.SimConfig:
    apd = physim.ApdParams(
        responsivity=args.responsivity,
        gain=args.gain,
        ionization_ratio=args.ionization_ratio,
        dark_current=args.dark_current,
        temperature=args.temperature,
        load_resistance=args.load_resistance,
    )
    return physim.SimConfig(
        bit_rate=args.bit_rate,
        sequence_length=args.sequence_length,
        samples_per_bit=args.samples_per_bit,
        laser_power=args.tx_power,
        mzm_extinction_db=args.extinction,
        channel_loss_db=loss_db,
        apd=apd,
        rx_filter_cutoff=args.rx_cutoff,
        rx_filter_order=args.rx_order,
        prbs_order=args.prbs_order,
        seed=args.seed,
    )


def _rain_curve(args) -> RainCurve:
    path = getattr(args, "rain_curve", None)
    if not path:
        return REFERENCE_RAIN_CURVE
    try:
        return RainCurve.from_csv(path)
    except (OSError, ValueError) as exc:
        raise scenarios.SchemaError(f"--rain-curve: {exc}") from exc


# --- subcommands -----------------------------------------------------------


def cmd_atten(args) -> str:
    if args.kind == "rain":
        value = rain_specific_attenuation(args.rate, _rain_curve(args))
        rec = {"condition": "rain", "rain_rate_mm_hr": args.rate, "atten_db_km": value}
    else:
        value = fog_specific_attenuation(args.visibility, args.wavelength, FogModel(args.model))
        rec = {
            "condition": "fog",
            "model": args.model,
            "visibility_km": args.visibility,
            "wavelength_nm": args.wavelength,
            "atten_db_km": value,
        }
    return render([rec], args.format, single=True)


def cmd_budget(args) -> str:
    inp = _budget_input(args, args.atten, args.distance)
    res = lb.evaluate(inp, _thresholds(args))
    rec = {
        "distance_km": args.distance,
        "atten_db_km": args.atten,
        "path_loss_db": lb.total_path_loss_db(inp),
        "rx_power_dbm": res.received_power,
        "margin_db": res.margin_db,
        "class": res.link_class.value,
    }
    return render([rec], args.format, single=True)


def cmd_max_range(args) -> str:
    inp = _budget_input(args, args.atten, 0.0)
    r = lb.max_range(inp, args.required_margin, cap_km=args.cap)
    status = "no-range" if r is None else ("capped" if r >= args.cap else "ok")
    rec = {"atten_db_km": args.atten, "required_margin_db": args.required_margin, "max_range_km": r, "status": status}
    return render([rec], args.format, single=True)


def _channel_loss(args) -> float:
    if args.loss is not None:
        return args.loss
    if args.atten is None:
        return 0.0
    return lb.total_path_loss_db(_budget_input(args, args.atten, args.distance))


def cmd_simulate(args) -> str:
    if args.loss is not None and args.atten is not None:
        raise UsageError("give either --loss or --atten/--distance, not both")
    cfg = _sim_config(args, _channel_loss(args))
    metrics, eye = physim.simulate_link(cfg)
    if args.emit_eye:
        eye.to_csv(args.emit_eye)
    rec = {"channel_loss_db": cfg.channel_loss_db, **metrics.to_dict()}
    return render([rec], args.format, single=True)


def cmd_scan(args) -> str:
    points = parse_range(args.range)
    model = FogModel(args.model)
    curve = _rain_curve(args)
    rows = []
    for x in points:
        distance, alpha = args.distance, args.atten
        if args.param == "atten":
            alpha = x
        elif args.param == "distance":
            distance = x
        elif args.param == "rain-rate":
            alpha = rain_specific_attenuation(x, curve)
        else:
            alpha = fog_specific_attenuation(x, args.wavelength, model)
        if alpha is None:
            raise UsageError(f"--atten is required when sweeping {args.param}")
        inp = _budget_input(args, alpha, distance)
        res = lb.evaluate(inp, _thresholds(args))
        loss = lb.total_path_loss_db(inp)
        q = ber = None
        if not args.no_physim:
            metrics, _ = physim.simulate_link(_sim_config(args, loss))
            q, ber = metrics.q_factor, metrics.ber
        rows.append(
            {
                args.param.replace("-", "_"): x,
                "distance_km": distance,
                "alpha_db_km": alpha,
                "path_loss_db": loss,
                "rx_power_dbm": res.received_power,
                "margin_db": res.margin_db,
                "class": res.link_class.value,
                "q_factor": q,
                "ber": ber,
            }
        )
    return render(rows, args.format)


def cmd_scenario(args) -> str:
    try:
        links = scenarios.load_links(args.links) if args.links else scenarios.builtin_topology()
        records = scenarios.load_weather(args.weather)
    except OSError as exc:
        raise scenarios.SchemaError(str(exc)) from exc
    if not records:
        raise scenarios.SchemaError(f"{args.weather}: no weather records")
    params = scenarios.BudgetParams(
        tx_power=args.tx_power,
        geometry=_geometry(args),
        extra_loss_db=args.extra_loss,
        sensitivity=args.sensitivity,
        thresholds=_thresholds(args),
        wavelength=args.wavelength,
        fog_model=FogModel(args.model),
        rain_curve=_rain_curve(args),
        clear_air_atten=args.clear_atten,
        sim=replace(_sim_config(args), laser_power=args.tx_power),
    )
    report = scenarios.evaluate_matrix(links, records, params, run_physim=args.physim)
    avail = scenarios.availability(report, args.availability_threshold)
    avail_json = json.dumps(
        {"threshold_db": args.availability_threshold, "availability": {str(k): v for k, v in avail.items()}},
        indent=2,
    ) + "\n"
    avail_path = args.availability
    if avail_path is None and args.output:
        out = Path(args.output)
        avail_path = str(out.with_name(out.stem + "_availability.json"))
    if avail_path:
        Path(avail_path).write_text(avail_json, encoding="utf-8")
    if args.format == "json":
        rows = [
            {
                "link_id": r.link_id,
                "weather_label": r.weather_label,
                "alpha_db_km": r.alpha_db_km,
                "rx_power_dbm": r.rx_power_dbm,
                "margin_db": r.margin_db,
                "class": r.link_class.value if r.link_class else None,
                "q_factor": r.q_factor,
                "ber": r.ber,
                "error": r.error,
            }
            for r in report.rows
        ]
        return render(rows, "json")
    return report.to_csv()


def cmd_links(args) -> str:
    rows = [
        {"id": l.id, "tx_building": l.tx_building, "rx_building": l.rx_building, "distance_km": l.distance}
        for l in scenarios.builtin_topology()
    ]
    return render(rows, args.format)


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsolink", description="Free-space optical link toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    atten = sub.add_parser("atten", help="specific attenuation in dB/km")
    atten_sub = atten.add_subparsers(dest="kind", required=True)
    fog = atten_sub.add_parser("fog")
    fog.add_argument("--visibility", type=_pos, required=True, help="km")
    fog.add_argument("--wavelength", type=_pos, default=1550.0, help="nm")
    fog.add_argument("--model", choices=[m.value for m in FogModel], default=FogModel.KIM.value)
    _add_common(fog)
    rain = atten_sub.add_parser("rain")
    rain.add_argument("--rate", type=_nonneg, required=True, help="mm/h")
    rain.add_argument("--rain-curve", help="CSV with rate_mm_hr,atten_db_km")
    _add_common(rain)
    fog.set_defaults(func=cmd_atten)
    rain.set_defaults(func=cmd_atten)

    budget = sub.add_parser("budget", help="received power, margin and class")
    budget.add_argument("--distance", type=_nonneg, required=True, help="km")
    budget.add_argument("--atten", type=_nonneg, required=True, help="dB/km")
    _add_budget_flags(budget)
    _add_common(budget)
    budget.set_defaults(func=cmd_budget)

    mr = sub.add_parser("max-range", help="longest range meeting a margin")
    mr.add_argument("--atten", type=_nonneg, required=True, help="dB/km")
    mr.add_argument("--required-margin", type=_finite, default=0.0, help="dB")
    mr.add_argument("--cap", type=_pos, default=lb.MAX_RANGE_CAP_KM, help="km")
    _add_budget_flags(mr)
    _add_common(mr)
    mr.set_defaults(func=cmd_max_range)

    sim = sub.add_parser("simulate", help="sample-level OOK link simulation")
    sim.add_argument("--loss", type=_nonneg, default=None, help="total channel loss, dB")
    sim.add_argument("--atten", type=_nonneg, default=None, help="dB/km (with --distance)")
    sim.add_argument("--distance", type=_nonneg, default=1.0, help="km")
    sim.add_argument("--emit-eye", help="write eye-diagram traces to this CSV")
    _add_budget_flags(sim)
    _add_sim_flags(sim)
    _add_common(sim)
    sim.set_defaults(func=cmd_simulate)

    scan = sub.add_parser("scan", help="sweep one parameter")
    scan.add_argument("--param", choices=("atten", "distance", "rain-rate", "visibility"), required=True)
    scan.add_argument("--range", required=True, help="a:b:step")
    scan.add_argument("--atten", type=_nonneg, default=None, help="dB/km when not swept")
    scan.add_argument("--distance", type=_nonneg, default=1.0, help="km when not swept")
    scan.add_argument("--wavelength", type=_pos, default=1550.0, help="nm")
    scan.add_argument("--model", choices=[m.value for m in FogModel], default=FogModel.KIM.value)
    scan.add_argument("--rain-curve", help="CSV with rate_mm_hr,atten_db_km")
    scan.add_argument("--no-physim", action="store_true", help="skip Q/BER simulation")
    _add_budget_flags(scan)
    _add_sim_flags(scan)
    _add_common(scan, default_format="csv")
    scan.set_defaults(func=cmd_scan)

    sc = sub.add_parser("scenario", help="links x weather feasibility report")
    sc.add_argument("--links", help="links JSON (default: built-in topology)")
    sc.add_argument("--weather", required=True, help="weather CSV")
    sc.add_argument("--physim", action="store_true", help="also simulate Q/BER per row")
    sc.add_argument("--availability", help="write availability JSON here")
    sc.add_argument("--availability-threshold", type=_finite, default=0.0, help="margin threshold, dB")
    sc.add_argument("--clear-atten", type=_nonneg, default=scenarios.CLEAR_AIR_ATTEN_DB_KM, help="dB/km")
    sc.add_argument("--wavelength", type=_pos, default=1550.0, help="nm")
    sc.add_argument("--model", choices=[m.value for m in FogModel], default=FogModel.KIM.value)
    sc.add_argument("--rain-curve", help="CSV with rate_mm_hr,atten_db_km")
    _add_budget_flags(sc)
    _add_sim_flags(sc)
    _add_common(sc, default_format="csv")
    sc.set_defaults(func=cmd_scenario)

    links = sub.add_parser("links", help="print the built-in link topology")
    _add_common(links)
    links.set_defaults(func=cmd_links)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fsolink: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except scenarios.SchemaError as exc:
        print(f"fsolink: input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"fsolink: I/O error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ValueError as exc:
        print(f"fsolink: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    _write(text, args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
