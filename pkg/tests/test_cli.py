import csv
import io
import json

import pytest

from fsolink.cli import main, parse_range, UsageError
from fsolink.scenarios import bundled_weather_path

HEADER = "label,condition,rain_rate_mm_hr,visibility_km,override_atten_db_km\n"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_atten_rain(capsys):
    code, out, _ = run(capsys, "atten", "rain", "--rate", "25")
    assert code == 0 and json.loads(out)["atten_db_km"] == 7.3
    _, out, _ = run(capsys, "atten", "rain", "--rate", "0")
    assert json.loads(out)["atten_db_km"] == 0.0


def test_atten_fog(capsys):
    _, out, _ = run(capsys, "atten", "fog", "--visibility", "0.2", "--wavelength", "1550", "--model", "kim")
    assert round(json.loads(out)["atten_db_km"], 2) == 84.90


def test_atten_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["atten", "fog"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["atten", "rain", "--rate", "-3"])
    assert exc.value.code == 2


def test_budget(capsys):
    _, out, _ = run(
        capsys, "budget", "--distance", "1", "--atten", "30.38", "--tx-power", "5", "--sensitivity", "-40", "--geo", "ideal"
    )
    assert json.loads(out)["margin_db"] == pytest.approx(14.62, abs=1e-9)
    _, out, _ = run(capsys, "budget", "--distance", "0", "--atten", "30.38", "--tx-power", "3", "--sensitivity", "-33")
    assert json.loads(out)["margin_db"] == 36.0
    _, out, _ = run(
        capsys, "budget", "--distance", "0.5", "--atten", "100", "--tx-power", "5", "--sensitivity", "-45", "--geo", "ideal"
    )
    res = json.loads(out)
    assert res["margin_db"] == pytest.approx(0.0, abs=1e-9)
    assert res["class"] == "Marginal"


def test_budget_domain_error_names_flag(capsys):
    code, _, err = run(capsys, "budget", "--distance", "1", "--atten", "1", "--sensitivity", "-70")
    assert code == 4
    assert "--sensitivity" in err


def test_max_range(capsys):
    _, out, _ = run(capsys, "max-range", "--atten", "100", "--sensitivity", "-45")
    assert json.loads(out)["max_range_km"] == pytest.approx(0.5, abs=1e-3)
    _, out, _ = run(capsys, "max-range", "--atten", "10", "--required-margin", "60")
    assert json.loads(out)["status"] == "no-range"
    _, out, _ = run(capsys, "max-range", "--atten", "0")
    assert json.loads(out)["status"] == "capped"


def test_simulate_and_eye(capsys, tmp_path):
    eye = tmp_path / "eye.csv"
    code, out, _ = run(capsys, "simulate", "--loss", "20", "--emit-eye", str(eye))
    assert code == 0
    metrics = json.loads(out)
    assert set(metrics) >= {"mu1", "mu0", "sigma1", "sigma0", "q_factor", "ber", "decision_phase"}
    rows = list(csv.reader(eye.open()))
    assert rows[0][0] == "t0" and rows[0][-1] == "t127"
    assert all(len(r) == 128 for r in rows)
    _, again, _ = run(capsys, "simulate", "--loss", "20")
    assert again == out


def test_simulate_rejects_conflicting_loss_flags(capsys):
    code, _, _ = run(capsys, "simulate", "--loss", "20", "--atten", "3")
    assert code == 2


def test_simulate_from_atten_uses_path_loss(capsys):
    _, out, _ = run(capsys, "simulate", "--atten", "30.38", "--distance", "1", "--geo", "aperture")
    assert json.loads(out)["channel_loss_db"] == pytest.approx(50.594477307835461, rel=1e-12)


def test_scan_rain_rate(capsys):
    _, out, _ = run(capsys, "scan", "--param", "rain-rate", "--range", "0:150:25", "--no-physim")
    rows = list(csv.DictReader(io.StringIO(out)))
    atten = {float(r["rain_rate"]): float(r["alpha_db_km"]) for r in rows}
    assert [atten[r] for r in (25, 50, 100, 150)] == [7.3, 14.6, 23.8, 30.38]
    assert len(rows) == 7


def test_scan_atten_q_decreasing(capsys):
    _, out, _ = run(capsys, "scan", "--param", "atten", "--range", "0:40:5", "--distance", "1")
    q = [float(r["q_factor"]) for r in csv.DictReader(io.StringIO(out))]
    assert len(q) == 9
    assert all(b < a for a, b in zip(q, q[1:]))


def test_scan_single_row_and_inverted(capsys):
    _, out, _ = run(capsys, "scan", "--param", "distance", "--range", "0.1:0.2:5", "--atten", "10", "--no-physim")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1 and float(rows[0]["distance"]) == 0.1
    code, _, _ = run(capsys, "scan", "--param", "atten", "--range", "5:1:1")
    assert code == 2


def test_parse_range():
    assert parse_range("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    for bad in ("1:0:1", "0:1:0", "0:1", "a:b:c"):
        with pytest.raises(UsageError):
            parse_range(bad)


def test_scenario_fog_override(capsys, tmp_path):
    weather = tmp_path / "w.csv"
    weather.write_text(HEADER + "fog,Fog,,,100\n")
    code, out, _ = run(capsys, "scenario", "--weather", str(weather))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 13
    assert rows[0]["class"] == "Feasible" and rows[12]["class"] == "Infeasible"


def test_scenario_clear_all_feasible(capsys, tmp_path):
    weather = tmp_path / "w.csv"
    weather.write_text(HEADER + "clear,Clear,,,\n")
    _, out, _ = run(capsys, "scenario", "--weather", str(weather))
    assert {r["class"] for r in csv.DictReader(io.StringIO(out))} == {"Feasible"}


def test_scenario_missing_weather_file(capsys, tmp_path):
    out_path = tmp_path / "report.csv"
    code, out, err = run(capsys, "scenario", "--weather", str(tmp_path / "nope.csv"), "--output", str(out_path))
    assert code == 3
    assert out == "" and not out_path.exists()
    assert not (tmp_path / "report_availability.json").exists()


def test_scenario_schema_error_names_row(capsys, tmp_path):
    weather = tmp_path / "w.csv"
    weather.write_text(HEADER + "ok,Clear,,,\nbad,Fog,,xyz,\n")
    code, _, err = run(capsys, "scenario", "--weather", str(weather))
    assert code == 3
    assert ":3: column 'visibility_km'" in err


def test_scenario_row_errors_stay_in_band(capsys, tmp_path):
    weather = tmp_path / "w.csv"
    weather.write_text(HEADER + "bad,Rain,,,\n")
    code, out, _ = run(capsys, "scenario", "--weather", str(weather))
    assert code == 0
    assert all(r["error"] for r in csv.DictReader(io.StringIO(out)))


def test_scenario_writes_availability(capsys, tmp_path):
    out_path = tmp_path / "report.csv"
    code, _, _ = run(capsys, "scenario", "--weather", str(bundled_weather_path()), "--output", str(out_path))
    assert code == 0
    avail = json.loads((tmp_path / "report_availability.json").read_text())
    assert set(avail["availability"]) == {str(i) for i in range(1, 14)}
    first = out_path.read_bytes()
    run(capsys, "scenario", "--weather", str(bundled_weather_path()), "--output", str(out_path))
    assert out_path.read_bytes() == first


def test_scenario_physim_fills_q(capsys, tmp_path):
    weather = tmp_path / "w.csv"
    weather.write_text(HEADER + "clear,Clear,,,\n")
    _, out, _ = run(capsys, "scenario", "--weather", str(weather), "--physim")
    assert all(float(r["q_factor"]) > 0 for r in csv.DictReader(io.StringIO(out)))


def test_links(capsys):
    _, out, _ = run(capsys, "links")
    links = json.loads(out)
    assert len(links) == 13 and links[12]["distance_km"] == 1.728


def _as_floats(d):
    out = {}
    for k, v in d.items():
        try:
            out[k] = float(v) if v not in ("", None) else None
        except (TypeError, ValueError):
            out[k] = v
    return out


@pytest.mark.parametrize(
    "argv",
    [
        ["links"],
        ["atten", "fog", "--visibility", "0.3", "--model", "kruse"],
        ["budget", "--distance", "0.7", "--atten", "12.5", "--geo", "aperture"],
        ["simulate", "--loss", "18"],
        ["scan", "--param", "visibility", "--range", "0.2:1:0.2"],
    ],
)
def test_json_and_csv_encode_same_values(capsys, argv):
    _, js, _ = run(capsys, *argv, "--format", "json")
    _, cs, _ = run(capsys, *argv, "--format", "csv")
    from_json = json.loads(js)
    if isinstance(from_json, dict):
        from_json = [from_json]
    from_csv = list(csv.DictReader(io.StringIO(cs)))
    assert [_as_floats(r) for r in from_csv] == [_as_floats(r) for r in from_json]
