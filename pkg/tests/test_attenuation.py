import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fsolink.attenuation import (
    REFERENCE_RAIN_CURVE,
    FitError,
    FogModel,
    GeometryParams,
    RainCurve,
    UnsupportedModelError,
    fit_rain_powerlaw,
    fog_q_exponent,
    fog_specific_attenuation,
    geometric_capture_fraction,
    path_loss_db,
    powerlaw_attenuation,
    rain_specific_attenuation,
    transmittance,
)
from fsolink.units import DomainError

TABLE_GEO = GeometryParams(0.05, 0.2, 2.0)


# --- geometric -------------------------------------------------------------


def test_geometric_capture_one_km():
    frac = geometric_capture_fraction(TABLE_GEO, 1.0)
    assert frac == pytest.approx(0.0095181439619274258, rel=1e-12)
    assert -10 * math.log10(frac) == pytest.approx(20.214477307835461, rel=1e-12)


def test_geometric_capture_two_km():
    assert geometric_capture_fraction(TABLE_GEO, 2.0) == pytest.approx(0.0024386526444139615, rel=1e-12)


def test_geometric_capture_zero_range_matched_apertures():
    assert geometric_capture_fraction(GeometryParams(0.1, 0.1, 2.0), 0.0) == 1.0


def test_geometric_capture_clamps_large_aperture():
    assert geometric_capture_fraction(TABLE_GEO, 0.01) == 1.0


def test_geometry_rejects_non_positive():
    with pytest.raises(DomainError):
        GeometryParams(0.0, 0.2, 2.0)


@given(st.floats(0, 50), st.floats(0, 50))
def test_geometric_capture_non_increasing(l1, l2):
    lo, hi = sorted((l1, l2))
    a, b = geometric_capture_fraction(TABLE_GEO, lo), geometric_capture_fraction(TABLE_GEO, hi)
    assert b <= a <= 1.0


# --- transmittance ---------------------------------------------------------


@pytest.mark.parametrize(
    "sigma, l, expected",
    [(0.0, 3.7, 1.0), (1.0, 1.0, 0.36787944117144233), (2.329, 0.5, 0.31207866236049500)],
)
def test_transmittance(sigma, l, expected):
    assert transmittance(sigma, l) == pytest.approx(expected, rel=1e-12)


@given(st.floats(0, 50), st.floats(0, 5), st.floats(0, 5))
def test_transmittance_multiplicative(sigma, l1, l2):
    assert transmittance(sigma, l1 + l2) == pytest.approx(
        transmittance(sigma, l1) * transmittance(sigma, l2), rel=1e-12, abs=1e-300
    )


# --- fog -------------------------------------------------------------------


@pytest.mark.parametrize(
    "v, model, q",
    [
        (10.0, FogModel.KIM, 1.3),
        (0.2, FogModel.KIM, 0.0),
        (0.2, FogModel.KRUSE, 0.34211007537090531),
        (60.0, FogModel.KRUSE, 1.6),
        (3.0, FogModel.KIM, 0.82),
        (0.8, FogModel.KIM, 0.3),
    ],
)
def test_fog_q_exponent(v, model, q):
    assert fog_q_exponent(v, model) == pytest.approx(q, rel=1e-12)


@pytest.mark.parametrize("model", [FogModel.NABOULSI_ADVECTION, FogModel.NABOULSI_CONVECTION])
def test_fog_q_exponent_rejects_naboulsi(model):
    with pytest.raises(UnsupportedModelError):
        fog_q_exponent(1.0, model)


@pytest.mark.parametrize(
    "model, expected",
    [
        (FogModel.KIM, 84.904571212085732),
        (FogModel.KRUSE, 59.565136528234666),
        (FogModel.NABOULSI_ADVECTION, 87.176126784956604),
        (FogModel.NABOULSI_CONVECTION, 95.504975329295548),
    ],
)
def test_fog_specific_attenuation_dense_fog(model, expected):
    assert fog_specific_attenuation(0.2, 1550.0, model) == pytest.approx(expected, rel=1e-10)


def test_fog_model_accepts_string_values():
    assert fog_specific_attenuation(0.2, 1550.0, "kim") == fog_specific_attenuation(0.2, 1550.0, FogModel.KIM)


def test_fog_rejects_zero_visibility():
    with pytest.raises(DomainError):
        fog_specific_attenuation(0.0, 1550.0, FogModel.KIM)


@pytest.mark.parametrize("model", list(FogModel))
@given(v=st.floats(0.01, 100), dv=st.floats(1e-3, 10))
def test_fog_strictly_decreasing_in_visibility(model, v, dv):
    assert fog_specific_attenuation(v + dv, 1550.0, model) < fog_specific_attenuation(v, 1550.0, model)


@given(st.floats(6.0, 50.0))
def test_kim_and_kruse_agree_between_6_and_50_km(v):
    assume(v > 6.0)
    assert fog_specific_attenuation(v, 1550.0, FogModel.KIM) == fog_specific_attenuation(v, 1550.0, FogModel.KRUSE)


# --- rain ------------------------------------------------------------------


@pytest.mark.parametrize("r, a", [(25, 7.3), (50, 14.6), (100, 23.8), (150, 30.38)])
def test_rain_reproduces_curve_points_exactly(r, a):
    assert rain_specific_attenuation(r) == a


def test_rain_interpolation_and_extrapolation():
    assert rain_specific_attenuation(0.0) == 0.0
    assert rain_specific_attenuation(75.0) == pytest.approx(19.2, rel=1e-12)
    assert rain_specific_attenuation(12.5) == pytest.approx(3.65, rel=1e-12)
    assert rain_specific_attenuation(200.0) == pytest.approx(30.38 + (30.38 - 23.8), rel=1e-12)


def test_rain_rejects_negative_rate():
    with pytest.raises(DomainError):
        rain_specific_attenuation(-1.0)


@given(st.floats(0, 500), st.floats(0, 500))
def test_rain_monotone(r1, r2):
    lo, hi = sorted((r1, r2))
    assert rain_specific_attenuation(lo) <= rain_specific_attenuation(hi)


@pytest.mark.parametrize(
    "points",
    [
        [(25, 7.3)],
        [(25, 7.3), (25, 8.0)],
        [(50, 7.3), (25, 8.0)],
        [(25, 9.0), (50, 8.0)],
    ],
)
def test_rain_curve_invariants(points):
    with pytest.raises(ValueError):
        RainCurve.from_points(points)


def test_rain_curve_csv_round_trip(tmp_path):
    path = tmp_path / "curve.csv"
    REFERENCE_RAIN_CURVE.to_csv(path)
    assert path.read_text().splitlines()[0] == "rate_mm_hr,atten_db_km"
    assert RainCurve.from_csv(path) == REFERENCE_RAIN_CURVE


def test_rain_curve_csv_bad_header(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("rate,atten\n25,7.3\n50,14.6\n")
    with pytest.raises(ValueError, match="header"):
        RainCurve.from_csv(path)


# oracle: closed-form normal equations evaluated in mpmath (50 digits)
def test_fit_rain_powerlaw_reference_curve():
    k, a = fit_rain_powerlaw(REFERENCE_RAIN_CURVE)
    assert k == pytest.approx(0.60332639078029600, rel=1e-9)
    assert a == pytest.approx(0.79260692196542488, rel=1e-9)
    for r, att in zip(REFERENCE_RAIN_CURVE.rates, REFERENCE_RAIN_CURVE.attenuations):
        assert powerlaw_attenuation(r, k, a) == pytest.approx(att, rel=0.15)


def test_fit_rain_powerlaw_two_points():
    k, a = fit_rain_powerlaw(RainCurve((25, 150), (7.3, 30.38)))
    assert a == pytest.approx(math.log(30.38 / 7.3) / math.log(6), rel=1e-12)
    assert a == pytest.approx(0.79581560667158475, rel=1e-12)
    assert k == pytest.approx(0.56340459416612647, rel=1e-10)


def test_fit_rain_powerlaw_linear_case():
    k, a = fit_rain_powerlaw(RainCurve((10, 100), (5, 50)))
    assert k == pytest.approx(0.5, rel=1e-12)
    assert a == pytest.approx(1.0, rel=1e-12)


def test_fit_rain_powerlaw_needs_positive_points():
    with pytest.raises(FitError):
        fit_rain_powerlaw(RainCurve((0, 25), (0, 7.3)))


# --- path loss -------------------------------------------------------------


@pytest.mark.parametrize(
    "geo, alpha, l, extra, expected",
    [
        (1.0, 30.38, 1.0, 0.0, 30.38),
        (1.0, 100.0, 0.5, 0.0, 50.0),
        (0.0095181439619274258, 0.0, 1.0, 0.0, 20.214477307835461),
    ],
)
def test_path_loss(geo, alpha, l, extra, expected):
    assert path_loss_db(geo, alpha, l, extra) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("geo", [0.0, -0.1, 1.5])
def test_path_loss_rejects_bad_fraction(geo):
    with pytest.raises(DomainError):
        path_loss_db(geo, 1.0, 1.0)


@given(st.floats(1e-6, 1.0), st.floats(0, 200), st.floats(0, 5), st.floats(0, 50), st.floats(0, 50))
def test_path_loss_additive_in_extra(geo, alpha, l, e1, e2):
    assert path_loss_db(geo, alpha, l, e1 + e2) == pytest.approx(path_loss_db(geo, alpha, l, e1) + e2, rel=1e-12, abs=1e-9)
