"""Control charts and alerts over a fitted artifact."""

import dataclasses
import math

import numpy as np
import pytest

from carcasswatch.laplace import Z_80
from carcasswatch.monitor import (
    ABOVE_BAND,
    BELOW_BAND,
    IN_CONTROL,
    AlertReport,
    ChartError,
    ControlChart,
    alert_report,
    band_monotonicity_check,
    build_chart,
)


@pytest.fixture(scope="module")
def chart(toy_artifact):
    return build_chart(toy_artifact, 15, "PI", n_draws=300)


def test_chart_shape(chart):
    assert chart.weeks == tuple(range(1, 27))
    assert chart.level == 0.80
    assert chart.band == "predictive"
    for name in ("expected", "lower", "upper", "observed", "flags"):
        assert len(getattr(chart, name)) == 26


def test_flag_iff_observed_outside_band(chart):
    # the SPC contract: above-band exactly when observed > upper, and
    # below-band exactly when observed < lower; gaps are never flagged
    for obs, lo, hi, flag in zip(chart.observed, chart.lower, chart.upper, chart.flags):
        if obs is None:
            assert flag == IN_CONTROL
        else:
            assert (flag == ABOVE_BAND) == (obs > hi)
            assert (flag == BELOW_BAND) == (obs < lo)


def test_forced_flag_just_above_upper(chart):
    observed = list(chart.observed)
    flags = list(chart.flags)
    j = 4
    observed[j] = chart.upper[j] + 1.0
    flags[j] = ABOVE_BAND
    forced = dataclasses.replace(chart, observed=tuple(observed), flags=tuple(flags))
    assert forced.flags[j] == ABOVE_BAND
    # sitting exactly on the boundary is in control, not an alert
    observed[j] = chart.upper[j]
    flags[j] = IN_CONTROL
    on_edge = dataclasses.replace(chart, observed=tuple(observed), flags=tuple(flags))
    assert on_edge.flags[j] == IN_CONTROL


def test_inconsistent_flags_rejected(chart):
    flags = list(chart.flags)
    flags[0] = ABOVE_BAND if flags[0] != ABOVE_BAND else IN_CONTROL
    with pytest.raises(ChartError, match="inconsistent"):
        dataclasses.replace(chart, flags=tuple(flags))


def test_observed_at_expected_is_in_control(chart):
    # lower <= expected <= upper holds by construction, so pinning the
    # observations to the expected curve must flag nothing
    calm = dataclasses.replace(
        chart, observed=chart.expected, flags=tuple([IN_CONTROL] * 26)
    )
    assert set(calm.flags) == {IN_CONTROL}


def test_band_ordering_enforced(chart):
    upper = list(chart.upper)
    upper[3] = chart.lower[3] - 1.0
    with pytest.raises(ChartError, match="band"):
        dataclasses.replace(chart, upper=tuple(upper))


def test_band_nesting_across_levels(toy_artifact):
    narrow = build_chart(toy_artifact, 15, "PI", level=0.5, n_draws=300)
    wide = build_chart(toy_artifact, 15, "PI", level=0.8, n_draws=300)
    assert band_monotonicity_check(narrow, wide)
    assert not band_monotonicity_check(wide, narrow) or narrow.upper == wide.upper


@pytest.mark.parametrize("pair", [(0.3, 0.9), (0.6, 0.95)])
def test_band_nesting_other_levels(toy_artifact, pair):
    lo, hi = pair
    narrow = build_chart(toy_artifact, 2, "BI", level=lo, n_draws=100)
    wide = build_chart(toy_artifact, 2, "BI", level=hi, n_draws=100)
    assert band_monotonicity_check(narrow, wide)


def test_weeks_mismatch_raises(chart):
    trimmed = dataclasses.replace(
        chart,
        weeks=chart.weeks[:-1],
        expected=chart.expected[:-1],
        lower=chart.lower[:-1],
        upper=chart.upper[:-1],
        observed=chart.observed[:-1],
        flags=chart.flags[:-1],
    )
    with pytest.raises(ChartError, match="weeks"):
        band_monotonicity_check(trimmed, chart)


def test_chart_request_validation(toy_artifact):
    with pytest.raises(ChartError, match="level"):
        build_chart(toy_artifact, 15, "PI", level=0.0)
    with pytest.raises(ChartError, match="level"):
        build_chart(toy_artifact, 15, "PI", level=1.0)
    with pytest.raises(ChartError, match="band"):
        build_chart(toy_artifact, 15, "PI", band="sideways")
    with pytest.raises(LookupError):
        build_chart(toy_artifact, 99, "PI")
    with pytest.raises(LookupError):
        build_chart(toy_artifact, 15, "XX")


def test_chart_deterministic(toy_artifact):
    a = build_chart(toy_artifact, 1, "CE", n_draws=200)
    b = build_chart(toy_artifact, 1, "CE", n_draws=200)
    assert a == b


def test_latent_band_closed_form(toy_artifact):
    chart = build_chart(toy_artifact, 15, "PI", band="latent")
    row = toy_artifact.row_index(15, "PI", 1)
    m = toy_artifact.eta_mean[row]
    s = toy_artifact.eta_sd[row]
    assert chart.expected[0] == pytest.approx(math.exp(m), rel=1e-12)
    assert chart.lower[0] == pytest.approx(math.exp(m - Z_80 * s), rel=1e-12)
    assert chart.upper[0] == pytest.approx(math.exp(m + Z_80 * s), rel=1e-12)


def test_gap_weeks_masked(toy_artifact):
    # drop all of region 15's week-10 visits: the chart shows a gap, and a
    # gap is never an alert no matter how the bands fall
    panel_data = [
        e
        for e in toy_artifact.panel_data
        if not (e["region"] == 15 and e["week"] == 10)
    ]
    gappy = dataclasses.replace(toy_artifact, panel_data=panel_data)
    chart = build_chart(gappy, 15, "PI", n_draws=100)
    assert chart.observed[9] is None
    assert chart.flags[9] == IN_CONTROL
    assert all(obs is not None for k, obs in enumerate(chart.observed) if k != 9)


def test_chart_json_shape(chart):
    js = chart.to_json()
    assert js["region"] == 15 and js["species"] == "PI"
    assert js["weeks"] == list(range(1, 27))
    assert all(
        isinstance(js[k], list)
        for k in ("expected", "lower", "upper", "observed", "flags")
    )


def _fake_chart(region, group, flags_at, upper=5.0, observed_factor=2.0):
    """26-week chart with above-band flags at the given weeks."""
    weeks = tuple(range(1, 27))
    lower = tuple([0.0] * 26)
    upp = tuple([upper] * 26)
    expected = tuple([1.0] * 26)
    observed, flags = [], []
    for w in weeks:
        if w in flags_at:
            observed.append(upper * observed_factor)
            flags.append(ABOVE_BAND)
        else:
            observed.append(1.0)
            flags.append(IN_CONTROL)
    return ControlChart(
        region=region,
        species_group=group,
        level=0.8,
        band="predictive",
        weeks=weeks,
        expected=expected,
        lower=lower,
        upper=upp,
        observed=tuple(observed),
        flags=tuple(flags),
    )


def test_alert_report_ranks_by_exceedance():
    a = _fake_chart(15, "PI", {3, 7}, upper=4.0, observed_factor=3.0)
    b = _fake_chart(2, "BI", {5}, upper=10.0, observed_factor=1.5)
    report = alert_report([a, b, a])  # duplicate chart must not duplicate rows
    assert len(report.rows) == 3
    exceedances = [r[5] for r in report.rows]
    assert exceedances == sorted(exceedances, reverse=True)
    assert report.rows[0][:3] in {(15, "PI", 3), (15, "PI", 7)}
    assert report.rows[-1][:3] == (2, "BI", 5)


def test_alert_report_formats():
    report = alert_report([_fake_chart(15, "PI", {3})])
    js = report.to_json()
    assert js[0] == {
        "region": 15,
        "species": "PI",
        "week": 3,
        "observed": 10.0,
        "upper": 5.0,
        "exceedance": 2.0,
    }
    lines = report.to_csv().splitlines()
    assert lines[0] == "region,species,week,observed,upper,exceedance"
    assert len(lines) == 2
    assert alert_report([]).rows == ()
    assert AlertReport(rows=()).to_csv().splitlines() == [
        "region,species,week,observed,upper,exceedance"
    ]


def test_predictive_band_tracks_observations(chart, toy_artifact):
    # sanity on the fitted toy model: most weeks of a well-fit cell sit
    # inside an 80% band
    inside = sum(f == IN_CONTROL for f in chart.flags)
    assert inside >= 18
    # and the median curve is positive and finite
    assert all(0 < m < 1e6 for m in chart.expected)
