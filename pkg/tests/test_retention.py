import pytest

from fsfm import ReinforcementEvent, ReinforcementSignal, retention, retention_extended, simulate_staircase
from fsfm.errors import NegativeTimeError, NonMonotonicEventsError
from fsfm.retention import staircase_value, trajectory_to_csv

FIG_EVENTS = (
    ReinforcementEvent(2.0, 0.95),
    ReinforcementEvent(5.0, 0.90),
    ReinforcementEvent(10.0, 0.85),
)


def test_retention_at_zero_is_one():
    assert retention(0.0, 0.1) == 1.0


def test_retention_ten_days():
    assert retention(10, 0.1) == pytest.approx(0.36788, abs=1e-5)


def test_retention_high_rate():
    assert retention(5, 0.85) == pytest.approx(0.014264, abs=1e-6)


def test_retention_negative_time_rejected():
    with pytest.raises(NegativeTimeError):
        retention(-0.1, 0.1)


def test_retention_invalid_rate_rejected():
    with pytest.raises(ValueError):
        retention(1.0, 0.0)


def test_retention_strictly_decreasing_in_time():
    values = [retention(t / 4, 0.3) for t in range(0, 60)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_faster_rate_forgets_faster():
    for t in (0.5, 1, 3, 7, 15):
        assert retention(t, 0.85) < retention(t, 0.1)


# -- extended form -------------------------------------------------------------

def test_extended_reduces_to_classical():
    signal = ReinforcementSignal()
    for t in (0.0, 0.5, 2.0, 10.0):
        for rate in (0.05, 0.2, 0.85):
            assert retention_extended(t, rate, signal, 0) == retention(t, rate)


def test_extended_security_veto():
    signal = ReinforcementSignal(security_compliance=False, contextual_relevance=1.0)
    for t in (0.0, 1.0, 10.0):
        assert retention_extended(t, 0.1, signal, 50) == 0.0


def test_extended_frequency_boost_value():
    value = retention_extended(10, 0.1, ReinforcementSignal(), 3, kappa_frequency=0.5)
    assert value == pytest.approx(0.6229, abs=1e-3)


def test_extended_capped_at_one():
    boosted = ReinforcementSignal(
        contextual_relevance=1.0, emotional_valence=1.0, social_consensus=1.0
    )
    assert retention_extended(0.1, 0.05, boosted, 100) == 1.0


def test_extended_monotone_in_each_factor():
    low = retention_extended(5, 0.2, ReinforcementSignal(contextual_relevance=0.1), 2)
    high = retention_extended(5, 0.2, ReinforcementSignal(contextual_relevance=0.9), 2)
    assert high > low
    few = retention_extended(5, 0.2, ReinforcementSignal(), 1)
    many = retention_extended(5, 0.2, ReinforcementSignal(), 6)
    assert many > few


def test_extended_rejects_negative_frequency():
    with pytest.raises(ValueError):
        retention_extended(1, 0.1, ReinforcementSignal(), -1)


# -- staircase -------------------------------------------------------------------

def test_staircase_plateau_values_at_event_days():
    trajectory = simulate_staircase(0.1, FIG_EVENTS, horizon_days=15, step_days=0.5)
    values = dict(trajectory.samples)
    assert values[2.0] == pytest.approx(0.95, abs=1e-9)
    assert values[5.0] == pytest.approx(0.90, abs=1e-9)
    assert values[10.0] == pytest.approx(0.85, abs=1e-9)


def test_staircase_day_three_value():
    assert staircase_value(3.0, 0.1, (ReinforcementEvent(2.0, 0.95),)) == pytest.approx(
        0.8596, abs=1e-4
    )


def test_staircase_without_events_matches_classical():
    trajectory = simulate_staircase(0.1, (), horizon_days=15, step_days=0.25)
    for day, value in trajectory.samples:
        assert value == pytest.approx(retention(day, 0.1), abs=1e-12)


def test_staircase_bounded_to_unit_interval():
    trajectory = simulate_staircase(0.9, FIG_EVENTS, horizon_days=40, step_days=0.1)
    assert all(0.0 <= value <= 1.0 for _, value in trajectory.samples)


def test_staircase_strictly_decreasing_between_events():
    trajectory = simulate_staircase(0.1, FIG_EVENTS, horizon_days=15, step_days=0.5)
    event_days = {e.at_day for e in FIG_EVENTS}
    for (d0, v0), (d1, v1) in zip(trajectory.samples, trajectory.samples[1:]):
        crossed = any(d0 < at <= d1 for at in event_days)
        if not crossed:
            assert v1 < v0, f"not decreasing between day {d0} and {d1}"


def test_staircase_rejects_non_monotonic_events():
    events = (ReinforcementEvent(5.0, 0.9), ReinforcementEvent(2.0, 0.95))
    with pytest.raises(NonMonotonicEventsError):
        simulate_staircase(0.1, events, horizon_days=10, step_days=1)


def test_staircase_rejects_bad_step():
    with pytest.raises(ValueError):
        simulate_staircase(0.1, (), horizon_days=10, step_days=0)


def test_event_validation():
    with pytest.raises(ValueError):
        ReinforcementEvent(at_day=-1, plateau=0.5)
    with pytest.raises(ValueError):
        ReinforcementEvent(at_day=1, plateau=0.0)


def test_trajectory_csv_format():
    trajectory = simulate_staircase(0.1, (), horizon_days=1, step_days=0.5)
    lines = trajectory_to_csv(trajectory).splitlines()
    assert lines[0] == "day,retention"
    assert len(lines) == 1 + len(trajectory.samples)
    day, value = lines[1].split(",")
    assert float(day) == 0.0 and float(value) == 1.0


def test_sampling_grid_includes_horizon():
    trajectory = simulate_staircase(0.1, (), horizon_days=15, step_days=0.5)
    assert trajectory.samples[0][0] == 0.0
    assert trajectory.samples[-1][0] == pytest.approx(15.0)
    assert len(trajectory.samples) == 31


def test_classical_matches_high_precision_oracle():
    mp = pytest.importorskip("mpmath")
    for t, rate in ((0.3, 0.05), (4.2, 0.2), (11.7, 0.85), (29.9, 0.01)):
        expected = float(mp.e ** (-mp.mpf(rate) * mp.mpf(t)))
        assert retention(t, rate) == pytest.approx(expected, abs=1e-12)
