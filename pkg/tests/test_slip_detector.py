import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipgrasp.signal_core import TimeSeries
from slipgrasp.slip_detector import (
    DetectorConfigError,
    DetectorState,
    SlipEvent,
    detect_events,
    detector_outputs,
    detector_step,
    events_from_outputs,
    read_events_csv,
    write_events_csv,
)

HB, LB = 3.0, 1.0
power_lists = st.lists(st.sampled_from([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 5.0])
                       | st.floats(0, 8, allow_nan=False), max_size=60)


def run(us, state=None):
    state = state or DetectorState(HB, LB)
    return list(detector_outputs(us, state))


def ts(values):
    return TimeSeries(0.0, 0.001, np.asarray(values, dtype=float), "V^2")


class TestConstruction:
    @pytest.mark.parametrize("high,low", [(1.0, 3.0), (2.0, 2.0), (3.0, 0.0), (3.0, -1.0)])
    def test_bad_bounds(self, high, low):
        with pytest.raises(DetectorConfigError):
            DetectorState(high, low)

    def test_defaults(self):
        s = DetectorState()
        assert (s.high, s.low, s.prev_u, s.output) == (3.0, 1.0, 0.0, 0)


class TestTruthTable:
    # (previous output, direction, level) -> expected output, written out
    # by hand from the two switching rules; every other case holds.
    LEVELS = {"below_lb": 0.5, "at_lb": 1.0, "band": 2.0, "at_hb": 3.0, "above_hb": 4.0}

    @staticmethod
    def expected(prev_out, direction, level):
        if direction in ("rising", "equal") and level in ("at_hb", "above_hb"):
            return 1
        if direction == "falling" and level in ("below_lb", "at_lb"):
            return 0
        return prev_out

    @pytest.mark.parametrize(
        "prev_out,direction,level",
        list(itertools.product([0, 1], ["rising", "equal", "falling"], list(LEVELS))),
    )
    def test_case(self, prev_out, direction, level):
        u = self.LEVELS[level]
        prev_u = {"rising": u - 0.25, "equal": u, "falling": u + 0.25}[direction]
        state = DetectorState(HB, LB, prev_u=prev_u, output=prev_out)
        _, out = detector_step(state, u)
        assert out == self.expected(prev_out, direction, level)

    def test_only_two_cases_switch(self):
        switching = set()
        for prev_out, direction, level in itertools.product([0, 1], ["rising", "equal", "falling"], self.LEVELS):
            u = self.LEVELS[level]
            prev_u = {"rising": u - 0.25, "equal": u, "falling": u + 0.25}[direction]
            _, out = detector_step(DetectorState(HB, LB, prev_u=prev_u, output=prev_out), u)
            if out != prev_out:
                switching.add((prev_out, direction, level))
        assert switching == {
            (0, "rising", "at_hb"), (0, "rising", "above_hb"),
            (0, "equal", "at_hb"), (0, "equal", "above_hb"),
            (1, "falling", "below_lb"), (1, "falling", "at_lb"),
        }


class TestExamples:
    def test_rising_through_hb(self):
        assert run([0.0, 5.0]) == [0, 1]

    def test_falling_through_lb(self):
        state = DetectorState(HB, LB, prev_u=5.0, output=1)
        assert run([0.5], state) == [0]

    def test_hold_in_band(self):
        state = DetectorState(HB, LB, prev_u=5.0, output=1)
        assert run([2.0], state) == [1]

    def test_pure_step_does_not_mutate(self):
        state = DetectorState(HB, LB)
        nxt, out = detector_step(state, 5.0)
        assert out == 1 and state.output == 0 and state.prev_u == 0.0
        assert nxt.prev_u == 5.0

    def test_rejects_negative_power(self):
        with pytest.raises(ValueError):
            detector_step(DetectorState(), -1.0)

    def test_all_zero(self):
        assert detect_events(ts(np.zeros(100))) == []

    def test_single_burst(self):
        p = np.r_[np.zeros(5), np.linspace(0, 6, 10), np.linspace(6, 0, 10), np.zeros(5)]
        events = detect_events(ts(p))
        assert len(events) == 1
        assert events[0].peak_power == pytest.approx(6.0)

    def test_no_chatter_in_band(self):
        p = np.r_[0.0, 4.0, np.tile([1.5, 2.5], 20), 0.0]
        events = detect_events(ts(p))
        assert len(events) == 1

    def test_event_times(self):
        p = [0, 4, 4, 2, 0.5, 0]
        (ev,) = detect_events(ts(p))
        assert ev.onset == pytest.approx(0.001)
        assert ev.end == pytest.approx(0.003)  # last on-sample precedes the drop to 0.5

    def test_open_event_closes_at_end(self):
        (ev,) = detect_events(ts([0, 5, 5]))
        assert ev.end == pytest.approx(0.002)

    def test_events_csv_roundtrip(self, tmp_path):
        events = [SlipEvent(0.1, 0.25, 7.5), SlipEvent(1.0, 1.0, 3.0)]
        write_events_csv(events, tmp_path / "e.csv")
        assert (tmp_path / "e.csv").read_text().splitlines()[0] == "onset_s,end_s,peak_power"
        assert read_events_csv(tmp_path / "e.csv") == events


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(power_lists)
    def test_transitions_need_threshold_crossings(self, us):
        outs = run(us)
        prev_u, prev_o = 0.0, 0
        for u, o in zip(us, outs):
            if o != prev_o:
                if o == 1:
                    assert u >= prev_u and u >= HB
                else:
                    assert u < prev_u and u <= LB
            else:
                # Hold: no switching rule applied.
                if prev_o == 0:
                    assert not (u >= prev_u and u >= HB)
                else:
                    assert not (u < prev_u and u <= LB)
            prev_u, prev_o = u, o

    @settings(max_examples=300, deadline=None)
    @given(power_lists, st.floats(0.0, 5.0))
    def test_raising_hb_never_adds_events(self, us, extra):
        low = detect_events(ts(us or [0.0]), DetectorState(HB, LB))
        high = detect_events(ts(us or [0.0]), DetectorState(HB + extra, LB))
        assert len(high) <= len(low)

    @settings(max_examples=200, deadline=None)
    @given(power_lists)
    def test_event_count_bounded(self, us):
        events = detect_events(ts(us or [0.0]))
        assert len(events) <= sum(u >= HB for u in us)
        for e in events:
            assert e.end >= e.onset
            assert e.peak_power >= HB

    @given(power_lists)
    def test_deterministic(self, us):
        assert detect_events(ts(us or [0.0])) == detect_events(ts(us or [0.0]))

    def test_events_from_outputs_matches_runs(self):
        t = np.arange(8) * 0.5
        outs = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        p = np.arange(8.0)
        ev = events_from_outputs(t, outs, p)
        assert [(e.onset, e.end, e.peak_power) for e in ev] == [(0.5, 1.0, 2.0), (2.0, 2.0, 4.0), (3.5, 3.5, 7.0)]
