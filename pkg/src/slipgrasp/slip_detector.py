"""Deadzone (hysteresis) slip detector on the power signal."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .signal_core import TimeSeries

DEFAULT_HB = 3.0
DEFAULT_LB = 1.0


class DetectorConfigError(ValueError):
    pass


@dataclass
class DetectorState:
    """Latch state of the two-bound detector.

    The output switches on when ``u`` is non-decreasing and at or above
    ``high``; it switches off when ``u`` is decreasing and at or below
    ``low``. Every other case holds the previous output.
    """

    high: float = DEFAULT_HB
    low: float = DEFAULT_LB
    prev_u: float = 0.0
    output: int = 0

    def __post_init__(self):
        if not (self.high > self.low > 0):
            raise DetectorConfigError(
                f"bounds must satisfy high > low > 0, got high={self.high!r} low={self.low!r}"
            )
        if self.output not in (0, 1):
            raise DetectorConfigError(f"output must be 0 or 1, got {self.output!r}")

    def copy(self) -> "DetectorState":
        return DetectorState(self.high, self.low, self.prev_u, self.output)

    def step(self, u: float) -> int:
        """Advance in place and return the new output."""
        if u >= self.prev_u:
            if u >= self.high:
                self.output = 1
        elif u <= self.low:
            self.output = 0
        self.prev_u = u
        return self.output


def detector_step(state: DetectorState, u: float) -> tuple[DetectorState, int]:
    """Pure form of :meth:`DetectorState.step`; ``state`` is left untouched."""
    if not (math.isfinite(u) and u >= 0):
        raise ValueError(f"power sample must be finite and >= 0, got {u!r}")
    nxt = state.copy()
    out = nxt.step(u)
    return nxt, out


def detector_outputs(power: Iterable[float], state: DetectorState) -> np.ndarray:
    """Run the latch over a sequence, advancing ``state`` in place."""
    step = state.step
    return np.fromiter((step(float(u)) for u in power), dtype=np.int8)


@dataclass(frozen=True)
class SlipEvent:
    onset: float
    end: float
    peak_power: float


def events_from_outputs(times: np.ndarray, outputs: np.ndarray, power: np.ndarray) -> list[SlipEvent]:
    """Collapse a binary output trace into maximal on-intervals.

    ``end`` is the time of the last on-sample, so a one-sample event has
    ``end == onset``. An event still open at the end of the trace closes
    on the final sample.
    """
    events = []
    on = np.flatnonzero(np.diff(np.concatenate(([0], outputs.astype(np.int8), [0]))))
    for start, stop in zip(on[::2], on[1::2]):
        events.append(
            SlipEvent(float(times[start]), float(times[stop - 1]), float(np.max(power[start:stop])))
        )
    return events


def detect_events(power: TimeSeries, state: DetectorState | None = None) -> list[SlipEvent]:
    """Batch detection over a power series.

    ``state`` defaults to the at-rest latch (output 0, previous sample 0)
    and is advanced in place when supplied.
    """
    state = DetectorState() if state is None else state
    outputs = detector_outputs(power.values, state)
    return events_from_outputs(power.times, outputs, power.values)


def write_events_csv(events: Iterable[SlipEvent], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["onset_s", "end_s", "peak_power"])
        for e in events:
            w.writerow([f"{e.onset:.6f}", f"{e.end:.6f}", repr(e.peak_power)])


def read_events_csv(path: str | Path) -> list[SlipEvent]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [SlipEvent(float(r["onset_s"]), float(r["end_s"]), float(r["peak_power"])) for r in rows]
