"""PVDF signal chain primitives.

Covers the piezo charge model, the integrator/lead-compensator filter
``G(s) = (100 s + 0.1) / (s^2 + 20 s)`` in continuous and discrete form,
and the squared-signal power transform that feeds the slip detector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DEFAULT_FS = 1000.0
MIN_FS = 200.0

# Integrator/lead compensator, descending powers of s.
FILTER_NUM = (100.0, 0.1)
FILTER_DEN = (1.0, 20.0, 0.0)


class SignalError(ValueError):
    """Raised for invalid signal-chain parameters or mismatched series."""


@dataclass
class TimeSeries:
    """Uniformly sampled signal.

    ``unit`` is metadata only (``"V"``, ``"V^2"``, ``"N"``, ``"deg"``).
    """

    t0: float
    dt: float
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise SignalError(f"dt must be positive and finite, got {self.dt!r}")
        if not np.all(np.isfinite(self.values)):
            raise SignalError("TimeSeries values must be finite")

    def __len__(self) -> int:
        return self.values.size

    @property
    def fs(self) -> float:
        return 1.0 / self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    def with_values(self, values, unit: str | None = None) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, values, self.unit if unit is None else unit)


def write_timeseries_csv(series: TimeSeries, path: str | Path) -> None:
    """Write ``t,value,unit`` rows; times carry 9 decimals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value", "unit"])
        for t, v in zip(series.times, series.values):
            w.writerow([f"{t:.9f}", repr(float(v)), series.unit])


def read_timeseries_csv(path: str | Path) -> TimeSeries:
    """Parse a ``t,value,unit`` CSV back into a :class:`TimeSeries`.

    Raises:
        SignalError: With the 1-based file line number of the first bad row.
    """
    times: list[float] = []
    values: list[float] = []
    unit = ""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["t", "value", "unit"]:
            raise SignalError(f"{path}: line 1: expected header 't,value,unit', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise SignalError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
            try:
                t = float(row[0])
                v = float(row[1])
            except ValueError as exc:
                raise SignalError(f"{path}: line {lineno}: {exc}") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise SignalError(f"{path}: line {lineno}: non-finite value")
            times.append(t)
            values.append(v)
            if len(row) > 2 and row[2].strip():
                unit = row[2].strip()
    if len(times) < 2:
        raise SignalError(f"{path}: need at least 2 samples to infer the sample period")
    steps = np.diff(times)
    dt = float(np.mean(steps))
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * max(1.0, dt) + 1e-9:
        bad = int(np.argmax(np.abs(steps - dt))) + 3
        raise SignalError(f"{path}: line {bad}: samples are not uniformly spaced")
    return TimeSeries(times[0], dt, values, unit)


# ---------------------------------------------------------------------------
# Charge model
# ---------------------------------------------------------------------------


@dataclass
class PvdfParams:
    """Electrical model of the PVDF strip.

    Attributes:
        capacitance: Film capacitance C_p in farads.
        charge_constant: Piezo charge constant d in C/N (22-28 pC/N for the strip).
        noise_floor: RMS sensor noise in volts.
        leakage_tau: Electrode discharge time constant in seconds; ``None``
            disables leakage.
    """

    capacitance: float = 1e-9
    charge_constant: float = 25e-12
    noise_floor: float = 0.0
    leakage_tau: float | None = 0.5

    def validate(self) -> None:
        if not self.capacitance > 0:
            raise SignalError(f"capacitance must be > 0, got {self.capacitance!r}")
        if not self.charge_constant > 0:
            raise SignalError(f"charge_constant must be > 0, got {self.charge_constant!r}")
        if self.noise_floor < 0:
            raise SignalError(f"noise_floor must be >= 0, got {self.noise_floor!r}")
        if self.leakage_tau is not None and not self.leakage_tau > 0:
            raise SignalError(f"leakage_tau must be > 0 or None, got {self.leakage_tau!r}")


def charge_voltage(charge: float, capacitance: float) -> float:
    """Open-circuit voltage ``Q / C_p`` of a charged film."""
    if not capacitance > 0:
        raise SignalError(f"capacitance must be > 0, got {capacitance!r}")
    return charge / capacitance


def charge_to_voltage(
    force: TimeSeries,
    params: PvdfParams,
    rng: np.random.Generator | None = None,
) -> TimeSeries:
    """Convert a force record (N) into the PVDF output voltage.

    Each backward force difference deposits ``d * dF`` of charge on the
    electrodes, which then bleeds away with ``leakage_tau``. The voltage is
    the accumulated charge over ``C_p``, so a held force decays to zero and
    only force changes show up. Gaussian noise of ``noise_floor`` volts is
    added when ``rng`` is given.
    """
    params.validate()
    f = force.values
    df = np.diff(f, prepend=f[0] if f.size else 0.0)
    if params.leakage_tau is None:
        q = params.charge_constant * np.cumsum(df)
    else:
        from scipy.signal import lfilter

        a = math.exp(-force.dt / params.leakage_tau)
        q = lfilter([params.charge_constant], [1.0, -a], df)
    v = q / params.capacitance
    if rng is not None and params.noise_floor > 0:
        v = v + rng.normal(0.0, params.noise_floor, size=v.size)
    return force.with_values(v, unit="V")


# ---------------------------------------------------------------------------
# Filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousTF:
    """Rational transfer function in s, coefficients in descending powers."""

    num: tuple[float, ...] = FILTER_NUM
    den: tuple[float, ...] = FILTER_DEN

    def __post_init__(self):
        if len(self.den) < len(self.num):
            raise SignalError("improper transfer function: numerator degree exceeds denominator")

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def magnitude(self, w) -> np.ndarray:
        """|G(jw)| for angular frequencies ``w`` in rad/s."""
        return np.abs(self(1j * np.asarray(w, dtype=float)))


def bilinear_biquad(tf: ContinuousTF, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Tustin map ``s = 2 fs (z - 1)/(z + 1)`` of a proper second-order TF.

    Returns ``(b, a)`` normalised so that ``a[0] == 1``.
    """
    if len(tf.den) != 3:
        raise SignalError("bilinear_biquad expects a second-order denominator")
    num = np.zeros(3)
    num[3 - len(tf.num):] = tf.num
    k = 2.0 * fs
    # Multiply through by (z + 1)^2: s^2 -> k^2 (z-1)^2, s -> k (z-1)(z+1), 1 -> (z+1)^2
    basis = (
        k * k * np.array([1.0, -2.0, 1.0]),
        k * np.array([1.0, 0.0, -1.0]),
        np.array([1.0, 2.0, 1.0]),
    )
    b = sum(c * p for c, p in zip(num, basis))
    a = sum(c * p for c, p in zip(tf.den, basis))
    return b / a[0], a / a[0]


@dataclass
class DiscreteFilter:
    """Streaming biquad in transposed direct form II.

    ``y[k] = b0 x[k] + b1 x[k-1] + b2 x[k-2] - a1 y[k-1] - a2 y[k-2]``

    Instances hold state and are meant for a single owner.
    """

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float
    fs: float
    gain: float = 1.0
    state: list[float] = field(default_factory=lambda: [0.0, 0.0])

    def __post_init__(self):
        coeffs = (self.b0, self.b1, self.b2, self.a1, self.a2, self.gain)
        if not all(math.isfinite(c) for c in coeffs):
            raise SignalError("filter coefficients must be finite")

    @property
    def b(self) -> np.ndarray:
        return self.gain * np.array([self.b0, self.b1, self.b2])

    @property
    def a(self) -> np.ndarray:
        return np.array([1.0, self.a1, self.a2])

    def reset(self) -> None:
        self.state = [0.0, 0.0]

    def step(self, x: float) -> float:
        s1, s2 = self.state
        g = self.gain
        y = g * self.b0 * x + s1
        self.state = [g * self.b1 * x - self.a1 * y + s2, g * self.b2 * x - self.a2 * y]
        return y

    def process(self, xs: Iterable[float]) -> np.ndarray:
        step = self.step
        return np.array([step(float(x)) for x in xs], dtype=float)

    def frequency_response(self, w) -> np.ndarray:
        """Complex response at angular frequencies ``w`` (rad/s)."""
        z = np.exp(1j * np.asarray(w, dtype=float) / self.fs)
        zi = 1.0 / z
        return np.polyval(self.b[::-1], zi) / np.polyval(self.a[::-1], zi)


def design_filter(fs: float = DEFAULT_FS, gain: float = 1.0, tf: ContinuousTF | None = None) -> DiscreteFilter:
    """Discretise the slip filter at sample rate ``fs`` (Hz) with Tustin.

    No frequency pre-warping is applied, so the integrator pole lands
    exactly on ``z = 1``. ``gain`` rescales the output.

    Raises:
        SignalError: If ``fs`` is below :data:`MIN_FS`.
    """
    if not (math.isfinite(fs) and fs >= MIN_FS):
        raise SignalError(f"sample rate {fs!r} Hz is below the {MIN_FS:g} Hz minimum")
    b, a = bilinear_biquad(tf or ContinuousTF(), fs)
    return DiscreteFilter(b[0], b[1], b[2], a[1], a[2], fs=fs, gain=gain)


def apply_filter(filt: DiscreteFilter, raw: TimeSeries) -> TimeSeries:
    """Run ``raw`` through ``filt``, advancing its state.

    Raises:
        SignalError: If the series sample period does not match ``1/fs``.
    """
    if abs(raw.dt * filt.fs - 1.0) > 1e-6:
        raise SignalError(
            f"sample-rate mismatch: series at {1.0 / raw.dt:g} Hz, filter at {filt.fs:g} Hz"
        )
    return raw.with_values(filt.process(raw.values), unit=raw.unit or "V")


class DCBlocker:
    """Optional first-order DC blocker ``y = x - x[k-1] + r y[k-1]``.

    Bleeds integrator drift on long recordings. Off by default.
    """

    def __init__(self, cutoff_hz: float, fs: float):
        self.r = math.exp(-2.0 * math.pi * cutoff_hz / fs)
        self._x = 0.0
        self._y = 0.0

    def step(self, x: float) -> float:
        y = x - self._x + self.r * self._y
        self._x, self._y = x, y
        return y


def power_signal(filtered: TimeSeries, normalization: float = 1.0) -> TimeSeries:
    """Squared signal as the instantaneous power feature, ``p = y^2 / norm``."""
    if not normalization > 0:
        raise SignalError(f"normalization must be > 0, got {normalization!r}")
    y = filtered.values
    return filtered.with_values(y * y / normalization, unit="V^2")


def power_spectral_density(series: TimeSeries, nperseg: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Welch PSD estimate, for CSV export only."""
    from scipy.signal import welch

    n = min(nperseg, len(series)) or 1
    return welch(series.values, fs=series.fs, nperseg=n)


def write_psd_csv(freqs: Sequence[float], psd: Sequence[float], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "psd"])
        for f, p in zip(freqs, psd):
            w.writerow([f"{f:.6f}", repr(float(p))])
