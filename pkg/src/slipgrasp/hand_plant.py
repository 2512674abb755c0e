"""Quasi-static model of the single-actuated, cable-driven hand.

One motor drives a slider (lever) along the palm. Each finger cable is
tied to the slider at its own lever ratio, so slider travel ``s`` pulls
``r_i * s`` of cable. The cable is an elastic spring (``k = E A / L``)
that only pulls. Each finger is one aggregate joint held at its rest
flexion by a pretensioned dorsal elastic band, and it may be stopped by
the grasped object (penalty contact) or blocked outright.

The slider moves at a speed set by the net force through a linear
damper with Coulomb friction, which stands in for the geared DC motor.
Finger joints relax toward their quasi-static equilibrium with a short
time constant.

Units: mm, N, N*mm, seconds; finger flexion is stored in degrees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import signal as sps

from .signal_core import PvdfParams, TimeSeries

FINGERS = ("index", "middle", "ring", "little", "thumb")
INDEX, MIDDLE, RING, LITTLE, THUMB = range(5)
GRAVITY = 9.81
SLIDER_MAX = 25.0

# 17 log-spaced cable moduli over the studied range.
DEFAULT_SWEEP_E = tuple(float(e) for e in np.geomspace(50.0, 10000.0, 17))


class SimulationFault(RuntimeError):
    """Non-finite or otherwise invalid plant state."""


@dataclass
class CableParams:
    youngs_modulus: float = 2500.0  # N/mm^2, nylon monofilament
    cross_section_area: float = 0.196  # mm^2, 0.5 mm line
    free_length: float = 200.0  # mm

    def __post_init__(self):
        for name in ("youngs_modulus", "cross_section_area", "free_length"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"cable {name} must be positive, got {v!r}")

    @property
    def stiffness(self) -> float:
        """Axial stiffness ``E A / L`` in N/mm."""
        return self.youngs_modulus * self.cross_section_area / self.free_length


@dataclass
class PlantParams:
    """Geometry, stiffness and actuator constants.

    The band stiffness/pretension and the sweep force are calibration
    constants: together with the cable defaults they place the 3-10 mm
    slider band of the blocked-middle-finger test at E ~ 1000-3400 N/mm^2.
    """

    cable: CableParams = field(default_factory=CableParams)
    lever_ratios: tuple[float, ...] = (1.0, 1.0, 0.8, 0.7, 0.9)
    moment_arm: float = 10.0  # mm, cable offset from joint axis
    band_stiffness: float = 10.0  # N*mm/rad
    band_pretension: float = 20.0  # N*mm
    rest_flexion: float = 20.0  # deg
    max_flexion: float = 100.0  # deg
    min_flexion: float = -45.0  # deg
    finger_tau: float = 0.01  # s, joint relaxation time constant
    contact_stiffness: float = 3000.0  # N*mm/rad
    contact_lever: float = 35.0  # mm, joint axis to contact point
    stall_force: float = 100.0  # N at |duty| = 1
    slider_damping: float = 0.1  # N*s/mm
    slider_friction: float = 10.0  # N, Coulomb
    slider_max: float = SLIDER_MAX
    slip_damping: float = 0.02  # s/mm, interface damping per newton of normal load
    slip_damping_floor: float = 1.0  # N, normal load used for damping when the grip is loose
    grip_radius: float = 40.0  # mm, torque -> tangential load lever
    impact_tau: float = 0.03  # s, decay of drop-impact loads
    sweep_force: float = 28.0  # N, constant actuation force for the elasticity study

    def with_modulus(self, youngs_modulus: float) -> "PlantParams":
        return replace(self, cable=replace(self.cable, youngs_modulus=youngs_modulus))


@dataclass
class HandPlantState:
    slider_position: float = 0.0  # mm
    finger_angles: tuple[float, ...] = (20.0,) * 5  # deg flexion
    cable_tensions: tuple[float, ...] = (0.0,) * 5  # N
    elastic_band_torque: tuple[float, ...] = (0.0,) * 5  # N*mm
    slider_velocity: float = 0.0  # mm/s

    @classmethod
    def neutral(cls, params: PlantParams | None = None) -> "HandPlantState":
        rest = (params or PlantParams()).rest_flexion
        return cls(finger_angles=(rest,) * 5)


@dataclass
class ObjectState:
    """Grasped object and its Coulomb stick-slip state.

    ``contact_flexion`` gives, per finger, the flexion (deg) at which the
    finger meets the object surface; ``None`` means that finger misses it.
    """

    mass: float = 0.0  # kg
    friction_coefficient: float = 0.5
    contact_flexion: tuple[float | None, ...] = (None,) * 5
    normal_force: float = 0.0  # N, sum over touching fingers
    index_normal_force: float = 0.0  # N, under the PVDF strip
    tangential_load: float = 0.0  # N
    slip_displacement: float = 0.0  # mm
    slip_velocity: float = 0.0  # mm/s
    external_torque: float = 0.0  # N*mm
    impact_load: float = 0.0  # N, decaying transient from dropped items
    supported: bool = False  # resting on the table, no load on the grip

    @property
    def present(self) -> bool:
        return any(c is not None for c in self.contact_flexion)

    @property
    def index_contact(self) -> bool:
        return self.index_normal_force > 0.0

    @classmethod
    def cup(cls, mass: float = 0.04, friction_coefficient: float = 0.5) -> "ObjectState":
        return cls(mass=mass, friction_coefficient=friction_coefficient,
                   contact_flexion=(45.0, 42.0, 45.0, 50.0, 35.0))


def finger_equilibrium(
    pull: float,
    k: float,
    params: PlantParams,
    contact_flexion: float | None = None,
    blocked: bool = False,
) -> float:
    """Quasi-static flexion (deg) of one finger for a cable pull (mm).

    Solves ``rho * T(q) = band(q) + contact(q)`` with
    ``T = k * max(pull - rho * dq, 0)``. The cable torque falls and the
    resisting torque rises with flexion, so the root is unique.
    """
    rest = params.rest_flexion
    if blocked:
        return rest
    rho = params.moment_arm
    kb, t0 = params.band_stiffness, params.band_pretension
    drive = k * rho * pull
    if drive <= t0:
        return rest
    den = k * rho * rho + kb
    dq = (drive - t0) / den
    if contact_flexion is not None:
        dqc = math.radians(contact_flexion - rest)
        if dq > dqc:
            kc = params.contact_stiffness
            dq = (drive - t0 + kc * dqc) / (den + kc)
    dq = min(dq, math.radians(params.max_flexion - rest))
    return rest + math.degrees(dq)


class HandPlant:
    """Steps the hand and a grasped object forward in time."""

    def __init__(self, params: PlantParams | None = None, blocked: Iterable[int] = ()):
        self.params = params or PlantParams()
        self.blocked = frozenset(blocked)

    def tensions(self, slider: float, angles: Sequence[float]) -> tuple[float, ...]:
        p = self.params
        k, rho, rest = p.cable.stiffness, p.moment_arm, p.rest_flexion
        return tuple(
            k * max(r * slider - rho * math.radians(q - rest), 0.0)
            for r, q in zip(p.lever_ratios, angles)
        )

    def band_torques(self, angles: Sequence[float]) -> tuple[float, ...]:
        p = self.params
        out = []
        for q in angles:
            dq = math.radians(q - p.rest_flexion)
            if dq > 0:
                out.append(p.band_pretension + p.band_stiffness * dq)
            elif dq < 0:
                out.append(-p.band_pretension + p.band_stiffness * dq)
            else:
                out.append(0.0)
        return tuple(out)

    def contact_forces(self, angles: Sequence[float], obj: ObjectState | None) -> tuple[float, ...]:
        """Normal force (N) each finger presses onto the object."""
        if obj is None:
            return (0.0,) * 5
        p = self.params
        out = []
        for q, qc in zip(angles, obj.contact_flexion):
            if qc is None or q <= qc:
                out.append(0.0)
            else:
                out.append(p.contact_stiffness * math.radians(q - qc) / p.contact_lever)
        return tuple(out)

    def _slider_update(self, s: float, load: float, force: float, dt: float) -> tuple[float, float]:
        p = self.params
        net = force - load
        if abs(net) <= p.slider_friction:
            v = 0.0
        else:
            v = (net - math.copysign(p.slider_friction, net)) / p.slider_damping
        s_new = min(max(s + v * dt, 0.0), p.slider_max)
        return s_new, (s_new - s) / dt

    def step(
        self,
        state: HandPlantState,
        obj: ObjectState | None,
        duty: float,
        dt: float,
        force: float | None = None,
    ) -> tuple[HandPlantState, ObjectState | None]:
        """Advance by ``dt`` under ``duty`` (or a raw slider ``force`` in N).

        Raises:
            SimulationFault: On non-finite state, duty out of range or a
                step outside ``(0, 10 ms]``.
        """
        p = self.params
        if not (0.0 < dt <= 0.010 + 1e-12):
            raise SimulationFault(f"dt must be in (0, 10 ms], got {dt!r}")
        if force is None:
            if not (abs(duty) <= 0.85 + 1e-12):
                raise SimulationFault(f"duty {duty!r} outside [-0.85, 0.85]")
            force = duty * p.stall_force

        load = sum(r * t for r, t in zip(p.lever_ratios, state.cable_tensions))
        s, v = self._slider_update(state.slider_position, load, force, dt)

        k = p.cable.stiffness
        contacts = obj.contact_flexion if obj is not None else (None,) * 5
        alpha = 1.0 - math.exp(-dt / p.finger_tau) if p.finger_tau > 0 else 1.0
        angles = []
        for i, (r, q, qc) in enumerate(zip(p.lever_ratios, state.finger_angles, contacts)):
            q_eq = finger_equilibrium(r * s, k, p, qc, i in self.blocked)
            angles.append(q + alpha * (q_eq - q) if i not in self.blocked else p.rest_flexion)
        angles = tuple(min(max(a, p.min_flexion), p.max_flexion) for a in angles)

        new_state = HandPlantState(
            slider_position=s,
            finger_angles=angles,
            cable_tensions=self.tensions(s, angles),
            elastic_band_torque=self.band_torques(angles),
            slider_velocity=v,
        )
        new_obj = self.object_step(obj, angles, dt) if obj is not None else None
        check_finite(new_state, new_obj)
        return new_state, new_obj

    def object_step(self, obj: ObjectState, angles: Sequence[float], dt: float) -> ObjectState:
        """Coulomb stick-slip update of the grasped object."""
        p = self.params
        forces = self.contact_forces(angles, obj)
        normal = sum(forces)
        impact = obj.impact_load * math.exp(-dt / p.impact_tau) if p.impact_tau > 0 else 0.0
        if obj.supported:
            load = 0.0
        else:
            load = obj.mass * GRAVITY + abs(obj.external_torque) / p.grip_radius + obj.impact_load
        capacity = obj.friction_coefficient * normal
        # Rate-strengthening interface: damping grows with the normal load.
        damping = p.slip_damping * max(normal, p.slip_damping_floor)
        v = (load - capacity) / damping if load > capacity else 0.0
        return replace(
            obj,
            impact_load=impact,
            normal_force=normal,
            index_normal_force=forces[INDEX],
            tangential_load=load,
            slip_velocity=v,
            slip_displacement=obj.slip_displacement + v * dt,
        )


def plant_step(
    state: HandPlantState,
    obj: ObjectState | None,
    duty: float,
    dt: float,
    params: PlantParams | None = None,
) -> tuple[HandPlantState, ObjectState | None]:
    """Functional wrapper around :meth:`HandPlant.step`."""
    return HandPlant(params).step(state, obj, duty, dt)


def check_finite(state: HandPlantState, obj: ObjectState | None) -> None:
    vals = [state.slider_position, state.slider_velocity, *state.finger_angles, *state.cable_tensions]
    if obj is not None:
        vals += [obj.normal_force, obj.slip_displacement, obj.slip_velocity, obj.tangential_load]
    if not all(math.isfinite(v) for v in vals):
        raise SimulationFault(f"non-finite plant state: slider={state.slider_position!r}, "
                              f"angles={state.finger_angles!r}, tensions={state.cable_tensions!r}")


# ---------------------------------------------------------------------------
# Cable elasticity study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    youngs_modulus: float
    index_bend: float  # deg, flexion change from rest
    slider_travel: float  # mm
    converged: bool


def steady_state(
    params: PlantParams,
    blocked: Iterable[int] = (MIDDLE,),
    force: float | None = None,
    dt: float = 0.005,
    t_max: float = 120.0,
    tol: float = 1e-4,
) -> tuple[HandPlantState, bool]:
    """Integrate under a constant slider force until the slider settles.

    Convergence means the slider moved less than ``tol`` mm over the last
    second of simulated time (or sits on an end stop).
    """
    plant = HandPlant(params, blocked)
    force = params.sweep_force if force is None else force
    state = HandPlantState.neutral(params)
    window = max(1, int(round(1.0 / dt)))
    history: list[float] = []
    n = int(round(t_max / dt))
    for _ in range(n):
        state, _ = plant.step(state, None, 0.0, dt, force=force)
        history.append(state.slider_position)
        if len(history) > window:
            if abs(history[-1] - history[-1 - window]) < tol:
                return state, True
    return state, False


def adaptive_sweep(
    e_values: Sequence[float] = DEFAULT_SWEEP_E,
    blocked: int = MIDDLE,
    params: PlantParams | None = None,
) -> list[SweepRow]:
    """Blocked-finger elasticity study: index bend and slider travel per E.

    Raises:
        ValueError: If any modulus lies outside [50, 10000] N/mm^2.
    """
    base = params or PlantParams()
    rows = []
    for e in e_values:
        if not 50.0 <= e <= 10000.0:
            raise ValueError(f"Young's modulus {e!r} outside [50, 10000] N/mm^2")
        p = base.with_modulus(float(e))
        state, ok = steady_state(p, blocked=(blocked,))
        rows.append(SweepRow(float(e), state.finger_angles[INDEX] - p.rest_flexion,
                             state.slider_position, ok))
    return rows


# ---------------------------------------------------------------------------
# Sensors
# ---------------------------------------------------------------------------


@dataclass
class SensorSimParams:
    """Synthetic PVDF and bend-sensor settings.

    The slip component is ``burst_gain * v * N * (1 + n(t))`` with ``n``
    unit-RMS noise band-limited to ``burst_band``. Cable-movement and desk
    disturbances are zero-mean band-limited noise of the given RMS volts.
    """

    pvdf: PvdfParams = field(default_factory=lambda: PvdfParams(noise_floor=0.005))
    burst_gain: float = 0.06  # V per (mm/s * N)
    burst_band: tuple[float, float] = (50.0, 400.0)  # Hz
    bend_noise_sigma: float = 0.3  # deg
    cable_drift_amplitude: float = 0.5  # V RMS
    cable_drift_band: tuple[float, float] = (30.0, 90.0)
    desk_vibration_amplitude: float = 0.6  # V RMS
    desk_vibration_band: tuple[float, float] = (60.0, 300.0)

    def validate(self) -> None:
        self.pvdf.validate()
        for name in ("burst_gain", "bend_noise_sigma", "cable_drift_amplitude", "desk_vibration_amplitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


class BandNoise:
    """Unit-RMS Gaussian noise band-limited by a 4th-order Butterworth.

    Generates blocks lazily so a stream can be consumed sample by sample.
    """

    def __init__(self, rng: np.random.Generator, band: tuple[float, float], fs: float, block: int = 4096):
        lo, hi = band
        hi = min(hi, 0.45 * fs)
        self.sos = sps.butter(4, [lo, hi], btype="bandpass", fs=fs, output="sos")
        imp = np.zeros(int(fs) * 2)
        imp[0] = 1.0
        self.scale = 1.0 / math.sqrt(float(np.sum(sps.sosfilt(self.sos, imp) ** 2)))
        self.zi = np.zeros((self.sos.shape[0], 2))
        self.rng = rng
        self.block = block
        self._buf = np.empty(0)
        self._pos = 0
        # Discard the start-up transient.
        self.take(int(fs) // 2)

    def _refill(self) -> None:
        white = self.rng.standard_normal(self.block)
        out, self.zi = sps.sosfilt(self.sos, white, zi=self.zi)
        self._buf = out * self.scale
        self._pos = 0

    def next(self) -> float:
        if self._pos >= self._buf.size:
            self._refill()
        v = self._buf[self._pos]
        self._pos += 1
        return float(v)

    def take(self, n: int) -> np.ndarray:
        return np.array([self.next() for _ in range(n)])


class SensorSim:
    """Stateful generator for the raw PVDF voltage and bend reading.

    Independent random streams are spawned from ``seed`` for each noise
    source, so switching one disturbance on leaves the others unchanged.
    """

    def __init__(self, params: SensorSimParams | None = None, fs: float = 1000.0, seed: int = 0):
        self.params = params or SensorSimParams()
        self.params.validate()
        self.fs = fs
        seqs = np.random.SeedSequence(seed).spawn(5)
        rngs = [np.random.default_rng(s) for s in seqs]
        p = self.params
        self.burst = BandNoise(rngs[0], p.burst_band, fs)
        self.cable = BandNoise(rngs[1], p.cable_drift_band, fs)
        self.desk = BandNoise(rngs[2], p.desk_vibration_band, fs)
        self.floor_rng = rngs[3]
        self.bend_rng = rngs[4]
        self.cable_on = False
        self.desk_on = False

    def pvdf(self, obj: ObjectState | None) -> float:
        p = self.params
        # Always draw, so the noise streams stay aligned with the sample clock.
        nb, nc, nd = self.burst.next(), self.cable.next(), self.desk.next()
        v = 0.0
        if obj is not None and obj.slip_velocity > 0 and obj.index_normal_force > 0:
            v += p.burst_gain * obj.slip_velocity * obj.index_normal_force * (1.0 + nb)
        if self.cable_on:
            v += p.cable_drift_amplitude * nc
        if self.desk_on:
            v += p.desk_vibration_amplitude * nd
        sigma = p.pvdf.noise_floor
        if sigma > 0:
            v += sigma * float(np.clip(self.floor_rng.standard_normal(), -3.0, 3.0))
        return v

    def bend(self, state: HandPlantState) -> float:
        return bend_output(state, self.params, self.bend_rng)


def pvdf_output(
    state: HandPlantState,
    obj: ObjectState | None,
    params: SensorSimParams,
    t: float,
    sim: SensorSim | None = None,
) -> float:
    """One raw PVDF sample at time ``t``.

    A fresh :class:`SensorSim` is seeded from ``t``'s sample index when
    ``sim`` is not given; streaming callers should keep one ``SensorSim``.
    """
    if sim is None:
        sim = SensorSim(params, seed=int(round(t * 1000.0)))
    return sim.pvdf(obj)


def bend_output(state: HandPlantState, params: SensorSimParams, rng: np.random.Generator | None = None) -> float:
    """Little-finger bend reading in degrees; 0 when flat, negative when flexed."""
    reading = -state.finger_angles[LITTLE]
    if rng is not None and params.bend_noise_sigma > 0:
        reading += rng.normal(0.0, params.bend_noise_sigma)
    return reading


# ---------------------------------------------------------------------------
# Synthetic recordings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Burst:
    start: float
    duration: float
    slip_velocity: float = 12.0  # mm/s peak
    normal_force: float = 2.0  # N


@dataclass(frozen=True)
class DisturbanceWindow:
    kind: str  # "cable" or "desk"
    start: float
    end: float


def synthetic_recording(
    duration: float,
    bursts: Sequence[Burst] = (),
    disturbances: Sequence[DisturbanceWindow] = (),
    params: SensorSimParams | None = None,
    fs: float = 1000.0,
    seed: int = 0,
) -> TimeSeries:
    """Raw PVDF trace with labelled slip bursts and disturbance windows.

    Slip velocity follows a half-sine envelope across each burst.
    """
    sim = SensorSim(params, fs, seed)
    n = int(round(duration * fs))
    out = np.empty(n)
    obj = ObjectState()
    for k in range(n):
        t = k / fs
        v = nf = 0.0
        for b in bursts:
            if b.start <= t < b.start + b.duration:
                v = b.slip_velocity * math.sin(math.pi * (t - b.start) / b.duration)
                nf = b.normal_force
        sim.cable_on = any(d.kind == "cable" and d.start <= t < d.end for d in disturbances)
        sim.desk_on = any(d.kind == "desk" and d.start <= t < d.end for d in disturbances)
        obj.slip_velocity = v
        obj.index_normal_force = nf
        out[k] = sim.pvdf(obj)
    return TimeSeries(0.0, 1.0 / fs, out, "V")


def fig4_style_recording(seed: int = 0, params: SensorSimParams | None = None, fs: float = 1000.0):
    """Three slip bursts interleaved with one cable and one desk window.

    Returns ``(raw, bursts, disturbances)``.
    """
    bursts = (Burst(1.0, 0.4), Burst(5.0, 0.3, 15.0, 1.5), Burst(9.0, 0.5, 10.0, 2.5))
    disturbances = (DisturbanceWindow("cable", 2.5, 4.0), DisturbanceWindow("desk", 6.5, 8.0))
    raw = synthetic_recording(11.0, bursts, disturbances, params, fs, seed)
    return raw, bursts, disturbances


PLANT_TRACE_HEADER = ["t", "slider_mm", "index_deg", "middle_deg", "ring_deg", "little_deg",
                      "thumb_deg", "normal_N", "slip_mm", "pvdf_raw_V"]


def plant_trace_row(t: float, state: HandPlantState, obj: ObjectState | None, raw: float) -> list[str]:
    a = state.finger_angles
    normal = obj.normal_force if obj is not None else 0.0
    slip = obj.slip_displacement if obj is not None else 0.0
    return [f"{t:.6f}", f"{state.slider_position:.6f}", *(f"{x:.6f}" for x in a),
            f"{normal:.6f}", f"{slip:.6f}", f"{raw:.9f}"]


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["E_N_per_mm2", "index_bend_deg", "slider_travel_mm", "converged"])
        for r in rows:
            w.writerow([f"{r.youngs_modulus:.6f}", f"{r.index_bend:.6f}", f"{r.slider_travel:.6f}",
                        int(r.converged)])
