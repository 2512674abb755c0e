"""Scenario runner, recording processor and sweep driver.

Every run writes CSV traces to an output directory; the run report is
then recomputed from those files, so ``report <dir>`` on a finished run
reproduces the same numbers.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import platform
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .grasp_control import ControllerBank, ExtensionPI, GraspIntegrator, Mode
from .hand_plant import (
    FINGERS,
    GRAVITY,
    MIDDLE,
    PLANT_TRACE_HEADER,
    CableParams,
    DisturbanceWindow,
    HandPlant,
    HandPlantState,
    ObjectState,
    PlantParams,
    SensorSim,
    SensorSimParams,
    SimulationFault,
    SweepRow,
    adaptive_sweep,
    plant_trace_row,
    write_sweep_csv,
)
from .signal_core import (
    MIN_FS,
    DCBlocker,
    PvdfParams,
    apply_filter,
    design_filter,
    power_signal,
    power_spectral_density,
    read_timeseries_csv,
    write_psd_csv,
    write_timeseries_csv,
)
from .slip_detector import (
    DetectorState,
    SlipEvent,
    detect_events,
    events_from_outputs,
    write_events_csv,
)

log = logging.getLogger(__name__)

CONTROLLER_TRACE_HEADER = ["t", "mode", "duty", "slip_active", "power", "bend_deg"]
TARGET_BAND = (1125.0, 3000.0)
TRAVEL_BAND = (3.0, 10.0)


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass
class ScenarioEvent:
    t: float
    kind: str  # add_mass | apply_torque | toggle
    value: Any = None


@dataclass
class ObjectSpec:
    preset: str = "cup"  # "cup" or "none"
    mass: float = 0.04  # kg
    friction_coefficient: float = 0.5
    contact_flexion: list | None = None
    impact_factor: float = 2.0  # peak drop load as a multiple of the added weight


@dataclass
class DetectorConfig:
    high: float = 3.0
    low: float = 1.0
    normalization: float = 1.0


@dataclass
class FilterConfig:
    gain: float = 1.0
    dc_block_hz: float | None = None


@dataclass
class ControllerConfig:
    grasp_ki: float = 0.2
    saturation: float = 0.85
    pre_contact_duty: float = 0.30
    extension_kp: float = 0.02
    extension_ki: float = 0.01
    reference: float = -20.0
    deadband_halfwidth: float = 4.0
    settle_time: float = 0.2


@dataclass
class ChecksConfig:
    drop_bound_mm: float = 5.0
    min_duty_steps: int | None = None  # defaults to the number of add_mass events
    min_step: float = 0.01  # smallest duty rise counted as a step
    step_merge_s: float = 0.3  # rises closer than this merge into one step


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    duration: float = 75.0
    sample_rate: float = 1000.0
    rng_seed: int | None = 0
    object: ObjectSpec = field(default_factory=ObjectSpec)
    events: list = field(default_factory=list)
    disturbances: list = field(default_factory=list)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    plant: dict = field(default_factory=dict)
    sensor: dict = field(default_factory=dict)
    checks: ChecksConfig = field(default_factory=ChecksConfig)

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def validate(self) -> None:
        if not self.duration > 0:
            raise ConfigError(f"duration: must be > 0, got {self.duration!r}")
        if not self.sample_rate >= MIN_FS:
            raise ConfigError(f"sample_rate: must be >= {MIN_FS:g} Hz, got {self.sample_rate!r}")
        if self.rng_seed is None:
            raise ConfigError("rng_seed: a seed is required for simulation scenarios")
        last = -math.inf
        for i, ev in enumerate(self.events):
            if ev.t < last:
                raise ConfigError(f"events[{i}].t: events must be time-ordered ({ev.t} < {last})")
            last = ev.t
            if ev.kind not in ("add_mass", "apply_torque", "toggle"):
                raise ConfigError(f"events[{i}].kind: unknown event kind {ev.kind!r}")
            if ev.kind == "toggle" and ev.value not in ("grasp", "release"):
                raise ConfigError(f"events[{i}].value: toggle expects 'grasp' or 'release'")
            if ev.kind != "toggle" and not isinstance(ev.value, (int, float)):
                raise ConfigError(f"events[{i}].value: expected a number")
        for i, d in enumerate(self.disturbances):
            if d.kind not in ("cable", "desk"):
                raise ConfigError(f"disturbances[{i}].kind: expected 'cable' or 'desk'")
            if not d.end > d.start:
                raise ConfigError(f"disturbances[{i}]: end must exceed start")
        if self.object.preset not in ("cup", "none"):
            raise ConfigError(f"object.preset: expected 'cup' or 'none', got {self.object.preset!r}")
        for name in ("mass", "friction_coefficient"):
            if not getattr(self.object, name) > 0:
                raise ConfigError(f"object.{name}: must be > 0, got {getattr(self.object, name)!r}")
        if not self.object.impact_factor >= 0:
            raise ConfigError(f"object.impact_factor: must be >= 0, got {self.object.impact_factor!r}")
        if not self.detector.high > self.detector.low > 0:
            raise ConfigError("detector: need high > low > 0")
        # Surfaces bad override keys early, with their path.
        self.plant_params()
        self.sensor_params()

    def plant_params(self) -> PlantParams:
        return _plant_params(self.plant, "plant")

    def sensor_params(self) -> SensorSimParams:
        return _sensor_params(self.sensor, "sensor")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


_CABLE_KEYS = {f.name for f in dataclasses.fields(CableParams)}
_PVDF_KEYS = {f.name for f in dataclasses.fields(PvdfParams)}


def _plant_params(overrides: dict, path: str) -> PlantParams:
    plant_keys = {f.name for f in dataclasses.fields(PlantParams)} - {"cable"}
    cable, rest = {}, {}
    for key, value in (overrides or {}).items():
        if key in _CABLE_KEYS:
            cable[key] = float(value)
        elif key in plant_keys:
            rest[key] = tuple(float(v) for v in value) if key == "lever_ratios" else float(value)
        else:
            raise ConfigError(f"{path}.{key}: unknown plant parameter")
    try:
        return PlantParams(cable=CableParams(**cable), **rest)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _sensor_params(overrides: dict, path: str) -> SensorSimParams:
    sensor_keys = {f.name for f in dataclasses.fields(SensorSimParams)} - {"pvdf"}
    pvdf, rest = {}, {}
    for key, value in (overrides or {}).items():
        if key in _PVDF_KEYS:
            pvdf[key] = None if value is None else float(value)
        elif key in sensor_keys:
            rest[key] = tuple(float(v) for v in value) if key.endswith("_band") else float(value)
        else:
            raise ConfigError(f"{path}.{key}: unknown sensor parameter")
    base = PvdfParams(noise_floor=0.005)
    params = SensorSimParams(pvdf=dataclasses.replace(base, **pvdf), **rest)
    try:
        params.validate()
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return params


def _build(cls, data, path: str):
    """Instantiate a flat config dataclass, reporting bad keys by path."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key")
        default = names[key].default
        try:
            if isinstance(default, bool):
                value = bool(value)
            elif isinstance(default, float) and value is not None:
                value = float(value)
            elif isinstance(default, int) and value is not None:
                value = int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}: expected a number, got {value!r}") from None
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected a mapping")
    data = dict(data)
    sections = {
        "object": ObjectSpec,
        "detector": DetectorConfig,
        "filter": FilterConfig,
        "controller": ControllerConfig,
        "checks": ChecksConfig,
    }
    kwargs: dict[str, Any] = {}
    for key, cls in sections.items():
        if key in data:
            kwargs[key] = _build(cls, data.pop(key), key)
    events = []
    for i, raw in enumerate(data.pop("events", None) or []):
        if not isinstance(raw, dict) or "t" not in raw or "kind" not in raw:
            raise ConfigError(f"events[{i}]: expected a mapping with 't' and 'kind'")
        extra = set(raw) - {"t", "kind", "value"}
        if extra:
            raise ConfigError(f"events[{i}].{sorted(extra)[0]}: unknown key")
        try:
            t = float(raw["t"])
        except (TypeError, ValueError):
            raise ConfigError(f"events[{i}].t: expected a number") from None
        events.append(ScenarioEvent(t, str(raw["kind"]), raw.get("value")))
    kwargs["events"] = events
    windows = []
    for i, raw in enumerate(data.pop("disturbances", None) or []):
        try:
            windows.append(DisturbanceWindow(str(raw["kind"]), float(raw["start"]), float(raw["end"])))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"disturbances[{i}]: expected kind/start/end") from None
    kwargs["disturbances"] = windows
    for key in ("plant", "sensor"):
        if key in data:
            val = data.pop(key) or {}
            if not isinstance(val, dict):
                raise ConfigError(f"{key}: expected a mapping")
            kwargs[key] = val
    for key in ("name", "duration", "sample_rate", "rng_seed"):
        if key in data:
            val = data.pop(key)
            try:
                kwargs[key] = {"name": str, "duration": float, "sample_rate": float,
                               "rng_seed": lambda v: None if v is None else int(v)}[key](val)
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: invalid value {val!r}") from None
    if data:
        raise ConfigError(f"{sorted(data)[0]}: unknown key")
    cfg = ScenarioConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> dict:
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh)
    return data or {}


def load_scenario(path: str | Path) -> ScenarioConfig:
    return config_from_dict(load_config(path))


def cup_scenario(seed: int = 0) -> ScenarioConfig:
    """Cup test: grasp, four tool drops, a manual twist, then release."""
    events = [ScenarioEvent(2.0, "toggle", "grasp")]
    events += [ScenarioEvent(t, "add_mass", 0.15) for t in (15.0, 25.0, 35.0, 45.0)]
    events += [
        ScenarioEvent(55.0, "apply_torque", 40.0),
        ScenarioEvent(57.0, "apply_torque", 0.0),
        ScenarioEvent(68.0, "toggle", "release"),
    ]
    return ScenarioConfig(name="cup", duration=75.0, rng_seed=seed, events=events)


def empty_scenario(seed: int = 0, duration: float = 10.0) -> ScenarioConfig:
    return ScenarioConfig(name="empty", duration=duration, rng_seed=seed,
                          object=ObjectSpec(preset="none"), checks=ChecksConfig(min_duty_steps=0))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class DutyStep:
    start: float
    end: float
    magnitude: float


@dataclass
class RunReport:
    events: list[SlipEvent]
    duty_steps: list[DutyStep]
    max_slip_mm: float
    final_bend_deg: float
    max_duty: float
    checks: dict[str, bool]
    details: dict[str, str] = field(default_factory=dict)
    fault: str | None = None
    out_dir: Path | None = None

    @property
    def passed(self) -> bool:
        return self.fault is None and all(self.checks.values())

    def metrics(self) -> dict[str, str]:
        return {
            "slip_event_count": str(len(self.events)),
            "duty_step_count": str(len(self.duty_steps)),
            "duty_step_magnitudes": ";".join(f"{s.magnitude:.6f}" for s in self.duty_steps),
            "max_slip_mm": f"{self.max_slip_mm:.6f}",
            "final_bend_deg": f"{self.final_bend_deg:.6f}",
            "max_duty": f"{self.max_duty:.6f}",
            "fault": self.fault or "",
        }


def duty_steps(times, duty, modes, min_step: float = 0.01, merge_s: float = 0.3) -> list[DutyStep]:
    """Rises of the duty level while Holding.

    Consecutive rising samples form a run; runs separated by less than
    ``merge_s`` join into one step. Steps smaller than ``min_step`` are dropped.
    """
    times = np.asarray(times, dtype=float)
    duty = np.asarray(duty, dtype=float)
    holding = np.asarray([m == Mode.HOLDING.value for m in modes])
    rising = np.zeros(duty.size, dtype=bool)
    rising[1:] = (duty[1:] > duty[:-1]) & holding[1:] & holding[:-1]
    steps: list[DutyStep] = []
    idx = np.flatnonzero(rising)
    if idx.size == 0:
        return steps
    start = prev = idx[0]
    for k in idx[1:]:
        if times[k] - times[prev] > merge_s:
            steps.append(DutyStep(times[start - 1], times[prev], duty[prev] - duty[start - 1]))
            start = k
        prev = k
    steps.append(DutyStep(times[start - 1], times[prev], duty[prev] - duty[start - 1]))
    return [s for s in steps if s.magnitude >= min_step]


def _read_columns(path: Path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list[str]] = {h: [] for h in header}
        for row in reader:
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def compute_report(trace_dir: str | Path) -> RunReport:
    """Derive the run report purely from the trace files in ``trace_dir``."""
    trace_dir = Path(trace_dir)
    manifest = json.loads((trace_dir / "manifest.json").read_text())
    cfg = config_from_dict(manifest["config"])
    ctrl = _read_columns(trace_dir / "controller_trace.csv")
    plant = _read_columns(trace_dir / "plant_trace.csv")
    t = np.array(ctrl["t"], dtype=float)
    duty = np.array(ctrl["duty"], dtype=float)
    slip_active = np.array(ctrl["slip_active"], dtype=np.int8)
    power = np.array(ctrl["power"], dtype=float)
    bend = np.array(ctrl["bend_deg"], dtype=float)
    modes = ctrl["mode"]
    slip = np.array(plant["slip_mm"], dtype=float)

    events = events_from_outputs(t, slip_active, power)
    chk = cfg.checks
    steps = duty_steps(t, duty, modes, chk.min_step, chk.step_merge_s)
    n_add = sum(1 for e in cfg.events if e.kind == "add_mass" and e.t < cfg.duration)
    min_steps = n_add if chk.min_duty_steps is None else chk.min_duty_steps

    # Grip slip only counts while the object is held, i.e. before release.
    released = [i for i, m in enumerate(modes) if m in (Mode.RELEASING.value,)]
    held_end = released[0] if released else len(slip)
    max_slip = float(slip[:held_end].max()) if held_end else 0.0
    # Median over the last half second keeps sensor noise out of the final angle.
    tail = bend[t >= t[-1] - 0.5] if bend.size else bend
    final_bend = float(np.median(tail)) if tail.size else float("nan")
    max_duty = float(np.max(np.abs(duty))) if duty.size else 0.0

    checks = {
        "duty_within_saturation": bool(max_duty <= cfg.controller.saturation + 1e-12),
        "slip_below_drop_bound": bool(max_slip < chk.drop_bound_mm),
        "duty_steps": bool(len(steps) >= min_steps),
    }
    details = {
        "duty_within_saturation": f"max |duty| {max_duty:.4f} <= {cfg.controller.saturation}",
        "slip_below_drop_bound": f"max slip {max_slip:.3f} mm < {chk.drop_bound_mm} mm",
        "duty_steps": f"{len(steps)} steps >= {min_steps}",
    }
    if released:
        ref, hw = cfg.controller.reference, cfg.controller.deadband_halfwidth
        checks["release_in_deadband"] = bool(abs(final_bend - ref) <= hw)
        details["release_in_deadband"] = f"final bend {final_bend:.2f} deg within {ref}+/-{hw}"
    fault_file = trace_dir / "FAULT"
    fault = fault_file.read_text().strip() if fault_file.exists() else None
    return RunReport(events, steps, max_slip, final_bend, max_duty, checks, details, fault, trace_dir)


def write_report(report: RunReport, out_dir: Path) -> None:
    with open(out_dir / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for k, v in report.metrics().items():
            w.writerow([k, v])
    with open(out_dir / "checks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "passed", "detail"])
        for k, v in report.checks.items():
            w.writerow([k, int(v), report.details.get(k, "")])
    write_events_csv(report.events, out_dir / "events.csv")
    with open(out_dir / "duty_steps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_s", "end_s", "magnitude"])
        for s in report.duty_steps:
            w.writerow([f"{s.start:.6f}", f"{s.end:.6f}", f"{s.magnitude:.6f}"])


def read_report_metrics(out_dir: str | Path) -> dict[str, str]:
    with open(Path(out_dir) / "report.csv", newline="") as fh:
        return {r["metric"]: r["value"] for r in csv.DictReader(fh)}


def verify_report(out_dir: str | Path) -> tuple[RunReport, list[str]]:
    """Recompute the report and list metrics that disagree with ``report.csv``."""
    fresh = compute_report(out_dir)
    stored = read_report_metrics(out_dir)
    mismatches = [k for k, v in fresh.metrics().items() if stored.get(k) != v]
    return fresh, mismatches


def _manifest(kind: str, config: dict, digest: str) -> dict:
    import scipy

    return {
        "kind": kind,
        "config": config,
        "config_sha256": digest,
        "versions": {
            "slipgrasp": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def _write_manifest(out_dir: Path, manifest: dict) -> None:
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# Closed-loop simulation
# ---------------------------------------------------------------------------


def _make_object(spec: ObjectSpec) -> ObjectState | None:
    if spec.preset == "none":
        return None
    # The object rests on the table until the hand lifts it.
    obj = dataclasses.replace(ObjectState.cup(spec.mass, spec.friction_coefficient), supported=True)
    if spec.contact_flexion is not None:
        flex = tuple(None if c is None else float(c) for c in spec.contact_flexion)
        if len(flex) != len(FINGERS):
            raise ConfigError("object.contact_flexion: expected one entry per finger")
        obj = dataclasses.replace(obj, contact_flexion=flex)
    return obj


def run_scenario(config: ScenarioConfig, out_dir: str | Path | None = None) -> RunReport:
    """Run the closed loop at one fixed step and write all traces.

    Loop per sample: plant state -> raw PVDF -> filter -> power ->
    detector -> controllers -> plant step. A :class:`SimulationFault`
    stops the run, leaves the partial traces in place and writes a
    ``FAULT`` marker that the report picks up.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else Path(tempfile.mkdtemp(prefix="slipgrasp-"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "FAULT").unlink(missing_ok=True)
    _write_manifest(out, _manifest("simulate", config.to_dict(), config.digest()))

    dt, fs = config.dt, config.sample_rate
    params = config.plant_params()
    plant = HandPlant(params)
    state = HandPlantState.neutral(params)
    obj = _make_object(config.object)
    sensor = SensorSim(config.sensor_params(), fs, config.rng_seed)
    filt = design_filter(fs, gain=config.filter.gain)
    blocker = DCBlocker(config.filter.dc_block_hz, fs) if config.filter.dc_block_hz else None
    det = DetectorState(config.detector.high, config.detector.low)
    norm = config.detector.normalization
    cc = config.controller
    bank = ControllerBank(
        grasp=GraspIntegrator(cc.grasp_ki, cc.saturation, cc.pre_contact_duty),
        extension=ExtensionPI(cc.extension_kp, cc.extension_ki, cc.reference, cc.deadband_halfwidth,
                              limit=cc.saturation),
        settle_time=cc.settle_time,
    )
    events = list(config.events)
    ev_i = 0
    toggle = 0
    n = int(round(config.duration * fs))
    fault = None

    with open(out / "plant_trace.csv", "w", newline="") as pf, \
            open(out / "controller_trace.csv", "w", newline="") as cf:
        pw, cw = csv.writer(pf), csv.writer(cf)
        pw.writerow(PLANT_TRACE_HEADER)
        cw.writerow(CONTROLLER_TRACE_HEADER)
        for k in range(n):
            t = k * dt
            while ev_i < len(events) and events[ev_i].t <= t + 1e-9:
                ev = events[ev_i]
                ev_i += 1
                if ev.kind == "toggle":
                    toggle = 1 if ev.value == "grasp" else 0
                elif obj is not None and ev.kind == "add_mass":
                    added = float(ev.value)
                    obj = dataclasses.replace(
                        obj, mass=obj.mass + added,
                        impact_load=obj.impact_load + config.object.impact_factor * added * GRAVITY)
                elif obj is not None and ev.kind == "apply_torque":
                    obj = dataclasses.replace(obj, external_torque=float(ev.value))
            sensor.cable_on = any(d.kind == "cable" and d.start <= t < d.end for d in config.disturbances)
            sensor.desk_on = any(d.kind == "desk" and d.start <= t < d.end for d in config.disturbances)

            raw = sensor.pvdf(obj)
            bend = sensor.bend(state)
            y = filt.step(raw)
            if blocker is not None:
                y = blocker.step(y)
            p = y * y / norm
            active = det.step(p)
            contact = int(obj is not None and obj.index_contact)
            prev_mode = bank.mode
            duty = bank.step(toggle, contact, active, p, bend, dt)
            if obj is not None and bank.mode is not prev_mode:
                if bank.mode is Mode.HOLDING:
                    obj = dataclasses.replace(obj, supported=False)
                elif bank.mode is Mode.RELEASING:
                    # Released objects are set down on the table.
                    obj = dataclasses.replace(obj, supported=True)

            pw.writerow(plant_trace_row(t, state, obj, raw))
            cw.writerow([f"{t:.6f}", bank.mode.value, f"{duty:.9f}", active, f"{p:.9f}", f"{bend:.6f}"])
            try:
                state, obj = plant.step(state, obj, duty, dt)
            except SimulationFault as exc:
                fault = f"t={t:.6f}: {exc}"
                log.error("simulation fault at %s", fault)
                break
    if fault:
        (out / "FAULT").write_text(fault + "\n")
    report = compute_report(out)
    write_report(report, out)
    return report


# ---------------------------------------------------------------------------
# Offline recording processing
# ---------------------------------------------------------------------------


@dataclass
class ProcessResult:
    events: list[SlipEvent]
    filtered: Any
    power: Any


def process_recording(
    csv_path: str | Path,
    out_dir: str | Path | None = None,
    detector: DetectorConfig | None = None,
    filter_cfg: FilterConfig | None = None,
    psd: bool = False,
) -> ProcessResult:
    """Apply filter, power and detector to a recorded ``t,value,unit`` CSV.

    Writes ``filtered.csv``, ``power.csv`` and ``events.csv`` (plus
    ``psd.csv`` when ``psd`` is set) when ``out_dir`` is given.
    """
    detector = detector or DetectorConfig()
    filter_cfg = filter_cfg or FilterConfig()
    raw = read_timeseries_csv(csv_path)
    filt = design_filter(raw.fs, gain=filter_cfg.gain)
    filtered = apply_filter(filt, raw)
    if filter_cfg.dc_block_hz:
        blocker = DCBlocker(filter_cfg.dc_block_hz, raw.fs)
        filtered = filtered.with_values([blocker.step(v) for v in filtered.values])
    power = power_signal(filtered, detector.normalization)
    events = detect_events(power, DetectorState(detector.high, detector.low))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_timeseries_csv(filtered, out / "filtered.csv")
        write_timeseries_csv(power, out / "power.csv")
        write_events_csv(events, out / "events.csv")
        if psd:
            f, pxx = power_spectral_density(raw)
            write_psd_csv(f, pxx, out / "psd.csv")
        cfg = {"input": str(csv_path), "detector": dataclasses.asdict(detector),
               "filter": dataclasses.asdict(filter_cfg)}
        digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()
        _write_manifest(out, _manifest("process", cfg, digest))
    return ProcessResult(events, filtered, power)


# ---------------------------------------------------------------------------
# Elasticity sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepConfig:
    e_min: float = 50.0
    e_max: float = 10000.0
    count: int = 17
    spacing: str = "log"  # or "linear"
    blocked: str = "middle"
    workers: int = 1


@dataclass
class BandSummary:
    grid_band: tuple[float, float] | None  # extreme grid moduli with travel in [3, 10] mm
    interpolated_band: tuple[float, float] | None  # log-E interpolated crossings of 10 and 3 mm
    flagged: bool
    reasons: list[str]


def sweep_grid(cfg: SweepConfig) -> np.ndarray:
    if cfg.count < 2:
        raise ConfigError(f"sweep.count: need at least 2 points, got {cfg.count}")
    if cfg.spacing == "log":
        return np.geomspace(cfg.e_min, cfg.e_max, cfg.count)
    if cfg.spacing == "linear":
        return np.linspace(cfg.e_min, cfg.e_max, cfg.count)
    raise ConfigError(f"sweep.spacing: expected 'log' or 'linear', got {cfg.spacing!r}")


def _crossing(e: np.ndarray, travel: np.ndarray, level: float) -> float | None:
    le = np.log(e)
    for i in range(len(e) - 1):
        a, b = travel[i], travel[i + 1]
        if a != b and (a - level) * (b - level) <= 0:
            f = (a - level) / (a - b)
            return float(np.exp(le[i] + f * (le[i + 1] - le[i])))
    return None


def band_summary(rows: Sequence[SweepRow], travel_band: tuple[float, float] = TRAVEL_BAND) -> BandSummary:
    e = np.array([r.youngs_modulus for r in rows])
    travel = np.array([r.slider_travel for r in rows])
    lo_mm, hi_mm = travel_band
    inside = e[(travel >= lo_mm) & (travel <= hi_mm)]
    reasons = []
    grid_band = (float(inside.min()), float(inside.max())) if inside.size else None
    if inside.size == 0:
        reasons.append("no grid point has slider travel inside the band")
    elif inside.size == 1:
        reasons.append("band is degenerate (a single grid point)")
    lo, hi = _crossing(e, travel, hi_mm), _crossing(e, travel, lo_mm)
    interp = (lo, hi) if lo is not None and hi is not None else None
    if interp is None:
        reasons.append("slider travel never crosses both band limits")
    if any(not r.converged for r in rows):
        reasons.append("non-converged rows: " + ",".join(f"{r.youngs_modulus:g}" for r in rows if not r.converged))
    if np.any(np.diff(travel) > 1e-9):
        reasons.append("slider travel is not monotone in E")
    return BandSummary(grid_band, interp, bool(reasons), reasons)


def within_one_grid_point(grid: Sequence[float], estimate: float, target: float) -> bool:
    """True when ``estimate`` lies between the neighbours of the grid point nearest ``target``."""
    g = np.asarray(grid, dtype=float)
    j = int(np.argmin(np.abs(np.log(g) - math.log(target))))
    lo = g[max(j - 1, 0)]
    hi = g[min(j + 1, g.size - 1)]
    return bool(lo <= estimate <= hi)


def _sweep_one(args) -> SweepRow:
    e, blocked, params = args
    return adaptive_sweep([e], blocked=blocked, params=params)[0]


def run_sweep(
    cfg: SweepConfig | None = None,
    plant_overrides: dict | None = None,
    out_dir: str | Path | None = None,
) -> tuple[list[SweepRow], BandSummary]:
    """Blocked-finger elasticity sweep plus the acceptable-band summary."""
    cfg = cfg or SweepConfig()
    grid = sweep_grid(cfg)
    if cfg.blocked not in FINGERS:
        raise ConfigError(f"sweep.blocked: expected one of {FINGERS}")
    blocked = FINGERS.index(cfg.blocked)
    params = _plant_params(plant_overrides or {}, "plant")
    jobs = [(float(e), blocked, params) for e in grid]
    if cfg.workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(cfg.workers) as ex:
            rows = list(ex.map(_sweep_one, jobs))
    else:
        rows = [_sweep_one(j) for j in jobs]
    summary = band_summary(rows)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / "sweep.csv")
        with open(out / "band.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "e_low", "e_high", "flagged", "reasons"])
            for kind, band in (("grid", summary.grid_band), ("interpolated", summary.interpolated_band)):
                lo, hi = band if band else ("", "")
                w.writerow([kind, f"{lo:.6f}" if band else "", f"{hi:.6f}" if band else "",
                            int(summary.flagged), "; ".join(summary.reasons)])
        conf = {"sweep": dataclasses.asdict(cfg), "plant": plant_overrides or {}}
        digest = hashlib.sha256(json.dumps(conf, sort_keys=True).encode()).hexdigest()
        _write_manifest(out, _manifest("sweep", conf, digest))
    return rows, summary


def load_sweep(path: str | Path) -> tuple[SweepConfig, dict]:
    data = load_config(path)
    extra = set(data) - {"sweep", "plant"}
    if extra:
        raise ConfigError(f"{sorted(extra)[0]}: unknown key")
    cfg = _build(SweepConfig, data.get("sweep"), "sweep")
    plant = data.get("plant") or {}
    _plant_params(plant, "plant")
    return cfg, plant


def is_unimodal(values: Sequence[float], tol: float = 1e-9) -> bool:
    """Non-decreasing up to the maximum, non-increasing after it."""
    v = np.asarray(values, dtype=float)
    j = int(np.argmax(v))
    return bool(np.all(np.diff(v[: j + 1]) >= -tol) and np.all(np.diff(v[j:]) <= tol))
