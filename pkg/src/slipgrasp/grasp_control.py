"""Grasp/release control logic.

A toggle-driven mode machine picks one of three actuator laws each tick:
a constant closing duty until first contact, a slip-gated integral
controller while holding, and a PI position loop on the little-finger
bend sensor while releasing.

Duty sign convention: positive duty pulls the cables (flexion). Flexion
lowers the bend reading, so the extension loop negates its PI output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

DUTY_LIMIT = 0.85


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass
class GraspIntegrator:
    """Integral controller on slip-gated, normalised PVDF power.

    Attributes:
        ki: Gain in duty per (V^2 * s).
        saturation: Upper duty clamp.
        pre_contact_duty: Constant closing duty before first contact.
        integrator_state: Current duty fraction.
    """

    ki: float = 0.2
    saturation: float = DUTY_LIMIT
    pre_contact_duty: float = 0.30
    integrator_state: float = 0.0

    def __post_init__(self):
        if not 0 < self.saturation <= 1:
            raise ValueError(f"saturation must be in (0, 1], got {self.saturation!r}")
        if not 0 <= self.pre_contact_duty <= self.saturation:
            raise ValueError("pre_contact_duty must lie within [0, saturation]")

    @property
    def duty(self) -> float:
        return self.integrator_state


def grasp_step(ctrl: GraspIntegrator, slip_active: int, power: float, dt: float) -> float:
    """Integrate ``power`` into the duty while a slip is flagged.

    The setpoint is zero power, so the error equals the power and the duty
    only ever grows. Clamping keeps the state inside ``[0, saturation]``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if power < 0:
        raise ValueError(f"power must be >= 0, got {power!r}")
    if slip_active:
        ctrl.integrator_state = _clamp(ctrl.integrator_state + ctrl.ki * power * dt, 0.0, ctrl.saturation)
    return ctrl.integrator_state


def reset_grasp(ctrl: GraspIntegrator) -> GraspIntegrator:
    ctrl.integrator_state = 0.0
    return ctrl


@dataclass
class ExtensionPI:
    """PI position loop on the bend-sensor angle with an error deadband.

    Inside ``|reference - angle| <= deadband_halfwidth`` the command is zero
    and the integrator is frozen. Outside, the P and I terms act on the
    error measured from the deadband edge, which keeps the command
    continuous at the boundary for a fresh integrator.
    """

    kp: float = 0.02
    ki: float = 0.01
    reference: float = -20.0
    deadband_halfwidth: float = 4.0
    limit: float = DUTY_LIMIT
    integrator_state: float = 0.0

    def reset(self) -> None:
        self.integrator_state = 0.0

    def in_deadband(self, angle: float) -> bool:
        return abs(self.reference - angle) <= self.deadband_halfwidth


def extension_step(ctrl: ExtensionPI, angle: float, dt: float) -> float:
    """Return the signed duty that drives ``angle`` toward the reference."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    error = ctrl.reference - angle
    if abs(error) <= ctrl.deadband_halfwidth:
        return 0.0
    e = error - ctrl.deadband_halfwidth if error > 0 else error + ctrl.deadband_halfwidth
    u = ctrl.kp * e + ctrl.ki * (ctrl.integrator_state + e * dt)
    # Conditional integration: skip the update when it would push further into saturation.
    if abs(u) < ctrl.limit or (u > 0) != (e > 0):
        ctrl.integrator_state += e * dt
    u = ctrl.kp * e + ctrl.ki * ctrl.integrator_state
    return -_clamp(u, -ctrl.limit, ctrl.limit)


class Mode(str, enum.Enum):
    IDLE = "Idle"
    CLOSING = "Closing"
    HOLDING = "Holding"
    RELEASING = "Releasing"


class Directive(str, enum.Enum):
    """Which actuator law the mode machine selected."""

    OFF = "off"
    CONSTANT = "constant"
    GRASP = "grasp"
    EXTEND = "extend"


# Every transition the machine may take.
TRANSITIONS = frozenset(
    {
        (Mode.IDLE, Mode.CLOSING),
        (Mode.CLOSING, Mode.HOLDING),
        (Mode.HOLDING, Mode.RELEASING),
        (Mode.RELEASING, Mode.IDLE),
    }
)

_DIRECTIVE = {
    Mode.IDLE: Directive.OFF,
    Mode.CLOSING: Directive.CONSTANT,
    Mode.HOLDING: Directive.GRASP,
    Mode.RELEASING: Directive.EXTEND,
}


@dataclass
class ModeMachine:
    mode: Mode = Mode.IDLE
    contact_flag: int = 0


def mode_step(
    machine: ModeMachine,
    toggle: int,
    contact: int,
    slip_active: int = 0,
    extension_settled: bool = False,
) -> tuple[ModeMachine, Directive]:
    """One tick of the mode chart.

    ``toggle`` is the switch level (1 = grasp, 0 = release).
    ``extension_settled`` reports that the bend angle is inside the
    extension deadband. ``slip_active`` never changes the mode; it only
    gates the integral law inside Holding.
    """
    mode = machine.mode
    if mode is Mode.IDLE and toggle:
        mode = Mode.CLOSING
    elif mode is Mode.CLOSING and contact:
        mode = Mode.HOLDING
    elif mode is Mode.HOLDING and not toggle:
        mode = Mode.RELEASING
    elif mode is Mode.RELEASING and extension_settled:
        mode = Mode.IDLE
    contact_flag = 1 if (contact or (machine.contact_flag and mode is not Mode.IDLE)) else 0
    return ModeMachine(mode, contact_flag), _DIRECTIVE[mode]


@dataclass
class ControllerBank:
    """Mode machine plus both controllers, advanced at a fixed ``dt``."""

    grasp: GraspIntegrator = field(default_factory=GraspIntegrator)
    extension: ExtensionPI = field(default_factory=ExtensionPI)
    machine: ModeMachine = field(default_factory=ModeMachine)
    duty: float = 0.0
    # The bend reading must stay inside the deadband this long before release ends.
    settle_time: float = 0.2
    _in_band_for: float = field(default=0.0, repr=False)

    @property
    def mode(self) -> Mode:
        return self.machine.mode

    def step(
        self,
        toggle: int,
        contact: int,
        slip_active: int,
        power: float,
        bend_deg: float,
        dt: float,
    ) -> float:
        prev = self.machine.mode
        if self.machine.mode is Mode.RELEASING and self.extension.in_deadband(bend_deg):
            self._in_band_for += dt
        else:
            self._in_band_for = 0.0
        settled = self._in_band_for >= self.settle_time - 1e-12
        self.machine, directive = mode_step(self.machine, toggle, contact, slip_active, settled)
        mode = self.machine.mode
        if mode is not prev:
            if mode is Mode.HOLDING:
                # Bumpless hand-over from the constant closing duty.
                self.grasp.integrator_state = self.grasp.pre_contact_duty
            elif mode is Mode.RELEASING:
                reset_grasp(self.grasp)
                self.extension.reset()
        if directive is Directive.CONSTANT:
            duty = self.grasp.pre_contact_duty
        elif directive is Directive.GRASP:
            duty = grasp_step(self.grasp, slip_active, power, dt)
        elif directive is Directive.EXTEND:
            duty = extension_step(self.extension, bend_deg, dt)
        else:
            duty = 0.0
        self.duty = duty
        return duty
