import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipgrasp.grasp_control import (
    DUTY_LIMIT,
    TRANSITIONS,
    ControllerBank,
    Directive,
    ExtensionPI,
    GraspIntegrator,
    Mode,
    ModeMachine,
    extension_step,
    grasp_step,
    mode_step,
    reset_grasp,
)

DT = 0.001


class TestGraspIntegrator:
    def test_no_slip_no_change(self):
        ctrl = GraspIntegrator(integrator_state=0.4)
        assert grasp_step(ctrl, 0, 50.0, DT) == 0.4

    def test_zero_power_no_change(self):
        ctrl = GraspIntegrator(integrator_state=0.4)
        assert grasp_step(ctrl, 1, 0.0, DT) == 0.4

    def test_saturates_exactly(self):
        ctrl = GraspIntegrator()
        for _ in range(1000):
            duty = grasp_step(ctrl, 1, 500.0, DT)
        assert duty == 0.85
        assert grasp_step(ctrl, 1, 500.0, DT) == 0.85

    def test_default_gain_burst(self):
        # 10 V^2 held for 50 ms at Ki = 0.2 adds 0.2 * 10 * 0.05 = 0.10.
        ctrl = GraspIntegrator()
        for _ in range(50):
            grasp_step(ctrl, 1, 10.0, DT)
        assert ctrl.integrator_state == pytest.approx(0.10)

    def test_reset(self):
        ctrl = GraspIntegrator(integrator_state=0.6)
        assert reset_grasp(ctrl).integrator_state == 0.0
        assert reset_grasp(ctrl).integrator_state == 0.0

    @pytest.mark.parametrize("p", [1.0, 37.0, 1e6])
    def test_reset_then_step(self, p):
        ctrl = reset_grasp(GraspIntegrator(integrator_state=0.5))
        assert grasp_step(ctrl, 1, p, 0.01) == pytest.approx(min(0.2 * p * 0.01, 0.85))

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            grasp_step(GraspIntegrator(), 1, -1.0, DT)
        with pytest.raises(ValueError):
            grasp_step(GraspIntegrator(), 1, 1.0, 0.0)
        with pytest.raises(ValueError):
            GraspIntegrator(saturation=1.5)


class TestExtensionPI:
    @pytest.mark.parametrize("angle", [-20.0, -24.0, -16.0, -22.5])
    def test_deadband_zero(self, angle):
        ctrl = ExtensionPI(integrator_state=0.3)
        assert extension_step(ctrl, angle, DT) == 0.0
        assert ctrl.integrator_state == 0.3  # frozen

    def test_signs(self):
        # Reading above the band means the finger is too open: flex (positive duty).
        assert extension_step(ExtensionPI(), 0.0, DT) > 0
        # Reading below the band means too closed: extend (negative duty).
        assert extension_step(ExtensionPI(), -45.0, DT) < 0

    @pytest.mark.parametrize("eps", [1e-3, 1e-2, 0.1])
    def test_continuity_at_boundary(self, eps):
        ctrl = ExtensionPI()
        u = extension_step(ctrl, -24.0 - eps, DT)
        assert abs(u) <= ctrl.kp * eps + ctrl.ki * eps * DT + 1e-15

    def test_output_clamped(self):
        ctrl = ExtensionPI()
        for _ in range(10000):
            u = extension_step(ctrl, 60.0, DT)
            assert abs(u) <= DUTY_LIMIT

    def test_conditional_integration(self):
        # Saturated for a long time, the integrator must not wind up.
        ctrl = ExtensionPI()
        for _ in range(100000):
            extension_step(ctrl, -90.0, DT)
        assert extension_step(ctrl, -90.0, DT) == pytest.approx(-DUTY_LIMIT)
        wound = ctrl.integrator_state
        bound = DUTY_LIMIT / ctrl.ki + 1.0
        assert abs(wound) < bound

    def test_reset(self):
        ctrl = ExtensionPI(integrator_state=4.0)
        ctrl.reset()
        assert ctrl.integrator_state == 0.0


class TestModeMachine:
    def test_idle_grasp_toggle(self):
        m, d = mode_step(ModeMachine(), toggle=1, contact=0)
        assert m.mode is Mode.CLOSING and d is Directive.CONSTANT

    def test_closing_contact(self):
        m, d = mode_step(ModeMachine(Mode.CLOSING), toggle=1, contact=1)
        assert m.mode is Mode.HOLDING and d is Directive.GRASP

    def test_holding_release(self):
        m, d = mode_step(ModeMachine(Mode.HOLDING, 1), toggle=0, contact=1)
        assert m.mode is Mode.RELEASING and d is Directive.EXTEND

    def test_releasing_settled(self):
        m, d = mode_step(ModeMachine(Mode.RELEASING, 1), toggle=0, contact=0, extension_settled=True)
        assert m.mode is Mode.IDLE and d is Directive.OFF

    @pytest.mark.parametrize("mode", list(Mode))
    @pytest.mark.parametrize("toggle,contact,settled", [(0, 0, False), (1, 1, True), (1, 0, False)])
    def test_slip_does_not_change_mode(self, mode, toggle, contact, settled):
        quiet, _ = mode_step(ModeMachine(mode), toggle, contact, 0, settled)
        slipping, _ = mode_step(ModeMachine(mode), toggle, contact, 1, settled)
        assert quiet.mode is slipping.mode

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), st.booleans()),
                    max_size=80))
    def test_only_drawn_transitions(self, inputs):
        m = ModeMachine()
        for toggle, contact, slip, settled in inputs:
            nxt, _ = mode_step(m, toggle, contact, slip, settled)
            if nxt.mode is not m.mode:
                assert (m.mode, nxt.mode) in TRANSITIONS
                if nxt.mode is Mode.CLOSING:
                    assert toggle == 1
                if nxt.mode is Mode.HOLDING:
                    assert contact == 1
            m = nxt


class TestControllerBank:
    def test_sequence(self):
        bank = ControllerBank()
        assert bank.step(0, 0, 0, 0.0, -20.0, DT) == 0.0
        assert bank.step(1, 0, 0, 0.0, -20.0, DT) == 0.30
        assert bank.mode is Mode.CLOSING
        # Bumpless: the integrator takes over at the closing duty.
        assert bank.step(1, 1, 0, 0.0, -40.0, DT) == 0.30
        assert bank.mode is Mode.HOLDING
        duty = bank.step(1, 1, 1, 10.0, -40.0, DT)
        assert duty == pytest.approx(0.30 + 0.2 * 10.0 * DT)
        bank.step(0, 1, 0, 0.0, -40.0, DT)
        assert bank.mode is Mode.RELEASING
        assert bank.grasp.integrator_state == 0.0
        for _ in range(199):
            assert bank.step(0, 0, 0, 0.0, -21.0, DT) == 0.0
            assert bank.mode is Mode.RELEASING
        bank.step(0, 0, 0, 0.0, -21.0, DT)
        assert bank.mode is Mode.IDLE

    def test_release_needs_dwell_in_band(self):
        bank = ControllerBank(machine=ModeMachine(Mode.HOLDING, 1))
        bank.step(0, 1, 0, 0.0, -40.0, DT)
        # One out-of-band reading restarts the dwell.
        for bend in [-21.0] * 150 + [-25.0] + [-21.0] * 150:
            bank.step(0, 0, 0, 0.0, bend, DT)
        assert bank.mode is Mode.RELEASING
        for _ in range(60):
            bank.step(0, 0, 0, 0.0, -21.0, DT)
        assert bank.mode is Mode.IDLE

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1),
                              st.floats(0, 1e4, allow_nan=False), st.floats(-90, 60, allow_nan=False)),
                    max_size=200))
    def test_contracts(self, inputs):
        bank = ControllerBank()
        prev_mode, prev_duty = bank.mode, 0.0
        for toggle, contact, slip, power, bend in inputs:
            duty = bank.step(toggle, contact, slip, power, bend, DT)
            assert abs(duty) <= DUTY_LIMIT
            assert 0.0 <= bank.grasp.integrator_state <= DUTY_LIMIT
            if bank.mode is not Mode.RELEASING:
                assert 0.0 <= duty <= DUTY_LIMIT
            if bank.mode is Mode.HOLDING and prev_mode is Mode.HOLDING:
                assert duty >= prev_duty
            if bank.mode is Mode.RELEASING and prev_mode is not Mode.RELEASING:
                assert bank.grasp.integrator_state == 0.0
            prev_mode, prev_duty = bank.mode, duty
