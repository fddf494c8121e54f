"""Velocity curves and the piecewise-constant weight integrator."""
from __future__ import annotations

import numpy as np
import pytest

from bodymod.interaction import (
    Contact,
    GestureInput,
    InputSample,
    InteractionError,
    JoystickInput,
    ModMethod,
    ObjectsInput,
    Side,
    WeightState,
    gesture_velocity,
    joystick_velocity,
    load_stream,
    object_ramp_gain,
    object_velocity,
    replay,
    save_stream,
    step,
)


def gesture_sample(t: float, rate: float, held: bool = True) -> InputSample:
    return InputSample(timestamp=t, method=ModMethod.GESTURE,
                       gesture=GestureInput(held, rate))


def joystick_sample(t: float, tilt: float, side: Side = Side.LEFT) -> InputSample:
    return InputSample(timestamp=t, method=ModMethod.JOYSTICK,
                       joystick=JoystickInput(side, tilt))


def objects_sample(t: float, touching: Contact | None) -> InputSample:
    return InputSample(timestamp=t, method=ModMethod.OBJECTS,
                       objects=ObjectsInput(touching))


def random_stream(rng: np.random.Generator, method: ModMethod,
                  length: int) -> list[InputSample]:
    samples = []
    t = 0.0
    for _ in range(length):
        t += float(rng.uniform(0.001, 0.5))
        if method is ModMethod.GESTURE:
            samples.append(gesture_sample(t, float(rng.uniform(-3, 3)),
                                          bool(rng.integers(0, 2))))
        elif method is ModMethod.JOYSTICK:
            side = Side.LEFT if rng.integers(0, 2) else Side.RIGHT
            samples.append(joystick_sample(t, float(rng.uniform(-1, 1)), side))
        else:
            touch = [None, Contact.PLUS, Contact.MINUS][int(rng.integers(0, 3))]
            samples.append(objects_sample(t, touch))
    return samples


class TestVelocityCurves:
    def test_gesture_anchor_points(self):
        assert gesture_velocity(1.0) == pytest.approx(18.5)
        assert gesture_velocity(0.0) == 0.0
        assert gesture_velocity(-1.0) == pytest.approx(-18.5)

    def test_gesture_odd(self):
        for r in np.linspace(0.0, 4.0, 25):
            assert gesture_velocity(-r) == pytest.approx(-gesture_velocity(r))

    def test_gesture_monotone_magnitude(self):
        rs = np.linspace(0.0, 5.0, 100)
        vs = [abs(gesture_velocity(r)) for r in rs]
        assert all(b >= a for a, b in zip(vs, vs[1:]))

    def test_joystick_anchor_points(self):
        assert joystick_velocity(1.0) == pytest.approx(15.0)
        assert joystick_velocity(0.5) == pytest.approx(7.5)
        assert joystick_velocity(0.0) == 0.0
        assert joystick_velocity(-1.0) == pytest.approx(-15.0)

    def test_joystick_deadzone(self):
        assert joystick_velocity(0.04) == 0.0
        assert joystick_velocity(-0.04) == 0.0
        assert joystick_velocity(0.06) != 0.0

    def test_joystick_odd_and_monotone(self):
        ts = np.linspace(0.0, 1.0, 50)
        vs = [abs(joystick_velocity(t)) for t in ts]
        assert all(b >= a for a, b in zip(vs, vs[1:]))
        for t in ts:
            assert joystick_velocity(-t) == pytest.approx(-joystick_velocity(t))

    def test_joystick_out_of_range(self):
        with pytest.raises(InteractionError):
            joystick_velocity(1.2)

    def test_object_anchor_points(self):
        assert object_velocity(0.0) == pytest.approx(3.0)
        assert object_velocity(1.5) == pytest.approx(15.0)
        assert object_velocity(10.0) == pytest.approx(15.0)
        assert object_velocity(0.75) == pytest.approx(6.0)

    def test_object_negative_duration(self):
        with pytest.raises(InteractionError):
            object_velocity(-0.1)

    def test_object_ramp_gain_is_integral(self):
        # the analytic gain equals numerical quadrature of the velocity curve
        for d0, dt in [(0.0, 0.4), (0.3, 1.0), (1.2, 0.6), (2.0, 1.0)]:
            grid = np.linspace(d0, d0 + dt, 20001)
            numeric = np.trapezoid([object_velocity(u) for u in grid], grid)
            assert object_ramp_gain(d0, dt) == pytest.approx(numeric, abs=1e-6)


class TestStep:
    def test_idle_input_only_advances_clock(self):
        s = WeightState.initial(80.0, ModMethod.GESTURE)
        s = step(s, gesture_sample(0.0, 2.0, held=False))
        s = step(s, gesture_sample(5.0, 2.0, held=False))
        assert s.weight == 80.0 and s.timestamp == 5.0

    def test_objects_clamp_at_upper_bound(self):
        # holding Plus for 60 s from 80 kg saturates at 1.35 * 80 = 108
        s = WeightState.initial(80.0, ModMethod.OBJECTS)
        s = step(s, objects_sample(0.0, Contact.PLUS))
        s = step(s, objects_sample(60.0, Contact.PLUS))
        assert s.weight == pytest.approx(108.0)

    def test_joystick_integrator_and_clamp(self):
        s = WeightState.initial(80.0, ModMethod.JOYSTICK)
        s = step(s, joystick_sample(0.0, 1.0))
        s = step(s, joystick_sample(2.0, 1.0))
        # 80 + 15 * 2 = 110 clamps to 108
        assert s.weight == pytest.approx(108.0)

    def test_hundred_ticks_interval_count(self):
        # first sample only starts the clock: 100 ticks span 99 intervals
        s = WeightState.initial(80.0, ModMethod.JOYSTICK)
        for i in range(100):
            s = step(s, joystick_sample(1.0 + 0.01 * i, 1.0))
        assert s.weight == pytest.approx(80.0 + 15.0 * 0.99)

    def test_non_monotone_timestamp_rejected(self):
        s = WeightState.initial(80.0, ModMethod.JOYSTICK)
        s = step(s, joystick_sample(1.0, 0.5))
        with pytest.raises(InteractionError, match="non-monotone"):
            step(s, joystick_sample(1.0, 0.5))

    def test_method_mismatch_rejected(self):
        s = WeightState.initial(80.0, ModMethod.JOYSTICK)
        with pytest.raises(InteractionError):
            step(s, gesture_sample(1.0, 0.5))

    def test_joystick_lock(self):
        s = WeightState.initial(80.0, ModMethod.JOYSTICK)
        s = step(s, joystick_sample(0.0, 0.5, Side.LEFT))
        assert s.joystick_lock is Side.LEFT
        before = s.weight
        s = step(s, joystick_sample(1.0, 1.0, Side.RIGHT))
        assert s.weight == before   # other stick is deactivated
        s = step(s, joystick_sample(2.0, 1.0, Side.LEFT))
        assert s.weight > before

    def test_object_contact_resets_on_release(self):
        s = WeightState.initial(80.0, ModMethod.OBJECTS)
        s = step(s, objects_sample(0.0, Contact.PLUS))
        s = step(s, objects_sample(2.0, Contact.PLUS))
        assert s.contact_duration == pytest.approx(2.0)
        s = step(s, objects_sample(2.5, None))
        assert s.contact is None and s.contact_duration == 0.0

    def test_object_contact_resets_on_switch(self):
        s = WeightState.initial(80.0, ModMethod.OBJECTS)
        s = step(s, objects_sample(0.0, Contact.PLUS))
        s = step(s, objects_sample(2.0, Contact.PLUS))
        s = step(s, objects_sample(2.5, Contact.MINUS))
        # switch restarts the ramp: duration is only the new interval
        assert s.contact is Contact.MINUS
        assert s.contact_duration == pytest.approx(0.5)


class TestProperties:
    @pytest.mark.parametrize("method", list(ModMethod))
    def test_bounds_never_violated(self, method):
        rng = np.random.default_rng(hash(method.value) % 2 ** 31)
        for trial in range(300):
            base = float(rng.uniform(50.0, 110.0))
            states = replay(WeightState.initial(base, method),
                            random_stream(rng, method, 25))
            for s in states:
                assert 0.65 * base - 1e-9 <= s.weight <= 1.35 * base + 1e-9

    @pytest.mark.parametrize("method", list(ModMethod))
    def test_replay_bit_exact(self, method):
        rng = np.random.default_rng(5)
        stream = random_stream(rng, method, 60)
        first = replay(WeightState.initial(77.0, method), stream)
        second = replay(WeightState.initial(77.0, method), stream)
        assert [s.weight for s in first] == [s.weight for s in second]

    @pytest.mark.parametrize("method", list(ModMethod))
    def test_interval_splitting_consistency(self, method):
        # constant input over [0, 2] s vs the same input in 40 sub-intervals
        def const_sample(t):
            if method is ModMethod.GESTURE:
                return gesture_sample(t, 0.8)
            if method is ModMethod.JOYSTICK:
                return joystick_sample(t, 0.6)
            return objects_sample(t, Contact.PLUS)

        coarse = replay(WeightState.initial(90.0, method),
                        [const_sample(0.0), const_sample(2.0)])
        fine = replay(WeightState.initial(90.0, method),
                      [const_sample(0.05 * i) for i in range(41)])
        assert abs(coarse[-1].weight - fine[-1].weight) <= 1e-9

    def test_concatenation_property(self):
        rng = np.random.default_rng(17)
        stream = random_stream(rng, ModMethod.GESTURE, 30)
        whole = replay(WeightState.initial(70.0, ModMethod.GESTURE), stream)
        head = replay(WeightState.initial(70.0, ModMethod.GESTURE), stream[:12])
        tail = replay(head[-1], stream[12:])
        assert tail[-1].weight == whole[-1].weight

    def test_empty_stream(self):
        initial = WeightState.initial(70.0, ModMethod.OBJECTS)
        assert replay(initial, []) == [initial]


class TestSerialization:
    @pytest.mark.parametrize("method", list(ModMethod))
    def test_json_round_trip_preserves_replay(self, method, tmp_path):
        rng = np.random.default_rng(23)
        stream = random_stream(rng, method, 40)
        path = tmp_path / "stream.jsonl"
        save_stream(stream, path)
        loaded = load_stream(path)
        a = replay(WeightState.initial(82.0, method), stream)
        b = replay(WeightState.initial(82.0, method), loaded)
        assert [s.weight for s in a] == [s.weight for s in b]

    def test_initial_state_validation(self):
        with pytest.raises(InteractionError):
            WeightState.initial(0.0, ModMethod.GESTURE)

    def test_bounds_fixed_at_construction(self):
        s = WeightState.initial(100.0, ModMethod.GESTURE)
        assert s.lower_bound == pytest.approx(65.0)
        assert s.upper_bound == pytest.approx(135.0)
