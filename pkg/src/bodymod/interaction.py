"""The three live weight-modification methods as deterministic velocity curves
plus a piecewise-constant-velocity integrator over timestamped input samples.

Weight is clamped to +-35% of the base weight at every step. All transitions are
pure: ``step`` returns a new state, so any input stream replays bit-exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

WEIGHT_RANGE_FRACTION = 0.35
JOYSTICK_DEADZONE = 0.05
OBJECT_RAMP_SECONDS = 1.5
OBJECT_MIN_RATE = 3.0   # kg/s at first contact
OBJECT_MAX_RATE = 15.0  # kg/s after the full ramp


class InteractionError(Exception):
    """Invalid input sample (bad timestamp order, out-of-range tilt)."""


class ModMethod(str, Enum):
    GESTURE = "gesture"
    JOYSTICK = "joystick"
    OBJECTS = "objects"


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Contact(str, Enum):
    PLUS = "plus"
    MINUS = "minus"


def gesture_velocity(rate: float) -> float:
    """kg/s from the rate of hand-distance change in m/s.

    Symmetric in the sign of the rate: moving hands apart gains weight at the
    same speed that moving them together at the same rate loses it.
    """
    magnitude = 3.5 * rate * rate + 15.0 * abs(rate)
    return magnitude if rate >= 0 else -magnitude


def joystick_velocity(tilt: float) -> float:
    """kg/s from normalized joystick tilt in [-1, 1]; rightward tilt gains weight.

    Tilts inside the deadzone yield zero so a resting stick changes nothing.
    """
    if abs(tilt) > 1.0:
        raise InteractionError(f"tilt {tilt} outside [-1, 1]")
    if abs(tilt) < JOYSTICK_DEADZONE:
        return 0.0
    magnitude = 10.0 * tilt * tilt + 5.0
    return magnitude if tilt > 0 else -magnitude


def object_velocity(contact_duration: float) -> float:
    """kg/s magnitude after touching a modifier object for the given duration.

    Ramps quadratically from the minimum to the maximum rate over the ramp
    window, then saturates.
    """
    if contact_duration < 0:
        raise InteractionError("contact duration must be >= 0")
    x = min(contact_duration, OBJECT_RAMP_SECONDS) / OBJECT_RAMP_SECONDS
    return OBJECT_MIN_RATE + (OBJECT_MAX_RATE - OBJECT_MIN_RATE) * x * x


@dataclass(frozen=True)
class GestureInput:
    triggers_pressed: bool
    rate: float = 0.0        # hand-distance change, m/s


@dataclass(frozen=True)
class JoystickInput:
    side: Side
    tilt: float              # [-1, 1]


@dataclass(frozen=True)
class ObjectsInput:
    touching: Contact | None


@dataclass(frozen=True)
class InputSample:
    """One timestamped input frame; the payload must match the sample's method."""

    timestamp: float
    method: ModMethod
    gesture: GestureInput | None = None
    joystick: JoystickInput | None = None
    objects: ObjectsInput | None = None

    def to_json(self) -> str:
        d: dict = {"t": self.timestamp, "method": self.method.value}
        if self.gesture is not None:
            d["triggers"] = self.gesture.triggers_pressed
            d["rate"] = self.gesture.rate
        if self.joystick is not None:
            d["side"] = self.joystick.side.value
            d["tilt"] = self.joystick.tilt
        if self.objects is not None:
            d["touching"] = self.objects.touching.value if self.objects.touching else None
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "InputSample":
        d = json.loads(text)
        method = ModMethod(d["method"])
        gesture = joystick = objects = None
        if method is ModMethod.GESTURE:
            gesture = GestureInput(bool(d.get("triggers", False)), float(d.get("rate", 0.0)))
        elif method is ModMethod.JOYSTICK:
            joystick = JoystickInput(Side(d["side"]), float(d["tilt"]))
        else:
            touching = d.get("touching")
            objects = ObjectsInput(Contact(touching) if touching else None)
        return cls(timestamp=float(d["t"]), method=method, gesture=gesture,
                   joystick=joystick, objects=objects)


@dataclass(frozen=True)
class WeightState:
    """Live modification state; bounds are fixed at construction from the base weight."""

    weight: float
    base_weight: float
    method: ModMethod
    joystick_lock: Side | None = None
    contact: Contact | None = None
    contact_duration: float = 0.0
    timestamp: float | None = None   # None until the first sample arrives

    @classmethod
    def initial(cls, base_weight: float, method: ModMethod) -> "WeightState":
        if base_weight <= 0:
            raise InteractionError("base weight must be positive")
        return cls(weight=base_weight, base_weight=base_weight, method=method)

    @property
    def lower_bound(self) -> float:
        return (1.0 - WEIGHT_RANGE_FRACTION) * self.base_weight

    @property
    def upper_bound(self) -> float:
        return (1.0 + WEIGHT_RANGE_FRACTION) * self.base_weight


def object_ramp_gain(start_duration: float, dt: float) -> float:
    """Exact kg gained while touching from contact time d0 to d0 + dt.

    Integrates the quadratic ramp analytically, so splitting a contact interval
    into sub-intervals accumulates exactly the same weight.
    """

    def antiderivative(u: float) -> float:
        if u <= OBJECT_RAMP_SECONDS:
            rate_span = OBJECT_MAX_RATE - OBJECT_MIN_RATE
            return OBJECT_MIN_RATE * u + rate_span * u ** 3 / (3.0 * OBJECT_RAMP_SECONDS ** 2)
        return antiderivative(OBJECT_RAMP_SECONDS) + OBJECT_MAX_RATE * (u - OBJECT_RAMP_SECONDS)

    return antiderivative(start_duration + dt) - antiderivative(start_duration)


def _apply_input(state: WeightState, sample: InputSample, dt: float
                 ) -> tuple[float, WeightState]:
    """Weight change over the interval plus the post-interval method state."""
    if sample.method is ModMethod.GESTURE:
        g = sample.gesture
        if g is None or not g.triggers_pressed:
            return 0.0, state
        return gesture_velocity(g.rate) * dt, state

    if sample.method is ModMethod.JOYSTICK:
        j = sample.joystick
        if j is None or j.tilt == 0.0:
            return 0.0, state
        lock = state.joystick_lock
        if lock is None:
            state = replace(state, joystick_lock=j.side)
        elif j.side is not lock:
            return 0.0, state     # the other joystick stays deactivated
        return joystick_velocity(j.tilt) * dt, state

    o = sample.objects
    if o is None or o.touching is None:
        return 0.0, replace(state, contact=None, contact_duration=0.0)
    if o.touching is not state.contact:
        # fresh contact (or switch): the ramp restarts
        state = replace(state, contact=o.touching, contact_duration=0.0)
    gain = object_ramp_gain(state.contact_duration, dt)
    state = replace(state, contact_duration=state.contact_duration + dt)
    return (gain if o.touching is Contact.PLUS else -gain), state


def step(state: WeightState, sample: InputSample) -> WeightState:
    """Advance the state by one input sample.

    The sample's input is treated as constant over the interval since the last
    update; the very first sample only establishes the clock.
    """
    if sample.method is not state.method:
        raise InteractionError(f"sample method {sample.method} does not match "
                               f"state method {state.method}")
    if state.timestamp is None:
        _, state = _apply_input(state, sample, 0.0)
        return replace(state, timestamp=sample.timestamp)
    dt = sample.timestamp - state.timestamp
    if dt <= 0:
        raise InteractionError(f"non-monotone timestamp {sample.timestamp} "
                               f"(last {state.timestamp})")
    change, state = _apply_input(state, sample, dt)
    weight = min(max(state.weight + change, state.lower_bound), state.upper_bound)
    return replace(state, weight=weight, timestamp=sample.timestamp)


def replay(initial: WeightState, samples) -> list[WeightState]:
    """Fold of step over an input stream; index 0 is the initial state."""
    states = [initial]
    for sample in samples:
        states.append(step(states[-1], sample))
    return states


def save_stream(samples, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for s in samples:
            fh.write(s.to_json() + "\n")


def load_stream(path) -> list[InputSample]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if line.strip():
                out.append(InputSample.from_json(line))
    return out
