"""Live weight modification: three input methods, clamping, and exact replay.

Run with: python3 demos/interaction_replay.py
"""
from __future__ import annotations

import numpy as np

from bodymod.interaction import (
    GestureInput,
    InputSample,
    JoystickInput,
    ModMethod,
    ObjectsInput,
    Side,
    Contact,
    WeightState,
    replay,
    step,
)

BASE = 80.0

# Hold the joystick at full tilt for two seconds at 90 Hz.
ticks = np.arange(0, 181) / 90.0
samples = [
    InputSample(timestamp=float(t), method=ModMethod.JOYSTICK,
                joystick=JoystickInput(side=Side.RIGHT, tilt=1.0))
    for t in ticks
]
state = WeightState.initial(BASE, ModMethod.JOYSTICK)
for s in samples:
    state = step(state, s)
print(f"joystick, full tilt for 2 s: {BASE} kg -> {state.weight:.3f} kg "
      f"(15 kg/s expected)")

# Replay the same stream and confirm the trajectory is reproduced bit-exactly.
trajectory = replay(WeightState.initial(BASE, ModMethod.JOYSTICK), samples)
assert trajectory[-1].weight == state.weight
print(f"replay of {len(samples)} samples reproduces the final weight bit-exactly")

# Gesture: spread at 1 m/s adds weight at 18.5 kg/s.
g_state = WeightState.initial(BASE, ModMethod.GESTURE)
for i in range(91):
    g_state = step(g_state, InputSample(
        timestamp=i / 90.0, method=ModMethod.GESTURE,
        gesture=GestureInput(triggers_pressed=True, rate=1.0)))
print(f"gesture, 1 m/s spread for 1 s: {BASE} kg -> {g_state.weight:.3f} kg")

# Objects: the longer the contact is held, the faster the change, up to 15 kg/s.
o_state = WeightState.initial(BASE, ModMethod.OBJECTS)
for i in range(271):
    o_state = step(o_state, InputSample(
        timestamp=i / 90.0, method=ModMethod.OBJECTS,
        objects=ObjectsInput(touching=Contact.PLUS)))
print(f"objects, plus held for 3 s: {BASE} kg -> {o_state.weight:.3f} kg")

# The weight can never leave +/- 35% of the base weight.
wild = WeightState.initial(BASE, ModMethod.JOYSTICK)
for i in range(3000):
    wild = step(wild, InputSample(
        timestamp=i / 90.0, method=ModMethod.JOYSTICK,
        joystick=JoystickInput(side=Side.RIGHT, tilt=1.0)))
print(f"33 s of full tilt clamps at {wild.weight:.2f} kg "
      f"(bound {wild.upper_bound:.2f} kg)")
