"""key=value configuration file support for the CLI.

Recognized keys (all optional):
  solver_tolerance        relative residual of the reconstruction solve
  joystick_deadzone       tilt magnitude below which the joystick is at rest
  morph_spacing_kg        grid spacing of precomputed morph targets
  controller_radius_m     subtracted during ground calibration
  wilcoxon_exact_limit    largest sample size using the exact signed-rank path

Command-line flags override file values.
"""
from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class Config:
    solver_tolerance: float = 1e-8
    joystick_deadzone: float = 0.05
    morph_spacing_kg: float = 1.0
    controller_radius_m: float = 0.03
    wilcoxon_exact_limit: int = 12


def load_config(path) -> Config:
    values: dict = {}
    types = {f.name: f.type for f in fields(Config)}
    defaults = Config()
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = text.partition("=")
            key, raw = key.strip(), raw.strip()
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            kind = type(getattr(defaults, key))
            values[key] = kind(raw)
    return Config(**values)
