"""Harvesting tool physics: stem trapping, laser cutting, fall detection.

Trapping is a pure step function of the lateral stem offset at groove
height with threshold trapper_width/2. Cutting is a linear energy model:
the laser deposits power * duty joules per second into the stem while the
reciprocating lens sweeps the focal point across it, and the stem severs
once the accumulated energy reaches an area-scaled threshold. The default
energy constant is calibrated so a 3 mm stem under the default 50 W source
severs in 2.3 s; cut time then scales inversely with power. A detached
fruit falls from rest and is reported when it crosses the photo
interrupter beams below the groove.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

from .errors import StateError
from .geometry import Vec3
from .scene import StrawberryTruth

GRAVITY = 9.81

# guards exact-boundary lateral offsets against last-ulp rounding in the
# box midpoint arithmetic; three orders of magnitude below any physical scale
TRAP_EPS = 1e-12

# calibration anchor: 3 mm stem, 50 W, duty 0.5 severs in 2.3 s
DEFAULT_CUT_ENERGY_PER_AREA = 2.3 * 50.0 * 0.5 / (math.pi * 0.0015**2)


@dataclass(frozen=True)
class ToolGeometry:
    groove_width: float = 0.035
    trapper_width: float = 0.030
    focal_length: float = 0.25
    lens_stroke: float = 0.006
    interrupter_drop: float = 0.05

    def __post_init__(self):
        for name in ("groove_width", "trapper_width", "focal_length", "lens_stroke", "interrupter_drop"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.trapper_width > self.groove_width:
            raise ValueError("trapper cannot be wider than the groove")


@dataclass(frozen=True)
class CutModel:
    laser_power: float = 50.0
    cut_energy_per_area: float = DEFAULT_CUT_ENERGY_PER_AREA
    duty: float = 0.5

    def __post_init__(self):
        if self.laser_power <= 0:
            raise ValueError("laser_power must be positive")
        if not 0.0 < self.duty <= 1.0:
            raise ValueError(f"duty must be in (0, 1], got {self.duty}")
        if self.cut_energy_per_area <= 0:
            raise ValueError("cut_energy_per_area must be positive")


@dataclass(frozen=True)
class TrapResult:
    outcome: Literal["trapped", "missed"]
    lateral_error: float


class InterrupterPair(NamedTuple):
    ir1: bool
    ir2: bool


def duty_for_stem(stem_diameter: float, geom: ToolGeometry) -> float:
    """Fraction of each lens stroke spent crossing the stem cross-section."""
    return min(1.0, stem_diameter / geom.lens_stroke)


def stem_y_at_height(fruit: StrawberryTruth, z: float) -> float:
    """Lateral stem position at height z, interpolated along the stem line."""
    a = fruit.stem_attach
    b = fruit.stem_top
    if b.z == a.z:
        return a.y
    t = (z - a.z) / (b.z - a.z)
    t = min(1.0, max(0.0, t))
    return a.y + t * (b.y - a.y)


def trap_stem(tool_pos: Vec3, fruit: StrawberryTruth, geom: ToolGeometry) -> TrapResult:
    """Slide the trapper at the current tool pose and report the outcome.

    The stem is caught iff its lateral offset from the groove center is
    within trapper_width/2; a caught stem is forced to the groove center,
    so the fall path starts on the tool axis.
    """
    if fruit.detached:
        raise StateError(f"strawberry {fruit.id} is already detached")
    err = stem_y_at_height(fruit, tool_pos.z) - tool_pos.y
    trapped = abs(err) <= geom.trapper_width / 2.0 + TRAP_EPS
    return TrapResult("trapped" if trapped else "missed", err)


def required_cut_energy(cut: CutModel, stem: StrawberryTruth) -> float:
    """Energy needed to sever the stem, scaled by its cross-section area."""
    return cut.cut_energy_per_area * math.pi * (stem.stem_diameter / 2.0) ** 2


def laser_step(
    cut: CutModel, stem: StrawberryTruth, dt: float, accumulated: float
) -> tuple[float, bool]:
    """Advance the cut by one timestep; returns (new energy, cut complete)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    acc = accumulated + cut.laser_power * cut.duty * dt
    return acc, acc >= required_cut_energy(cut, stem)


def free_fall_detect(
    fruit: StrawberryTruth, geom: ToolGeometry, dt: float
) -> tuple[list[InterrupterPair], float]:
    """Drop the severed fruit from rest and sample the interrupters at dt.

    Returns the beam trace and the detection time, which is within one dt
    of the closed form sqrt(2 * interrupter_drop / g). The first beam
    reports the interruption.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    trace: list[InterrupterPair] = []
    k = 0
    while True:
        t = k * dt
        fall = 0.5 * GRAVITY * t * t
        if fall >= geom.interrupter_drop:
            trace.append(InterrupterPair(False, True))
            return trace, t
        trace.append(InterrupterPair(True, True))
        k += 1
        if t > 3600.0:
            raise StateError("free fall exceeded one hour of simulated time")


class ToolState:
    """Trapper/laser interlock; all transitions happen on the controller timeline."""

    def __init__(self):
        self.trapper_engaged = False
        self.laser_on = False

    def engage_trap(self) -> None:
        if self.trapper_engaged:
            raise StateError("trapper is already engaged")
        if self.laser_on:
            raise StateError("cannot move the trapper while the laser is on")
        self.trapper_engaged = True

    def set_laser(self, on: bool) -> None:
        if on and not self.trapper_engaged:
            raise StateError("laser requires an engaged trapper")
        self.laser_on = on

    def release_stem(self) -> None:
        if self.laser_on:
            raise StateError("cannot release while the laser is on")
        if not self.trapper_engaged:
            raise StateError("release without a preceding trap")
        self.trapper_engaged = False
