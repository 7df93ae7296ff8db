"""
Source Waveforms

Time functions used for Dirichlet conditions and independent sources:
DC, SIN(offset amplitude freq) and EXP(v0 v1 tau).
"""

import math
import re
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from .config import NetlistConfig


def format_number(value: float) -> str:
    """Scientific notation with NetlistConfig.SIGNIFICANT_DIGITS significant digits."""
    value = float(value)
    if value == 0.0:
        value = 0.0  # drop the sign of -0.0
    return f"{value:.{NetlistConfig.SIGNIFICANT_DIGITS - 1}e}"


@dataclass(frozen=True)
class Dc:
    value: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.value) if np.ndim(t) else float(self.value)

    def to_card(self) -> str:
        return f"DC {format_number(self.value)}"

    def to_dict(self) -> dict:
        return {"type": "dc", "value": self.value}


@dataclass(frozen=True)
class Sine:
    """offset + amplitude * sin(2*pi*freq_hz*t)"""
    offset: float
    amplitude: float
    freq_hz: float

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(2.0 * math.pi * self.freq_hz * np.asarray(t, dtype=float))

    def to_card(self) -> str:
        return (
            f"SIN({format_number(self.offset)} {format_number(self.amplitude)} "
            f"{format_number(self.freq_hz)})"
        )

    def to_dict(self) -> dict:
        return {"type": "sin", "offset": self.offset, "amplitude": self.amplitude, "freq_hz": self.freq_hz}


@dataclass(frozen=True)
class Exponential:
    """v0 + (v1 - v0) * (1 - exp(-t/tau))"""
    v0: float
    v1: float
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"EXP time constant must be positive, got {self.tau}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.v0 + (self.v1 - self.v0) * (1.0 - np.exp(-t / self.tau))

    def to_card(self) -> str:
        return f"EXP({format_number(self.v0)} {format_number(self.v1)} {format_number(self.tau)})"

    def to_dict(self) -> dict:
        return {"type": "exp", "v0": self.v0, "v1": self.v1, "tau": self.tau}


Waveform = Union[Dc, Sine, Exponential]

_FUNCTION_CARD = re.compile(r"^(SIN|EXP)\s*\(([^)]*)\)$", re.IGNORECASE)


def parse_waveform(text: str) -> Waveform:
    """
    Parse the source-value part of a V/I card.

    Raises:
        ValueError: text is not DC <v>, SIN(...) or EXP(...)
    """
    text = text.strip()
    tokens = text.split()
    if len(tokens) == 2 and tokens[0].upper() == "DC":
        return Dc(float(tokens[1]))

    match = _FUNCTION_CARD.match(text)
    if not match:
        raise ValueError(f"unrecognized waveform {text!r}")
    kind = match.group(1).upper()
    args: List[float] = [float(a) for a in match.group(2).replace(",", " ").split()]
    if len(args) != 3:
        raise ValueError(f"{kind} expects 3 arguments, got {len(args)}")
    if kind == "SIN":
        return Sine(*args)
    return Exponential(*args)


def waveform_from_dict(data: Union[dict, float, int]) -> Waveform:
    """Scenario-file form: a bare number is DC, otherwise {"type": ..., ...}."""
    if isinstance(data, (int, float)):
        return Dc(float(data))
    kind = str(data.get("type", "")).lower()
    try:
        if kind == "dc":
            return Dc(float(data["value"]))
        if kind == "sin":
            return Sine(float(data.get("offset", 0.0)), float(data["amplitude"]), float(data["freq_hz"]))
        if kind == "exp":
            return Exponential(float(data.get("v0", 0.0)), float(data["v1"]), float(data["tau"]))
    except KeyError as e:
        raise ValueError(f"waveform {data!r} is missing field {e}") from e
    raise ValueError(f"unknown waveform type {kind!r}")
