"""Delay-and-threshold cooperativeness verdicts from a filtered xi trajectory."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kalman import FilterTrace
from .model import ModelError
from .simulator import CueTrace

__all__ = ["JudgmentError", "NoCueError", "JudgmentConfig", "Verdict", "detect_cue_onset", "judge", "classify"]

# absorbs float error in onset + delay landing between grid ticks
_GRID_EPS = 1e-9


class JudgmentError(ModelError):
    pass


class NoCueError(JudgmentError):
    """Trial carries no cue, so xi is unobservable and cannot be judged."""


@dataclass(frozen=True)
class JudgmentConfig:
    delay: float = 0.75
    threshold: float = 0.3

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delay) and self.delay >= 0):
            raise JudgmentError(f"delay must be >= 0, got {self.delay!r}")
        if not 0 < self.threshold < 1:
            raise JudgmentError(f"threshold must lie in (0, 1), got {self.threshold!r}")


@dataclass(frozen=True)
class Verdict:
    value: int
    sampled_xi: float
    sample_time: float

    def __post_init__(self) -> None:
        if self.value not in (-1, 0, 1):
            raise JudgmentError(f"verdict must be -1, 0 or +1, got {self.value!r}")

    @property
    def label(self) -> str:
        return {1: "+1", 0: "0", -1: "-1"}[self.value]


def detect_cue_onset(cues: CueTrace) -> float:
    """Time of the first tick carrying either a physical or a verbal cue."""
    if len(cues) == 0:
        raise JudgmentError("cue trace is empty")
    active = np.flatnonzero((cues.c_p != 0) | (cues.c_v != 0))
    if active.size == 0:
        raise NoCueError("no cue in trial; cooperativeness is unobservable")
    return float(cues.times[active[0]])


def classify(xi_hat: float, threshold: float) -> int:
    if xi_hat >= threshold:
        return 1
    if xi_hat <= -threshold:
        return -1
    return 0


def judge(trace: FilterTrace, cues: CueTrace, cfg: JudgmentConfig = JudgmentConfig()) -> Verdict:
    """Sample xi-hat at the first tick at or after ``onset + cfg.delay`` and threshold it."""
    target = detect_cue_onset(cues) + cfg.delay
    times = np.asarray(trace.times)
    i = int(np.searchsorted(times, target - _GRID_EPS, side="left"))
    if i >= len(times):
        end = times[-1] if len(times) else float("nan")
        raise JudgmentError(
            f"trace ends at {end:.6g} s but judgment needs a sample at {target:.6g} s "
            f"(cue onset + {cfg.delay:g} s)"
        )
    xi_hat = float(trace.xi[i])
    return Verdict(classify(xi_hat, cfg.threshold), xi_hat, float(times[i]))
