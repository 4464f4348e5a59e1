"""Synthetic trials: cue schedules from the experimental grid and simulated responses."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .model import CueSample, ModelError, ModelParams, NoiseDraw, StateVector, measure, step_truth

__all__ = [
    "PhysicalIntensity",
    "VerbalCue",
    "BehaviorMode",
    "CueConfig",
    "TrialSpec",
    "CueTrace",
    "TrialRecord",
    "SimulationError",
    "generate_cue_schedule",
    "simulate_trial",
    "generate_trial_suite",
    "time_grid",
]

XI_VALUES = (-1, 0, 1)
TIMING_VALUES = tuple(range(-4, 5))


class SimulationError(ModelError):
    pass


class PhysicalIntensity(str, enum.Enum):
    NONE = "none"
    SOFT = "soft"
    HARD = "hard"


class VerbalCue(str, enum.Enum):
    NONE = "none"
    BACK = "back"
    FORWARD = "forward"

    @property
    def symbol(self) -> int:
        return {"none": 0, "back": -1, "forward": 1}[self.value]


class BehaviorMode(str, enum.Enum):
    MODEL = "model"
    # xi = -1 subjects ignore verbal cues and only resist physical ones
    FROZEN_UNCOOPERATIVE = "frozen-uncooperative"


@dataclass(frozen=True)
class CueConfig:
    """Cue waveform stand-ins; none of these magnitudes are measured values."""

    soft_force: float = 8.0
    hard_force: float = 20.0
    push_duration: float = 0.5
    first_onset: float = 0.5

    def force(self, intensity: PhysicalIntensity) -> float:
        return {
            PhysicalIntensity.NONE: 0.0,
            PhysicalIntensity.SOFT: self.soft_force,
            PhysicalIntensity.HARD: self.hard_force,
        }[intensity]


@dataclass(frozen=True)
class TrialSpec:
    requested_xi: int
    physical_intensity: PhysicalIntensity = PhysicalIntensity.NONE
    verbal_cue: VerbalCue = VerbalCue.NONE
    relative_timing: int = 0
    duration: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.requested_xi not in XI_VALUES:
            raise SimulationError(f"requested_xi must be one of -1, 0, +1, got {self.requested_xi!r}")
        object.__setattr__(self, "requested_xi", int(self.requested_xi))
        object.__setattr__(self, "physical_intensity", PhysicalIntensity(self.physical_intensity))
        object.__setattr__(self, "verbal_cue", VerbalCue(self.verbal_cue))
        if self.relative_timing not in TIMING_VALUES:
            raise SimulationError(f"relative_timing must be an integer in [-4, 4], got {self.relative_timing!r}")
        object.__setattr__(self, "relative_timing", int(self.relative_timing))
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise SimulationError(f"duration must be positive, got {self.duration!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise SimulationError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def judgeable(self) -> bool:
        return self.physical_intensity is not PhysicalIntensity.NONE or self.verbal_cue is not VerbalCue.NONE

    def cue_key(self) -> tuple:
        """Everything except the seed."""
        return (self.requested_xi, self.physical_intensity, self.verbal_cue, self.relative_timing, self.duration)

    def to_dict(self) -> dict:
        return {
            "requested_xi": self.requested_xi,
            "physical_intensity": self.physical_intensity.value,
            "verbal_cue": self.verbal_cue.value,
            "relative_timing": self.relative_timing,
            "duration": self.duration,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrialSpec:
        return cls(**d)


def time_grid(n: int, dt: float) -> np.ndarray:
    return np.arange(n) * dt


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CueTrace:
    """Physical and verbal cue streams on a uniform grid."""

    times: np.ndarray
    c_p: np.ndarray
    c_v: np.ndarray

    def __post_init__(self) -> None:
        for name in ("times", "c_p", "c_v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = len(self.times)
        if self.times.ndim != 1 or self.c_p.shape != (n,) or self.c_v.shape != (n,):
            raise SimulationError("cue trace columns must be one-dimensional and of equal length")
        if not (np.all(np.isfinite(self.c_p)) and np.all(np.isfinite(self.times))):
            raise SimulationError("cue trace contains non-finite values")
        bad = ~np.isin(self.c_v, XI_VALUES)
        if bad.any():
            raise SimulationError(f"c_v must be one of -1, 0, +1; got {self.c_v[bad][0]!r}")

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, i: int) -> CueSample:
        return CueSample(float(self.c_p[i]), float(self.c_v[i]))

    @property
    def samples(self) -> list[CueSample]:
        return [self[i] for i in range(len(self))]

    def __iter__(self) -> Iterator[CueSample]:
        return iter(self.samples)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """One trial: cues, measured positions and, for simulated data, the truth."""

    spec: TrialSpec | None
    cues: CueTrace
    measurements: np.ndarray
    truth: np.ndarray | None = None
    subject_id: str = ""
    requested_xi: int | None = field(default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "measurements", _frozen(self.measurements))
        n = len(self.cues)
        if self.measurements.shape != (n,):
            raise SimulationError(
                f"measurement series has {self.measurements.shape[0] if self.measurements.ndim else 0} "
                f"samples, cue trace has {n}"
            )
        if self.truth is not None:
            object.__setattr__(self, "truth", _frozen(self.truth))
            if self.truth.shape != (n, 4):
                raise SimulationError(f"truth must have shape ({n}, 4), got {self.truth.shape}")
        if self.requested_xi is None and self.spec is not None:
            object.__setattr__(self, "requested_xi", self.spec.requested_xi)
        if self.requested_xi is not None and self.requested_xi not in XI_VALUES:
            raise SimulationError(f"requested_xi must be one of -1, 0, +1, got {self.requested_xi!r}")

    @property
    def times(self) -> np.ndarray:
        return self.cues.times

    @property
    def dt(self) -> float:
        t = self.cues.times
        return float(t[1] - t[0]) if len(t) > 1 else float("nan")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialRecord):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            self.spec == other.spec
            and self.subject_id == other.subject_id
            and self.requested_xi == other.requested_xi
            and same(self.cues.times, other.cues.times)
            and same(self.cues.c_p, other.cues.c_p)
            and same(self.cues.c_v, other.cues.c_v)
            and same(self.measurements, other.measurements)
            and same(self.truth, other.truth)
        )


def _tick(t: float, dt: float) -> int:
    return int(round(t / dt))


def generate_cue_schedule(spec: TrialSpec, params: ModelParams, cfg: CueConfig = CueConfig()) -> CueTrace:
    """Rasterize the spec's cues onto the ``params.dt`` grid.

    The push is a rectangular pulse; the verbal command is a single-tick
    symbol.  When both are present the verbal tick sits ``relative_timing``
    seconds after the push onset, clamped into the trial window.
    """
    dt = params.dt
    n = _tick(spec.duration, dt)
    if n < 1:
        raise SimulationError(f"duration {spec.duration} s is shorter than one tick")
    c_p = np.zeros(n)
    c_v = np.zeros(n)
    onset = _tick(cfg.first_onset, dt)

    if spec.physical_intensity is not PhysicalIntensity.NONE:
        stop = onset + _tick(cfg.push_duration, dt)
        if onset < 0 or stop > n:
            raise SimulationError(
                f"push on [{cfg.first_onset}, {cfg.first_onset + cfg.push_duration}) s "
                f"does not fit in a {spec.duration} s trial"
            )
        c_p[onset:stop] = cfg.force(spec.physical_intensity)
        verbal_tick = min(max(onset + _tick(spec.relative_timing, dt), 0), n - 1)
    else:
        verbal_tick = onset

    if spec.verbal_cue is not VerbalCue.NONE:
        if not 0 <= verbal_tick < n:
            raise SimulationError(f"verbal cue at {cfg.first_onset} s lies outside a {spec.duration} s trial")
        c_v[verbal_tick] = spec.verbal_cue.symbol

    return CueTrace(time_grid(n, dt), c_p, c_v)


def simulate_trial(
    spec: TrialSpec,
    params: ModelParams,
    behavior: BehaviorMode = BehaviorMode.MODEL,
    *,
    cue_config: CueConfig = CueConfig(),
    hold_xi: bool = True,
    noise: bool = True,
    subject_id: str = "",
    initial_state: StateVector | None = None,
) -> TrialRecord:
    """Simulate one trial from ``spec.seed``.

    The truth starts at ``(0, 0, 0, requested_xi)`` one tick before the
    first sample; tick ``t`` applies cue ``t`` and is then measured, so
    ``truth[t]`` is the state behind ``measurements[t]``.  ``hold_xi``
    suppresses cooperativeness drift, ``noise=False`` gives the noiseless
    trajectory.  ``initial_state`` overrides the starting state (used for
    self-consistent runs where the truth is drawn from the filter prior).
    """
    behavior = BehaviorMode(behavior)
    cues = generate_cue_schedule(spec, params, cue_config)
    rng = np.random.default_rng(spec.seed)
    n = len(cues)
    sigma_v = math.sqrt(params.r)
    ignore_verbal = behavior is BehaviorMode.FROZEN_UNCOOPERATIVE and spec.requested_xi == -1

    state = initial_state if initial_state is not None else StateVector(0.0, 0.0, 0.0, float(spec.requested_xi))
    truth = np.empty((n, 4))
    y = np.empty(n)
    for t in range(n):
        cue = CueSample(cues.c_p[t], 0.0 if ignore_verbal else cues.c_v[t])
        w = NoiseDraw.sample(rng, params, hold_xi=hold_xi) if noise else NoiseDraw.zero()
        state = step_truth(state, cue, params, w)
        truth[t] = state.as_array()
        y[t] = measure(state, float(rng.standard_normal() * sigma_v) if noise else 0.0)
    return TrialRecord(spec=spec, cues=cues, measurements=y, truth=truth, subject_id=subject_id)


def generate_trial_suite(
    n_subjects: int = 4,
    trials_per_subject: int = 25,
    master_seed: int = 0,
    duration: float = 5.0,
) -> list[TrialSpec]:
    """Draw one list of trial parameters and repeat it for every subject.

    Subject ``k`` owns ``specs[k*trials_per_subject:(k+1)*trials_per_subject]``;
    cue parameters repeat across subjects, seeds do not.
    """
    if n_subjects < 1 or trials_per_subject < 1:
        raise SimulationError("n_subjects and trials_per_subject must be >= 1")
    ss = np.random.SeedSequence(master_seed)
    grid_seq, seed_seq = ss.spawn(2)
    rng = np.random.default_rng(grid_seq)
    xi = rng.integers(0, len(XI_VALUES), size=trials_per_subject)
    phys = rng.integers(0, len(PhysicalIntensity), size=trials_per_subject)
    verb = rng.integers(0, len(VerbalCue), size=trials_per_subject)
    timing = rng.integers(0, len(TIMING_VALUES), size=trials_per_subject)
    intensities, verbals = list(PhysicalIntensity), list(VerbalCue)
    seeds = np.random.default_rng(seed_seq).integers(0, 2**63, size=(n_subjects, trials_per_subject), dtype=np.uint64)

    return [
        TrialSpec(
            requested_xi=XI_VALUES[xi[i]],
            physical_intensity=intensities[phys[i]],
            verbal_cue=verbals[verb[i]],
            relative_timing=TIMING_VALUES[timing[i]],
            duration=duration,
            seed=int(seeds[k, i]),
        )
        for k in range(n_subjects)
        for i in range(trials_per_subject)
    ]


def subject_label(index: int) -> str:
    return f"S{index + 1}"


def simulate_suite(
    specs: Sequence[TrialSpec],
    params: ModelParams,
    behavior: BehaviorMode = BehaviorMode.MODEL,
    trials_per_subject: int | None = None,
    **kwargs,
) -> list[TrialRecord]:
    records = []
    for i, spec in enumerate(specs):
        sid = subject_label(i // trials_per_subject) if trials_per_subject else ""
        records.append(simulate_trial(spec, params, behavior, subject_id=sid, **kwargs))
    return records
