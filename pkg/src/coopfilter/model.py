"""Three-stage cue-response model and its discrete time-variant linear form.

State vector ``[x, x_dot, eta, xi]``:

    x       torso displacement           m
    x_dot   torso velocity               m/s
    eta     intended torso position      m
    xi      cooperativeness              dimensionless, nominally {-1, 0, +1}

Inputs per tick are the physical cue ``c_p`` (N, forward positive) and the
verbal cue symbol ``c_v`` in {-1, 0, +1} (+1 = "move forward").

Forward-Euler discretization at ``dt`` gives

    x[t+1]     = x + dt*x_dot
    x_dot[t+1] = x_dot + dt*(-lambda1*x_dot + k1*(eta - x) + k2*c_p) + w_x
    eta[t+1]   = eta + dt*xi*(k3*c_p + k4*c_v) + w_eta
    xi[t+1]    = xi + w_xi

which is ``s[t+1] = A(c_p, c_v) s + B c_p + w`` with ``y = H s + v``.

Units of the entries of ``A`` (row unit / column unit):

    row \\ col   x        x_dot    eta      xi
    x           1        s        -        -
    x_dot       1/s      1        1/s      -
    eta         -        -        1        m
    xi          -        -        -        1

``dt*k1`` carries 1/s, ``dt*lambda1`` is dimensionless and
``dt*(k3*c_p + k4*c_v)`` carries metres per unit of xi.  ``B`` maps newtons
to m/s through ``dt*k2``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import asdict, dataclass, fields
from importlib import resources
from typing import Iterator

import numpy as np

__all__ = [
    "ModelError",
    "ModelParams",
    "StateVector",
    "CueSample",
    "NoiseDraw",
    "TransitionMatrices",
    "H_ROW",
    "default_param_values",
    "assemble_transition",
    "step_truth",
    "measure",
]

H_ROW = np.array([[1.0, 0.0, 0.0, 0.0]])
H_ROW.setflags(write=False)


class ModelError(ValueError):
    """Invalid model parameters, cues or states."""


def default_param_values() -> dict[str, float]:
    """Defaults shipped in ``data/default_params.json``."""
    text = resources.files("coopfilter").joinpath("data/default_params.json").read_text("utf-8")
    return {k: float(v) for k, v in json.loads(text).items()}


@dataclass(frozen=True)
class ModelParams:
    """Model constants, noise intensities and sample period.

    Noise fields are continuous-time intensities; the per-tick variances are
    ``dt * q_x``, ``dt * q_eta`` and ``dt * q_xi``.  ``r`` is the per-sample
    measurement variance in m^2.
    """

    lambda1: float
    k1: float
    k2: float
    k3: float
    k4: float
    dt: float
    q_x: float
    q_eta: float
    q_xi: float
    r: float

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ModelError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ModelError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        for name in ("lambda1", "k1", "k2", "q_x", "q_eta", "q_xi", "r"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.dt <= 0:
            raise ModelError(f"dt must be > 0, got {self.dt!r}")
        if self.dt * self.lambda1 >= 2:
            raise ModelError(
                f"unstable discretization: dt*lambda1 = {self.dt * self.lambda1:g} must be < 2"
            )
        if self.dt**2 * self.k1 >= 4:
            raise ModelError(
                f"unstable discretization: dt^2*k1 = {self.dt**2 * self.k1:g} must be < 4"
            )

    @classmethod
    def default(cls) -> ModelParams:
        return cls(**default_param_values())

    def replace(self, **changes: float) -> ModelParams:
        values = asdict(self)
        values.update(changes)
        return type(self)(**values)

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @property
    def process_variances(self) -> tuple[float, float, float]:
        """Per-tick variances of ``(w_x, w_eta, w_xi)``."""
        return self.dt * self.q_x, self.dt * self.q_eta, self.dt * self.q_xi


@dataclass(frozen=True)
class StateVector:
    x: float
    x_dot: float
    eta: float
    xi: float

    def __post_init__(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ModelError(f"state component {f.name} is not finite: {getattr(self, f.name)!r}")

    def __iter__(self) -> Iterator[float]:
        return iter((self.x, self.x_dot, self.eta, self.xi))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.x_dot, self.eta, self.xi], dtype=float)

    @classmethod
    def from_array(cls, values) -> StateVector:
        x, x_dot, eta, xi = (float(v) for v in values)
        return cls(x, x_dot, eta, xi)


@dataclass(frozen=True)
class CueSample:
    """Physical cue force ``c_p`` (N) and verbal symbol ``c_v``."""

    c_p: float = 0.0
    c_v: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.c_p):
            raise ModelError(f"c_p must be finite, got {self.c_p!r}")
        if self.c_v not in (-1, 0, 1):
            raise ModelError(f"c_v must be one of -1, 0, +1, got {self.c_v!r}")


@dataclass(frozen=True)
class NoiseDraw:
    """One tick of process noise at the velocity, intention and cooperativeness rows."""

    w_x: float = 0.0
    w_eta: float = 0.0
    w_xi: float = 0.0

    @classmethod
    def zero(cls) -> NoiseDraw:
        return cls()

    @classmethod
    def sample(cls, rng: np.random.Generator, params: ModelParams, hold_xi: bool = False) -> NoiseDraw:
        var_x, var_eta, var_xi = params.process_variances
        w = rng.standard_normal(3)
        return cls(
            float(w[0] * math.sqrt(var_x)),
            float(w[1] * math.sqrt(var_eta)),
            0.0 if hold_xi else float(w[2] * math.sqrt(var_xi)),
        )


@dataclass(frozen=True)
class TransitionMatrices:
    a: np.ndarray
    b: np.ndarray
    h: np.ndarray
    q: np.ndarray


@functools.lru_cache(maxsize=256)
def assemble_transition(params: ModelParams, cue: CueSample) -> TransitionMatrices:
    """Build ``A(c_p, c_v)``, ``B``, ``H`` and ``Q`` for one tick.

    Cached: cue streams take few distinct values and the returned arrays are
    read-only.
    """
    dt = params.dt
    a = np.array(
        [
            [1.0, dt, 0.0, 0.0],
            [-dt * params.k1, 1.0 - dt * params.lambda1, dt * params.k1, 0.0],
            [0.0, 0.0, 1.0, dt * (params.k3 * cue.c_p + params.k4 * cue.c_v)],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    b = np.array([0.0, dt * params.k2, 0.0, 0.0])
    q = np.diag([0.0, *params.process_variances])
    for arr in (a, b, q):
        arr.setflags(write=False)
    return TransitionMatrices(a=a, b=b, h=H_ROW, q=q)


def step_truth(state: StateVector, cue: CueSample, params: ModelParams, noise: NoiseDraw) -> StateVector:
    """Advance the ground-truth state by one forward-Euler tick."""
    x, x_dot, eta, xi = state
    dt = params.dt
    return StateVector(
        x + dt * x_dot,
        x_dot + dt * (-params.lambda1 * x_dot + params.k1 * (eta - x) + params.k2 * cue.c_p) + noise.w_x,
        eta + dt * xi * (params.k3 * cue.c_p + params.k4 * cue.c_v) + noise.w_eta,
        xi + noise.w_xi,
    )


def measure(state: StateVector, noise_v: float) -> float:
    return state.x + noise_v
