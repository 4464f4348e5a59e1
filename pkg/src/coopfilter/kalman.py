"""Kalman recursion over the cue-driven time-variant model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import CueSample, ModelError, ModelParams, TransitionMatrices, assemble_transition
from .simulator import TrialRecord

__all__ = [
    "FilterError",
    "StateEstimate",
    "FilterTrace",
    "initial_estimate",
    "predict",
    "update",
    "filter_trial",
    "TIME_JITTER",
]

# init covariance diag for (x, x_dot, eta, xi); xi variance spans the {-1, +1} range
INIT_VARIANCES = (1e-4, 1e-2, 1e-2, 1.0)
TIME_JITTER = 1e-6


class FilterError(ModelError):
    """Numerical or input failure inside the recursion."""


def _symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


@dataclass(frozen=True, eq=False)
class StateEstimate:
    """Mean ``[x, x_dot, eta, xi]`` and its 4x4 covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (4,) or cov.shape != (4, 4):
            raise FilterError(f"estimate needs a 4-vector and a 4x4 covariance, got {mean.shape} and {cov.shape}")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def _trusted(cls, mean: np.ndarray, cov: np.ndarray) -> StateEstimate:
        # skips validation and copying; callers pass freshly computed arrays
        est = object.__new__(cls)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(est, "mean", mean)
        object.__setattr__(est, "cov", cov)
        return est

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    def check(self, rel_sym: float = 1e-12, psd_tol: float = 1e-9) -> None:
        """Raise if the covariance is asymmetric or indefinite beyond tolerance."""
        p = self.cov
        scale = max(np.max(np.abs(p)), np.finfo(float).tiny)
        if np.max(np.abs(p - p.T)) > rel_sym * scale:
            raise FilterError("covariance is not symmetric")
        if np.linalg.eigvalsh(p).min() < -psd_tol * np.trace(p):
            raise FilterError("covariance is not positive semidefinite")


@dataclass(frozen=True, eq=False)
class FilterTrace:
    """Per-tick posterior estimates and innovation statistics."""

    times: np.ndarray
    means: np.ndarray  # (n, 4)
    covs: np.ndarray  # (n, 4, 4)
    innovations: np.ndarray
    innovation_vars: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.times)
        if not (
            self.means.shape == (n, 4)
            and self.covs.shape == (n, 4, 4)
            and self.innovations.shape == (n,)
            and self.innovation_vars.shape == (n,)
        ):
            raise FilterError("filter trace series lengths disagree")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def estimates(self) -> list[StateEstimate]:
        return [StateEstimate(m, p) for m, p in zip(self.means, self.covs)]

    @property
    def xi(self) -> np.ndarray:
        return self.means[:, 3]

    @property
    def eta(self) -> np.ndarray:
        return self.means[:, 2]

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diagonal(self.covs, axis1=1, axis2=2), 0.0, None))


def initial_estimate(first_measurement: float, variances: Sequence[float] = INIT_VARIANCES) -> StateEstimate:
    """Prior pinned to the first position sample, with xi centred at 0."""
    y0 = float(first_measurement)
    return StateEstimate(np.array([y0, 0.0, y0, 0.0]), np.diag(np.asarray(variances, dtype=float)))


def predict(est: StateEstimate, mats: TransitionMatrices, c_p: float, tick: int | None = None) -> StateEstimate:
    a = mats.a
    with np.errstate(invalid="ignore", over="ignore"):
        mean = a @ est.mean + mats.b * c_p
        cov = _symmetrize(a @ est.cov @ a.T + mats.q)
    # nan/inf anywhere propagates into the sum
    if not np.isfinite(mean.sum() + cov.sum()):
        where = "" if tick is None else f" at tick {tick}"
        raise FilterError(f"non-finite prediction{where}")
    return StateEstimate._trusted(mean, cov)


def update(
    prior: StateEstimate, y: float, h: np.ndarray, r: float, joseph: bool = True
) -> tuple[StateEstimate, float, float]:
    """Scalar measurement update.

    Returns the posterior, the innovation ``y - h @ mean`` and its variance.
    ``joseph=False`` uses the short ``(I - K h) P`` covariance form.
    """
    h = np.asarray(h, dtype=float).reshape(-1)
    p = prior.cov
    ph = p @ h
    s = float(h @ ph + r)
    if not s > 0:
        raise FilterError(f"innovation variance {s!r} is not positive")
    z = float(y - h @ prior.mean)
    k = ph / s
    mean = prior.mean + k * z
    ikh = np.eye(len(h)) - k[:, None] * h[None, :]
    if joseph:
        cov = ikh @ p @ ikh.T + r * (k[:, None] * k[None, :])
    else:
        cov = ikh @ p
    return StateEstimate._trusted(mean, _symmetrize(cov)), z, s


def _check_uniform(times: np.ndarray, dt: float) -> None:
    if len(times) < 2:
        return
    expected = times[0] + np.arange(len(times)) * dt
    jitter = np.max(np.abs(times - expected))
    if jitter > TIME_JITTER:
        raise FilterError(f"time base is not uniform at dt={dt} s (max deviation {jitter:.3g} s)")


def filter_trial(
    trial: TrialRecord,
    params: ModelParams,
    init: StateEstimate | None = None,
    joseph: bool = True,
) -> FilterTrace:
    """Filter a whole trial.

    At each tick the transition is assembled from that tick's cue, the
    estimate is predicted, and the tick's measurement is folded in.  With
    ``init=None`` the prior is :func:`initial_estimate` of the first sample.
    """
    if not params.r > 0:
        raise FilterError("measurement variance r must be > 0 for filtering")
    y = np.asarray(trial.measurements, dtype=float)
    cues = trial.cues
    n = len(y)
    if len(cues) != n:
        raise FilterError(f"{len(cues)} cue samples but {n} measurements")
    if n == 0:
        raise FilterError("trial has no measurements")
    if not np.all(np.isfinite(y)):
        raise FilterError("measurements contain non-finite values")
    _check_uniform(np.asarray(cues.times), params.dt)

    est = initial_estimate(y[0]) if init is None else init
    means = np.empty((n, 4))
    covs = np.empty((n, 4, 4))
    innov = np.empty(n)
    innov_var = np.empty(n)
    for t in range(n):
        cue = CueSample(float(cues.c_p[t]), float(cues.c_v[t]))
        mats = assemble_transition(params, cue)
        est = predict(est, mats, cue.c_p, tick=t)
        est, innov[t], innov_var[t] = update(est, y[t], mats.h, params.r, joseph=joseph)
        means[t] = est.mean
        covs[t] = est.cov
    return FilterTrace(np.array(cues.times, dtype=float), means, covs, innov, innov_var)
