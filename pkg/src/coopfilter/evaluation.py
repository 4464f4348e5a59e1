"""Confusion tables, conditional rates and suite-level evaluation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .judgment import JudgmentConfig, JudgmentError, Verdict, classify, detect_cue_onset, judge
from .kalman import FilterTrace, StateEstimate, filter_trial
from .model import ModelError, ModelParams, StateVector
from .simulator import TrialRecord, TrialSpec, simulate_trial

XI_ORDER = (-1, 0, 1)
XI_NAMES = {-1: "uncooperative", 0: "unresponsive", 1: "cooperative"}


class EvaluationError(ModelError):
    pass


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts indexed ``[requested, estimated]`` in the order -1, 0, +1."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (3, 3) or (c < 0).any():
            raise EvaluationError("confusion counts must be a 3x3 array of non-negative integers")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def cell(self, requested: int, estimated: int) -> int:
        return int(self.counts[requested + 1, estimated + 1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else math.nan

    def per_class_accuracy(self) -> dict[int, float]:
        """Correct-judgment rate per requested class (nan for empty rows)."""
        rows = self.counts.sum(axis=1)
        return {xi: (self.cell(xi, xi) / rows[i] if rows[i] else math.nan) for i, xi in enumerate(XI_ORDER)}


def confusion_matrix(pairs: Iterable[tuple[int, int]]) -> ConfusionMatrix:
    counts = np.zeros((3, 3), dtype=np.int64)
    for requested, estimated in pairs:
        for v in (requested, estimated):
            if isinstance(v, bool) or v not in XI_ORDER:
                raise EvaluationError(f"cooperativeness values must be -1, 0 or +1, got {v!r}")
        counts[int(requested) + 1, int(estimated) + 1] += 1
    return ConfusionMatrix(counts)


def round_half_away(value: Fraction | float, places: int = 1) -> float:
    """Round half away from zero (Python's ``round`` rounds half to even)."""
    d = Decimal(value.numerator) / Decimal(value.denominator) if isinstance(value, Fraction) else Decimal(str(value))
    q = Decimal(1).scaleb(-places)
    return float(d.copy_abs().quantize(q, rounding=ROUND_HALF_UP).copy_sign(d))


def _percentages(counts: np.ndarray, places: int) -> np.ndarray:
    out = np.full(counts.shape, np.nan)
    for i, row in enumerate(counts):
        total = int(row.sum())
        if total:
            out[i] = [round_half_away(Fraction(100 * int(c), total), places) for c in row]
    return out


def conditional_by_requested(m: ConfusionMatrix, places: int = 1) -> np.ndarray:
    """Row-normalized percentages; rows with no trials are nan (undefined)."""
    return _percentages(m.counts, places)


def conditional_by_estimated(m: ConfusionMatrix, places: int = 1) -> np.ndarray:
    """Column-normalized percentages, laid out like the counts; empty columns are nan."""
    return _percentages(m.counts.T, places).T


@dataclass(frozen=True)
class Exclusion:
    index: int
    subject_id: str
    reason: str


@dataclass(frozen=True)
class TrialResult:
    index: int
    subject_id: str
    requested_xi: int | None
    verdict: Verdict


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    matrix: ConfusionMatrix
    by_requested: np.ndarray
    by_estimated: np.ndarray
    per_class_accuracy: dict[int, float]
    accuracy: float
    results: list[TrialResult] = field(default_factory=list)
    exclusions: list[Exclusion] = field(default_factory=list)
    config: JudgmentConfig = JudgmentConfig()

    def to_dict(self) -> dict:
        def nan_to_none(a):
            return [[None if math.isnan(v) else v for v in row] for row in np.asarray(a).tolist()]

        def num(v):
            return None if math.isnan(v) else v

        return {
            "format_version": 1,
            "config": {"delay": self.config.delay, "threshold": self.config.threshold},
            "order": list(XI_ORDER),
            "counts": self.matrix.counts.tolist(),
            "by_requested_pct": nan_to_none(self.by_requested),
            "by_estimated_pct": nan_to_none(self.by_estimated),
            "per_class_accuracy": {str(k): num(v) for k, v in self.per_class_accuracy.items()},
            "accuracy": num(self.accuracy),
            "n_judged": self.matrix.total,
            "results": [
                {
                    "index": r.index,
                    "subject_id": r.subject_id,
                    "requested_xi": r.requested_xi,
                    "verdict": r.verdict.value,
                    "sampled_xi": r.verdict.sampled_xi,
                    "sample_time": r.verdict.sample_time,
                }
                for r in self.results
            ],
            "exclusions": [{"index": e.index, "subject_id": e.subject_id, "reason": e.reason} for e in self.exclusions],
        }


def report_from_matrix(
    m: ConfusionMatrix,
    results: Sequence[TrialResult] = (),
    exclusions: Sequence[Exclusion] = (),
    cfg: JudgmentConfig = JudgmentConfig(),
) -> EvaluationReport:
    return EvaluationReport(
        matrix=m,
        by_requested=conditional_by_requested(m),
        by_estimated=conditional_by_estimated(m),
        per_class_accuracy=m.per_class_accuracy(),
        accuracy=m.accuracy,
        results=list(results),
        exclusions=list(exclusions),
        config=cfg,
    )


def _filter_suite(records: Sequence[TrialRecord], params: ModelParams):
    """Yield ``(index, record, trace_or_None, error_or_None)``."""
    for i, rec in enumerate(records):
        try:
            if rec.requested_xi is None:
                raise EvaluationError("trial has no requested cooperativeness")
            detect_cue_onset(rec.cues)
            yield i, rec, filter_trial(rec, params), None
        except ModelError as exc:
            yield i, rec, None, exc


def evaluate_suite(
    records: Sequence[TrialRecord], params: ModelParams, cfg: JudgmentConfig = JudgmentConfig()
) -> EvaluationReport:
    """Filter and judge every record; failing trials land in ``exclusions``."""
    results, exclusions = [], []
    for i, rec, trace, err in _filter_suite(records, params):
        if err is None:
            try:
                results.append(TrialResult(i, rec.subject_id, rec.requested_xi, judge(trace, rec.cues, cfg)))
                continue
            except JudgmentError as exc:
                err = exc
        exclusions.append(Exclusion(i, rec.subject_id, str(err)))
    m = confusion_matrix((r.requested_xi, r.verdict.value) for r in results)
    return report_from_matrix(m, results, exclusions, cfg)


def sweep_count(lo: float, hi: float, step: float) -> int:
    if not (step > 0 and hi >= lo):
        raise EvaluationError("threshold sweep needs step > 0 and hi >= lo")
    return math.floor((hi - lo) / step + 1e-9) + 1


def threshold_sweep(
    records: Sequence[TrialRecord], params: ModelParams, delay: float, lo: float, hi: float, step: float
) -> list[dict]:
    """Accuracy against threshold; each trial is filtered once."""
    n = sweep_count(lo, hi, step)
    thresholds = [lo + i * step for i in range(n)]
    for th in thresholds:
        JudgmentConfig(delay, th)
    sampled = []
    for _, rec, trace, err in _filter_suite(records, params):
        if err is None:
            try:
                v = judge(trace, rec.cues, JudgmentConfig(delay, thresholds[0]))
                sampled.append((rec.requested_xi, v.sampled_xi))
            except JudgmentError:
                pass
    rows = []
    for th in thresholds:
        m = confusion_matrix((req, classify(xi, th)) for req, xi in sampled)
        acc = m.per_class_accuracy()
        rows.append(
            {
                "threshold": th,
                "accuracy": m.accuracy,
                "acc_uncooperative": acc[-1],
                "acc_unresponsive": acc[0],
                "acc_cooperative": acc[1],
                "n_judged": m.total,
            }
        )
    return rows


def render_tables(report: EvaluationReport) -> str:
    """Plain-text joint counts and both conditional tables."""
    names = [XI_NAMES[x] for x in XI_ORDER]
    width = max(len(n) for n in names) + 2

    def table(title, data, fmt, corner):
        lines = [title, f"{corner:<{width + 4}}" + "".join(f"{n:>{width}}" for n in names)]
        for xi, row in zip(XI_ORDER, data):
            cells = "".join(f"{('--' if isinstance(v, float) and math.isnan(v) else fmt(v)):>{width}}" for v in row)
            lines.append(f"{XI_NAMES[xi]:<{width}}({xi:+d})" + cells)
        return "\n".join(lines)

    m = report.matrix
    parts = [
        table(
            f"Joint counts, rows = requested, columns = estimated (N={m.total})",
            m.counts.tolist(),
            lambda v: str(v),
            "requested \\ est.",
        ),
        table("Estimated given requested (row %)", report.by_requested, lambda v: f"{v:.1f}", "requested"),
        table("Requested given estimated (column %)", report.by_estimated, lambda v: f"{v:.1f}", "requested"),
    ]
    acc = report.per_class_accuracy
    summary = "Correct-judgment rate: " + ", ".join(
        f"{XI_NAMES[x]} {'--' if math.isnan(acc[x]) else f'{acc[x]:.3f}'}" for x in XI_ORDER
    )
    overall = "--" if math.isnan(report.accuracy) else f"{report.accuracy:.3f}"
    parts.append(summary + f"; overall {overall}")
    if report.exclusions:
        parts.append(f"Excluded {len(report.exclusions)} trial(s):")
        parts += [f"  #{e.index} {e.subject_id}: {e.reason}" for e in report.exclusions]
    return "\n\n".join(parts[:3]) + "\n\n" + "\n".join(parts[3:]) + "\n"


# -- estimator consistency ---------------------------------------------------------


def nees(truth: np.ndarray, trace: FilterTrace) -> np.ndarray:
    """Per-tick normalized estimation error squared."""
    err = truth - trace.means
    return np.einsum("ni,ni->n", err, np.linalg.solve(trace.covs, err[..., None])[..., 0])


def nis(trace: FilterTrace) -> np.ndarray:
    """Per-tick normalized innovation squared."""
    return trace.innovations**2 / trace.innovation_vars


@dataclass(frozen=True)
class ConsistencyResult:
    mean_nees: float
    mean_nis: float
    n_trials: int
    n_ticks: int


def self_consistent_run(
    specs: Sequence[TrialSpec], params: ModelParams, prior: StateEstimate, seed: int = 0
) -> ConsistencyResult:
    """Filter trials generated exactly under the filter's own assumptions.

    The truth starts from a draw of ``prior`` and every noise term, including
    cooperativeness drift, is active.  A consistent filter gives mean NEES
    near 4 and mean NIS near 1.
    """
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(prior.cov)
    nees_sum = nis_sum = 0.0
    ticks = 0
    for spec in specs:
        x0 = prior.mean + chol @ rng.standard_normal(4)
        rec = simulate_trial(spec, params, hold_xi=False, initial_state=StateVector.from_array(x0))
        trace = filter_trial(rec, params, prior)
        nees_sum += float(nees(rec.truth, trace).sum())
        nis_sum += float(nis(trace).sum())
        ticks += len(trace)
    return ConsistencyResult(nees_sum / ticks, nis_sum / ticks, len(specs), ticks)
