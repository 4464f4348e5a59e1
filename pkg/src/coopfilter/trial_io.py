"""On-disk formats for trials, filter traces, suite manifests and parameter files.

A trial ``name.csv`` holds ``t,c_p,c_v,y`` rows.  Metadata sits next to it in
``name.meta.json``; simulated trials also carry ``name.truth.csv`` with
``t,x,x_dot,eta,xi``.  Floats are written with ``repr`` so every value
round-trips exactly.  See ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import errno
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .kalman import TIME_JITTER, FilterTrace
from .model import ModelError, ModelParams, default_param_values
from .simulator import CueTrace, SimulationError, TrialRecord, TrialSpec

FORMAT_VERSION = 1
TRIAL_COLUMNS = ("t", "c_p", "c_v", "y")
TRUTH_COLUMNS = ("t", "x", "x_dot", "eta", "xi")
PLOT_COLUMNS = (
    "t", "y",
    "x_hat", "x_hat_lo", "x_hat_hi",
    "eta_hat", "eta_hat_lo", "eta_hat_hi",
    "xi_hat", "xi_hat_lo", "xi_hat_hi",
)  # fmt: skip
PROVENANCES = ("simulated", "recorded")


class TrialFormatError(ValueError):
    """A file that exists but does not satisfy its format."""

    def __init__(self, path: str | os.PathLike, message: str):
        self.path = str(path)
        self.message = message
        super().__init__(f"{self.path}: {message}")


class ParamsFormatError(TrialFormatError):
    pass


def meta_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def truth_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".truth.csv")


def _fmt(value: float) -> str:
    return repr(float(value))


def atomic_write_text(path: str | os.PathLike, text: str, force: bool = True) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    if not force and path.exists():
        raise FileExistsError(f"{path} exists; pass force to overwrite")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _read_csv(path: Path, columns: Sequence[str]) -> np.ndarray:
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise TrialFormatError(path, f"not UTF-8 text ({exc.reason})") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise TrialFormatError(path, "empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header) != tuple(columns):
        raise TrialFormatError(path, f"header must be {','.join(columns)}, got {','.join(header)}")
    body = rows[1:]
    if not body:
        raise TrialFormatError(path, "no data rows")
    out = np.empty((len(body), len(columns)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(columns):
            raise TrialFormatError(path, f"line {i}: expected {len(columns)} columns, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise TrialFormatError(path, f"line {i}: {columns[j]} is not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise TrialFormatError(path, f"line {i}: {columns[j]} is not finite: {cell!r}")
            out[i - 2, j] = v
    return out


def _check_grid(path: Path, t: np.ndarray, dt: float) -> None:
    expected = t[0] + np.arange(len(t)) * dt
    bad = np.flatnonzero(np.abs(t - expected) > TIME_JITTER)
    if bad.size:
        i = int(bad[0])
        raise TrialFormatError(
            path, f"time column is not uniform at dt={dt!r}: row {i + 1} has t={t[i]!r}, expected {expected[i]!r}"
        )


def _read_meta(path: Path) -> dict[str, Any]:
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TrialFormatError(path, f"metadata is not valid JSON ({exc})") from None
    if not isinstance(meta, dict):
        raise TrialFormatError(path, "metadata must be a JSON object")
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise TrialFormatError(path, f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    dt = meta.get("dt")
    if isinstance(dt, bool) or not isinstance(dt, (int, float)) or not (math.isfinite(dt) and dt > 0):
        raise TrialFormatError(path, f"dt must be a positive number, got {dt!r}")
    if meta.get("provenance") not in PROVENANCES:
        raise TrialFormatError(path, f"provenance must be one of {PROVENANCES}, got {meta.get('provenance')!r}")
    if meta.get("requested_xi") not in (None, -1, 0, 1) or isinstance(meta.get("requested_xi"), bool):
        raise TrialFormatError(path, f"requested_xi must be -1, 0, 1 or null, got {meta.get('requested_xi')!r}")
    if not isinstance(meta.get("subject_id", ""), str):
        raise TrialFormatError(path, "subject_id must be a string")
    return meta


def read_trial(path: str | os.PathLike) -> TrialRecord:
    """Load a trial CSV and its sidecar files.

    Raises ``FileNotFoundError`` for missing files and :class:`TrialFormatError`
    for anything malformed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(errno.ENOENT, "trial file not found", str(path))
    mpath = meta_path(path)
    meta = _read_meta(mpath)
    dt = float(meta["dt"])
    data = _read_csv(path, TRIAL_COLUMNS)
    t, c_p, c_v, y = data.T
    bad = np.flatnonzero(~np.isin(c_v, (-1.0, 0.0, 1.0)))
    if bad.size:
        raise TrialFormatError(path, f"line {bad[0] + 2}: c_v must be one of -1, 0, +1, got {c_v[bad[0]]!r}")
    _check_grid(path, t, dt)

    spec = None
    if meta.get("spec") is not None:
        try:
            spec = TrialSpec.from_dict(meta["spec"])
        except (TypeError, ValueError) as exc:
            raise TrialFormatError(mpath, f"invalid spec: {exc}") from None

    truth = None
    if meta["provenance"] == "simulated" and meta.get("truth"):
        tpath = path.with_name(str(meta["truth"]))
        tdata = _read_csv(tpath, TRUTH_COLUMNS)
        if tdata.shape[0] != len(t) or tdata[:, 0].tobytes() != t.tobytes():
            raise TrialFormatError(tpath, "truth time column does not match the trial")
        truth = tdata[:, 1:]

    try:
        return TrialRecord(
            spec=spec,
            cues=CueTrace(t, c_p, c_v),
            measurements=y,
            truth=truth,
            subject_id=meta.get("subject_id", ""),
            requested_xi=meta.get("requested_xi"),
        )
    except SimulationError as exc:
        raise TrialFormatError(path, str(exc)) from None


def write_trial(
    record: TrialRecord,
    path: str | os.PathLike,
    *,
    dt: float | None = None,
    force: bool = False,
    provenance: str | None = None,
) -> Path:
    """Write ``record`` to ``path`` plus its sidecars; refuses to overwrite unless ``force``."""
    path = Path(path)
    n = len(record.measurements)
    if n == 0:
        raise ValueError("cannot write a trial with no measurements")
    if dt is None:
        if n < 2:
            raise ValueError("dt must be given for a single-sample trial")
        dt = float(record.times[1] - record.times[0])
    if provenance is None:
        provenance = "simulated" if record.truth is not None else "recorded"
    if provenance not in PROVENANCES:
        raise ValueError(f"provenance must be one of {PROVENANCES}")
    targets = [path, meta_path(path)] + ([truth_path(path)] if record.truth is not None else [])
    if not force:
        for p in targets:
            if p.exists():
                raise FileExistsError(f"{p} exists; pass force to overwrite")

    t = record.times
    rows = (
        (_fmt(t[i]), _fmt(record.cues.c_p[i]), str(int(record.cues.c_v[i])), _fmt(record.measurements[i]))
        for i in range(n)
    )
    meta = {
        "format_version": FORMAT_VERSION,
        "dt": float(dt),
        "subject_id": record.subject_id,
        "requested_xi": record.requested_xi,
        "provenance": provenance,
        "spec": None if record.spec is None else record.spec.to_dict(),
        "truth": None,
    }
    if record.truth is not None:
        meta["truth"] = truth_path(path).name
        truth_rows = ((_fmt(t[i]), *(_fmt(v) for v in record.truth[i])) for i in range(n))
        atomic_write_text(truth_path(path), _csv_text(TRUTH_COLUMNS, truth_rows))
    atomic_write_text(path, _csv_text(TRIAL_COLUMNS, rows))
    atomic_write_text(meta_path(path), json.dumps(meta, indent=2) + "\n")
    return path


# -- parameters ---------------------------------------------------------------

PARAM_FIELDS = tuple(f.name for f in fields(ModelParams))


def params_from_mapping(data: Any, source: str | os.PathLike = "<params>") -> ModelParams:
    if not isinstance(data, dict):
        raise ParamsFormatError(source, "parameter file must hold a JSON object")
    unknown = sorted(set(data) - set(PARAM_FIELDS))
    if unknown:
        raise ParamsFormatError(source, f"unknown parameter(s): {', '.join(unknown)}")
    missing = [k for k in PARAM_FIELDS if k not in data]
    if missing:
        warnings.warn(f"{source}: using defaults for {', '.join(missing)}", stacklevel=3)
    values = default_param_values()
    values.update(data)
    try:
        return ModelParams(**values)
    except ModelError as exc:
        raise ParamsFormatError(source, str(exc)) from None


def read_params(path: str | os.PathLike) -> ModelParams:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParamsFormatError(path, f"not valid JSON ({exc})") from None
    return params_from_mapping(data, path)


def write_params(params: ModelParams, path: str | os.PathLike, force: bool = True) -> None:
    atomic_write_text(path, json.dumps(params.to_dict(), indent=2) + "\n", force=force)


# -- filter traces --------------------------------------------------------------


def trace_to_dict(trace: FilterTrace) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "times": trace.times.tolist(),
        "means": trace.means.tolist(),
        "covs": trace.covs.tolist(),
        "innovations": trace.innovations.tolist(),
        "innovation_vars": trace.innovation_vars.tolist(),
    }


def write_trace(trace: FilterTrace, path: str | os.PathLike) -> None:
    atomic_write_text(path, json.dumps(trace_to_dict(trace)) + "\n")


def read_trace(path: str | os.PathLike) -> FilterTrace:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TrialFormatError(path, f"not valid JSON ({exc})") from None
    if not isinstance(d, dict) or d.get("format_version") != FORMAT_VERSION:
        raise TrialFormatError(path, "not a version-1 filter trace")
    try:
        return FilterTrace(
            np.asarray(d["times"], dtype=float),
            np.asarray(d["means"], dtype=float),
            np.asarray(d["covs"], dtype=float),
            np.asarray(d["innovations"], dtype=float),
            np.asarray(d["innovation_vars"], dtype=float),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TrialFormatError(path, f"malformed trace ({exc})") from None


def plot_rows(trace: FilterTrace, measurements: np.ndarray) -> list[tuple[float, ...]]:
    sd = trace.std
    rows = []
    for i, t in enumerate(trace.times):
        row = [t, measurements[i]]
        for j in (0, 2, 3):
            m = trace.means[i, j]
            row += [m, m - 2 * sd[i, j], m + 2 * sd[i, j]]
        rows.append(tuple(float(v) for v in row))
    return rows


def write_plot_csv(trace: FilterTrace, measurements: np.ndarray, path: str | os.PathLike) -> None:
    rows = ((_fmt(v) for v in row) for row in plot_rows(trace, measurements))
    atomic_write_text(path, _csv_text(PLOT_COLUMNS, rows))


# -- suite manifests ---------------------------------------------------------------


def write_manifest(manifest: dict[str, Any], path: str | os.PathLike, force: bool = True) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n", force=force)


def read_manifest(path: str | os.PathLike) -> dict[str, Any]:
    path = Path(path)
    try:
        m = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise TrialFormatError(path, f"not valid JSON ({exc})") from None
    if not isinstance(m, dict) or m.get("format_version") != FORMAT_VERSION:
        raise TrialFormatError(path, "not a version-1 suite manifest")
    trials = m.get("trials")
    if not isinstance(trials, list) or not all(isinstance(t, dict) and isinstance(t.get("file"), str) for t in trials):
        raise TrialFormatError(path, "manifest 'trials' must be a list of objects with a 'file' entry")
    return m


def manifest_trial_paths(manifest: dict[str, Any], manifest_path: str | os.PathLike) -> list[Path]:
    base = Path(manifest_path).parent
    return [base / t["file"] for t in manifest["trials"]]
