"""CSV artifacts. Headers are fixed; floats are written with ``repr`` so reruns are byte-identical."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError
from .harness import StudyRow, TrialReport
from .tdoa import hyperbola_from_rstd, hyperbola_points
from .timing import CalibrationResult, ToaRecord

TOA_HEADER = ["trial_id", "ue_position_id", "gnb_id", "toa_s", "true_tof_s"]
RSTD_HEADER = ["trial_id", "position_id", "gnb_id", "rstd_s", "corrected_rstd_s"]
CALIBRATION_HEADER = ["gnb_id", "delta_hat_s", "sample_count", "residual_std_s"]
ESTIMATES_HEADER = ["position_id", "true_x_m", "true_y_m", "est_x_m", "est_y_m", "error_m", "converged"]
HISTOGRAM_HEADER = ["trial_id", "ue_position_id", "gnb_id", "bin_left_s", "bin_right_s", "count"]
HYPERBOLA_HEADER = ["position_id", "gnb_id", "t", "x_m", "y_m"]
SWEEP_HEADER = [
    "parameter", "value", "excess_delay_s", "snr_db", "oversample_factor",
    "toa_bias_s", "toa_std_s", "max_abs_error_s", "trials",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write atomically: a temp file in the target directory is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.chmod(tmp, 0o644)  # mkstemp creates 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _read(path: str | Path, header: Sequence[str]) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(header):
            raise ParseError(f"expected header {','.join(header)}, got {reader.fieldnames}", str(path))
        return list(reader)


# ------------------------------------------------------------------ writers


def write_toa_records(path, records: Iterable[ToaRecord]) -> Path:
    return write_csv(path, TOA_HEADER, (
        (r.trial_id, r.ue_position_id, r.gnb_id, r.toa_s, r.true_tof_s) for r in records
    ))


def read_toa_records(path) -> list[ToaRecord]:
    out = []
    for i, row in enumerate(_read(path, TOA_HEADER), start=2):
        try:
            tof = row["true_tof_s"]
            out.append(ToaRecord(
                int(row["trial_id"]), int(row["ue_position_id"]), int(row["gnb_id"]),
                float(row["toa_s"]), float(tof) if tof else None,
            ))
        except ValueError as exc:
            raise ParseError(str(exc), f"{path}: line {i}") from None
    return out


def write_calibration(path, cal: CalibrationResult) -> Path:
    return write_csv(path, CALIBRATION_HEADER, (
        (j, cal.delta_hat_s[j - 1], cal.sample_count[j - 1], cal.residual_std_s[j - 1])
        for j in range(1, cal.n_gnbs + 1)
    ))


def read_calibration(path) -> CalibrationResult:
    rows = _read(path, CALIBRATION_HEADER)
    try:
        rows = sorted(rows, key=lambda r: int(r["gnb_id"]))
        ids = [int(r["gnb_id"]) for r in rows]
        if ids != list(range(1, len(ids) + 1)):
            raise ParseError(f"gnb_id column must be 1..N, got {ids}", str(path))
        cal = CalibrationResult(
            tuple(float(r["delta_hat_s"]) for r in rows),
            tuple(int(r["sample_count"]) for r in rows),
            tuple(float(r["residual_std_s"]) for r in rows),
        )
    except ValueError as exc:
        raise ParseError(str(exc), str(path)) from None
    if not cal.delta_hat_s or cal.delta_hat_s[0] != 0.0:
        raise ParseError("reference gNB row must have delta_hat_s = 0", str(path))
    return cal


def write_rstd_records(path, report: TrialReport) -> Path:
    return write_csv(path, RSTD_HEADER, (
        (p.trial_id, p.position_id, r.gnb_id, r.rstd_s, r.corrected_rstd_s)
        for p in report.positions for r in p.rstds
    ))


def write_estimates(path, report: TrialReport) -> Path:
    rows = []
    for p in report.positions:
        est = p.estimate
        rows.append((
            p.position_id, p.truth.x, p.truth.y,
            None if est is None else est.x, None if est is None else est.y,
            p.error_m, p.status,
        ))
    rows.append(("rmse", None, None, None, None, report.rmse_m, None))
    return write_csv(path, ESTIMATES_HEADER, rows)


def histogram_rows(report: TrialReport, bin_s: float):
    for t in report.trials:
        idx = np.floor(t.toas / bin_s).astype(np.int64)
        lo, hi = int(idx.min()), int(idx.max())
        counts = np.bincount(idx - lo, minlength=hi - lo + 1)
        for k, c in enumerate(counts):
            yield (t.trial_id, t.position_id, t.gnb_id, (lo + k) * bin_s, (lo + k + 1) * bin_s, int(c))


def write_histogram(path, report: TrialReport, bin_s: float) -> Path:
    return write_csv(path, HISTOGRAM_HEADER, histogram_rows(report, bin_s))


def hyperbola_rows(report: TrialReport, deployment, t_max: float = 2.0, n: int = 101):
    ref = deployment.position(1)
    t = np.linspace(-t_max, t_max, n)
    for p in report.positions:
        if p.status == "invalid":
            continue
        for r in p.rstds:
            params = hyperbola_from_rstd(ref, deployment.position(r.gnb_id), r.corrected_rstd_s)
            for tk, pt in zip(t, hyperbola_points(params, (-t_max, t_max), n)):
                yield (p.position_id, r.gnb_id, float(tk), pt.x, pt.y)


def write_hyperbolas(path, report: TrialReport, deployment, t_max: float = 2.0, n: int = 101) -> Path:
    return write_csv(path, HYPERBOLA_HEADER, hyperbola_rows(report, deployment, t_max, n))


def write_sweep(path, rows: Sequence[StudyRow]) -> Path:
    return write_csv(path, SWEEP_HEADER, (
        (r.parameter, r.value, r.excess_delay_s, r.snr_db, r.oversample_factor,
         r.toa_bias_s, r.toa_std_s, r.max_abs_error_s, r.trials)
        for r in rows
    ))


def write_svg(path, report: TrialReport, deployment, t_max: float = 2.0, n: int = 101) -> Path | None:
    """Hyperbolas, true and estimated positions. Returns None without matplotlib."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(6, 6))
    g = deployment.as_array()
    ax.plot(g[:, 0], g[:, 1], "k^", label="gNB")
    rows = list(hyperbola_rows(report, deployment, t_max, n))
    for key in sorted({(r[0], r[1]) for r in rows}):
        pts = np.array([(r[3], r[4]) for r in rows if (r[0], r[1]) == key])
        ax.plot(pts[:, 0], pts[:, 1], lw=0.6, alpha=0.6)
    for p in report.positions:
        ax.plot(p.truth.x, p.truth.y, "go", ms=4)
        if p.estimate is not None:
            ax.plot(p.estimate.x, p.estimate.y, "rx", ms=5)
    pad = 0.25 * float(np.ptp(g, axis=0).max())
    ax.set_xlim(g[:, 0].min() - pad, g[:, 0].max() + pad)
    ax.set_ylim(g[:, 1].min() - pad, g[:, 1].max() + pad)
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    title = "TDOA fixes" if report.rmse_m is None or math.isnan(report.rmse_m) else f"RMSE {report.rmse_m:.2f} m"
    ax.set_title(title)
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
