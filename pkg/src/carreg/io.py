"""CSV ingestion, fit configuration and report serialization."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binning import default_min_bin_size
from .errors import ConfigError, InsufficientData, InvalidLevel, ParseError, SchemaError
from .estimator import CarFit, Dataset, RawCoefficient, export_raw_coefficients, fit_car
from .inference import car_intervals, estimate_variances, naive_ols
from .linalg import DEFAULT_DET_THRESHOLD
from .simulation import SimulationReport


@dataclass
class FitConfig:
    u_col: str = "u"
    y_col: str = "y"
    x_cols: list[str] = field(default_factory=lambda: ["x1"])
    m: int | None = None
    min_bin_size: int | None = None
    det_threshold: float = DEFAULT_DET_THRESHOLD
    level: float = 0.95

    @property
    def p(self) -> int:
        return len(self.x_cols)

    def resolved_min_bin_size(self) -> int:
        return self.min_bin_size if self.min_bin_size is not None else default_min_bin_size(self.p)

    def validate(self) -> "FitConfig":
        if not self.x_cols:
            raise ConfigError("at least one predictor column is required")
        if not 0.0 < self.level < 1.0:
            raise InvalidLevel(f"level must lie in (0, 1), got {self.level}")
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be at least 1")
        if self.resolved_min_bin_size() < self.p + 1:
            raise ConfigError(f"min_bin_size must be at least p+1={self.p + 1}")
        if not self.det_threshold > 0:
            raise ConfigError("det_threshold must be positive")
        return self


def _parse_float(text: str, row: int, col: str) -> float:
    s = text.strip()
    if not s:
        raise ParseError(f"empty cell at row {row}, column {col!r}", row=row, col=col)
    try:
        value = float(s)
    except ValueError:
        raise ParseError(
            f"non-numeric cell {s!r} at row {row}, column {col!r}", row=row, col=col
        ) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {s!r} at row {row}, column {col!r}", row=row, col=col)
    return value


def load_csv(path, u_col: str, y_col: str, x_cols: list[str]) -> Dataset:
    """Read a dataset from a headed CSV file.

    Row numbers in errors count data rows from 1 (the header is row 0).
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path} is empty")
        header = [h.strip() for h in header]
        wanted = [u_col, y_col, *x_cols]
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SchemaError(f"missing column(s) {missing} in {path}", missing=missing)
        idx = [header.index(c) for c in wanted]
        rows = []
        for rownum, line in enumerate(reader, start=1):
            if not line or all(not cell.strip() for cell in line):
                continue
            if len(line) < len(header):
                line = line + [""] * (len(header) - len(line))
            rows.append([_parse_float(line[i], rownum, c) for i, c in zip(idx, wanted)])
    p = len(x_cols)
    if len(rows) < p + 2:
        raise InsufficientData(f"{len(rows)} data rows; need at least p+2={p + 2}")
    arr = np.array(rows, dtype=float)
    return Dataset(u=arr[:, 0], x_tilde=arr[:, 2:], y_tilde=arr[:, 1])


def _num(x: float) -> str:
    # repr() round-trips doubles exactly (up to 17 significant digits)
    return repr(float(x))


def write_dataset_csv(data: Dataset, path, u_col="u", y_col="y", x_cols=None) -> None:
    x_cols = x_cols or [f"x{r + 1}" for r in range(data.p)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([u_col, y_col, *x_cols])
        for i in range(data.n):
            w.writerow([_num(data.u[i]), _num(data.y_tilde[i]), *map(_num, data.x_tilde[i])])


def coefficient_names(x_cols: list[str]) -> list[str]:
    return ["intercept", *x_cols]


def fit_report(data: Dataset, config: FitConfig) -> tuple[dict, CarFit]:
    """Adjusted and naive least squares estimates side by side."""
    config.validate()
    m = config.m
    fit = fit_car(
        data,
        m=m,
        min_bin_size=config.resolved_min_bin_size(),
        det_threshold=config.det_threshold,
    )
    var = estimate_variances(fit, data)
    car = car_intervals(fit, var, config.level)
    ols = naive_ols(data, config.level)
    names = coefficient_names(config.x_cols)
    coefs = []
    for r, name in enumerate(names):
        coefs.append(
            {
                "name": name,
                "car": {
                    "estimate": car[r].estimate,
                    "std_error": car[r].std_error,
                    "lower": car[r].lower,
                    "upper": car[r].upper,
                    "level": car[r].level,
                    "sigma_sq_raw": float(var.sigma_sq[r]),
                },
                "ols": {
                    "estimate": ols[r].estimate,
                    "std_error": ols[r].std_error,
                    "lower": ols[r].lower,
                    "upper": ols[r].upper,
                    "level": ols[r].level,
                },
            }
        )
    report = {
        "coefficients": coefs,
        "n": data.n,
        "n_fitted": fit.n_fitted,
        "bins_used": len(fit.bin_fits),
        "bins_skipped": [{"bin": j, "reason": why} for j, why in fit.skipped_bins],
        "m_initial": fit.partition.m_initial,
        "m_final": fit.partition.number_of_bins,
        "min_bin_size": config.resolved_min_bin_size(),
        "det_threshold": config.det_threshold,
        "level": config.level,
        "pooled_rss_over_n": var.pooled_rss_over_n,
    }
    return report, fit


def format_fit_table(report: dict) -> str:
    """Plain-text table in the two-method layout, rounded to 4 decimals."""
    pct = round(100 * report["level"], 2)
    head = (
        f"{'Coefficient':<14}{'OLS lower':>11}{'OLS est.':>11}{'OLS upper':>11}"
        f"{'CAR lower':>11}{'CAR est.':>11}{'CAR upper':>11}"
    )
    lines = [
        f"n={report['n']}  bins={report['bins_used']} (initial m={report['m_initial']}, "
        f"skipped {len(report['bins_skipped'])})  level={pct:g}%",
        head,
        "-" * len(head),
    ]
    for c in report["coefficients"]:
        o, a = c["ols"], c["car"]
        lines.append(
            f"{c['name']:<14}{o['lower']:>11.4f}{o['estimate']:>11.4f}{o['upper']:>11.4f}"
            f"{a['lower']:>11.4f}{a['estimate']:>11.4f}{a['upper']:>11.4f}"
        )
    return "\n".join(lines)


def write_raw_coefficients_csv(rows: list[RawCoefficient], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["midpoint", "count", "beta"])
        for row in rows:
            w.writerow([_num(row.midpoint), int(row.count), _num(row.beta)])


def raw_coefficients(data: Dataset, config: FitConfig, r: int) -> list[RawCoefficient]:
    config.validate()
    fit = fit_car(
        data,
        m=config.m,
        min_bin_size=config.resolved_min_bin_size(),
        det_threshold=config.det_threshold,
    )
    return export_raw_coefficients(fit, r)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def simulation_csv_rows(reports: list[SimulationReport]) -> list[list[str]]:
    """Rows in the coverage/length table layout: one row per sample size."""
    k = len(reports[0].coefficients) if reports else 0
    header = ["n", "m", "replicates", "failures"]
    for r in range(k):
        header += [f"gamma{r}_coverage_pct", f"gamma{r}_length"]
    rows = [header]
    for rep in reports:
        row = [str(rep.n), str(rep.m_used), str(rep.replicates), str(rep.failures)]
        for c in rep.coefficients:
            row += [_num(100.0 * c.coverage_fraction), _num(c.mean_ci_length)]
        rows.append(row)
    return rows


def write_simulation_outputs(reports: list[SimulationReport], out_dir) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "simulation.json"
    csv_path = out / "simulation.csv"
    dump_json({"reports": [r.to_dict() for r in reports]}, json_path)
    with csv_path.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(simulation_csv_rows(reports))
    return json_path, csv_path


def format_simulation_table(reports: list[SimulationReport]) -> str:
    k = len(reports[0].coefficients) if reports else 0
    head = f"{'n':>6}{'m':>5}" + "".join(f"{'g' + str(r) + ' cov':>10}{'len':>8}" for r in range(k))
    lines = [head, "-" * len(head)]
    for rep in reports:
        cells = "".join(
            f"{100 * c.coverage_fraction:>10.1f}{c.mean_ci_length:>8.4f}" for c in rep.coefficients
        )
        lines.append(f"{rep.n:>6}{rep.m_used:>5}{cells}")
        if rep.failures:
            lines.append(f"{'':>11}({rep.failures} of {rep.replicates} replicates failed)")
    return "\n".join(lines)
