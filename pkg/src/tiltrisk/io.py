"""CSV ingestion, report emission, and the end-to-end analysis pipeline.

The data format is a headered CSV with column ``s`` (0/1), column ``y``
(may be empty on target rows), and numeric covariate columns.  Outputs
are a curve CSV (one row per eta) and a JSON report that validates
against the shipped schema.  Identical config and seed give byte-
identical outputs.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import platform
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import FORMAT_VERSION, AnalysisConfig
from .data import ObservationTable, build_table
from .errors import ConfigError, DataError
from .estimators import SensitivityCurve, sensitivity_curve
from .etaselect import PrevalenceAnchor, eta_grid_from_prevalence_range
from .nuisance import DesignSpec, NuisanceRecipe, fit_logistic
from .resampling import ResampleConfig
from .tilt import LossFunction, PredictionModel

CURVE_HEADER = (
    "eta", "estimate", "se", "ci_lo", "ci_hi",
    "diag_max_weight", "diag_clip_count", "status",
)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass
class RawData:
    s: np.ndarray
    y: np.ndarray
    x: np.ndarray
    columns: tuple
    masked_y_count: int


def _read_raw(csv_path, x_columns) -> RawData:
    path = Path(csv_path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = [c for c in ("s", "y", *x_columns) if c not in reader.fieldnames]
        if missing:
            raise DataError(f"{path}: missing columns: {missing}")
        s_vals, y_vals, x_rows = [], [], []
        masked = 0
        for i, row in enumerate(reader):
            sv = (row["s"] or "").strip()
            if sv not in ("0", "1"):
                raise DataError(f"row {i}: s must be 0 or 1, got {row['s']!r}")
            s = int(sv)
            yv = (row["y"] or "").strip()
            if s == 1:
                if yv == "":
                    raise DataError(f"row {i}: source row has empty y")
                try:
                    y = float(yv)
                except ValueError:
                    raise DataError(f"row {i}, column y: could not parse {yv!r}")
            else:
                if yv != "":
                    masked += 1
                y = np.nan
            xs = []
            for c in x_columns:
                cell = (row[c] or "").strip()
                try:
                    xs.append(float(cell))
                except ValueError:
                    raise DataError(f"row {i}, column {c}: could not parse {cell!r}")
            s_vals.append(s)
            y_vals.append(y)
            x_rows.append(xs)
    if not s_vals:
        raise DataError(f"{path}: no data rows")
    return RawData(
        s=np.array(s_vals, dtype=np.int64),
        y=np.array(y_vals, dtype=np.float64),
        x=np.array(x_rows, dtype=np.float64),
        columns=tuple(x_columns),
        masked_y_count=masked,
    )


def load_table(csv_path, config: AnalysisConfig) -> ObservationTable:
    """Read and validate a CSV into an ObservationTable.

    Requires pre-fitted model coefficients in the config (the fit-split
    path lives in run_analysis).  Outcome values supplied on target rows
    are ignored with a warning carrying the count.
    """
    if config.model_coefficients is None:
        raise ConfigError("load_table needs model_coefficients; use run_analysis for fit-split")
    raw = _read_raw(csv_path, config.x_columns)
    if raw.masked_y_count:
        warnings.warn(
            f"{raw.masked_y_count} target rows carried outcome values; ignored",
            stacklevel=2,
        )
    model = _model_from_config(config)
    return build_table(
        raw.s, raw.x, raw.y, model, LossFunction(config.loss), config.design
    )


def _xstar_indices(config: AnalysisConfig) -> tuple:
    return tuple(config.x_columns.index(c) for c in config.xstar_columns)


def _model_from_config(config: AnalysisConfig) -> PredictionModel:
    return PredictionModel(
        coefficients=config.model_coefficients,
        link=config.model_link,
        xstar_columns=_xstar_indices(config),
    )


# ---------------------------------------------------------------------------
# Curve CSV
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_curve_csv(curve: SensitivityCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        for pt in curve:
            if pt.ok:
                r = pt.result
                ci_lo, ci_hi = (r.ci if r.ci is not None else (None, None))
                writer.writerow([
                    _fmt(pt.eta), _fmt(r.estimate), _fmt(r.se), _fmt(ci_lo), _fmt(ci_hi),
                    _fmt(r.diagnostics.get("max_weight")),
                    "" if r.diagnostics.get("clip_count") is None
                    else str(int(r.diagnostics["clip_count"])),
                    pt.status,
                ])
            else:
                writer.writerow([_fmt(pt.eta), "", "", "", "", "", "", pt.status])


def read_curve_csv(path) -> list:
    """Parse a curve CSV back into a list of row dicts (floats or None)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CURVE_HEADER:
            raise DataError(f"{path}: unexpected curve header {reader.fieldnames}")
        out = []
        for row in reader:
            parsed = {}
            for key in CURVE_HEADER[:-2]:
                parsed[key] = float(row[key]) if row[key] != "" else None
            parsed["diag_clip_count"] = (
                int(row["diag_clip_count"]) if row["diag_clip_count"] != "" else None
            )
            parsed["status"] = row["status"]
            out.append(parsed)
    return out


def curve_rows(curve: SensitivityCurve) -> list:
    """The same row dicts ``read_curve_csv`` produces, straight from the curve."""
    rows = []
    for pt in curve:
        if pt.ok:
            r = pt.result
            ci_lo, ci_hi = (r.ci if r.ci is not None else (None, None))
            mw = r.diagnostics.get("max_weight")
            cc = r.diagnostics.get("clip_count")
            rows.append({
                "eta": pt.eta, "estimate": r.estimate, "se": r.se,
                "ci_lo": ci_lo, "ci_hi": ci_hi,
                "diag_max_weight": None if mw is None else float(mw),
                "diag_clip_count": None if cc is None else int(cc),
                "status": pt.status,
            })
        else:
            rows.append({
                "eta": pt.eta, "estimate": None, "se": None, "ci_lo": None,
                "ci_hi": None, "diag_max_weight": None, "diag_clip_count": None,
                "status": pt.status,
            })
    return rows


# ---------------------------------------------------------------------------
# JSON report
# ---------------------------------------------------------------------------


def report_schema() -> dict:
    text = importlib.resources.files("tiltrisk").joinpath("report_schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, report_schema())


def build_report(config: AnalysisConfig, table: ObservationTable,
                 curve: SensitivityCurve, curve_csv_name: str,
                 extra: Optional[dict] = None) -> dict:
    import scipy

    report = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {
            "tiltrisk": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "data": {
            "n": table.n,
            "n1": table.n1,
            "n0": table.n0,
            "design": table.design,
        },
        "eta_grid": [float(e) for e in curve.metadata["eta_grid"]],
        "statuses": [pt.status for pt in curve],
        "diagnostics": {
            "n_failed_points": sum(0 if pt.ok else 1 for pt in curve),
            "max_weight": max(
                (pt.result.diagnostics.get("max_weight", 0.0) for pt in curve if pt.ok),
                default=0.0,
            ),
            "resampling": curve.metadata.get("resampling"),
        },
        "outputs": {"curve_csv": curve_csv_name},
    }
    if extra:
        report["diagnostics"].update(extra)
    return report


def write_report(report: dict, path) -> None:
    validate_report(report)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------


def _fit_model_on_split(raw: RawData, config: AnalysisConfig):
    """Split source rows; fit h on one half, return the model plus the row
    mask for the evaluation table (held-out sources and all targets)."""
    rng = np.random.default_rng(config.seed)
    src_idx = np.flatnonzero(raw.s == 1)
    if src_idx.size < 4:
        raise DataError("fit-split needs at least 4 source rows")
    perm = rng.permutation(src_idx)
    n_fit = int(round(config.fit_split * src_idx.size))
    n_fit = min(max(n_fit, 2), src_idx.size - 2)
    fit_rows = perm[:n_fit]
    xstar_idx = _xstar_indices(config)
    spec = DesignSpec(range(len(xstar_idx)))
    x_fit = raw.x[fit_rows][:, list(xstar_idx)]
    y_fit = raw.y[fit_rows]
    if config.model_link == "logit":
        glm = fit_logistic(spec, x_fit, y_fit)
        coefs = glm.coefficients
    else:
        d = np.column_stack([np.ones(x_fit.shape[0]), x_fit])
        coefs, *_ = np.linalg.lstsq(d, y_fit, rcond=None)
    model = PredictionModel(
        coefficients=tuple(float(c) for c in coefs),
        link=config.model_link,
        xstar_columns=xstar_idx,
    )
    keep = np.ones(raw.s.shape[0], dtype=bool)
    keep[fit_rows] = False
    return model, keep


def _recipe_from_config(config: AnalysisConfig, model: PredictionModel) -> NuisanceRecipe:
    cols = tuple(range(len(config.x_columns)))

    def mk(basis):
        if basis.kind == "linear":
            return DesignSpec(cols)
        return DesignSpec(cols, basis="spline", degree=basis.degree,
                          interior_knots=basis.interior_knots)

    loss = LossFunction(config.loss)
    a_design = mk(config.p_basis) if config.estimator == "aug-alt" else None
    if config.outcome == "binary":
        return NuisanceRecipe(
            outcome="binary", model=model, loss=loss,
            p_design=mk(config.p_basis), g_design=mk(config.g_basis),
            a_design=a_design,
        )
    return NuisanceRecipe(
        outcome="continuous", model=model, loss=loss,
        p_design=mk(config.p_basis), b_design=mk(config.g_basis),
        c_design=mk(config.g_basis), a_design=a_design,
    )


def _resolve_grid(config: AnalysisConfig, table: ObservationTable,
                  recipe: NuisanceRecipe) -> np.ndarray:
    if config.eta_grid is not None:
        return np.asarray(config.eta_grid, dtype=np.float64)
    if config.outcome != "binary":
        raise ConfigError("prevalence anchoring is supported for binary outcomes only")
    anchor = PrevalenceAnchor(
        mu=config.anchor.mu, alpha=config.anchor.alpha,
        multipliers=config.anchor.multipliers,
    )
    nuis = recipe.fit(table)
    return eta_grid_from_prevalence_range(
        table, nuis.g, anchor, config.anchor.step,
        p=None if config.anchor.alpha is None else nuis.p,
    )


@dataclass(frozen=True)
class AnalysisOutput:
    curve: SensitivityCurve
    curve_csv: Path
    report_json: Path
    report: dict


def run_analysis(config: AnalysisConfig) -> AnalysisOutput:
    """Execute the full pipeline and write curve CSV plus JSON report.

    Steps: (optionally) split-and-fit the prediction model, build the
    table, resolve the eta grid (explicit or prevalence-anchored), sweep
    the configured estimator with confidence intervals, emit reports.
    Partial curves are still written; per-point failures land in the
    status column.
    """
    raw = _read_raw(config.data_path, config.x_columns)
    extra = {"masked_target_outcomes": raw.masked_y_count}
    if config.fit_split is not None:
        model, keep = _fit_model_on_split(raw, config)
        extra["fit_split_rows_used"] = int((~keep).sum())
        raw_s, raw_x, raw_y = raw.s[keep], raw.x[keep], raw.y[keep]
    else:
        model = _model_from_config(config)
        raw_s, raw_x, raw_y = raw.s, raw.x, raw.y
    table = build_table(raw_s, raw_x, raw_y, model, LossFunction(config.loss), config.design)

    recipe = _recipe_from_config(config, model)
    grid = _resolve_grid(config, table, recipe)
    resample = None
    if config.resample is not None:
        resample = ResampleConfig(
            method=config.resample.method,
            replicates=config.resample.replicates,
            seed=config.seed,
            stratified=config.resample.stratified,
            level=config.resample.level,
        )
    curve = sensitivity_curve(
        table, recipe, grid, estimator=config.estimator, resample=resample
    )
    extra["model_coefficients_used"] = [float(c) for c in model.coefficients]

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_csv = out_dir / "curve.csv"
    report_json = out_dir / "report.json"
    write_curve_csv(curve, curve_csv)
    report = build_report(config, table, curve, curve_csv.name, extra=extra)
    write_report(report, report_json)
    return AnalysisOutput(curve=curve, curve_csv=curve_csv, report_json=report_json, report=report)
