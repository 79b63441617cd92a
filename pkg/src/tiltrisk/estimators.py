"""Target-population risk estimators under the exponential tilt model.

Non-nested designs estimate the risk among target rows (phi); nested
designs estimate the cohort-wide risk (psi).  Each comes as a plug-in
conditional-loss estimator and an augmented estimator that adds an
inverse-odds-weighted residual correction.  The alternative-
parameterization augmented estimator replaces the inverse-odds factor by
the selection offset a.  Per-observation influence values back the
sandwich standard error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ObservationTable
from .errors import ConfigError, DataError
from .nuisance import NuisanceRecipe, NuisanceSet

_CLIP_TOL = 1e-12


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate at one eta, with optional uncertainty and diagnostics."""

    eta: float
    estimate: float
    method: str
    se: Optional[float] = None
    ci: Optional[tuple] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ci is not None:
            lo, hi = self.ci
            if not (lo <= self.estimate <= hi):
                raise ValueError("confidence interval must contain the estimate")

    def with_interval(self, se: float, ci: tuple) -> "EstimateResult":
        return EstimateResult(
            eta=self.eta, estimate=self.estimate, method=self.method,
            se=se, ci=ci, diagnostics=dict(self.diagnostics),
        )


@dataclass(frozen=True)
class InfluenceValues:
    """Per-row influence contributions around a plugged-in estimate."""

    values: np.ndarray
    mean: float
    plugged: float
    se: float


def _require_design(table: ObservationTable, design: str, op: str) -> None:
    if table.design != design:
        raise DataError(f"{op} requires a {design} table, got {table.design!r}")


def _p_diagnostics(p_vals: np.ndarray, nuis: NuisanceSet) -> tuple:
    # only fitted bundles clip p; hand-built sets (e.g. p = 1 test mode)
    # carry no bounds and report no clipping
    if "p_clip" not in nuis.meta or p_vals.size == 0:
        return 0, False
    lo, hi = nuis.meta["p_clip"]
    at_bound = (p_vals <= lo + _CLIP_TOL) | (p_vals >= hi - _CLIP_TOL)
    return int(at_bound.sum()), bool(at_bound.mean() > 0.5)


def _augmentation(table: ObservationTable, nuis: NuisanceSet, eta: float, b_all):
    """Source-row augmentation terms ((1-p)/p) * (w/c) * (L - b) plus
    weight diagnostics."""
    src = table.s == 1
    x_src = table.x[src]
    w = nuis.tilt_weights(table.y[src], eta)
    c = np.asarray(nuis.c(x_src, eta), dtype=np.float64)
    p = np.asarray(nuis.p(x_src), dtype=np.float64)
    resid = table.loss[src] - b_all[src]
    weight = (1.0 - p) / p * w / c
    clip_count, breached = _p_diagnostics(p, nuis)
    diag = {
        "max_weight": float(weight.max()) if weight.size else 0.0,
        "clip_count": clip_count,
    }
    if breached:
        diag["positivity_warning"] = True
        warnings.warn(
            "p(X) sits at its clipping bound for more than half of the "
            "source rows; inverse-odds weights may be unstable",
            stacklevel=3,
        )
    return weight * resid, diag


def _overshoot(table: ObservationTable, estimate: float) -> float:
    # Brier-type losses live in [0, 1]; augmentation may leave that range
    if not table.has_binary_losses:
        return 0.0
    return float(max(0.0, estimate - 1.0) + max(0.0, -estimate))


# ---------------------------------------------------------------------------
# Non-nested estimators
# ---------------------------------------------------------------------------


def phi_cl(table: ObservationTable, nuis: NuisanceSet, eta: float) -> EstimateResult:
    """Conditional-loss estimator: average of b(X; eta) over target rows."""
    _require_design(table, "non-nested", "phi_cl")
    if table.n0 == 0:
        raise DataError("phi_cl needs target rows")
    tgt = table.s == 0
    b = np.asarray(nuis.b(table.x[tgt], eta), dtype=np.float64)
    est = float(b.mean())
    return EstimateResult(eta=eta, estimate=est, method="cl/non-nested")


def phi_aug(table: ObservationTable, nuis: NuisanceSet, eta: float) -> EstimateResult:
    """Augmented estimator for non-nested designs.

    Adds to the plug-in the inverse-odds-weighted, tilt-weighted residual
    correction over source rows; reduces to phi_cl exactly when p = 1.
    """
    _require_design(table, "non-nested", "phi_aug")
    b_all = np.asarray(nuis.b(table.x, eta), dtype=np.float64)
    aug, diag = _augmentation(table, nuis, eta, b_all)
    est = float((b_all[table.s == 0].sum() + aug.sum()) / table.n0)
    diag["overshoot"] = _overshoot(table, est)
    return EstimateResult(eta=eta, estimate=est, method="aug/non-nested", diagnostics=diag)


def phi_aug_alt(table: ObservationTable, nuis: NuisanceSet, eta: float) -> EstimateResult:
    """Augmented estimator in the selection-offset parameterization,
    with source-row weights e^{a(X; eta) + eta q(y)}."""
    _require_design(table, "non-nested", "phi_aug_alt")
    if nuis.a is None:
        raise ConfigError("phi_aug_alt needs the selection offset a in the nuisance set")
    b_all = np.asarray(nuis.b(table.x, eta), dtype=np.float64)
    src = table.s == 1
    a = np.asarray(nuis.a(table.x[src], eta), dtype=np.float64)
    w = nuis.tilt_weights(table.y[src], eta)
    weight = np.exp(a) * w
    resid = table.loss[src] - b_all[src]
    est = float((b_all[table.s == 0].sum() + (weight * resid).sum()) / table.n0)
    diag = {
        "max_weight": float(weight.max()) if weight.size else 0.0,
        "overshoot": _overshoot(table, est),
    }
    return EstimateResult(eta=eta, estimate=est, method="aug-alt/non-nested", diagnostics=diag)


# ---------------------------------------------------------------------------
# Nested estimators
# ---------------------------------------------------------------------------


def psi_cl(table: ObservationTable, nuis: NuisanceSet, eta: float) -> EstimateResult:
    """Nested conditional-loss estimator: observed losses on source rows,
    b(X; eta) on target rows, averaged over the cohort."""
    _require_design(table, "nested", "psi_cl")
    tgt = table.s == 0
    total = float(table.loss[~tgt].sum())
    if tgt.any():
        total += float(np.asarray(nuis.b(table.x[tgt], eta)).sum())
    return EstimateResult(eta=eta, estimate=total / table.n, method="cl/nested")


def psi_aug(table: ObservationTable, nuis: NuisanceSet, eta: float) -> EstimateResult:
    """Augmented estimator for nested designs."""
    _require_design(table, "nested", "psi_aug")
    b_all = np.asarray(nuis.b(table.x, eta), dtype=np.float64)
    aug, diag = _augmentation(table, nuis, eta, b_all)
    src = table.s == 1
    est = float(
        (table.loss[src].sum() + b_all[~src].sum() + aug.sum()) / table.n
    )
    diag["overshoot"] = _overshoot(table, est)
    return EstimateResult(eta=eta, estimate=est, method="aug/nested", diagnostics=diag)


# ---------------------------------------------------------------------------
# Influence values
# ---------------------------------------------------------------------------


def influence_values_nonnested(
    table: ObservationTable, nuis: NuisanceSet, eta: float, plugged_estimate: float
) -> InfluenceValues:
    """Per-row influence contributions for the non-nested risk.

    With the matching augmented estimate plugged in, the values average to
    zero and their second moment gives the sandwich standard error
    sqrt(mean(values^2) / n).
    """
    _require_design(table, "non-nested", "influence_values_nonnested")
    b_all = np.asarray(nuis.b(table.x, eta), dtype=np.float64)
    aug, _ = _augmentation(table, nuis, eta, b_all)
    src = table.s == 1
    vals = np.zeros(table.n)
    vals[~src] = b_all[~src] - plugged_estimate
    vals[src] = aug
    vals *= table.n / table.n0
    se = float(np.sqrt(np.mean(vals**2) / table.n))
    return InfluenceValues(vals, float(vals.mean()), plugged_estimate, se)


def influence_values_nested(
    table: ObservationTable, nuis: NuisanceSet, eta: float, plugged_estimate: float
) -> InfluenceValues:
    """Per-row influence contributions for the nested (cohort-wide) risk."""
    _require_design(table, "nested", "influence_values_nested")
    b_all = np.asarray(nuis.b(table.x, eta), dtype=np.float64)
    aug, _ = _augmentation(table, nuis, eta, b_all)
    src = table.s == 1
    vals = np.empty(table.n)
    vals[src] = table.loss[src] + aug
    vals[~src] = b_all[~src]
    vals -= plugged_estimate
    se = float(np.sqrt(np.mean(vals**2) / table.n))
    return InfluenceValues(vals, float(vals.mean()), plugged_estimate, se)


# ---------------------------------------------------------------------------
# Sensitivity curves
# ---------------------------------------------------------------------------

ESTIMATOR_NAMES = ("cl", "aug", "aug-alt")


def point_estimator(design: str, name: str):
    """Resolve an estimator function from (design, name)."""
    if name not in ESTIMATOR_NAMES:
        raise ConfigError(f"unknown estimator {name!r}; expected one of {ESTIMATOR_NAMES}")
    if design == "non-nested":
        return {"cl": phi_cl, "aug": phi_aug, "aug-alt": phi_aug_alt}[name]
    if name == "aug-alt":
        raise ConfigError("the selection-offset parameterization is defined for non-nested designs only")
    return {"cl": psi_cl, "aug": psi_aug}[name]


@dataclass(frozen=True)
class CurvePoint:
    eta: float
    result: Optional[EstimateResult]
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.result is not None


@dataclass(frozen=True)
class SensitivityCurve:
    """Ordered (eta, estimate) points plus provenance metadata."""

    points: tuple
    metadata: dict

    @property
    def etas(self) -> np.ndarray:
        return np.array([p.eta for p in self.points])

    @property
    def estimates(self) -> np.ndarray:
        return np.array(
            [p.result.estimate if p.ok else np.nan for p in self.points]
        )

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def sensitivity_curve(
    table: ObservationTable,
    recipe: NuisanceRecipe,
    eta_grid: Sequence[float],
    estimator: str = "aug",
    resample=None,
) -> SensitivityCurve:
    """Sweep the estimator over an eta grid.

    Eta-free nuisances are fitted once; eta-dependent ones refresh per grid
    point (lazily, inside the nuisance set).  Failed points are marked and
    the sweep continues.  When ``resample`` (a ResampleConfig) is given,
    per-point standard errors and Wald intervals come from replicate sweeps
    that refit all nuisances on each resampled table.
    """
    eta_grid = np.asarray(list(eta_grid), dtype=np.float64)
    if eta_grid.size == 0:
        raise ConfigError("eta grid is empty")
    if np.any(np.diff(eta_grid) < 0):
        raise ConfigError("eta grid must be sorted ascending")
    fn = point_estimator(table.design, estimator)

    nuis = recipe.fit(table)
    results = []
    for eta in eta_grid:
        try:
            results.append((float(eta), fn(table, nuis, float(eta)), "ok"))
        except Exception as exc:  # failed grid points are marked, not fatal
            results.append((float(eta), None, f"failed: {exc}"))

    metadata = {
        "design": table.design,
        "estimator": estimator,
        "n": table.n,
        "n1": table.n1,
        "n0": table.n0,
        "eta_grid": [float(e) for e in eta_grid],
    }

    if resample is None:
        points = tuple(CurvePoint(e, r, st) for e, r, st in results)
        return SensitivityCurve(points, metadata)

    from .resampling import (
        bootstrap_matrix,
        jackknife_matrix,
        jackknife_se,
        wald_interval,
    )

    def sweep(t: ObservationTable) -> np.ndarray:
        # refit all nuisances on the resampled table, then sweep the grid;
        # per-point failures become NaN so the other points survive
        out = np.full(eta_grid.size, np.nan)
        try:
            ns = recipe.fit(t)
        except Exception:
            return out
        for i, eta in enumerate(eta_grid):
            try:
                out[i] = fn(t, ns, float(eta)).estimate
            except Exception:
                pass
        return out

    ses: list = [None] * eta_grid.size
    cis: list = [None] * eta_grid.size
    notes: list = [None] * eta_grid.size
    if resample.method == "bootstrap":
        reps, _ = bootstrap_matrix(table, sweep, resample)
        for i in range(eta_grid.size):
            col = reps[:, i]
            ok = np.isfinite(col)
            n_failed = resample.replicates - int(ok.sum())
            if n_failed > 0.2 * resample.replicates:
                notes[i] = f"ci unavailable: {n_failed} of {resample.replicates} replicates failed"
                continue
            ses[i] = float(np.std(col[ok], ddof=1))
            if n_failed:
                notes[i] = f"{n_failed} replicates skipped"
    else:
        loo = jackknife_matrix(table, sweep)
        for i in range(eta_grid.size):
            col = loo[:, i]
            if not np.all(np.isfinite(col)):
                bad = int(np.flatnonzero(~np.isfinite(col))[0])
                notes[i] = f"ci unavailable: leave-one-out estimate failed at row {bad}"
                continue
            ses[i] = jackknife_se(col)
    metadata["resampling"] = {
        "method": resample.method,
        "replicates": resample.replicates if resample.method == "bootstrap" else table.n,
        "seed": resample.seed,
        "stratified": resample.resolve_stratified(table),
        "level": resample.level,
    }

    points = []
    for i, (eta, res, status) in enumerate(results):
        if res is not None and ses[i] is not None:
            res = res.with_interval(
                ses[i], wald_interval(res.estimate, ses[i], resample.level)
            )
        if res is not None and notes[i]:
            res = EstimateResult(
                eta=res.eta, estimate=res.estimate, method=res.method,
                se=res.se, ci=res.ci,
                diagnostics={**res.diagnostics, "resampling_note": notes[i]},
            )
        points.append(CurvePoint(eta, res, status))
    return SensitivityCurve(tuple(points), metadata)
