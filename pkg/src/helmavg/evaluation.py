"""Metrics, baselines and the numerical studies.

Everything here consumes predictors through the estimator interface
(``predict`` on rows of radii), so the finite element pipeline, the
linear baseline and the trained network are interchangeable.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .dataset import Dataset, split
from .errors import PoleAtEndpoint
from .fem import DofRuleWarning, basis_for_mesh
from .geometry import ArcParam, RadialProfile, arc_profile
from .meshing import MeshParams, build_half_mesh
from .pipeline import PipelineConfig, default_config, psi_for_profile
from .spectral import (CONTRIB_TOL, DEFAULT_RANGE, FrequencyRange,
                       psi_objective, uniform_psi_exact)
from .surrogate import TrainConfig, MlpModel, forward, train
from .validation import as_radii_matrix, check_finite_vector

ERROR_THRESHOLD = 0.01


@dataclass(frozen=True)
class EvalReport:
    name: str
    n: int
    mse: float
    pct_abs_err_below_001: float
    model_id: str


def model_fingerprint(predictor) -> str:
    """Stable identity of a predictor's parameters."""
    if hasattr(predictor, "model_"):
        return predictor.model_.fingerprint()
    if hasattr(predictor, "fingerprint"):
        return predictor.fingerprint()
    if hasattr(predictor, "coef_"):
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(predictor.coef_, dtype=np.float64).tobytes())
        digest.update(np.float64(predictor.intercept_).tobytes())
        return digest.hexdigest()[:16]
    return hashlib.sha256(repr(predictor).encode()).hexdigest()[:16]


def evaluate(predictor, dataset: Dataset, threshold: float = ERROR_THRESHOLD,
             name: str = "dataset", allow_boosted: bool = False) -> EvalReport:
    """MSE and the share of rows predicted within ``threshold``.

    Boosted rows are refused by default: extrapolated labels are training
    material, not ground truth.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if dataset.has_boosted and not allow_boosted:
        raise ValueError("dataset contains boosted rows; these must not be used for evaluation")
    X, y = dataset.as_arrays()
    pred = np.asarray(predictor.predict(X), dtype=float)
    err = pred - y
    return EvalReport(
        name=name,
        n=len(y),
        mse=float(np.mean(err ** 2)),
        pct_abs_err_below_001=float(100.0 * np.mean(np.abs(err) < threshold)),
        model_id=model_fingerprint(predictor),
    )


class LinearSurrogate(BaseEstimator, RegressorMixin):
    """Ordinary least squares on the radii with an intercept.

    The minimum-norm solution is used, so degenerate designs (such as
    constant-radius data, where all five columns coincide) still resolve
    to the natural answer.
    """

    def fit(self, X, y):
        X = as_radii_matrix(X)
        y = check_finite_vector(y)
        if len(X) < 6:
            raise ValueError("need at least 6 rows to fit 5 weights and an intercept")
        design = np.column_stack([np.ones(len(X)), X])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = design.T @ (design @ beta - y)
        if np.max(np.abs(resid)) > 1e-8 * max(1.0, float(np.abs(y).max())) * len(y):
            raise ValueError("normal equations failed to certify least-squares optimality")
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = as_radii_matrix(X)
        return X @ self.coef_ + self.intercept_


def fit_linear(data) -> LinearSurrogate:
    """Least-squares baseline fitted to a dataset or (X, y) pair."""
    if hasattr(data, "as_arrays"):
        X, y = data.as_arrays()
    else:
        X, y = data
    return LinearSurrogate().fit(X, y)


# ---------------------------------------------------------------------------
# numerical studies


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    nx: int
    ny: int
    h: float
    psi: float
    error: float


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]
    slope: float
    reference: float
    reference_kind: str  # "exact" or "finest"


def convergence_study(profile: RadialProfile, rng: FrequencyRange, levels: int,
                      base_params: MeshParams, cutoff_factor: float = 10.0) -> ConvergenceStudy:
    """Objective error under uniform mesh refinement, with fitted rate.

    Constant-radius profiles are compared against the closed form; other
    profiles self-converge against the finest level, which therefore does
    not appear as an error row.
    """
    if levels < 2:
        raise ValueError("need at least 2 refinement levels")
    uniform = profile.k == 1

    params = base_params
    values, meshes = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        for _ in range(levels + (0 if uniform else 1)):
            mesh = build_half_mesh(profile, params)
            basis = basis_for_mesh(mesh, cutoff_factor * rng.lambda_max)
            values.append(psi_objective(basis, rng).psi)
            meshes.append((params, mesh.h))
            params = params.refined()

    if uniform:
        reference = uniform_psi_exact(rng)
        kind = "exact"
        err_count = levels
    else:
        reference = values[-1]
        kind = "finest"
        err_count = levels

    rows = []
    for lev in range(err_count):
        (p, h) = meshes[lev]
        rows.append(ConvergenceRow(lev, p.nx, p.ny, h, values[lev], abs(values[lev] - reference)))
    hs = np.array([r.h for r in rows])
    errs = np.array([max(r.error, 1e-300) for r in rows])
    slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return ConvergenceStudy(tuple(rows), slope, reference, kind)


@dataclass(frozen=True)
class SizeCurveRow:
    size: int
    mse_mean: float
    mse_std: float
    pct_mean: float
    pct_std: float


def size_curve(train_data: Dataset, test_data: Dataset, sizes, repeats: int = 10,
               config: TrainConfig = TrainConfig()) -> list[SizeCurveRow]:
    """Mean and spread of test metrics as the training set grows.

    Each size is trained ``repeats`` times with distinct seeds on
    distinct subsamples.
    """
    X_train, y_train = train_data.as_arrays()
    rows = []
    for size in sizes:
        if size > len(X_train):
            raise ValueError(f"size {size} exceeds available training data ({len(X_train)})")
        mses, pcts = [], []
        for rep in range(repeats):
            rng = np.random.default_rng([config.shuffle_seed, size, rep])
            idx = rng.choice(len(X_train), size=size, replace=False)
            cfg = replace(config, init_seed=config.init_seed + 1000 * rep + size,
                          shuffle_seed=config.shuffle_seed + 7919 * rep)
            model, _ = train((X_train[idx], y_train[idx]), cfg)
            report = _report_arrays(model, test_data)
            mses.append(report[0])
            pcts.append(report[1])
        rows.append(SizeCurveRow(
            size=int(size),
            mse_mean=float(np.mean(mses)), mse_std=float(np.std(mses)),
            pct_mean=float(np.mean(pcts)), pct_std=float(np.std(pcts)),
        ))
    return rows


def _report_arrays(model: MlpModel, dataset: Dataset) -> tuple[float, float]:
    X, y = dataset.as_arrays()
    pred = forward(model, X)
    err = pred - y
    return float(np.mean(err ** 2)), float(100.0 * np.mean(np.abs(err) < ERROR_THRESHOLD))


@dataclass(frozen=True)
class ArcRow:
    r_mid: float
    psi_19: float
    psi_5: float
    fem_sq_err: float
    ml_mse: float
    ml_std: float
    flagged: bool


@dataclass(frozen=True)
class ArcStudy:
    rows: tuple[ArcRow, ...]
    mean_fem_sq_err: float
    mean_ml_mse: float
    crossings_19: tuple[float, ...]
    crossings_5: tuple[float, ...]


def arc_study(models: list[MlpModel], n_grid: int = 100,
              config: PipelineConfig | None = None) -> ArcStudy:
    """Out-of-sample accuracy on the one-parameter arc family.

    For each midpoint radius: the squared gap between the objective of
    the 19-point boundary and its 5-point downsample, and the model
    errors against the 19-point value.  Rows where either geometry puts
    an eigenvalue on a range endpoint are flagged and left out of the
    reported means; the grid values of the midpoint radius where the
    spectrum crosses the top of the range are returned for both
    families.
    """
    if config is None:
        config = default_config(19)
    grid = np.linspace(0.1, 0.5, n_grid)
    rows = []
    nearest = {19: [], 5: []}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        for r_mid in grid:
            vals = {}
            flagged = False
            for pts in (19, 5):
                profile = arc_profile(ArcParam(float(r_mid), pts))
                mesh = build_half_mesh(profile, config.mesh_params)
                basis = basis_for_mesh(mesh, config.cutoff)
                contrib = basis.means ** 2 > CONTRIB_TOL
                kap = basis.kappas[contrib]
                nearest[pts].append(float(kap[np.argmin(np.abs(kap - config.frequency_range.lambda_max))])
                                    if len(kap) else math.inf)
                try:
                    vals[pts] = psi_objective(basis, config.frequency_range).psi
                except PoleAtEndpoint:
                    vals[pts] = math.nan
                    flagged = True
            inputs = arc_profile(ArcParam(float(r_mid), 5)).as_network_input()[None, :]
            preds = np.array([forward(m, inputs)[0] for m in models])
            ml_err = (preds - vals[19]) ** 2 if not flagged else np.array([math.nan])
            rows.append(ArcRow(
                r_mid=float(r_mid),
                psi_19=vals[19],
                psi_5=vals[5],
                fem_sq_err=(vals[19] - vals[5]) ** 2 if not flagged else math.nan,
                ml_mse=float(np.mean(ml_err)),
                ml_std=float(np.std(ml_err)) if len(models) > 1 else 0.0,
                flagged=flagged,
            ))

    crossings = {}
    lmax = config.frequency_range.lambda_max
    for pts in (19, 5):
        marks = []
        sides = np.sign(np.array(nearest[pts]) - lmax)
        for i in range(1, len(sides)):
            if sides[i] != sides[i - 1]:
                marks.append(float(grid[i]))
        crossings[pts] = tuple(marks)

    ok = [r for r in rows if not r.flagged]
    return ArcStudy(
        rows=tuple(rows),
        mean_fem_sq_err=float(np.mean([r.fem_sq_err for r in ok])),
        mean_ml_mse=float(np.mean([r.ml_mse for r in ok])),
        crossings_19=crossings[19],
        crossings_5=crossings[5],
    )


@dataclass(frozen=True)
class GridRow:
    hidden_layers: int
    layer_size: int
    val_split_pct: int
    mse_uniform: float
    mse_random5: float


def hyper_grid(train_data: Dataset, uniform_test: Dataset, random_test: Dataset,
               layers=(2, 3, 4), widths=(64, 128, 192), val_splits=(10, 20, 30),
               config: TrainConfig = TrainConfig()) -> list[GridRow]:
    """One training per hyperparameter cell; test MSE on both families."""
    X, y = train_data.as_arrays()
    rows = []
    for n_layers in layers:
        for width in widths:
            for split_pct in val_splits:
                cfg = replace(config, hidden_layers=n_layers, hidden_units=width,
                              val_fraction=split_pct / 100.0)
                model, _ = train((X, y), cfg)
                rows.append(GridRow(
                    hidden_layers=n_layers,
                    layer_size=width,
                    val_split_pct=split_pct,
                    mse_uniform=_report_arrays(model, uniform_test)[0],
                    mse_random5=_report_arrays(model, random_test)[0],
                ))
    return rows


@dataclass(frozen=True)
class AffineGridRow:
    r0: float
    r1: float
    psi: float
    min_endpoint_gap: float
    model_sq_err: float
    flagged: bool


def affine_radius_grid(n: int = 10, rng: FrequencyRange = DEFAULT_RANGE,
                       config: PipelineConfig | None = None,
                       model: MlpModel | None = None) -> list[AffineGridRow]:
    """Objective surface over the two-parameter family of affine radii.

    Rows carry the distance of the spectrum to the range endpoints, so
    the near-singular region is visible in the emitted data.
    """
    if n < 10:
        raise ValueError("need a grid of at least 10 points per axis")
    if config is None:
        config = default_config(2)
    grid = np.linspace(0.1, 0.5, n)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        for r0 in grid:
            for r1 in grid:
                profile = RadialProfile((float(r0), float(r1)))
                try:
                    result = psi_for_profile(profile, config)
                    psi, gap, flagged = result.psi, result.min_endpoint_gap, False
                except PoleAtEndpoint as exc:
                    psi, gap, flagged = math.nan, exc.gap, True
                sq_err = math.nan
                if model is not None and not flagged:
                    pred = forward(model, profile.as_network_input()[None, :])[0]
                    sq_err = (pred - psi) ** 2
                rows.append(AffineGridRow(float(r0), float(r1), psi, gap, sq_err, flagged))
    return rows
