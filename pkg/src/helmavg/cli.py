"""Command line front end.

One subcommand per pipeline stage.  Results go to stdout, logs and the
provenance record go to stderr, and every run that produces a file also
writes a ``<file>.run.json`` sidecar with the effective configuration.
Exit codes: 0 success, 1 usage error, 2 numeric error (pole at an
endpoint, solver failure, degenerate mapped mesh).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .dataset import generate, read_csv, stats as dataset_stats, write_csv
from .errors import DegenerateMeshError, EigenSolverError, HelmavgError, PoleAtEndpoint
from .evaluation import (affine_radius_grid, arc_study, convergence_study,
                         evaluate, fit_linear, hyper_grid, size_curve)
from .fem import spectrum_to_csv
from .geometry import RadialProfile, domain_from_profile
from .meshing import MeshParams, build_mesh, mesh_to_csv, params_for_profile
from .pipeline import PipelineConfig, basis_for_profile, default_config, psi_for_profile
from .shape import (AffineSolenoidalField, VectorField, axial_bump_field,
                    fd_shape_derivative, psi_shape_derivative)
from .spectral import (FrequencyRange, mean_response, psi_objective,
                       trapezoid_reference, uniform_psi_exact)
from .surrogate import TrainConfig, load as load_model, predict as model_predict, save as save_model, train as train_model


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _parse_profile(text: str) -> RadialProfile:
    try:
        radii = tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise ValueError(f"cannot parse profile {text!r}: {exc}") from exc
    return RadialProfile(radii)


def _parse_field(text: str) -> VectorField:
    parts = text.split()
    if not parts:
        raise ValueError("empty field specification")
    kind, kv = parts[0], {}
    for part in parts[1:]:
        key, _, val = part.partition("=")
        if not val:
            raise ValueError(f"field parameter {part!r} is not key=value")
        kv[key] = float(val)
    if kind == "affine":
        a22 = kv.pop("a22", None)
        fld = AffineSolenoidalField(**kv)
        if a22 is not None and a22 != -fld.a11:
            raise ValueError("affine field must be trace free: a22 = -a11")
        return fld
    if kind == "translation":
        return AffineSolenoidalField(b1=kv.get("b1", 0.0), b2=kv.get("b2", 0.0))
    if kind == "bump":
        return axial_bump_field(kv.get("amp", 0.01))
    raise ValueError(f"unknown field kind {kind!r} (expected affine, translation or bump)")


def _pipeline_config(args, k: int) -> PipelineConfig:
    base = default_config(k, FrequencyRange(args.lmin, args.lmax))
    nx = getattr(args, "nx", None) or base.mesh_params.nx
    ny = getattr(args, "ny", None) or base.mesh_params.ny
    cutoff = getattr(args, "cutoff_factor", None) or base.cutoff_factor
    full = bool(getattr(args, "full_domain", False))
    return PipelineConfig(
        frequency_range=FrequencyRange(args.lmin, args.lmax),
        mesh_params=MeshParams(nx, ny),
        cutoff_factor=cutoff,
        use_symmetry=not full,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        s0=args.s0, s_end=args.s_end, decay_steps=args.decay_steps,
        batch_size=args.batch_size, max_epochs=args.max_epochs,
        patience=args.patience, min_delta=args.min_delta,
        val_fraction=args.val_fraction, init_seed=args.init_seed,
        shuffle_seed=args.shuffle_seed, hidden_layers=args.hidden_layers,
        hidden_units=args.hidden_units,
    )


def _add_train_flags(p):
    p.add_argument("--hidden-layers", type=int, default=3)
    p.add_argument("--hidden-units", type=int, default=128)
    p.add_argument("--s0", type=float, default=1e-3)
    p.add_argument("--s-end", type=float, default=1e-4)
    p.add_argument("--decay-steps", type=int, default=10_000)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=500)
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--min-delta", type=float, default=1e-5)
    p.add_argument("--val-fraction", type=float, default=0.2)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--shuffle-seed", type=int, default=1)


def _add_range_flags(p):
    p.add_argument("--lmin", type=float, default=0.0)
    p.add_argument("--lmax", type=float, default=60.0)


def _add_mesh_flags(p):
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--cutoff-factor", type=float, default=None)
    p.add_argument("--full-domain", action="store_true")


def _write_table(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _provenance(args, extra=None) -> None:
    record = {
        "tool": "helmavg",
        "version": __version__,
        "subcommand": args.subcommand,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in ("subcommand", "func")},
    }
    if extra:
        record["effective"] = extra
    line = json.dumps(record, sort_keys=True, default=str)
    sys.stderr.write(line + "\n")
    for attr in ("out", "out_model", "out_vertices"):
        path = getattr(args, attr, None)
        if path:
            with open(str(path) + ".run.json", "w") as f:
                f.write(line + "\n")
            break


# ---------------------------------------------------------------------------
# handlers


def _cmd_psi(args):
    profile = _parse_profile(args.profile)
    config = _pipeline_config(args, profile.k)
    _provenance(args, {"mesh": [config.mesh_params.nx, config.mesh_params.ny],
                       "cutoff": config.cutoff, "symmetry": config.use_symmetry})
    if args.sweep_lambda:
        basis, _ = basis_for_profile(profile, config)
        lams = np.linspace(args.lmin, args.lmax, args.sweep_lambda)
        rows = []
        for lam in lams:
            try:
                rows.append((float(lam), mean_response(basis, float(lam)), 0))
            except PoleAtEndpoint:
                rows.append((float(lam), float("nan"), 1))
        _write_table(args.out, ["lambda", "mean_response", "flagged"], rows)
        return 0
    if args.sweep_lmax:
        basis, _ = basis_for_profile(profile, config)
        rows = []
        for lmax in np.linspace(args.lmin + 1e-3, args.lmax, args.sweep_lmax):
            try:
                res = psi_objective(basis, FrequencyRange(args.lmin, float(lmax)))
                rows.append((float(lmax), res.psi, 0))
            except PoleAtEndpoint:
                rows.append((float(lmax), float("nan"), 1))
        _write_table(args.out, ["lambda_max", "psi", "flagged"], rows)
        return 0
    result = psi_for_profile(profile, config)
    print(repr(result.psi))
    return 0


def _cmd_psi_uniform(args):
    _provenance(args)
    if args.sweep_lmax:
        rows = []
        for lmax in np.linspace(args.lmin + 1e-3, args.lmax, args.sweep_lmax):
            try:
                rows.append((float(lmax), uniform_psi_exact(FrequencyRange(args.lmin, float(lmax))), 0))
            except PoleAtEndpoint:
                rows.append((float(lmax), float("nan"), 1))
        _write_table(args.out, ["lambda_max", "psi", "flagged"], rows)
        return 0
    if args.trapezoid:
        print(repr(trapezoid_reference(FrequencyRange(args.lmin, args.lmax), args.trapezoid)))
        return 0
    print(repr(uniform_psi_exact(FrequencyRange(args.lmin, args.lmax))))
    return 0


def _cmd_eigen(args):
    profile = _parse_profile(args.profile)
    config = _pipeline_config(args, profile.k)
    basis, _ = basis_for_profile(profile, config)
    _provenance(args, {"dof": basis.dof, "modes": basis.n_modes})
    if args.out:
        spectrum_to_csv(basis, args.out)
    else:
        _write_table(None, ["kappa", "mean"],
                     [(float(k), float(m)) for k, m in zip(basis.kappas, basis.means)])
    return 0


def _cmd_mesh(args):
    profile = _parse_profile(args.profile)
    params = MeshParams(args.nx, args.ny) if args.nx and args.ny else params_for_profile(profile)
    mesh = build_mesh(domain_from_profile(profile), params)
    _provenance(args, {"vertices": mesh.n_vertices, "triangles": mesh.n_triangles, "h": mesh.h})
    mesh_to_csv(mesh, args.out_vertices, args.out_triangles)
    return 0


def _cmd_gen_data(args):
    config = _pipeline_config(args, args.k)
    dataset = generate(args.seed, args.count, args.k, config, workers=args.workers)
    _provenance(args, {"mesh": [config.mesh_params.nx, config.mesh_params.ny],
                       "rejections": dataset.manifest.rejection_count})
    write_csv(dataset, args.out)
    return 0


def _cmd_stats(args):
    _provenance(args)
    print(json.dumps(dataset_stats(read_csv(args.data)), sort_keys=True))
    return 0


def _cmd_train(args):
    data = read_csv(args.data)
    config = _train_config(args)
    model, history = train_model(data, config)
    _provenance(args, {"epochs": history.n_epochs, "best_epoch": history.best_epoch,
                       "stopped_early": history.stopped_early})
    save_model(model, args.out_model)
    if args.history_csv:
        _write_table(args.history_csv, ["epoch", "train_mse", "val_mse"],
                     [(i, t, v) for i, (t, v) in enumerate(zip(history.train_mse, history.val_mse))])
    print(json.dumps({"best_epoch": history.best_epoch,
                      "best_val_mse": min(history.val_mse),
                      "epochs": history.n_epochs,
                      "stopped_early": history.stopped_early}, sort_keys=True))
    return 0


def _cmd_predict(args):
    model = load_model(args.model)
    profile = _parse_profile(args.profile)
    _provenance(args)
    print(repr(float(model_predict(model, profile.as_network_input()[None, :])[0])))
    return 0


def _cmd_eval(args):
    model = load_model(args.model)
    data = read_csv(args.data)

    class _Wrapper:
        def __init__(self, m):
            self.model_ = m

        def predict(self, X):
            return model_predict(self.model_, X)

    report = evaluate(_Wrapper(model), data, threshold=args.threshold, name=args.data)
    _provenance(args)
    print(json.dumps(report.__dict__, sort_keys=True))
    return 0


def _cmd_baseline(args):
    train_data = read_csv(args.train_data)
    test_data = read_csv(args.test_data)
    linear = fit_linear(train_data)
    report = evaluate(linear, test_data, threshold=args.threshold, name=args.test_data)
    _provenance(args, {"coef": list(map(float, linear.coef_)), "intercept": linear.intercept_})
    print(json.dumps(report.__dict__, sort_keys=True))
    return 0


def _cmd_shape_deriv(args):
    profile = _parse_profile(args.profile)
    field = _parse_field(args.field)
    rng = FrequencyRange(args.lmin, args.lmax)
    config = _pipeline_config(args, profile.k)
    full = PipelineConfig(rng, config.mesh_params, config.cutoff_factor, use_symmetry=False)
    basis, mesh = basis_for_profile(profile, full)
    analytic = psi_shape_derivative(basis, mesh, field, rng, strict_mode=args.strict).psi_prime
    rows = []
    for t in [float(x) for x in args.t_sweep.split(",")]:
        fd = fd_shape_derivative(mesh, field, rng, t, cutoff=full.cutoff)
        rows.append((t, fd, analytic, abs(fd - analytic)))
    _provenance(args, {"modes": basis.n_modes})
    _write_table(args.out, ["t", "fd", "analytic", "abs_diff"], rows)
    return 0


def _cmd_convergence(args):
    if args.profile:
        profile = _parse_profile(args.profile)
    else:
        profile = RadialProfile((args.uniform_radius,))
    study = convergence_study(
        profile, FrequencyRange(args.lmin, args.lmax), args.levels,
        MeshParams(args.base_nx, args.base_ny), cutoff_factor=args.cutoff_factor,
    )
    _provenance(args, {"slope": study.slope, "reference": study.reference_kind})
    _write_table(args.out, ["level", "nx", "ny", "h", "psi", "error"],
                 [(r.level, r.nx, r.ny, r.h, r.psi, r.error) for r in study.rows])
    print(json.dumps({"slope": study.slope, "reference": study.reference,
                      "reference_kind": study.reference_kind}, sort_keys=True))
    return 0


def _cmd_size_curve(args):
    train_data = read_csv(args.train_data)
    test_data = read_csv(args.test_data)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = size_curve(train_data, test_data, sizes, repeats=args.repeats,
                      config=_train_config(args))
    _provenance(args)
    _write_table(args.out, ["size", "mse_mean", "mse_std", "pct_mean", "pct_std"],
                 [(r.size, r.mse_mean, r.mse_std, r.pct_mean, r.pct_std) for r in rows])
    return 0


def _cmd_arc_study(args):
    models = [load_model(p) for p in args.models.split(",")]
    config = default_config(19)
    if args.nx and args.ny:
        config = PipelineConfig(config.frequency_range, MeshParams(args.nx, args.ny),
                                config.cutoff_factor, config.use_symmetry)
    study = arc_study(models, n_grid=args.grid_n, config=config)
    _provenance(args, {"mean_fem_sq_err": study.mean_fem_sq_err,
                       "mean_ml_mse": study.mean_ml_mse,
                       "crossings_19": list(study.crossings_19),
                       "crossings_5": list(study.crossings_5)})
    _write_table(args.out, ["r_mid", "fem_sq_err", "ml_mse", "ml_std", "flagged"],
                 [(r.r_mid, r.fem_sq_err, r.ml_mse, r.ml_std, r.flagged) for r in study.rows])
    return 0


def _cmd_grid(args):
    rows = hyper_grid(
        read_csv(args.train_data), read_csv(args.uniform_test), read_csv(args.random_test),
        config=_train_config(args),
    )
    _provenance(args)
    _write_table(args.out, ["hidden_layers", "layer_size", "val_split_pct", "mse_uniform", "mse_random5"],
                 [(r.hidden_layers, r.layer_size, r.val_split_pct, r.mse_uniform, r.mse_random5)
                  for r in rows])
    return 0


def _cmd_affine_grid(args):
    model = load_model(args.model) if args.model else None
    rows = affine_radius_grid(n=args.n, model=model)
    _provenance(args)
    _write_table(args.out, ["r0", "r1", "psi", "min_endpoint_gap", "model_sq_err", "flagged"],
                 [(r.r0, r.r1, r.psi, r.min_endpoint_gap, r.model_sq_err, r.flagged) for r in rows])
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="helmavg", description=__doc__)
    parser.add_argument("--config", default=None, help="JSON file with default parameter values")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("psi", help="averaged response of one profile via finite elements")
    p.add_argument("--profile", required=True)
    _add_range_flags(p)
    _add_mesh_flags(p)
    p.add_argument("--sweep-lambda", type=int, default=0, help="emit (lambda, mean response) rows")
    p.add_argument("--sweep-lmax", type=int, default=0, help="emit (lambda_max, psi) rows")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_psi)

    p = sub.add_parser("psi-uniform", help="closed-form objective of uniform cylinders")
    _add_range_flags(p)
    p.add_argument("--sweep-lmax", type=int, default=0)
    p.add_argument("--trapezoid", type=int, default=0,
                   help="use the naive trapezoid average with this many steps instead")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_psi_uniform)

    p = sub.add_parser("eigen", help="discrete spectrum and mode means")
    p.add_argument("--profile", required=True)
    _add_range_flags(p)
    _add_mesh_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("mesh", help="dump a triangulation as CSV")
    p.add_argument("--profile", required=True)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--out-vertices", required=True)
    p.add_argument("--out-triangles", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("gen-data", help="generate a labelled dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("HELMAVG_WORKERS", os.cpu_count() or 1)))
    _add_range_flags(p)
    _add_mesh_flags(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("stats", help="label statistics of a dataset")
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("train", help="train the dense network surrogate")
    p.add_argument("--data", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--history-csv", default=None)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="evaluate a saved model on one profile")
    p.add_argument("--model", required=True)
    p.add_argument("--profile", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="model metrics on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=0.01)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="least-squares baseline metrics")
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--threshold", type=float, default=0.01)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("shape-deriv", help="shape derivative against finite differences")
    p.add_argument("--profile", required=True)
    p.add_argument("--field", required=True,
                   help='e.g. "affine a11=1", "translation b1=1", "bump amp=0.02"')
    p.add_argument("--t-sweep", default="1e-2,1e-3")
    p.add_argument("--strict", action="store_true")
    _add_range_flags(p)
    _add_mesh_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_shape_deriv)

    p = sub.add_parser("convergence", help="objective error under mesh refinement")
    p.add_argument("--profile", default=None)
    p.add_argument("--uniform-radius", type=float, default=0.5)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--base-nx", type=int, default=24)
    p.add_argument("--base-ny", type=int, default=12)
    p.add_argument("--cutoff-factor", type=float, default=10.0)
    _add_range_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("size-curve", help="test metrics against training set size")
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--sizes", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--out", default=None)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_size_curve)

    p = sub.add_parser("arc-study", help="out-of-sample accuracy on the arc family")
    p.add_argument("--models", required=True, help="comma separated model checkpoints")
    p.add_argument("--grid-n", type=int, default=100)
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_arc_study)

    p = sub.add_parser("grid", help="hyperparameter grid (27 cells)")
    p.add_argument("--train-data", required=True)
    p.add_argument("--uniform-test", required=True)
    p.add_argument("--random-test", required=True)
    p.add_argument("--out", default=None)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("affine-grid", help="objective surface over affine radii")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--model", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_affine_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.config:
        with open(args.config) as f:
            overrides = json.load(f)
        raw = argv if argv is not None else sys.argv[1:]
        for key, value in overrides.items():
            flag = "--" + key.replace("_", "-")
            if hasattr(args, key) and flag not in raw:
                setattr(args, key, value)

    try:
        return args.func(args)
    except (PoleAtEndpoint, EigenSolverError, DegenerateMeshError, FloatingPointError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    except (ValueError, OSError, HelmavgError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
