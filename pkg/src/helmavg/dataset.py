"""Labelled datasets of (radii, objective) pairs.

Each sample owns a deterministic seed derived from the master seed and
its index, so any row can be regenerated in isolation and the dataset is
identical for any worker count.  Geometries whose spectrum collides with
a range endpoint are rejected and redrawn from the sample's own retry
stream; the rejection count lands in the manifest.
"""

from __future__ import annotations

import json
import multiprocessing
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PoleAtEndpoint
from .fem import DofRuleWarning
from .geometry import (NETWORK_INPUTS, R_MAX, R_MIN, RadialProfile,
                       SAMPLED_BREAKPOINTS, sample_profile, sample_seed)
from .meshing import MIN_ANGLE_DEG
from .pipeline import (PipelineConfig, basis_for_profile, default_config,
                       mesh_for_profile, psi_for_profile,
                       shape_derivative_for_profile)
from .shape import VectorField
from .spectral import GAP_TOL

#: consecutive rejections per index before generation aborts
MAX_ATTEMPTS = 100

#: largest extrapolation step accepted for boosted labels
BOOST_T_MAX = 0.02

CSV_HEADER = ["r1", "r2", "r3", "r4", "r5", "psi"]


@dataclass(frozen=True)
class Sample:
    radii: tuple[float, ...]
    psi: float
    source: str = "fem"
    sample_seed: int = -1

    def __post_init__(self):
        if len(self.radii) != NETWORK_INPUTS:
            raise ValueError(f"samples store {NETWORK_INPUTS} radii")
        if self.source not in ("fem", "boosted"):
            raise ValueError(f"unknown source {self.source!r}")
        if not np.isfinite(self.psi):
            raise ValueError("psi must be finite")


@dataclass(frozen=True)
class DatasetManifest:
    master_seed: int
    count: int
    k_points: int
    lambda_min: float
    lambda_max: float
    mesh_nx: int
    mesh_ny: int
    cutoff_factor: float
    gap_tol: float
    rejection_count: int
    stats: dict
    dof_rule_satisfied: bool = True
    use_symmetry: bool = True

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    manifest: DatasetManifest | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.samples)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.array([s.radii for s in self.samples], dtype=float).reshape(len(self.samples), NETWORK_INPUTS)
        y = np.array([s.psi for s in self.samples], dtype=float)
        return X, y

    def take(self, indices) -> "Dataset":
        return Dataset(tuple(self.samples[int(i)] for i in indices))

    def seeds(self) -> set[int]:
        return {s.sample_seed for s in self.samples}

    @property
    def has_boosted(self) -> bool:
        return any(s.source == "boosted" for s in self.samples)


def _label_profile(profile: RadialProfile, config: PipelineConfig) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        return psi_for_profile(profile, config).psi


def _generate_one(args) -> tuple[Sample, int]:
    master_seed, index, k, config = args
    rejections = 0
    for attempt in range(MAX_ATTEMPTS + 1):
        seed = sample_seed(master_seed, index, attempt)
        profile = sample_profile(seed, k)
        mesh = mesh_for_profile(profile, config)
        angle = mesh.min_angle_deg()
        if angle < MIN_ANGLE_DEG:
            raise AssertionError(
                f"dataset mesh quality {angle:.2f} deg below {MIN_ANGLE_DEG} for sample {index}"
            )
        try:
            psi = _label_profile(profile, config)
        except PoleAtEndpoint:
            rejections += 1
            continue
        return Sample(tuple(profile.as_network_input()), psi, "fem", seed), rejections
    raise RuntimeError(
        f"sample {index} rejected {MAX_ATTEMPTS} times in a row "
        f"(master_seed={master_seed}, k={k}); the endpoint gap tolerance needs revisiting"
    )


def generate(master_seed: int, n: int, k: int, config: PipelineConfig | None = None,
             workers: int = 1) -> Dataset:
    """n accepted samples with k i.i.d. uniform radii each.

    Deterministic for a fixed master seed regardless of ``workers``:
    results are merged in index order and every sample's pipeline depends
    only on its own seeds.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if k not in SAMPLED_BREAKPOINTS:
        raise ValueError(f"k must be one of {SAMPLED_BREAKPOINTS}")
    if config is None:
        config = default_config(k)

    jobs = [(master_seed, i, k, config) for i in range(n)]
    if workers > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            results = pool.map(_generate_one, jobs, chunksize=max(1, n // (8 * workers)))
    else:
        results = [_generate_one(job) for job in jobs]

    samples = tuple(r[0] for r in results)
    rejection_count = sum(r[1] for r in results)

    psis = np.array([s.psi for s in samples])
    # dof rule check against the largest eigenvalue the cutoff admits
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        probe_basis, _ = basis_for_profile(sample_profile(sample_seed(master_seed, 0, 0), k), config)
    dof_ok = probe_basis.dof >= 10.0 * (probe_basis.kappas[-1] if probe_basis.n_modes else 0.0)

    manifest = DatasetManifest(
        master_seed=int(master_seed),
        count=n,
        k_points=k,
        lambda_min=config.frequency_range.lambda_min,
        lambda_max=config.frequency_range.lambda_max,
        mesh_nx=config.mesh_params.nx,
        mesh_ny=config.mesh_params.ny,
        cutoff_factor=config.cutoff_factor,
        gap_tol=GAP_TOL,
        rejection_count=rejection_count,
        stats=_stats_of(psis),
        dof_rule_satisfied=bool(dof_ok),
        use_symmetry=config.use_symmetry,
    )
    return Dataset(samples, manifest)


def _stats_of(psis: np.ndarray) -> dict:
    return {
        "mean": float(psis.mean()),
        "variance": float(psis.var()),
        "min": float(psis.min()),
        "max": float(psis.max()),
    }


def stats(dataset: Dataset) -> dict:
    """Population statistics of the label column."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    _, y = dataset.as_arrays()
    return _stats_of(y)


def split(dataset: Dataset, val_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive shuffle split into (train, val)."""
    if not (0.0 < val_fraction < 1.0):
        raise ValueError("val_fraction must lie strictly between 0 and 1")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction))
    return dataset.take(perm[n_val:]), dataset.take(perm[:n_val])


def _mapped_radii(profile: RadialProfile, field: VectorField, t: float) -> np.ndarray | None:
    """Radii of the transported boundary on the 5-point grid, or None if
    the mapped boundary left the admissible family."""
    xs = np.linspace(0.0, 1.0, 201)
    boundary = np.column_stack([xs, profile.evaluate(xs)])
    mapped = boundary + t * field(boundary)
    x_new, r_new = mapped[:, 0], mapped[:, 1]
    if abs(x_new[0]) > 1e-9 or abs(x_new[-1] - 1.0) > 1e-9:
        raise ValueError("boost fields must fix the end planes x1 = 0 and x1 = 1")
    if np.any(np.diff(x_new) <= 0.0):
        return None
    radii = np.interp(np.linspace(0.0, 1.0, NETWORK_INPUTS), x_new, r_new)
    if radii.min() < R_MIN or radii.max() > R_MAX:
        return None
    return radii


def boost(dataset: Dataset, field: VectorField, t: float,
          config: PipelineConfig | None = None) -> tuple[Dataset, int]:
    """Append first-order extrapolated samples along a solenoidal field.

    New rows carry the transported geometry and the label psi + t psi'.
    Samples whose mapped radii leave [0.1, 0.5] are skipped; the skip
    count is returned.  Boosted rows keep their origin seed and are
    tagged so they can be kept out of test sets.
    """
    if abs(t) > BOOST_T_MAX:
        raise ValueError(f"|t| must not exceed {BOOST_T_MAX}")
    if config is None:
        config = default_config(NETWORK_INPUTS)
    skipped = 0
    boosted: list[Sample] = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DofRuleWarning)
        for s in dataset.samples:
            profile = RadialProfile(s.radii)
            if t == 0.0:
                boosted.append(Sample(s.radii, s.psi, "boosted", s.sample_seed))
                continue
            radii = _mapped_radii(profile, field, t)
            if radii is None:
                skipped += 1
                continue
            deriv = shape_derivative_for_profile(profile, field, config).psi_prime
            boosted.append(Sample(tuple(radii), s.psi + t * deriv, "boosted", s.sample_seed))
    return Dataset(dataset.samples + tuple(boosted), None), skipped


def write_csv(dataset: Dataset, path) -> None:
    """Write rows at full precision plus a manifest sidecar.

    The sidecar (<path>.manifest.json) also stores per-row seeds and
    sources so a read round-trips losslessly.
    """
    lines = [",".join(CSV_HEADER)]
    for s in dataset.samples:
        lines.append(",".join([repr(float(r)) for r in s.radii] + [repr(float(s.psi))]))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")

    sidecar = {
        "manifest": asdict(dataset.manifest) if dataset.manifest else None,
        "sample_seeds": [s.sample_seed for s in dataset.samples],
        "sources": [s.source for s in dataset.samples],
    }
    with open(str(path) + ".manifest.json", "w") as f:
        json.dump(sidecar, f, sort_keys=True, indent=1)


def read_csv(path) -> Dataset:
    """Inverse of :func:`write_csv`; plain CSVs load with sentinel seeds."""
    import os

    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    if [h.strip() for h in lines[0].split(",")] != CSV_HEADER:
        raise ValueError(f"{path}:1: expected header {','.join(CSV_HEADER)!r}, got {lines[0]!r}")

    seeds: list[int] | None = None
    sources: list[str] | None = None
    manifest = None
    sidecar_path = str(path) + ".manifest.json"
    if os.path.exists(sidecar_path):
        with open(sidecar_path) as f:
            sidecar = json.load(f)
        seeds = sidecar.get("sample_seeds")
        sources = sidecar.get("sources")
        if sidecar.get("manifest"):
            manifest = DatasetManifest(**sidecar["manifest"])

    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_HEADER):
            raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(parts)}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from exc
        i = len(samples)
        samples.append(Sample(
            radii=tuple(values[:NETWORK_INPUTS]),
            psi=values[NETWORK_INPUTS],
            source=sources[i] if sources else "fem",
            sample_seed=seeds[i] if seeds else -1,
        ))
    return Dataset(tuple(samples), manifest)
