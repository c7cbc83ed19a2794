"""Polygonal cylinder geometry.

A cylinder is the symmetric planar domain

    Omega = {(x1, x2) : x1 in (0, 1), |x2| < a(x1)},

where the radius function ``a`` is piecewise linear between uniformly
spaced breakpoints on [0, 1] and bounded between ``R_MIN`` and ``R_MAX``.
The loaded boundary part (unit pressure) is the segment on {x1 = 0}; the
rest of the boundary is sound hard.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

R_MIN = 0.1
R_MAX = 0.5

#: breakpoint counts the toolkit supports end to end
ALLOWED_BREAKPOINTS = (1, 2, 3, 5, 19)
#: breakpoint counts used for random sampling
SAMPLED_BREAKPOINTS = (1, 2, 3, 5)

#: number of radii fed to the surrogate network
NETWORK_INPUTS = 5


def _validate_radii(radii: tuple[float, ...]) -> None:
    k = len(radii)
    if k not in ALLOWED_BREAKPOINTS:
        raise ValueError(f"breakpoint count must be one of {ALLOWED_BREAKPOINTS}, got {k}")
    for r in radii:
        if not np.isfinite(r) or not (R_MIN <= r <= R_MAX):
            raise ValueError(f"radius {r!r} outside [{R_MIN}, {R_MAX}]")


@dataclass(frozen=True)
class RadialProfile:
    """Radius samples on the uniform grid x1 = j/(k-1), j = 0..k-1.

    For ``k == 1`` the radius is constant on [0, 1].
    """

    radii: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        _validate_radii(self.radii)

    @property
    def k(self) -> int:
        return len(self.radii)

    def breakpoints(self) -> np.ndarray:
        if self.k == 1:
            return np.array([0.0, 1.0])
        return np.linspace(0.0, 1.0, self.k)

    def evaluate(self, x) -> np.ndarray:
        """Piecewise-linear radius a(x1) for x1 in [0, 1]."""
        x = np.asarray(x, dtype=float)
        if self.k == 1:
            return np.full_like(x, self.radii[0])
        return np.interp(x, self.breakpoints(), np.asarray(self.radii))

    def resample(self, k_new: int) -> "RadialProfile":
        """Re-express the same radius function on a nested uniform grid.

        Only grids that contain the original breakpoints are allowed, so
        the returned profile describes the identical polygon.
        """
        if k_new not in ALLOWED_BREAKPOINTS:
            raise ValueError(f"target breakpoint count must be one of {ALLOWED_BREAKPOINTS}")
        if self.k > 1 and (k_new - 1) % (self.k - 1) != 0:
            raise ValueError(f"grid with {k_new} points does not contain the {self.k}-point grid")
        xs = np.linspace(0.0, 1.0, k_new)
        return RadialProfile(tuple(self.evaluate(xs)))

    def as_network_input(self) -> np.ndarray:
        """The 5 radii the surrogate consumes (k < 5 broadcast exactly)."""
        return np.asarray(self.resample(NETWORK_INPUTS).radii)


@dataclass(frozen=True)
class ArcParam:
    """One-parameter family of convex symmetric cylinders.

    The boundary follows the circular arc through (0, 0.1),
    (1/2, mid_radius) and (1, 0.1), sampled at ``sample_points`` uniform
    grid points.  ``mid_radius == 0.1`` degenerates to the constant line.
    """

    mid_radius: float
    sample_points: int = 19

    def __post_init__(self):
        if not (R_MIN <= self.mid_radius <= R_MAX):
            raise ValueError(f"mid_radius must lie in [{R_MIN}, {R_MAX}]")
        if self.sample_points not in (5, 19):
            raise ValueError("sample_points must be 5 or 19")


@dataclass(frozen=True)
class CylinderDomain:
    """Closed polygonal model of a cylinder.

    ``polygon`` lists the boundary vertices counterclockwise: the lower
    boundary left to right, then the upper boundary right to left.  Edges
    are consecutive vertex index pairs, the closing edge being the loaded
    segment on {x1 = 0}.
    """

    profile: RadialProfile
    polygon: tuple[tuple[float, float], ...] = field(repr=False)
    gamma_d: tuple[tuple[int, int], ...]
    gamma_n: tuple[tuple[int, int], ...]


def sample_profile(rng_seed: int, k: int) -> RadialProfile:
    """Draw k radii i.i.d. uniform on [R_MIN, R_MAX].

    The generator is a seeded PCG64; the same seed always reproduces the
    same profile.
    """
    if k not in SAMPLED_BREAKPOINTS:
        raise ValueError(f"k must be one of {SAMPLED_BREAKPOINTS}, got {k}")
    rng = np.random.default_rng(rng_seed)
    return RadialProfile(tuple(rng.uniform(R_MIN, R_MAX, size=k)))


def sample_seed(master_seed: int, index: int, attempt: int = 0) -> int:
    """Stable per-sample seed so individual samples replay in isolation."""
    ss = np.random.SeedSequence([int(master_seed), int(index), int(attempt)])
    return int(ss.generate_state(1, np.uint64)[0])


def domain_from_profile(profile: RadialProfile) -> CylinderDomain:
    """Build the counterclockwise boundary polygon of the cylinder."""
    xs = profile.breakpoints()
    a = profile.evaluate(xs)
    lower = [(float(x), float(-r)) for x, r in zip(xs, a)]
    upper = [(float(x), float(r)) for x, r in zip(xs[::-1], a[::-1])]
    polygon = tuple(lower + upper)
    n = len(polygon)
    edges = [(i, (i + 1) % n) for i in range(n)]
    gamma_d = (edges[-1],)
    gamma_n = tuple(edges[:-1])
    return CylinderDomain(profile=profile, polygon=polygon, gamma_d=gamma_d, gamma_n=gamma_n)


def area(domain: CylinderDomain) -> float:
    """Polygon area by the shoelace formula.

    Exact for piecewise-linear radii (equals the trapezoid rule applied
    to 2 a(x1)).
    """
    pts = np.asarray(domain.polygon)
    x, y = pts[:, 0], pts[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def arc_radii(mid_radius: float, sample_points: int) -> np.ndarray:
    """Radii of the circular arc family on a uniform grid."""
    x = np.linspace(0.0, 1.0, sample_points)
    if mid_radius <= R_MIN:
        return np.full(sample_points, R_MIN)
    # circle through (0, 0.1), (1/2, m), (1, 0.1); center on x1 = 1/2
    m = mid_radius
    y0 = (m * m - (0.25 + R_MIN * R_MIN)) / (2.0 * m - 2.0 * R_MIN)
    radius = m - y0
    return y0 + np.sqrt(np.maximum(radius * radius - (x - 0.5) ** 2, 0.0))


def arc_profile(param: ArcParam) -> RadialProfile:
    r = arc_radii(param.mid_radius, param.sample_points)
    # guard round-off excursions just below the lower bound
    r = np.clip(r, R_MIN, R_MAX)
    return RadialProfile(tuple(r))
