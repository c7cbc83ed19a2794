"""First-order sensitivity of the averaged response to domain perturbations.

For a divergence-free Lipschitz velocity field V, transporting the domain
along x -> x + t V(x) changes the objective at first order by a double
sum over eigenmode pairs,

    psi' = sum_{i,j} c(kappa_i, kappa_j) <grad V grad psi_i . grad psi_j>
           <psi_i> <psi_j>,

with closed-form coefficients c obtained by averaging
lambda / ((kappa_i - lambda)(kappa_j - lambda)) over the frequency range.
A node-mapped finite-difference re-solve provides the independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import LemmaHypothesisViolated, PoleAtEndpoint
from .fem import DiscreteEigenBasis, basis_for_mesh
from .meshing import TriangleMesh
from .spectral import GAP_TOL, FrequencyRange, psi_objective

#: relative eigenvalue gap below which the confluent coefficient is used
EQUAL_KAPPA_RTOL = 1e-9

#: modes with |mean| above this enter the double sum
MEAN_TOL = 1e-10


class VectorField:
    """Velocity field with values and Jacobian available anywhere.

    Subclasses must be divergence free; the shape derivative formula is
    only valid for solenoidal fields.
    """

    kind: str = "abstract"

    def __call__(self, points: np.ndarray) -> np.ndarray:  # (n, 2) -> (n, 2)
        raise NotImplementedError

    def jacobian(self, points: np.ndarray) -> np.ndarray:  # (n, 2) -> (n, 2, 2)
        raise NotImplementedError

    def preserves_symmetry(self) -> bool:
        """True if the field maps x2-symmetric domains to symmetric ones."""
        return False


@dataclass(frozen=True)
class AffineSolenoidalField(VectorField):
    """V(x) = A x + b with trace-free A (a22 = -a11 by construction)."""

    a11: float = 0.0
    a12: float = 0.0
    a21: float = 0.0
    b1: float = 0.0
    b2: float = 0.0

    kind = "affine_solenoidal"

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, -self.a11]])

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return points @ self.matrix.T + np.array([self.b1, self.b2])

    def jacobian(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.broadcast_to(self.matrix, (len(points), 2, 2))

    def preserves_symmetry(self) -> bool:
        return self.a12 == 0.0 and self.a21 == 0.0 and self.b2 == 0.0


@dataclass(frozen=True)
class StreamField(VectorField):
    """Field derived from a stream function, V = (d phi/dx2, -d phi/dx1).

    Solenoidal by construction.  The caller supplies the first partials
    of phi (the field itself) and the three independent second partials
    (its Jacobian).
    """

    phi_x1: Callable
    phi_x2: Callable
    phi_x1x1: Callable
    phi_x1x2: Callable
    phi_x2x2: Callable

    kind = "stream_function"
    symmetric: bool = False

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = points[:, 0], points[:, 1]
        return np.column_stack([self.phi_x2(x1, x2), -self.phi_x1(x1, x2)])

    def jacobian(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x1, x2 = points[:, 0], points[:, 1]
        jac = np.empty((len(points), 2, 2))
        jac[:, 0, 0] = self.phi_x1x2(x1, x2)
        jac[:, 0, 1] = self.phi_x2x2(x1, x2)
        jac[:, 1, 0] = -self.phi_x1x1(x1, x2)
        jac[:, 1, 1] = -self.phi_x1x2(x1, x2)
        return jac

    def preserves_symmetry(self) -> bool:
        return self.symmetric


def axial_bump_field(amplitude: float) -> StreamField:
    """Symmetric solenoidal field V = (v(x1), -v'(x1) x2), v = amplitude sin(pi x1).

    Fixes both end planes of the cylinder, so the mapped domain is again a
    radial graph over [0, 1]; this is the field family used for dataset
    boosting.
    """
    c = float(amplitude)
    pi = math.pi
    return StreamField(
        phi_x1=lambda x1, x2: c * pi * np.cos(pi * x1) * x2,
        phi_x2=lambda x1, x2: c * np.sin(pi * x1) * np.ones_like(x2),
        phi_x1x1=lambda x1, x2: -c * pi * pi * np.sin(pi * x1) * x2,
        phi_x1x2=lambda x1, x2: c * pi * np.cos(pi * x1) * np.ones_like(np.asarray(x1, float)),
        phi_x2x2=lambda x1, x2: np.zeros_like(np.asarray(x1, float)),
        symmetric=True,
    )


@dataclass(frozen=True)
class ShapeDerivativeResult:
    psi_prime: float
    pair_count: int


def _pv_integral(ki: float, kj: float, rng: FrequencyRange) -> float:
    """Principal value of  int lambda / ((ki - lambda)(kj - lambda)) dlambda."""
    lmin, lmax = rng.lambda_min, rng.lambda_max
    if abs(ki - kj) < EQUAL_KAPPA_RTOL * max(ki, kj):
        k = ki
        return math.log(abs((lmax - k) / (k - lmin))) - k / (lmax - k) - k / (k - lmin)
    li = math.log(abs((lmax - ki) / (ki - lmin)))
    lj = math.log(abs((lmax - kj) / (kj - lmin)))
    d = ki - kj
    return (ki / d) * li - (kj / d) * lj


def coeff_c(kappa_i: float, kappa_j: float, rng: FrequencyRange, omega_area: float) -> float:
    """Pair coefficient of the shape-derivative double sum."""
    for kap in (kappa_i, kappa_j):
        gap = min(abs(kap - rng.lambda_min), abs(rng.lambda_max - kap))
        if gap < GAP_TOL:
            endpoint = rng.lambda_min if abs(kap - rng.lambda_min) <= abs(rng.lambda_max - kap) else rng.lambda_max
            raise PoleAtEndpoint(kap, endpoint, gap)
    return 2.0 * omega_area ** 2 / rng.width * _pv_integral(kappa_i, kappa_j, rng)


def _triangle_gradients(mesh: TriangleMesh, modes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tri = mesh.triangles
    p1, p2, p3 = mesh.vertices[tri[:, 0]], mesh.vertices[tri[:, 1]], mesh.vertices[tri[:, 2]]
    area2 = ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
             - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0]))
    b = np.stack([p2[:, 1] - p3[:, 1], p3[:, 1] - p1[:, 1], p1[:, 1] - p2[:, 1]], axis=1) / area2[:, None]
    c = np.stack([p3[:, 0] - p2[:, 0], p1[:, 0] - p3[:, 0], p2[:, 0] - p1[:, 0]], axis=1) / area2[:, None]
    nodal = modes[tri]  # (ntri, 3, nmodes)
    gx = np.einsum("ti,tim->tm", b, nodal)
    gy = np.einsum("ti,tim->tm", c, nodal)
    return gx, gy


def psi_shape_derivative(basis: DiscreteEigenBasis, mesh: TriangleMesh, field: VectorField,
                         rng: FrequencyRange, strict_mode: bool = False) -> ShapeDerivativeResult:
    """Shape derivative of the objective along a solenoidal field.

    The gradient average uses the constant per-triangle mode gradients
    and the field Jacobian at centroids.  In strict mode the hypothesis
    that no contributing eigenvalue lies inside the closed range is
    enforced; relaxed mode (default) only requires endpoint gaps, which
    is how the averaged objective itself is defined.
    """
    contrib = np.abs(basis.means) > MEAN_TOL
    kappas = basis.kappas[contrib]
    means = basis.means[contrib]

    if strict_mode:
        inside = (kappas >= rng.lambda_min) & (kappas <= rng.lambda_max)
        if np.any(inside):
            raise LemmaHypothesisViolated(
                f"contributing eigenvalue {kappas[inside][0]:.6g} lies inside "
                f"[{rng.lambda_min:.6g}, {rng.lambda_max:.6g}]"
            )

    m = len(kappas)
    if m == 0:
        return ShapeDerivativeResult(psi_prime=0.0, pair_count=0)

    coeffs = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            coeffs[i, j] = coeffs[j, i] = coeff_c(kappas[i], kappas[j], rng, basis.omega_area)

    gx, gy = _triangle_gradients(mesh, basis.modes[:, contrib])
    areas = mesh.triangle_areas()
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    jac = field.jacobian(centroids)

    # w = (grad V) grad psi_i per triangle, area weighted
    wx = jac[:, 0, 0] * gx.T + jac[:, 0, 1] * gy.T  # (nmodes, ntri)
    wy = jac[:, 1, 0] * gx.T + jac[:, 1, 1] * gy.T
    grad_avg = (wx * areas) @ gx + (wy * areas) @ gy
    grad_avg /= basis.omega_area

    terms = coeffs * grad_avg * np.outer(means, means)
    psi_prime = math.fsum(terms.ravel().tolist())
    return ShapeDerivativeResult(psi_prime=psi_prime, pair_count=m * m)


def fd_shape_derivative(mesh: TriangleMesh, field: VectorField, rng: FrequencyRange,
                        t: float, cutoff: float | None = None) -> float:
    """Central finite difference through node-mapped re-solves.

    Every mesh node moves by +-t V(x) with the connectivity kept, which is
    valid for any bi-Lipschitz transport.  Degenerate mapped triangles
    raise with the advice to reduce t.
    """
    if t == 0:
        raise ValueError("t must be nonzero")
    if cutoff is None:
        cutoff = 10.0 * rng.lambda_max
    disp = field(mesh.vertices)
    psi = []
    for sign in (+1.0, -1.0):
        mapped = mesh.replaced_vertices(mesh.vertices + sign * t * disp)
        basis = basis_for_mesh(mapped, cutoff)
        psi.append(psi_objective(basis, rng).psi)
    return (psi[0] - psi[1]) / (2.0 * t)


# ---------------------------------------------------------------------------
# analytic series for constant-radius cylinders


def uniform_shape_derivative(rng: FrequencyRange, v1_partial: Callable, a: float,
                             n_panels: int = 256, series_cutoff: float | None = None) -> float:
    """Shape derivative of a uniform cylinder under a solenoidal field.

    Only the axial stretch rate dV1/dx1 enters, because the exact response
    is constant across the cylinder.  Expanding over the axial eigenmodes
    mu_k gives

        psi' = 8/(lmax - lmin) * sum_{k,k'} I(mu_k, mu_k') *
               int_0^1 cos(sqrt(mu_k) x) cos(sqrt(mu_k') x) dV1/dx1 dx,

    with I the principal-value frequency average of the pair kernel; the
    line integrals use a composite Simpson rule with ``n_panels`` panels
    (integration across the radius is exact and drops out).  The value
    does not depend on the radius ``a``; the argument is kept for
    interface symmetry and validated.
    """
    if not (0.1 <= a <= 0.5):
        raise ValueError("radius must lie in [0.1, 0.5]")
    if series_cutoff is None:
        series_cutoff = max(400.0 * rng.lambda_max, 24000.0)

    mus = []
    k = 0
    while (mu := (2 * k + 1) ** 2 * math.pi ** 2 / 4.0) <= series_cutoff:
        gap = min(abs(mu - rng.lambda_min), abs(rng.lambda_max - mu))
        if gap < GAP_TOL:
            endpoint = rng.lambda_min if abs(mu - rng.lambda_min) <= abs(rng.lambda_max - mu) else rng.lambda_max
            raise PoleAtEndpoint(mu, endpoint, gap)
        mus.append(mu)
        k += 1
    mus = np.array(mus)
    m = len(mus)

    # Simpson nodes on [0, 1]
    xs = np.linspace(0.0, 1.0, 2 * n_panels + 1)
    wts = np.ones(2 * n_panels + 1)
    wts[1:-1:2] = 4.0
    wts[2:-1:2] = 2.0
    wts /= 6.0 * n_panels

    dv = np.asarray(v1_partial(xs), dtype=float) * np.ones_like(xs)
    cosines = np.cos(np.sqrt(mus)[:, None] * xs[None, :])  # (m, nodes)
    weighted = cosines * (wts * dv)[None, :]
    q = weighted @ cosines.T  # q[k,k'] = int cos cos dV1

    pv = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            pv[i, j] = pv[j, i] = _pv_integral(mus[i], mus[j], rng)

    return 8.0 / rng.width * math.fsum((pv * q).ravel().tolist())
