"""Averaged pressure response from an eigenmode basis.

The response to a unit load at frequency parameter ``lam`` expands over
the eigenmode basis, and its spatial mean averaged over a frequency
range gives the objective.  The principal value of that average has a
closed form per mode, so the pole structure of the response never has to
be integrated numerically.  For constant-radius cylinders everything is
available analytically and serves as the reference oracle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PoleAtEndpoint
from .fem import DiscreteEigenBasis

#: closest a contributing eigenvalue may sit to a range endpoint
GAP_TOL = 1e-6

#: squared-mean threshold below which a mode counts as non-contributing
CONTRIB_TOL = 1e-12


@dataclass(frozen=True)
class FrequencyRange:
    """Averaging interval for the spectral parameter.

    The spectral parameter is the squared angular frequency scaled by the
    medium constants; everything here is nondimensional.
    """

    lambda_min: float = 0.0
    lambda_max: float = 60.0

    def __post_init__(self):
        if not (0.0 <= self.lambda_min < self.lambda_max):
            raise ValueError("need 0 <= lambda_min < lambda_max")

    @property
    def width(self) -> float:
        return self.lambda_max - self.lambda_min


DEFAULT_RANGE = FrequencyRange(0.0, 60.0)


@dataclass(frozen=True)
class ObjectiveResult:
    psi: float
    n_modes_used: int
    min_endpoint_gap: float
    cutoff: float


def _endpoint_gaps(kappas: np.ndarray, rng: FrequencyRange) -> np.ndarray:
    return np.minimum(np.abs(kappas - rng.lambda_min), np.abs(rng.lambda_max - kappas))


def _check_gap(kappas, means_sq, rng: FrequencyRange) -> float:
    contributing = means_sq > CONTRIB_TOL
    if not np.any(contributing):
        return math.inf
    gaps = _endpoint_gaps(kappas[contributing], rng)
    j = int(np.argmin(gaps))
    if gaps[j] < GAP_TOL:
        kap = kappas[contributing][j]
        endpoint = rng.lambda_min if abs(kap - rng.lambda_min) <= abs(rng.lambda_max - kap) else rng.lambda_max
        raise PoleAtEndpoint(kap, endpoint, float(gaps[j]))
    return float(gaps[j])


def psi_objective(basis: DiscreteEigenBasis, rng: FrequencyRange = DEFAULT_RANGE) -> ObjectiveResult:
    """Frequency-averaged mean response over the basis.

    psi = 1 + |Omega| * sum_i [ kappa_i/(lmax-lmin) * log|...| - 1 ] <psi_i>^2,
    summed over every mode in the basis.  Modes whose mean vanishes
    contribute exactly zero.
    """
    if basis.cutoff < 10.0 * rng.lambda_max:
        warnings.warn(
            f"basis cutoff {basis.cutoff:.4g} is below 10*lambda_max = {10 * rng.lambda_max:.4g}; "
            "the series tail may not be negligible",
            UserWarning,
            stacklevel=2,
        )
    means_sq = basis.means ** 2
    gap = _check_gap(basis.kappas, means_sq, rng)

    terms = []
    for kap, msq in zip(basis.kappas, means_sq):
        if msq == 0.0 or kap == rng.lambda_min or kap == rng.lambda_max:
            # silent modes contribute nothing; one exactly on an endpoint
            # can only be silent here (the gap guard already ran)
            terms.append(0.0)
            continue
        bracket = kap / rng.width * math.log(abs((kap - rng.lambda_min) / (rng.lambda_max - kap))) - 1.0
        terms.append(bracket * msq)
    psi = 1.0 + basis.omega_area * math.fsum(terms)
    return ObjectiveResult(
        psi=psi,
        n_modes_used=basis.n_modes,
        min_endpoint_gap=gap,
        cutoff=basis.cutoff,
    )


def _check_lambda(basis: DiscreteEigenBasis, lam: float) -> None:
    means_sq = basis.means ** 2
    contributing = means_sq > CONTRIB_TOL
    if np.any(contributing):
        gaps = np.abs(basis.kappas[contributing] - lam)
        j = int(np.argmin(gaps))
        if gaps[j] < GAP_TOL:
            raise PoleAtEndpoint(basis.kappas[contributing][j], lam, float(gaps[j]))


def response(basis: DiscreteEigenBasis, lam: float) -> np.ndarray:
    """Nodal values of the truncated response expansion at one frequency."""
    _check_lambda(basis, lam)
    denom = basis.kappas - lam
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where((basis.means == 0.0) | (denom == 0.0), 0.0,
                        basis.omega_area * lam / denom * basis.means)
    return 1.0 + basis.modes @ coef


def mean_response(basis: DiscreteEigenBasis, lam: float) -> float:
    """Spatial mean of the response at one frequency."""
    _check_lambda(basis, lam)
    terms = [basis.omega_area * lam / (kap - lam) * m * m
             for kap, m in zip(basis.kappas, basis.means) if m != 0.0 and kap != lam]
    return 1.0 + math.fsum(terms)


# ---------------------------------------------------------------------------
# analytic reference for constant-radius cylinders


class UniformMode(NamedTuple):
    """One analytic eigenpair of the constant-radius cylinder.

    parity tags the transverse factor: 'even' modes are cosines in x2
    ('even', l=0 being constant), 'odd' modes are sines.  Only even modes
    with l = 0 have a nonzero mean.
    """

    kappa: float
    parity: str
    k: int
    l: int
    norm: float
    mean: float


def axial_eigenvalue(k: int) -> float:
    """k-th eigenvalue of the rod problem: loaded end, free end."""
    return (2 * k + 1) ** 2 * math.pi ** 2 / 4.0


def uniform_eigenvalues(a: float, cutoff: float) -> list[UniformMode]:
    """Every analytic eigenvalue below the cutoff, ascending.

    Eigenvalues separate as kappa = mu_k + eta, mu_k the axial sequence
    and eta the transverse Neumann eigenvalues on (-a, a).
    """
    if not (0.1 <= a <= 0.5):
        raise ValueError("radius must lie in [0.1, 0.5]")
    out: list[UniformMode] = []
    k = 0
    while (mu := axial_eigenvalue(k)) <= cutoff:
        l = 0
        while mu + (eta := (l * math.pi / a) ** 2) <= cutoff:
            norm = math.sqrt(1.0 / a) if l == 0 else math.sqrt(2.0 / a)
            mean = 1.0 / math.sqrt(a * mu) if l == 0 else 0.0
            out.append(UniformMode(mu + eta, "even", k, l, norm, mean))
            l += 1
        l = 0
        while mu + (eta := ((2 * l + 1) * math.pi / (2 * a)) ** 2) <= cutoff:
            out.append(UniformMode(mu + eta, "odd", k, l, math.sqrt(2.0 / a), 0.0))
            l += 1
        k += 1
    out.sort(key=lambda m: m.kappa)
    return out


def _nearest_axial(lam: float) -> tuple[float, float]:
    """(gap, nearest axial eigenvalue) for a spectral value."""
    if lam <= 0.0:
        return math.inf, axial_eigenvalue(0)
    k = max(0, round((math.sqrt(lam) * 2.0 / math.pi - 1.0) / 2.0))
    pairs = [(abs(lam - axial_eigenvalue(kk)), axial_eigenvalue(kk)) for kk in (k - 1, k, k + 1) if kk >= 0]
    return min(pairs)


def uniform_mean_response(lam: float) -> float:
    """tan(sqrt(lam))/sqrt(lam), the exact mean response of any uniform cylinder."""
    if lam == 0.0:
        return 1.0
    s = math.sqrt(lam)
    return math.tan(s) / s


def uniform_response_profile(lam: float, x1) -> np.ndarray:
    """Exact response cos(sqrt(lam)(1 - x1))/cos(sqrt(lam)); constant in x2."""
    s = math.sqrt(lam)
    return np.cos(s * (1.0 - np.asarray(x1, dtype=float))) / math.cos(s)


def uniform_psi_exact(rng: FrequencyRange) -> float:
    """Closed-form objective for constant-radius cylinders.

    Defined whenever neither endpoint is an axial eigenvalue; the radius
    drops out because the response is constant across the cylinder.
    """
    for lam in (rng.lambda_min, rng.lambda_max):
        gap, mu = _nearest_axial(lam)
        if gap < GAP_TOL:
            raise PoleAtEndpoint(mu, lam, gap)
    num = math.cos(math.sqrt(rng.lambda_min))
    den = math.cos(math.sqrt(rng.lambda_max))
    return 2.0 / rng.width * math.log(abs(num / den))


def trapezoid_reference(rng: FrequencyRange, n_steps: int) -> float:
    """Naive trapezoid average of the exact uniform mean response.

    Deliberately ignores the pole structure: past the first axial
    eigenvalue the quadrature does not converge to the principal value,
    which is exactly the failure this reproduces.  NaN or inf propagate
    if a node lands on a pole.
    """
    if n_steps < 2:
        raise ValueError("need at least 2 steps")
    lam = np.linspace(rng.lambda_min, rng.lambda_max, n_steps + 1)
    vals = np.array([uniform_mean_response(x) for x in lam])
    return float(np.trapezoid(vals, lam) / rng.width)
