"""P1 finite elements for the mixed Dirichlet-Neumann Laplacian.

Assembles mass and stiffness matrices over a triangulation, eliminates
the loaded-boundary nodes, and solves the generalized symmetric
eigenproblem  K psi = kappa M psi  for every eigenvalue up to a spectral
cutoff.  The contract is the accuracy of the returned eigenpairs
(M-orthonormality and relative residuals within 1e-8), not a particular
solver; small systems use a dense solve, larger ones shift-invert
Lanczos.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import cholesky, eigh, solve_triangular

from .errors import EigenSolverError
from .meshing import TriangleMesh

#: relative residual and orthonormality tolerance for returned eigenpairs
RESIDUAL_RTOL = 1e-8

#: below this reduced dimension a dense solve is cheaper than Lanczos
_DENSE_LIMIT = 420


class DofRuleWarning(UserWarning):
    """The mesh is coarser than the resolution rule for the requested cutoff."""


@dataclass(frozen=True)
class DiscreteEigenBasis:
    """Eigenpairs of the discrete problem, in full-mesh node indexing.

    kappas : ascending positive eigenvalues up to ``cutoff``
    modes : (n_vertices, n_modes) nodal values, zero on the loaded boundary,
        M-orthonormal, sign-normalized
    means : spatial mean of each mode
    omega_area : measure of the meshed domain
    cutoff : spectral bound the basis was computed for
    dof : dimension of the constrained space the solve ran in
    """

    kappas: np.ndarray
    modes: np.ndarray
    means: np.ndarray
    omega_area: float
    cutoff: float
    dof: int

    def __post_init__(self):
        for arr in (self.kappas, self.modes, self.means):
            arr.setflags(write=False)

    @property
    def n_modes(self) -> int:
        return len(self.kappas)


def assemble(mesh: TriangleMesh) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and mass matrices of the P1 space on the mesh.

    Per triangle the mass matrix is area/12 * (2 on the diagonal, 1 off);
    the stiffness entries come from the constant barycentric gradients.
    """
    tri = mesh.triangles
    p1, p2, p3 = mesh.vertices[tri[:, 0]], mesh.vertices[tri[:, 1]], mesh.vertices[tri[:, 2]]
    area2 = ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
             - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0]))
    area = 0.5 * area2

    b = np.stack([p2[:, 1] - p3[:, 1], p3[:, 1] - p1[:, 1], p1[:, 1] - p2[:, 1]], axis=1)
    c = np.stack([p3[:, 0] - p2[:, 0], p1[:, 0] - p3[:, 0], p2[:, 0] - p1[:, 0]], axis=1)
    k_local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)[:, None, None]
    m_local = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.coo_matrix((k_local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((m_local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def apply_dirichlet(K: sp.spmatrix, M: sp.spmatrix,
                    dirichlet_nodes: np.ndarray) -> tuple[sp.csc_matrix, sp.csc_matrix, np.ndarray]:
    """Eliminate constrained rows and columns.

    Returns the reduced matrices and the index map from reduced to full
    numbering (the free nodes, ascending).
    """
    n = K.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[np.asarray(dirichlet_nodes, dtype=int)] = False
    free = np.flatnonzero(mask)
    if len(free) == 0:
        raise ValueError("all nodes are constrained")
    K_red = K[np.ix_(free, free)].tocsc()
    M_red = M[np.ix_(free, free)].tocsc()
    return K_red, M_red, free


def _dense_eig(K_red, M_red, cutoff):
    w, u = eigh(K_red.toarray(), M_red.toarray())
    keep = w <= cutoff
    return w[keep], u[:, keep]


def _sparse_eig(K_red, M_red, cutoff, omega_hint):
    n = K_red.shape[0]
    # Weyl count estimate seeds the block size; grow until the cutoff is passed
    k = max(8, int(0.9 * cutoff * omega_hint / (4.0 * math.pi)) + 10)
    v0 = np.linspace(1.0, 2.0, n)
    while True:
        k = min(k, n - 1)
        try:
            w, u = spla.eigsh(K_red, k=k, M=M_red, sigma=0.0, which="LM", v0=v0)
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"Lanczos failed to converge (k={k}, n={n}): {exc}") from exc
        if w[-1] > cutoff or k == n - 1:
            break
        k = int(1.6 * k) + 5
    keep = w <= cutoff
    return w[keep], u[:, keep]


def _normalize_signs(modes: np.ndarray) -> np.ndarray:
    if modes.shape[1] == 0:
        return modes
    scale = np.max(np.abs(modes), axis=0)
    flipped = modes.copy()
    for j in range(modes.shape[1]):
        nz = np.flatnonzero(np.abs(modes[:, j]) > 1e-12 * scale[j])
        if len(nz) and modes[nz[0], j] < 0:
            flipped[:, j] = -modes[:, j]
    return flipped


def solve_eigen(K: sp.spmatrix, M: sp.spmatrix, dirichlet_nodes: np.ndarray,
                cutoff: float, dof_rule_factor: float = 10.0) -> DiscreteEigenBasis:
    """All eigenpairs with kappa <= cutoff, ascending and M-orthonormal.

    Emits a :class:`DofRuleWarning` when the constrained space is smaller
    than ``dof_rule_factor`` times the largest eigenvalue kept, i.e. when
    the mesh is too coarse for the requested cutoff to be trustworthy.
    """
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    K_red, M_red, free = apply_dirichlet(K, M, dirichlet_nodes)
    n = len(free)
    omega = float(M.sum())

    if n <= _DENSE_LIMIT:
        w, u = _dense_eig(K_red, M_red, cutoff)
    else:
        w, u = _sparse_eig(K_red, M_red, cutoff, omega)

    order = np.argsort(w, kind="stable")
    w, u = w[order], u[:, order]

    if len(w) and w[0] <= 0:
        raise EigenSolverError(f"nonpositive eigenvalue {w[0]!r} in a coercive problem")

    # enforce exact M-orthonormality; the solver is already close, so the
    # Cholesky correction is a tiny perturbation within each cluster
    if len(w):
        gram = u.T @ (M_red @ u)
        dev = np.max(np.abs(gram - np.eye(len(w))))
        if dev > 1e-12:
            if dev > 1e-6:
                raise EigenSolverError(f"eigenvector block far from M-orthonormal (dev={dev:.2e})")
            chol = cholesky(gram, lower=False)
            u = solve_triangular(chol, u.T, lower=False, trans="T").T

        resid = K_red @ u - (M_red @ u) * w
        resid_norm = np.linalg.norm(resid, axis=0)
        ref_norm = np.linalg.norm((M_red @ u) * w, axis=0)
        bad = resid_norm > RESIDUAL_RTOL * np.maximum(ref_norm, 1e-300)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise EigenSolverError(
                f"residual {resid_norm[j]:.2e} exceeds {RESIDUAL_RTOL:.0e} * {ref_norm[j]:.2e} "
                f"for eigenvalue {w[j]:.6g}"
            )

    if len(w) and n < dof_rule_factor * w[-1]:
        warnings.warn(
            f"{n} degrees of freedom for eigenvalues up to {w[-1]:.4g}; "
            f"the resolution rule asks for at least {dof_rule_factor * w[-1]:.0f}",
            DofRuleWarning,
            stacklevel=2,
        )

    modes = np.zeros((K.shape[0], len(w)))
    modes[free] = u
    modes = _normalize_signs(modes)

    weights = np.asarray(M.sum(axis=1)).ravel()  # integral of each hat function
    means = (modes.T @ weights) / omega

    return DiscreteEigenBasis(
        kappas=np.ascontiguousarray(w),
        modes=np.ascontiguousarray(modes),
        means=np.ascontiguousarray(means),
        omega_area=omega,
        cutoff=float(cutoff),
        dof=n,
    )


def mode_mean(mode: np.ndarray, mesh: TriangleMesh) -> float:
    """Exact P1 integration of a nodal field, divided by the domain area."""
    mode = np.asarray(mode, dtype=float)
    if mode.shape != (mesh.n_vertices,):
        raise ValueError(f"expected a nodal vector of length {mesh.n_vertices}")
    areas = mesh.triangle_areas()
    tri_mean = mode[mesh.triangles].sum(axis=1) / 3.0
    return float(np.dot(areas, tri_mean) / areas.sum())


def basis_for_mesh(mesh: TriangleMesh, cutoff: float,
                   dof_rule_factor: float = 10.0) -> DiscreteEigenBasis:
    """Assemble and solve in one step."""
    K, M = assemble(mesh)
    return solve_eigen(K, M, mesh.dirichlet_nodes, cutoff, dof_rule_factor)


def spectrum_to_csv(basis: DiscreteEigenBasis, path) -> None:
    """Debug dump of (kappa, mean) pairs."""
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["kappa", "mean"])
        for kap, mean in zip(basis.kappas, basis.means):
            w.writerow([repr(float(kap)), repr(float(mean))])
