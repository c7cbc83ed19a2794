"""Structured triangulations of cylinder domains.

The mesh is the image of a regular grid on [0, 1] x [-1, 1] under the
transfinite map (xi1, xi2) -> (xi1, xi2 * a(xi1)).  Each quad is split
into two triangles, with the split direction mirrored across the axis so
the triangulation inherits the x2-symmetry of the domain.  Refinement
doubles both grid resolutions and is exactly nested.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMeshError
from .geometry import CylinderDomain, RadialProfile

#: lowest acceptable interior angle, degrees
MIN_ANGLE_DEG = 5.0


@dataclass(frozen=True)
class MeshParams:
    """Grid resolutions: ``nx`` cells along the axis, ``ny`` across the radius."""

    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("nx and ny must both be at least 2")

    def refined(self) -> "MeshParams":
        return MeshParams(2 * self.nx, 2 * self.ny)

    def scaled(self, factor: int) -> "MeshParams":
        return MeshParams(factor * self.nx, factor * self.ny)


def refine(params: MeshParams) -> MeshParams:
    """Uniform refinement: double both subdivision counts."""
    return params.refined()


def params_for_profile(profile: RadialProfile, target_nx: int = 40, aspect: int = 2) -> MeshParams:
    """Smallest admissible resolution at or above ``target_nx``.

    nx is rounded up to a multiple of (k - 1) so profile breakpoints land
    on grid lines; ny = nx / aspect.
    """
    seg = max(profile.k - 1, 1)
    nx = ((target_nx + seg - 1) // seg) * seg
    return MeshParams(nx=nx, ny=max(2, nx // aspect))


@dataclass(frozen=True)
class TriangleMesh:
    """Immutable triangulation with boundary markers.

    vertices : (n, 2) float array
    triangles : (m, 3) int array, positive orientation
    dirichlet_nodes : indices of the nodes on {x1 = 0}
    h : longest edge in the mesh
    """

    vertices: np.ndarray
    triangles: np.ndarray
    dirichlet_nodes: np.ndarray
    h: float

    def __post_init__(self):
        for arr in (self.vertices, self.triangles, self.dirichlet_nodes):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        p1, p2, p3 = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
                      - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0]))

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angles))

    def replaced_vertices(self, new_vertices: np.ndarray) -> "TriangleMesh":
        """Same connectivity on mapped nodes (for domain perturbations)."""
        new_vertices = np.ascontiguousarray(new_vertices, dtype=float)
        mesh = TriangleMesh(
            vertices=new_vertices,
            triangles=self.triangles,
            dirichlet_nodes=self.dirichlet_nodes,
            h=_max_edge(new_vertices, self.triangles),
        )
        if np.any(mesh.triangle_areas() <= 0.0):
            raise DegenerateMeshError("mapped mesh has non-positive triangle areas; reduce the step")
        return mesh


def _max_edge(vertices: np.ndarray, triangles: np.ndarray) -> float:
    p = vertices[triangles]
    e = [p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]]
    return float(max(np.max(np.hypot(d[:, 0], d[:, 1])) for d in e))


def _grid_mesh(xs: np.ndarray, radii_at_xs: np.ndarray, eta: np.ndarray,
               mirror_row: int | None) -> TriangleMesh:
    nx = len(xs) - 1
    rows = len(eta)
    verts = np.empty(((nx + 1) * rows, 2))
    verts[:, 0] = np.repeat(xs, rows)
    verts[:, 1] = (radii_at_xs[:, None] * eta[None, :]).ravel()

    cells = []
    for i in range(nx):
        base0, base1 = i * rows, (i + 1) * rows
        for j in range(rows - 1):
            v00, v01 = base0 + j, base0 + j + 1
            v10, v11 = base1 + j, base1 + j + 1
            if mirror_row is not None and j < mirror_row:
                cells.append((v00, v10, v11))
                cells.append((v00, v11, v01))
            else:
                cells.append((v00, v10, v01))
                cells.append((v10, v11, v01))
    triangles = np.asarray(cells, dtype=np.int64)

    mesh = TriangleMesh(
        vertices=verts,
        triangles=triangles,
        dirichlet_nodes=np.flatnonzero(verts[:, 0] == 0.0),
        h=_max_edge(verts, triangles),
    )
    areas = mesh.triangle_areas()
    if np.any(areas <= 0.0):
        raise DegenerateMeshError("triangulation produced a non-positive area")
    return mesh


def build_mesh(domain: CylinderDomain, params: MeshParams) -> TriangleMesh:
    """Triangulate the full symmetric cylinder.

    Node count is (nx+1)(2 ny+1) and triangle count 4 nx ny.  Breakpoints
    of the radius function must align with grid lines, so nx has to be a
    multiple of k - 1.
    """
    k = domain.profile.k
    if k > 1 and params.nx % (k - 1) != 0:
        raise ValueError(f"nx={params.nx} must be a multiple of k-1={k - 1}")
    xs = np.linspace(0.0, 1.0, params.nx + 1)
    a = domain.profile.evaluate(xs)
    eta = np.linspace(-1.0, 1.0, 2 * params.ny + 1)
    return _grid_mesh(xs, a, eta, mirror_row=params.ny)


def build_half_mesh(profile: RadialProfile, params: MeshParams) -> TriangleMesh:
    """Triangulate the upper half {0 < x2 < a(x1)} of the cylinder.

    The x2-symmetry of the domain and of the sound-hard boundary makes
    the averaged response of the half problem identical to the full one:
    antisymmetric modes have zero mean and never contribute.  This is the
    fast path used for dataset labelling.
    """
    k = profile.k
    if k > 1 and params.nx % (k - 1) != 0:
        raise ValueError(f"nx={params.nx} must be a multiple of k-1={k - 1}")
    xs = np.linspace(0.0, 1.0, params.nx + 1)
    a = profile.evaluate(xs)
    eta = np.linspace(0.0, 1.0, params.ny + 1)
    return _grid_mesh(xs, a, eta, mirror_row=None)


def mesh_to_csv(mesh: TriangleMesh, vertices_path, triangles_path) -> None:
    """Debug dump of the raw mesh arrays."""
    with open(vertices_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x1", "x2"])
        for x, y in mesh.vertices:
            w.writerow([repr(float(x)), repr(float(y))])
    with open(triangles_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["v1", "v2", "v3"])
        for t in mesh.triangles:
            w.writerow([int(t[0]), int(t[1]), int(t[2])])
