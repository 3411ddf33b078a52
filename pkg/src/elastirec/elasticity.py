"""Elasticity tensor fields, rectangular grids and the div-stress operator."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ElasticityField",
    "SpatialGrid",
    "make_isotropic",
    "make_isotropic_varying",
    "make_anisotropic_flat",
    "preset",
    "TEST3_FLAT",
    "voigt_matrix",
    "div_stress",
    "div_stress_matrix",
    "normal_derivative_matrix",
]

TEST3_FLAT = np.array(
    [
        [80.0, 5.0, 5.0, 30.0],
        [5.0, 20.0, 20.0, 0.0],
        [5.0, 20.0, 20.0, 0.0],
        [30.0, 0.0, 0.0, 40.0],
    ]
)

_EYE = np.eye(2)


def _iso_tensor(lam, mu):
    """Isotropic tensor with (possibly array-valued) Lame parameters.

    Returns shape ``shape(lam) + (2, 2, 2, 2)``.
    """
    lam = np.asarray(lam, dtype=float)[..., None, None, None, None]
    mu = np.asarray(mu, dtype=float)[..., None, None, None, None]
    d = _EYE
    dd = np.einsum("ij,kl->ijkl", d, d)
    sym = np.einsum("ik,jl->ijkl", d, d) + np.einsum("il,kj->ijkl", d, d)
    return lam * dd + mu * sym


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform node grid with spacing ``h`` and lower-left corner ``(x0, y0)``.

    Arrays over the grid use ``(nx, ny)`` shape with ``indexing="ij"``; flat
    node indices are ``ix * ny + iy``.
    """

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one node per axis")

    @classmethod
    def square(cls, lo: float, hi: float, n: int) -> "SpatialGrid":
        """``n x n`` nodes on ``[lo, hi]^2``."""
        return cls(float(lo), float(lo), (hi - lo) / (n - 1), n, n)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.h * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.h * np.arange(self.ny)

    @property
    def x1(self) -> float:
        return self.x0 + self.h * (self.nx - 1)

    @property
    def y1(self) -> float:
        return self.y0 + self.h * (self.ny - 1)

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    @property
    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    @property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask.ravel())

    def boundary_entries(self):
        """Boundary (node, outward normal) pairs walked counter-clockwise.

        Starts at the lower-left corner along the bottom edge.  Corners appear
        once per adjacent edge.  Returns ``(ix, iy, normal, node_id)`` where
        ``normal`` has shape ``(n_entries, 2)`` and ``node_id`` numbers the
        distinct boundary nodes in the same walk order.
        """
        nx, ny = self.nx, self.ny
        ix, iy, nrm = [], [], []
        edges = [
            (np.arange(nx), np.zeros(nx, int), (0.0, -1.0)),
            (np.full(ny, nx - 1), np.arange(ny), (1.0, 0.0)),
            (np.arange(nx)[::-1], np.full(nx, ny - 1), (0.0, 1.0)),
            (np.zeros(ny, int), np.arange(ny)[::-1], (-1.0, 0.0)),
        ]
        for ex, ey, n in edges:
            ix.append(ex)
            iy.append(ey)
            nrm.append(np.tile(n, (ex.size, 1)))
        ix = np.concatenate(ix)
        iy = np.concatenate(iy)
        nrm = np.concatenate(nrm)
        flat = ix * ny + iy
        _, first = np.unique(flat, return_index=True)
        order = np.sort(first)
        rank = {int(flat[i]): k for k, i in enumerate(order)}
        node_id = np.array([rank[int(f)] for f in flat])
        return ix, iy, nrm, node_id

    def boundary_nodes(self) -> np.ndarray:
        """Flat indices of distinct boundary nodes in counter-clockwise walk order."""
        ix, iy, _, node_id = self.boundary_entries()
        flat = ix * self.ny + iy
        out = np.empty(node_id.max() + 1, dtype=int)
        out[node_id] = flat
        return out

    def locate(self, x: float, y: float):
        """Integer node indices of the point ``(x, y)``; raises if off-grid."""
        fx = (x - self.x0) / self.h
        fy = (y - self.y0) / self.h
        ix, iy = int(round(fx)), int(round(fy))
        if abs(fx - ix) > 1e-8 or abs(fy - iy) > 1e-8:
            raise ValueError(f"point ({x}, {y}) is not a grid node")
        if not (0 <= ix < self.nx and 0 <= iy < self.ny):
            raise ValueError(f"point ({x}, {y}) is outside the grid")
        return ix, iy

    def subgrid(self, lo: tuple[float, float], hi: tuple[float, float]) -> tuple["SpatialGrid", slice, slice]:
        """Grid-aligned sub-rectangle and the slices selecting it."""
        i0, j0 = self.locate(*lo)
        i1, j1 = self.locate(*hi)
        sub = SpatialGrid(self.x0 + i0 * self.h, self.y0 + j0 * self.h, self.h, i1 - i0 + 1, j1 - j0 + 1)
        return sub, slice(i0, i1 + 1), slice(j0, j1 + 1)


@dataclass(frozen=True, eq=False)
class ElasticityField:
    """Fourth-order tensor field ``C_ijkl(x, y)`` in 2-D.

    ``evaluator(x, y)`` takes broadcastable coordinate arrays and returns an
    array of shape ``shape(x) + (2, 2, 2, 2)``.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tag: str = "custom"
    constant: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        C = np.asarray(self.evaluator(x, y), dtype=float)
        if C.shape != x.shape + (2, 2, 2, 2):
            C = np.broadcast_to(C, x.shape + (2, 2, 2, 2))
        return C

    def on_grid(self, grid: SpatialGrid) -> np.ndarray:
        """Nodal samples, shape ``(nx, ny, 2, 2, 2, 2)``; cached per grid."""
        if grid not in self._cache:
            X, Y = grid.mesh()
            C = np.array(self(X, Y))
            C.setflags(write=False)
            self._cache[grid] = C
        return self._cache[grid]

    def symmetry_defect(self, grid: SpatialGrid) -> float:
        C = self.on_grid(grid)
        return max(
            float(np.max(np.abs(C - C.transpose(0, 1, 3, 2, 4, 5)))),
            float(np.max(np.abs(C - C.transpose(0, 1, 2, 3, 5, 4)))),
            float(np.max(np.abs(C - C.transpose(0, 1, 4, 5, 2, 3)))),
        )

    def coercivity(self, grid: SpatialGrid) -> float:
        """Smallest eigenvalue of the 3x3 Mandel matrix over all nodes."""
        M = voigt_matrix(self.on_grid(grid))
        return float(np.min(np.linalg.eigvalsh(M)))

    def validate(self, grid: SpatialGrid, tol: float = 1e-12) -> float:
        """Check symmetry and coercivity at the grid nodes; returns the coercivity constant."""
        defect = self.symmetry_defect(grid)
        scale = max(1.0, float(np.max(np.abs(self.on_grid(grid)))))
        if defect > tol * scale:
            raise ValueError(f"elasticity tensor violates the symmetry conditions (defect {defect:.3e})")
        lam = self.coercivity(grid)
        if not lam > 0:
            raise ValueError(f"elasticity tensor is not coercive (min eigenvalue {lam:.6g})")
        return lam


def voigt_matrix(C: np.ndarray) -> np.ndarray:
    """Mandel-scaled 3x3 form so that ``xi:C:xi = v^T M v`` with ``|v| = |xi|``."""
    r2 = np.sqrt(2.0)
    idx = [(0, 0), (1, 1), (0, 1)]
    fac = [1.0, 1.0, r2]
    M = np.empty(C.shape[:-4] + (3, 3))
    for a, (i, j) in enumerate(idx):
        for b, (k, l) in enumerate(idx):
            M[..., a, b] = fac[a] * fac[b] * C[..., i, j, k, l]
    return M


def make_isotropic(lam: float, mu: float) -> ElasticityField:
    C = _iso_tensor(lam, mu)
    return ElasticityField(lambda x, y: C, tag="iso-const", constant=True)


def make_isotropic_varying(lam_fn, mu_fn) -> ElasticityField:
    return ElasticityField(lambda x, y: _iso_tensor(lam_fn(x, y), mu_fn(x, y)), tag="iso-varying")


def make_anisotropic_flat(M) -> ElasticityField:
    """Constant tensor from its 4x4 flattening (index pairs 11, 12, 21, 22)."""
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ValueError("flattened tensor must be 4x4")
    if np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise ValueError("flattened tensor must be symmetric (major symmetry)")
    if np.max(np.abs(M[1] - M[2])) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise ValueError("rows for index pairs 12 and 21 must coincide (minor symmetry)")
    C = M.reshape(2, 2, 2, 2)
    lam = float(np.min(np.linalg.eigvalsh(voigt_matrix(C))))
    if not lam > 0:
        raise ValueError(f"flattened tensor is not coercive (min eigenvalue {lam:.6g})")
    return ElasticityField(lambda x, y: C, tag="aniso-const", constant=True)


def _test2_lam(x, y):
    return 1.0 + np.exp(-0.5 * (x**2 + y**2))


def _test2_mu(x, y):
    return 2.0 + np.sin(x * y)


def preset(name: str) -> ElasticityField:
    """Media used by the three benchmark problems: ``test1``, ``test2``, ``test3``."""
    if name == "test1":
        return make_isotropic(1.0, 2.0)
    if name == "test2":
        return make_isotropic_varying(_test2_lam, _test2_mu)
    if name == "test3":
        return make_anisotropic_flat(TEST3_FLAT)
    raise KeyError(f"unknown medium preset {name!r}")


# -- discrete operators -----------------------------------------------------

def _forward_diff(n: int, h: float) -> sp.csr_matrix:
    """(n-1) x n forward difference to half nodes."""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr") / h


def _average(n: int) -> sp.csr_matrix:
    return sp.diags([np.full(n - 1, 0.5), np.full(n - 1, 0.5)], [0, 1], shape=(n - 1, n), format="csr")


def _centered(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference; rows at the two ends are zero."""
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    return D.tocsr()


def _kx(A, grid):
    return sp.kron(A, sp.identity(grid.ny), format="csr")


def _ky(A, grid):
    return sp.kron(sp.identity(grid.nx), A, format="csr")


def div_stress_matrix(C: ElasticityField, grid: SpatialGrid) -> sp.csr_matrix:
    """Sparse ``div(C : grad u)`` on interior nodes.

    Maps the stacked field ``[u_1.ravel(), u_2.ravel()]`` (length ``2 * grid.size``)
    to the stacked interior values (length ``2 * n_interior``), component-major.
    Same-direction terms use the flux form with coefficients averaged to half
    nodes; mixed terms compose two centered differences.
    """
    if grid.nx < 3 or grid.ny < 3:
        raise ValueError("div_stress needs at least 3 nodes per axis")
    h = grid.h
    Cn = C.on_grid(grid)
    Fx, Fy = _kx(_forward_diff(grid.nx, h), grid), _ky(_forward_diff(grid.ny, h), grid)
    Ax, Ay = _kx(_average(grid.nx), grid), _ky(_average(grid.ny), grid)
    Dx, Dy = _kx(_centered(grid.nx, h), grid), _ky(_centered(grid.ny, h), grid)
    F = (Fx, Fy)
    A = (Ax, Ay)
    D = (Dx, Dy)
    interior = grid.interior_index
    blocks = [[None, None], [None, None]]
    for i in range(2):
        for k in range(2):
            B = sp.csr_matrix((grid.size, grid.size))
            for j in range(2):
                for l in range(2):
                    c = Cn[:, :, i, j, k, l].ravel()
                    if not np.any(c):
                        continue
                    if j == l:
                        B = B - F[j].T @ sp.diags(A[j] @ c) @ F[j]
                    else:
                        B = B + D[j] @ sp.diags(c) @ D[l]
            blocks[i][k] = B[interior]
    return sp.bmat(blocks, format="csr")


def div_stress(C: ElasticityField, u: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Apply ``div(C : grad u)`` to ``u`` of shape ``(2, nx, ny)``.

    Returns an array of the same shape; boundary nodes are set to zero.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (2,) + grid.shape:
        raise ValueError(f"field must have shape {(2,) + grid.shape}, got {u.shape}")
    L = _cached_operator(C, grid)
    out = np.zeros_like(u)
    vals = (L @ u.reshape(-1)).reshape(2, -1)
    interior = grid.interior_index
    out.reshape(2, -1)[:, interior] = vals
    return out


def _cached_operator(C: ElasticityField, grid: SpatialGrid) -> sp.csr_matrix:
    key = ("div_stress", grid)
    if key not in C._cache:
        C._cache[key] = div_stress_matrix(C, grid)
    return C._cache[key]


def normal_derivative_matrix(grid: SpatialGrid, ix, iy, normal) -> sp.csr_matrix:
    """One-sided second-order ``d/dnu`` at boundary entries, scalar field.

    Uses ``(3 u_0 - 4 u_1 + u_2) / (2h)`` with ``u_1, u_2`` the next two nodes
    inward along ``-normal``.  Shape ``(n_entries, grid.size)``.
    """
    ix = np.asarray(ix)
    iy = np.asarray(iy)
    normal = np.asarray(normal)
    sx = -np.rint(normal[:, 0]).astype(int)
    sy = -np.rint(normal[:, 1]).astype(int)
    rows = np.repeat(np.arange(ix.size), 3)
    cols = np.stack(
        [
            ix * grid.ny + iy,
            (ix + sx) * grid.ny + (iy + sy),
            (ix + 2 * sx) * grid.ny + (iy + 2 * sy),
        ],
        axis=1,
    ).ravel()
    vals = np.tile(np.array([3.0, -4.0, 1.0]) / (2.0 * grid.h), ix.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(ix.size, grid.size))
