"""Time-dimensional reduction and the quasi-reversibility least-squares system.

Unknowns are the spatial modes ``w_0..w_N`` (two components each) at every
node of the inner grid, boundary included.  With ``p = 0`` the functional is

    sum_m || div(C:grad w_m) - sum_n s_mn w_n ||^2_{L2}
      + sum_m int_Gamma |w_m - f_m|^2 + |d_nu w_m - g_m|^2
      + eta sum_m ||w_m||^2_{H2},

discretized so that ``||A x - b||^2`` is a quadrature of it: interior rows
carry ``h`` (root of the cell area), boundary rows ``sqrt(h)`` (root of the
arc length).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .basis import TimeBasis, build_basis, fourier_modes, gauss_rule, trapezoid_rule
from .elasticity import ElasticityField, SpatialGrid, div_stress_matrix, normal_derivative_matrix
from .forward import BoundaryTraces

__all__ = [
    "TAGS",
    "ModalBoundaryData",
    "SparseSystem",
    "SpatialOperators",
    "boundary_mask",
    "modal_boundary_data",
    "spatial_operators",
    "assemble",
    "spacetime_residual",
]

TAGS = ("pde", "dirichlet", "neumann", "reg-0", "reg-1", "reg-2")


def boundary_mask(grid: SpatialGrid, fraction: float = 1.0, start: int = 0) -> np.ndarray:
    """Contiguous arc covering ``fraction`` of the distinct boundary nodes.

    The arc follows the counter-clockwise walk of
    :meth:`SpatialGrid.boundary_entries` beginning at node ``start``.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"boundary fraction must lie in (0, 1], got {fraction}")
    nb = 2 * (grid.nx + grid.ny) - 4
    count = max(1, int(round(fraction * nb)))
    mask = np.zeros(nb, dtype=bool)
    mask[(start + np.arange(count)) % nb] = True
    return mask


@dataclass(frozen=True, eq=False)
class ModalBoundaryData:
    """Modes ``f_m, g_m`` per boundary entry, shape ``(N + 1, n_entries, 2)``.

    ``node_mask`` selects the distinct boundary nodes of the observed part of
    the boundary; an entry participates when its node does.
    """

    grid: SpatialGrid
    ix: np.ndarray
    iy: np.ndarray
    normal: np.ndarray
    node_id: np.ndarray
    f: np.ndarray
    g: np.ndarray
    node_mask: np.ndarray

    @property
    def N(self) -> int:
        return self.f.shape[0] - 1

    @property
    def entry_mask(self) -> np.ndarray:
        return self.node_mask[self.node_id]

    def dirichlet_entries(self) -> np.ndarray:
        """One entry per observed boundary node (its first occurrence)."""
        _, first = np.unique(self.node_id, return_index=True)
        first = np.sort(first)
        return first[self.node_mask[self.node_id[first]]]


def modal_boundary_data(traces: BoundaryTraces, basis: TimeBasis, mask=None) -> ModalBoundaryData:
    """Project the traces onto ``Psi_0..Psi_N`` with the trapezoid rule on the sample times."""
    if abs(traces.T - basis.T) > 1e-9 * basis.T:
        raise ValueError(f"traces end at T = {traces.T} but the basis is built for T = {basis.T}")
    trap = build_basis(basis.T, basis.N, trapezoid_rule(traces.times))
    if mask is None:
        mask = np.ones(traces.node_id.max() + 1, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (traces.node_id.max() + 1,):
        raise ValueError("node mask must have one flag per distinct boundary node")
    if not mask.any():
        raise ValueError("boundary mask selects no nodes")
    return ModalBoundaryData(
        grid=traces.grid,
        ix=traces.ix,
        iy=traces.iy,
        normal=traces.normal,
        node_id=traces.node_id,
        f=fourier_modes(traces.f, trap),
        g=fourier_modes(traces.g, trap),
        node_mask=mask,
    )


def _second_diff(n: int, h: float) -> sp.csr_matrix:
    """Centered second difference with one-sided rows at both ends."""
    D = sp.lil_matrix((n, n))
    for i in range(n):
        c = min(max(i, 1), n - 2)
        D[i, c - 1] = 1.0 / h**2
        D[i, c] = -2.0 / h**2
        D[i, c + 1] = 1.0 / h**2
    return D.tocsr()


def _first_diff_full(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference with second-order one-sided rows at both ends."""
    D = sp.lil_matrix((n, n))
    D[0, 0:3] = np.array([-3.0, 4.0, -1.0]) / (2 * h)
    D[n - 1, n - 3 : n] = np.array([1.0, -4.0, 3.0]) / (2 * h)
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5 / h
        D[i, i + 1] = 0.5 / h
    return D.tocsr()


def _forward_diff(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr") / h


@dataclass(frozen=True, eq=False)
class SpatialOperators:
    """Scalar/vector spatial operators shared by both forms of the functional.

    ``L`` maps a stacked two-component field to interior div-stress values and
    ``interior`` restricts a stacked field to the same rows.  ``dirichlet`` and
    ``neumann`` act on a scalar field; ``reg`` lists the scalar H2 pieces
    ``(order, matrix)``.
    """

    grid: SpatialGrid
    L: sp.csr_matrix
    interior: sp.csr_matrix
    dirichlet: sp.csr_matrix
    neumann: sp.csr_matrix
    reg: tuple


def spatial_operators(C: ElasticityField, grid: SpatialGrid, data: ModalBoundaryData) -> SpatialOperators:
    if data.grid != grid:
        raise ValueError("boundary data belong to a different grid")
    n = grid.size
    h = grid.h
    L = div_stress_matrix(C, grid)
    idx = grid.interior_index
    R1 = sp.csr_matrix((np.ones(idx.size), (np.arange(idx.size), idx)), shape=(idx.size, n))
    Rint = sp.block_diag([R1, R1], format="csr")

    dn = data.dirichlet_entries()
    flat = data.ix[dn] * grid.ny + data.iy[dn]
    E = sp.csr_matrix((np.ones(dn.size), (np.arange(dn.size), flat)), shape=(dn.size, n))
    em = np.flatnonzero(data.entry_mask)
    Nm = normal_derivative_matrix(grid, data.ix[em], data.iy[em], data.normal[em])

    Ix, Iy = sp.identity(grid.nx, format="csr"), sp.identity(grid.ny, format="csr")
    reg = (
        (0, sp.identity(n, format="csr")),
        (1, sp.kron(_forward_diff(grid.nx, h), Iy, format="csr")),
        (1, sp.kron(Ix, _forward_diff(grid.ny, h), format="csr")),
        (2, sp.kron(_second_diff(grid.nx, h), Iy, format="csr")),
        (2, sp.kron(Ix, _second_diff(grid.ny, h), format="csr")),
        (2, sp.kron(_first_diff_full(grid.nx, h), _first_diff_full(grid.ny, h), format="csr")),
    )
    return SpatialOperators(grid, L, Rint, E, Nm, reg)


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """Row-tagged triplets of the least-squares problem ``min ||A x - b||``.

    Unknown ``x[(m * 2 + c) * n_nodes + node]`` is component ``c`` of mode
    ``m`` at flat node index ``node`` of ``grid``.
    """

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray
    tags: np.ndarray
    shape: tuple[int, int]
    grid: SpatialGrid
    N: int
    eta: float

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=self.shape)

    @property
    def n_unknowns(self) -> int:
        return self.shape[1]

    def index(self, m: int, node: int, comp: int) -> int:
        return (m * 2 + comp) * self.grid.size + node

    def rows_tagged(self, tag: str) -> np.ndarray:
        return np.flatnonzero(self.tags == TAGS.index(tag))

    def unpack(self, x: np.ndarray) -> np.ndarray:
        """Solution vector to modes of shape ``(N + 1, 2, nx, ny)``."""
        return np.asarray(x).reshape((self.N + 1, 2) + self.grid.shape)

    def write_matrix_market(self, path) -> None:
        import scipy.io

        scipy.io.mmwrite(str(path), self.matrix.tocoo(), comment="quasi-reversibility least-squares matrix")


def _from_blocks(blocks, rhs, tags, shape, grid, N, eta) -> SparseSystem:
    A = sp.vstack(blocks, format="coo")
    return SparseSystem(
        rows=A.row.astype(np.int64),
        cols=A.col.astype(np.int64),
        vals=A.data,
        rhs=np.concatenate(rhs),
        tags=np.concatenate(tags).astype(np.int8),
        shape=A.shape,
        grid=grid,
        N=N,
        eta=eta,
    )


def assemble(
    C: ElasticityField,
    grid: SpatialGrid,
    basis: TimeBasis,
    S: np.ndarray,
    data: ModalBoundaryData,
    eta: float,
    allow_zero_eta: bool = False,
) -> SparseSystem:
    """Assemble the weighted least-squares system for modes ``0..N``."""
    if eta < 0 or (eta == 0 and not allow_zero_eta):
        raise ValueError(f"regularization parameter must be positive, got {eta}")
    N = basis.N
    if data.N < N:
        raise ValueError(f"boundary data carry {data.N + 1} modes, need {N + 1}")
    if S.shape != (N + 1, N + 1):
        raise ValueError("coupling matrix does not match the basis order")
    ops = spatial_operators(C, grid, data)
    h = grid.h
    M = N + 1
    I2M = sp.identity(2 * M, format="csr")

    blocks, rhs, tags = [], [], []

    Su = sp.csr_matrix(np.triu(S))
    pde = h * (sp.kron(sp.identity(M), ops.L) - sp.kron(Su, ops.interior))
    blocks.append(pde)
    rhs.append(np.zeros(pde.shape[0]))
    tags.append(np.full(pde.shape[0], 0))

    wb = np.sqrt(h)
    dn = data.dirichlet_entries()
    D = wb * sp.kron(I2M, ops.dirichlet)
    blocks.append(D)
    rhs.append(wb * data.f[:N + 1][:, dn, :].transpose(0, 2, 1).reshape(-1))
    tags.append(np.full(D.shape[0], 1))

    em = np.flatnonzero(data.entry_mask)
    Nn = wb * sp.kron(I2M, ops.neumann)
    blocks.append(Nn)
    rhs.append(wb * data.g[:N + 1][:, em, :].transpose(0, 2, 1).reshape(-1))
    tags.append(np.full(Nn.shape[0], 2))

    if eta > 0:
        wr = np.sqrt(eta) * h
        for order, R in ops.reg:
            B = wr * sp.kron(I2M, R)
            blocks.append(B)
            rhs.append(np.zeros(B.shape[0]))
            tags.append(np.full(B.shape[0], 3 + order))

    return _from_blocks(blocks, rhs, tags, None, grid, N, eta)


def spacetime_residual(
    U: np.ndarray,
    basis: TimeBasis,
    data: ModalBoundaryData,
    C: ElasticityField,
    grid: SpatialGrid,
    eta: float,
    n_time: int | None = None,
) -> float:
    """Space-time form of the functional evaluated on the expansion of ``U``.

    ``U`` has shape ``(N + 1, 2, nx, ny)``.  The expansion, its second time
    derivative and the projected boundary data are sampled on a Gauss rule in
    time and the weighted time integral is taken directly.
    """
    N = basis.N
    U = np.asarray(U, dtype=float)
    if U.shape != (N + 1, 2) + grid.shape:
        raise ValueError(f"modes must have shape {(N + 1, 2) + grid.shape}")
    ops = spatial_operators(C, grid, data)
    quad = gauss_rule(basis.T, n_time or (3 * N + 7))
    t = quad.nodes
    wt = quad.weights * np.exp(-2.0 * t)
    psi = basis.evaluate(t, 0)
    ddpsi = basis.evaluate(t, 2)

    flatU = U.reshape(N + 1, 2, -1)
    w = np.tensordot(psi, flatU, axes=(0, 0))  # (nt, 2, n)
    wtt = np.tensordot(ddpsi, flatU, axes=(0, 0))
    fP = np.tensordot(psi, data.f[:N + 1], axes=(0, 0))  # (nt, ne, 2)
    gP = np.tensordot(psi, data.g[:N + 1], axes=(0, 0))

    h = grid.h
    dn = data.dirichlet_entries()
    em = np.flatnonzero(data.entry_mask)
    total = 0.0
    for q in range(t.size):
        wq = w[q].reshape(-1)
        r = ops.L @ wq - ops.interior @ wtt[q].reshape(-1)
        val = h**2 * np.dot(r, r)
        for c in range(2):
            dr = ops.dirichlet @ w[q, c] - fP[q, dn, c]
            nr = ops.neumann @ w[q, c] - gP[q, em, c]
            val += h * (np.dot(dr, dr) + np.dot(nr, nr))
            if eta > 0:
                for _, R in ops.reg:
                    v = R @ w[q, c]
                    val += eta * h**2 * np.dot(v, v)
        total += wt[q] * val
    return float(total)
