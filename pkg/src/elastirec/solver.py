"""Iterative least-squares solvers for :class:`SparseSystem`.

LSQR (Paige & Saunders) is the default; CGNR (CG on the normal equations,
in the CGLS arrangement) is kept as a cross-check and is the method that
accepts a symmetric preconditioner.  Both only touch the matrix through
products with ``A`` and ``A^T``.  Convergence is measured by the
normal-equations residual ``||A^T (A x - b)|| / ||A^T b||``.

Both methods decrease the functional ``||A x - b||^2`` monotonically, so the
last iterate is also the best one when the iteration budget runs out.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse.linalg as spla

from .reduction import SparseSystem

__all__ = [
    "SolveOptions",
    "ModalSolution",
    "matvec",
    "rmatvec",
    "solve",
    "lsqr",
    "cgnr",
    "mode_block_preconditioner",
    "PRECONDITIONERS",
]

PRECONDITIONERS = ("none", "jacobi", "mode-block")

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    rtol: float = 1e-8
    max_iter: int | None = None
    method: Literal["lsqr", "cgnr"] = "lsqr"
    precondition: Literal["none", "jacobi", "mode-block"] = "none"

    def __post_init__(self):
        if not 0 < self.rtol < 1:
            raise ValueError(f"tolerance must lie in (0, 1), got {self.rtol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in ("lsqr", "cgnr"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.precondition not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.precondition!r}")
        if self.precondition == "mode-block" and self.method != "cgnr":
            raise ValueError("the mode-block preconditioner needs method='cgnr'")


@dataclass(frozen=True, eq=False)
class ModalSolution:
    """Modes ``(N + 1, 2, nx, ny)`` together with solver statistics."""

    U: np.ndarray
    iterations: int
    rel_residual: float
    converged: bool
    method: str
    residual_history: np.ndarray = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.U.shape[0] - 1

    def stats(self) -> dict:
        return {
            "method": self.method,
            "iterations": int(self.iterations),
            "rel_normal_residual": float(self.rel_residual),
            "converged": bool(self.converged),
        }


def matvec(system: SparseSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (system.shape[1],):
        raise ValueError(f"expected a vector of length {system.shape[1]}, got shape {x.shape}")
    return system.matrix @ x


def rmatvec(system: SparseSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (system.shape[0],):
        raise ValueError(f"expected a vector of length {system.shape[0]}, got shape {y.shape}")
    return system.matrix.T @ y


def lsqr(A, AT, b, n, rtol, max_iter, callback=None):
    """Plain LSQR.  Stops when the estimated ``||A^T r|| <= rtol ||A^T b||``.

    ``callback(k, x, arnorm_estimate)`` is called after every iteration.
    Returns ``(x, iterations, arnorm_estimate, history)``.
    """
    x = np.zeros(n)
    u = b.astype(float, copy=True)
    beta = np.linalg.norm(u)
    if beta == 0:
        return x, 0, 0.0, np.zeros(1)
    u /= beta
    v = AT(u)
    alpha = np.linalg.norm(v)
    if alpha == 0:
        return x, 0, 0.0, np.zeros(1)
    v /= alpha
    w = v.copy()
    phibar, rhobar = beta, alpha
    atb = alpha * beta
    arnorm = atb
    history = [1.0]
    k = 0
    while k < max_iter:
        k += 1
        u = A(v) - alpha * u
        beta = np.linalg.norm(u)
        if beta > 0:
            u /= beta
        v = AT(u) - beta * v
        alpha = np.linalg.norm(v)
        if alpha > 0:
            v /= alpha
        rho = np.hypot(rhobar, beta)
        c, s = rhobar / rho, beta / rho
        theta = s * alpha
        rhobar = -c * alpha
        phi = c * phibar
        phibar = s * phibar
        x += (phi / rho) * w
        w = v - (theta / rho) * w
        arnorm = phibar * alpha * abs(c)
        history.append(arnorm / atb)
        if callback is not None:
            callback(k, x, arnorm)
        if arnorm <= rtol * atb or alpha == 0 or beta == 0 and phibar == 0:
            break
    return x, k, arnorm, np.array(history)


def cgnr(A, AT, b, n, rtol, max_iter, callback=None, precond=None):
    """Conjugate gradients on ``A^T A x = A^T b`` without forming ``A^T A``.

    ``precond(s)`` applies an SPD approximation of ``(A^T A)^{-1}``.  The
    stopping test always uses the true normal residual ``A^T r``.
    """
    M = precond if precond is not None else (lambda v: v)
    x = np.zeros(n)
    r = b.astype(float, copy=True)
    s = AT(r)
    atb = np.linalg.norm(s)
    history = [1.0]
    if atb == 0:
        return x, 0, 0.0, np.array(history)
    z = M(s)
    p = z.copy()
    gamma = np.dot(s, z)
    snorm = atb
    k = 0
    while k < max_iter:
        k += 1
        q = A(p)
        qq = np.dot(q, q)
        if qq == 0:
            break
        a = gamma / qq
        x += a * p
        r -= a * q
        s = AT(r)
        snorm = np.linalg.norm(s)
        history.append(snorm / atb)
        if callback is not None:
            callback(k, x, snorm)
        if snorm <= rtol * atb:
            break
        z = M(s)
        gnew = np.dot(s, z)
        p = z + (gnew / gamma) * p
        gamma = gnew
    return x, k, snorm, np.array(history)


def mode_block_preconditioner(system: SparseSystem):
    """Exact inverse of the per-mode diagonal blocks of ``A^T A``.

    Each block couples the two displacement components of one mode over the
    whole grid; it is sparse, SPD (for ``eta > 0``) and factorized once.
    """
    A = system.matrix.tocsc()
    nm = 2 * system.grid.size
    factors = []
    for m in range(system.N + 1):
        Am = A[:, m * nm : (m + 1) * nm]
        factors.append(spla.splu((Am.T @ Am).tocsc()))

    def apply(s):
        out = np.empty_like(s)
        for m, f in enumerate(factors):
            out[m * nm : (m + 1) * nm] = f.solve(s[m * nm : (m + 1) * nm])
        return out

    return apply


def solve(system: SparseSystem, opts: SolveOptions | None = None, callback=None) -> ModalSolution:
    """Minimize ``||A x - b||`` and return the modes.

    ``opts.precondition``:

    * ``"jacobi"`` scales the columns by the inverse root of ``diag(A^T A)``
      (LSQR then stops on the residual of the scaled problem);
    * ``"mode-block"`` runs preconditioned CGNR with the exact per-mode
      blocks of ``A^T A`` (see :func:`mode_block_preconditioner`).

    The returned residual is always the unscaled one, recomputed from ``x``.
    """
    opts = opts or SolveOptions()
    A = system.matrix
    n = system.shape[1]
    max_iter = opts.max_iter or 10 * n
    b = system.rhs
    if opts.precondition == "jacobi":
        colnorm = np.sqrt(np.asarray(A.multiply(A).sum(axis=0)).ravel())
        scale = np.where(colnorm > 0, 1.0 / np.where(colnorm > 0, colnorm, 1.0), 1.0)
    else:
        scale = None
    AT = A.T.tocsr()

    if scale is None:
        Ap, ATp = (lambda y: A @ y), (lambda r: AT @ r)
    else:
        Ap, ATp = (lambda y: A @ (scale * y)), (lambda r: scale * (AT @ r))
        if callback is not None:
            user_cb = callback

            def callback(k, y, res):
                user_cb(k, scale * y, res)

    if opts.method == "lsqr":
        y, its, _, hist = lsqr(Ap, ATp, b, n, opts.rtol, max_iter, callback)
    else:
        precond = mode_block_preconditioner(system) if opts.precondition == "mode-block" else None
        y, its, _, hist = cgnr(Ap, ATp, b, n, opts.rtol, max_iter, callback, precond)
    x = y if scale is None else scale * y
    atb = np.linalg.norm(AT @ b)
    res = np.linalg.norm(AT @ (A @ x - b))
    rel = res / atb if atb > 0 else 0.0
    converged = bool(rel <= opts.rtol)
    if not converged:
        log.warning("%s stopped after %d iterations at relative residual %.3e", opts.method, its, rel)
    return ModalSolution(system.unpack(x), its, float(rel), converged, opts.method, hist)
