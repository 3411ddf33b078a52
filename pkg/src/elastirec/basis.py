"""Legendre polynomial-exponential time basis.

The basis functions are ``Psi_n(t) = exp(t) Q_n(t)`` on ``[0, T]`` where
``Q_n(t) = sqrt((2n + 1) / T) P_n(2t/T - 1)`` are the shifted, normalized
Legendre polynomials.  ``{Psi_n}`` is orthonormal for the weighted inner
product ``<u, v> = int_0^T exp(-2t) u(t) v(t) dt``.

All basis-internal integrals reduce to polynomial integrals once the
exponential weight cancels, so they are evaluated exactly by Gauss-Legendre
quadrature.  Data sampled on a uniform measurement grid uses the composite
trapezoid rule instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "QuadratureRule",
    "TimeBasis",
    "gauss_rule",
    "trapezoid_rule",
    "legendre_all",
    "build_basis",
    "weighted_inner",
    "fourier_mode",
    "fourier_modes",
    "project",
    "coupling_matrix",
    "decay_profile",
    "d_norm_growth",
    "dd_norm_growth",
    "second_derivative_gap",
]


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights of a quadrature rule on ``[0, T]``."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: Literal["gauss", "trapezoid"]
    T: float

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0):
            raise ValueError("quadrature nodes must be strictly increasing")
        if np.any(weights <= 0):
            raise ValueError("quadrature weights must be positive")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size


def gauss_rule(T: float, n: int) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule mapped onto ``[0, T]``."""
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * T * (x + 1.0), 0.5 * T * w, "gauss", float(T))


def trapezoid_rule(times) -> QuadratureRule:
    """Composite trapezoid rule on the sample times ``times`` (starting at 0)."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("need at least two sample times")
    if abs(t[0]) > 1e-12 * max(1.0, abs(t[-1])):
        raise ValueError("sample times must start at t = 0")
    dt = np.diff(t)
    w = np.zeros_like(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return QuadratureRule(t, w, "trapezoid", float(t[-1]))


def legendre_all(x, N: int):
    """Legendre polynomials and their first two derivatives up to degree ``N``.

    Uses the three-term recurrence ``(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}``
    together with ``P'_{n+1} = P'_{n-1} + (2n+1) P_n`` (and the same identity
    differentiated once more).

    Returns three arrays of shape ``(N + 1,) + np.shape(x)``.
    """
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("legendre_all is defined on [-1, 1] only")
    P = np.zeros((N + 1,) + x.shape)
    dP = np.zeros_like(P)
    ddP = np.zeros_like(P)
    P[0] = 1.0
    if N >= 1:
        P[1] = x
        dP[1] = 1.0
    for n in range(1, N):
        P[n + 1] = ((2 * n + 1) * x * P[n] - n * P[n - 1]) / (n + 1)
        dP[n + 1] = dP[n - 1] + (2 * n + 1) * P[n]
        ddP[n + 1] = ddP[n - 1] + (2 * n + 1) * dP[n]
    return P, dP, ddP


def _shifted(t, T: float, N: int):
    """``Q_n, Q_n', Q_n''`` at times ``t``."""
    t = np.asarray(t, dtype=float)
    x = np.clip(2.0 * t / T - 1.0, -1.0, 1.0)
    P, dP, ddP = legendre_all(x, N)
    scale = np.sqrt((2.0 * np.arange(N + 1) + 1.0) / T)
    scale = scale.reshape((N + 1,) + (1,) * t.ndim)
    return scale * P, scale * (2.0 / T) * dP, scale * (2.0 / T) ** 2 * ddP


@dataclass(frozen=True, eq=False)
class TimeBasis:
    """Tabulated basis ``Psi_0..Psi_N`` on the nodes of ``quad``.

    Tables have shape ``(N + 1, len(quad))``.  ``psi0`` and ``dpsi0`` hold the
    exact values ``Psi_n(0)`` and ``Psi_n'(0)``.
    """

    T: float
    N: int
    quad: QuadratureRule
    Q: np.ndarray
    dQ: np.ndarray
    ddQ: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    ddpsi: np.ndarray
    psi0: np.ndarray
    dpsi0: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return self.quad.nodes

    def evaluate(self, t, derivative: int = 0) -> np.ndarray:
        """``Psi_n^{(derivative)}(t)`` for ``n = 0..N``; shape ``(N + 1,) + shape(t)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12 * self.T) or np.any(t > self.T * (1 + 1e-12)):
            raise ValueError(f"t must lie in [0, {self.T}]")
        Q, dQ, ddQ = _shifted(t, self.T, self.N)
        e = np.exp(t)
        if derivative == 0:
            return e * Q
        if derivative == 1:
            return e * (Q + dQ)
        if derivative == 2:
            return e * (Q + 2.0 * dQ + ddQ)
        raise ValueError("only derivatives of order 0, 1, 2 are tabulated")


def endpoint_values(T: float, N: int):
    """Exact ``Psi_n(0)`` and ``Psi_n'(0)`` from ``P_n(-1)`` and ``P_n'(-1)``."""
    n = np.arange(N + 1, dtype=float)
    sign = np.where(np.arange(N + 1) % 2 == 0, 1.0, -1.0)
    q0 = sign * np.sqrt((2.0 * n + 1.0) / T)
    # P_n'(-1) = (-1)^(n-1) n(n+1)/2, so Q_n'(0) = -(2/T) q0 n(n+1)/2.
    dq0 = -q0 * n * (n + 1.0) / T
    return q0, q0 + dq0


def build_basis(T: float, N: int, quad: QuadratureRule | None = None) -> TimeBasis:
    """Tabulate the basis on ``quad``.

    Defaults to a Gauss rule with ``max(2N + 2, 64)`` nodes.  A Gauss rule with
    fewer than ``N + 1`` nodes is rejected, since orthonormality is then no
    longer exact.
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    if quad is None:
        quad = gauss_rule(T, max(2 * N + 2, 64))
    if abs(quad.T - T) > 1e-9 * T:
        raise ValueError(f"quadrature is on [0, {quad.T}] but basis needs [0, {T}]")
    if quad.kind == "gauss" and len(quad) < N + 1:
        raise ValueError(
            f"Gauss rule with {len(quad)} nodes cannot integrate degree {2 * N} exactly; "
            f"need at least {N + 1}"
        )
    Q, dQ, ddQ = _shifted(quad.nodes, T, N)
    e = np.exp(quad.nodes)
    psi = e * Q
    dpsi = e * (Q + dQ)
    ddpsi = e * (Q + 2.0 * dQ + ddQ)
    psi0, dpsi0 = endpoint_values(T, N)
    for a in (Q, dQ, ddQ, psi, dpsi, ddpsi, psi0, dpsi0):
        a.setflags(write=False)
    return TimeBasis(float(T), int(N), quad, Q, dQ, ddQ, psi, dpsi, ddpsi, psi0, dpsi0)


def _weighted(quad: QuadratureRule) -> np.ndarray:
    return quad.weights * np.exp(-2.0 * quad.nodes)


def weighted_inner(u, v, quad: QuadratureRule) -> float:
    """``sum_i w_i exp(-2 t_i) u(t_i) v(t_i)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (len(quad),) or v.shape != (len(quad),):
        raise ValueError(
            f"series must have length {len(quad)}, got {u.shape} and {v.shape}"
        )
    return float(np.sum(_weighted(quad) * u * v))


def fourier_modes(series, basis: TimeBasis) -> np.ndarray:
    """All modes ``<series, Psi_n>`` for ``n = 0..N``.

    ``series`` has time along axis 0; trailing axes (space, components) are
    carried through, so the result has shape ``(N + 1,) + series.shape[1:]``.
    """
    s = np.asarray(series, dtype=float)
    if s.shape[0] != len(basis.quad):
        raise ValueError(
            f"series has {s.shape[0]} samples but the basis rule has {len(basis.quad)}"
        )
    wpsi = basis.psi * _weighted(basis.quad)
    return np.tensordot(wpsi, s, axes=(1, 0))


def fourier_mode(series, basis: TimeBasis, n: int) -> float:
    if not 0 <= n <= basis.N:
        raise IndexError(f"mode {n} outside 0..{basis.N}")
    s = np.asarray(series, dtype=float)
    if s.shape != (len(basis.quad),):
        raise ValueError(f"series must have length {len(basis.quad)}")
    return float(np.sum(_weighted(basis.quad) * s * basis.psi[n]))


def project(series, basis: TimeBasis) -> np.ndarray:
    """Orthogonal projection onto ``span{Psi_0..Psi_N}``, sampled on the basis nodes."""
    c = fourier_modes(series, basis)
    return np.tensordot(basis.psi, c, axes=(0, 0))


def coupling_matrix(basis: TimeBasis) -> np.ndarray:
    """``s[m, n] = int_0^T exp(-2t) Psi_n''(t) Psi_m(t) dt`` in closed form.

    The integrand is ``Q_m (Q_n + 2 Q_n' + Q_n'')``.  Expanding ``P_n'`` and
    ``P_n''`` in Legendre polynomials gives, for ``n > m``,

        2 int Q_m Q_n'  = 4 r / T                          (n - m odd)
        int Q_m Q_n''   = 2 r (n(n+1) - m(m+1)) / T^2      (n - m even)

    with ``r = sqrt((2m+1)(2n+1))``, and ``s = I`` on and below the diagonal.
    Summing the polynomial by quadrature instead loses ~1e-8 on the diagonal
    at N = 30 to cancellation against entries of size 1e5.
    """
    N, T = basis.N, basis.T
    m, n = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    r = np.sqrt((2.0 * m + 1.0) * (2.0 * n + 1.0))
    odd = 4.0 * r / T
    even = 2.0 * r * (n * (n + 1.0) - m * (m + 1.0)) / T**2
    S = np.where(n > m, np.where((n - m) % 2 == 1, odd, even), 0.0)
    S[np.diag_indices(N + 1)] = 1.0
    return S


def decay_profile(series, basis: TimeBasis, k: int) -> np.ndarray:
    """``n^k |<series, Psi_n>|`` for ``n = 0..N``."""
    c = fourier_modes(series, basis)
    n = np.arange(basis.N + 1, dtype=float)
    return n**k * np.abs(c)


def _sobolev_norms(basis: TimeBasis, order: int) -> np.ndarray:
    if basis.quad.kind != "gauss":
        raise ValueError("derivative norms need a Gauss rule")
    if order == 1:
        poly = basis.Q + basis.dQ
    else:
        poly = basis.Q + 2.0 * basis.dQ + basis.ddQ
    return np.sqrt(poly**2 @ basis.quad.weights)


def d_norm_growth(basis: TimeBasis) -> np.ndarray:
    """``||Psi_n'|| / n^{3/2}`` for ``n = 1..N`` (weighted norm)."""
    n = np.arange(1, basis.N + 1, dtype=float)
    return _sobolev_norms(basis, 1)[1:] / n**1.5


def dd_norm_growth(basis: TimeBasis) -> np.ndarray:
    """``||Psi_n''|| / n^{7/2}`` for ``n = 1..N`` (weighted norm)."""
    n = np.arange(1, basis.N + 1, dtype=float)
    return _sobolev_norms(basis, 2)[1:] / n**3.5


def second_derivative_gap(u, upp, T: float, N: int, dps: int = 50) -> float:
    """``||P_N(u'') - (P_N u)''||`` in the weighted norm, in ``dps``-digit arithmetic.

    ``u`` and ``upp`` must accept and return mpmath numbers.  Since
    ``Psi_n''`` lies in the span of ``Psi_0..Psi_n`` with coefficients
    ``s[:, n]``, the modes of ``(P_N u)''`` are ``s @ c`` and the gap is a
    plain vector norm.  Double precision bottoms out near 1e-10 here (mode
    errors of 1e-16 times entries of ``s`` of size 1e5), long before the
    true gap stops shrinking.
    """
    import mpmath as mp

    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    with mp.workdps(dps):
        T = mp.mpf(T)

        def mode(f, m):
            scale = mp.sqrt((2 * m + 1) / T)
            return mp.quad(lambda t: mp.exp(-t) * scale * mp.legendre(m, 2 * t / T - 1) * f(t), [0, T], method="gauss-legendre")

        c = [mode(u, m) for m in range(N + 1)]
        total = mp.mpf(0)
        for m in range(N + 1):
            acc = c[m]
            for n in range(m + 1, N + 1):
                r = mp.sqrt((2 * m + 1) * (2 * n + 1))
                acc += (4 * r / T if (n - m) % 2 else 2 * r * (n * (n + 1) - m * (m + 1)) / T**2) * c[n]
            total += (mode(upp, m) - acc) ** 2
        return float(mp.sqrt(total))
