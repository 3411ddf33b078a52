"""Initial data from the modal solution, and reconstruction error metrics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .basis import TimeBasis

__all__ = [
    "ComponentMetrics",
    "ReconstructionReport",
    "reconstruct_initial",
    "spacetime_eval",
    "metrics",
    "report",
]


def _modes(U) -> np.ndarray:
    return np.asarray(getattr(U, "U", U), dtype=float)


def reconstruct_initial(U, basis: TimeBasis):
    """``p = sum_n u_n Psi_n(0)`` and ``q = sum_n u_n Psi_n'(0)``."""
    U = _modes(U)
    if U.shape[0] != basis.N + 1:
        raise ValueError(f"solution has {U.shape[0]} modes, basis has {basis.N + 1}")
    p = np.tensordot(basis.psi0, U, axes=(0, 0))
    q = np.tensordot(basis.dpsi0, U, axes=(0, 0))
    return p, q


def spacetime_eval(U, basis: TimeBasis, t, derivative: int = 0) -> np.ndarray:
    """Expansion ``sum_n u_n(x) Psi_n(t)`` (or its time derivative) at a single time."""
    U = _modes(U)
    if U.shape[0] != basis.N + 1:
        raise ValueError(f"solution has {U.shape[0]} modes, basis has {basis.N + 1}")
    vals = basis.evaluate(np.asarray(float(t)), derivative)
    return np.tensordot(vals, U, axes=(0, 0))


@dataclass(frozen=True)
class ComponentMetrics:
    max_computed: float
    max_true: float
    max_rel_error: float
    rel_l2_error: float
    iou: float


def metrics(computed, truth, threshold: float = 0.5) -> ComponentMetrics:
    """Max-value relative error, relative L2 error and support IoU.

    Supports are the nodes at or above ``threshold`` times each field's own
    maximum.  When the truth vanishes identically the errors are absolute.
    """
    a = np.asarray(computed, dtype=float)
    b = np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"fields differ in shape: {a.shape} vs {b.shape}")
    ma, mb = float(np.max(a)), float(np.max(b))
    nb = float(np.linalg.norm(b))
    max_err = abs(ma - mb) / abs(mb) if mb != 0 else abs(ma)
    l2 = float(np.linalg.norm(a - b)) / nb if nb > 0 else float(np.linalg.norm(a))
    sa = a >= threshold * ma if ma > 0 else np.zeros(a.shape, bool)
    sb = b >= threshold * mb if mb > 0 else np.zeros(b.shape, bool)
    union = np.count_nonzero(sa | sb)
    iou = np.count_nonzero(sa & sb) / union if union else 1.0
    return ComponentMetrics(ma, mb, float(max_err), float(l2), float(iou))


COMPONENTS = ("p1", "p2", "q1", "q2")


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    p_comp: np.ndarray
    q_comp: np.ndarray
    components: dict

    def to_dict(self) -> dict:
        return {k: asdict(v) for k, v in self.components.items()}

    def max_rel_errors(self) -> dict:
        return {k: v.max_rel_error for k, v in self.components.items()}


def report(p_comp, q_comp, p_true, q_true) -> ReconstructionReport:
    fields = (p_comp[0], p_comp[1], q_comp[0], q_comp[1])
    truths = (p_true[0], p_true[1], q_true[0], q_true[1])
    comps = {name: metrics(a, b) for name, a, b in zip(COMPONENTS, fields, truths)}
    return ReconstructionReport(np.asarray(p_comp), np.asarray(q_comp), comps)
