"""Initial displacement/velocity fields of the three benchmark problems.

All inclusions are characteristic functions sampled pointwise at the nodes.
"""
from __future__ import annotations

import numpy as np

__all__ = ["initial_fields", "REFERENCE_MAXIMA", "REFERENCE_ERRORS", "TRUE_MAXIMA"]


def _test1(x, y):
    e1 = 3 * (x - 0.5) ** 2 + y**2 <= 0.6**2
    e2 = x**2 + 3 * (y - 0.5) ** 2 <= 0.6**2
    e3 = x**2 + 3 * (y + 0.4) ** 2 <= 0.3**2
    p = np.stack([1.0 * e1, 1.0 * e2])
    q = np.stack([30.0 * e1, 30.0 * e3])
    return p, q


def _test2(x, y):
    p1 = 3 * (x + 0.3) ** 2 + 15 * (y - 0.3) ** 2 < 0.8**2
    p2 = 18 * (x - 0.3) ** 2 + 4 * y**2 < 1
    q1 = np.maximum(18 * (x - 0.5) ** 2, 4 * y**2) < 1
    q2 = np.maximum(15 * (x + y + 0.3) ** 2, 4 * y**2) < 1
    return np.stack([2.0 * p1, 2.0 * p2]), np.stack([20.0 * q1, 20.0 * q2])


def _test3(x, y):
    p1 = 8 * x**2 + 2 * y**2 < 0.5**2
    p2 = (2 * x**2 + 13 * (y + 0.6) ** 2 < 0.7**2) | (
        (2 * (x + 0.5) ** 2 < 0.3**2) & ((y - 0.5) ** 2 < 0.3**2)
    )
    r2 = x**2 + y**2
    q1 = (0.5**2 < r2) & (r2 < 0.8**2)
    q2 = np.maximum((x + y) ** 2, 20 * (x - y) ** 2) < 1
    return np.stack([1.0 * p1, 1.0 * p2]), np.stack([40.0 * q1, 40.0 * q2])


_FIELDS = {"test1": _test1, "test2": _test2, "test3": _test3}

# Reported maxima of the reconstructions (p1, p2, q1, q2) and the matching
# relative errors in percent.
REFERENCE_MAXIMA = {
    "test1": (1.0537, 1.0563, 28.7903, 27.0403),
    "test2": (1.9344, 2.0100, 16.0144, 17.607),
    "test3": (0.9786, 1.0418, 39.4602, 40.6832),
}
REFERENCE_ERRORS = {
    "test1": (5.37, 5.63, 4.03, 9.87),
    "test2": (3.28, 0.5, 19.93, 11.96),
    "test3": (2.14, 4.18, 1.35, 1.71),
}
TRUE_MAXIMA = {
    "test1": (1.0, 1.0, 30.0, 30.0),
    "test2": (2.0, 2.0, 20.0, 20.0),
    "test3": (1.0, 1.0, 40.0, 40.0),
}


def initial_fields(name: str, x, y):
    """``(p, q)`` for preset ``name``, each of shape ``(2,) + shape(x)``."""
    try:
        fn = _FIELDS[name]
    except KeyError:
        raise KeyError(f"unknown initial-data preset {name!r}") from None
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return fn(x, y)
