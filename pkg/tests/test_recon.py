import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import legendre as npleg

from elastirec.basis import build_basis, fourier_modes, project
from elastirec.recon import metrics, reconstruct_initial, report, spacetime_eval

SHAPE = (2, 5, 4)


def simpson_modes(fn, N, T=1.0, n=10**6):
    """Modes <fn, Psi_m> by composite Simpson, with Psi_m from numpy's Legendre series."""
    t = np.linspace(0, T, n + 1)
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= T / (3 * n)
    x = 2 * t / T - 1
    out = np.empty(N + 1)
    for m in range(N + 1):
        c = np.zeros(m + 1)
        c[m] = 1.0
        out[m] = np.sum(w * np.exp(-t) * fn(t) * np.sqrt((2 * m + 1) / T) * npleg.legval(x, c))
    return out


def expansion_at_zero(modes, T=1.0):
    """Value and t-derivative at 0 of sum_m c_m e^t Q_m(t), via numpy Legendre derivatives."""
    N = modes.size - 1
    scale = np.sqrt((2 * np.arange(N + 1) + 1) / T)
    c = modes * scale
    value = npleg.legval(-1.0, c)
    slope = npleg.legval(-1.0, npleg.legder(c)) * 2 / T
    return value, value + slope


def test_single_zeroth_mode():
    basis = build_basis(1.0, 4)
    phi = np.random.default_rng(0).normal(size=SHAPE)
    U = np.zeros((5,) + SHAPE)
    U[0] = phi
    p, q = reconstruct_initial(U, basis)
    assert np.allclose(p, phi, atol=1e-15)
    assert np.allclose(q, phi, atol=1e-15)


def test_zero_modes():
    p, q = reconstruct_initial(np.zeros((4,) + SHAPE), build_basis(1.0, 3))
    assert not np.any(p) and not np.any(q)


def test_linear_in_time_field():
    N = 30
    basis = build_basis(1.0, N)
    phi = np.random.default_rng(1).normal(size=SHAPE)
    series = (1 + basis.nodes)[:, None, None, None] * phi
    U = fourier_modes(series, basis)
    p, q = reconstruct_initial(U, basis)
    oracle = simpson_modes(lambda t: 1 + t, N)
    p_or, q_or = expansion_at_zero(oracle)
    # Threshold: the projection error of the oracle series at t = 0 plus quadrature slack.
    tol_p = abs(p_or - 1) + 1e-8
    tol_q = abs(q_or - 1) + 1e-8
    assert np.max(np.abs(p - phi)) <= tol_p * np.abs(phi).max()
    assert np.max(np.abs(q - phi)) <= tol_q * np.abs(phi).max()


def test_mode_count_checked():
    with pytest.raises(ValueError, match="modes"):
        reconstruct_initial(np.zeros((3,) + SHAPE), build_basis(1.0, 4))


@settings(max_examples=20, deadline=None)
@given(st.floats(-10, 10, allow_subnormal=False), st.floats(-10, 10, allow_subnormal=False), st.integers(0, 10**6))
def test_reconstruction_is_linear(a, b, seed):
    basis = build_basis(1.0, 6)
    rng = np.random.default_rng(seed)
    U, V = rng.normal(size=(2, 7) + SHAPE)
    pu, qu = reconstruct_initial(U, basis)
    pv, qv = reconstruct_initial(V, basis)
    p, q = reconstruct_initial(a * U + b * V, basis)
    scale = 1 + abs(a) + abs(b)
    assert np.allclose(p, a * pu + b * pv, atol=1e-11 * scale * np.abs(pu).max())
    assert np.allclose(q, a * qu + b * qv, atol=1e-11 * scale * np.abs(qu).max())


def test_round_trip_for_fields_in_the_span():
    N = 12
    basis = build_basis(1.0, N)
    rng = np.random.default_rng(2)
    coef = rng.normal(size=(N + 1,) + SHAPE)
    series = np.tensordot(basis.psi.T, coef, axes=(1, 0))
    p, q = reconstruct_initial(fourier_modes(series, basis), basis)
    assert np.max(np.abs(p - spacetime_eval(coef, basis, 0.0))) < 1e-8
    assert np.max(np.abs(q - spacetime_eval(coef, basis, 0.0, 1))) < 1e-8


# --------------------------------------------------------- spacetime_eval


def test_spacetime_at_zero_matches_initial_value():
    basis = build_basis(2.0, 8)
    U = np.random.default_rng(3).normal(size=(9,) + SHAPE)
    p, _ = reconstruct_initial(U, basis)
    assert np.allclose(spacetime_eval(U, basis, 0.0), p, atol=1e-12 * np.abs(p).max())


def test_single_mode_at_a_gauss_node():
    basis = build_basis(1.0, 6)
    k, i = 4, 17
    phi = np.random.default_rng(4).normal(size=SHAPE)
    U = np.zeros((7,) + SHAPE)
    U[k] = phi
    out = spacetime_eval(U, basis, basis.nodes[i])
    assert np.allclose(out, phi * basis.psi[k, i], rtol=1e-13, atol=1e-14)


def test_time_derivative_by_finite_differences():
    basis = build_basis(1.0, 10)
    U = np.random.default_rng(5).normal(size=(11,) + SHAPE)
    _, q = reconstruct_initial(U, basis)
    dt = 1e-5
    f0, f1, f2 = (spacetime_eval(U, basis, k * dt) for k in range(3))
    fd = (-3 * f0 + 4 * f1 - f2) / (2 * dt)
    assert np.max(np.abs(fd - q)) <= 1e-3 * np.abs(q).max()


def test_spacetime_reproduces_the_projection():
    N = 8
    basis = build_basis(1.0, N)
    t = basis.nodes
    phi = np.random.default_rng(6).normal(size=SHAPE)
    series = np.sin(3 * t)[:, None, None, None] * phi
    U = fourier_modes(series, basis)
    proj = project(series, basis)
    for i in (0, 20, 63):
        assert np.allclose(spacetime_eval(U, basis, t[i]), proj[i], atol=1e-12)


def test_spacetime_eval_range():
    basis = build_basis(1.0, 2)
    with pytest.raises(ValueError, match="t must lie"):
        spacetime_eval(np.zeros((3,) + SHAPE), basis, 1.5)


# ---------------------------------------------------------------- metrics


def inclusion(shift=0):
    a = np.zeros((20, 20))
    a[5 + shift : 10 + shift, 5:10] = 1.0
    return a


def test_identical_fields():
    m = metrics(inclusion(), inclusion())
    assert m.max_rel_error == 0 and m.rel_l2_error == 0 and m.iou == 1.0


def test_scaled_field_reports_the_scale_error():
    m = metrics(1.0537 * inclusion(), inclusion())
    assert m.max_rel_error == pytest.approx(0.0537, abs=1e-12)
    assert m.iou == 1.0


def test_disjoint_supports():
    assert metrics(inclusion(10), inclusion()).iou == 0.0


def test_zero_truth_reports_absolute_values():
    m = metrics(0.3 * inclusion(), np.zeros((20, 20)))
    assert m.max_rel_error == pytest.approx(0.3)
    assert m.rel_l2_error == pytest.approx(0.3 * 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_metric_ranges(seed):
    rng = np.random.default_rng(seed)
    m = metrics(rng.normal(size=(8, 8)), rng.normal(size=(8, 8)))
    assert m.max_rel_error >= 0 and m.rel_l2_error >= 0
    assert 0.0 <= m.iou <= 1.0


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        metrics(np.zeros((3, 3)), np.zeros((3, 4)))


def test_report_keys_and_serialization():
    p = np.stack([inclusion(), inclusion()])
    rep = report(p, 30 * p, p, 30 * p)
    assert list(rep.components) == ["p1", "p2", "q1", "q2"]
    d = rep.to_dict()
    assert d["q2"]["max_true"] == 30.0
    assert rep.max_rel_errors() == {"p1": 0.0, "p2": 0.0, "q1": 0.0, "q2": 0.0}
