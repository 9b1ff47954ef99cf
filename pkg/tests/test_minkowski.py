"""Lorentz arithmetic, causal classification, hyperboloid parametrization."""

import numpy as np
import pytest

from hypermass.minkowski import (CausalClass, causal_class,
                                 causal_witness_check, four_vector,
                                 hyperboloid_residual, lorentz_dot,
                                 lorentz_norm_sq, null_directions,
                                 polar_param, is_future_nonspacelike,
                                 check_on_hyperboloid, minkowski_normal,
                                 boost_rotation)

RNG = np.random.default_rng(20240811)


def test_lorentz_dot_unit_vectors():
    assert lorentz_dot(four_vector(0, 0, 0, 1), four_vector(0, 0, 0, 1)) == -1.0
    assert lorentz_dot(four_vector(1, 0, 0, 0), four_vector(1, 0, 0, 0)) == 1.0


def test_lorentz_dot_mixed():
    # direct arithmetic: (-1)(1) + 0 + 0 - (1)(1) = -2
    assert lorentz_dot(four_vector(-1, 0, 0, 1), four_vector(1, 0, 0, 1)) == -2.0


def test_bilinearity():
    for _ in range(200):
        u, v, w = RNG.normal(size=(3, 4))
        a, b = RNG.normal(size=2)
        lhs = lorentz_dot(a * u + b * v, w)
        rhs = a * lorentz_dot(u, w) + b * lorentz_dot(v, w)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
        assert lorentz_dot(u, v) == lorentz_dot(v, u)


def test_causal_class_examples():
    assert causal_class(four_vector(0, 0, 0, 2)) is CausalClass.FUTURE_TIMELIKE
    assert causal_class(four_vector(-1, 0, 0, 1)) is CausalClass.FUTURE_NULL
    assert causal_class(four_vector(3, 0, 0, 1)) is CausalClass.SPACELIKE
    assert causal_class(four_vector(0, 0, 0, -2)) is CausalClass.PAST_TIMELIKE
    assert causal_class(four_vector(1, 0, 0, -1)) is CausalClass.PAST_NULL
    assert causal_class(four_vector(0, 0, 0, 0)) is CausalClass.ZERO
    assert causal_class(four_vector(1e-12, 0, -1e-12, 1e-11)) is CausalClass.ZERO


def test_causal_class_tol_validation():
    with pytest.raises(ValueError):
        causal_class(four_vector(0, 0, 0, 1), tol=-1.0)


def test_causal_class_rotation_invariant():
    for _ in range(50):
        v = four_vector(*RNG.normal(size=4))
        if abs(lorentz_norm_sq(v)) < 1e-6:
            continue
        q, _ = np.linalg.qr(RNG.normal(size=(3, 3)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        vr = np.concatenate([q @ v[:3], v[3:]])
        assert causal_class(vr) is causal_class(v)


def test_witness_examples():
    assert causal_witness_check(four_vector(0, 0, 0, 1), 64)
    assert not causal_witness_check(four_vector(0, 0, 0, -1), 64)
    # max over the sphere of v.zeta = |v_spatial| - v_t = 0.5 - 1 < 0
    assert causal_witness_check(four_vector(0.5, 0, 0, 1), 64)


def test_witness_requires_samples():
    with pytest.raises(ValueError):
        causal_witness_check(four_vector(0, 0, 0, 1), 3)


def test_witness_agrees_with_classifier():
    tol = 1e-10
    checked = 0
    for _ in range(1000):
        v = four_vector(*RNG.normal(size=4))
        if abs(lorentz_norm_sq(v)) <= 10 * tol:
            continue
        checked += 1
        expect = is_future_nonspacelike(causal_class(v, tol=tol))
        assert causal_witness_check(v, 512) == expect
    assert checked > 900


def test_null_directions_unit():
    z = null_directions(128)
    assert np.allclose(np.linalg.norm(z[:, :3], axis=1), 1.0, atol=1e-12)
    assert np.all(z[:, 3] == 1.0)


def test_polar_param_origin():
    X = polar_param(0.0, 0.7, 1.9, 2.0)
    assert np.allclose(X, [0, 0, 0, 0.5], atol=1e-15)


def test_polar_param_axis():
    rp = 0.83
    X = polar_param(rp, 0.0, 0.0, 1.0)
    assert np.allclose(X, [np.sinh(rp), 0, 0, np.cosh(rp)], atol=1e-15)


def test_polar_param_on_hyperboloid():
    # residual relative to the size of the cancelling terms in X.X
    for _ in range(300):
        rp = RNG.uniform(0, 4)
        th = RNG.uniform(0, np.pi)
        ps = RNG.uniform(0, 2 * np.pi)
        kap = RNG.uniform(0.2, 3.0)
        X = polar_param(rp, th, ps, kap)
        scale = 1.0 / kap**2 + X[3] ** 2
        assert hyperboloid_residual(X, kap) / scale < 1e-12
    with pytest.raises(ValueError):
        polar_param(1.0, 0.0, 0.0, 0.0)


def test_check_on_hyperboloid_rejects():
    X = four_vector(0.0, 0.0, 0.0, 1.1)
    with pytest.raises(ValueError):
        check_on_hyperboloid(X, 1.0)


def test_minkowski_normal_orthogonality():
    for _ in range(50):
        a, b, c = RNG.normal(size=(3, 4))
        n = minkowski_normal(a, b, c)
        for v in (a, b, c):
            assert abs(lorentz_dot(n, v)) < 1e-12 * (1 + np.abs(n).max())


def test_boost_rotation_is_isometry():
    eta = np.diag([1.0, 1.0, 1.0, -1.0])
    for _ in range(20):
        L = boost_rotation(RNG.normal(scale=0.5, size=6))
        assert np.allclose(L.T @ eta @ L, eta, atol=1e-12)
