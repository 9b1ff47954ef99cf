"""Isometric embedding strategies and the curvature decomposition."""

import numpy as np
import pytest

from hypermass.embedding import (EmbeddingError, EmbeddingOptions,
                                 align_embeddings, embed_axisymmetric,
                                 embed_general, embed_geodesic_sphere,
                                 gauss_map, principal_decomposition,
                                 profile_derivative_even,
                                 profile_derivative_odd,
                                 second_differences_form,
                                 second_fundamental_form)
from hypermass.grid import Grid, convergence_order
from hypermass.minkowski import lorentz_norm_sq
from hypermass.surface import AdmissibilityError, SurfaceSpec

RNG = np.random.default_rng(11)


# ---------------------------------------------------------------------------
# tier 1


def test_geodesic_sphere_flat_limit():
    es = embed_geodesic_sphere(1.0, 1e-6, 16, 16)
    assert abs(es.lam1[0, 0] - 1.0) < 1e-9
    assert abs(2 * es.lam1[0, 0] - 2.0) < 1e-9


def test_geodesic_sphere_unit_case():
    es = embed_geodesic_sphere(1.0, 1.0, 16, 16)
    # sinh(k rho) = 1 so coth = sqrt(2): H0 = 2 sqrt(2), mu = arcsinh(1)
    assert abs(es.lam1[0, 0] - np.sqrt(2)) < 1e-14
    assert abs(es.mu1[0, 0] - np.arcsinh(1.0)) < 1e-14
    # induced curvature through the curvature relation: -k^2 + lam^2 = 1/R^2
    assert abs(-1.0 + es.lam1[0, 0] * es.lam2[0, 0] - 1.0) < 1e-14


def test_geodesic_sphere_invariants():
    es = embed_geodesic_sphere(0.7, 2.0, 16, 16)
    inv = es.invariant_residuals()
    assert max(inv.values()) < 1e-12


# ---------------------------------------------------------------------------
# spectral profile derivatives


def test_profile_derivatives_exact_on_modes():
    grid = Grid(48, 8)
    th = grid.theta
    f = 2.0 + np.cos(th) - 0.3 * np.cos(5 * th)
    fp = profile_derivative_even(f, th)
    assert np.max(np.abs(fp - (-np.sin(th) + 1.5 * np.sin(5 * th)))) < 1e-12
    w = np.sin(th) + 0.2 * np.sin(4 * th)
    wp = profile_derivative_odd(w, th)
    assert np.max(np.abs(wp - (np.cos(th) + 0.8 * np.cos(4 * th)))) < 1e-12


# ---------------------------------------------------------------------------
# tier 2


def test_axisymmetric_round_sphere_matches_closed_form():
    spec = SurfaceSpec.from_preset("sphere", {"R": 1.0}, 32, 32)
    es = embed_axisymmetric(spec, 1.0)
    ref = embed_geodesic_sphere(1.0, 1.0, 32, 32)
    assert es.defect < 1e-8
    assert es.certified
    assert np.max(np.abs(es.X - ref.X)) < 1e-8


def test_axisymmetric_spheroid(spheroid_es):
    assert spheroid_es.defect < 1e-6
    assert spheroid_es.certified
    h = spheroid_es.h
    assert np.all(h[..., 0, 0] > 0)
    assert np.all(h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] ** 2 > 0)
    inv = spheroid_es.invariant_residuals()
    assert max(inv.values()) < 1e-8


def test_axisymmetric_rejects_nonaxisymmetric():
    spec = SurfaceSpec.from_preset("sphere", {"R": 1.0}, 16, 16)
    gpp = spec.gpp * (1.0 + 0.05 * np.cos(spec.grid.psi2))
    bad = SurfaceSpec(spec.grid, spec.gtt, spec.gtp, gpp, None)
    with pytest.raises(AdmissibilityError, match="revolution"):
        embed_axisymmetric(bad, 1.0)


def test_admissibility_gate_precedes_solve():
    # curvature dips to -1 at the poles; kappa = 0.9 must be rejected
    # before any profile solving happens
    spec = SurfaceSpec.from_preset("saddle_band", {"beta": 1.0 / 3.0}, 64, 16)
    with pytest.raises(AdmissibilityError, match="curvature bound"):
        embed_axisymmetric(spec, 0.9)


# ---------------------------------------------------------------------------
# second fundamental form


def test_umbilic_sphere_discrete():
    es = embed_geodesic_sphere(1.0, 1.0, 32, 32)
    h, lam1, lam2, mu1, mu2, _, _ = second_fundamental_form(es)
    # the stencil bias at this resolution is (2 pi/32)^2/12 ~ 3e-3
    assert np.max(np.abs(lam1 - lam2)) < 5e-3
    assert np.max(np.abs(lam1 - np.sqrt(2))) < 5e-3
    assert np.max(np.abs(mu1 - np.arcsinh(1.0))) < 5e-3


def test_gauss_relation_convergence():
    errs, hs = [], []
    for n in (16, 24, 36, 54):
        es = embed_geodesic_sphere(1.0, 1.0, n, n)
        h = second_differences_form(es.grid, es.X, es.N)
        lam1, lam2, *_ = principal_decomposition(es.g0, h, es.kappa)
        errs.append(float(np.max(np.abs(1.0 - (-1.0 + lam1 * lam2)))))
        hs.append(np.pi / n)
    assert convergence_order(hs, errs) >= 1.9


def test_horospherical_bound_error():
    es = embed_geodesic_sphere(1.0, 1.0, 16, 16)
    h_flat = 0.5 * es.g0  # principal curvatures 0.5 <= kappa = 1
    with pytest.raises(EmbeddingError, match="horospherical"):
        principal_decomposition(es.g0, h_flat, 1.0)


def test_shape_operator_metric_symmetric(spheroid_es):
    # g(S u, v) = g(u, S v): equivalent to h being symmetric, plus the
    # discrete h matching its transpose against the metric
    es = spheroid_es
    g, h = es.g0, es.h
    gi = np.linalg.inv(g)
    S = np.einsum("...ab,...bc->...ac", gi, h)
    lhs = np.einsum("...ab,...bc->...ac", g, S)
    rhs = np.einsum("...cb,...ba->...ca", S, g)
    assert np.max(np.abs(lhs - np.swapaxes(rhs, -1, -2))) < 1e-10 * float(
        np.max(np.abs(h)))


# ---------------------------------------------------------------------------
# gauss map


def test_gauss_map_null_future(sphere_es, spheroid_es):
    for es in (sphere_es, spheroid_es):
        gamma = gauss_map(es)
        assert np.max(np.abs(lorentz_norm_sq(gamma))) < 1e-8
        assert np.all(gamma[..., 3] > 0)


def test_gauss_map_sphere_symmetry(sphere_es):
    gamma = gauss_map(sphere_es)
    t = gamma[..., 3]
    assert np.max(np.abs(t - t[0, 0])) < 1e-12


# ---------------------------------------------------------------------------
# tier 3


def test_general_fixed_point():
    spec = SurfaceSpec.from_preset("spheroid", {"a": 1.0, "c": 0.9}, 16, 16)
    opts = EmbeddingOptions(strategy="general", tol_defect=1e-5,
                            max_iter=120, regularization=1e-6)
    es1 = embed_general(spec, 1.0, opts)
    assert es1.certified
    es2 = embed_general(spec, 1.0, opts, initial=es1.X)
    assert es2.meta["nfev"] == 0
    assert es2.defect <= es1.defect + 1e-12


def test_general_on_reparametrized_round_metric():
    # pull the round metric back under a non-axisymmetric diffeomorphism
    # of the sphere; the abstract surface is still round, so the general
    # solver must find an isometric image
    n = 16
    grid = Grid(n, n)
    eps = 0.08
    th = grid.theta2 + eps * np.sin(grid.theta2) ** 2 * np.cos(grid.psi2)
    ps = grid.psi2 + eps * np.sin(grid.theta2) * np.sin(grid.psi2)
    # analytic pullback of dth^2 + sin^2 th dps^2 under (th, ps) -> (th', ps')
    dth_t = 1.0 + eps * np.sin(2 * grid.theta2) * np.cos(grid.psi2)
    dth_p = -eps * np.sin(grid.theta2) ** 2 * np.sin(grid.psi2)
    dps_t = eps * np.cos(grid.theta2) * np.sin(grid.psi2)
    dps_p = 1.0 + eps * np.sin(grid.theta2) * np.cos(grid.psi2)
    s2 = np.sin(th) ** 2
    gtt = dth_t**2 + s2 * dps_t**2
    gtp = dth_t * dth_p + s2 * dps_t * dps_p
    gpp = dth_p**2 + s2 * dps_p**2
    spec = SurfaceSpec(grid, gtt, gtp, gpp, None)
    opts = EmbeddingOptions(strategy="general", tol_defect=1e-4,
                            max_iter=250, regularization=1e-6)
    es = embed_general(spec, 1.0, opts)
    assert es.defect < 1e-4
    inv = es.invariant_residuals()
    assert max(inv.values()) < 1e-8


def test_align_embeddings_identity(sphere_es):
    L, defect = align_embeddings(sphere_es, sphere_es)
    assert defect < 1e-10
    assert np.allclose(L, np.eye(4), atol=1e-8)
