"""Input surface: presets, discrete curvature, admissibility gates."""

import json

import numpy as np
import pytest

from hypermass.grid import Grid, convergence_order
from hypermass.surface import (AdmissibilityError, SurfaceSpec,
                               check_admissibility, effective_H,
                               gaussian_curvature, preset_curvature,
                               preset_flat_mean_curvature)


def make_preset(name, params, n=32, hsource=None):
    return SurfaceSpec.from_preset(name, params, n, n, hsource=hsource)


def test_metric_positive_definite_required():
    grid = Grid(16, 16)
    gtt = np.ones(grid.shape)
    gpp = np.sin(grid.theta2) ** 2
    gtp = np.zeros(grid.shape)
    gtp[3, 5] = 2.0  # breaks positivity at one node
    with pytest.raises(ValueError, match=r"i=3, j=5"):
        SurfaceSpec(grid, gtt, gtp, gpp, None)


def test_odd_npsi_rejected():
    with pytest.raises(ValueError, match="even"):
        Grid(16, 15)


def test_sphere_curvature_constant():
    spec = make_preset("sphere", {"R": 2.0}, 64)
    K = gaussian_curvature(spec)
    assert np.max(np.abs(K - 0.25)) < 3e-4


def test_curvature_convergence_order():
    # second-order convergence measured over three refinements
    for name, params in (("sphere", {"R": 1.0}),
                         ("spheroid", {"a": 1.0, "c": 0.5}),
                         ("saddle_band", {"beta": 1.0 / 3.0})):
        errs, hs = [], []
        for n in (32, 64, 128):
            spec = make_preset(name, params, n)
            K = gaussian_curvature(spec)
            Kex = preset_curvature(name, params, spec.grid.theta)[:, None]
            errs.append(float(np.max(np.abs(K - Kex))))
            hs.append(np.pi / n)
        assert convergence_order(hs, errs) >= 1.9, name


def test_spheroid_equator_curvature():
    # oblate a=1, c=1/2: closed form K = c^2 / E^2 gives 4 at the equator
    assert preset_curvature("spheroid", {"a": 1.0, "c": 0.5},
                            np.array([np.pi / 2]))[0] == 4.0
    # discrete value at the node nearest the equator matches the closed form
    spec = make_preset("spheroid", {"a": 1.0, "c": 0.5}, 128)
    K = gaussian_curvature(spec)
    i_eq = spec.grid.ntheta // 2
    K_exact = preset_curvature("spheroid", {"a": 1.0, "c": 0.5},
                               spec.grid.theta[i_eq:i_eq + 1])[0]
    assert abs(K[i_eq, 0] - K_exact) < 1e-2


def test_spheroid_curvature_against_symbolic_oracle():
    import sympy as sym

    th = sym.symbols("theta", positive=True)
    a, c = 1.0, sym.Rational(4, 5)
    w = a * sym.sin(th)
    z = c * sym.cos(th)
    wp, zp = sym.diff(w, th), sym.diff(z, th)
    wpp, zpp = sym.diff(wp, th), sym.diff(zp, th)
    # Gaussian curvature of a surface of revolution (first/second form)
    K_sym = zp * (wp * zpp - wpp * zp) / (w * (wp**2 + zp**2) ** 2)
    K_fn = sym.lambdify(th, sym.simplify(K_sym))
    grid = Grid(64, 8)
    got = preset_curvature("spheroid", {"a": 1.0, "c": 0.8}, grid.theta)
    assert np.max(np.abs(got - K_fn(grid.theta))) < 1e-12


def test_gauss_bonnet():
    for name, params in (("sphere", {"R": 2.0}),
                         ("spheroid", {"a": 1.0, "c": 0.8}),
                         ("saddle_band", {"beta": 1.0 / 3.0})):
        spec = make_preset(name, params, 64)
        K = gaussian_curvature(spec)
        total = spec.grid.integrate(K, spec.sqrt_det_g)
        assert abs(total - 4 * np.pi) < 0.01 * 4 * np.pi, name


def test_effective_H_riemannian():
    spec = make_preset("sphere", {"R": 1.0}, 16,
                       hsource={"type": "riemannian", "H": 2.0})
    assert np.allclose(effective_H(spec), 2.0)


def test_effective_H_spacetime():
    spec = make_preset("sphere", {"R": 1.0}, 16,
                       hsource={"type": "spacetime", "H": 2.0, "trp": 1.2})
    # sqrt(4 - 1.44) = 1.6
    eff = effective_H(spec)
    assert np.allclose(eff, 1.6)
    # identity: eff^2 + trp^2 = H^2
    assert np.allclose(eff**2 + 1.2**2, 4.0)


def test_effective_H_boundary_rejected():
    spec = make_preset("sphere", {"R": 1.0}, 16,
                       hsource={"type": "spacetime", "H": 1.0, "trp": 1.0})
    with pytest.raises(AdmissibilityError):
        effective_H(spec)


def test_admissibility_sphere():
    spec = make_preset("sphere", {"R": 1.0}, 16)
    rep = check_admissibility(spec, 0.5)
    assert rep.passed and rep.min_K > 0.9


def test_admissibility_saddle_band():
    # beta = 1/3 puts min K = -1 at the poles by construction
    spec = make_preset("saddle_band", {"beta": 1.0 / 3.0}, 64)
    rep = check_admissibility(spec, 0.9)
    assert not rep.passed
    assert abs(rep.kappa_floor - 1.0) < 0.01
    assert check_admissibility(spec, 1.05).passed


def test_admissibility_monotone_in_kappa():
    spec = make_preset("saddle_band", {"beta": 1.0 / 3.0}, 48,
                       hsource={"type": "riemannian", "H": 1.0})
    kappas = [0.5, 0.9, 1.05, 1.5, 2.5]
    passes = [check_admissibility(spec, k).passed for k in kappas]
    # once passing, larger kappa never flips the K clause back
    first = passes.index(True)
    assert all(passes[first:])


def test_admissibility_trp_half_H():
    H = 2.0
    spec = make_preset("sphere", {"R": 1.0}, 16,
                       hsource={"type": "spacetime", "H": H, "trp": H / 2})
    rep = check_admissibility(spec, 1.0)
    assert rep.passed and rep.min_H_margin > 0


def test_flat_mean_curvature_sphere():
    grid = Grid(16, 16)
    H = preset_flat_mean_curvature("sphere", {"R": 2.0}, grid.theta)
    assert np.allclose(H, 1.0)


def test_spec_file_roundtrip(tmp_path):
    spec = make_preset("spheroid", {"a": 1.0, "c": 0.8}, 16,
                       hsource={"type": "riemannian", "H": 2.0})
    doc = spec.to_dict()
    path = tmp_path / "surface.json"
    path.write_text(json.dumps(doc))
    spec2 = SurfaceSpec.from_file(path)
    assert np.allclose(spec2.gtt, spec.gtt)
    assert np.allclose(spec2.gpp, spec.gpp)
    assert np.allclose(spec2.hsource["H"], 2.0)


def test_grid_spec_from_sampled_preset():
    # a grid-kind document built from preset samples reproduces curvature
    base = make_preset("spheroid", {"a": 1.0, "c": 0.8}, 32)
    doc = {"kind": "grid", "kappa": 1.0,
           "grid": {"ntheta": 32, "npsi": 32,
                    "g_tt": base.gtt.ravel().tolist(),
                    "g_tp": base.gtp.ravel().tolist(),
                    "g_pp": base.gpp.ravel().tolist()},
           "hsource": {"type": "riemannian",
                       "H": np.full(32 * 32, 2.0).tolist()}}
    spec = SurfaceSpec.from_dict(doc)
    K1 = gaussian_curvature(spec)
    K2 = gaussian_curvature(base)
    assert np.allclose(K1, K2)
