"""Mass functional, monotonicity, limits, energy-momentum, identities."""

import numpy as np
import pytest

from hypermass.foliation import FoliationSchedule, frame_at
from hypermass.flows import FlowField, identity_u_flow, solve_W_vector
from hypermass.mass import (MassReport, energy_momentum, fit_limit_constant,
                            gauss_evolution_check, identity_check,
                            limit_direct, limit_check, mass_profile,
                            monotonicity_check, project_mass,
                            tail_extrapolate)
from hypermass.minkowski import CausalClass

RNG = np.random.default_rng(17)
ETA = np.array([1.0, 1.0, 1.0, -1.0])


def test_mass_zero_when_u_is_one(sphere_es):
    sched = FoliationSchedule.uniform_r(1.0, steps=60)
    u = identity_u_flow(sphere_es, 1.0, sched)
    w = solve_W_vector(sphere_es, 1.0, u)
    samples = mass_profile(sphere_es, 1.0, u, w)
    assert np.max(np.abs(samples.values)) == 0.0


def test_mass_zero_when_w_is_zero(sphere_case):
    es, u, _ = sphere_case
    w0 = FlowField("w_scalar", u.schedule,
                   np.zeros((len(u.schedule),) + es.grid.shape))
    samples = mass_profile(es, 1.0, u, w0)
    assert np.max(np.abs(samples.values)) == 0.0


def test_mass_schedule_mismatch_rejected(sphere_case):
    es, u, w = sphere_case
    other = FoliationSchedule.uniform_r(1.0, steps=77)
    w_bad = FlowField("w_vector", other,
                      np.zeros((len(other), 4) + es.grid.shape))
    with pytest.raises(ValueError, match="schedule"):
        mass_profile(es, 1.0, u, w_bad)


def test_mass_sphere_value(sphere_case):
    # radially symmetric weight: m(0) = (H0 - calH) * W0 * Area; the weight
    # is constant over the sphere so the factorization is exact against
    # the discrete area element (which itself matches 4 pi to O(h^2))
    es, u, w = sphere_case
    samples = mass_profile(es, 1.0, u, w)
    area = es.grid.integrate(np.ones(es.grid.shape), es.sqrt_det_g0)
    assert abs(area - 4.0 * np.pi) < 1e-3 * 4.0 * np.pi
    H0 = 2.0 * np.sqrt(2.0)
    w0_mean = float(np.mean(w.values[0, 3]))
    expect = (H0 - 2.0) * w0_mean * area
    assert abs(samples.values[0, 3] - expect) < 1e-12 * abs(expect)


def test_mass_linearity_in_w(sphere_case):
    es, u, w = sphere_case
    w2 = FlowField("w_vector", u.schedule, 2.0 * w.values)
    s1 = mass_profile(es, 1.0, u, w)
    s2 = mass_profile(es, 1.0, u, w2)
    assert np.allclose(s2.values, 2.0 * s1.values, rtol=1e-13, atol=1e-13)


def test_monotonicity_check_basics():
    flat = np.zeros(16)
    assert monotonicity_check(flat).passed
    profile = np.linspace(1.0, 0.0, 32) ** 2
    assert monotonicity_check(profile).passed
    # a +1e-3 bump on a nearly flat tail must fail, naming the interval
    tail = 1e-8 * np.exp(-np.arange(32, dtype=float))
    bumped = tail.copy()
    bumped[10] += 1e-3
    verdict = monotonicity_check(bumped)
    assert not verdict.passed
    assert verdict.worst_index == 9  # increment from sample 9 into 10
    with pytest.raises(ValueError):
        monotonicity_check(np.zeros(2))


def test_mass_monotone_battery(sphere_case, spheroid_case):
    for es, u, w in (sphere_case, spheroid_case):
        samples = mass_profile(es, 1.0, u, w)
        for a in ((1, 0), (0, 1), (0.6, 0.4 + 0.3j)):
            proj = project_mass(samples, a)
            assert monotonicity_check(proj, tol_mono=1e-6).passed


def test_limit_trivial_when_u_is_one(sphere_es):
    sched = FoliationSchedule.uniform_r(1.0, steps=60)
    u = identity_u_flow(sphere_es, 1.0, sched)
    w = solve_W_vector(sphere_es, 1.0, u)
    samples = mass_profile(sphere_es, 1.0, u, w)
    lc = limit_check(sphere_es, 1.0, u.v_infty, samples, (1.0, 0.0))
    assert lc.rhs_direct == 0.0 and abs(lc.lhs_tail) < 1e-10


def test_limit_direct_linear_in_v(sphere_case):
    es, u, _ = sphere_case
    rhs1 = limit_direct(es, 1.0, u.v_infty, a=(1.0, 0.0))
    rhs2 = limit_direct(es, 1.0, 2.0 * u.v_infty, a=(1.0, 0.0))
    assert abs(rhs2 - 2.0 * rhs1) < 1e-12 * abs(rhs1)


def test_limit_consistency(sphere_case, spheroid_case):
    checks = []
    for es, u, w in (sphere_case, spheroid_case):
        samples = mass_profile(es, 1.0, u, w)
        for a in ((1, 0), (0, 1), (0.5, 0.5), (0.3 - 0.2j, 0.9)):
            checks.append(limit_check(es, 1.0, u.v_infty, samples, a))
    c = fit_limit_constant(checks)
    assert abs(c - 1.0) < 0.02
    assert max(chk.residual_against(c) for chk in checks) < 0.05


def test_tail_extrapolate_excludes_terminal(sphere_case):
    es, u, w = sphere_case
    samples = mass_profile(es, 1.0, u, w)
    # corrupting the terminal sample must not change the extrapolation
    vals = samples.values[:, 3].copy()
    tail1 = tail_extrapolate(samples, values=vals)
    vals2 = vals.copy()
    vals2[-1] += 100.0
    tail2 = tail_extrapolate(samples, values=vals2)
    assert tail1 == tail2


def test_energy_momentum_zero_case(sphere_es):
    sched = FoliationSchedule.uniform_r(1.0, steps=60)
    u = identity_u_flow(sphere_es, 1.0, sched)
    w = solve_W_vector(sphere_es, 1.0, u)
    em, _ = energy_momentum(sphere_es, 1.0, u, w)
    assert em.causal is CausalClass.ZERO
    assert np.max(np.abs(em.P)) < 1e-8 * em.scale


def test_energy_momentum_sphere(sphere_case):
    es, u, w = sphere_case
    em, samples = energy_momentum(es, 1.0, u, w)
    assert em.causal is CausalClass.FUTURE_TIMELIKE
    assert em.causal_raw is CausalClass.PAST_TIMELIKE
    assert np.max(np.abs(em.P[:3])) < 1e-8 * em.P[3]
    assert em.zeta_sign_uniform()
    assert np.all(em.zeta_products <= 0.0)
    assert em.witness_ok


def test_energy_momentum_linearity(sphere_case):
    es, u, w = sphere_case
    em1, _ = energy_momentum(es, 1.0, u, w)
    w2 = FlowField("w_vector", u.schedule, 2.0 * w.values,
                   meta=dict(w.meta))
    em2, _ = energy_momentum(es, 1.0, u, w2)
    assert np.allclose(em2.P, 2.0 * em1.P, rtol=1e-12)


def test_identity_check_examples():
    assert identity_check(1.0, 3.7, 0.9) == 0.0
    assert abs(identity_check(2.0, 3.0, 1.0)) < 1e-13


def test_identity_check_fuzz():
    u = RNG.uniform(0.2, 5.0, 100000)
    Rr = RNG.uniform(-10.0, 10.0, 100000)
    kap = RNG.uniform(0.1, 3.0, 100000)
    assert np.max(np.abs(identity_check(u, Rr, kap))) < 1e-11


def test_gauss_evolution_sphere(sphere_es):
    res = gauss_evolution_check(sphere_es, 1.0, 0.5, dr=1e-3, order=4)
    assert np.max(np.abs(res)) < 1e-8


def test_gauss_evolution_umbilic_r0(sphere_es):
    # at r = 0 on the umbilic sphere: R^r + 2 k^2 = 2 lambda^2
    fr = frame_at(sphere_es, 1.0, 0.0)
    assert np.max(np.abs(fr.Rr + 2.0 - 2.0 * fr.lam1 * fr.lam2)) < 1e-12


def test_gauss_evolution_second_order_scaling(spheroid_es):
    r1 = np.max(np.abs(gauss_evolution_check(spheroid_es, 1.0, 0.8,
                                             dr=4e-3, order=2)))
    r2 = np.max(np.abs(gauss_evolution_check(spheroid_es, 1.0, 0.8,
                                             dr=2e-3, order=2)))
    assert 3.0 < r1 / r2 < 5.0
    with pytest.raises(ValueError):
        gauss_evolution_check(spheroid_es, 1.0, 1e-9, dr=1e-3)


def test_mass_report_serialization(tmp_path, sphere_case):
    es, u, w = sphere_case
    em, samples = energy_momentum(es, 1.0, u, w)
    mono = monotonicity_check(project_mass(samples, (1, 0)))
    lc = limit_check(es, 1.0, u.v_infty, samples, (1, 0))
    report = MassReport(1.0, samples, em, [lc], mono, decay_u=3.0,
                        notes=("orientation note",), config_hash="abc123")
    path = tmp_path / "report.txt"
    report.write(path)
    text = path.read_text()
    assert "P_causal_class = future_timelike" in text
    assert "config_hash = abc123" in text
    assert "convention_note_0 = orientation note" in text
    assert "np.float64" not in text
