"""Invariant battery for a configured run (the `verify` command)."""

import numpy as np

from .foliation import (frame_at, laplacian_matrix, riccati_oracle,
                        foliation_invariant_residuals)
from .flows import barrier_ode
from .mass import (energy_momentum, identity_check, limit_check,
                   monotonicity_check, project_mass, gauss_evolution_check,
                   fit_limit_constant)
from .minkowski import (causal_class, causal_witness_check,
                        lorentz_norm_sq, is_future_nonspacelike, four_vector)


class Check:
    def __init__(self, name, passed, detail):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def line(self):
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def run_verification(pipe):
    """Run the full battery; returns a list of Check results."""
    cfg = pipe.cfg
    kappa = cfg.kappa
    rng = np.random.default_rng(cfg.seed)
    checks = []

    def add(name, passed, detail):
        checks.append(Check(name, passed, detail))

    rep = pipe.admissibility
    add("admissibility", rep.min_K > -kappa**2,
        f"min K = {rep.min_K:.6g} vs -kappa^2 = {-kappa**2:.6g}")

    es = pipe.embedding
    inv = es.invariant_residuals()
    add("embedding_constraints",
        max(inv["hyperboloid"], inv["normal_unit"], inv["normal_orth"]) < 1e-8,
        f"max constraint residual {max(inv.values()):.3e}")
    add("gauss_map_null", inv["gauss_map_null"] < 1e-8,
        f"|gamma.gamma| max {inv['gauss_map_null']:.3e}")
    add("embedding_defect", es.certified,
        f"defect {es.defect:.3e} (strategy {es.strategy})")
    det_h = es.h[..., 0, 0] * es.h[..., 1, 1] - es.h[..., 0, 1] ** 2
    add("convexity", bool(np.all(es.h[..., 0, 0] > 0) and np.all(det_h > 0)),
        f"min h_tt {float(np.min(es.h[..., 0, 0])):.4g}, "
        f"min det h {float(np.min(det_h)):.4g}")
    add("horospherical_margin", es.lambda_margin() > 0,
        f"min lambda - kappa = {es.lambda_margin():.6g}")

    # closed forms vs the Riccati oracle on sampled nodes
    nodes = rng.integers(0, es.grid.size, size=5)
    lam0 = np.concatenate([es.lam1.ravel()[nodes], es.lam2.ravel()[nodes]])
    r_eval = np.linspace(0.0, 3.0 / kappa, 13)
    lam_ode = riccati_oracle(lam0, kappa, r_eval)
    mu = np.concatenate([es.mu1.ravel()[nodes], es.mu2.ravel()[nodes]])
    lam_cf = kappa / np.tanh(kappa * (mu[:, None] + r_eval[None, :]))
    err = float(np.max(np.abs(lam_ode - lam_cf) / lam_cf))
    add("riccati_oracle", err < 1e-8, f"max rel err {err:.3e}")

    fol = foliation_invariant_residuals(es, kappa, [0.5 / kappa, 2.0 / kappa])
    add("leaf_on_hyperboloid", fol["hyperboloid"] < 1e-8,
        f"residual {fol['hyperboloid']:.3e}")
    add("h0_evolution", fol["h0_evolution"] < 1e-6,
        f"residual {fol['h0_evolution']:.3e}")

    # discrete divergence theorem of the exported leaf Laplacian
    fr = frame_at(es, kappa, 1.0 / kappa)
    L = laplacian_matrix(fr, rescaled=True, order=2)
    f = rng.normal(size=es.grid.shape)
    cons = abs(es.grid.integrate((L @ f.ravel()).reshape(es.grid.shape),
                                 fr.sqrt_det_gt))
    scale = es.grid.integrate(np.abs(f), fr.sqrt_det_gt)
    add("laplacian_conservation", cons < 1e-10 * scale,
        f"integral {cons:.3e} (scale {scale:.3g})")

    # algebraic identity fuzz
    u_r = rng.uniform(0.2, 5.0, 10000)
    Rr = rng.uniform(-10.0, 10.0, 10000)
    kap = rng.uniform(0.1, 3.0, 10000)
    res = float(np.max(np.abs(identity_check(u_r, Rr, kap))))
    add("flow_identity", res < 1e-11, f"max residual {res:.3e}")

    res = float(np.max(np.abs(gauss_evolution_check(es, kappa, 0.5 / kappa))))
    add("mean_curvature_evolution", res < 1e-8, f"residual {res:.3e}")

    # flows
    u = pipe.u_flow
    add("u_positive", bool(np.all(1.0 + u.schedule.s[:, None, None]**1.5
                                  * u.values > 0.0)),
        f"min u across schedule {float(np.min(1.0 + u.schedule.s[:, None, None]**1.5 * u.values)):.6g}")
    add("u_tail_converged", u.meta.get("tail_converged", True),
        str(u.meta.get("tail_cauchy", "cached")))

    b = barrier_ode(es, kappa, float(np.min(u.u_at(0))))
    ks = list(range(0, len(u.schedule.r_finite),
                    max(1, len(u.schedule.r_finite) // 12)))
    fb = b.f(u.schedule.r[ks])
    minu = np.array([float(np.min(u.u_at(k))) for k in ks])
    add("lower_barrier", bool(np.all(fb <= minu + 1e-8)),
        f"max violation {float(np.max(fb - minu)):.3e}")

    w = pipe.w_flow
    zdirs = pipe.zeta_directions()
    wmin = np.inf
    from .spinors import zeta as zeta_map
    eta = np.array([1.0, 1.0, 1.0, -1.0])
    for a in zdirs:
        z = zeta_map(a) * eta
        proj = np.einsum("kcij,c->kij", w.values, z)
        wmin = min(wmin, float(np.min(proj)))
    wscale = float(np.max(np.abs(w.values)))
    add("weight_positivity", wmin > -1e-10 * wscale,
        f"min zeta-projection {wmin:.3e} (scale {wscale:.3g})")

    em, samples = energy_momentum(es, kappa, u, w)
    monos = [monotonicity_check(project_mass(samples, a), cfg.tol_mono)
             for a in zdirs]
    worst = max(m.worst_increment for m in monos)
    add("mass_monotone", all(m.passed for m in monos),
        f"worst increment {worst:.3e} (tol {cfg.tol_mono:.1e})")

    lchecks = [limit_check(es, kappa, u.v_infty, samples, a) for a in zdirs]
    if all(c.rhs_direct == 0.0 for c in lchecks):
        add("mass_limit", all(abs(c.lhs_tail) < 1e-8 for c in lchecks),
            "both sides vanish")
    else:
        cfit = fit_limit_constant(lchecks)
        resid = max(c.residual_against(cfit) for c in lchecks)
        add("mass_limit", resid < 0.05,
            f"constant {cfit:.6f}, max residual {resid:.3e}")

    ok_class = em.causal in (em.causal.__class__.FUTURE_TIMELIKE,
                             em.causal.__class__.FUTURE_NULL,
                             em.causal.__class__.ZERO)
    add("momentum_causal", ok_class and em.zeta_sign_uniform(tol=1e-12),
        f"class {em.causal.value}, zeta products in "
        f"[{float(np.min(em.zeta_products)):.3e}, "
        f"{float(np.max(em.zeta_products)):.3e}]")
    add("momentum_witness",
        em.witness_ok == is_future_nonspacelike(em.causal),
        f"witness {em.witness_ok} vs class {em.causal.value}")

    # witness/class agreement on random vectors
    bad = 0
    for _ in range(200):
        vec = four_vector(*rng.normal(size=4))
        if abs(lorentz_norm_sq(vec)) <= 1e-9:
            continue
        agree = causal_witness_check(vec, 512) == is_future_nonspacelike(
            causal_class(vec))
        bad += 0 if agree else 1
    add("witness_classifier_agreement", bad == 0, f"{bad} disagreements / 200")

    return checks
