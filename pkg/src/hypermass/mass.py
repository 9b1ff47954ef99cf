"""Mass functional along the foliation and the energy-momentum vector.

The weighted total-mean-curvature difference

    m_W(r) = integral over the leaf of (H0 - calH) W

is evaluated in rescaled variables: with calH = H0/u, v = e^{3kr}(u-1),
Wt = e^{-kr} W and the rescaled area element, the integrand is
H0 (v/u) Wt, which stays finite on every schedule sample including the
terminal r = infinity, where it reproduces the limit integral
-2 kappa * integral of v_inf (gauss_map . zeta) over the limit metric.

Orientation convention: the weight flow with terminal -gauss_map yields a
past-directed vector field (its products with every future null
direction are nonnegative); the exported energy-momentum P is the
future-directed representative, so P . zeta <= 0 for future null zeta.
Both versions are reported.
"""

import numpy as np

from .minkowski import (causal_class, causal_witness_check,
                        lorentz_dot, null_directions)
from .foliation import frame_at
from .spinors import zeta
from .embedding import gauss_map


class MassSamples:
    """Sampled m_W(r) profile; values has shape (n_s,) + extra."""

    def __init__(self, schedule, values, kind):
        self.schedule = schedule
        self.values = values
        self.kind = kind

    @property
    def r(self):
        return self.schedule.r

    @property
    def limit_sample(self):
        """Value at the exact terminal sample (r = infinity)."""
        return self.values[-1]


def mass_profile(es, kappa, u_field, w_field):
    """m_W at every schedule sample, via the rescaled integrand.

    For a vector weight flow the profile is computed componentwise
    (shape (n_s, 4)); for a scalar flow it is (n_s,).
    """
    schedule = u_field.schedule
    if w_field.schedule is not u_field.schedule and not np.array_equal(
            w_field.schedule.s, schedule.s):
        raise ValueError("u and W flows must share one schedule")
    ns = len(schedule)
    vec = w_field.kind == "w_vector"
    out = np.empty((ns, 4) if vec else (ns,))
    for k in range(ns):
        s = schedule.s[k]
        fr = frame_at(es, kappa, schedule.r[k])
        v = u_field.values[k]
        u = 1.0 + s**1.5 * v
        weight = fr.H0 * (v / u) * fr.sqrt_det_gt
        if vec:
            for c in range(4):
                out[k, c] = es.grid.integrate(w_field.values[k, c], weight)
        else:
            out[k] = es.grid.integrate(w_field.values[k], weight)
    return MassSamples(schedule, out, "vector" if vec else "scalar")


def project_mass(samples, a):
    """Null projection m_{W . zeta(a)}(r) of a vector mass profile."""
    if samples.kind != "vector":
        raise ValueError("projection needs a vector mass profile")
    return samples.values @ (zeta(a) * np.array([1.0, 1.0, 1.0, -1.0]))


class MonotonicityVerdict:
    def __init__(self, passed, worst_increment, worst_index, tol_used):
        self.passed = bool(passed)
        self.worst_increment = float(worst_increment)
        self.worst_index = None if worst_index is None else int(worst_index)
        self.tol_used = float(tol_used)

    def __repr__(self):
        return (f"MonotonicityVerdict(pass={self.passed}, "
                f"worst_increment={self.worst_increment:.3e}, "
                f"index={self.worst_index})")


def monotonicity_check(values, tol_mono=1e-6):
    """Every forward difference must satisfy d <= tol * (1 + |m|).

    Returns the verdict with the worst normalized increment and the index
    of the offending sample (None when the profile passes).
    """
    m = np.asarray(values, dtype=float)
    if m.ndim != 1 or m.size < 3:
        raise ValueError("need at least 3 scalar samples")
    diffs = np.diff(m)
    allowed = tol_mono * (1.0 + np.abs(m[:-1]))
    ratio = diffs / (1.0 + np.abs(m[:-1]))
    worst = int(np.argmax(ratio))
    passed = bool(np.all(diffs <= allowed))
    return MonotonicityVerdict(passed, float(ratio[worst]),
                               None if passed else worst, tol_mono)


def limit_direct(es, kappa, v_infty, a=None):
    """-2 kappa * integral of v_inf (gauss_map . zeta(a)) dA_infinity.

    With a = None the full four-vector version (weight -gauss_map
    components) is returned.  Linear in v_infty.
    """
    fr_inf = frame_at(es, kappa, np.inf)
    gamma = gauss_map(es)
    if a is None:
        integrand = -2.0 * kappa * v_infty[..., None] * gamma
        return np.array([es.grid.integrate(integrand[..., c], fr_inf.sqrt_det_gt)
                         for c in range(4)])
    gz = lorentz_dot(gamma, zeta(a))
    return -2.0 * kappa * es.grid.integrate(v_infty * gz, fr_inf.sqrt_det_gt)


def tail_extrapolate(samples, n_tail=4, values=None):
    """Extrapolate m_W to r = infinity from the finite samples only.

    The profile is smooth in the compactified variable s = e^{-2 kappa r};
    a least-squares quadratic in s through the last n_tail finite samples
    is evaluated at s = 0.
    """
    s = samples.schedule.s[:-1]
    m = samples.values[:-1] if values is None else np.asarray(values)[:-1]
    if n_tail < 3:
        raise ValueError("need at least 3 tail samples")
    st = s[-n_tail:]
    mt = m[-n_tail:]
    V = np.vander(st, 3)
    coef, *_ = np.linalg.lstsq(V, mt, rcond=None)
    return coef[-1]


class LimitCheck:
    """Tail-extrapolated mass limit against the direct limit integral.

    constant is the raw ratio lhs/rhs; residual is the relative mismatch
    with constant 1.  The single proportionality constant the comparison
    is allowed is fitted across a battery of cases with
    fit_limit_constant, never assumed per case.
    """

    def __init__(self, lhs_tail, rhs_direct):
        self.lhs_tail = float(lhs_tail)
        self.rhs_direct = float(rhs_direct)

    @property
    def constant(self):
        return self.lhs_tail / self.rhs_direct if self.rhs_direct else float("nan")

    @property
    def residual(self):
        if self.rhs_direct == 0.0:
            return abs(self.lhs_tail)
        return abs(self.lhs_tail - self.rhs_direct) / abs(self.rhs_direct)

    def residual_against(self, c):
        if self.rhs_direct == 0.0:
            return abs(self.lhs_tail)
        return abs(self.lhs_tail - c * self.rhs_direct) / abs(c * self.rhs_direct)

    def __repr__(self):
        return (f"LimitCheck(constant={self.constant:.6f}, "
                f"residual={self.residual:.3e})")


def limit_check(es, kappa, v_infty, samples, a, n_tail=4):
    """Compare the extrapolated mass tail with the direct limit integral."""
    if samples.kind == "vector":
        values = project_mass(samples, a)
    else:
        values = samples.values
    lhs = float(tail_extrapolate(samples, n_tail=n_tail, values=values))
    rhs = float(limit_direct(es, kappa, v_infty, a=a))
    return LimitCheck(lhs, rhs)


def fit_limit_constant(checks):
    """Least-squares global constant across a battery of limit checks."""
    lhs = np.array([c.lhs_tail for c in checks])
    rhs = np.array([c.rhs_direct for c in checks])
    denom = float(np.dot(rhs, rhs))
    if denom == 0.0:
        raise ValueError("all direct limits vanish; nothing to fit")
    return float(np.dot(lhs, rhs) / denom)


class EnergyMomentum:
    """Exported energy-momentum with orientation bookkeeping."""

    def __init__(self, P, P_raw, cls, cls_raw, zeta_products, witness_ok,
                 scale):
        self.P = P
        self.P_raw = P_raw
        self.causal = cls
        self.causal_raw = cls_raw
        self.zeta_products = zeta_products
        self.witness_ok = bool(witness_ok)
        self.scale = float(scale)

    def zeta_sign_uniform(self, tol=0.0):
        z = self.zeta_products
        return bool(np.all(z <= tol * self.scale) or np.all(z >= -tol * self.scale))

    def __repr__(self):
        return (f"EnergyMomentum(P={np.array2string(self.P, precision=6)}, "
                f"causal={self.causal.value})")


def energy_momentum(es, kappa, u_field, w_vec_field, n_zeta=64, tol=1e-10):
    """Surface integral of (H0 - calH) W at r = 0, with causal data.

    The raw weight flow is past-directed, so the exported P flips the
    sign to the future-directed representative; both are classified and
    the null-direction products of the exported P are reported (they are
    <= 0 when the conclusion holds).
    """
    samples = mass_profile(es, kappa, u_field, w_vec_field)
    P_raw = samples.values[0]
    P = -P_raw
    scale = _mass_scale(es, kappa, u_field, w_vec_field)
    cls = causal_class(P, tol=max(tol, 1e-14 * scale))
    cls_raw = causal_class(P_raw, tol=max(tol, 1e-14 * scale))
    zetas = null_directions(n_zeta)
    zp = lorentz_dot(P[None, :], zetas)
    witness = causal_witness_check(P, n_samples=n_zeta)
    return EnergyMomentum(P, P_raw, cls, cls_raw, zp, witness, scale), samples


def _mass_scale(es, kappa, u_field, w_vec_field):
    """|H0 + calH| |W| surface scale used to normalize zero tests."""
    fr = frame_at(es, kappa, 0.0)
    u = u_field.u_at(0)
    w0 = w_vec_field.values[0]
    mag = np.sqrt(np.sum(w0**2, axis=0))
    return float(es.grid.integrate(fr.H0 * (1.0 + 1.0 / np.abs(u)) * mag,
                                   fr.sqrt_det_gt))


# ---------------------------------------------------------------------------
# algebraic identities


def identity_check(u, Rr, kappa):
    """Residual of the flow-derivation identity (exactly zero in algebra):

    (R + 4 k^2)(1 - 1/u) + (1/u - u)(R + 6 k^2)/2
        + (1/u)(u - 1)^2 (R + 2 k^2)/2 + 2 k^2 (u - 1)
    """
    u = np.asarray(u, dtype=float)
    Rr = np.asarray(Rr, dtype=float)
    k2 = np.asarray(kappa, dtype=float) ** 2
    inv = 1.0 / u
    return ((Rr + 4.0 * k2) * (1.0 - inv)
            + 0.5 * (inv - u) * (Rr + 6.0 * k2)
            + 0.5 * inv * (u - 1.0) ** 2 * (Rr + 2.0 * k2)
            + 2.0 * k2 * (u - 1.0))


def gauss_evolution_check(es, kappa, r0, dr=1e-3, order=4):
    """Residual of dH0/dr + H0^2 = R^r + 4 kappa^2 via finite differences.

    order=4 uses the five-point first-derivative stencil (residual limited
    by the r^4 truncation of the closed-form profile); order=2 uses three
    points and scales as dr^2.
    """
    if r0 < 2 * dr:
        raise ValueError("r0 must leave room for the centered stencil")
    fr = frame_at(es, kappa, r0)
    if order == 4:
        stencil = ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0))
        dH0 = sum(w * frame_at(es, kappa, r0 + k * dr).H0
                  for k, w in stencil) / (12.0 * dr)
    elif order == 2:
        dH0 = (frame_at(es, kappa, r0 + dr).H0
               - frame_at(es, kappa, r0 - dr).H0) / (2.0 * dr)
    else:
        raise ValueError("order must be 2 or 4")
    return dH0 + fr.H0**2 - (fr.Rr + 4.0 * kappa**2)


# ---------------------------------------------------------------------------
# report assembly


class MassReport:
    """Everything the mass stage reports, serializable as key-value text."""

    def __init__(self, kappa, samples_vec, em, limit_checks, mono,
                 decay_u=None, decay_A=None, notes=(), config_hash=None,
                 extras=None):
        self.kappa = kappa
        self.samples_vec = samples_vec
        self.em = em
        self.limit_checks = limit_checks
        self.mono = mono
        self.decay_u = decay_u
        self.decay_A = decay_A
        self.notes = list(notes)
        self.config_hash = config_hash
        self.extras = dict(extras or {})

    def lines(self):
        def fmt(v):
            if isinstance(v, (bool, np.bool_)):
                return str(bool(v)).lower()
            if isinstance(v, (float, int, np.floating, np.integer)):
                return repr(float(v))
            return str(v)

        em = self.em
        out = [
            f"kappa = {fmt(self.kappa)}",
            f"m0_t = {fmt(self.samples_vec.values[0, 3])}",
            f"m_limit_t = {fmt(self.samples_vec.values[-1, 3])}",
            f"P_x1 = {fmt(em.P[0])}",
            f"P_x2 = {fmt(em.P[1])}",
            f"P_x3 = {fmt(em.P[2])}",
            f"P_t = {fmt(em.P[3])}",
            f"P_causal_class = {em.causal.value}",
            f"P_raw_causal_class = {em.causal_raw.value}",
            f"P_zeta_max = {fmt(np.max(em.zeta_products))}",
            f"P_zeta_min = {fmt(np.min(em.zeta_products))}",
            f"P_zeta_sign_uniform = {fmt(em.zeta_sign_uniform())}",
            f"P_witness_future_nonspacelike = {fmt(em.witness_ok)}",
            f"mass_scale = {fmt(em.scale)}",
            f"monotone = {fmt(self.mono.passed)}",
            f"monotone_worst_increment = {fmt(self.mono.worst_increment)}",
        ]
        for i, lc in enumerate(self.limit_checks):
            out.append(f"limit_constant_{i} = {fmt(lc.constant)}")
            out.append(f"limit_residual_{i} = {fmt(lc.residual)}")
        if self.decay_u is not None:
            out.append(f"decay_exponent_u = {fmt(self.decay_u)}")
        if self.decay_A is not None:
            out.append(f"decay_exponent_gauge = {fmt(self.decay_A)}")
        for key, val in sorted(self.extras.items()):
            out.append(f"{key} = {fmt(val)}")
        if self.config_hash:
            out.append(f"config_hash = {self.config_hash}")
        for i, note in enumerate(self.notes):
            out.append(f"convention_note_{i} = {note}")
        return out

    def write(self, path):
        with open(path, "w") as fh:
            fh.write("\n".join(self.lines()) + "\n")
