"""Geodesic normal foliation of the hyperboloid exterior of the surface.

Leaf geometry is evaluated from closed forms in the coth parameters
mu_a of the initial principal curvatures; a Riccati integrator exists
solely as an independent cross-check.  All rescaled quantities
(e^{-2 kappa r} metric, mean curvature, leaf scalar curvature) are
written in forms that stay finite and cancellation-free up to and
including r = infinity, which the flow solvers rely on.
"""

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .embedding import gauss_map
from .minkowski import lorentz_norm_sq


class FoliationSchedule:
    """Monotone r-grid from the surface (r=0) out to r = infinity.

    Internally the compactified variable s = e^{-2 kappa r} runs from 1
    down to 0; the forward flow time t = -s/(4 kappa) and the backward
    time tau = s/(4 kappa) are affine in s.  The default layout is
    uniform in r up to r_max followed by the exact terminal point s = 0.
    """

    def __init__(self, kappa, s_values):
        s = np.asarray(s_values, dtype=float)
        if s[0] != 1.0 or s[-1] != 0.0 or np.any(np.diff(s) >= 0.0):
            raise ValueError("schedule must decrease strictly from s=1 to s=0")
        self.kappa = float(kappa)
        self.s = s
        with np.errstate(divide="ignore"):
            self.r = -np.log(s) / (2.0 * kappa)   # r[-1] = inf
        self.t = -s / (4.0 * kappa)
        self.tau = s / (4.0 * kappa)

    @classmethod
    def uniform_r(cls, kappa, r_max=None, steps=400):
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        if r_max is None:
            r_max = 8.0 / kappa
        if r_max < 2.0 / kappa:
            raise ValueError("r_max must be at least 2/kappa")
        if steps < 16:
            raise ValueError("need at least 16 steps")
        r = np.linspace(0.0, r_max, steps)
        s = np.concatenate([np.exp(-2.0 * kappa * r), [0.0]])
        return cls(kappa, s)

    @classmethod
    def uniform_t(cls, kappa, steps=400):
        """Uniform steps in the compactified time variable."""
        if steps < 16:
            raise ValueError("need at least 16 steps")
        return cls(kappa, np.linspace(1.0, 0.0, steps + 1))

    def __len__(self):
        return len(self.s)

    @property
    def r_finite(self):
        return self.r[:-1]


class FoliationFrame:
    """Geometry of one leaf, held in rescaled (bounded) variables.

    gt is the rescaled metric e^{-2 kappa r} g(r); H0, Rr, lam_a are the
    physical (unrescaled) mean, scalar, and principal curvatures, all
    finite at r = infinity.  X_r is available for finite r only.
    """

    def __init__(self, kappa, r, s, grid, lam1, lam2, H0, Rr, gt, gt_inv,
                 sqrt_det_gt, X_r=None):
        self.kappa = kappa
        self.r = r
        self.s = s
        self.grid = grid
        self.lam1 = lam1
        self.lam2 = lam2
        self.H0 = H0
        self.Rr = Rr
        self.gt = gt
        self.gt_inv = gt_inv
        self.sqrt_det_gt = sqrt_det_gt
        self.X_r = X_r

    @property
    def sqrt_det_g(self):
        """Physical area element; overflows for extremely large finite r."""
        if not np.isfinite(self.r):
            raise ValueError("physical area element is infinite at r = infinity")
        return np.exp(2.0 * self.kappa * self.r) * self.sqrt_det_gt

    def metric(self):
        if not np.isfinite(self.r):
            raise ValueError("physical metric is infinite at r = infinity")
        return np.exp(2.0 * self.kappa * self.r) * self.gt

    def integrate_rescaled(self, f):
        return self.grid.integrate(f, self.sqrt_det_gt)

    def integrate(self, f):
        return self.grid.integrate(f, self.sqrt_det_g)


def _coth(x):
    return 1.0 / np.tanh(x)


def _stable_dtilde(kappa, mu, r):
    """e^{2 kappa r} (coth(kappa(mu+r)) - 1), finite at r = infinity."""
    emu = np.exp(-2.0 * kappa * mu)
    if np.isinf(r):
        return 2.0 * emu
    es = np.exp(-2.0 * kappa * (mu + r))
    return 2.0 * np.exp(-2.0 * kappa * mu) / (1.0 - es)


def _scale_tilde(kappa, mu, r):
    """e^{-kappa r} sinh(kappa(mu+r)) / sinh(kappa mu), finite at infinity."""
    if np.isinf(r):
        decay = 0.0
    else:
        decay = np.exp(-2.0 * kappa * (mu + r))
    return np.exp(kappa * mu) * (1.0 - decay) / (2.0 * np.sinh(kappa * mu))


def frame_at(es, kappa, r):
    """Leaf geometry at geodesic distance r from closed forms.

    The leaf metric scales the principal coframe directions by
    sinh(kappa(mu_a + r))/sinh(kappa mu_a); the embedding of the leaf is
    cosh(kappa r) X + sinh(kappa r)/kappa N.
    """
    if r < 0:
        raise ValueError("r must be >= 0")
    grid = es.grid
    mu = (es.mu1, es.mu2)

    if np.isinf(r):
        lam = [np.full(grid.shape, kappa), np.full(grid.shape, kappa)]
        H0 = 2.0 * kappa + kappa * (_stable_dtilde(kappa, es.mu1, np.inf) * 0.0)
        # at infinity H0 = 2 kappa and Rr = 0 exactly
        H0 = np.full(grid.shape, 2.0 * kappa)
        Rr = np.zeros(grid.shape)
    else:
        x1 = kappa * (es.mu1 + r)
        x2 = kappa * (es.mu2 + r)
        lam = [kappa * _coth(x1), kappa * _coth(x2)]
        H0 = lam[0] + lam[1]
        Rr = -2.0 * kappa**2 + 2.0 * lam[0] * lam[1]

    st1 = _scale_tilde(kappa, es.mu1, r)
    st2 = _scale_tilde(kappa, es.mu2, r)
    gt = (st1[..., None, None] ** 2
          * es.coframe[0][..., :, None] * es.coframe[0][..., None, :]
          + st2[..., None, None] ** 2
          * es.coframe[1][..., :, None] * es.coframe[1][..., None, :])
    gt_inv = (st1[..., None, None] ** -2
              * es.frame[0][..., :, None] * es.frame[0][..., None, :]
              + st2[..., None, None] ** -2
              * es.frame[1][..., :, None] * es.frame[1][..., None, :])
    sqrt_det_gt = st1 * st2 * es.sqrt_det_g0

    X_r = None
    if np.isfinite(r):
        X_r = np.cosh(kappa * r) * es.X + (np.sinh(kappa * r) / kappa) * es.N

    s = float(np.exp(-2.0 * kappa * r)) if np.isfinite(r) else 0.0
    return FoliationFrame(kappa, float(r), s, grid, lam[0], lam[1], H0, Rr,
                          gt, gt_inv, sqrt_det_gt, X_r)


def reaction_profiles(es, kappa, r):
    """Bounded closed-form combinations used by the flow coefficients.

    Returns (H0, Dt1, Dt2) with Dt_a = e^{2 kappa r}(lambda_a/kappa - 1);
    everything finite at r = infinity.
    """
    Dt1 = _stable_dtilde(kappa, es.mu1, r)
    Dt2 = _stable_dtilde(kappa, es.mu2, r)
    if np.isinf(r):
        H0 = np.full(es.grid.shape, 2.0 * kappa)
    else:
        s = np.exp(-2.0 * kappa * r)
        H0 = 2.0 * kappa + kappa * s * (Dt1 + Dt2)
    return H0, Dt1, Dt2


def limit_metric(es, kappa):
    """Frame of the rescaled metric limit r -> infinity."""
    return frame_at(es, kappa, np.inf)


def normalized_position_limit(es, kappa):
    """lim e^{-kappa r} kappa X_r, computed in closed form.

    Equals (kappa X + N) / 2: half the null Gauss map.  The leaf
    positions approach the light cone along this direction.
    """
    return 0.5 * gauss_map(es)


# ---------------------------------------------------------------------------
# independent ODE oracle


def riccati_oracle(lam0, kappa, r_eval, g0=None, rtol=1e-12, atol=1e-14):
    """Integrate the principal-curvature and metric-factor ODE system.

    d lambda / dr = -lambda^2 + kappa^2 from lambda(0) = lam0, and
    optionally d eta / dr = 2 lambda eta from eta(0) = 1 (the squared
    principal stretch of the leaf metric).  Completely independent of the
    coth/sinh closed forms.  Returns lambda (and eta) at r_eval.
    """
    lam0 = np.atleast_1d(np.asarray(lam0, dtype=float))
    r_eval = np.asarray(r_eval, dtype=float)
    n = lam0.size
    with_eta = bool(g0)

    def rhs(_, y):
        lam = y[:n]
        out = np.empty_like(y)
        out[:n] = -lam * lam + kappa**2
        if with_eta:
            out[n:] = 2.0 * lam * y[n:]
        return out

    y0 = np.concatenate([lam0, np.ones(n)]) if with_eta else lam0
    sol = solve_ivp(rhs, (0.0, float(r_eval[-1])), y0, t_eval=r_eval,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"Riccati oracle failed: {sol.message}")
    lam = sol.y[:n]
    if with_eta:
        return lam, sol.y[n:]
    return lam


# ---------------------------------------------------------------------------
# discrete Laplace-Beltrami operator


def laplace_beltrami_matrix(grid, g, g_inv, sqrt_det_g):
    """Sparse conservative Laplace-Beltrami operator of a metric field.

    Flux form (1/sqrt g) d_a (sqrt g g^{ab} d_b f) with face coefficients
    averaged from the adjacent nodes; fluxes through the poles vanish
    identically (the face measure degenerates), so the discrete integral
    of the result against the area element is exactly zero.  Second order
    uniformly for metrics whose components carry the pole parities of an
    axisymmetric surface; for general non-orthogonal metrics the pole
    ring degrades to first order pointwise (integrated norms stay second
    order) -- use the wide-stencil variant where pole accuracy matters.
    """
    nth, nps = grid.shape
    nn = nth * nps
    half = nps // 2
    dth, dps = grid.dtheta, grid.dpsi

    ctt = sqrt_det_g * g_inv[..., 0, 0]
    ctp = sqrt_det_g * g_inv[..., 0, 1]
    cpp = sqrt_det_g * g_inv[..., 1, 1]

    idx = np.arange(nn).reshape(nth, nps)
    idx_up = np.empty((nth, nps), dtype=int)     # row i+1 through the pole
    idx_up[:-1] = idx[1:]
    idx_up[-1] = np.roll(idx[-1], -half)
    idx_dn = np.empty((nth, nps), dtype=int)     # row i-1 through the pole
    idx_dn[1:] = idx[:-1]
    idx_dn[0] = np.roll(idx[0], -half)

    rows, cols, vals = [], [], []

    def add(r_idx, c_idx, v):
        rows.append(r_idx.ravel())
        cols.append(c_idx.ravel())
        vals.append(v.ravel())

    # theta faces between rows i and i+1, i = 0 .. nth-2 (pole faces carry
    # zero flux); flux = c_tt (f[i+1]-f[i])/dth + c_tp (df/dpsi averaged)
    lo, hi = idx[:-1], idx[1:]
    face_tt = 0.5 * (ctt[:-1] + ctt[1:])
    face_tp = 0.5 * (ctp[:-1] + ctp[1:])
    w_lo = 1.0 / (dth * sqrt_det_g[:-1])
    w_hi = 1.0 / (dth * sqrt_det_g[1:])
    coeff = face_tt / dth
    tang = face_tp / (4.0 * dps)
    for rows_idx, w, sgn in ((lo, w_lo, +1.0), (hi, w_hi, -1.0)):
        add(rows_idx, hi, sgn * w * coeff)
        add(rows_idx, lo, -sgn * w * coeff)
        for block in (lo, hi):
            add(rows_idx, np.roll(block, -1, axis=1), sgn * w * tang)
            add(rows_idx, np.roll(block, 1, axis=1), -sgn * w * tang)

    # psi faces between columns j and j+1 (periodic);
    # flux = c_pp (f[j+1]-f[j])/dps + c_tp (df/dtheta averaged)
    left, right = idx, np.roll(idx, -1, axis=1)
    face_pp = 0.5 * (cpp + np.roll(cpp, -1, axis=1))
    face_tp = 0.5 * (ctp + np.roll(ctp, -1, axis=1))
    w_lo = 1.0 / (dps * sqrt_det_g)
    w_hi = 1.0 / (dps * np.roll(sqrt_det_g, -1, axis=1))
    coeff = face_pp / dps
    tang = face_tp / (4.0 * dth)
    up_l, dn_l = idx_up, idx_dn
    up_r, dn_r = np.roll(idx_up, -1, axis=1), np.roll(idx_dn, -1, axis=1)
    for rows_idx, w, sgn in ((left, w_lo, +1.0), (right, w_hi, -1.0)):
        add(rows_idx, right, sgn * w * coeff)
        add(rows_idx, left, -sgn * w * coeff)
        for block_up, block_dn in ((up_l, dn_l), (up_r, dn_r)):
            add(rows_idx, block_up, sgn * w * tang)
            add(rows_idx, block_dn, -sgn * w * tang)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(nn, nn))


def laplace_beltrami_matrix4(grid, g_inv, sqrt_det_g):
    """Fourth-order Laplace-Beltrami stencil (interior accuracy).

    Non-divergence form g^{ab} d_a d_b f + b^a d_a f with the drift
    b^a = (1/sqrt g) d_b (sqrt g g^{ba}) from fourth-order differences of
    the coefficient arrays.  Not conservative to roundoff (use the flux
    form for the discrete divergence theorem and for positivity-preserving
    stepping); pays off where solution accuracy is the target.
    """
    nth, nps = grid.shape
    nn = nth * nps
    half = nps // 2
    dth, dps = grid.dtheta, grid.dpsi

    A = g_inv[..., 0, 0]
    B = g_inv[..., 0, 1]
    C = g_inv[..., 1, 1]
    # drift coefficients; sqrt_det_g continues oddly through the poles
    b_th = (grid.dtheta_centered4(sqrt_det_g * A, parity=-1)
            + grid.dpsi_centered4(sqrt_det_g * B)) / sqrt_det_g
    b_ps = (grid.dtheta_centered4(sqrt_det_g * B, parity=+1)
            + grid.dpsi_centered4(sqrt_det_g * C)) / sqrt_det_g

    idx = np.arange(nn).reshape(nth, nps)

    def theta_map(off):
        out = np.empty((nth, nps), dtype=int)
        for i in range(nth):
            k = i + off
            if k < 0:
                out[i] = np.roll(idx[-k - 1], -half)
            elif k >= nth:
                out[i] = np.roll(idx[2 * nth - 1 - k], -half)
            else:
                out[i] = idx[k]
        return out

    tmap = {off: theta_map(off) for off in (-2, -1, 0, 1, 2)}

    D2 = {-2: -1.0 / 12, -1: 16.0 / 12, 0: -30.0 / 12, 1: 16.0 / 12, 2: -1.0 / 12}
    D1 = {-2: 1.0 / 12, -1: -8.0 / 12, 1: 8.0 / 12, 2: -1.0 / 12}

    stencil = {}

    def accum(dt_off, dp_off, field):
        key = (dt_off, dp_off)
        stencil[key] = stencil.get(key, 0.0) + field

    for off, w in D2.items():
        accum(off, 0, A * (w / dth**2))
        accum(0, off, C * (w / dps**2))
    for off, w in D1.items():
        accum(off, 0, b_th * (w / dth))
        accum(0, off, b_ps * (w / dps))
    for ot, wt in D1.items():
        for op_, wp in D1.items():
            accum(ot, op_, 2.0 * B * (wt * wp / (dth * dps)))

    rows, cols, vals = [], [], []
    base_rows = idx.ravel()
    for (dt_off, dp_off), field in stencil.items():
        col = np.roll(tmap[dt_off], -dp_off, axis=1).ravel()
        rows.append(base_rows)
        cols.append(col)
        vals.append(np.asarray(field).ravel())
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nn, nn))


def laplacian_matrix(frame, rescaled=True, order=2):
    """Sparse Laplace-Beltrami of the frame's leaf metric.

    rescaled=True gives the operator of the bounded metric
    e^{-2 kappa r} g(r) (the operator the compactified flows use), which
    equals e^{2 kappa r} times the physical leaf Laplacian.  order=2 is
    the conservative M-matrix flux form; order=4 trades those structural
    properties for interior accuracy.
    """
    if order == 2:
        L = laplace_beltrami_matrix(frame.grid, frame.gt, frame.gt_inv,
                                    frame.sqrt_det_gt)
    elif order == 4:
        L = laplace_beltrami_matrix4(frame.grid, frame.gt_inv, frame.sqrt_det_gt)
    else:
        raise ValueError("order must be 2 or 4")
    if rescaled:
        return L
    if not np.isfinite(frame.r):
        raise ValueError("physical Laplacian degenerates at r = infinity")
    return L * np.exp(-2.0 * frame.kappa * frame.r)


def laplacian(frame, f, rescaled=False):
    """Apply the leaf Laplace-Beltrami operator to a field."""
    L = laplacian_matrix(frame, rescaled=rescaled)
    return (L @ np.asarray(f, dtype=float).ravel()).reshape(frame.grid.shape)


def is_m_matrix_offdiag(L, tol=0.0):
    """True when off-diagonal entries of the Laplacian are all >= -tol.

    This is the sign pattern that makes (I - dt * a * L) an M-matrix for
    a, dt > 0, hence inverse-positive.
    """
    coo = L.tocoo()
    off = coo.data[(coo.row != coo.col)]
    return bool(np.all(off >= -tol)) if off.size else True


# ---------------------------------------------------------------------------
# general-dimension profile formulas (not wired into the flows)


def mean_curvature_profile(mu_list, kappa, r):
    """Sum of kappa coth(kappa(mu_a + r)) over the principal directions."""
    return sum(kappa * _coth(kappa * (np.asarray(mu) + r)) for mu in mu_list)


def scalar_curvature_profile(mu_list, kappa, r):
    """Leaf scalar curvature for n-1 principal directions."""
    cs = [_coth(kappa * (np.asarray(mu) + r)) for mu in mu_list]
    m = len(cs)
    cross = sum(cs[a] * cs[b] for a in range(m) for b in range(a + 1, m))
    return -m * (m - 1) * kappa**2 + 2.0 * kappa**2 * cross


def foliation_invariant_residuals(es, kappa, r_values):
    """Closed-form consistency residuals along the foliation.

    Checks the hyperboloid constraint of the leaf embedding, the null
    Gauss relation of the normalized positions, and the mean-curvature
    evolution d H0 / dr = -|A|^2 + 2 kappa^2 (via 4th-order differences).
    """
    out = {"hyperboloid": 0.0, "position_limit": 0.0, "h0_evolution": 0.0}
    gamma_half = normalized_position_limit(es, kappa)
    for r in r_values:
        fr = frame_at(es, kappa, r)
        res = np.abs(lorentz_norm_sq(fr.X_r) + 1.0 / kappa**2) * kappa**2
        out["hyperboloid"] = max(out["hyperboloid"], float(np.max(res)))
        drift = np.exp(-kappa * r) * kappa * fr.X_r - gamma_half
        bound = np.exp(-2.0 * kappa * r)
        out["position_limit"] = max(
            out["position_limit"],
            float(np.max(np.linalg.norm(drift, axis=-1)) / bound))
        dr = 1e-3 / kappa
        if r >= 2 * dr:
            stencil = [-2, -1, 1, 2]
            weights = [1.0, -8.0, 8.0, -1.0]
            dH0 = sum(w * frame_at(es, kappa, r + k * dr).H0
                      for k, w in zip(stencil, weights)) / (12.0 * dr)
            A2 = fr.lam1**2 + fr.lam2**2
            res = np.abs(dH0 + A2 - 2.0 * kappa**2)
            out["h0_evolution"] = max(out["h0_evolution"], float(np.max(res)))
    return out
