"""Minkowski R^{3,1} arithmetic, the hyperboloid model, causal classification.

Four-vectors are numpy arrays whose last axis has length 4 in the
component order (x1, x2, x3, t), signature (+, +, +, -).  All functions
broadcast over leading axes.
"""

from enum import Enum

import numpy as np

from .grid import fibonacci_sphere

#: metric signature diag(+1, +1, +1, -1) as a sign vector
ETA = np.array([1.0, 1.0, 1.0, -1.0])

DEFAULT_CAUSAL_TOL = 1e-10


class CausalClass(Enum):
    FUTURE_TIMELIKE = "future_timelike"
    FUTURE_NULL = "future_null"
    PAST_TIMELIKE = "past_timelike"
    PAST_NULL = "past_null"
    SPACELIKE = "spacelike"
    ZERO = "zero"


def four_vector(x1, x2, x3, t):
    return np.stack(np.broadcast_arrays(
        np.asarray(x1, dtype=float), np.asarray(x2, dtype=float),
        np.asarray(x3, dtype=float), np.asarray(t, dtype=float)), axis=-1)


def lorentz_dot(u, v):
    """Lorentz inner product u.v = u1 v1 + u2 v2 + u3 v3 - ut vt."""
    u = np.asarray(u)
    v = np.asarray(v)
    return np.sum(u * v * ETA, axis=-1)


def lorentz_norm_sq(v):
    return lorentz_dot(v, v)


def spatial_norm(v):
    v = np.asarray(v)
    return np.sqrt(np.sum(v[..., :3] ** 2, axis=-1))


def causal_class(v, tol=DEFAULT_CAUSAL_TOL):
    """Classify a single four-vector by the sign of v.v and of v_t.

    tol is an absolute tolerance: |v.v| <= tol counts as null and a
    vector with every component within tol of zero is ZERO.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    v = np.asarray(v, dtype=float)
    if v.shape != (4,):
        raise ValueError("causal_class expects a single four-vector")
    if np.all(np.abs(v) <= tol):
        return CausalClass.ZERO
    s = lorentz_dot(v, v)
    t = v[3]
    if s > tol:
        return CausalClass.SPACELIKE
    if s < -tol:
        return CausalClass.FUTURE_TIMELIKE if t > 0 else CausalClass.PAST_TIMELIKE
    return CausalClass.FUTURE_NULL if t >= 0 else CausalClass.PAST_NULL


def is_future_nonspacelike(cls):
    return cls in (CausalClass.FUTURE_TIMELIKE, CausalClass.FUTURE_NULL, CausalClass.ZERO)


def null_directions(n_samples, seed_rotation=0.0):
    """Deterministic battery of future null vectors zeta = (y, 1), |y| = 1."""
    y = fibonacci_sphere(n_samples, seed_rotation=seed_rotation)
    return np.concatenate([y, np.ones(y.shape[:-1] + (1,))], axis=-1)


def causal_witness_check(v, n_samples=64, seed_rotation=0.0):
    """True iff v.zeta <= 0 for every sampled null direction zeta = (y, 1).

    Witness form of the future non-spacelike condition; agrees with
    causal_class up to the sampling resolution of the direction set.
    """
    if n_samples < 4:
        raise ValueError("n_samples must be >= 4")
    zetas = null_directions(n_samples, seed_rotation=seed_rotation)
    return bool(np.all(lorentz_dot(np.asarray(v), zetas) <= 0.0))


# ---------------------------------------------------------------------------
# hyperboloid model H^3_{-kappa^2}: x.x = -1/kappa^2, t > 0


def polar_param(r_prime, theta, psi, kappa):
    """Geodesic polar parametrization of the hyperboloid.

    Returns (1/k)(sinh(k r') cos(th), sinh(k r') sin(th) cos(ps),
    sinh(k r') sin(th) sin(ps), cosh(k r')); the polar axis is x1.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    x = kappa * np.asarray(r_prime, dtype=float)
    s, c = np.sinh(x), np.cosh(x)
    st, ct = np.sin(theta), np.cos(theta)
    return four_vector(s * ct / kappa, s * st * np.cos(psi) / kappa,
                       s * st * np.sin(psi) / kappa, c / kappa)


def hyperboloid_residual(X, kappa):
    """|X.X + 1/kappa^2| per point."""
    return np.abs(lorentz_norm_sq(X) + 1.0 / kappa**2)


def check_on_hyperboloid(X, kappa, tol=1e-8):
    """Validate X.X = -1/kappa^2 and t > 0.

    The residual is measured relative to 1/kappa^2 + t^2, the size of the
    cancelling terms in the quadratic form (an absolute comparison against
    1/kappa^2 would reject exact points far up the hyperboloid, where the
    cancellation already costs ~1e-16 of that scale).
    """
    X = np.asarray(X)
    scale = 1.0 / kappa**2 + X[..., 3] ** 2
    res = hyperboloid_residual(X, kappa) / scale
    bad = res > tol
    if np.any(bad):
        worst = float(np.max(res))
        raise ValueError(
            f"point off the hyperboloid: max relative residual {worst:.3e} > {tol:.1e}")
    if np.any(X[..., 3] <= 0.0):
        raise ValueError("hyperboloid point with non-positive time component")


def minkowski_normal(a, b, c):
    """Vector Lorentz-orthogonal to three four-vectors (Hodge dual).

    Computed as the index-lowered Levi-Civita contraction; the result is
    orthogonal to a, b, c in the Lorentz product.  Broadcasts over
    leading axes.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    c = np.asarray(c)
    m = np.stack(np.broadcast_arrays(a, b, c), axis=-2)  # (..., 3, 4)
    cols = [0, 1, 2, 3]
    d_low = np.empty(m.shape[:-2] + (4,))
    for alpha in range(4):
        keep = [cc for cc in cols if cc != alpha]
        minor = m[..., :, keep]
        d_low[..., alpha] = (-1.0) ** alpha * np.linalg.det(minor)
    return d_low * ETA  # raise the index


def boost_rotation(params):
    """Element of SO(3,1) from 6 generator coefficients.

    params = (rx, ry, rz, bx, by, bz): rotation angles about the spatial
    axes and boost rapidities along them, combined via the matrix
    exponential of the generator sum.
    """
    from scipy.linalg import expm

    rx, ry, rz, bx, by, bz = params
    g = np.zeros((4, 4))
    # spatial rotations
    g[1, 2] -= rx; g[2, 1] += rx
    g[2, 0] -= ry; g[0, 2] += ry
    g[0, 1] -= rz; g[1, 0] += rz
    # boosts mix x_i with t
    g[0, 3] += bx; g[3, 0] += bx
    g[1, 3] += by; g[3, 1] += by
    g[2, 3] += bz; g[3, 2] += bz
    return expm(g)
