"""Killing spinors on the hyperboloid, their square norm, and the null map.

Spinors are constant pairs (a1, a2) in C^2 in a fixed global
trivialization.  The quadratic map zeta sends a spinor to a
future-directed null four-vector; restricted to unit spinors it is the
Hopf fibration onto the unit sphere of null directions.
"""

import numpy as np

from .minkowski import four_vector, lorentz_dot, check_on_hyperboloid

I = 1j

# Clifford matrices of the fixed trivialization, order (E1, E2, E3, E0).
C_E1 = np.array([[I, 0.0], [0.0, -I]])
C_E2 = np.array([[0.0, I], [I, 0.0]])
C_E3 = np.array([[0.0, 1.0], [-1.0, 0.0]])
C_E0 = np.array([[I, 0.0], [0.0, I]])

CLIFFORD = (C_E1, C_E2, C_E3, C_E0)


def _check_clifford():
    # spatial anticommutation relations; verified once at import
    for i in range(3):
        for j in range(3):
            anti = CLIFFORD[i] @ CLIFFORD[j] + CLIFFORD[j] @ CLIFFORD[i]
            want = -2.0 * np.eye(2) if i == j else np.zeros((2, 2))
            if not np.allclose(anti, want, atol=1e-15):
                raise AssertionError(f"Clifford relation failed for ({i}, {j})")


_check_clifford()


def killing_spinor(a, r_prime, theta, psi, kappa):
    """Killing spinor field evaluated at geodesic polar coordinates.

    a = (a1, a2) are the constant components; the result broadcasts over
    array-valued coordinates and has shape (..., 2).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    a1, a2 = complex(a[0]), complex(a[1])
    x = 0.5 * kappa * np.asarray(r_prime, dtype=float)
    ep, em = np.exp(x), np.exp(-x)
    ch, sh = np.cos(np.asarray(theta) / 2.0), np.sin(np.asarray(theta) / 2.0)
    ph = np.exp(0.5j * np.asarray(psi))
    s1 = ep * ph * ch * a1 + ep * np.conj(ph) * sh * a2
    s2 = -em * ph * sh * a1 + em * np.conj(ph) * ch * a2
    return np.stack(np.broadcast_arrays(s1, s2), axis=-1)


def zeta(a):
    """Null four-vector of a spinor, componentwise quadratic form.

    Returns (-(|a1|^2-|a2|^2), -(a1 conj(a2) + conj(a1) a2),
    -i(a1 conj(a2) - conj(a1) a2), |a1|^2+|a2|^2); real, null, and
    future-directed (zero only for a = 0).
    """
    a1, a2 = complex(a[0]), complex(a[1])
    n1, n2 = abs(a1) ** 2, abs(a2) ** 2
    cross = a1 * np.conj(a2)
    return four_vector(-(n1 - n2), -2.0 * cross.real, 2.0 * cross.imag, n1 + n2)


def zeta_clifford(a):
    """Same null vector through the Clifford-matrix expectation values.

    Independent code path used to cross-check `zeta`.
    """
    a = np.asarray([complex(a[0]), complex(a[1])])

    def expv(mat):
        return np.vdot(a, mat @ a)  # <m a, a> with conjugation on the second slot

    comps = [1j * expv(C_E1), 1j * expv(C_E2), 1j * expv(C_E3), -1j * expv(C_E0)]
    out = np.array([c.real for c in comps])
    imag = max(abs(c.imag) for c in comps)
    if imag > 1e-12 * (1.0 + np.max(np.abs(out))):
        raise AssertionError(f"zeta_clifford produced an imaginary part {imag:.3e}")
    return out


def killing_norm_sq(a, X, kappa, tol=1e-8):
    """Square norm of the Killing spinor at hyperboloid point(s) X.

    Equals -kappa * X.zeta(a); strictly positive for a != 0.  Rejects X
    off the hyperboloid beyond `tol` (relative).
    """
    check_on_hyperboloid(X, kappa, tol=tol)
    return -kappa * lorentz_dot(np.asarray(X), zeta(a))


def spinor_norm_sq(s):
    """|s1|^2 + |s2|^2 for spinor arrays of shape (..., 2)."""
    s = np.asarray(s)
    return np.sum(np.abs(s) ** 2, axis=-1)
