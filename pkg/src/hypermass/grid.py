"""Latitude-longitude grid utilities for sphere-topology surfaces.

The grid is cell-centered in the colatitude theta (poles are not nodes)
and periodic in the longitude psi:

    theta_i = (i + 1/2) * pi / ntheta,   i = 0 .. ntheta-1
    psi_j   = j * 2*pi / npsi,           j = 0 .. npsi-1

Crossing a pole maps (theta, psi) -> (-theta, psi + pi), so ghost rows
for finite-difference stencils are obtained by shifting psi by half a
period and flipping the sign of fields that are odd under theta -> -theta
(e.g. the g_theta_psi metric component). npsi must be even for the
half-period shift to land on grid nodes.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


class Grid:
    """Cell-centered (theta, psi) tensor grid on the 2-sphere."""

    def __init__(self, ntheta, npsi):
        if ntheta < 8 or npsi < 8:
            raise ValueError(f"grid too coarse: ntheta={ntheta}, npsi={npsi} (need >= 8)")
        if npsi % 2 != 0:
            raise ValueError(f"npsi must be even for pole closure, got {npsi}")
        self.ntheta = int(ntheta)
        self.npsi = int(npsi)
        self.dtheta = np.pi / ntheta
        self.dpsi = TWO_PI / npsi
        self.theta = (np.arange(ntheta) + 0.5) * self.dtheta
        self.psi = np.arange(npsi) * self.dpsi
        # broadcastable 2D views
        self.theta2 = self.theta[:, None] * np.ones((1, npsi))
        self.psi2 = np.ones((ntheta, 1)) * self.psi[None, :]

    @property
    def shape(self):
        return (self.ntheta, self.npsi)

    @property
    def size(self):
        return self.ntheta * self.npsi

    def flat_index(self, i, j):
        return i * self.npsi + j

    def pad_poles(self, f, parity=+1, rows=1):
        """Extend f by `rows` ghost rows across each pole.

        parity is the sign of the field under theta -> -theta at fixed
        psi + pi (scalars and ambient vector components: +1, tensor
        components with a single theta index: -1).
        """
        f = np.asarray(f)
        half = self.npsi // 2
        top = parity * np.roll(f[:rows][::-1], half, axis=1)
        bot = parity * np.roll(f[-rows:][::-1], half, axis=1)
        return np.concatenate([top, f, bot], axis=0)

    def dtheta_centered(self, f, parity=+1):
        """Second-order centered d/dtheta with pole ghosts."""
        fp = self.pad_poles(f, parity=parity)
        return (fp[2:] - fp[:-2]) / (2.0 * self.dtheta)

    def dpsi_centered(self, f):
        return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * self.dpsi)

    def dtheta_centered4(self, f, parity=+1):
        """Fourth-order centered d/dtheta with two pole ghost rows."""
        fp = self.pad_poles(f, parity=parity, rows=2)
        return (-fp[4:] + 8.0 * fp[3:-1] - 8.0 * fp[1:-3] + fp[:-4]) / (12.0 * self.dtheta)

    def dpsi_centered4(self, f):
        return (-np.roll(f, -2, axis=1) + 8.0 * np.roll(f, -1, axis=1)
                - 8.0 * np.roll(f, 1, axis=1) + np.roll(f, 2, axis=1)) / (12.0 * self.dpsi)

    def d2theta_centered(self, f, parity=+1):
        fp = self.pad_poles(f, parity=parity)
        return (fp[2:] - 2.0 * fp[1:-1] + fp[:-2]) / self.dtheta**2

    def d2psi_centered(self, f):
        return (np.roll(f, -1, axis=1) - 2.0 * f + np.roll(f, 1, axis=1)) / self.dpsi**2

    def d2theta_psi_centered(self, f, parity=+1):
        """Mixed second derivative, centered in both directions."""
        return self.dpsi_centered(self.dtheta_centered(f, parity=parity))

    def integrate(self, f, sqrt_det_g):
        """Surface integral with the midpoint rule in theta, periodic
        trapezoid (= plain sum) in psi."""
        return float(np.sum(f * sqrt_det_g) * self.dtheta * self.dpsi)

    def integrate_vec(self, f, sqrt_det_g):
        """Surface integral of a stack of fields f[..., ntheta, npsi]."""
        return np.sum(f * sqrt_det_g, axis=(-2, -1)) * self.dtheta * self.dpsi


def resample(grid_from, f, grid_to):
    """Bicubic resampling between lat-long grids (for refinement studies).

    Pads with pole-parity ghost rows and periodic psi columns so the
    spline stays accurate through the domain edges; interpolation error
    is O(h^4), below the O(h^2) differences it is used to measure.
    """
    from scipy.interpolate import RectBivariateSpline

    f = np.asarray(f)
    rows = 3
    fp = grid_from.pad_poles(f, parity=+1, rows=rows)
    wrap = 3
    fp = np.concatenate([fp[:, -wrap:], fp, fp[:, :wrap]], axis=1)
    th = np.concatenate([-grid_from.theta[:rows][::-1], grid_from.theta,
                         np.pi + (np.pi - grid_from.theta[-rows:][::-1])])
    ps = np.concatenate([grid_from.psi[-wrap:] - TWO_PI, grid_from.psi,
                         grid_from.psi[:wrap] + TWO_PI])
    spl = RectBivariateSpline(th, ps, fp, kx=3, ky=3)
    return spl(grid_to.theta, grid_to.psi)


def fibonacci_sphere(n, seed_rotation=0.0):
    """Deterministic quasi-uniform unit vectors on S^2 (golden-angle spiral)."""
    if n < 4:
        raise ValueError("need at least 4 sample directions")
    k = np.arange(n)
    z = 1.0 - (2.0 * k + 1.0) / n
    phi = k * np.pi * (3.0 - np.sqrt(5.0)) + seed_rotation
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def convergence_order(h_values, errors):
    """Least-squares slope of log(error) against log(h)."""
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    if np.any(e <= 0.0):
        raise ValueError("errors must be positive to fit an order")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])


def fit_exponent(r, values, r_min=None, r_max=None):
    """Fit values ~ C * exp(-q r); returns q (positive for decay).

    Samples with non-positive value are dropped (they carry no rate
    information and break the log fit).
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = v > 0.0
    if r_min is not None:
        mask &= r >= r_min
    if r_max is not None:
        mask &= r <= r_max
    if mask.sum() < 3:
        raise ValueError("not enough samples in the fit window")
    slope = np.polyfit(r[mask], np.log(v[mask]), 1)[0]
    return float(-slope)
