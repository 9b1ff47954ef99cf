"""Input 2-surface: metric grid, Gaussian curvature, mean-curvature data.

A SurfaceSpec holds the intrinsic metric of a sphere-topology surface on
the cell-centered latitude-longitude grid together with the
mean-curvature source: either a Riemannian field H or a spacetime pair
(H, tr_Sigma p), which enters downstream only through
sqrt(H^2 - (tr_Sigma p)^2).

Analytic presets double as verification targets; each carries a
closed-form curvature.
"""

import json

import numpy as np

from .grid import Grid


class AdmissibilityError(ValueError):
    """Input surface fails a hypothesis needed by the pipeline."""


# ---------------------------------------------------------------------------
# presets


def preset_profile(name, params, theta):
    """Profile data (E, Phi) of an axisymmetric preset: g = E dth^2 + Phi^2 dps^2."""
    th = np.asarray(theta, dtype=float)
    if name == "sphere":
        R = float(params["R"])
        if R <= 0:
            raise ValueError("sphere radius must be positive")
        return np.full_like(th, R * R), R * np.sin(th)
    if name == "spheroid":
        a, c = float(params["a"]), float(params["c"])
        if a <= 0 or c <= 0:
            raise ValueError("spheroid semi-axes must be positive")
        E = a * a * np.cos(th) ** 2 + c * c * np.sin(th) ** 2
        return E, a * np.sin(th)
    if name == "saddle_band":
        # metric dth^2 + Phi^2 dps^2 with Phi = sin(th)(1 + beta sin^2 th);
        # closed-form curvature dips to 1 - 6 beta at the poles.
        beta = float(params["beta"])
        if beta < 0:
            raise ValueError("beta must be >= 0")
        s = np.sin(th)
        return np.ones_like(th), s * (1.0 + beta * s * s)
    raise ValueError(f"unknown preset '{name}'")


def preset_curvature(name, params, theta):
    """Closed-form Gaussian curvature of a preset, sampled at theta."""
    th = np.asarray(theta, dtype=float)
    if name == "sphere":
        R = float(params["R"])
        return np.full_like(th, 1.0 / R**2)
    if name == "spheroid":
        a, c = float(params["a"]), float(params["c"])
        E = a * a * np.cos(th) ** 2 + c * c * np.sin(th) ** 2
        return c * c / E**2
    if name == "saddle_band":
        beta = float(params["beta"])
        s2 = np.sin(th) ** 2
        return (1.0 - 6.0 * beta + 9.0 * beta * s2) / (1.0 + beta * s2)
    raise ValueError(f"unknown preset '{name}'")


def preset_flat_mean_curvature(name, params, theta):
    """Mean curvature of the preset as a surface in Euclidean 3-space.

    Available for the embedded presets (sphere, spheroid); used as the
    'flat' mean-curvature source.
    """
    th = np.asarray(theta, dtype=float)
    if name == "sphere":
        R = float(params["R"])
        return np.full_like(th, 2.0 / R)
    if name == "spheroid":
        # surface of revolution (a sin, c cos): principal curvatures
        # k_meridian = ac / E^{3/2}, k_parallel = c / (a E^{1/2})
        a, c = float(params["a"]), float(params["c"])
        E = a * a * np.cos(th) ** 2 + c * c * np.sin(th) ** 2
        return a * c / E**1.5 + c / (a * np.sqrt(E))
    raise ValueError(f"preset '{name}' has no flat mean curvature")


class SurfaceSpec:
    """Sphere-topology surface data on an ntheta x npsi grid.

    gtt, gtp, gpp: metric components (theta-theta, theta-psi, psi-psi).
    hsource: {"type": "riemannian", "H": field} or
             {"type": "spacetime", "H": field, "trp": field} or
             {"type": "h0_fraction", "fraction": x} (resolved after embedding).
    """

    def __init__(self, grid, gtt, gtp, gpp, hsource, kind="grid", kappa=None):
        self.grid = grid
        self.gtt = np.asarray(gtt, dtype=float)
        self.gtp = np.asarray(gtp, dtype=float)
        self.gpp = np.asarray(gpp, dtype=float)
        self.hsource = hsource
        self.kind = kind
        self.kappa = kappa
        for name, arr in (("g_tt", self.gtt), ("g_tp", self.gtp), ("g_pp", self.gpp)):
            if arr.shape != grid.shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {grid.shape}")
        self._validate_metric()

    def _validate_metric(self):
        det = self.gtt * self.gpp - self.gtp**2
        bad = (self.gtt <= 0) | (det <= 0)
        if np.any(bad):
            i, j = np.unravel_index(np.argmax(bad), bad.shape)
            raise ValueError(
                f"metric not positive definite at node (i={i}, j={j}): "
                f"g_tt={self.gtt[i, j]:.6g}, det={det[i, j]:.6g}")

    @property
    def det_g(self):
        return self.gtt * self.gpp - self.gtp**2

    @property
    def sqrt_det_g(self):
        return np.sqrt(self.det_g)

    def metric_arrays(self):
        return self.gtt, self.gtp, self.gpp

    def area(self):
        return self.grid.integrate(np.ones(self.grid.shape), self.sqrt_det_g)

    def is_axisymmetric(self, tol=1e-10):
        scale = float(np.max(self.gpp))
        return (np.max(np.abs(self.gtp)) <= tol * scale
                and np.max(np.ptp(self.gtt, axis=1)) <= tol * scale
                and np.max(np.ptp(self.gpp, axis=1)) <= tol * scale)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_preset(cls, name, params, ntheta, npsi, hsource=None, kappa=None):
        grid = Grid(ntheta, npsi)
        E, phi = preset_profile(name, params, grid.theta)
        gtt = np.repeat(E[:, None], npsi, axis=1)
        gpp = np.repeat((phi**2)[:, None], npsi, axis=1)
        gtp = np.zeros_like(gtt)
        if hsource is None:
            hsource = {"type": "h0_fraction", "fraction": 1.0}
        hsource = _resolve_preset_hsource(name, params, grid, hsource)
        return cls(grid, gtt, gtp, gpp, hsource,
                   kind=f"preset:{name}:{json.dumps(params, sort_keys=True)}",
                   kappa=kappa)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc):
        kind = doc.get("kind")
        kappa = doc.get("kappa")
        hsource = doc.get("hsource")
        if kind == "preset":
            p = doc["preset"]
            return cls.from_preset(p["name"], p["params"], int(doc["ntheta"]),
                                   int(doc["npsi"]), hsource=hsource, kappa=kappa)
        if kind == "grid":
            g = doc["grid"]
            grid = Grid(int(g["ntheta"]), int(g["npsi"]))
            shape = grid.shape
            gtt = np.asarray(g["g_tt"], dtype=float).reshape(shape)
            gtp = np.asarray(g["g_tp"], dtype=float).reshape(shape)
            gpp = np.asarray(g["g_pp"], dtype=float).reshape(shape)
            hs = dict(hsource) if hsource else None
            if hs and "H" in hs:
                hs["H"] = np.asarray(hs["H"], dtype=float).reshape(shape)
            if hs and "trp" in hs:
                hs["trp"] = np.asarray(hs["trp"], dtype=float).reshape(shape)
            return cls(grid, gtt, gtp, gpp, hs, kind="grid", kappa=kappa)
        raise ValueError(f"unknown surface kind '{kind}'")

    def to_dict(self):
        doc = {"kind": "grid", "kappa": self.kappa,
               "grid": {"ntheta": self.grid.ntheta, "npsi": self.grid.npsi,
                        "g_tt": self.gtt.ravel().tolist(),
                        "g_tp": self.gtp.ravel().tolist(),
                        "g_pp": self.gpp.ravel().tolist()}}
        hs = self.hsource
        if hs is not None:
            out = {"type": hs["type"]}
            for key in ("H", "trp"):
                if key in hs:
                    out[key] = np.asarray(hs[key]).ravel().tolist()
            if "fraction" in hs:
                out["fraction"] = hs["fraction"]
            doc["hsource"] = out
        return doc


def _resolve_preset_hsource(name, params, grid, hsource):
    hs = dict(hsource)
    if hs["type"] == "flat":
        H = preset_flat_mean_curvature(name, params, grid.theta)
        return {"type": "riemannian", "H": np.repeat(H[:, None], grid.npsi, axis=1)}
    for key in ("H", "trp"):
        if key in hs:
            arr = np.asarray(hs[key], dtype=float)
            if arr.ndim == 0:
                arr = np.full(grid.shape, float(arr))
            else:
                arr = arr.reshape(grid.shape)
            hs[key] = arr
    return hs


# ---------------------------------------------------------------------------
# curvature and admissibility


def gaussian_curvature(spec):
    """Gaussian curvature of the metric grid.

    Uses the orthonormal-coframe (Liouville) form: with the coframe
    built from E, F, G the connection coefficients are

        p = (sqrt(E)/sqrt(g)) (d_psi sqrt(E) - d_theta (F/sqrt(E)))
        q = (F/E) p - (1/sqrt(E)) d_theta (sqrt(g)/sqrt(E))
        K = (d_theta q - d_psi p) / sqrt(g)

    discretized with centered second-order differences and pole-parity
    ghosts.  Unlike the Brioschi form, every divided quantity stays O(1)
    through the poles, so the scheme is uniformly second order there.
    sqrt(g)/sqrt(E) is odd under the pole reflection (it changes sign
    with theta), which fixes the ghost parities below.
    """
    grid = spec.grid
    E, F, G = spec.gtt, spec.gtp, spec.gpp

    sqrtE = np.sqrt(E)
    sqrtg = np.sqrt(E * G - F * F)

    bracket = grid.dpsi_centered(sqrtE) - grid.dtheta_centered(F / sqrtE, parity=-1)
    p = sqrtE / sqrtg * bracket
    q = (F / E) * p - grid.dtheta_centered(sqrtg / sqrtE, parity=-1) / sqrtE
    return (grid.dtheta_centered(q, parity=+1) - grid.dpsi_centered(p)) / sqrtg


def effective_H(spec):
    """Mean-curvature magnitude entering the flow initial data.

    Riemannian source: H itself.  Spacetime source: sqrt(H^2 - trp^2),
    which requires H > |trp| pointwise.
    """
    hs = spec.hsource
    if hs is None:
        raise AdmissibilityError("surface has no mean-curvature source")
    if hs["type"] == "riemannian":
        H = np.asarray(hs["H"], dtype=float)
        _require_positive(H, "H")
        return H.copy()
    if hs["type"] == "spacetime":
        H = np.asarray(hs["H"], dtype=float)
        trp = np.asarray(hs["trp"], dtype=float)
        margin = H - np.abs(trp)
        if np.any(margin <= 0.0):
            i, j = np.unravel_index(np.argmin(margin), margin.shape)
            raise AdmissibilityError(
                f"H <= |tr p| at node (i={i}, j={j}): H={H[i, j]:.6g}, "
                f"trp={trp[i, j]:.6g}")
        return np.sqrt(H * H - trp * trp)
    if hs["type"] == "h0_fraction":
        raise AdmissibilityError(
            "h0_fraction mean-curvature source must be resolved against an "
            "embedding before use")
    raise ValueError(f"unknown hsource type '{hs['type']}'")


def _require_positive(field, name):
    if np.any(field <= 0.0):
        i, j = np.unravel_index(np.argmin(field), field.shape)
        raise AdmissibilityError(
            f"{name} must be positive; worst node (i={i}, j={j}): {field[i, j]:.6g}")


class AdmissibilityReport:
    def __init__(self, K, min_K, min_H_margin, kappa, passed):
        self.K = K
        self.min_K = float(min_K)
        self.min_H_margin = None if min_H_margin is None else float(min_H_margin)
        self.kappa = float(kappa)
        self.kappa_floor = float(np.sqrt(max(0.0, -self.min_K)))
        self.passed = bool(passed)

    def __repr__(self):
        return (f"AdmissibilityReport(pass={self.passed}, min_K={self.min_K:.6g}, "
                f"kappa={self.kappa:.6g}, kappa_floor={self.kappa_floor:.6g}, "
                f"min_H_margin={self.min_H_margin})")

    def summary_lines(self):
        return [
            f"admissibility_pass = {str(self.passed).lower()}",
            f"min_gauss_curvature = {self.min_K!r}",
            f"kappa_floor = {self.kappa_floor!r}",
            f"min_H_margin = {self.min_H_margin!r}",
        ]


def check_admissibility(spec, kappa):
    """Test K > -kappa^2 and (for spacetime sources) H > |tr p|.

    Failures are report content, not exceptions.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    K = gaussian_curvature(spec)
    min_K = float(np.min(K))
    hs = spec.hsource
    min_margin = None
    h_ok = True
    if hs is not None and hs["type"] == "spacetime":
        margin = np.asarray(hs["H"]) - np.abs(np.asarray(hs["trp"]))
        min_margin = float(np.min(margin))
        h_ok = min_margin > 0.0
    elif hs is not None and hs["type"] == "riemannian":
        min_margin = float(np.min(hs["H"]))
        h_ok = min_margin > 0.0
    passed = (min_K > -kappa**2) and h_ok
    return AdmissibilityReport(K, min_K, min_margin, kappa, passed)
