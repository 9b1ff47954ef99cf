"""End-to-end orchestration with content-addressed artifact caching.

A run is deterministic given (input, config, seed): every stage derives
from the surface spec and the RunConfig, artifacts embed the config hash
in their first line (text) or attributes (npz), and cached stages are
reused when the hash matches.
"""

import hashlib
import json
import os

import numpy as np

from .surface import (SurfaceSpec, AdmissibilityError, check_admissibility,
                      effective_H)
from .embedding import (EmbeddingOptions, embed_axisymmetric,
                        embed_general, embed_geodesic_sphere, EmbeddedSurface,
                        dump_embedding_table)
from .foliation import FoliationSchedule, frame_at
from .flows import (solve_u, solve_W_vector, FlowField, gauge_deviation,
                    decay_exponent_u)
from .grid import fit_exponent
from .mass import (energy_momentum, limit_check, monotonicity_check,
                   project_mass, MassReport, fit_limit_constant)

#: convention notes embedded in every report (applied sign/normalization
#: decisions that a reader of the raw numbers needs)
CONVENTION_NOTES = (
    "exported P and W0 are the future-directed representatives; the raw "
    "weight flow with terminal -(k X + N) is past-directed and is reported "
    "as P_raw",
    "the lapse deviation is compactified as e^{+3 kappa r}(u - 1); its "
    "limit v_inf is read off the terminal schedule sample",
    "the normalized leaf positions satisfy lim e^{-kappa r} kappa X_r = "
    "(kappa X + N)/2, half the null gauss map; limit integrals use the "
    "rescaled-metric area element",
)


class RunConfig:
    def __init__(self, input_path=None, spec=None, kappa=1.0, ntheta=32,
                 npsi=32, r_max=None, steps=200, strategy="auto",
                 out_dir="out", seed=0, tol_defect=1e-6, tol_mono=1e-6,
                 scheme="trapezoid", zeta_battery=8):
        self.input_path = input_path
        self.spec = spec
        self.kappa = float(kappa)
        self.ntheta = int(ntheta)
        self.npsi = int(npsi)
        self.r_max = float(r_max) if r_max is not None else 8.0 / self.kappa
        self.steps = int(steps)
        self.strategy = strategy
        self.out_dir = out_dir
        self.seed = int(seed)
        self.tol_defect = float(tol_defect)
        self.tol_mono = float(tol_mono)
        self.scheme = scheme
        self.zeta_battery = int(zeta_battery)
        self.validate()

    def validate(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.steps < 16:
            raise ValueError("steps must be at least 16")
        if self.r_max < 2.0 / self.kappa:
            raise ValueError("r_max must be at least 2/kappa")

    def config_hash(self):
        payload = {
            "kappa": self.kappa, "ntheta": self.ntheta, "npsi": self.npsi,
            "r_max": self.r_max, "steps": self.steps,
            "strategy": self.strategy, "seed": self.seed,
            "tol_defect": self.tol_defect, "tol_mono": self.tol_mono,
            "scheme": self.scheme, "zeta_battery": self.zeta_battery,
        }
        if self.input_path is not None:
            with open(self.input_path, "rb") as fh:
                payload["input_sha"] = hashlib.sha256(fh.read()).hexdigest()
        elif self.spec is not None:
            blob = json.dumps(self.spec.to_dict(), sort_keys=True).encode()
            payload["input_sha"] = hashlib.sha256(blob).hexdigest()
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class Pipeline:
    """Lazy, cached pipeline over one RunConfig."""

    def __init__(self, config, log=print):
        self.cfg = config
        self.log = log or (lambda *a, **k: None)
        self.hash = config.config_hash()
        self._spec = None
        self._admissibility = None
        self._es = None
        self._schedule = None
        self._u = None
        self._w = None
        self._calH0 = None
        os.makedirs(config.out_dir, exist_ok=True)

    # -- stages ------------------------------------------------------------

    @property
    def spec(self):
        if self._spec is None:
            if self.cfg.spec is not None:
                self._spec = self.cfg.spec
            else:
                self._spec = SurfaceSpec.from_file(self.cfg.input_path)
        return self._spec

    @property
    def admissibility(self):
        if self._admissibility is None:
            self._admissibility = check_admissibility(self.spec, self.cfg.kappa)
        return self._admissibility

    def require_admissible(self):
        rep = self.admissibility
        hs = self.spec.hsource or {}
        h_gate = hs.get("type") != "h0_fraction"
        if rep.min_K <= -self.cfg.kappa**2 or (h_gate and not rep.passed):
            raise AdmissibilityError(
                "surface fails admissibility: " +
                "; ".join(rep.summary_lines()))
        return rep

    @property
    def embedding(self):
        if self._es is None:
            self._es = self._cached("embedding", self._embed,
                                    self._save_embedding, self._load_embedding)
        return self._es

    def _embed(self):
        self.require_admissible()
        cfg = self.cfg
        spec = self.spec
        strategy = cfg.strategy
        if strategy == "auto":
            strategy = "axisymmetric" if spec.is_axisymmetric() else "general"
        if strategy == "geodesic_sphere":
            R = np.sqrt(spec.area() / (4.0 * np.pi))
            es = embed_geodesic_sphere(float(R), cfg.kappa,
                                       spec.grid.ntheta, spec.grid.npsi)
        elif strategy == "axisymmetric":
            es = embed_axisymmetric(spec, cfg.kappa, tol_defect=cfg.tol_defect)
        elif strategy == "general":
            opts = EmbeddingOptions(strategy="general",
                                    tol_defect=max(cfg.tol_defect, 1e-5))
            es = embed_general(spec, cfg.kappa, opts)
        else:
            raise ValueError(f"unknown strategy '{cfg.strategy}'")
        return es

    @property
    def calH0(self):
        if self._calH0 is None:
            hs = self.spec.hsource
            if hs is None:
                raise AdmissibilityError("no mean-curvature source provided")
            if hs["type"] == "h0_fraction":
                frac = float(hs["fraction"])
                if frac <= 0:
                    raise AdmissibilityError("h0 fraction must be positive")
                self._calH0 = frac * frame_at(self.embedding, self.cfg.kappa,
                                              0.0).H0
            else:
                self._calH0 = effective_H(self.spec)
        return self._calH0

    @property
    def schedule(self):
        if self._schedule is None:
            self._schedule = FoliationSchedule.uniform_r(
                self.cfg.kappa, r_max=self.cfg.r_max, steps=self.cfg.steps)
        return self._schedule

    @property
    def u_flow(self):
        if self._u is None:
            self._u = self._cached("u_flow", self._solve_u, self._save_flow,
                                   self._load_u)
        return self._u

    def _solve_u(self):
        return solve_u(self.embedding, self.cfg.kappa, self.calH0,
                       self.schedule, scheme=self.cfg.scheme)

    @property
    def w_flow(self):
        if self._w is None:
            self._w = self._cached("w_flow", self._solve_w, self._save_flow,
                                   self._load_w)
        return self._w

    def _solve_w(self):
        return solve_W_vector(self.embedding, self.cfg.kappa, self.u_flow,
                              scheme=self.cfg.scheme)

    # -- cache plumbing ------------------------------------------------------

    def _cache_path(self, stage):
        return os.path.join(self.cfg.out_dir, f"cache_{stage}.npz")

    def _cached(self, stage, compute, save, load):
        path = self._cache_path(stage)
        if os.path.exists(path):
            try:
                with np.load(path, allow_pickle=False) as dat:
                    if str(dat["config_hash"]) == self.hash:
                        obj = load(dat)
                        self.log(f"reusing cached {stage} ({self.hash})")
                        return obj
            except Exception:
                pass
        obj = compute()
        save(stage, obj, path)
        return obj

    def _save_embedding(self, stage, es, path):
        np.savez_compressed(
            path, config_hash=self.hash, X=es.X, N=es.N, g0=es.g0, h=es.h,
            lam1=es.lam1, lam2=es.lam2, mu1=es.mu1, mu2=es.mu2,
            frame=es.frame, coframe=es.coframe,
            defect=es.defect, certified=es.certified,
            strategy=np.bytes_(es.strategy.encode()))

    def _load_embedding(self, dat):
        return EmbeddedSurface(
            self.spec.grid, self.cfg.kappa, dat["X"], dat["N"], dat["g0"],
            dat["h"], dat["lam1"], dat["lam2"], dat["mu1"], dat["mu2"],
            dat["frame"], dat["coframe"], float(dat["defect"]),
            bool(dat["certified"]), dat["strategy"].item().decode())

    def _save_flow(self, stage, field, path):
        np.savez_compressed(path, config_hash=self.hash, values=field.values,
                            s=field.schedule.s,
                            kind=np.bytes_(field.kind.encode()),
                            tail_converged=bool(field.meta.get("tail_converged",
                                                               True)))

    def _load_u(self, dat):
        return FlowField("u", self.schedule, dat["values"],
                         meta={"scheme": self.cfg.scheme, "cached": True,
                               "tail_converged": bool(dat["tail_converged"])})

    def _load_w(self, dat):
        return FlowField("w_vector", self.schedule, dat["values"],
                         meta={"scheme": self.cfg.scheme, "cached": True})

    # -- reporting ----------------------------------------------------------

    def zeta_directions(self):
        rng = np.random.default_rng(self.cfg.seed)
        out = []
        for _ in range(self.cfg.zeta_battery):
            a = rng.normal(size=2) + 1j * rng.normal(size=2)
            out.append(tuple(a / np.linalg.norm(a)))
        return out

    def mass_report(self):
        cfg = self.cfg
        es = self.embedding
        u = self.u_flow
        w = self.w_flow
        em, samples = energy_momentum(es, cfg.kappa, u, w)
        checks = []
        monos = []
        for a in self.zeta_directions():
            proj = project_mass(samples, a)
            monos.append(monotonicity_check(proj, tol_mono=cfg.tol_mono))
            checks.append(limit_check(es, cfg.kappa, u.v_infty, samples, a))
        worst = max(monos, key=lambda mv: mv.worst_increment)
        try:
            q_u, _, _ = decay_exponent_u(u, cfg.kappa)
        except ValueError:
            q_u = None
        try:
            rf, dev, _ = gauge_deviation(u, cfg.kappa)
            q_A = fit_exponent(rf, dev, r_min=2.0 / cfg.kappa)
        except ValueError:
            q_A = None
        extras = {
            "embedding_strategy": es.strategy,
            "embedding_defect": es.defect,
            "embedding_certified": es.certified,
            "lambda_margin": es.lambda_margin(),
            "min_gauss_curvature": self.admissibility.min_K,
            "kappa_floor": self.admissibility.kappa_floor,
            "v_inf_mean": float(np.mean(u.v_infty)),
            "limit_constant_fit": fit_limit_constant(checks)
            if any(c.rhs_direct != 0.0 for c in checks) else 1.0,
        }
        return MassReport(cfg.kappa, samples, em, checks, worst,
                          decay_u=q_u, decay_A=q_A, notes=CONVENTION_NOTES,
                          config_hash=self.hash, extras=extras)

    # -- artifact writers ----------------------------------------------------

    def _write_header(self, fh, columns):
        fh.write(f"# hypermass config={self.hash}\n")
        fh.write(",".join(columns) + "\n")

    def write_embedding_table(self):
        path = os.path.join(self.cfg.out_dir, "embedding.tsv")
        dump_embedding_table(self.embedding, path)
        return path

    def write_u_csv(self, decimate=None):
        cfg = self.cfg
        u = self.u_flow
        sched = u.schedule
        ns = len(sched.r_finite)
        if decimate is None:
            decimate = max(1, ns // 16)
        path = os.path.join(cfg.out_dir, "u.csv")
        grid = self.spec.grid
        with open(path, "w") as fh:
            self._write_header(fh, ["r", "t", "node_theta", "node_psi", "u", "v"])
            for k in list(range(0, ns, decimate)) + [ns - 1]:
                uk = u.u_at(k)
                vk = u.values[k]
                for i in range(grid.ntheta):
                    for j in range(grid.npsi):
                        fh.write(f"{sched.r[k]:.17g},{sched.t[k]:.17g},"
                                 f"{grid.theta[i]:.17g},{grid.psi[j]:.17g},"
                                 f"{uk[i, j]:.17g},{vk[i, j]:.17g}\n")
        return path

    def write_w_csv(self, decimate=None):
        cfg = self.cfg
        w = self.w_flow
        sched = w.schedule
        ns = len(sched.s)
        if decimate is None:
            decimate = max(1, ns // 16)
        path = os.path.join(cfg.out_dir, "w.csv")
        grid = self.spec.grid
        cols = ["r", "tau", "node_theta", "node_psi",
                "w_x1", "w_x2", "w_x3", "w_t"]
        with open(path, "w") as fh:
            self._write_header(fh, cols)
            for k in list(range(0, ns, decimate)) + [ns - 1]:
                wk = w.values[k]
                for i in range(grid.ntheta):
                    for j in range(grid.npsi):
                        vals = ",".join(f"{wk[c, i, j]:.17g}" for c in range(4))
                        fh.write(f"{sched.r[k]:.17g},{sched.tau[k]:.17g},"
                                 f"{grid.theta[i]:.17g},{grid.psi[j]:.17g},"
                                 f"{vals}\n")
        return path

    def write_mass_csv(self, report):
        cfg = self.cfg
        samples = report.samples_vec
        sched = samples.schedule
        path = os.path.join(cfg.out_dir, "mass.csv")
        dirs = self.zeta_directions()
        projs = [project_mass(samples, a) for a in dirs]
        cols = (["r", "t", "m_x1", "m_x2", "m_x3", "m_t"]
                + [f"m_zeta_{i}" for i in range(len(dirs))])
        with open(path, "w") as fh:
            self._write_header(fh, cols)
            for k in range(len(sched.s)):
                row = [sched.r[k], sched.t[k], *samples.values[k],
                       *[p[k] for p in projs]]
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return path

    def write_report(self, report):
        path = os.path.join(self.cfg.out_dir, "report.txt")
        report.write(path)
        return path
