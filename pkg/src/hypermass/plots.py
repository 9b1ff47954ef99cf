"""Report figures rendered to files next to the delimited outputs."""

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .flows import gauge_deviation  # noqa: E402
from .mass import project_mass  # noqa: E402


def plot_mass_profile(pipeline, report, path=None):
    """m_W(r) for the component masses and a few null projections."""
    samples = report.samples_vec
    rf = samples.schedule.r_finite
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(rf, samples.values[:-1, 3], label="m_t", lw=1.8)
    for i, a in enumerate(pipeline.zeta_directions()[:4]):
        proj = project_mass(samples, a)
        ax.plot(rf, proj[:-1], lw=0.9, alpha=0.75, label=f"m_zeta_{i}")
    ax.axhline(samples.values[-1, 3], color="k", ls=":", lw=0.8,
               label="limit (m_t)")
    ax.set_xlabel("r")
    ax.set_ylabel("mass functional")
    ax.set_title("weighted mean-curvature difference along the foliation")
    ax.legend(fontsize=8, ncol=2)
    fig.tight_layout()
    if path is None:
        path = os.path.join(pipeline.cfg.out_dir, "mass_profile.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_decay(pipeline, path=None):
    """sup|u-1| and the gauge deviation against r with the 3 kappa slope."""
    u = pipeline.u_flow
    kappa = pipeline.cfg.kappa
    rf = u.schedule.r_finite
    sup = np.array([float(np.max(np.abs(u.u_at(k) - 1.0)))
                    for k in range(len(rf))])
    _, dev, _ = gauge_deviation(u, kappa)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    pos = sup > 0
    ax.semilogy(rf[pos], sup[pos], label="sup|u-1|", lw=1.6)
    posd = dev > 0
    ax.semilogy(rf[posd], dev[posd], label="sup|1-1/u|", lw=1.0)
    if np.any(pos):
        r0 = rf[pos][0]
        ref = sup[pos][0] * np.exp(-3.0 * kappa * (rf - r0))
        ax.semilogy(rf, ref, "k:", lw=0.8, label="exp(-3 kappa r) reference")
    ax.set_xlabel("r")
    ax.set_ylabel("deviation")
    ax.set_title("lapse decay toward the hyperbolic gauge")
    ax.legend(fontsize=8)
    fig.tight_layout()
    if path is None:
        path = os.path.join(pipeline.cfg.out_dir, "decay.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_curvature(pipeline, path=None):
    """Gaussian curvature heat map of the input surface."""
    rep = pipeline.admissibility
    grid = pipeline.spec.grid
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    im = ax.pcolormesh(grid.psi, grid.theta, rep.K, shading="nearest")
    fig.colorbar(im, ax=ax, label="K")
    ax.set_xlabel("psi")
    ax.set_ylabel("theta")
    ax.set_title(f"Gaussian curvature (min {rep.min_K:.4g}, "
                 f"kappa floor {rep.kappa_floor:.4g})")
    fig.tight_layout()
    if path is None:
        path = os.path.join(pipeline.cfg.out_dir, "curvature.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
