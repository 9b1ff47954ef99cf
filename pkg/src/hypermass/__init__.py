"""Quasi-local energy-momentum of closed 2-surfaces via isometric
embedding into the hyperboloid model of hyperbolic space."""

from .minkowski import (CausalClass, causal_class, causal_witness_check,
                        four_vector, lorentz_dot, polar_param)
from .spinors import killing_spinor, killing_norm_sq, zeta
from .surface import (AdmissibilityError, SurfaceSpec, check_admissibility,
                      effective_H, gaussian_curvature)
from .embedding import (EmbeddedSurface, EmbeddingError, EmbeddingOptions,
                        align_embeddings, embed_axisymmetric, embed_general,
                        embed_geodesic_sphere, gauss_map,
                        second_fundamental_form)
from .foliation import (FoliationFrame, FoliationSchedule, frame_at,
                        laplacian, limit_metric, riccati_oracle)
from .flows import (FlowError, FlowField, barrier_ode, gauge_deviation,
                    identity_u_flow, solve_W_scalar, solve_W_vector, solve_u)
from .mass import (MassReport, energy_momentum, gauss_evolution_check,
                   identity_check, limit_check, mass_profile,
                   monotonicity_check)
from .pipeline import Pipeline, RunConfig

__version__ = "0.1.0"

__all__ = [
    "CausalClass", "causal_class", "causal_witness_check", "four_vector",
    "lorentz_dot", "polar_param", "killing_spinor", "killing_norm_sq",
    "zeta", "AdmissibilityError", "SurfaceSpec", "check_admissibility",
    "effective_H", "gaussian_curvature", "EmbeddedSurface", "EmbeddingError",
    "EmbeddingOptions", "align_embeddings", "embed_axisymmetric",
    "embed_general", "embed_geodesic_sphere", "gauss_map",
    "second_fundamental_form", "FoliationFrame", "FoliationSchedule",
    "frame_at", "laplacian", "limit_metric", "riccati_oracle", "FlowError",
    "FlowField", "barrier_ode", "gauge_deviation", "identity_u_flow",
    "solve_W_scalar", "solve_W_vector", "solve_u", "MassReport",
    "energy_momentum", "gauss_evolution_check", "identity_check",
    "limit_check", "mass_profile", "monotonicity_check", "Pipeline",
    "RunConfig",
]
