"""Shared fixtures: expensive solves are session-scoped and reused."""

import numpy as np
import pytest

from hypermass.embedding import embed_axisymmetric, embed_geodesic_sphere
from hypermass.foliation import FoliationSchedule, frame_at
from hypermass.flows import solve_u, solve_W_vector
from hypermass.surface import SurfaceSpec


@pytest.fixture(scope="session")
def sphere_es():
    """Unit geodesic sphere at kappa = 1, 24x24 grid (closed form)."""
    return embed_geodesic_sphere(1.0, 1.0, 24, 24)


@pytest.fixture(scope="session")
def spheroid_spec():
    return SurfaceSpec.from_preset("spheroid", {"a": 1.0, "c": 0.8}, 32, 32)


@pytest.fixture(scope="session")
def spheroid_es(spheroid_spec):
    return embed_axisymmetric(spheroid_spec, 1.0)


@pytest.fixture(scope="session")
def sphere_case(sphere_es):
    """Solved sphere pipeline: R=1, kappa=1, calH = 2 (flat-sphere value)."""
    sched = FoliationSchedule.uniform_r(1.0, steps=150)
    u = solve_u(sphere_es, 1.0, np.full(sphere_es.grid.shape, 2.0), sched)
    w = solve_W_vector(sphere_es, 1.0, u)
    return sphere_es, u, w


@pytest.fixture(scope="session")
def spheroid_case(spheroid_es):
    """Solved spheroid pipeline with calH = 0.9 H0(., 0)."""
    sched = FoliationSchedule.uniform_r(1.0, steps=150)
    calH = 0.9 * frame_at(spheroid_es, 1.0, 0.0).H0
    u = solve_u(spheroid_es, 1.0, calH, sched)
    w = solve_W_vector(spheroid_es, 1.0, u)
    return spheroid_es, u, w
