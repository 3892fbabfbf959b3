"""
Root conftest.py — shared pytest fixtures for the whole project.

Small rings and tables used across the service suites live here, together with
the bundled instance documents, so every test module can use them without
importing anything extra.
"""

import random

import pytest


@pytest.fixture
def rng():
    """A seeded random source; the seed comes from DEFORMATION_SEED."""
    from django.conf import settings

    return random.Random(settings.DEFORMATION_SEED)


@pytest.fixture
def ring_k1():
    """R_1 = Q[q]/(q²)."""
    from core.services.scalars_service import ArtinRing

    return ArtinRing(s=1, k=1)


@pytest.fixture
def ring_k2():
    """R_2 = Q[q]/(q³)."""
    from core.services.scalars_service import ArtinRing

    return ArtinRing(s=1, k=2)


@pytest.fixture
def ring_k3():
    """R_3 = Q[q]/(q⁴)."""
    from core.services.scalars_service import ArtinRing

    return ArtinRing(s=1, k=3)


@pytest.fixture
def euler_k2(ring_k2):
    """The Euler model {1, x, xi, x*xi} over R_2 with λ = 1 and the relative module."""
    from core.services.polynomial_service import euler_model, with_relative_module

    return with_relative_module(euler_model(ring_k2))


@pytest.fixture
def eta_k2(ring_k2):
    """The Euler model with one η and ∂̄ = η x∂_x over R_2."""
    from core.services.polynomial_service import eta_model

    return eta_model(ring_k2)


@pytest.fixture
def q_series():
    """Build the monomial c·q_1^e over a ring."""
    from core.services.scalars_service import ArtinSeries

    def _make(ring, e=1, c=1):
        mono = tuple(e if j == 0 else 0 for j in range(ring.nvars))
        return ArtinSeries.monomial(ring, mono, c)

    return _make


def _fixture_path(name):
    from django.conf import settings

    return settings.FIXTURE_DIR / f"{name}.json"


@pytest.fixture
def fixture_path():
    """Path of a bundled instance document by name."""
    return _fixture_path


@pytest.fixture
def trivial_document():
    import json

    return json.loads(_fixture_path("trivial").read_text(encoding="utf-8"))


@pytest.fixture
def twisted_document():
    import json

    return json.loads(_fixture_path("twisted").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def trivial_instance():
    """The bundled trivial instance: identity patchings on two charts, eta global model, k = 2."""
    from core.services.instance_service import load_instance

    return load_instance(_fixture_path("trivial"))


@pytest.fixture(scope="session")
def rank_drop_instance():
    from core.services.instance_service import load_instance

    return load_instance(_fixture_path("rank_drop"))


@pytest.fixture(scope="session")
def twisted_instance():
    """The bundled twisted instance at k = 3; shared because its solves are slow."""
    from core.services.instance_service import load_instance

    return load_instance(_fixture_path("twisted"))
