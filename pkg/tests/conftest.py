"""Shared fixtures: frozen well-conditioned members used across the suite.

The matrix member (seed 355) is chosen so that all four eigenvalues of the
kappa = iJ member sit at least 0.38 away from the real axis, which the
boundary grid AxisGrid(40, 4096) resolves comfortably.  The Friedrichs
members use the rank-2 Gaussian-profile perturbation at weak coupling, for
which the smooth-vector machinery has nontrivial content.
"""

import numpy as np
import pytest

from funcmodel import (
    AxisGrid,
    KappaParameter,
    OperatorBackend,
    PerturbationFactor,
    SpectralWeight,
    build_family,
)

KAPPA_PRESETS = {
    "zero": lambda r: KappaParameter.zero(r),
    "iI": lambda r: KappaParameter.dissipative(r),
    "-iI": lambda r: KappaParameter.anti_dissipative(r),
    "iJ": lambda r: KappaParameter.from_involution(
        np.diag([1.0 if i % 2 == 0 else -1.0 for i in range(r)])),
}


def make_matrix4():
    rng = np.random.default_rng(355)
    a = rng.standard_normal((4, 4))
    a = (a + a.T) / 2 * 0.8
    b = rng.standard_normal((4, 2))
    backend = OperatorBackend.from_matrix(a)
    alpha = PerturbationFactor.from_columns(backend, b, np.diag([1.8, 1.3]))
    return backend, alpha


def make_matrix6():
    rng = np.random.default_rng(167)
    a = rng.standard_normal((6, 6))
    a = (a + a.T) / 2 * 0.8
    b = rng.standard_normal((6, 3))
    backend = OperatorBackend.from_matrix(a)
    alpha = PerturbationFactor.from_columns(backend, b, np.diag([2.0, 1.5, 1.1]))
    return backend, alpha


def make_friedrichs(n: int):
    backend = OperatorBackend.gauss_legendre(-4.0, 4.0, n)
    q1 = backend.embed(lambda x: np.exp(-x ** 2))
    q2 = backend.embed(lambda x: x * np.exp(-x ** 2 / 2))
    alpha = PerturbationFactor.from_columns(
        backend, np.stack([q1, q2], axis=1), np.diag([0.4, 0.25]))
    return backend, alpha


def make_scalar(a: float = 0.7, m0: float = 1.2):
    backend = OperatorBackend.from_matrix([[a]])
    alpha = PerturbationFactor(np.array([[1.0]]), np.array([[m0]]))
    return backend, alpha


def gaussian_vector(backend, center=0.5, width=1.0):
    u = backend.embed(lambda x: np.exp(-((x - center) / width) ** 2))
    return u / np.linalg.norm(u)


@pytest.fixture(scope="session")
def mat4():
    backend, alpha = make_matrix4()
    return {name: build_family(backend, alpha, make(2))
            for name, make in KAPPA_PRESETS.items()}


@pytest.fixture(scope="session")
def weight4(mat4):
    return SpectralWeight(mat4["iJ"], AxisGrid(40.0, 4096))


@pytest.fixture(scope="session")
def fr800():
    backend, alpha = make_friedrichs(800)
    return build_family(backend, alpha, KappaParameter.from_involution(np.diag([1.0, -1.0])))


@pytest.fixture(scope="session")
def weight800(fr800):
    return SpectralWeight(fr800, AxisGrid(40.0, 4096))


@pytest.fixture(scope="session")
def fr512():
    backend, alpha = make_friedrichs(512)
    return build_family(backend, alpha, KappaParameter.from_involution(np.diag([1.0, -1.0])))


@pytest.fixture(scope="session")
def weight512(fr512):
    return SpectralWeight(fr512, AxisGrid(40.0, 4096))
