"""Self-adjoint dilation of the dissipative member: channels, resolvent,
compression."""

import numpy as np
import pytest

from funcmodel import (
    ChannelFunction,
    DilationVector,
    DomainError,
    KappaParameter,
    ValidationError,
    apply_resolvent,
    build_family,
    dilation_apply,
    dilation_compress_check,
    dilation_inner,
    dilation_norm,
    dilation_resolvent,
    interior_vector,
)
from funcmodel.dilation import ChannelTerm
from conftest import make_matrix4, make_scalar


@pytest.fixture(scope="module")
def diss4(mat4):
    return mat4["iI"]


def channel(side, dim, rng):
    coef = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    rate = -side * (0.5 + rng.uniform(0, 1.0)) + 0.3j
    return ChannelFunction(side, dim, [ChannelTerm(coef, rate, 0),
                                       ChannelTerm(0.5 * coef[::-1], 2 * rate.real + 0.1j, 1)])


def test_channel_inner_against_quadrature():
    rng = np.random.default_rng(2)
    f = channel(+1, 2, rng)
    g = channel(+1, 2, rng)
    x = np.linspace(0, 80, 800001)
    fv, gv = f.evaluate(x), g.evaluate(x)
    quad = np.trapezoid(np.sum(fv * gv.conj(), axis=1), x)
    assert abs(f.inner(g) - quad) < 1e-7 * max(1.0, abs(quad))


def test_channel_fourier_is_half_line_transform():
    rng = np.random.default_rng(4)
    f = channel(-1, 2, rng)
    k = np.array([-0.7, 0.2, 1.9])
    x = np.linspace(-80, 0, 400001)
    fv = f.evaluate(x)
    for i, kk in enumerate(k):
        quad = np.trapezoid(fv * np.exp(1j * kk * x)[:, None], x, axis=0) / np.sqrt(2 * np.pi)
        assert np.linalg.norm(f.fourier(np.array([kk]))[0] - quad) < 1e-8


def test_channel_decay_direction_enforced():
    with pytest.raises(ValidationError):
        ChannelFunction(+1, 1, [ChannelTerm(np.array([1.0]), +0.5, 0)])


def test_dilation_resolvent_inverts(diss4):
    rng = np.random.default_rng(6)
    f = DilationVector(channel(-1, 2, rng),
                       rng.standard_normal(4) + 1j * rng.standard_normal(4),
                       channel(+1, 2, rng))
    z = 0.4 - 1.1j
    h = dilation_resolvent(diss4, z, f)
    lh = dilation_apply(diss4, h)
    resid = lh + h.scale(-z) + f.scale(-1.0)
    # the exact pairing of a near-cancelling term sum loses ~8 digits
    assert dilation_norm(resid) < 1e-6 * dilation_norm(f)


def test_dilation_symmetry(diss4):
    rng = np.random.default_rng(7)
    f = interior_vector(diss4, rng.standard_normal(4) + 1j * rng.standard_normal(4))
    e = interior_vector(diss4, rng.standard_normal(4) + 1j * rng.standard_normal(4))
    h = dilation_resolvent(diss4, -0.3 - 0.9j, f)
    g = dilation_resolvent(diss4, 1.1 + 0.8j, e)
    lhs = dilation_inner(dilation_apply(diss4, h), g)
    rhs = dilation_inner(h, dilation_apply(diss4, g))
    assert abs(lhs - rhs) < 1e-10


def test_compression_identity(diss4):
    rng = np.random.default_rng(8)
    for _ in range(5):
        z = complex(rng.uniform(-2, 2), -rng.uniform(0.4, 1.5))
        u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert dilation_compress_check(diss4, z, u) < 1e-10


def test_compression_scalar_hand_formula():
    a, m0 = 0.7, 1.2
    backend, alpha = make_scalar(a, m0)
    member = build_family(backend, alpha, KappaParameter.dissipative(1))
    z = -1j
    u = np.array([1.0 + 0.0j])
    # P_K (D - z)^{-1} interior(u) = (L - z)^{-1} u = u / (a + i m0^2/2 - z)
    h = dilation_resolvent(member, z, interior_vector(member, u))
    want = 1.0 / (a + 0.5j * m0 ** 2 - z)
    assert abs(h.u[0] - want) < 1e-12


def test_dilation_apply_requires_dissipative(mat4):
    h = interior_vector(mat4["iJ"], np.ones(4))
    with pytest.raises((ValidationError, DomainError)):
        dilation_apply(mat4["iJ"], h)
