"""Resolvent action in the model, smooth-vector classification, wave
operators, and singular-spectrum diagnostics."""

import numpy as np
import pytest

from funcmodel import (
    DomainError,
    KappaParameter,
    ModelVector,
    SmoothSettings,
    ValidationError,
    apply_resolvent,
    build_family,
    fpm_identity_residual,
    interior_vector,
    map_Phi,
    map_Phi_adjoint,
    model_norm_sq,
    model_resolvent,
    new_representation_residual,
    scattering_pair,
    singular_report,
    smooth_membership,
    smooth_representative,
    wave_operator_model,
    wave_operator_time,
)
from funcmodel.spectral import _exact_line_integrals, _ladder_integrals
from conftest import gaussian_vector


def _rel_model_gap(weight, a, b):
    diff = ModelVector(a.g_minus - b.g_minus, a.g_plus - b.g_plus)
    return np.sqrt(abs(model_norm_sq(weight, diff)) / abs(model_norm_sq(weight, b)))


def test_fpm_identity(mat4, weight4):
    member = mat4["iJ"]
    rng = np.random.default_rng(21)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    for z0 in (0.3 - 0.8j, -1.2 - 1.5j):
        res = fpm_identity_residual(member, weight4, z0, u)
        assert max(res) < 1e-6
    with pytest.raises(DomainError):
        fpm_identity_residual(member, weight4, 0.3 + 0.8j, u)


def test_model_resolvent_matches_direct(mat4, weight4):
    member = mat4["iJ"]
    rng = np.random.default_rng(23)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    phi_u = map_Phi(member, weight4, interior_vector(member, u))
    for z0 in (0.4 - 1.1j, -0.9 + 1.3j):
        got = model_resolvent(member, weight4, z0, phi_u)
        want = map_Phi(member, weight4,
                       interior_vector(member, apply_resolvent(member, z0, u)))
        assert _rel_model_gap(weight4, got, want) < 1e-2


def test_ladder_matches_quadrature(mat4):
    # the closed-form line integrals against a brute-force k-quadrature
    member = mat4["iJ"]
    rng = np.random.default_rng(29)
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    from scipy.integrate import quad

    eps = np.array([0.5, 1.0])
    exact = _exact_line_integrals(member, u, +1, eps)
    for e, val in zip(eps, exact):
        def integrand(k):
            flow = member.alpha.to_E(apply_resolvent(member, k + 1j * e, u))
            return float(np.sum(np.abs(flow) ** 2))

        inner, _ = quad(integrand, -np.inf, np.inf, limit=400)
        assert abs(inner - val) / val < 1e-8


def test_eigenvector_classification(mat4):
    member = mat4["iJ"]
    lam, vecs = np.linalg.eig(member.dense_matrix())
    for i in range(4):
        verdict = smooth_membership(member, vecs[:, i])
        expected = (False, True) if lam[i].imag > 0 else (True, False)
        assert (verdict.in_N_plus, verdict.in_N_minus) == expected


def test_selfadjoint_member_eigenvector_not_smooth(mat4):
    # kappa = 0: real eigenvalue embedded in the continuous axis integral,
    # I(eps) ~ 1/eps on both sides
    member = mat4["zero"]
    lam, vecs = np.linalg.eigh(member.dense_matrix().real)
    verdict = smooth_membership(member, vecs[:, 0])
    assert (verdict.in_N_plus, verdict.in_N_minus) == (False, False)


def test_unperturbed_everything_smooth(mat4):
    member = mat4["iJ"]
    scaled = build_family(member.backend,
                          type(member.alpha)(member.alpha.Q, 0.0 * member.alpha.m),
                          member.kappa)
    verdict = smooth_membership(scaled, np.ones(4))
    assert (verdict.in_N_plus, verdict.in_N_minus) == (True, True)


def test_friedrichs_gaussian_is_smooth(fr800):
    u = gaussian_vector(fr800.backend)
    verdict = smooth_membership(fr800, u)
    assert (verdict.in_N_plus, verdict.in_N_minus) == (True, True)


def test_new_representation_smooth_vs_eigenvector(fr800, weight800, mat4, weight4):
    zs = [0.6 - 0.9j, -0.4 + 1.1j]
    u = gaussian_vector(fr800.backend)
    assert new_representation_residual(fr800, weight800, u, zs) < 1e-2
    member = mat4["iJ"]
    lam, vecs = np.linalg.eig(member.dense_matrix())
    v = vecs[:, np.argmax(np.abs(lam.imag))]
    assert new_representation_residual(member, weight4, v, zs) > 1e-1


def test_smooth_representative_same_class(fr800, weight800):
    # the representative differs from Phi u by Hardy pairs that P_K kills,
    # so Phi* sends both to the same internal vector (namely u itself)
    u = gaussian_vector(fr800.backend)
    rep = smooth_representative(fr800, weight800, u)
    back = map_Phi_adjoint(fr800, weight800, rep)
    assert np.linalg.norm(back - u) / np.linalg.norm(u) < 1e-2


def test_wave_operator_time_vs_model(fr512, weight512):
    u = gaussian_vector(fr512.backend)
    pair = scattering_pair(fr512, weight512)
    report = wave_operator_time(pair, u, [50.0, 100.0, 200.0])
    assert report.converged
    assert report.increments[-1] < 1e-6
    rep = smooth_representative(fr512, weight512, u)
    w_model = wave_operator_model(pair, rep)
    u_model = map_Phi_adjoint(fr512, weight512, w_model)
    final = report.final()
    assert np.linalg.norm(final - u_model) / np.linalg.norm(final) < 5e-2


def test_wave_operator_intertwines(fr512, weight512):
    u = gaussian_vector(fr512.backend)
    pair = scattering_pair(fr512, weight512)
    z = 0.35 + 0.9j
    ru = apply_resolvent(fr512, z, u)
    left = wave_operator_model(pair, smooth_representative(fr512, weight512, ru))
    w_model = wave_operator_model(pair, smooth_representative(fr512, weight512, u))
    right = model_resolvent(pair.reference, weight512, z, w_model)
    l_k = map_Phi_adjoint(fr512, weight512, left)
    r_k = map_Phi_adjoint(fr512, weight512, right)
    assert np.linalg.norm(l_k - r_k) / np.linalg.norm(r_k) < 1e-2


def test_unperturbed_wave_is_identity(mat4, weight4):
    member = mat4["zero"]
    pair = scattering_pair(member, weight4)
    u = np.array([1.0, -0.5j, 0.25, 0.0])
    report = wave_operator_time(pair, u, [1.0, 2.0])
    assert np.linalg.norm(report.final() - u) < 1e-12


def test_time_ladder_validation(mat4, weight4):
    pair = scattering_pair(mat4["iJ"], weight4)
    with pytest.raises(ValidationError):
        wave_operator_time(pair, np.ones(4), [-1.0, 2.0])


def test_singular_report(mat4):
    member = mat4["iJ"]
    zs = [0.5 + 0.8j, -1.0 + 1.2j, 0.5 - 0.8j, -1.0 - 1.2j]
    rep = singular_report(member, zs)
    assert rep.factorization_residual_upper < 1e-8
    assert rep.factorization_residual_lower < 1e-8
    assert rep.separable and rep.separability_margin > 0.05
    assert set(rep.det_theta) == {complex(z) for z in zs}
    with pytest.raises(ValidationError):
        singular_report(mat4["iI"], zs)
    with pytest.raises(ValidationError):
        singular_report(member, [1.0])
