"""Potapov-Ginzburg transform between J-contractive and contractive values."""

import numpy as np
import pytest

from funcmodel import (
    SignatureProjections,
    SingularPencilError,
    eval_charfn,
    kind_S,
    kind_theta,
    pg_forward,
    pg_inverse,
)
from conftest import make_matrix6
from funcmodel import KappaParameter, build_family


def random_contraction(rng, r, norm=0.8):
    s = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    return s * (norm / np.linalg.norm(s, 2))


def test_roundtrip_both_directions():
    J = np.diag([1.0, -1.0, 1.0])
    sig = SignatureProjections.from_involution(J)
    rng = np.random.default_rng(8)
    for _ in range(50):
        s = random_contraction(rng, 3)
        theta = pg_inverse(s, sig)
        assert np.linalg.norm(pg_forward(theta, sig) - s) < 1e-12
        assert np.linalg.norm(pg_inverse(pg_forward(theta, sig), sig) - theta) < 1e-10


def test_inverse_maps_contractions_to_J_contractions():
    J = np.diag([1.0, -1.0])
    sig = SignatureProjections.from_involution(J)
    rng = np.random.default_rng(9)
    for _ in range(20):
        s = random_contraction(rng, 2, norm=0.9)
        theta = pg_inverse(s, sig)
        defect = J - theta.conj().T @ J @ theta
        assert np.min(np.linalg.eigvalsh((defect + defect.conj().T) / 2)) > -1e-10


def test_proposition_theta_maps_to_S():
    """PG transform of the J-characteristic function is the S function."""
    backend, alpha = make_matrix6()
    J = np.diag([1.0, -1.0, 1.0])
    member = build_family(backend, alpha, KappaParameter.from_involution(J))
    sig = SignatureProjections.from_involution(J)
    diss = member.dissipative_part()
    rng = np.random.default_rng(10)
    for _ in range(20):
        z = complex(rng.uniform(-3, 3), rng.uniform(0.4, 2.0))
        theta = eval_charfn(member, kind_theta(J), z)
        s_ref = eval_charfn(diss, kind_S(), z)
        assert np.linalg.norm(pg_forward(theta, sig) - s_ref) < 1e-10


def test_singular_pencil_raises():
    J = np.diag([1.0, -1.0])
    sig = SignatureProjections.from_involution(J)
    # pencil chi^+ + chi^- s = [[1, 0], [s21, s22]] is singular when s22 = 0
    s = np.zeros((2, 2))
    with pytest.raises(SingularPencilError):
        pg_inverse(s, sig)


def test_signature_projections_idempotent():
    J = np.diag([1.0, 1.0, -1.0])
    sig = SignatureProjections.from_involution(J)
    assert np.allclose(sig.chi_plus @ sig.chi_plus, sig.chi_plus, atol=1e-14)
    assert np.allclose(sig.chi_minus @ sig.chi_minus, sig.chi_minus, atol=1e-14)
    assert np.allclose(sig.chi_plus + sig.chi_minus, np.eye(3), atol=1e-14)
    assert np.allclose(sig.chi_plus - sig.chi_minus, J, atol=1e-14)
