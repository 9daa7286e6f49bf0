"""Potapov-Ginzburg linear-fractional transform between J-contractive and contractive functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularPencilError, ValidationError

PENCIL_COND_LIMIT = 1e12


@dataclass(frozen=True)
class SignatureProjections:
    """chi_pm = (I +- J)/2, built spectrally so they are exactly idempotent."""

    J: np.ndarray
    chi_plus: np.ndarray
    chi_minus: np.ndarray

    @classmethod
    def from_involution(cls, J) -> "SignatureProjections":
        J = np.asarray(J, dtype=complex)
        r = J.shape[0]
        if J.shape != (r, r):
            raise ValidationError("J must be square")
        if np.linalg.norm(J - J.conj().T) > 1e-12 * r:
            raise ValidationError("J must be Hermitian to 1e-12")
        if np.linalg.norm(J @ J - np.eye(r)) > 1e-12 * r:
            raise ValidationError("J must be an involution to 1e-12")
        vals, vecs = np.linalg.eigh(J)
        pos = vecs[:, vals > 0]
        neg = vecs[:, vals < 0]
        chi_p = pos @ pos.conj().T
        chi_m = neg @ neg.conj().T
        return cls(J, chi_p, chi_m)


def _solve_pencil(pencil: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if np.linalg.cond(pencil) > PENCIL_COND_LIMIT:
        raise SingularPencilError("PG transform undefined at this point")
    return np.linalg.solve(pencil, rhs)


def pg_forward(theta_value: np.ndarray, sig: SignatureProjections) -> np.ndarray:
    """S = -(chi^+ - Theta chi^-)^{-1} (chi^- - Theta chi^+)."""
    theta = np.asarray(theta_value, dtype=complex)
    pencil = sig.chi_plus - theta @ sig.chi_minus
    return -_solve_pencil(pencil, sig.chi_minus - theta @ sig.chi_plus)


def pg_inverse(s_value: np.ndarray, sig: SignatureProjections) -> np.ndarray:
    """Theta = (chi^- + chi^+ S)(chi^+ + chi^- S)^{-1}."""
    s = np.asarray(s_value, dtype=complex)
    pencil = sig.chi_plus + sig.chi_minus @ s
    if np.linalg.cond(pencil) > PENCIL_COND_LIMIT:
        raise SingularPencilError("PG transform undefined at this point")
    return (sig.chi_minus + sig.chi_plus @ s) @ np.linalg.inv(pencil)
