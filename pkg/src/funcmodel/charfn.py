"""Characteristic-type operator functions of the family and their boundary values.

Every function handled here reduces to the Herglotz matrix
M(z) = alpha (A - z)^{-1} alpha through the Cayley-type identity

    alpha (L^kappa - z)^{-1} alpha = (I + M(z) kappa / 2)^{-1} M(z),

so boundary values on the real axis only ever require boundary values of M
(and, for the spectral maps downstream, of alpha (A - z)^{-1} u).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BoundaryConvergenceError, DomainError, SpectrumError, ValidationError
from .operators import COND_LIMIT, FamilyMember, KappaParameter, PerturbationFactor, OperatorBackend, apply_operator, apply_resolvent

UPPER_KINDS = {"S", "ThetaKappa", "Theta1", "Theta2"}
LOWER_KINDS = {"ThetaKappaPrime", "Theta1Prime", "Theta2Prime"}
ALL_TAGS = UPPER_KINDS | LOWER_KINDS | {"Theta"}


@dataclass(frozen=True)
class OperatorFunctionKind:
    """Which analytic function to evaluate, with its parameters."""

    tag: str
    kappa: Optional[np.ndarray] = None
    J: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.tag not in ALL_TAGS:
            raise ValidationError(f"unknown kind tag {self.tag!r}")
        if self.tag in {"Theta", "Theta1", "Theta2", "Theta1Prime", "Theta2Prime"} and self.J is None:
            raise ValidationError(f"kind {self.tag} requires the involution J")
        if self.tag in {"ThetaKappa", "ThetaKappaPrime"} and self.kappa is None:
            raise ValidationError(f"kind {self.tag} requires kappa")

    @property
    def lower_halfplane(self) -> bool:
        return self.tag in LOWER_KINDS


def kind_S() -> OperatorFunctionKind:
    return OperatorFunctionKind("S")


def kind_theta(J) -> OperatorFunctionKind:
    return OperatorFunctionKind("Theta", J=np.asarray(J, dtype=complex))


def kind_numbered(tag: str, J) -> OperatorFunctionKind:
    return OperatorFunctionKind(tag, J=np.asarray(J, dtype=complex))


def kind_theta_kappa(kappa, primed: bool = False) -> OperatorFunctionKind:
    tag = "ThetaKappaPrime" if primed else "ThetaKappa"
    return OperatorFunctionKind(tag, kappa=np.asarray(kappa, dtype=complex))


def kind_for_member(member: FamilyMember, tag: str) -> OperatorFunctionKind:
    return OperatorFunctionKind(tag, kappa=member.kappa.matrix, J=member.kappa.J)


@dataclass(frozen=True)
class BoundaryValueSettings:
    """Ladder of offsets for the non-tangential limit onto the real axis."""

    eps_ladder: tuple = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
    order: int = 2
    method: str = "ladder"

    def __post_init__(self):
        lad = tuple(float(e) for e in self.eps_ladder)
        if any(e <= 0 for e in lad):
            raise ValidationError("ladder entries must be positive")
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise ValidationError("ladder must be strictly decreasing")
        if self.method not in {"ladder", "plemelj"}:
            raise ValidationError("method must be 'ladder' or 'plemelj'")
        object.__setattr__(self, "eps_ladder", lad)


# ---------------------------------------------------------------------------
# pointwise evaluation


def chi_kappa(kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """chi_kappa^pm = (I +- i kappa) / 2."""
    eye = np.eye(kappa.shape[0])
    return 0.5 * (eye + 1j * kappa), 0.5 * (eye - 1j * kappa)


def _sig_projections(J: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    from .pg import SignatureProjections

    sig = SignatureProjections.from_involution(J)
    return sig.chi_plus, sig.chi_minus


def _S_from_M(M: np.ndarray) -> np.ndarray:
    eye = np.eye(M.shape[-1])
    return eye + 1j * np.linalg.solve(eye - 0.5j * M, M)


def _theta_from_M(M: np.ndarray, J: np.ndarray) -> np.ndarray:
    eye = np.eye(M.shape[-1])
    return eye + 1j * J @ np.linalg.solve(eye - 0.5j * M @ J, M)


def _assemble(kind: OperatorFunctionKind, S_val: Callable[[complex], np.ndarray], z: complex) -> np.ndarray:
    if kind.tag == "S":
        return S_val(z)
    if kind.tag in {"Theta1", "Theta2"}:
        cp, cm = _sig_projections(kind.J)
        return (cm + S_val(z) @ cp) if kind.tag == "Theta1" else (cp + S_val(z) @ cm)
    if kind.tag in {"Theta1Prime", "Theta2Prime"}:
        cp, cm = _sig_projections(kind.J)
        Sstar = S_val(np.conj(z)).conj().T
        return (cm + Sstar @ cp) if kind.tag == "Theta1Prime" else (cp + Sstar @ cm)
    if kind.tag == "ThetaKappa":
        ckp, ckm = chi_kappa(kind.kappa)
        return ckp + S_val(z) @ ckm
    if kind.tag == "ThetaKappaPrime":
        ckp, ckm = chi_kappa(kind.kappa)
        return ckm + S_val(np.conj(z)).conj().T @ ckp
    raise ValidationError(f"cannot assemble kind {kind.tag}")


def eval_charfn(member: FamilyMember, kind: OperatorFunctionKind, z: complex, strict: bool = True) -> np.ndarray:
    """Evaluate the requested r x r analytic function at the point z."""
    from .operators import herglotz_M

    z = complex(z)
    if strict:
        if kind.tag in UPPER_KINDS and z.imag <= 0:
            raise DomainError(f"{kind.tag} is analytic in the upper half-plane; got Im z = {z.imag}")
        if kind.tag in LOWER_KINDS and z.imag >= 0:
            raise DomainError(f"{kind.tag} is analytic in the lower half-plane; got Im z = {z.imag}")

    def S_val(w: complex) -> np.ndarray:
        return _S_from_M(herglotz_M(member.backend, member.alpha, w))

    if kind.tag == "Theta":
        M = herglotz_M(member.backend, member.alpha, z)
        eye = np.eye(member.rank)
        pencil = eye - 0.5j * M @ kind.J
        if np.linalg.cond(pencil) > COND_LIMIT:
            raise SpectrumError("z outside rho(L*): resolvent pencil singular")
        return _theta_from_M(M, kind.J)
    return _assemble(kind, S_val, z)


# ---------------------------------------------------------------------------
# vectorized samplers over many points


def _compression_basis(backend: OperatorBackend, alpha: PerturbationFactor) -> np.ndarray:
    """Columns of Q expressed in the eigenbasis of A."""
    if backend.is_friedrichs:
        return alpha.Q
    return backend._eigvecs.conj().T @ alpha.Q


def M_samples(backend: OperatorBackend, alpha: PerturbationFactor, zs: np.ndarray) -> np.ndarray:
    """Stacked M(z) for an array of complex points away from the spectrum of A."""
    zs = np.asarray(zs, dtype=complex)
    B = _compression_basis(backend, alpha)
    lam = backend.eigenvalues
    inv = 1.0 / (lam[None, :] - zs[:, None])
    core = np.einsum("li,kl,lj->kij", B.conj(), inv, B)
    return np.einsum("ab,kbc,cd->kad", alpha.m, core, alpha.m)


def G0_samples(backend: OperatorBackend, alpha: PerturbationFactor, u: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Stacked alpha (A - z)^{-1} u in E-coordinates."""
    zs = np.asarray(zs, dtype=complex)
    B = _compression_basis(backend, alpha)
    c = u if backend.is_friedrichs else backend._eigvecs.conj().T @ np.asarray(u, dtype=complex)
    lam = backend.eigenvalues
    inv = c[None, :] / (lam[None, :] - zs[:, None])
    return np.einsum("li,kl->ki", B.conj(), inv) @ alpha.m.T  # (m @ v) for each row


def _safe_real_points(backend: OperatorBackend, k: np.ndarray, pad: float = 1e-8) -> np.ndarray:
    """Nudge real sample points off eigenvalues of A (matrix backend)."""
    k = np.array(k, dtype=float)
    lam = backend.eigenvalues
    for j in range(len(k)):
        d = k[j] - lam
        i = np.argmin(np.abs(d))
        if abs(d[i]) < pad:
            k[j] = lam[i] + (pad if d[i] >= 0 else -pad)
    return k


def _friedrichs_pv(x, w, samples, interp_at_k, k):
    """PV integral of a nodal function with value interp_at_k at the singular point.

    samples: (n_nodes, ...) integrand values f(x_j); interp_at_k: (...) value f(k).
    Returns PV int f(x)/(x-k) dx over [x_lo, x_hi] (direct sum when k is outside).
    """
    x_lo, x_hi = x[0], x[-1]
    inside = (k > x_lo) and (k < x_hi)
    denom = x - k
    if not inside:
        return np.tensordot(w / denom, samples, axes=(0, 0))
    diff = samples - interp_at_k[None, ...]
    main = np.tensordot(w / denom, diff, axes=(0, 0))
    return main + interp_at_k * np.log((x_hi - k) / (k - x_lo))


def M_boundary_samples(backend: OperatorBackend, alpha: PerturbationFactor, k: np.ndarray, side: int) -> np.ndarray:
    """M(k + i0) (side=+1) or M(k - i0) (side=-1) on a real grid.

    Matrix backend: both limits coincide with the value at real k off the
    eigenvalues.  Friedrichs backend: the node sum is read as a quadrature of
    the continuum integral and evaluated by the Sokhotski-Plemelj formula.
    """
    k = np.asarray(k, dtype=float)
    if not backend.is_friedrichs:
        return M_samples(backend, alpha, _safe_real_points(backend, k).astype(complex))
    x, w = backend.nodes, backend.weights
    prof = alpha.Q / np.sqrt(w)[:, None]  # phi_l(x_j)
    dens_nodes = np.einsum("ja,jb->jab", prof, prof.conj())  # q q^H at nodes
    out = np.empty((len(k), alpha.rank, alpha.rank), dtype=complex)
    for i, kk in enumerate(k):
        inside = (kk > x[0]) and (kk < x[-1])
        if inside:
            qk = np.array([backend.interpolate(alpha.Q[:, l], kk) for l in range(alpha.rank)])
            dk = np.outer(qk, qk.conj())
        else:
            dk = np.zeros((alpha.rank, alpha.rank), dtype=complex)
        pv = _friedrichs_pv(x, w, dens_nodes, dk, kk)
        val = pv + (side * 1j * np.pi * dk if inside else 0.0)
        out[i] = alpha.m @ val @ alpha.m
    return out


def G0_boundary_samples(backend: OperatorBackend, alpha: PerturbationFactor, u: np.ndarray, k: np.ndarray, side: int) -> np.ndarray:
    """alpha (A - (k +- i0))^{-1} u in E-coordinates on a real grid."""
    k = np.asarray(k, dtype=float)
    if not backend.is_friedrichs:
        return G0_samples(backend, alpha, u, _safe_real_points(backend, k).astype(complex))
    x, w = backend.nodes, backend.weights
    prof = alpha.Q / np.sqrt(w)[:, None]
    uvals = backend.node_values(u)
    integrand = prof.conj() * uvals[:, None]  # phi_l^bar(x_j) u(x_j)
    out = np.empty((len(k), alpha.rank), dtype=complex)
    for i, kk in enumerate(k):
        inside = (kk > x[0]) and (kk < x[-1])
        if inside:
            qk = np.array([backend.interpolate(alpha.Q[:, l], kk) for l in range(alpha.rank)])
            at_k = qk.conj() * backend.interpolate(u, kk)
        else:
            at_k = np.zeros(alpha.rank, dtype=complex)
        pv = _friedrichs_pv(x, w, integrand, at_k, kk)
        val = pv + (side * 1j * np.pi * at_k if inside else 0.0)
        out[i] = alpha.m @ val
    return out


def S_boundary_samples(member: FamilyMember, k: np.ndarray) -> np.ndarray:
    """S(k + i0) stacked over a real grid (the model-space weight samples)."""
    M = M_boundary_samples(member.backend, member.alpha, k, side=+1)
    eye = np.eye(member.rank)
    return eye[None] + 1j * np.linalg.solve(eye[None] - 0.5j * M, M)


def resolvent_flow_samples(member: FamilyMember, u: np.ndarray, k: np.ndarray, which: str) -> np.ndarray:
    """Boundary values of the resolvent flow filtered through alpha.

    which='+': alpha (L^{||} - (k - i0))^{-1} u (enters the F_+ spectral map);
    which='-': alpha (L^{-||} - (k + i0))^{-1} u (enters the F_- spectral map).
    """
    side = -1 if which == "+" else +1
    M = M_boundary_samples(member.backend, member.alpha, k, side)
    G0 = G0_boundary_samples(member.backend, member.alpha, u, k, side)
    eye = np.eye(member.rank)
    sgn = 1j if which == "+" else -1j
    return np.linalg.solve(eye[None] + 0.5 * sgn * M, G0[..., None])[..., 0]


# ---------------------------------------------------------------------------
# boundary values with error estimate


def _neville_to_zero(eps: Sequence[float], vals: Sequence[np.ndarray]) -> np.ndarray:
    tbl = [np.asarray(v, dtype=complex) for v in vals]
    xs = list(eps)
    n = len(tbl)
    for lvl in range(1, n):
        for i in range(n - lvl):
            x0, x1 = xs[i], xs[i + lvl]
            tbl[i] = (x0 * tbl[i + 1] - x1 * tbl[i]) / (x0 - x1)
    return tbl[0]


def boundary_value(
    member: FamilyMember,
    kind: OperatorFunctionKind,
    k: float,
    settings: BoundaryValueSettings = BoundaryValueSettings(),
) -> tuple[np.ndarray, float]:
    """Non-tangential boundary value of the kind at real k, with an error estimate."""
    if settings.method == "plemelj":
        if not member.backend.is_friedrichs:
            raise ValidationError("plemelj mode requires the Friedrichs backend")
        karr = np.array([float(k)])
        if kind.tag == "Theta":
            M = M_boundary_samples(member.backend, member.alpha, karr, side=+1)[0]
            return _theta_from_M(M, kind.J), 0.0
        S_up = _S_from_M(M_boundary_samples(member.backend, member.alpha, karr, side=+1)[0])

        def S_val(w):
            return S_up if np.imag(w) >= 0 else None

        if kind.tag == "S":
            return S_up, 0.0
        if kind.tag in {"Theta1", "Theta2"}:
            cp, cm = _sig_projections(kind.J)
            return (cm + S_up @ cp, 0.0) if kind.tag == "Theta1" else (cp + S_up @ cm, 0.0)
        if kind.tag in {"Theta1Prime", "Theta2Prime"}:
            cp, cm = _sig_projections(kind.J)
            Sst = S_up.conj().T
            return (cm + Sst @ cp, 0.0) if kind.tag == "Theta1Prime" else (cp + Sst @ cm, 0.0)
        ckp, ckm = chi_kappa(kind.kappa)
        if kind.tag == "ThetaKappa":
            return ckp + S_up @ ckm, 0.0
        return ckm + S_up.conj().T @ ckp, 0.0

    sign = -1.0 if kind.lower_halfplane else 1.0
    lad = settings.eps_ladder
    vals = [eval_charfn(member, kind, complex(k, sign * e)) for e in lad]
    width = settings.order + 1
    if len(lad) < width:
        raise ValidationError("ladder shorter than extrapolation order + 1")
    extraps = []
    for stop in range(width, len(lad) + 1):
        extraps.append(_neville_to_zero(lad[stop - width : stop], vals[stop - width : stop]))
    incs = [np.linalg.norm(b - a) for a, b in zip(extraps, extraps[1:])]
    if len(incs) >= 2 and all(b > a * (1 + 1e-12) for a, b in zip(incs, incs[1:])):
        raise BoundaryConvergenceError(f"ladder increments growing at k={k}: possible singular point")
    err = incs[-1] if incs else float(np.linalg.norm(extraps[-1] - vals[-1]))
    return extraps[-1], float(err)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class ContractivityReport:
    tag: str
    n_points: int
    worst: float  # max operator norm (S-type) / min eigenvalue of J - Theta* J Theta
    flagged: bool


def contractivity_report(member: FamilyMember, kind: OperatorFunctionKind, sample) -> ContractivityReport:
    """Check contractivity (S-type kinds) or J-contractivity (Theta) over sample points."""
    sample = list(sample)
    if kind.tag == "Theta":
        worst = np.inf
        for z in sample:
            th = eval_charfn(member, kind, z)
            defect = kind.J - th.conj().T @ kind.J @ th
            worst = min(worst, float(np.min(np.linalg.eigvalsh(0.5 * (defect + defect.conj().T)))))
        return ContractivityReport(kind.tag, len(sample), worst, worst < -1e-10)
    worst = 0.0
    for z in sample:
        val = eval_charfn(member, kind, z)
        worst = max(worst, float(np.linalg.norm(val, 2)))
    return ContractivityReport(kind.tag, len(sample), worst, worst > 1 + 1e-10)


def strauss_relation_check(member: FamilyMember, z: complex, f: np.ndarray) -> float:
    """Residual of S(z) Gamma f = Gamma_* (L* - z)^{-1} (L - z) f with Gamma = Gamma_* = alpha.

    The member must be the dissipative one (kappa = iI); z must be a regular
    point of L* (the formula continues S meromorphically where needed).
    """
    if not member.kappa.is_iI:
        raise ValidationError("the Strauss relation is verified for the dissipative member (kappa = iI)")
    from .operators import compressed_resolvent

    f = np.asarray(f, dtype=complex)
    adj = member.adjoint()
    S_z = np.eye(member.rank) + 1j * compressed_resolvent(adj, z)
    lhs = S_z @ member.alpha.to_E(f)
    lf = apply_operator(member, f) - z * f
    rhs = member.alpha.to_E(apply_resolvent(adj, z, lf))
    return float(np.linalg.norm(lhs - rhs))
