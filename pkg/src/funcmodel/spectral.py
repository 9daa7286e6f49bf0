"""Spectral consequences of the model: resolvents of the whole family in the
model space, smooth-vector classification, wave operators and singular-spectrum
diagnostics.

Everything here works for a general parameter kappa; the model space itself
(weight, projections) is fixed by the dissipative member once and for all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .charfn import (
    G0_samples,
    M_samples,
    chi_kappa,
    eval_charfn,
    kind_S,
    kind_numbered,
    kind_theta,
    kind_theta_kappa,
    resolvent_flow_samples,
)
from .errors import DomainError, SpectrumError, ValidationError
from .modelspace import (
    ModelVector,
    map_Phi_adjoint,
    SpectralWeight,
    cauchy_continuation,
    map_Phi,
    model_norm_sq,
    project_to_K,
)
from .operators import FamilyMember, apply_resolvent

SQRT2PI = np.sqrt(2.0 * np.pi)
PENCIL_COND_LIMIT = 1e12


def _solve_theta(member: FamilyMember, tag: str, z0: complex) -> np.ndarray:
    theta = eval_charfn(member, kind_theta_kappa(member.kappa.matrix, primed=(tag == "prime")), z0)
    if np.linalg.cond(theta) > PENCIL_COND_LIMIT:
        raise SpectrumError(f"Theta_kappa{'_prime' if tag == 'prime' else ''}({z0}) is not invertible: "
                            "z0 spectral or convention mismatch")
    return theta


def smooth_flow(member: FamilyMember, u: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """alpha (L^kappa - z)^{-1} u in E-coordinates, batched over complex z.

    Krein update filtered through alpha: (I + M(z) kappa / 2)^{-1} m Q^* (A-z)^{-1} u.
    """
    zs = np.asarray(zs, dtype=complex)
    M = M_samples(member.backend, member.alpha, zs.ravel())
    G0 = G0_samples(member.backend, member.alpha, u, zs.ravel())
    eye = np.eye(member.rank)
    core = eye[None] + 0.5 * M @ member.kappa.matrix
    xi = np.linalg.solve(core, G0[..., None])[..., 0]
    return xi.reshape(zs.shape + (member.rank,))


# ---------------------------------------------------------------------------
# resolvents of L^kappa in the model space


def model_resolvent(member: FamilyMember, weight: SpectralWeight, z0: complex, x: ModelVector) -> ModelVector:
    """Image of the resolvent (L^kappa - z0)^{-1} acting on the class of x in K.

    For Im z0 < 0:
        P_K (k - z0)^{-1} ( g_tilde, g - chi_kappa^+ [Theta'_kappa(z0)]^{-1} (g_tilde + S^* g)(z0) )
    and the mirrored formula with chi_kappa^- and Theta_kappa(z0) for Im z0 > 0.
    The off-axis value of g_tilde + S^* g (a Hardy-class function) is obtained
    by the Cauchy integral of its boundary samples.
    """
    z0 = complex(z0)
    if z0.imag == 0:
        raise DomainError("model resolvent needs Im z0 != 0")
    chi_plus, chi_minus = chi_kappa(member.kappa.matrix)
    wx = weight.apply_W(x)
    kern = 1.0 / (weight.grid.k - z0)[:, None]
    if z0.imag < 0:
        val = cauchy_continuation(weight.grid, wx.g_minus, z0, hardy_sign=-1)
        theta = _solve_theta(member, "prime", z0)
        corr = chi_plus @ np.linalg.solve(theta, val)
        out = ModelVector(x.g_minus * kern, (x.g_plus - corr[None, :]) * kern)
    else:
        val = cauchy_continuation(weight.grid, wx.g_plus, z0, hardy_sign=+1)
        theta = _solve_theta(member, "plain", z0)
        corr = chi_minus @ np.linalg.solve(theta, val)
        out = ModelVector((x.g_minus - corr[None, :]) * kern, x.g_plus * kern)
    return project_to_K(weight, out)


def fpm_identity_residual(member: FamilyMember, weight: SpectralWeight, z0: complex, u: np.ndarray):
    """Flat L^2 residuals of the two spectral-map resolvent equations, Im z0 < 0.

        F_+ (L^k - z0)^{-1} u = (k - z0)^{-1} [ (F_+ u)(k) - Theta'_k(k-i0) Theta'_k(z0)^{-1} (F_+ u)(z0) ]
        F_- (L^k - z0)^{-1} u = (k - z0)^{-1} [ (F_- u)(k) - Theta_k(k+i0)  Theta'_k(z0)^{-1} (F_+ u)(z0) ]

    The continuation (F_+ u)(z0) is evaluated in closed form as
    -(2 pi)^{-1/2} alpha (L^{||} - z0)^{-1} u, which is what the Cauchy
    integral of the boundary function converges to.
    """
    z0 = complex(z0)
    if z0.imag >= 0:
        raise DomainError("the resolvent equations are stated for Im z0 < 0")
    k = weight.grid.k
    dk = weight.grid.dk
    pref = -1.0 / SQRT2PI
    w = apply_resolvent(member, z0, u)
    lhs_plus = pref * resolvent_flow_samples(member, w, k, "+")
    lhs_minus = pref * resolvent_flow_samples(member, w, k, "-")
    f_plus = pref * resolvent_flow_samples(member, u, k, "+")
    f_minus = pref * resolvent_flow_samples(member, u, k, "-")
    f_plus_z0 = pref * smooth_flow(member.dissipative_part(), u, np.array([z0]))[0]
    theta_z0 = _solve_theta(member, "prime", z0)
    coef = np.linalg.solve(theta_z0, f_plus_z0)
    chi_plus, chi_minus = chi_kappa(member.kappa.matrix)
    s = weight.s
    s_h = np.conj(np.swapaxes(s, -1, -2))
    theta_prime_k = chi_minus[None] + s_h @ chi_plus  # Theta'_kappa(k - i0)
    theta_k = chi_plus[None] + s @ chi_minus  # Theta_kappa(k + i0)
    kern = 1.0 / (k - z0)[:, None]
    rhs_plus = (f_plus - theta_prime_k @ coef) * kern
    rhs_minus = (f_minus - theta_k @ coef) * kern
    res_plus = float(np.sqrt(np.sum(np.abs(lhs_plus - rhs_plus) ** 2) * dk))
    res_minus = float(np.sqrt(np.sum(np.abs(lhs_minus - rhs_minus) ** 2) * dk))
    return res_plus, res_minus


# ---------------------------------------------------------------------------
# smooth vectors


@dataclass(frozen=True)
class SmoothnessVerdict:
    """Three-way classification of a vector against the smooth sets N~_+-."""

    in_N_plus: bool | None  # None = undetermined
    in_N_minus: bool | None
    exponent_plus: float
    exponent_minus: float
    sup_integral_plus: float
    sup_integral_minus: float

    @property
    def smooth(self) -> bool:
        return bool(self.in_N_plus) and bool(self.in_N_minus)

    @property
    def determined(self) -> bool:
        return self.in_N_plus is not None and self.in_N_minus is not None


@dataclass(frozen=True)
class SmoothSettings:
    eps_max: float = 2.0
    eps_min: float = 2e-2
    n_eps: int = 24
    k_max: float = 60.0
    n_k: int = 1201
    flat_tol: float = 0.10  # relative change over the last rung => bounded
    growth_exponent: float = 0.5  # growth at least eps^{-1/2} => unbounded
    spike_ratio: float = 10.0


def _exact_line_integrals(member: FamilyMember, u: np.ndarray, side: int, eps: np.ndarray):
    """Closed-form I(eps) = int_R || alpha (L^kappa - (k + side*i*eps))^{-1} u ||^2 dk.

    Diagonalizing the dense matrix gives alpha R(z) u = sum_i A_i / (z -
    lam_i); each line integral is a sum of residue terms 2 pi i <A_i, A_j> /
    (p_i - conj(p_j)) over pole pairs straddling the line Im z = side*eps.
    Exact in k (no truncation, no quadrature), so narrow interior poles
    always register in the ladder.
    """
    lam, v = np.linalg.eig(member.dense_matrix())
    c = np.linalg.solve(v, np.asarray(u, dtype=complex))
    coeff = member.alpha.to_E(v) * c[None, :]  # column i: A_i in E-coordinates
    gram = coeff.conj().T @ coeff  # gram[i, j] = <A_j, A_i>
    out = np.empty(len(eps), dtype=float)
    for idx, e in enumerate(eps):
        p = lam - 1j * side * e  # pole positions relative to the real k-line
        diff = p[:, None] - np.conj(p)[None, :]
        up = p.imag > 0
        dn = p.imag < 0
        # int dk / ((k - p_i)(k - conj(p_j))) = +-2 pi i / (p_i - conj(p_j))
        # when p_i and p_j lie in the same half-plane, 0 when they straddle
        sign = np.where(up[:, None] & up[None, :], 1.0,
                        np.where(dn[:, None] & dn[None, :], -1.0, 0.0))
        kern = np.where(sign != 0, 2j * np.pi / np.where(diff == 0, 1.0, diff), 0.0)
        out[idx] = abs(float(np.real(np.sum(gram.T * kern * sign))))
    return out


def _ladder_integrals(member: FamilyMember, u: np.ndarray, side: int, settings: SmoothSettings):
    """I(eps) = int || alpha (L^kappa - (k + side*i*eps))^{-1} u ||^2 dk on a ladder."""
    eps_min = settings.eps_min
    if member.backend.is_friedrichs:
        x = member.backend.nodes
        spacing = float(np.max(np.diff(x)))
        eps_min = max(eps_min, 3.0 * spacing)  # below node resolution the
        # quadrature sees isolated poles instead of a continuum
    if not member.backend.is_friedrichs:
        # the closed-form integrals have no resolution limit, so the ladder
        # can descend far enough to see saturation below small pole heights
        eps_min = eps_min / 100.0
    eps = np.geomspace(settings.eps_max, eps_min, settings.n_eps)
    if not member.backend.is_friedrichs:
        # H^2_pm membership fails at a pole anywhere in the half-plane, not
        # only near the axis; aim extra rungs at the eigenvalue heights so the
        # ladder cannot straddle an interior blow-up.
        lam = np.linalg.eigvals(member.dense_matrix())
        heights = np.abs(lam.imag[side * lam.imag > eps_min])
        if heights.size:
            extra = np.concatenate([heights * f for f in (0.999, 1.001)])
            eps = np.sort(np.concatenate([eps, extra]))[::-1]
        return eps, _exact_line_integrals(member, u, side, eps)
    k = np.linspace(-settings.k_max, settings.k_max, settings.n_k)
    dk = k[1] - k[0]
    zs = k[None, :] + 1j * side * eps[:, None]
    xi = smooth_flow(member, u, zs)
    dens = np.sum(np.abs(xi) ** 2, axis=-1)
    integrals = np.sum(dens, axis=1) * dk
    return eps, integrals


def _classify(eps, integrals, settings: SmoothSettings):
    # growth exponent from the last few rungs: I(eps) ~ eps^{-p}
    tail = slice(max(len(eps) - 6, 0), None)
    le, li = np.log(eps[tail]), np.log(integrals[tail])
    p = -np.polyfit(le, li, 1)[0]
    flat = abs(integrals[-1] - integrals[-2]) <= settings.flat_tol * abs(integrals[-2])
    # an interior blow-up of I(eps) (relative to its typical level) marks a
    # pole strictly inside the half-plane: not an H^2 member either
    spiking = np.max(integrals) / max(np.median(integrals), 1e-300) >= settings.spike_ratio
    if flat and p < 0.25 and not spiking:
        member_flag = True
    elif p >= settings.growth_exponent or spiking:
        member_flag = False
    else:
        member_flag = None
    return member_flag, float(p), float(np.max(integrals))


def smooth_membership(member: FamilyMember, u: np.ndarray, settings: SmoothSettings | None = None) -> SmoothnessVerdict:
    """Decide membership of u in the smooth sets by the H^2 boundedness test.

    u is in N~_+ iff alpha (L^kappa - z)^{-1} u lies in H^2_+(E), which at
    finite resolution we read off the boundedness of the ladder integrals
    I(eps) = int || alpha (L - (k + i eps))^{-1} u ||^2 dk as eps -> 0 (and
    the mirrored integrals for N~_-).
    """
    u = np.asarray(u, dtype=complex)
    if np.linalg.norm(u) == 0:
        raise ValidationError("the zero vector is not classified")
    settings = settings or SmoothSettings()
    if np.linalg.norm(member.alpha.m) == 0:
        return SmoothnessVerdict(True, True, 0.0, 0.0, 0.0, 0.0)
    eps_p, ints_p = _ladder_integrals(member, u, +1, settings)
    eps_m, ints_m = _ladder_integrals(member, u, -1, settings)
    in_p, p_plus, sup_p = _classify(eps_p, ints_p, settings)
    in_m, p_minus, sup_m = _classify(eps_m, ints_m, settings)
    return SmoothnessVerdict(in_p, in_m, p_plus, p_minus, sup_p, sup_m)


def smooth_representative(member: FamilyMember, weight: SpectralWeight, u: np.ndarray) -> ModelVector:
    """Representative of Phi u for which the resolvent acts as multiplication.

    The class of Phi u is insensitive to adding a pair (psi_+, 0) with
    psi_+ in H^2_+ or (0, phi_-) with phi_- in H^2_-.  Choosing

        psi_+(k) = -chi^- [Theta_kappa(k+i0)]^{-1} (F_- u)(k+i0),
        phi_-(k) = -chi^+ [Theta'_kappa(k-i0)]^{-1} (F_+ u)(k-i0),

    turns the Model Theorem correction terms into divided differences of
    Hardy-class functions, which P_K annihilates: for a smooth vector the
    adjusted pair satisfies the multiplication identity in both half-planes.
    For a non-smooth u (e.g. an eigenvector with non-real eigenvalue) the
    flows above fail the Hardy-class requirement and the identity breaks.
    """
    from .dilation import interior_vector

    phi_u = map_Phi(member, weight, interior_vector(member, u))
    k = weight.grid.k
    chi_plus, chi_minus = chi_kappa(member.kappa.matrix)
    f_plus = -resolvent_flow_samples(member, u, k, "+") / SQRT2PI
    f_minus = -resolvent_flow_samples(member, u, k, "-") / SQRT2PI
    s = weight.s
    s_h = np.conj(np.swapaxes(s, -1, -2))
    theta_prime_k = chi_minus[None] + s_h @ chi_plus  # Theta'_kappa(k - i0)
    theta_k = chi_plus[None] + s @ chi_minus  # Theta_kappa(k + i0)
    phi_lower = -np.linalg.solve(theta_prime_k, f_plus[..., None])[..., 0] @ chi_plus.T
    psi_upper = -np.linalg.solve(theta_k, f_minus[..., None])[..., 0] @ chi_minus.T
    return ModelVector(phi_u.g_minus + psi_upper, phi_u.g_plus + phi_lower)


def new_representation_residual(member: FamilyMember, weight: SpectralWeight, u: np.ndarray, zs) -> float:
    """max_z || Phi (L^kappa - z)^{-1} u  -  P_K (. - z)^{-1} Phi u ||_H.

    The multiplication side uses the smooth representative of Phi u.  For
    smooth u the two sides agree in both half-planes; an eigenvector with
    non-real eigenvalue breaks the identity in one half-plane.

    Both sides of the identity live in the internal space K, so the distance
    is evaluated through the adjoint map: ||P_K x - Phi w||_H = ||Phi* x - w||,
    which avoids the Hardy projections of P_K entirely.
    """
    rep = smooth_representative(member, weight, u)
    worst = 0.0
    for z in np.atleast_1d(zs):
        z = complex(z)
        w = apply_resolvent(member, z, u)
        kern = 1.0 / (weight.grid.k - z)[:, None]
        mult = ModelVector(rep.g_minus * kern, rep.g_plus * kern)
        worst = max(worst, float(np.linalg.norm(map_Phi_adjoint(member, weight, mult) - w)))
    return float(worst)


# ---------------------------------------------------------------------------
# wave operators


@dataclass(frozen=True)
class ScatteringPair:
    """The pair (L^0 = A, L^kappa) sharing backend and perturbation."""

    reference: FamilyMember
    target: FamilyMember
    weight: SpectralWeight

    def __post_init__(self):
        if self.reference.backend is not self.target.backend or self.reference.alpha is not self.target.alpha:
            raise ValidationError("pair members must share backend and alpha")
        if not self.reference.kappa.is_zero:
            raise ValidationError("reference member must have kappa = 0")


def scattering_pair(target: FamilyMember, weight: SpectralWeight) -> ScatteringPair:
    from .operators import KappaParameter

    return ScatteringPair(target.with_kappa(KappaParameter.zero(target.rank)), target, weight)


def wave_operator_model(pair: ScatteringPair, x: ModelVector) -> ModelVector:
    """Stationary W_-(L^0, L^kappa) on the model vector x:
    (g_tilde, g) -> (-(I + S)^{-1} (I + S^*) g, g).

    The formula is representative-dependent: it reproduces the time limit
    when x is the canonical smooth representative of its class (see
    ``smooth_representative``), not for an arbitrary member of the class.
    """
    s = pair.weight.s
    eye = np.eye(pair.weight.rank)
    pencil = eye[None] + s
    conds = np.linalg.cond(pencil)
    bad = conds > PENCIL_COND_LIMIT
    if np.any(bad):
        raise SpectrumError(
            f"I + S nearly singular at {int(bad.sum())} grid points "
            f"(first at k = {pair.weight.grid.k[np.argmax(bad)]:.4g})")
    s_h = np.conj(np.swapaxes(s, -1, -2))
    rhs = (eye[None] + s_h) @ x.g_plus[..., None]
    top = -np.linalg.solve(pencil, rhs)[..., 0]
    return project_to_K(pair.weight, ModelVector(top, x.g_plus))


def _propagator_factory(member: FamilyMember):
    lam, v = np.linalg.eig(member.dense_matrix())
    v_inv = np.linalg.inv(v)

    def propagate(t: float, u: np.ndarray) -> np.ndarray:
        return v @ (np.exp(-1j * lam * t) * (v_inv @ u))

    return propagate


@dataclass
class TimeLimitReport:
    times: list
    approximants: list
    increments: list = field(default_factory=list)
    converged: bool = True

    def final(self) -> np.ndarray:
        return self.approximants[-1]


def wave_operator_time(pair: ScatteringPair, u: np.ndarray, t_ladder) -> TimeLimitReport:
    """Finite-time approximants e^{i L^0 t} e^{-i L^kappa t} u at t = -T,
    T running over the ladder (the minus wave operator is the limit T -> inf).

    The vector u is assumed smooth (the projection onto the absolutely
    continuous subspace is applied implicitly by only feeding smooth vectors).
    """
    u = np.asarray(u, dtype=complex)
    prop_ref = _propagator_factory(pair.reference)
    prop_tgt = _propagator_factory(pair.target)
    times = sorted(float(t) for t in t_ladder)
    if any(t <= 0 for t in times):
        raise ValidationError("ladder entries are positive horizon lengths T")
    approx = [prop_ref(t, prop_tgt(-t, u)) for t in times]
    inc = [float(np.linalg.norm(approx[i + 1] - approx[i])) for i in range(len(approx) - 1)]
    converged = all(b <= a * 1.001 for a, b in zip(inc, inc[1:])) if len(inc) >= 2 else True
    return TimeLimitReport(times=times, approximants=approx, increments=inc, converged=converged)


# ---------------------------------------------------------------------------
# singular spectrum diagnostics


@dataclass
class SingularReport:
    factorization_residual_upper: float
    factorization_residual_lower: float
    separability_margin: float
    det_theta: dict

    @property
    def separable(self) -> bool:
        return self.separability_margin > 0.0


def singular_report(member: FamilyMember, z_samples, lattice=None) -> SingularReport:
    """Diagnostics for the singular subspace machinery at kappa = iJ.

    (a) residuals of the factorization identities
            Theta(z) = Theta'_1^*(zbar) [Theta'_2^*(zbar)]^{-1},  z in C_+,
            Theta(z) = Theta_2^*(zbar) [Theta_1^*(zbar)]^{-1},    z in C_-;
    (b) the separability margin 1 - sup max(||chi^+ S chi^-||, ||chi^- S chi^+||)
        over a lattice in C_+;
    (c) det Theta(z) at the requested samples.
    """
    if not member.kappa.is_iJ:
        raise ValidationError("singular diagnostics require kappa = iJ")
    J = member.kappa.J
    chi_plus = (np.eye(member.rank) + J) / 2.0
    chi_minus = (np.eye(member.rank) - J) / 2.0
    res_up = res_lo = 0.0
    dets = {}
    for z in z_samples:
        z = complex(z)
        if z.imag == 0:
            raise ValidationError("factorization samples must be off the real axis")
        theta = eval_charfn(member, kind_theta(J), z)
        dets[z] = complex(np.linalg.det(theta))
        if z.imag > 0:
            t1 = eval_charfn(member, kind_numbered("Theta1Prime", J), np.conj(z)).conj().T
            t2 = eval_charfn(member, kind_numbered("Theta2Prime", J), np.conj(z)).conj().T
            res_up = max(res_up, float(np.linalg.norm(theta - t1 @ np.linalg.inv(t2))))
        else:
            t1 = eval_charfn(member, kind_numbered("Theta1", J), np.conj(z)).conj().T
            t2 = eval_charfn(member, kind_numbered("Theta2", J), np.conj(z)).conj().T
            res_lo = max(res_lo, float(np.linalg.norm(theta - t2 @ np.linalg.inv(t1))))
    if lattice is None:
        re = np.linspace(-10.0, 10.0, 21)
        im = np.geomspace(1e-2, 10.0, 12)
        lattice = (re[:, None] + 1j * im[None, :]).ravel()
    worst = 0.0
    for z in np.asarray(lattice, dtype=complex).ravel():
        s = eval_charfn(member, kind_S(), z)
        worst = max(worst,
                    float(np.linalg.norm(chi_plus @ s @ chi_minus, 2)),
                    float(np.linalg.norm(chi_minus @ s @ chi_plus, 2)))
    return SingularReport(
        factorization_residual_upper=res_up,
        factorization_residual_lower=res_lo,
        separability_margin=1.0 - worst,
        det_theta=dets,
    )
