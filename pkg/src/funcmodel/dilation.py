"""Pavlov's self-adjoint dilation of the dissipative member L^{||}.

The dilation acts on triples (v_-, u, v_+) with v_pm living on the half-lines
R_-+ as E-valued functions.  Channel functions are kept in closed form as
finite sums of terms  c * x^p * exp(rate * x)  with the decay sign enforced per
half-line, so derivatives, values at 0, Fourier transforms and L^2 pairings
are all exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SpectrumError, ValidationError
from .operators import FamilyMember, apply_resolvent

BOUNDARY_GAP_TOL = 1e-8


@dataclass(frozen=True)
class ChannelTerm:
    coef: np.ndarray  # E-coordinate vector, shape (r,)
    rate: complex
    power: int = 0


class ChannelFunction:
    """Finite sum of decaying exponential-polynomial terms on one half-line."""

    def __init__(self, side: int, dim: int, terms=()):
        if side not in (-1, +1):
            raise ValidationError("side must be -1 (x <= 0) or +1 (x >= 0)")
        self.side = side
        self.dim = dim
        clean = []
        for t in terms:
            coef = np.asarray(t.coef, dtype=complex).reshape(dim)
            rate = complex(t.rate)
            if t.power < 0:
                raise ValidationError("power must be non-negative")
            if side * rate.real >= 0:
                raise ValidationError("term does not decay on its half-line")
            clean.append(ChannelTerm(coef, rate, int(t.power)))
        self.terms = tuple(clean)

    @classmethod
    def zero(cls, side: int, dim: int) -> "ChannelFunction":
        return cls(side, dim)

    def is_zero(self) -> bool:
        return all(np.allclose(t.coef, 0) for t in self.terms)

    def __add__(self, other: "ChannelFunction") -> "ChannelFunction":
        if other.side != self.side or other.dim != self.dim:
            raise ValidationError("channel mismatch")
        return ChannelFunction(self.side, self.dim, self.terms + other.terms)

    def scale(self, c: complex) -> "ChannelFunction":
        return ChannelFunction(self.side, self.dim, [ChannelTerm(c * t.coef, t.rate, t.power) for t in self.terms])

    def value0(self) -> np.ndarray:
        out = np.zeros(self.dim, dtype=complex)
        for t in self.terms:
            if t.power == 0:
                out += t.coef
        return out

    def derivative(self) -> "ChannelFunction":
        terms = []
        for t in self.terms:
            terms.append(ChannelTerm(t.rate * t.coef, t.rate, t.power))
            if t.power > 0:
                terms.append(ChannelTerm(t.power * t.coef, t.rate, t.power - 1))
        return ChannelFunction(self.side, self.dim, terms)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim,), dtype=complex)
        for t in self.terms:
            out += (x[..., None] ** t.power) * np.exp(t.rate * x)[..., None] * t.coef
        return out

    def inner(self, other: "ChannelFunction") -> complex:
        """L^2(half-line, E) pairing, exact on the representation."""
        if other.side != self.side or other.dim != self.dim:
            raise ValidationError("channel mismatch")
        total = 0.0 + 0.0j
        for a in self.terms:
            for b in other.terms:
                q = a.power + b.power
                mu = a.rate + np.conj(b.rate)
                # int_0^inf x^q e^{mu x} dx = q!/(-mu)^{q+1}; mirrored on x <= 0
                if self.side == +1:
                    integral = math.factorial(q) / (-mu) ** (q + 1)
                else:
                    integral = (-1) ** q * math.factorial(q) / mu ** (q + 1)
                total += integral * np.dot(a.coef, b.coef.conj())
        return total

    def norm_sq(self) -> float:
        return float(np.real(self.inner(self)))

    def fourier(self, k: np.ndarray) -> np.ndarray:
        """v_hat(k) = (2 pi)^{-1/2} int v(x) e^{ikx} dx over the half-line.

        With this kernel, functions on x >= 0 transform into the Hardy class
        H^2_+ and functions on x <= 0 into H^2_-.
        """
        k = np.asarray(k)
        out = np.zeros(k.shape + (self.dim,), dtype=complex)
        for t in self.terms:
            s = t.rate + 1j * k
            if self.side == +1:
                piece = (-1.0) ** (t.power + 1) * math.factorial(t.power) / s ** (t.power + 1)
            else:
                piece = (-1.0) ** t.power * math.factorial(t.power) / s ** (t.power + 1)
            out += piece[..., None] * t.coef
        return out / np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class DilationVector:
    """Element (v_-, u, v_+) of the dilation space D_- + K + D_+."""

    v_minus: ChannelFunction
    u: np.ndarray
    v_plus: ChannelFunction

    def __post_init__(self):
        if self.v_minus.side != -1 or self.v_plus.side != +1:
            raise ValidationError("channel sides are (v_-, u, v_+) = (-1, ., +1)")
        if self.v_minus.dim != self.v_plus.dim:
            raise ValidationError("channel dimensions differ")
        object.__setattr__(self, "u", np.asarray(self.u, dtype=complex))

    def scale(self, c: complex) -> "DilationVector":
        return DilationVector(self.v_minus.scale(c), c * self.u, self.v_plus.scale(c))

    def __add__(self, other: "DilationVector") -> "DilationVector":
        return DilationVector(self.v_minus + other.v_minus, self.u + other.u, self.v_plus + other.v_plus)


def interior_vector(member: FamilyMember, u) -> DilationVector:
    r = member.rank
    return DilationVector(ChannelFunction.zero(-1, r), np.asarray(u, dtype=complex), ChannelFunction.zero(+1, r))


def dilation_inner(g: DilationVector, h: DilationVector) -> complex:
    return g.v_minus.inner(h.v_minus) + np.dot(g.u, h.u.conj()) + g.v_plus.inner(h.v_plus)


def dilation_norm(h: DilationVector) -> float:
    return float(np.sqrt(max(np.real(dilation_inner(h, h)), 0.0)))


@dataclass(frozen=True)
class DomainCertificate:
    """Boundary gap || v_+(0) - v_-(0) - i alpha u || and representation summary."""

    gap: float
    n_terms: int
    smooth_representation: bool = True

    def in_domain(self, tol: float = BOUNDARY_GAP_TOL) -> bool:
        return self.gap <= tol


def domain_certificate(member: FamilyMember, h: DilationVector) -> DomainCertificate:
    gap = h.v_plus.value0() - h.v_minus.value0() - 1j * member.alpha.to_E(h.u)
    return DomainCertificate(float(np.linalg.norm(gap)), len(h.v_minus.terms) + len(h.v_plus.terms))


def _require_dissipative(member: FamilyMember) -> None:
    if not member.kappa.is_iI:
        raise ValidationError("the dilation is built for the dissipative member (kappa = iI)")


def dilation_apply(member: FamilyMember, h: DilationVector, tol: float = BOUNDARY_GAP_TOL) -> DilationVector:
    """Apply (v_-, u, v_+) -> (i v_-', A u + (alpha/2)[v_+(0) + v_-(0)], i v_+')."""
    _require_dissipative(member)
    cert = domain_certificate(member, h)
    if not cert.in_domain(tol * max(1.0, dilation_norm(h))):
        raise DomainError(f"not in dom(dilation): boundary gap {cert.gap:.3e}")
    mid = member.backend.apply(h.u) + 0.5 * member.alpha.from_E(h.v_plus.value0() + h.v_minus.value0())
    return DilationVector(h.v_minus.derivative().scale(1j), mid, h.v_plus.derivative().scale(1j))


def _solve_channel_ode(f: ChannelFunction, z: complex) -> ChannelFunction:
    """Particular solution of i v' - z v = f on the channel's half-line."""
    terms = []
    for t in f.terms:
        mu = t.rate + 1j * z
        if abs(mu) < 1e-12 * max(1.0, abs(z)):
            raise SpectrumError("channel term resonates with the homogeneous rate -iz")
        fac = -1j
        for j in range(t.power + 1):
            c = fac * (-1.0) ** j * math.factorial(t.power) / math.factorial(t.power - j) / mu ** (j + 1)
            terms.append(ChannelTerm(c * t.coef, t.rate, t.power - j))
    return ChannelFunction(f.side, f.dim, terms)


def dilation_resolvent(member: FamilyMember, z: complex, f: DilationVector) -> DilationVector:
    """Solve (dilation - z) g = f for non-real z, choosing L^2 channel solutions.

    For Im z < 0 the homogeneous rate -iz decays on x > 0: the incoming
    channel is forced, the K-row reduces to the resolvent of L^{||}, and the
    boundary condition fixes the outgoing constant.  Im z > 0 is mirrored with
    L^{-||}.
    """
    _require_dissipative(member)
    z = complex(z)
    if z.imag == 0:
        raise DomainError("dilation resolvent needs Im z != 0")
    r = member.rank
    part_minus = _solve_channel_ode(f.v_minus, z)
    part_plus = _solve_channel_ode(f.v_plus, z)
    a = part_minus.value0()
    b = part_plus.value0()
    if z.imag < 0:
        u = apply_resolvent(member, z, f.u - member.alpha.from_E(a))
        c_plus = a - b + 1j * member.alpha.to_E(u)
        hom = ChannelFunction(+1, r, [ChannelTerm(c_plus, -1j * z, 0)])
        return DilationVector(part_minus, u, part_plus + hom)
    adj = member.adjoint()
    u = apply_resolvent(adj, z, f.u - member.alpha.from_E(b))
    c_minus = b - a - 1j * member.alpha.to_E(u)
    hom = ChannelFunction(-1, r, [ChannelTerm(c_minus, -1j * z, 0)])
    return DilationVector(part_minus + hom, u, part_plus)


def dilation_compress_check(member: FamilyMember, z: complex, u) -> float:
    """Relative gap between P_K (dilation - z)^{-1} (0,u,0) and (L^{||} - z)^{-1} u, Im z < 0."""
    _require_dissipative(member)
    if not complex(z).imag < 0:
        raise DomainError("compression identity is stated for Im z < 0")
    u = np.asarray(u, dtype=complex)
    g = dilation_resolvent(member, z, interior_vector(member, u))
    direct = apply_resolvent(member, z, u)
    return float(np.linalg.norm(g.u - direct) / np.linalg.norm(u))
