"""Self-adjoint backends, finite-rank perturbation factors and the family L^kappa.

The family member is L^kappa = A + alpha kappa alpha / 2 where A = A* and
alpha = Q m Q* has rank r.  All r x r objects (kappa, M, characteristic
functions downstream) live in the orthonormal basis given by the columns of Q,
so that vectors in the range space E are plain r-vectors.

For the Friedrichs variant, K-vectors are stored as weighted samples
c_j = sqrt(w_j) * u(x_j), which makes the discretized L^2 inner product the
plain Euclidean one and A the diagonal matrix of nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import SpectrumError, ValidationError

HERMITICITY_TOL = 1e-12
DEFAULT_RANK_TOL = 1e-10
COND_LIMIT = 1e12


def _as_complex_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValidationError("expected a 2-d array")
    return a


class OperatorBackend:
    """The self-adjoint part A: a Hermitian matrix or a discretized multiplication operator."""

    def __init__(self, kind, *, matrix=None, nodes=None, weights=None):
        self.kind = kind
        if kind == "matrix":
            A = _as_complex_matrix(matrix)
            if A.shape[0] != A.shape[1]:
                raise ValidationError("A must be square")
            scale = max(np.linalg.norm(A), 1.0)
            if np.linalg.norm(A - A.conj().T) > HERMITICITY_TOL * scale:
                raise ValidationError("A is not Hermitian to 1e-12")
            self.matrix = 0.5 * (A + A.conj().T)
            self.nodes = None
            self.weights = None
            self._eigvals, self._eigvecs = np.linalg.eigh(self.matrix)
        elif kind == "friedrichs":
            x = np.asarray(nodes, dtype=float)
            w = np.asarray(weights, dtype=float)
            if x.ndim != 1 or w.shape != x.shape:
                raise ValidationError("nodes and weights must be 1-d arrays of equal length")
            if not np.all(np.diff(x) > 0):
                raise ValidationError("quadrature nodes must be strictly increasing")
            if not np.all(w > 0):
                raise ValidationError("quadrature weights must be strictly positive")
            self.matrix = None
            self.nodes = x
            self.weights = w
            self._eigvals = x
            self._eigvecs = None
            self._bary_logw, self._bary_sign = _barycentric_weights(x)
        else:
            raise ValidationError(f"unknown backend kind {kind!r}")

    @classmethod
    def from_matrix(cls, A) -> "OperatorBackend":
        return cls("matrix", matrix=A)

    @classmethod
    def from_quadrature(cls, nodes, weights) -> "OperatorBackend":
        return cls("friedrichs", nodes=nodes, weights=weights)

    @classmethod
    def gauss_legendre(cls, x_lo: float, x_hi: float, n: int) -> "OperatorBackend":
        if not x_hi > x_lo:
            raise ValidationError("need x_hi > x_lo")
        t, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (x_hi - x_lo)
        return cls("friedrichs", nodes=0.5 * (x_lo + x_hi) + half * t, weights=half * w)

    @property
    def n(self) -> int:
        return len(self._eigvals)

    @property
    def is_friedrichs(self) -> bool:
        return self.kind == "friedrichs"

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eigvals

    def span(self) -> tuple[float, float]:
        return float(self._eigvals.min()), float(self._eigvals.max())

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        if self.is_friedrichs:
            return self.nodes * u
        return self.matrix @ u

    def resolvent(self, z: complex, u: np.ndarray) -> np.ndarray:
        """(A - z)^{-1} u."""
        u = np.asarray(u, dtype=complex)
        d = self._eigvals - z
        if np.min(np.abs(d)) < 1e-12 * max(1.0, np.max(np.abs(self._eigvals))):
            if self.is_friedrichs:
                raise SpectrumError("z hits a quadrature node; evaluate off the real grid")
            raise SpectrumError("z is an eigenvalue of A")
        if self.is_friedrichs:
            return u / d
        c = self._eigvecs.conj().T @ u
        return self._eigvecs @ (c / d)

    def embed(self, f) -> np.ndarray:
        """Weighted samples sqrt(w) f(x_j) of a function on the interval (Friedrichs only)."""
        if not self.is_friedrichs:
            raise ValidationError("embed is only defined for the Friedrichs backend")
        return np.sqrt(self.weights) * np.asarray([f(x) for x in self.nodes], dtype=complex)

    def node_values(self, u: np.ndarray) -> np.ndarray:
        """Recover plain function samples u(x_j) from weighted samples (Friedrichs only)."""
        if not self.is_friedrichs:
            raise ValidationError("node_values is only defined for the Friedrichs backend")
        return np.asarray(u, dtype=complex) / np.sqrt(self.weights)

    def interpolate(self, u: np.ndarray, points) -> np.ndarray:
        """Barycentric interpolation of the function behind weighted samples (Friedrichs only)."""
        vals = self.node_values(u)
        return _barycentric_eval(self.nodes, self._bary_logw, self._bary_sign, vals, np.asarray(points, dtype=float))


def _barycentric_weights(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # log-scale product formula; barycentric evaluation is invariant under rescaling
    n = len(x)
    logw = np.zeros(n)
    sign = np.ones(n)
    for j in range(n):
        d = x[j] - np.delete(x, j)
        logw[j] = -np.sum(np.log(np.abs(d)))
        sign[j] = np.prod(np.sign(d))
    logw -= logw.max()
    return logw, sign


def _barycentric_eval(x, logw, sign, vals, points):
    w = sign * np.exp(logw)
    pts = np.atleast_1d(points)
    out = np.empty(pts.shape + vals.shape[1:] if vals.ndim > 1 else pts.shape, dtype=complex)
    spacing = np.min(np.diff(x))
    for i, p in enumerate(pts):
        d = p - x
        hit = np.argmin(np.abs(d))
        if abs(d[hit]) < 1e-8 * spacing:
            # snap to the node: the barycentric quotient overflows there
            out[i] = vals[hit]
            continue
        c = w / d
        out[i] = (c @ vals) / c.sum()
    return out if np.ndim(points) else out[0]


class PerturbationFactor:
    """The factor alpha = Q m Q* with orthonormal Q spanning E = clos ran alpha."""

    def __init__(self, Q, m, tol_rank: float = DEFAULT_RANK_TOL):
        Q = _as_complex_matrix(Q)
        m = _as_complex_matrix(m)
        if Q.shape[1] != m.shape[0] or m.shape[0] != m.shape[1]:
            raise ValidationError("Q and m have incompatible shapes")
        if m.shape[0] < 1:
            raise ValidationError("rank must be at least 1")
        gram = Q.conj().T @ Q
        if np.linalg.norm(gram - np.eye(Q.shape[1])) > 1e-12 * Q.shape[1]:
            raise ValidationError("columns of Q are not orthonormal to 1e-12")
        if np.linalg.norm(m - m.conj().T) > 1e-12 * max(1.0, np.linalg.norm(m)):
            raise ValidationError("m is not Hermitian")
        if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -1e-12 * max(1.0, np.linalg.norm(m)):
            raise ValidationError("m is not positive semi-definite")
        self.Q = Q
        self.m = 0.5 * (m + m.conj().T)
        self.tol_rank = tol_rank

    @classmethod
    def from_dense(cls, alpha, tol_rank: float = DEFAULT_RANK_TOL) -> "PerturbationFactor":
        """Extract (Q, m) from a dense Hermitian PSD alpha by eigenvalue truncation."""
        a = _as_complex_matrix(alpha)
        if np.linalg.norm(a - a.conj().T) > 1e-10 * max(1.0, np.linalg.norm(a)):
            raise ValidationError("dense alpha must be Hermitian")
        vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
        keep = vals > tol_rank * max(vals.max(), 0.0) if vals.max() > 0 else np.zeros_like(vals, bool)
        if not np.any(keep):
            raise ValidationError("alpha is numerically zero; rank must be at least 1")
        if np.min(vals[keep]) < 0:
            raise ValidationError("dense alpha must be positive semi-definite")
        return cls(vecs[:, keep], np.diag(vals[keep]), tol_rank)

    @classmethod
    def from_columns(cls, backend: OperatorBackend, columns, m, tol_rank: float = DEFAULT_RANK_TOL) -> "PerturbationFactor":
        """Orthonormalize raw column vectors (QR) and attach the coupling matrix m."""
        cols = _as_complex_matrix(columns)
        q, _ = np.linalg.qr(cols)
        return cls(q, m, tol_rank)

    @property
    def rank(self) -> int:
        return self.m.shape[0]

    def compress(self, u: np.ndarray) -> np.ndarray:
        """Q* u: coordinates of the projection onto E."""
        return self.Q.conj().T @ np.asarray(u, dtype=complex)

    def to_E(self, u: np.ndarray) -> np.ndarray:
        """alpha u expressed in E-coordinates: m Q* u."""
        return self.m @ self.compress(u)

    def from_E(self, xi: np.ndarray) -> np.ndarray:
        """alpha applied to an E-coordinate vector, as a K-vector: Q m xi."""
        return self.Q @ (self.m @ np.asarray(xi, dtype=complex))

    def apply(self, u: np.ndarray) -> np.ndarray:
        """alpha u = Q m Q* u."""
        return self.Q @ self.to_E(u)

    def dense(self) -> np.ndarray:
        return self.Q @ self.m @ self.Q.conj().T


class KappaParameter:
    """Bounded r x r parameter kappa, with the special family members flagged."""

    def __init__(self, matrix, J=None):
        k = _as_complex_matrix(matrix)
        if k.shape[0] != k.shape[1]:
            raise ValidationError("kappa must be square")
        self.matrix = k
        r = k.shape[0]
        eye = np.eye(r)
        self.J = None
        if J is not None:
            J = _as_complex_matrix(J)
            if J.shape != k.shape:
                raise ValidationError("J and kappa dimensions differ")
            if np.linalg.norm(J - J.conj().T) > 1e-12 * r or np.linalg.norm(J @ J - eye) > 1e-12 * r:
                raise ValidationError("J must be a Hermitian involution to 1e-12")
            self.J = J
        tol = 1e-14 * max(1.0, np.linalg.norm(k))
        self.is_zero = np.linalg.norm(k) <= tol
        self.is_iI = np.linalg.norm(k - 1j * eye) <= tol
        self.is_minus_iI = np.linalg.norm(k + 1j * eye) <= tol
        self.is_iJ = self.J is not None and np.linalg.norm(k - 1j * self.J) <= tol

    @classmethod
    def zero(cls, r: int) -> "KappaParameter":
        return cls(np.zeros((r, r)))

    @classmethod
    def dissipative(cls, r: int) -> "KappaParameter":
        return cls(1j * np.eye(r))

    @classmethod
    def anti_dissipative(cls, r: int) -> "KappaParameter":
        return cls(-1j * np.eye(r))

    @classmethod
    def from_involution(cls, J) -> "KappaParameter":
        J = _as_complex_matrix(J)
        return cls(1j * J, J=J)

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> "KappaParameter":
        return KappaParameter(self.matrix.conj().T, J=self.J)


@dataclass(frozen=True)
class FamilyMember:
    """L^kappa = A + alpha kappa alpha / 2 on dom(A)."""

    backend: OperatorBackend
    alpha: PerturbationFactor
    kappa: KappaParameter

    def __post_init__(self):
        if self.alpha.Q.shape[0] != self.backend.n:
            raise ValidationError("alpha does not act on the backend space")
        if self.kappa.r != self.alpha.rank:
            raise ValidationError("kappa dimensions do not match rank r")

    @property
    def rank(self) -> int:
        return self.alpha.rank

    def with_kappa(self, kappa: KappaParameter) -> "FamilyMember":
        return FamilyMember(self.backend, self.alpha, kappa)

    def dissipative_part(self) -> "FamilyMember":
        """L^{||} = A + i alpha^2 / 2."""
        return self.with_kappa(KappaParameter.dissipative(self.rank))

    def adjoint(self) -> "FamilyMember":
        return self.with_kappa(self.kappa.adjoint())

    def dense_matrix(self) -> np.ndarray:
        a = np.diag(self.backend.nodes.astype(complex)) if self.backend.is_friedrichs else self.backend.matrix
        Q, m = self.alpha.Q, self.alpha.m
        return a + 0.5 * Q @ (m @ self.kappa.matrix @ m) @ Q.conj().T


def build_family(backend: OperatorBackend, alpha: PerturbationFactor, kappa: KappaParameter) -> FamilyMember:
    """Validate and assemble a family member."""
    return FamilyMember(backend, alpha, kappa)


def apply_operator(member: FamilyMember, u: np.ndarray) -> np.ndarray:
    """L^kappa u = A u + alpha kappa alpha u / 2."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (member.backend.n,):
        raise ValidationError("dimension mismatch")
    xi = member.alpha.to_E(u)
    return member.backend.apply(u) + 0.5 * member.alpha.from_E(member.kappa.matrix @ xi)


def herglotz_M(backend: OperatorBackend, alpha: PerturbationFactor, z: complex) -> np.ndarray:
    """M(z) = m Q* (A - z)^{-1} Q m, the compressed resolvent of A in E-coordinates."""
    cols = np.column_stack([backend.resolvent(z, alpha.Q[:, j]) for j in range(alpha.rank)])
    return alpha.m @ (alpha.Q.conj().T @ cols) @ alpha.m


def resolvent_core(member: FamilyMember, z: complex) -> np.ndarray:
    """The r x r matrix I + M(z) kappa / 2 whose invertibility detects z in rho(L^kappa)."""
    M = herglotz_M(member.backend, member.alpha, z)
    return np.eye(member.rank) + 0.5 * M @ member.kappa.matrix


def apply_resolvent(member: FamilyMember, z: complex, u: np.ndarray) -> np.ndarray:
    """(L^kappa - z)^{-1} u via the finite-rank (Krein-type) resolvent update.

    (L^kappa - z)^{-1} = (A-z)^{-1}
        - (1/2) (A-z)^{-1} alpha kappa (I + M(z) kappa / 2)^{-1} alpha (A-z)^{-1}.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (member.backend.n,):
        raise ValidationError("dimension mismatch")
    r0u = member.backend.resolvent(z, u)
    if member.kappa.is_zero:
        return r0u
    core = resolvent_core(member, z)
    if np.linalg.cond(core) > COND_LIMIT:
        raise SpectrumError("z in spectrum or at numerical eigenvalue of L^kappa")
    w = np.linalg.solve(core, member.alpha.to_E(r0u))
    return r0u - 0.5 * member.backend.resolvent(z, member.alpha.from_E(member.kappa.matrix @ w))


def compressed_resolvent(member: FamilyMember, z: complex) -> np.ndarray:
    """alpha (L^kappa - z)^{-1} alpha in E-coordinates: (I + M kappa / 2)^{-1} M."""
    M = herglotz_M(member.backend, member.alpha, z)
    core = np.eye(member.rank) + 0.5 * M @ member.kappa.matrix
    if np.linalg.cond(core) > COND_LIMIT:
        raise SpectrumError("z in spectrum or at numerical eigenvalue of L^kappa")
    return np.linalg.solve(core, M)
