"""Symmetric model space on the real axis.

Elements are pairs (g_tilde, g) of E-valued functions sampled on a uniform
grid, with the indefinite-looking but positive weight

    W(k) = [[ I      S(k)^* ]
            [ S(k)   I      ]]

built from boundary values of the characteristic function S.  The module
provides the Hardy-class projections used to cut the model space down to its
internal part K, the spectral maps F_+-, and the canonical map Phi from the
dilation space onto the model space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .charfn import M_boundary_samples, S_boundary_samples, resolvent_flow_samples
from .dilation import DilationVector
from .errors import ValidationError
from .operators import FamilyMember

MIN_GRID = 256
EDGE_MASS_WARN = 1e-6


class EdgeMassWarning(UserWarning):
    """Sample mass left at the grid edges after the rational-tail fit."""


class AxisGrid:
    """Uniform symmetric grid k_j = -k_max + j dk, j = 0..n-1 (n a power of two)."""

    def __init__(self, k_max: float, n: int):
        if n < MIN_GRID or n & (n - 1):
            raise ValidationError(f"grid size must be a power of two >= {MIN_GRID}")
        if k_max <= 0:
            raise ValidationError("k_max must be positive")
        self.k_max = float(k_max)
        self.n = int(n)
        self.dk = 2.0 * self.k_max / self.n
        self.k = -self.k_max + self.dk * np.arange(self.n)

    def central_half(self) -> "AxisGrid":
        """Same spacing, half the window: used for tail extrapolation."""
        return AxisGrid(self.k_max / 2.0, self.n // 2)

    def central_slice(self) -> slice:
        return slice(self.n // 4, 3 * self.n // 4)

    def integrate(self, values: np.ndarray) -> complex:
        return complex(np.sum(values, axis=0) * self.dk)


def _fft_hardy_multiplier(n: int, sign: int) -> np.ndarray:
    """Bin weights for the Hardy projection P_sign under np.fft.fft.

    With the transform convention v_hat(k) = (2 pi)^{-1/2} int v(x) e^{ikx} dx,
    membership in H^2_+ means the conjugate profile lives on x >= 0, which the
    DFT puts in bins 0..n/2-1.  The two multipliers are exactly complementary
    0/1 masks, so P_+ + P_- = I, P_+ P_- = 0 and idempotence hold exactly on
    the FFT path.
    """
    w = np.zeros(n)
    if sign > 0:
        w[: n // 2] = 1.0
    else:
        w[n // 2 :] = 1.0
    return w


def _pole_basis(k: np.ndarray, poles_plus, poles_minus) -> tuple[np.ndarray, int]:
    """Rational fit basis: columns for poles in C_- first (H^2_+ class), then
    poles in C_+ (H^2_- class).  Returns (basis, number of plus columns)."""
    plus = [1.0 / (k - w) ** p for (w, d) in poles_plus for p in range(1, d + 1)]
    minus = [1.0 / (k - w) ** p for (w, d) in poles_minus for p in range(1, d + 1)]
    return np.stack(plus + minus, axis=-1), len(plus)


class HardyProjector:
    """FFT Hardy projections with an analytic correction for slow rational tails.

    The raw FFT multiplier treats the samples as periodic, so O(1/k) tails
    alias badly: the discrete (periodic) Hilbert kernel differs from 1/(k-k')
    by a term whose leading effect is a ramp proportional to the integral and
    first moment of the input.  We therefore fit the samples against a small
    two-sided pole basis using the edge zones plus the window moments (the
    moments pin down the Hardy class of the tail, which the edge values alone
    cannot resolve), subtract the fit, project the remainder by FFT, and put
    the fitted part back through its exact analytic projection.

    The fit is skipped (coefficients zeroed) when it fails to reduce the edge
    residual, so on noise-like data the projector reduces to the exactly
    idempotent FFT multiplier.
    """

    def __init__(self, grid: AxisGrid, edge_frac: float = 0.1, subtract_poles: bool = True,
                 extra_poles=(), moment_weight: float = 1.0, ridge: float = 1e-9):
        self.grid = grid
        self.subtract_poles = subtract_poles
        n = grid.n
        ne = max(int(round(edge_frac * n)), 8)
        self.edge_idx = np.concatenate([np.arange(ne), np.arange(n - ne, n)])
        # default tail poles at -+i (orders 1..3) plus any caller-supplied pole
        # locations (orders 1..2) whose class is read off the sign of Im
        poles_plus = [(-1j, 3)]
        poles_minus = [(+1j, 3)]
        for w in extra_poles:
            w = complex(w)
            if abs(w.imag) < 1e-12:
                raise ValidationError("extra poles must be off the real axis")
            (poles_minus if w.imag > 0 else poles_plus).append((w, 2))
        self.basis, self._n_plus = _pole_basis(grid.k, poles_plus, poles_minus)
        ncol = self.basis.shape[1]
        b_edge = self.basis[self.edge_idx]
        self._col_scale = np.linalg.norm(b_edge, axis=0)
        rows_edge = b_edge / self._col_scale
        # window moments sum_j k^q b(k_j), q = 0, 1: the discrete quantities
        # whose mismatch drives the periodic-Hilbert ramp error; they also pin
        # down the Hardy class of a 1/k tail, which edge values cannot resolve
        mom = np.stack([self.basis.sum(axis=0), (grid.k[:, None] * self.basis).sum(axis=0)])
        mom = mom / self._col_scale
        self._mom_scale = np.linalg.norm(mom, axis=1, keepdims=True)
        self._mom_weight = moment_weight * np.sqrt(len(self.edge_idx))
        rows_mom = self._mom_weight * mom / self._mom_scale
        # ridge in units of the fitted function's grid norm, so that edge-tiny
        # but interior-huge cancelling combinations are actually penalized
        grid_norm = np.linalg.norm(self.basis, axis=0) / self._col_scale
        rows_ridge = ridge * np.diag(grid_norm)
        self._lhs = np.concatenate([rows_edge, rows_mom, rows_ridge], axis=0)
        # fallback systems with a stronger ridge, for data whose moments the
        # basis cannot reach without huge cancelling coefficients: first drop
        # the k-moment row (the expensive one), then both
        fb_ridge = 1e-3 * np.diag(grid_norm)
        self._lhs_m0 = np.concatenate([rows_edge, rows_mom[:1], fb_ridge], axis=0)
        self._lhs_edge = np.concatenate([rows_edge, fb_ridge], axis=0)
        self._mult = {+1: _fft_hardy_multiplier(n, +1), -1: _fft_hardy_multiplier(n, -1)}

    def _fit_tails(self, f: np.ndarray) -> np.ndarray:
        ncol = self.basis.shape[1]
        flat = f.reshape(f.shape[0], -1)
        rhs_edge = flat[self.edge_idx]
        mom_f = np.stack([flat.sum(axis=0), (self.grid.k[:, None] * flat).sum(axis=0)])
        rhs_mom = self._mom_weight * mom_f / self._mom_scale
        rhs = np.concatenate([rhs_edge, rhs_mom, np.zeros((ncol, flat.shape[1]))], axis=0)
        coef, *_ = np.linalg.lstsq(self._lhs, rhs, rcond=None)
        # if matching the moments needed a fitted part far larger than the
        # data, the tail is not in reach of the basis: refit with fewer
        # moment constraints (k-moment first, then both dropped)
        scaled_basis = self.basis / self._col_scale

        def _dragged(c):
            fitted_norm = np.linalg.norm(np.tensordot(scaled_basis, c, axes=(1, 0)), axis=0)
            return fitted_norm > 3.0 * np.linalg.norm(flat, axis=0)

        bad = _dragged(coef)
        if np.any(bad):
            rhs_fb = np.concatenate([rhs_edge, rhs_mom[:1], np.zeros((ncol, flat.shape[1]))], axis=0)
            coef_fb, *_ = np.linalg.lstsq(self._lhs_m0, rhs_fb, rcond=None)
            coef = np.where(bad, coef_fb, coef)
            bad = _dragged(coef)
            if np.any(bad):
                rhs_fb = np.concatenate([rhs_edge, np.zeros((ncol, flat.shape[1]))], axis=0)
                coef_fb, *_ = np.linalg.lstsq(self._lhs_edge, rhs_fb, rcond=None)
                coef = np.where(bad, coef_fb, coef)
        # accept only if the fit actually explains the edge values, else treat
        # the data as tail-free (keeps the FFT path exactly idempotent on noise)
        fitted_edge = self._lhs[: len(self.edge_idx)] @ coef
        before = np.linalg.norm(rhs_edge, axis=0)
        after = np.linalg.norm(rhs_edge - fitted_edge, axis=0)
        coef = np.where(after <= 0.1 * before, coef, 0.0)
        coef = coef / self._col_scale[:, None]
        return coef.reshape((ncol,) + f.shape[1:])

    def _fft_project(self, f: np.ndarray, sign: int) -> np.ndarray:
        spec = np.fft.fft(f, axis=0)
        spec *= self._mult[sign].reshape((-1,) + (1,) * (f.ndim - 1))
        return np.fft.ifft(spec, axis=0)

    def project(self, f: np.ndarray, sign: int) -> np.ndarray:
        """P_+ f (sign=+1) or P_- f (sign=-1); f sampled on the grid, axis 0."""
        if sign not in (-1, +1):
            raise ValidationError("sign must be +-1")
        f = np.asarray(f, dtype=complex)
        if f.shape[0] != self.grid.n:
            raise ValidationError("sample count does not match the grid")
        if not self.subtract_poles:
            return self._fft_project(f, sign)
        coef = self._fit_tails(f)
        fitted = np.tensordot(self.basis, coef, axes=(1, 0))
        remainder = f - fitted
        self._check_edge_mass(remainder, f)
        out = self._fft_project(remainder, sign)
        # the fitted part projects exactly: plus-columns lie in H^2_+, minus in H^2_-
        keep = slice(0, self._n_plus) if sign > 0 else slice(self._n_plus, None)
        out = out + np.tensordot(self.basis[:, keep], coef[keep], axes=(1, 0))
        return out

    def _check_edge_mass(self, remainder: np.ndarray, f: np.ndarray) -> None:
        total = np.linalg.norm(f)
        if total == 0:
            return
        edge = np.linalg.norm(remainder[self.edge_idx])
        if edge / total > EDGE_MASS_WARN:
            warnings.warn(
                f"Hardy projection: relative edge mass {edge / total:.2e} after tail fit; "
                "consider a wider grid",
                EdgeMassWarning,
                stacklevel=3,
            )


def hardy_project(grid: AxisGrid, f: np.ndarray, sign: int, **kw) -> np.ndarray:
    return HardyProjector(grid, **kw).project(f, sign)


@dataclass
class ModelVector:
    """Pair (g_tilde, g) of E-valued sample arrays, shape (n, r) each."""

    g_minus: np.ndarray  # g_tilde
    g_plus: np.ndarray  # g

    def __post_init__(self):
        self.g_minus = np.asarray(self.g_minus, dtype=complex)
        self.g_plus = np.asarray(self.g_plus, dtype=complex)
        if self.g_minus.shape != self.g_plus.shape:
            raise ValidationError("component shapes differ")

    def __add__(self, other):
        return ModelVector(self.g_minus + other.g_minus, self.g_plus + other.g_plus)

    def __sub__(self, other):
        return ModelVector(self.g_minus - other.g_minus, self.g_plus - other.g_plus)

    def scale(self, c: complex) -> "ModelVector":
        return ModelVector(c * self.g_minus, c * self.g_plus)

    def restrict(self, sl: slice) -> "ModelVector":
        return ModelVector(self.g_minus[sl], self.g_plus[sl])


def _member_poles(member: FamilyMember, imag_floor: float = 1e-8) -> list:
    """Pole locations for the tail fit: eigenvalues of the dissipative member
    and their mirror images (matrix backend only; a Friedrichs member has
    branch cuts instead of poles, which the fit cannot represent)."""
    if member.backend.is_friedrichs:
        return []
    eigs = np.linalg.eigvals(member.dissipative_part().dense_matrix())
    out = []
    for w in eigs:
        if abs(w.imag) > imag_floor:
            out.extend([w, np.conj(w)])
    return out


class SpectralWeight:
    """Boundary samples of S on a grid, with the model weight and its pseudo-inverse."""

    def __init__(self, member: FamilyMember, grid: AxisGrid, projector: HardyProjector | None = None):
        self.member = member
        self.grid = grid
        self.s = S_boundary_samples(member, grid.k)  # (n, r, r)
        if projector is None:
            projector = HardyProjector(grid, extra_poles=_member_poles(member))
        self.projector = projector
        self._w = None
        self._w_pinv = None

    @property
    def rank(self) -> int:
        return self.member.rank

    @property
    def W(self) -> np.ndarray:
        if self._w is None:
            n, r = self.grid.n, self.rank
            w = np.zeros((n, 2 * r, 2 * r), dtype=complex)
            eye = np.eye(r)
            w[:, :r, :r] = eye
            w[:, r:, r:] = eye
            w[:, :r, r:] = np.conj(np.swapaxes(self.s, -1, -2))
            w[:, r:, :r] = self.s
            self._w = w
        return self._w

    @property
    def W_pinv(self) -> np.ndarray:
        if self._w_pinv is None:
            self._w_pinv = np.linalg.pinv(self.W, rcond=1e-10, hermitian=True)
        return self._w_pinv

    def apply_W(self, v: ModelVector) -> ModelVector:
        s_h = np.conj(np.swapaxes(self.s, -1, -2))
        top = v.g_minus + np.einsum("kab,kb->ka", s_h, v.g_plus)
        bot = np.einsum("kab,kb->ka", self.s, v.g_minus) + v.g_plus
        return ModelVector(top, bot)

    def restrict(self, weight_grid: AxisGrid, sl: slice) -> "SpectralWeight":
        """Cheap view on the central sub-window (shares S samples)."""
        out = object.__new__(SpectralWeight)
        out.member = self.member
        out.grid = weight_grid
        out.s = self.s[sl]
        out.projector = HardyProjector(weight_grid)
        out._w = None if self._w is None else self._w[sl]
        out._w_pinv = None if self._w_pinv is None else self._w_pinv[sl]
        return out


def model_inner(weight: SpectralWeight, a: ModelVector, b: ModelVector) -> complex:
    wa = weight.apply_W(a)
    dens = np.sum(wa.g_minus * np.conj(b.g_minus) + wa.g_plus * np.conj(b.g_plus), axis=-1)
    return complex(np.sum(dens) * weight.grid.dk)


def model_norm_sq(weight: SpectralWeight, a: ModelVector, richardson: bool = False) -> float:
    if not richardson:
        return max(float(np.real(model_inner(weight, a, a))), 0.0)
    full = model_norm_sq(weight, a)
    sl = weight.grid.central_slice()
    half = model_norm_sq(weight.restrict(weight.grid.central_half(), sl), a.restrict(sl))
    return 2.0 * full - half


def project_to_K(weight: SpectralWeight, v: ModelVector) -> ModelVector:
    """P_K (g_tilde, g) = (g_tilde - P_+ (g_tilde + S^* g), g - P_- (S g_tilde + g))."""
    wv = weight.apply_W(v)
    top = v.g_minus - weight.projector.project(wv.g_minus, +1)
    bot = v.g_plus - weight.projector.project(wv.g_plus, -1)
    return ModelVector(top, bot)


def spectral_map_F(member: FamilyMember, weight: SpectralWeight, h: DilationVector) -> tuple[np.ndarray, np.ndarray]:
    """Samples of (F_- h, F_+ h) on the grid.

    F_+ h = -(2 pi)^{-1/2} alpha (L^{||} - (k - i0))^{-1} u + S^* vhat_- + vhat_+
    F_- h = -(2 pi)^{-1/2} alpha (L^{-||} - (k + i0))^{-1} u + vhat_- + S vhat_+
    """
    k = weight.grid.k
    vm = h.v_minus.fourier(k)
    vp = h.v_plus.fourier(k)
    s = weight.s
    s_h = np.conj(np.swapaxes(s, -1, -2))
    pref = -1.0 / np.sqrt(2.0 * np.pi)
    f_plus = pref * resolvent_flow_samples(member, h.u, k, "+") + np.einsum("kab,kb->ka", s_h, vm) + vp
    f_minus = pref * resolvent_flow_samples(member, h.u, k, "-") + vm + np.einsum("kab,kb->ka", s, vp)
    return f_minus, f_plus


def map_Phi(member: FamilyMember, weight: SpectralWeight, h: DilationVector) -> ModelVector:
    """Canonical map dilation space -> model space, via the pointwise class solve.

    Phi h is the (pointwise minimal-norm) solution of W (g_tilde, g) = (F_+ h, F_- h);
    any other solution differs by a W-null direction and represents the same
    model element.
    """
    f_minus, f_plus = spectral_map_F(member, weight, h)
    stacked = np.concatenate([f_plus, f_minus], axis=-1)
    sol = np.einsum("kab,kb->ka", weight.W_pinv, stacked)
    r = weight.rank
    return ModelVector(sol[:, :r], sol[:, r:])


def phi_norm_sq(member: FamilyMember, weight: SpectralWeight, h: DilationVector, richardson: bool = True) -> float:
    """||Phi h||^2 computed directly from the F samples: sum <F, W^+ F> dk.

    The tail of the integrand decays like 1/k^2, so the X-window value I(X)
    misses ~c/X; the two-window extrapolation 2 I(X) - I(X/2) cancels the
    leading tail error.
    """
    f_minus, f_plus = spectral_map_F(member, weight, h)
    stacked = np.concatenate([f_plus, f_minus], axis=-1)
    dens = np.real(np.einsum("ka,kab,kb->k", np.conj(stacked), weight.W_pinv, stacked))
    full = float(np.sum(dens) * weight.grid.dk)
    if not richardson:
        return full
    sl = weight.grid.central_slice()
    half = float(np.sum(dens[sl]) * weight.grid.dk)
    return 2.0 * full - half


def _pv_cauchy_nodes(grid: AxisGrid, y: np.ndarray, points: np.ndarray) -> np.ndarray:
    """PV int y(k)/(a - k) dk for each point a, columns of y per point.

    Singularity handled by subtraction: the regularized quotient
    (y(k) - y(a))/(a - k) is integrated by the trapezoid-like grid sum and the
    subtracted constant contributes the exact window value log((X+a)/(X-a)).
    y has shape (n_grid, n_points); points must lie strictly inside the window.
    """
    k = grid.k
    x_hi = -k[0]  # symmetric window [-X, X)
    ya = np.empty(points.shape[0], dtype=complex)
    dya = np.empty_like(ya)
    dy = np.gradient(y, grid.dk, axis=0)
    for j, a in enumerate(points):
        ya[j] = np.interp(a, k, y[:, j].real) + 1j * np.interp(a, k, y[:, j].imag)
        dya[j] = np.interp(a, k, dy[:, j].real) + 1j * np.interp(a, k, dy[:, j].imag)
    diff = points[None, :] - k[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = (y - ya[None, :]) / diff
    sing = np.abs(diff) < 0.5 * grid.dk
    quot = np.where(sing, -dya[None, :], quot)
    return quot.sum(axis=0) * grid.dk + ya * np.log((x_hi + points) / (x_hi - points))


def map_Phi_adjoint(member: FamilyMember, weight: SpectralWeight, x: ModelVector) -> np.ndarray:
    """Phi* x: adjoint of the canonical map, landing in the internal space K.

    Since <x, Phi v> = int [<x_1, F_+ v> + <x_2, F_- v>] dk and the flows act
    through the perturbation, the adjoint collapses to boundary resolvents of
    the unperturbed A:

        Phi* x = -(2 pi)^{-1/2} int [ R_0(k+i0) Q m (I - i M(k+i0)/2)^{-1} x_1
                                    + R_0(k-i0) Q m (I + i M(k-i0)/2)^{-1} x_2 ] dk,

    evaluated in the eigenbasis of A by principal-value Cauchy sums plus the
    Plemelj on-axis terms.  Phi* annihilates the orthogonal complement of K,
    and Phi* Phi = identity, so ||P_K x - Phi w|| = ||Phi* x - w||: this gives
    projection-free access to distances measured inside K.
    """
    backend, alpha = member.backend, member.alpha
    k = weight.grid.k
    r = alpha.rank
    eye = np.eye(r)
    m_up = M_boundary_samples(backend, alpha, k, +1)
    m_dn = M_boundary_samples(backend, alpha, k, -1)
    d1 = np.linalg.solve(eye[None] - 0.5j * m_up, x.g_minus[..., None])[..., 0]
    d2 = np.linalg.solve(eye[None] + 0.5j * m_dn, x.g_plus[..., None])[..., 0]
    if backend.is_friedrichs:
        nodes = backend.nodes
        vecs = None
        P = alpha.Q @ alpha.m
    else:
        nodes, vecs = np.linalg.eigh(backend.matrix)
        P = vecs.conj().T @ alpha.Q @ alpha.m
    inside = (nodes > k[0]) & (nodes < -k[0])
    if not np.all(inside):
        raise ValidationError("spectrum of A must lie inside the sample window")
    w1 = d1 @ P.T  # (n_grid, n_nodes)
    w2 = d2 @ P.T
    # the integrands decay like 1/k^2, so the X-window principal values miss
    # ~c/X; the two-window extrapolation cancels the leading tail error
    full = _pv_cauchy_nodes(weight.grid, w1, nodes) + _pv_cauchy_nodes(weight.grid, w2, nodes)
    sl = weight.grid.central_slice()
    half_grid = weight.grid.central_half()
    half = _pv_cauchy_nodes(half_grid, w1[sl], nodes) + _pv_cauchy_nodes(half_grid, w2[sl], nodes)
    vals = 2.0 * full - half
    wa1 = np.array([np.interp(a, k, w1[:, j].real) + 1j * np.interp(a, k, w1[:, j].imag)
                    for j, a in enumerate(nodes)])
    wa2 = np.array([np.interp(a, k, w2[:, j].real) + 1j * np.interp(a, k, w2[:, j].imag)
                    for j, a in enumerate(nodes)])
    vals = vals + 1j * np.pi * (wa1 - wa2)
    u = -vals / np.sqrt(2.0 * np.pi)
    return u if vecs is None else vecs @ u


def cauchy_continuation(grid: AxisGrid, samples: np.ndarray, z0: complex, hardy_sign: int, richardson: bool = True):
    """Evaluate a Hardy-class function off the axis from its boundary samples.

    H^2_+ (hardy_sign=+1), Im z0 > 0:  f(z0) = +(2 pi i)^{-1} int f(k)/(k - z0) dk;
    H^2_- (hardy_sign=-1), Im z0 < 0:  f(z0) = -(2 pi i)^{-1} int f(k)/(k - z0) dk.
    """
    z0 = complex(z0)
    if hardy_sign * z0.imag <= 0:
        raise ValidationError("evaluation point must lie in the function's half-plane")
    samples = np.asarray(samples, dtype=complex)
    kern = 1.0 / (grid.k - z0)
    dens = samples * kern.reshape((-1,) + (1,) * (samples.ndim - 1))
    pref = hardy_sign / (2j * np.pi)
    full = pref * np.sum(dens, axis=0) * grid.dk
    if not richardson:
        return full
    sl = grid.central_slice()
    half = pref * np.sum(dens[sl], axis=0) * grid.dk
    return 2.0 * full - half
