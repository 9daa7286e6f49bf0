"""Acceptance gate: thirteen end-to-end criteria at fixed tolerances.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
the captured output) and asserts both the numerical tolerance and a wall-time
budget.
"""

import time

import numpy as np
import pytest

from funcmodel import (
    AxisGrid,
    KappaParameter,
    ModelVector,
    SignatureProjections,
    SpectralWeight,
    apply_resolvent,
    build_family,
    dilation_compress_check,
    dilation_apply,
    dilation_inner,
    dilation_norm,
    dilation_resolvent,
    eval_charfn,
    fpm_identity_residual,
    hardy_project,
    interior_vector,
    kind_S,
    kind_theta,
    map_Phi,
    map_Phi_adjoint,
    model_norm_sq,
    model_resolvent,
    new_representation_residual,
    pg_forward,
    pg_inverse,
    phi_norm_sq,
    scattering_pair,
    singular_report,
    smooth_membership,
    smooth_representative,
    strauss_relation_check,
    wave_operator_model,
    wave_operator_time,
)
from funcmodel.charfn import S_boundary_samples
from funcmodel.modelspace import HardyProjector
from conftest import gaussian_vector, make_friedrichs, make_matrix6, make_scalar


class _Criterion:
    def __init__(self, num, label, limit):
        self.num, self.label, self.limit = num, label, limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        ok = exc_type is None and elapsed < self.limit
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {self.num:2d}: "
              f"{self.label} ({elapsed:.1f}s / limit {self.limit:.0f}s)")
        if exc_type is None and elapsed >= self.limit:
            pytest.fail(f"criterion {self.num} exceeded its {self.limit:.0f}s budget")
        return False


def _seeded_z(rng, n, half=None, spread=3.0):
    re = rng.uniform(-spread, spread, n)
    im = rng.uniform(0.6, 1.8, n)
    if half is None:
        im *= rng.choice([-1.0, 1.0], n)
    else:
        im *= half
    return re + 1j * im


def _regular_z(member, rng, half, n, gap=0.3):
    lam = np.linalg.eigvals(member.dense_matrix())
    out = []
    while len(out) < n:
        z = complex(_seeded_z(rng, 1, half)[0])
        if np.min(np.abs(z - lam)) > gap:
            out.append(z)
    return out


@pytest.fixture(scope="module")
def mat6():
    backend, alpha = make_matrix6()
    J = np.diag([1.0, -1.0, 1.0])
    return build_family(backend, alpha, KappaParameter.from_involution(J))


def test_criterion_01_pg_roundtrip(mat6):
    with _Criterion(1, "PG transform round-trips on sampled Theta and S", 5.0):
        sig = SignatureProjections.from_involution(mat6.kappa.J)
        rng = np.random.default_rng(101)
        for z in _seeded_z(rng, 25):
            theta = eval_charfn(mat6, kind_theta(mat6.kappa.J), z)
            back = pg_inverse(pg_forward(theta, sig), sig)
            assert np.linalg.norm(back - theta) < 1e-10
        for z in _seeded_z(rng, 25, half=+1):
            s = eval_charfn(mat6, kind_S(), z)
            back = pg_forward(pg_inverse(s, sig), sig)
            assert np.linalg.norm(back - s) < 1e-10


def test_criterion_02_pg_proposition(mat6):
    with _Criterion(2, "PG maps Theta to S pointwise (n=6, r=3, J=diag(1,-1,1))", 10.0):
        sig = SignatureProjections.from_involution(mat6.kappa.J)
        rng = np.random.default_rng(102)
        for z in _seeded_z(rng, 20, half=+1):
            theta = eval_charfn(mat6, kind_theta(mat6.kappa.J), z)
            s = eval_charfn(mat6, kind_S(), z)
            assert np.linalg.norm(pg_forward(theta, sig) - s) <= 1e-8


def test_criterion_03_scalar_closed_forms():
    with _Criterion(3, "scalar member matches hand formulas", 1.0):
        a, m0 = 0.7, 1.2
        v = 0.5 * m0 ** 2
        backend, alpha = make_scalar(a, m0)
        diss = build_family(backend, alpha, KappaParameter.dissipative(1))
        free = build_family(backend, alpha, KappaParameter.zero(1))
        one = np.array([1.0 + 0.0j])
        rng = np.random.default_rng(103)
        for z in _seeded_z(rng, 10, half=+1):
            s = eval_charfn(diss, kind_S(), z)[0, 0]
            assert abs(s - (a - z + 1j * v) / (a - z - 1j * v)) < 1e-10
        for z in _seeded_z(rng, 10):
            got = apply_resolvent(diss, z, one)[0]
            assert abs(got - 1.0 / (a + 1j * v - z)) < 1e-10
            got = apply_resolvent(free, z, one)[0]
            assert abs(got - 1.0 / (a - z)) < 1e-10
        z = -1j
        assert dilation_compress_check(diss, z, one) < 1e-10
        h = dilation_resolvent(diss, z, interior_vector(diss, one))
        assert abs(h.u[0] - 1.0 / (a + 1j * v - z)) < 1e-10


def test_criterion_04_dilation_identity(mat4):
    with _Criterion(4, "dilation compresses to the dissipative resolvent", 10.0):
        member = mat4["iI"]
        rng = np.random.default_rng(104)
        for z in _seeded_z(rng, 10, half=-1):
            u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            assert dilation_compress_check(member, complex(z), u) <= 1e-8
        f = interior_vector(member, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        e = interior_vector(member, rng.standard_normal(4) + 1j * rng.standard_normal(4))
        h = dilation_resolvent(member, -0.4 - 1.0j, f)
        g = dilation_resolvent(member, 0.8 + 1.2j, e)
        sym = abs(dilation_inner(dilation_apply(member, h), g)
                  - dilation_inner(h, dilation_apply(member, g)))
        assert sym <= 1e-9


def test_criterion_05_inner_property(mat4):
    with _Criterion(5, "S(k) is unitary on the axis (matrix backend)", 5.0):
        member = mat4["iJ"]
        k = np.linspace(-8.0, 8.0, 50)
        s = S_boundary_samples(member, k)
        eye = np.eye(member.rank)
        defect = np.conj(np.swapaxes(s, -1, -2)) @ s - eye[None]
        assert float(np.max([np.linalg.norm(d, 2) for d in defect])) <= 1e-8


def test_criterion_06_hardy_projector():
    with _Criterion(6, "Hardy projections split partial fractions", 5.0):
        grid = AxisGrid(50.0, 2048)
        k = grid.k
        for z, sign_of in [(0.6 - 0.9j, +1), (-0.3 + 1.1j, -1)]:
            f = 1.0 / (k - z)
            assert np.max(np.abs(hardy_project(grid, f, sign_of) - f)) <= 1e-6
            assert np.max(np.abs(hardy_project(grid, f, -sign_of))) <= 1e-6
        proj = HardyProjector(grid)
        rng = np.random.default_rng(106)
        z = rng.uniform(-3, 3, 4) + 1j * rng.uniform(0.9, 2, 4) * rng.choice([-1, 1], 4)
        f = np.sum(1.0 / (k[:, None] - z[None, :]), axis=1)
        total = proj.project(f, +1) + proj.project(f, -1)
        assert np.max(np.abs(total - f)) <= 1e-10


def test_criterion_07_phi_isometry():
    with _Criterion(7, "Phi is isometric and intertwines resolvents", 60.0):
        rng = np.random.default_rng(107)
        cases = []
        backend, alpha = make_scalar()
        cases.append((build_family(backend, alpha, KappaParameter.dissipative(1)),
                      AxisGrid(50.0, 2048)))
        backend, alpha = make_friedrichs(400)
        cases.append((build_family(backend, alpha, KappaParameter.dissipative(2)),
                      AxisGrid(50.0, 2048)))
        for member, grid in cases:
            weight = SpectralWeight(member, grid)
            if member.backend.is_friedrichs:
                u = gaussian_vector(member.backend)
            else:
                n = member.alpha.Q.shape[0]
                u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            h = dilation_resolvent(member, -0.4 - 0.9j, interior_vector(member, u))
            err = abs(phi_norm_sq(member, weight, h) - dilation_norm(h) ** 2)
            assert err / dilation_norm(h) ** 2 <= 1e-3
            z = 0.2 - 1.0j
            rh = dilation_resolvent(member, z, h)
            left = map_Phi(member, weight, rh)
            ph = map_Phi(member, weight, h)
            kern = 1.0 / (grid.k - z)
            right = ModelVector(kern[:, None] * ph.g_minus, kern[:, None] * ph.g_plus)
            diff = left - right
            rel = model_norm_sq(weight, diff, richardson=True) \
                / model_norm_sq(weight, right, richardson=True)
            assert abs(rel) <= 1e-3


def test_criterion_08_model_theorem(mat4):
    with _Criterion(8, "resolvent acts on the model by the stated formula", 120.0):
        grid = AxisGrid(40.0, 4096)
        rng = np.random.default_rng(108)
        worst = 0.0
        for name in ("zero", "iI", "-iI", "iJ"):
            member = mat4[name]
            weight = SpectralWeight(member, grid)
            u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            phi_u = map_Phi(member, weight, interior_vector(member, u))
            for half in (+1, -1):
                for z0 in _regular_z(member, rng, half, 5):
                    got = model_resolvent(member, weight, z0, phi_u)
                    want = map_Phi(member, weight,
                                   interior_vector(member, apply_resolvent(member, z0, u)))
                    diff = got - want
                    rel = np.sqrt(abs(model_norm_sq(weight, diff))
                                  / abs(model_norm_sq(weight, want)))
                    worst = max(worst, rel)
        assert worst <= 1e-2


def test_criterion_09_fpm_equations(mat4, weight4):
    with _Criterion(9, "spectral-map resolvent equations hold", 30.0):
        member = mat4["iJ"]
        rng = np.random.default_rng(109)
        u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        for z0 in _regular_z(member, rng, -1, 3):
            res = fpm_identity_residual(member, weight4, z0, u)
            assert max(res) <= 1e-6


def test_criterion_10_smooth_vectors(mat4, weight4, fr800, weight800):
    with _Criterion(10, "smooth sets classified; multiplication identity", 60.0):
        member = mat4["iJ"]
        lam, vecs = np.linalg.eig(member.dense_matrix())
        for i in range(4):
            verdict = smooth_membership(member, vecs[:, i])
            expected = (False, True) if lam[i].imag > 0 else (True, False)
            assert (verdict.in_N_plus, verdict.in_N_minus) == expected
        free = mat4["zero"]
        _, real_vecs = np.linalg.eigh(free.dense_matrix().real)
        verdict = smooth_membership(free, real_vecs[:, 0])
        assert (verdict.in_N_plus, verdict.in_N_minus) == (False, False)
        zs = [0.6 - 0.9j, -0.4 + 1.1j]
        u = gaussian_vector(fr800.backend)
        assert new_representation_residual(fr800, weight800, u, zs) <= 1e-2
        bad = vecs[:, np.argmax(np.abs(lam.imag))]
        assert new_representation_residual(member, weight4, bad, zs) >= 1e-1


def test_criterion_11_factorization_separability(mat4, mat6):
    with _Criterion(11, "characteristic function factorizes; blocks separate", 30.0):
        zs = [0.5 + 0.8j, -1.0 + 1.2j, 0.5 - 0.8j, -1.0 - 1.2j]
        for member in (mat4["iJ"], mat6):
            rep = singular_report(member, zs)
            assert rep.factorization_residual_upper <= 1e-8
            assert rep.factorization_residual_lower <= 1e-8
            assert rep.separability_margin > 0.0


def test_criterion_12_wave_operators(fr512, weight512):
    with _Criterion(12, "stationary wave formula matches the time limit", 600.0):
        u = gaussian_vector(fr512.backend)
        pair = scattering_pair(fr512, weight512)
        report = wave_operator_time(pair, u, [50.0, 100.0, 200.0])
        rep = smooth_representative(fr512, weight512, u)
        w_model = wave_operator_model(pair, rep)
        u_model = map_Phi_adjoint(fr512, weight512, w_model)
        final = report.final()
        assert np.linalg.norm(final - u_model) / np.linalg.norm(final) <= 5e-2
        z = 0.35 + 0.9j
        ru = apply_resolvent(fr512, z, u)
        left = wave_operator_model(pair, smooth_representative(fr512, weight512, ru))
        right = model_resolvent(pair.reference, weight512, z, w_model)
        l_k = map_Phi_adjoint(fr512, weight512, left)
        r_k = map_Phi_adjoint(fr512, weight512, right)
        assert np.linalg.norm(l_k - r_k) / np.linalg.norm(r_k) <= 1e-2


def test_criterion_13_strauss_relation(mat4):
    with _Criterion(13, "boundary relation between S and the resolvent", 5.0):
        member = mat4["iI"]
        rng = np.random.default_rng(113)
        for z in _seeded_z(rng, 10):
            f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
            assert strauss_relation_check(member, complex(z), f) <= 1e-9
