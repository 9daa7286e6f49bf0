"""Batch front-end: parse problem files, run verification suites, emit reports.

A problem file is a JSON document with sections

    backend     {"type": "matrix", "matrix": [[...]]}
                {"type": "friedrichs", "x_lo": -4, "x_hi": 4, "n": 512}
                {"type": "quadrature", "nodes": [...], "weights": [...]}
    alpha       {"columns": [[...], ...], "m": [[...]]} or {"dense": [[...]]}
    kappa       {"preset": "zero"|"iI"|"-iI"|"iJ"|"custom", "J": ..., "matrix": ...}
    grid        {"X": 40.0, "N": 4096}
    boundary    optional overrides of the smoothness-ladder settings
    tolerances  optional per-check overrides
    u           optional test vector: {"values": [...]} or {"gaussian": [center, width]}
    seed        integer controlling all random sampling

Complex numbers are written as [re, im] pairs.  Reports are JSON (canonical)
or CSV; every record carries the tolerance it was judged against.  Exit
status: 0 all checks passed, 1 at least one tolerance failed, 2 input error.
"""

import argparse
import csv
import hashlib
import io
import json
import os
import sys

# Cap BLAS parallelism before numpy is pulled in by the sibling modules.
_threads = os.environ.get("FUNCMODEL_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np

from .errors import FuncModelError, ValidationError
from .operators import (OperatorBackend, PerturbationFactor, KappaParameter,
                        build_family, apply_resolvent)
from .charfn import (kind_S, kind_theta, eval_charfn, S_boundary_samples,
                     contractivity_report, strauss_relation_check)
from .pg import SignatureProjections, pg_forward, pg_inverse
from .dilation import interior_vector, dilation_inner, dilation_resolvent, dilation_compress_check
from .modelspace import AxisGrid, SpectralWeight, ModelVector, map_Phi, map_Phi_adjoint, model_norm_sq
from . import spectral

COMMANDS = ("charfn", "pg-check", "dilation-check", "model-check",
            "smooth", "scatter", "singular-check", "all")

DEFAULT_TOLERANCES = {
    "charfn.contractivity": 1e-10,
    "charfn.inner": 1e-8,
    "charfn.strauss": 1e-9,
    "pg.roundtrip": 1e-10,
    "pg.proposition": 1e-8,
    "dilation.compression": 1e-8,
    "dilation.symmetry": 1e-9,
    "model.fpm": 1e-6,
    "model.resolvent": 1e-2,
    "smooth.classification": 0.5,
    "smooth.new_representation": 1e-2,
    "scatter.wave": 5e-2,
    "scatter.intertwining": 1e-2,
    "singular.factorization": 1e-8,
    "singular.margin": 0.0,
}

# distinct seed streams per suite so report contents do not depend on the
# order in which suites run
_SUITE_STREAM = {"charfn": 1, "pg": 2, "dilation": 3, "model": 4,
                 "smooth": 5, "scatter": 6, "singular": 7}


class Problem:
    """Parsed problem file: a family member plus run configuration."""

    def __init__(self, member, grid, tolerances, seed, u, digest, smooth_settings):
        self.member = member
        self.grid = grid
        self.tolerances = tolerances
        self.seed = seed
        self.u = u
        self.digest = digest
        self.smooth_settings = smooth_settings
        self._weight = None

    @property
    def weight(self):
        if self._weight is None:
            self._weight = SpectralWeight(self.member, self.grid)
        return self._weight

    def rng(self, suite: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, _SUITE_STREAM[suite]])

    def tolerance(self, name: str, scale: float) -> float:
        base = self.tolerances.get(name, DEFAULT_TOLERANCES[name])
        return base * scale


def _as_complex(data):
    """Read nested lists with [re, im] leaves into a complex ndarray."""
    def walk(node):
        if isinstance(node, (int, float)):
            return complex(node)
        if isinstance(node, list):
            if len(node) == 2 and all(isinstance(v, (int, float)) for v in node):
                return complex(node[0], node[1])
            return [walk(v) for v in node]
        raise ValidationError(f"cannot read {node!r} as a complex entry")
    return np.asarray(walk(data), dtype=complex)


def _parse_backend(section) -> OperatorBackend:
    kind = section.get("type")
    if kind == "matrix":
        return OperatorBackend.from_matrix(_as_complex(section["matrix"]))
    if kind == "friedrichs":
        return OperatorBackend.gauss_legendre(
            float(section["x_lo"]), float(section["x_hi"]), int(section["n"]))
    if kind == "quadrature":
        return OperatorBackend.from_quadrature(
            np.asarray(section["nodes"], dtype=float),
            np.asarray(section["weights"], dtype=float))
    raise ValidationError(f"unknown backend type {kind!r}")


def _parse_alpha(section, backend) -> PerturbationFactor:
    if "dense" in section:
        return PerturbationFactor.from_dense(_as_complex(section["dense"]))
    if "profiles" in section:
        # each profile [p, center, width] is the column x^p exp(-((x-c)/w)^2)
        if not backend.is_friedrichs:
            raise ValidationError("profile columns need a Friedrichs backend")
        cols = []
        for prof in section["profiles"]:
            p, center, width = (float(v) for v in prof)
            cols.append(backend.embed(
                lambda x, p=p, c=center, w=width: x ** p * np.exp(-((x - c) / w) ** 2)))
        return PerturbationFactor.from_columns(
            backend, np.stack(cols, axis=1), _as_complex(section["m"]))
    cols = _as_complex(section["columns"])
    if cols.ndim != 2:
        raise ValidationError("alpha columns must form a 2-d array")
    if cols.shape[0] != backend.n and cols.shape[1] == backend.n:
        cols = cols.T
    return PerturbationFactor.from_columns(backend, cols, _as_complex(section["m"]))


def _parse_kappa(section, rank: int) -> KappaParameter:
    preset = section.get("preset", "custom")
    if preset == "zero":
        return KappaParameter.zero(rank)
    if preset == "iI":
        return KappaParameter.dissipative(rank)
    if preset == "-iI":
        return KappaParameter.anti_dissipative(rank)
    if preset == "iJ":
        # J is a real involution: a flat list of +-1 (diagonal) or a matrix
        J = np.asarray(section["J"], dtype=float)
        if J.ndim == 1:
            J = np.diag(J)
        return KappaParameter.from_involution(J)
    if preset == "custom":
        return KappaParameter(_as_complex(section["matrix"]))
    raise ValidationError(f"unknown kappa preset {preset!r}")


def _parse_u(section, backend):
    if section is None:
        return None
    if "values" in section:
        u = _as_complex(section["values"])
        if u.shape != (backend.n,):
            raise ValidationError("u has the wrong length for the backend")
        return u
    if "gaussian" in section:
        if not backend.is_friedrichs:
            raise ValidationError("gaussian test vectors need a Friedrichs backend")
        center, width = (float(v) for v in section["gaussian"])
        u = backend.embed(lambda x: np.exp(-((x - center) / width) ** 2))
        return u / np.linalg.norm(u)
    raise ValidationError("u must provide 'values' or 'gaussian'")


def parse_problem(path: str) -> Problem:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"problem file is not valid JSON: {exc}") from exc
    backend = _parse_backend(doc["backend"])
    alpha = _parse_alpha(doc["alpha"], backend)
    kappa = _parse_kappa(doc.get("kappa", {"preset": "iI"}), alpha.rank)
    member = build_family(backend, alpha, kappa)
    grid_doc = doc.get("grid", {})
    grid = AxisGrid(float(grid_doc.get("X", 40.0)), int(grid_doc.get("N", 4096)))
    boundary = doc.get("boundary", {})
    allowed = {f.name for f in spectral.SmoothSettings.__dataclass_fields__.values()}
    bad = set(boundary) - allowed
    if bad:
        raise ValidationError(f"unknown boundary settings: {sorted(bad)}")
    settings = spectral.SmoothSettings(**boundary) if boundary else None
    tolerances = {str(k): float(v) for k, v in doc.get("tolerances", {}).items()}
    unknown = set(tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ValidationError(f"unknown tolerance names: {sorted(unknown)}")
    seed = int(doc.get("seed", 0))
    u = _parse_u(doc.get("u"), backend)
    digest = hashlib.sha256(raw).hexdigest()
    return Problem(member, grid, tolerances, seed, u, digest, settings)


def _default_u(problem: Problem, rng: np.random.Generator) -> np.ndarray:
    if problem.u is not None:
        return problem.u
    backend = problem.member.backend
    if backend.is_friedrichs:
        u = backend.embed(lambda x: np.exp(-(x - 0.3) ** 2))
    else:
        u = rng.standard_normal(backend.n) + 1j * rng.standard_normal(backend.n)
    return u / np.linalg.norm(u)


def _record(name, inputs, residual, tolerance, passed=None):
    residual = float(residual)
    if passed is None:
        passed = residual <= tolerance
    return {"name": name, "inputs": inputs, "residual": residual,
            "tolerance": float(tolerance), "passed": bool(passed)}


def _sample_z(rng, half_plane: int, n: int, spread: float = 3.0) -> np.ndarray:
    re = rng.uniform(-spread, spread, n)
    im = half_plane * rng.uniform(0.6, 1.8, n)
    return re + 1j * im


def _regular_points(problem, rng, half_plane, n, min_gap=0.25):
    """Seeded z samples staying away from eigenvalues of the member."""
    lam = np.linalg.eigvals(problem.member.dense_matrix())
    out = []
    while len(out) < n:
        z = complex(_sample_z(rng, half_plane, 1)[0])
        if np.min(np.abs(lam - z)) >= min_gap:
            out.append(z)
    return out


# ---------------------------------------------------------------------------
# suites


def suite_charfn(problem: Problem, scale: float):
    rng = problem.rng("charfn")
    member = problem.member
    records = []
    zs = _sample_z(rng, +1, 20)
    rep = contractivity_report(member.dissipative_part(), kind_S(), zs)
    tol = problem.tolerance("charfn.contractivity", scale)
    records.append(_record("charfn.contractivity", f"20 points in C+", max(rep.worst - 1.0, 0.0), tol))
    if member.backend.is_friedrichs:
        # inside the continuous band Im M = pi rho > 0 makes the boundary
        # values strict contractions, so only contractivity is checked
        lo, hi = member.backend.span()
        pad = 0.05 * (hi - lo)
        k = np.sort(rng.uniform(lo + pad, hi - pad, 50))
        s = S_boundary_samples(member.dissipative_part(), k)
        worst = max(max(float(np.linalg.norm(m, 2)) - 1.0, 0.0) for m in s)
        records.append(_record("charfn.boundary_contraction", "50 in-band k", worst,
                               problem.tolerance("charfn.inner", scale)))
    else:
        # pure point A: the boundary values are unitary
        k = np.sort(rng.uniform(-8.0, 8.0, 50))
        s = S_boundary_samples(member.dissipative_part(), k)
        eye = np.eye(member.rank)
        worst = max(float(np.linalg.norm(m.conj().T @ m - eye, 2)) for m in s)
        records.append(_record("charfn.inner", "50 real k", worst,
                               problem.tolerance("charfn.inner", scale)))
    diss = member.with_kappa(KappaParameter.dissipative(member.rank))
    worst = 0.0
    for z in _sample_z(rng, +1, 10):
        f = rng.standard_normal(member.backend.n) + 1j * rng.standard_normal(member.backend.n)
        worst = max(worst, strauss_relation_check(diss, complex(z), f / np.linalg.norm(f)))
    records.append(_record("charfn.strauss", "10 seeded (z, f)", worst,
                           problem.tolerance("charfn.strauss", scale)))
    return records


def suite_pg(problem: Problem, scale: float):
    rng = problem.rng("pg")
    member = problem.member
    r = member.rank
    if member.kappa.is_iJ:
        J = member.kappa.J
    else:
        J = np.diag([1.0 if i % 2 == 0 else -1.0 for i in range(r)])
    sig = SignatureProjections.from_involution(J)
    worst = 0.0
    for _ in range(20):
        s = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        s *= 0.8 / max(np.linalg.norm(s, 2), 1e-12)
        theta = pg_inverse(s, sig)
        worst = max(worst, float(np.linalg.norm(pg_forward(theta, sig) - s)))
    records = [_record("pg.roundtrip", "20 seeded contractions", worst,
                       problem.tolerance("pg.roundtrip", scale))]
    if member.kappa.is_iJ:
        worst = 0.0
        diss = member.dissipative_part()
        for z in _sample_z(rng, +1, 10):
            theta = eval_charfn(member, kind_theta(J), complex(z))
            s_ref = eval_charfn(diss, kind_S(), complex(z))
            worst = max(worst, float(np.linalg.norm(pg_forward(theta, sig) - s_ref)))
        records.append(_record("pg.proposition", "10 points in C+", worst,
                               problem.tolerance("pg.proposition", scale)))
    return records


def suite_dilation(problem: Problem, scale: float):
    rng = problem.rng("dilation")
    member = problem.member.dissipative_part()
    n = member.backend.n
    worst = 0.0
    for z in _sample_z(rng, -1, 10):
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst = max(worst, dilation_compress_check(member, complex(z), u / np.linalg.norm(u)))
    records = [_record("dilation.compression", "10 seeded (z in C-, u)", worst,
                       problem.tolerance("dilation.compression", scale))]
    # symmetry <Lh, g> = <h, Lg> on domain vectors h = R(z)f, g = R(w)e:
    # Lh = f + z h, so both sides reduce to inner products of known vectors.
    worst = 0.0
    for _ in range(5):
        z, w = complex(_sample_z(rng, -1, 1)[0]), complex(_sample_z(rng, +1, 1)[0])
        uf = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        ue = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        f = interior_vector(member, uf / np.linalg.norm(uf))
        e = interior_vector(member, ue / np.linalg.norm(ue))
        h = dilation_resolvent(member, z, f)
        g = dilation_resolvent(member, w, e)
        lhs = dilation_inner(f, g) + z * dilation_inner(h, g)
        rhs = dilation_inner(h, e) + np.conj(w) * dilation_inner(h, g)
        worst = max(worst, abs(lhs - rhs))
    records.append(_record("dilation.symmetry", "5 seeded resolvent pairs", worst,
                           problem.tolerance("dilation.symmetry", scale)))
    return records


def suite_model(problem: Problem, scale: float):
    rng = problem.rng("model")
    member = problem.member
    weight = problem.weight
    u = _default_u(problem, rng)
    worst = 0.0
    for z0 in _regular_points(problem, rng, -1, 3):
        res = spectral.fpm_identity_residual(member, weight, z0, u)
        worst = max(worst, *res)
    records = [_record("model.fpm", "3 seeded z0 in C-", worst,
                       problem.tolerance("model.fpm", scale))]
    phi_u = map_Phi(member, weight, interior_vector(member, u))
    worst = 0.0
    for half in (+1, -1):
        for z0 in _regular_points(problem, rng, half, 3):
            lhs = spectral.model_resolvent(member, weight, z0, phi_u)
            w = apply_resolvent(member, z0, u)
            ref = map_Phi(member, weight, interior_vector(member, w))
            diff = ModelVector(lhs.g_minus - ref.g_minus, lhs.g_plus - ref.g_plus)
            num = np.sqrt(abs(model_norm_sq(weight, diff)))
            den = np.sqrt(abs(model_norm_sq(weight, ref)))
            worst = max(worst, num / max(den, 1e-300))
    records.append(_record("model.resolvent", "3 seeded z0 per half-plane", worst,
                           problem.tolerance("model.resolvent", scale)))
    return records


def suite_smooth(problem: Problem, scale: float):
    rng = problem.rng("smooth")
    member = problem.member
    records = []
    tol_cls = problem.tolerance("smooth.classification", scale)
    if not member.backend.is_friedrichs:
        lam, vecs = np.linalg.eig(member.dense_matrix())
        order = np.argsort(-np.abs(lam.imag))
        checked = 0
        worst = 0.0
        for idx in order:
            if checked >= 3 or abs(lam[idx].imag) < 0.1:
                break
            v = vecs[:, idx]
            if np.linalg.norm(member.alpha.apply(v)) < 1e-8:
                continue
            verdict = spectral.smooth_membership(member, v, problem.smooth_settings)
            expected = (False, True) if lam[idx].imag > 0 else (True, False)
            ok = (verdict.in_N_plus, verdict.in_N_minus) == expected
            worst = max(worst, 0.0 if ok else 1.0)
            checked += 1
        records.append(_record("smooth.classification",
                               f"{checked} non-real eigenvectors", worst, tol_cls))
        return records
    u = _default_u(problem, rng)
    verdict = spectral.smooth_membership(member, u, problem.smooth_settings)
    records.append(_record("smooth.classification",
                           f"verdict (+,-) = ({verdict.in_N_plus}, {verdict.in_N_minus})",
                           0.0 if verdict.determined else 1.0, tol_cls))
    if verdict.smooth:
        zs = [complex(z) for z in np.concatenate([_sample_z(rng, +1, 2), _sample_z(rng, -1, 2)])]
        res = spectral.new_representation_residual(member, problem.weight, u, zs)
        records.append(_record("smooth.new_representation", "4 seeded z", res,
                               problem.tolerance("smooth.new_representation", scale)))
    return records


def suite_scatter(problem: Problem, scale: float):
    rng = problem.rng("scatter")
    member = problem.member
    records = []
    if not member.backend.is_friedrichs:
        # matrix members with non-real spectrum have trivial smooth sets, so
        # there is nothing for the wave operator to act on
        records.append(_record("scatter.skipped", "matrix backend", 0.0, 1.0))
        return records
    weight = problem.weight
    u = _default_u(problem, rng)
    pair = spectral.scattering_pair(member, weight)
    report = spectral.wave_operator_time(pair, u, [50.0, 100.0, 200.0])
    rep_u = spectral.smooth_representative(member, weight, u)
    w_model = spectral.wave_operator_model(pair, rep_u)
    u_model = map_Phi_adjoint(member, weight, w_model)
    final = report.final()
    rel = np.linalg.norm(final - u_model) / np.linalg.norm(final)
    records.append(_record("scatter.wave", "T ladder 50/100/200", rel,
                           problem.tolerance("scatter.wave", scale)))
    z = complex(_sample_z(rng, +1, 1)[0])
    ru = apply_resolvent(member, z, u)
    left = spectral.wave_operator_model(pair, spectral.smooth_representative(member, weight, ru))
    right = spectral.model_resolvent(pair.reference, weight, z, w_model)
    l_k = map_Phi_adjoint(member, weight, left)
    r_k = map_Phi_adjoint(member, weight, right)
    rel = np.linalg.norm(l_k - r_k) / np.linalg.norm(r_k)
    records.append(_record("scatter.intertwining", f"z = {z:.3f}", rel,
                           problem.tolerance("scatter.intertwining", scale)))
    return records


def suite_singular(problem: Problem, scale: float, strict: bool = True):
    member = problem.member
    if not member.kappa.is_iJ:
        if strict:
            raise ValidationError("singular-check requires kappa = iJ")
        return [_record("singular.skipped", "kappa is not iJ", 0.0, 1.0)]
    rng = problem.rng("singular")
    zs = np.concatenate([_sample_z(rng, +1, 3), _sample_z(rng, -1, 3)])
    rep = spectral.singular_report(member, zs)
    tol = problem.tolerance("singular.factorization", scale)
    records = [
        _record("singular.factorization_upper", "3 seeded z in C+",
                rep.factorization_residual_upper, tol),
        _record("singular.factorization_lower", "3 seeded z in C-",
                rep.factorization_residual_lower, tol),
        _record("singular.margin", "C+ sampling lattice", rep.separability_margin,
                problem.tolerance("singular.margin", scale),
                passed=rep.separability_margin > 0.0),
    ]
    return records


def run_command(name: str, problem: Problem, tol_scale: float = 1.0) -> dict:
    """Execute one named suite (or all applicable) and assemble the report."""
    suites = {
        "charfn": lambda: suite_charfn(problem, tol_scale),
        "pg-check": lambda: suite_pg(problem, tol_scale),
        "dilation-check": lambda: suite_dilation(problem, tol_scale),
        "model-check": lambda: suite_model(problem, tol_scale),
        "smooth": lambda: suite_smooth(problem, tol_scale),
        "scatter": lambda: suite_scatter(problem, tol_scale),
        "singular-check": lambda: suite_singular(problem, tol_scale),
    }
    if name == "all":
        records = []
        for key in ("charfn", "pg-check", "dilation-check", "model-check",
                    "smooth", "scatter"):
            records.extend(suites[key]())
        records.extend(suite_singular(problem, tol_scale, strict=False))
    elif name in suites:
        records = suites[name]()
    else:
        raise ValidationError(f"unknown command {name!r}")
    passed = sum(1 for r in records if r["passed"])
    return {
        "command": name,
        "problem_digest": problem.digest,
        "seed": problem.seed,
        "tol_scale": tol_scale,
        "records": records,
        "summary": {"total": len(records), "passed": passed,
                    "failed": len(records) - passed},
    }


def format_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["name", "inputs", "residual", "tolerance", "passed"])
        for r in report["records"]:
            writer.writerow([r["name"], r["inputs"], repr(r["residual"]),
                             repr(r["tolerance"]), r["passed"]])
        return buf.getvalue()
    raise ValidationError(f"unknown format {fmt!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="funcmodel",
                                     description="run functional-model verification suites")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", required=True, help="path to a JSON problem file")
    parser.add_argument("--out", default=None, help="report path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the seed from the problem file")
    parser.add_argument("--tol-scale", type=float, default=1.0)
    args = parser.parse_args(argv)
    try:
        problem = parse_problem(args.problem)
        if args.seed is not None:
            problem.seed = args.seed
        report = run_command(args.command, problem, args.tol_scale)
    except (FuncModelError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = format_report(report, args.format)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report["summary"]["failed"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
