"""The numbered acceptance checks, each returning a JSON-ready result.

Results carry no timing information, so reports built from them are
byte-identical for a fixed seed.  Every check draws its randomness from the
master seed through named streams.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import Multivector, blade_product_bruteforce, sign_table
from .dirichlet import (
    Ball, BoundaryData, cone_hitting_probability, liouville_experiment, solve_dirichlet,
)
from .fields import coordinate_field, cr_values, fueter_product, fueter_variable, get_fixture
from .ito import (
    clifford_ito_residual, get_ito_field, loglog_slope, monogenic_reduction_residual,
    residual_scaling,
)
from .montecarlo import substream
from .process import (
    PathConfig, ProcessPath, bm_process, bm_square_compensated, bm_square_minus_t,
    drifted, martingale_test, paravector_norm_squared, reduce_ensemble, sample_bm, sample_ensemble,
)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"criterion": self.number, "name": self.name, "passed": bool(self.passed),
                "details": to_builtin(self.details)}

    def line(self) -> str:
        return f"criterion {self.number:2d} {self.name}: {'PASS' if self.passed else 'FAIL'}"


def to_builtin(obj):
    """Recursively replace numpy scalars and arrays by plain Python values."""
    if isinstance(obj, dict):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _sub_seed(seed: int, label: str) -> int:
    # one derived 64-bit seed per check, so checks stay independent of each other
    return int(substream(seed, ("acceptance", label)).integers(0, 2**63))


# ---------------------------------------------------------------------------
# 1. Algebra


def algebra_exhaustive(max_dim: int = 8) -> CriterionResult:
    mismatches = []
    pairs = 0
    for n in range(1, max_dim + 1):
        table = sign_table(n)
        size = 1 << n
        for a in range(size):
            for b in range(size):
                sign, bits = blade_product_bruteforce(a, b, n)
                pairs += 1
                if bits != a ^ b or sign != table[a, b]:
                    mismatches.append([n, a, b])
    anti_ok = True
    for n in range(1, max_dim + 1):
        gens = [Multivector.basis(n, k) for k in range(1, n + 1)]
        for j, ej in enumerate(gens):
            for k, ek in enumerate(gens):
                want = Multivector.scalar(n, -2.0 if j == k else 0.0)
                if not np.array_equal((ej * ek + ek * ej).coeffs, want.coeffs):
                    anti_ok = False
    return CriterionResult(1, "algebra-exhaustive", not mismatches and anti_ok, {
        "max_dim": max_dim, "blade_pairs": pairs, "sign_mismatches": mismatches[:20],
        "anticommutation_exact": anti_ok,
    })


# ---------------------------------------------------------------------------
# 2. Monogenicity of fixtures


def _interior_points(seed: int, n: int, count: int = 100) -> np.ndarray:
    return substream(seed, ("mono-points", n)).uniform(-1.0, 1.0, size=(count, n + 1))


def fixture_monogenicity(seed: int, h: float = 1e-3, tol_linear: float = 1e-8,
                         tol_products: float = 1e-6) -> CriterionResult:
    """Central-difference residuals of ``D f`` (the analytic residual is reported alongside)."""
    rows = []
    for n in range(1, 5):
        pts = _interior_points(seed, n)
        for k in range(1, n + 1):
            f = fueter_variable(k, n)
            fd = float(np.linalg.norm(cr_values(f, pts, h, method="fd"), axis=-1).max())
            rows.append({"field": f.name, "n": n, "tol": tol_linear, "fd_residual": fd,
                         "analytic_residual": _analytic_residual(f, pts), "passed": fd <= tol_linear})
    for n in (2, 3):
        pts = _interior_points(seed, n)
        for degree in (2, 3):
            for ks in itertools.combinations_with_replacement(range(1, n + 1), degree):
                f = fueter_product(ks, n)
                fd = float(np.linalg.norm(cr_values(f, pts, h, method="fd"), axis=-1).max())
                rows.append({"field": f.name, "n": n, "tol": tol_products, "fd_residual": fd,
                             "analytic_residual": _analytic_residual(f, pts),
                             # central differences are exact up to cubic terms h^2 f'''/6
                             "fd_over_h2": fd / h**2, "passed": fd <= tol_products})
    failures = [f"{r['field']} (n={r['n']})" for r in rows if not r["passed"]]
    return CriterionResult(2, "fixture-monogenicity", not failures, {
        "step": h, "points": 100, "checks": rows, "failures": failures,
    })


def _analytic_residual(f, pts) -> float:
    return float(np.linalg.norm(cr_values(f, pts, method="analytic"), axis=-1).max())


# ---------------------------------------------------------------------------
# 3. Brownian diagnostics


def bm_diagnostics(seed: int, n_paths: int = 100_000, dim: int = 2, n_steps: int = 10,
                   t_max: float = 1.0, threads: int | None = None) -> CriterionResult:
    config = PathConfig(dim, (0.0,) * (dim + 1), t_max, n_steps, _sub_seed(seed, "bm-diagnostics"))
    d = dim + 1
    pairs = [(i, j) for i in range(d) for j in range(i, d)]

    def stat(ens):
        incr = np.diff(ens.states, axis=1)
        qv = [np.sum(incr[..., i] * incr[..., j], axis=1) for i, j in pairs]
        # per-path means keep each sample independent across paths
        return np.concatenate([incr.mean(axis=1), (incr**2).mean(axis=1), (incr**4).mean(axis=1),
                               np.stack(qv, axis=-1)], axis=-1)

    mom = reduce_ensemble(config, n_paths, stat, threads)
    dt = config.dt
    checks = []
    for c in range(d):
        mean, se = mom.mean[c], mom.stderr[c]
        checks.append({"check": f"increment_mean[{c}]", "value": float(mean), "target": 0.0,
                       "stderr": float(se), "band": 3.0, "passed": bool(abs(mean) <= 3 * se)})
    for c in range(d):
        var = mom.mean[d + c] - mom.mean[c] ** 2
        fourth = mom.mean[2 * d + c]
        # stderr of the pooled second moment from the pooled fourth moment
        se = math.sqrt(max(fourth - mom.mean[d + c] ** 2, 0.0) / (n_paths * n_steps))
        checks.append({"check": f"increment_variance[{c}]", "value": float(var), "target": dt,
                       "stderr": se, "band": 4.0, "passed": bool(abs(var - dt) <= 4 * se)})
    for p, (i, j) in enumerate(pairs):
        mean, se = mom.mean[3 * d + p], mom.stderr[3 * d + p]
        target = t_max if i == j else 0.0
        checks.append({"check": f"quadratic_covariation[{i},{j}]", "value": float(mean),
                       "target": target, "stderr": float(se), "band": 3.0,
                       "passed": bool(abs(mean - target) <= 3 * se)})
    return CriterionResult(3, "bm-diagnostics", all(c["passed"] for c in checks), {
        "n_paths": n_paths, "dim": dim, "n_steps": n_steps, "dt": dt, "checks": checks,
    })


# ---------------------------------------------------------------------------
# 4. Martingale suite


def martingale_suite(seed: int, n_paths: int = 100_000, dim: int = 2, s: float = 0.5,
                     t: float = 1.0, n_steps: int = 4, threads: int | None = None) -> CriterionResult:
    """``B`` and ``B^2 - t`` must pass, the drifted control must fail.

    ``B^2 - (1 - n) t`` is reported as well: with the Clifford square,
    ``E[dB^2] = (1 - n) dt``, so that is the compensated process.
    """
    config = PathConfig(dim, (0.0,) * (dim + 1), t, n_steps, _sub_seed(seed, "martingale"))
    ens = sample_ensemble(config, n_paths, threads)
    reports = {
        "bm": martingale_test(ens, s, t, process=bm_process),
        "bm_square_minus_t": martingale_test(ens, s, t, process=bm_square_minus_t),
        "drifted_control": martingale_test(ens, s, t, process=drifted(1, 1.0)),
        "bm_square_compensated": martingale_test(ens, s, t, process=bm_square_compensated),
    }
    passed = (reports["bm"].passed and reports["bm_square_minus_t"].passed
              and not reports["drifted_control"].passed)
    details = {"n_paths": n_paths, "dim": dim, "s": s, "t": t, "functionals": 4,
               "expected": {"bm": True, "bm_square_minus_t": True, "drifted_control": False},
               "informational": ["bm_square_compensated"]}
    for name, rep in reports.items():
        details[name] = {"passed": rep.passed,
                         "failures": [[e.functional, e.component, e.mean, e.stderr]
                                      for e in rep.failures()]}
    return CriterionResult(4, "martingale-suite", passed, details)


# ---------------------------------------------------------------------------
# 5. Itô identity


def _drift_path(seed: int, dim: int, n_steps: int, drift: np.ndarray) -> ProcessPath:
    base = sample_bm(PathConfig(dim, tuple(np.linspace(-0.3, 0.4, dim + 1)), 1.0, n_steps, seed))
    fv = base.times[:, None] * drift
    return ProcessPath(base.times, base.states + fv, base.martingale_part, fv)


def ito_identity(seed: int, n_steps: int = 1000, tol: float = 1e-10) -> CriterionResult:
    rows = []
    cases = [(2, ["z1", "z2", "z1z1", "z1z2", "abs2", "x0", "x1", "const", "t_x1"]),
             (3, ["z1", "z3", "z1z2", "z1z2z3", "abs2", "t_x1"])]
    for dim, names in cases:
        paths = {
            "bm": sample_bm(PathConfig(dim, (0.1,) * (dim + 1), 1.0, n_steps, _sub_seed(seed, f"ito-bm{dim}"))),
            "drifted": _drift_path(_sub_seed(seed, f"ito-drift{dim}"), dim, n_steps,
                                   np.linspace(0.5, -0.5, dim + 1)),
        }
        for name in names:
            f = get_ito_field(name, dim)
            for label, path in paths.items():
                for mode in ("increments", "bm"):
                    rep = clifford_ito_residual(f, path, covariation=mode)
                    gap = rep.extras["clifford_vs_classical"]
                    rows.append({"field": name, "n": dim, "path": label, "covariation": mode,
                                 "gap": gap, "passed": gap <= tol})
    worst = max(r["gap"] for r in rows)
    return CriterionResult(5, "ito-identity", worst <= tol, {
        "tol": tol, "n_steps": n_steps, "max_gap": worst, "checks": len(rows),
        "failures": [r for r in rows if not r["passed"]],
    })


# ---------------------------------------------------------------------------
# 6. Itô residual scaling


def ito_scaling(seed: int, n_paths: int = 1000, n_steps_list=(100, 1000, 10000),
                band=(0.35, 0.65), tol: float = 1e-10, threads: int | None = None) -> CriterionResult:
    f = fueter_product([1, 2], 2)
    rows = residual_scaling(f, 2, n_steps_list, n_paths, _sub_seed(seed, "ito-scaling"),
                            threads=threads)
    slope = loglog_slope([r.dt for r in rows], [r.rms_residual for r in rows])
    gaps = []
    for i in range(5):
        path = sample_bm(PathConfig(2, (0.2, -0.1, 0.3), 1.0, 1000, _sub_seed(seed, f"reduction{i}")))
        reduced = monogenic_reduction_residual(f, path)
        full = clifford_ito_residual(f, path, covariation="bm")
        gaps.append(float(np.linalg.norm(reduced.rhs.coeffs - full.rhs.coeffs)))
    slope_ok = band[0] <= slope <= band[1]
    reduction_ok = max(gaps) <= tol
    return CriterionResult(6, "ito-scaling", slope_ok and reduction_ok, {
        "field": f.name, "n_paths": n_paths, "covariation": "bm",
        "rows": [{"n_steps": r.n_steps, "dt": r.dt, "rms_residual": r.rms_residual,
                  "slope_so_far": None if math.isnan(r.slope_so_far) else r.slope_so_far}
                 for r in rows],
        "slope": slope, "band": list(band), "slope_passed": slope_ok,
        "reduction_gaps": gaps, "reduction_tol": tol, "reduction_passed": reduction_ok,
    })


# ---------------------------------------------------------------------------
# 7. Second moment of |B|


def bm_second_moment(seed: int, n_paths: int = 100_000, dim: int = 2,
                     start=(0.5, -0.3, 0.2), t: float = 1.0,
                     threads: int | None = None) -> CriterionResult:
    config = PathConfig(dim, tuple(start), t, 10, _sub_seed(seed, "second-moment"))
    mom = reduce_ensemble(config, n_paths, lambda ens: paravector_norm_squared(ens.states[:, -1]),
                          threads)
    target = float(np.sum(np.square(start))) + (dim + 1) * t
    mean, se = float(mom.mean), float(mom.stderr)
    return CriterionResult(7, "bm-second-moment", abs(mean - target) <= 3 * se, {
        "n_paths": n_paths, "dim": dim, "t": t, "estimate": mean, "stderr": se, "target": target,
    })


# ---------------------------------------------------------------------------
# 8. Dirichlet solver


DIRICHLET_POINTS = [
    (0.0, 0.0, 0.0), (0.3, 0.1, -0.2), (-0.5, 0.2, 0.1), (0.1, -0.6, 0.3), (0.2, 0.2, 0.6),
]


def dirichlet_check(seed: int, n_walks: int = 100_000, threads: int | None = None) -> CriterionResult:
    ball = Ball((0.0, 0.0, 0.0), 1.0)
    rows = []
    fields_ = [get_fixture("z1", 2), coordinate_field(0, 2), coordinate_field(1, 2),
               coordinate_field(2, 2)]
    sub = _sub_seed(seed, "dirichlet")
    for f in fields_:
        ests = solve_dirichlet(ball, BoundaryData.from_field(f), DIRICHLET_POINTS, n_walks,
                               seed=sub, threads=threads)
        for est in ests:
            exact = f.values(np.asarray(est.point))
            gap = np.abs(est.value.mean.coeffs - exact)
            ok = bool(np.all(gap <= 3 * est.value.stderr.coeffs))
            rows.append({"field": f.name, "point": list(est.point),
                         "estimate": [float(v) for v in est.value.mean.coeffs],
                         "stderr": [float(v) for v in est.value.stderr.coeffs],
                         "exact": [float(v) for v in exact], "mean_steps": est.mean_steps,
                         "passed": ok})
    # stderr scaling at one off-centre point, with independent walks per size
    point = [DIRICHLET_POINTS[1]]
    data = BoundaryData.from_field(coordinate_field(1, 2))
    small = solve_dirichlet(ball, data, point, n_walks // 4, seed=sub + 1, threads=threads)[0]
    large = solve_dirichlet(ball, data, point, n_walks, seed=sub + 2, threads=threads)[0]
    ratio = float(large.value.stderr.coeffs[0] / small.value.stderr.coeffs[0])
    ratio_ok = 0.4 <= ratio <= 0.6
    # ball of radius 1 about (1,0,0): the centre value of z1 is -e1
    shifted = solve_dirichlet(Ball((1.0, 0.0, 0.0), 1.0), BoundaryData.from_field(fields_[0]),
                              [(1.0, 0.0, 0.0)], n_walks, seed=sub + 3, threads=threads)[0]
    target = -Multivector.basis(2, 1)
    shifted_ok = shifted.value.within(target, 3.0)
    passed = all(r["passed"] for r in rows) and ratio_ok and shifted_ok
    return CriterionResult(8, "dirichlet", passed, {
        "n_walks": n_walks, "estimates": rows,
        "stderr_ratio_quadrupled": ratio, "stderr_ratio_band": [0.4, 0.6],
        "shifted_ball": {"estimate": shifted.value.to_dict(), "target": [float(v) for v in target.coeffs],
                         "passed": shifted_ok},
        "failures": [f"{r['field']} at {r['point']}" for r in rows if not r["passed"]],
    })


# ---------------------------------------------------------------------------
# 9. Cone hitting surrogate


def cone_check(seed: int, n_walks: int = 4000, alpha: float = math.pi / 2, h: float = 1.0,
               threads: int | None = None) -> CriterionResult:
    sub = _sub_seed(seed, "cone")
    ests = [cone_hitting_probability(alpha, h, k, n_walks, sub, threads=threads) for k in (1, 2, 3)]
    seps = []
    for a, b in zip(ests, ests[1:]):
        seps.append((a.probability - b.probability) / math.hypot(a.stderr, b.stderr))
    ratios = [b.probability / a.probability for a, b in zip(ests, ests[1:])]
    passed = bool(all(s > 3.0 for s in seps))
    return CriterionResult(9, "cone-surrogate", passed, {
        "alpha": alpha, "h": h, "n_walks": n_walks,
        "estimates": [e.to_dict() for e in ests],
        "separations_sigma": seps,
        # a geometric decay p_k <= C a^k shows up as successive ratios below 1
        "successive_ratios": ratios, "a_estimate": max(ratios),
    })


# ---------------------------------------------------------------------------
# 10. Liouville driver


def liouville_check(seed: int, n_walks: int = 100_000, d: float = 1.0, t_grid=(1.0, 4.0, 16.0),
                    threads: int | None = None) -> CriterionResult:
    rows = liouville_experiment(d, t_grid, n_walks, _sub_seed(seed, "liouville"), threads=threads)
    within = [bool(abs(r.probability - r.closed_form) <= 3 * r.stderr) for r in rows]
    decreasing = all(b.probability < a.probability for a, b in zip(rows, rows[1:]))
    return CriterionResult(10, "liouville", all(within) and decreasing, {
        "d": d, "n_walks": n_walks, "rows": [r.to_dict() for r in rows],
        "within_3_stderr": within, "strictly_decreasing": decreasing,
    })


CRITERIA: dict[int, Callable] = {
    1: lambda seed, threads: algebra_exhaustive(),
    2: lambda seed, threads: fixture_monogenicity(seed),
    3: lambda seed, threads: bm_diagnostics(seed, threads=threads),
    4: lambda seed, threads: martingale_suite(seed, threads=threads),
    5: lambda seed, threads: ito_identity(seed),
    6: lambda seed, threads: ito_scaling(seed, threads=threads),
    7: lambda seed, threads: bm_second_moment(seed, threads=threads),
    8: lambda seed, threads: dirichlet_check(seed, threads=threads),
    9: lambda seed, threads: cone_check(seed, threads=threads),
    10: lambda seed, threads: liouville_check(seed, threads=threads),
}

RUNTIME_LIMITS = {1: 10.0, 2: 5.0, 3: 60.0, 4: 60.0, 5: 10.0, 6: 120.0, 7: 30.0, 8: 60.0,
                  9: 60.0, 10: 60.0}


__all__ = [
    "CriterionResult", "CRITERIA", "RUNTIME_LIMITS", "algebra_exhaustive", "fixture_monogenicity",
    "bm_diagnostics", "martingale_suite", "ito_identity", "ito_scaling", "bm_second_moment",
    "dirichlet_check", "cone_check", "liouville_check", "DIRICHLET_POINTS",
]
