"""Itô integrals on grid paths and the Itô formula as a checkable identity.

Both sides of the formula are evaluated on the same discrete path with
left-point sums.  Second-order increment products ``dM_i dM_j`` are supplied
by a covariation mode:

``"increments"``
    raw products of martingale increments (pathwise test of the formula);
``"bm"``
    ``delta_ij dt``, the Brownian specialisation ``<X_i, X_j>_t = delta_ij t``.

The Clifford form regroups the classical right-hand side with the 1-forms
``dZ_0 = dX_0`` and ``dZ_k = dX_k - e_k dX_0``; on any path it must agree
with the componentwise classical sum to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import Multivector, left_unit_product, right_unit_product
from .fields import CliffordField, _dirac_from_partials, get_fixture, monogenicity_check
from .montecarlo import Moments, map_blocks
from .process import PathConfig, PathEnsemble, ProcessPath, _bm_block

COVARIATION_MODES = ("increments", "bm")


class ItoError(ValueError):
    """Missing derivatives, missing decomposition or a failed precondition."""


class NotMonogenicError(ItoError):
    pass


# ---------------------------------------------------------------------------
# Integrals


def adapted_integrand(path: ProcessPath, fn: Callable[[int, np.ndarray, np.ndarray], object]) -> np.ndarray:
    """Left-point integrand values built from read-only path prefixes.

    ``fn(k, times[:k+1], states[:k+1])`` sees nothing after ``t_k``, so the
    resulting integrand is adapted by construction.  Returns ``(steps, 2**n)``.
    """
    times = path.times.copy()
    states = path.states.copy()
    times.flags.writeable = False
    states.flags.writeable = False
    out = []
    for k in range(path.n_steps):
        v = fn(k, times[: k + 1], states[: k + 1])
        out.append(v.coeffs if isinstance(v, Multivector) else np.asarray(v, dtype=float))
    return np.stack(out)


def _riemann(integrand, driver) -> np.ndarray:
    f = integrand.coeffs if isinstance(integrand, Multivector) else np.asarray(integrand, dtype=float)
    m = np.asarray(driver, dtype=float)
    dm = np.diff(m, axis=-1)
    steps = dm.shape[-1]
    if f.shape[-2] == steps + 1:
        f = f[..., :-1, :]  # the value at the final grid time never multiplies an increment
    if f.shape[-2] != steps:
        raise ValueError(f"integrand has {f.shape[-2]} values for {steps} driver increments")
    return np.einsum("...kc,...k->...c", f, dm)


def ito_integral(integrand, driver) -> Multivector:
    """Left-point sum ``sum_k F(t_k) (M(t_{k+1}) - M(t_k))``.

    ``integrand`` holds ``F(t_k)`` as coefficient rows ``(steps or steps+1, 2**n)``;
    ``driver`` is the real martingale component ``M_i`` on the grid.
    """
    f = np.asarray(integrand, dtype=float)
    return Multivector(int(f.shape[-1]).bit_length() - 1, _riemann(f, driver))


def stieltjes_integral(integrand, driver) -> Multivector:
    """Left-point Lebesgue-Stieltjes sum against a finite-variation component ``A_i``."""
    return ito_integral(integrand, driver)


# ---------------------------------------------------------------------------
# Time-dependent fields


@dataclass(frozen=True)
class TimeField:
    """``f(t, x)`` with analytic ``f_t``, spatial gradient and Hessian.

    All callables take ``(t, x)`` with ``t`` broadcastable against ``x[..., 0]``.
    """

    dim: int
    func: Callable
    f_t: Callable
    grad: Callable
    hess: Callable
    name: str = "field"
    static_field: CliffordField | None = None

    def derivatives(self, t, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(f_t, grad, hess)`` at left points, sharing work when possible."""
        if self.static_field is not None:
            _, g, h = self.static_field.jet_values(x)
            return np.zeros(np.shape(x)[:-1] + (1 << self.dim,)), g, h
        return self.f_t(t, x), self.grad(t, x), self.hess(t, x)

    @classmethod
    def static(cls, f: CliffordField) -> TimeField:
        if f.grad is None or f.hess is None:
            raise ItoError(f"{f.name}: Itô formula needs analytic first and second derivatives")
        size = f.size
        return cls(
            dim=f.dim,
            func=lambda t, x: f.values(x),
            f_t=lambda t, x: np.zeros(np.shape(x)[:-1] + (size,)),
            grad=lambda t, x: f.gradient(x),
            hess=lambda t, x: f.hessian(x),
            name=f.name,
            static_field=f,
        )


def as_time_field(f) -> TimeField:
    if isinstance(f, TimeField):
        return f
    if isinstance(f, CliffordField):
        return TimeField.static(f)
    raise ItoError(f"cannot use {type(f).__name__} as an Itô integrand field")


def time_times_coordinate(i: int, dim: int) -> TimeField:
    """Scalar ``f(t, x) = t * x_i``."""
    size = 1 << dim

    def scalar(v):
        out = np.zeros(np.shape(v) + (size,))
        out[..., 0] = v
        return out

    def grad(t, x):
        g = np.zeros(x.shape[:-1] + (dim + 1, size))
        g[..., i, 0] = t
        return g

    return TimeField(
        dim=dim,
        func=lambda t, x: scalar(t * x[..., i]),
        f_t=lambda t, x: scalar(x[..., i] + 0.0 * t),
        grad=grad,
        hess=lambda t, x: np.zeros(x.shape[:-1] + (dim + 1, dim + 1, size)),
        name=f"t*x{i}",
    )


TIME_FIXTURES: dict[str, Callable[[int], TimeField]] = {
    "t_x1": lambda n: time_times_coordinate(1, n),
}


def get_ito_field(name: str, dim: int) -> TimeField:
    if name in TIME_FIXTURES:
        return TIME_FIXTURES[name](dim)
    return TimeField.static(get_fixture(name, dim))


# ---------------------------------------------------------------------------
# Formula terms


def covariation_increments(dm: np.ndarray, dt: np.ndarray, mode: str) -> np.ndarray:
    """Matrix ``C[..., k, j, i]`` standing in for ``dM_j dM_i`` at step ``k``."""
    if mode == "increments":
        return dm[..., :, None] * dm[..., None, :]
    if mode == "bm":
        d = dm.shape[-1]
        return np.broadcast_to(dt[:, None, None] * np.eye(d), dm.shape[:-1] + (d, d))
    raise ValueError(f"covariation mode must be one of {COVARIATION_MODES}, got {mode!r}")


def one_forms(dx: np.ndarray, dz_sign: int = -1) -> np.ndarray:
    """Clifford 1-forms ``dZ_0 = dX_0`` and ``dZ_k = dX_k + dz_sign * e_k dX_0``.

    ``dx`` has shape ``(..., n+1)``; the result is ``(..., n+1, 2**n)``.
    """
    n = dx.shape[-1] - 1
    out = np.zeros(dx.shape + (1 << n,))
    out[..., :, 0] = dx
    for k in range(1, n + 1):
        out[..., k, 1 << (k - 1)] = dz_sign * dx[..., 0]
    return out


def _unit(k: int, x: np.ndarray, side: str) -> np.ndarray:
    # e_k x for left-handed forms, x e_k for right-handed ones
    return left_unit_product(k, x) if side == "left" else right_unit_product(x, k)


def _dirac(d: np.ndarray, side: str) -> np.ndarray:
    return d[..., 0, :] + _dirac_from_partials(d, side)


# Every 1-form coefficient is real, so products with dZ_k reduce to real
# scalings plus one unit-vector product.  The helpers below take sums over
# steps that were formed before those (linear) unit products are applied.


def _first_from_sums(g0: np.ndarray, gd: np.ndarray, dz_sign: int, side: str) -> np.ndarray:
    # g0[i] = sum dX_0 d_i f,  gd[i] = sum dX_i d_i f
    out = _dirac(g0, side)
    for k in range(1, g0.shape[-2]):
        out = out + gd[..., k, :] + dz_sign * _unit(k, g0[..., k, :], side)
    return out


def _second_from_sums(a: np.ndarray, b: np.ndarray, dz_sign: int, side: str,
                      include_j0: bool) -> np.ndarray:
    # a[j, i] = sum C_ji d_j d_i f,  b[j, i] = sum C_0i d_j d_i f
    d = a.shape[-2]
    out = np.zeros(a.shape[:-3] + a.shape[-1:])
    for i in range(d):
        out = out + _dirac(b[..., :, i, :], side)
        for j in range(0 if include_j0 else 1, d):
            out = out + a[..., j, i, :]
            if j >= 1:
                out = out + dz_sign * _unit(j, b[..., j, i, :], side)
    return out


def clifford_first_order(grad: np.ndarray, dx: np.ndarray, dz_sign: int = -1,
                         side: str = "left") -> np.ndarray:
    """``dZ_0 (D f) + sum_{k>=1} dZ_k d_k f`` per step.

    ``side="right"`` gives ``(f D) dZ_0 + sum_k d_k f dZ_k``.  ``grad`` is
    ``(..., n+1, 2**n)`` and ``dx`` the matching increments ``(..., n+1)``.
    """
    return _first_from_sums(dx[..., :1, None] * grad, dx[..., :, None] * grad, dz_sign, side)


def clifford_second_order(hess: np.ndarray, cov: np.ndarray, dz_sign: int = -1,
                          side: str = "left", include_j0: bool = False) -> np.ndarray:
    """Unhalved form ``sum_i [dZ_0 dX_i D(d_i f) + sum_{j>=1} dZ_j dX_i d_j d_i f]`` per step.

    ``cov[..., j, i]`` replaces the product ``dX_j dX_i``, so ``dZ_j dX_i``
    becomes ``cov[j, i] + dz_sign * e_j cov[0, i]``.  ``include_j0=True`` also
    adds the ``j = 0`` term, which counts ``dX_0 dX_i d_0 d_i f`` twice.
    """
    a = cov[..., :, :, None] * hess
    b = cov[..., None, 0, :, None] * hess
    return _second_from_sums(a, b, dz_sign, side, include_j0)


def classical_second_order(hess: np.ndarray, cov: np.ndarray) -> np.ndarray:
    return np.einsum("...jic,...ji->...c", hess, cov)


@dataclass
class _Terms:
    lhs: np.ndarray
    time: np.ndarray
    first_mart: np.ndarray
    first_fv: np.ndarray
    second: np.ndarray
    g0: np.ndarray
    gd: np.ndarray
    a: np.ndarray
    b: np.ndarray
    df_max: np.ndarray | None = None
    lap_max: np.ndarray | None = None

    @property
    def classical_rhs(self) -> np.ndarray:
        return self.time + self.first_mart + self.first_fv + 0.5 * self.second

    def clifford_rhs(self, dz_sign: int = -1, side: str = "left", include_j0: bool = False) -> np.ndarray:
        first = _first_from_sums(self.g0, self.gd, dz_sign, side)
        second = _second_from_sums(self.a, self.b, dz_sign, side, include_j0)
        return self.time + first + 0.5 * second

    def reduced_rhs(self, dz_sign: int = -1, side: str = "left") -> np.ndarray:
        out = np.zeros_like(self.lhs)
        for k in range(1, self.gd.shape[-2]):
            out = out + self.gd[..., k, :] + dz_sign * _unit(k, self.g0[..., k, :], side)
        return out


def _terms(f: TimeField, times: np.ndarray, states: np.ndarray, mart: np.ndarray, fv: np.ndarray,
           covariation: str, track_dropped: bool = False, side: str = "left",
           chunk: int = 400_000) -> _Terms:
    """Accumulate step sums over the time axis in chunks.

    ``states`` is ``(..., steps+1, n+1)``.  Only real-weighted sums of
    derivative arrays are stored, so every form of the right-hand side can be
    assembled afterwards.
    """
    steps = len(times) - 1
    batch = states.shape[:-2]
    size, d = 1 << f.dim, f.dim + 1
    per_step = max(1, int(np.prod(batch, dtype=np.int64)))
    step_chunk = max(1, chunk // per_step)
    zeros = lambda *shape: np.zeros(batch + shape + (size,))
    t = _Terms(
        lhs=f.func(times[-1], states[..., -1, :]) - f.func(times[0], states[..., 0, :]),
        time=zeros(), first_mart=zeros(), first_fv=zeros(), second=zeros(),
        g0=zeros(d), gd=zeros(d), a=zeros(d, d), b=zeros(d, d),
    )
    if track_dropped:
        t.df_max = np.zeros(batch)
        t.lap_max = np.zeros(batch)
    for lo in range(0, steps, step_chunk):
        hi = min(lo + step_chunk, steps)
        tk = times[lo:hi]
        xk = states[..., lo:hi, :]
        dt = np.diff(times[lo:hi + 1])
        dm = np.diff(mart[..., lo:hi + 1, :], axis=-2)
        da = np.diff(fv[..., lo:hi + 1, :], axis=-2)
        dx = dm + da
        f_t, grad, hess = f.derivatives(tk, xk)
        t.time += np.einsum("...kc,k->...c", f_t, dt)
        t.first_mart += np.einsum("...kic,...ki->...c", grad, dm)
        t.first_fv += np.einsum("...kic,...ki->...c", grad, da)
        t.g0 += np.einsum("...kic,...k->...ic", grad, dx[..., 0])
        t.gd += np.einsum("...kic,...ki->...ic", grad, dx)
        if covariation == "bm":
            # C_ji = delta_ji dt: only diagonal entries and b[j, 0] survive
            hd = np.einsum("...kiic,k->...ic", hess, dt)
            t.second += hd.sum(axis=-2)
            idx = np.arange(d)
            t.a[..., idx, idx, :] += hd
            t.b[..., :, 0, :] += np.einsum("...kjc,k->...jc", hess[..., :, 0, :], dt)
        elif covariation == "increments":
            t.second += np.einsum("...kjic,...kj,...ki->...c", hess, dm, dm)
            t.a += np.einsum("...kjic,...kj,...ki->...jic", hess, dm, dm)
            t.b += np.einsum("...kjic,...k,...ki->...jic", hess, dm[..., 0], dm)
        else:
            raise ValueError(f"covariation mode must be one of {COVARIATION_MODES}, got {covariation!r}")
        if track_dropped:
            df = np.linalg.norm(_dirac(grad, side), axis=-1).max(axis=-1)
            lap = np.linalg.norm(np.einsum("...iic->...c", hess), axis=-1).max(axis=-1)
            t.df_max = np.maximum(t.df_max, df)
            t.lap_max = np.maximum(t.lap_max, lap)
    return t


def _require_decomposition(path: ProcessPath) -> tuple[np.ndarray, np.ndarray]:
    if not path.has_decomposition:
        raise ItoError("path carries no martingale/finite-variation decomposition")
    return path.martingale_part, path.fv_part


@dataclass(frozen=True)
class ItoReport:
    lhs: Multivector
    rhs: Multivector
    residual_norm: float
    n_steps: int
    dt: float
    classical_rhs: Multivector | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs.to_dict(),
            "residual_norm": self.residual_norm,
            "n_steps": self.n_steps,
            "dt": self.dt,
        }
        if self.classical_rhs is not None:
            out["classical_rhs"] = self.classical_rhs.to_dict()
        if self.extras:
            out["extras"] = dict(self.extras)
        return out


def _report(dim, lhs, rhs, path, classical=None, **extras) -> ItoReport:
    return ItoReport(
        Multivector(dim, lhs),
        Multivector(dim, rhs),
        float(np.linalg.norm(lhs - rhs)),
        path.n_steps,
        float(path.times[-1] / path.n_steps),
        None if classical is None else Multivector(dim, classical),
        extras,
    )


def classical_ito_residual(f, path: ProcessPath, covariation: str = "increments") -> ItoReport:
    """Componentwise Itô formula on one path.

    ``f(t, X_t) - f(0, X_0)`` against ``int f_t ds + sum_i int f_{x_i} dM_i +
    sum_i int f_{x_i} dA_i + 1/2 sum_{ij} int f_{x_i x_j} d<M_i, M_j>``.
    """
    f = as_time_field(f)
    mart, fv = _require_decomposition(path)
    t = _terms(f, path.times, path.states, mart, fv, covariation)
    return _report(f.dim, t.lhs, t.classical_rhs, path)


def clifford_ito_residual(f, path: ProcessPath, covariation: str = "increments",
                          dz_sign: int = -1, side: str = "left",
                          include_j0: bool = False) -> ItoReport:
    """Clifford form of the Itô formula on one path.

    The right-hand side is ``int f_t dt + sum_steps [dZ_0 (D f) + sum_k dZ_k d_k f]
    + 1/2 sum_steps sum_i [dZ_0 dX_i D(d_i f) + sum_{j>=1} dZ_j dX_i d_j d_i f]``
    with the 1-form on the left.  ``dz_sign=+1`` switches to
    ``dZ_k = dX_k + e_k dX_0``; ``include_j0`` adds the ``j = 0`` term to the
    inner sum.  Neither variant reproduces ``df`` and both exist only to show
    that.  The classical right-hand side on the same path is returned too.
    """
    f = as_time_field(f)
    mart, fv = _require_decomposition(path)
    t = _terms(f, path.times, path.states, mart, fv, covariation)
    rhs = t.clifford_rhs(dz_sign, side, include_j0)
    classical = t.classical_rhs
    return _report(f.dim, t.lhs, rhs, path, classical,
                   clifford_vs_classical=float(np.linalg.norm(rhs - classical)))


def monogenic_reduction_residual(f: CliffordField, path: ProcessPath, tol: float = 1e-8,
                                 check_points: np.ndarray | None = None, h: float = 1e-3,
                                 side: str = "left") -> ItoReport:
    """Reduced formula ``f(B_t) = f(B_0) + sum_{k>=1} int dZ_k d_k f`` for monogenic ``f``.

    ``f`` must pass :func:`monogenicity_check` first.  The dropped terms
    ``D f`` and ``Laplacian f`` are measured along the path and must stay
    below ``tol``; they are reported, never silently discarded.
    """
    if not isinstance(f, CliffordField) or f.grad is None or f.hess is None:
        raise ItoError("monogenic reduction needs a CliffordField with analytic derivatives")
    mart, fv = _require_decomposition(path)
    if check_points is None:
        idx = np.unique(np.linspace(0, path.n_steps, min(100, path.n_steps + 1)).astype(int))
        check_points = path.states[idx]
    pre = monogenicity_check(f, check_points, h=h, tol=tol, side=side, method="auto")
    if not pre.passed:
        raise NotMonogenicError(f"{f.name} is not monogenic: max |D f| = {pre.max_residual:.3g}")
    tf = TimeField.static(f)
    t = _terms(tf, path.times, path.states, mart, fv, "bm", track_dropped=True, side=side)
    df_max, lap_max = float(t.df_max), float(t.lap_max)
    if df_max > tol or lap_max > tol:
        raise NotMonogenicError(
            f"{f.name}: dropped terms too large (|Df| {df_max:.3g}, |Laplacian f| {lap_max:.3g})")
    return _report(f.dim, t.lhs, t.reduced_rhs(side=side), path, df_max=df_max, laplacian_max=lap_max)


# ---------------------------------------------------------------------------
# Ensembles and the residual-scaling experiment


def ensemble_residuals(f, ens: PathEnsemble, covariation: str = "bm", form: str = "clifford",
                       dz_sign: int = -1) -> dict[str, np.ndarray]:
    """Per-path residual norms and Clifford-vs-classical gaps for a block of paths."""
    f = as_time_field(f)
    if ens.martingale_part is None or ens.fv_part is None:
        raise ItoError("ensemble carries no decomposition")
    if form not in ("clifford", "classical"):
        raise ValueError(f"form must be 'clifford' or 'classical', got {form!r}")
    t = _terms(f, ens.times, ens.states, ens.martingale_part, ens.fv_part, covariation)
    classical = t.classical_rhs
    rhs = t.clifford_rhs(dz_sign) if form == "clifford" else classical
    out = {
        "residual": np.linalg.norm(t.lhs - rhs, axis=-1),
        "lhs": t.lhs,
        "gap": np.linalg.norm(rhs - classical, axis=-1),
    }
    return out


@dataclass(frozen=True)
class ScalingRow:
    n_steps: int
    dt: float
    rms_residual: float
    slope_so_far: float


def loglog_slope(dts: Sequence[float], values: Sequence[float]) -> float:
    if len(dts) < 2:
        return float("nan")
    return float(np.polyfit(np.log(dts), np.log(values), 1)[0])


def residual_scaling(f, dim: int, n_steps_list: Sequence[int] = (100, 1000, 10000),
                     n_paths: int = 1000, seed: int = 0, t_max: float = 1.0,
                     covariation: str = "bm", form: str = "clifford",
                     start: Sequence[float] | None = None, threads: int | None = None,
                     block_size: int = 25) -> list[ScalingRow]:
    """RMS Itô residual against the step size on nested Brownian paths.

    Paths are drawn on the finest grid and subsampled for the coarser ones, so
    every resolution sees the same Brownian trajectories.
    """
    f = as_time_field(f)
    n_steps_list = sorted(int(s) for s in n_steps_list)
    finest = n_steps_list[-1]
    if any(finest % s for s in n_steps_list):
        raise ValueError("every step count must divide the finest one")
    start = tuple(start) if start is not None else (0.0,) * (dim + 1)
    config = PathConfig(dim, start, t_max, finest, seed)

    def work(b, s, e):
        fine = _bm_block(config, e - s, b, ("ito-scaling", finest))
        sq = []
        for steps in n_steps_list:
            step = finest // steps
            ens = PathEnsemble(fine.times[::step], fine.states[:, ::step],
                               fine.martingale_part[:, ::step], fine.fv_part[:, ::step])
            sq.append(ensemble_residuals(f, ens, covariation, form)["residual"] ** 2)
        return Moments.of(np.stack(sq, axis=-1))

    mom = Moments.combine(map_blocks(work, n_paths, threads, block_size))
    rms = np.sqrt(mom.mean)
    rows = []
    dts = [t_max / s for s in n_steps_list]
    for i, steps in enumerate(n_steps_list):
        rows.append(ScalingRow(steps, dts[i], float(rms[i]), loglog_slope(dts[: i + 1], rms[: i + 1])))
    return rows


def scaling_csv(rows: Sequence[ScalingRow]) -> str:
    lines = ["n_steps,dt,rms_residual,slope_so_far"]
    for r in rows:
        slope = "" if math.isnan(r.slope_so_far) else repr(r.slope_so_far)
        lines.append(f"{r.n_steps},{r.dt!r},{r.rms_residual!r},{slope}")
    return "\n".join(lines) + "\n"


__all__ = [
    "ItoError", "NotMonogenicError", "ItoReport", "TimeField", "ScalingRow",
    "adapted_integrand", "ito_integral", "stieltjes_integral", "as_time_field",
    "time_times_coordinate", "get_ito_field", "covariation_increments", "one_forms",
    "clifford_first_order", "clifford_second_order", "classical_second_order",
    "classical_ito_residual", "clifford_ito_residual", "monogenic_reduction_residual",
    "ensemble_residuals", "residual_scaling", "scaling_csv", "loglog_slope",
]
