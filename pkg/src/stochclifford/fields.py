"""Clifford-valued fields on R^{n+1}, Cauchy-Riemann operators and fixtures.

A :class:`CliffordField` wraps vectorised callables acting on arrays of
points of shape ``(..., n+1)`` and returning coefficients ``(..., 2**n)``.
Optional analytic derivatives follow the same convention with extra axes:
``grad -> (..., n+1, 2**n)`` and ``hess -> (..., n+1, n+1, 2**n)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    AlgebraError,
    Multivector,
    embed_paravector,
    geometric_product,
    left_unit_product,
    right_unit_product,
)

DEFAULT_STEP = 1e-3

ArrayFn = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    """A field was evaluated outside the box it is declared on."""


@dataclass(frozen=True)
class CliffordField:
    dim: int
    func: ArrayFn
    grad: ArrayFn | None = None
    hess: ArrayFn | None = None
    name: str = "field"
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    jet: Callable | None = None

    @property
    def size(self) -> int:
        return 1 << self.dim

    def check_domain(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim + 1:
            raise AlgebraError(f"{self.name}: points need {self.dim + 1} components, got {x.shape[-1]}")
        if self.lo is not None and np.any(x < np.asarray(self.lo)):
            raise DomainError(f"{self.name}: evaluation below domain box")
        if self.hi is not None and np.any(x > np.asarray(self.hi)):
            raise DomainError(f"{self.name}: evaluation above domain box")
        return x

    def values(self, x) -> np.ndarray:
        return self.func(self.check_domain(x))

    def __call__(self, x) -> Multivector:
        x = self.check_domain(np.asarray(x, dtype=float))
        if x.ndim != 1:
            raise ValueError("call with a single point; use values() for batches")
        return Multivector(self.dim, self.func(x))

    def gradient(self, x) -> np.ndarray:
        if self.grad is None:
            raise ValueError(f"{self.name} has no analytic gradient")
        return self.grad(self.check_domain(x))

    def hessian(self, x) -> np.ndarray:
        if self.hess is None:
            raise ValueError(f"{self.name} has no analytic Hessian")
        return self.hess(self.check_domain(x))

    def jet_values(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Value, gradient and Hessian in one pass when the field supports it."""
        x = self.check_domain(x)
        if self.jet is not None:
            return self.jet(x)
        return self.func(x), self.gradient(x), self.hessian(x)


def _resolve_method(f: CliffordField, method: str) -> str:
    if method == "auto":
        return "analytic" if f.grad is not None else "fd"
    if method not in ("fd", "analytic"):
        raise ValueError(f"unknown derivative method {method!r}")
    if method == "analytic" and f.grad is None:
        raise ValueError(f"{f.name} has no analytic gradient")
    return method


def partials(f: CliffordField, x, h: float = DEFAULT_STEP, method: str = "auto") -> np.ndarray:
    """First partials ``d f / d x_i`` at points ``(..., n+1)`` -> ``(..., n+1, 2**n)``.

    ``method="fd"`` uses central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h``;
    ``"auto"`` prefers analytic partials when the field supplies them.
    """
    x = f.check_domain(x)
    if _resolve_method(f, method) == "analytic":
        return f.grad(x)
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    eye = np.eye(f.dim + 1) * h
    xp = x[..., None, :] + eye
    xm = x[..., None, :] - eye
    return (f.values(xp) - f.values(xm)) / (2.0 * h)


def _dirac_from_partials(d: np.ndarray, side: str) -> np.ndarray:
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    n = d.shape[-2] - 1
    out = np.zeros(d.shape[:-2] + d.shape[-1:])
    for k in range(1, n + 1):
        if side == "left":
            out += left_unit_product(k, d[..., k, :])
        else:
            out += right_unit_product(d[..., k, :], k)
    return out


def dirac_apply(f: CliffordField, x, h: float = DEFAULT_STEP, side: str = "left",
                method: str = "auto") -> Multivector:
    """``D_x f = sum_k e_k d f/d x_k`` (``side="right"`` gives ``sum_k d_k f e_k``)."""
    d = partials(f, np.asarray(x, dtype=float), h, method)
    return Multivector(f.dim, _dirac_from_partials(d, side))


def cr_values(f: CliffordField, x, h: float = DEFAULT_STEP, side: str = "left",
              method: str = "auto", conj: bool = False) -> np.ndarray:
    """Batched ``D f = d_0 f + D_x f`` (or ``conj(D) f = d_0 f - D_x f``)."""
    d = partials(f, x, h, method)
    dx = _dirac_from_partials(d, side)
    return d[..., 0, :] - dx if conj else d[..., 0, :] + dx


def cr_apply(f: CliffordField, x, h: float = DEFAULT_STEP, side: str = "left",
             method: str = "auto") -> Multivector:
    return Multivector(f.dim, cr_values(f, np.asarray(x, dtype=float), h, side, method))


def cr_conj_apply(f: CliffordField, x, h: float = DEFAULT_STEP, side: str = "left",
                  method: str = "auto") -> Multivector:
    return Multivector(f.dim, cr_values(f, np.asarray(x, dtype=float), h, side, method, conj=True))


def cr_field(f: CliffordField, h: float = DEFAULT_STEP, conj: bool = False,
             method: str = "fd") -> CliffordField:
    """The field ``x -> D f(x)`` (finite differences by default), for composing operators."""
    return CliffordField(
        dim=f.dim,
        func=lambda x: cr_values(f, x, h, method=method, conj=conj),
        name=f"{'Dbar' if conj else 'D'}({f.name})",
        lo=None if f.lo is None else tuple(np.asarray(f.lo) + h),
        hi=None if f.hi is None else tuple(np.asarray(f.hi) - h),
    )


def fd_laplacian(f: CliffordField, x, h: float = DEFAULT_STEP) -> np.ndarray:
    """Second-difference Laplacian, used as an independent oracle."""
    x = f.check_domain(x)
    eye = np.eye(f.dim + 1) * h
    centre = f.values(x)
    plus = f.values(x[..., None, :] + eye)
    minus = f.values(x[..., None, :] - eye)
    return np.sum(plus + minus - 2.0 * centre[..., None, :], axis=-2) / h**2


# ---------------------------------------------------------------------------
# Fixtures



def _fueter_jet(k: int, n: int, x: np.ndarray):
    # z_k = x_k - x_0 e_k; its gradient is constant and its Hessian vanishes (None)
    ek = 1 << (k - 1)
    size = 1 << n
    value = np.zeros(x.shape[:-1] + (size,))
    value[..., 0] = x[..., k]
    value[..., ek] = -x[..., 0]
    g = np.zeros((n + 1, size))
    g[0, ek] = -1.0
    g[k, 0] = 1.0
    return value, g, None


def _jet_mul(a, b):
    # product rule; derivative arrays may lack batch axes when they are constant
    va, ga, ha = a
    vb, gb, hb = b
    v = geometric_product(va, vb)
    g = geometric_product(ga, vb[..., None, :]) + geometric_product(va[..., None, :], gb)
    h = geometric_product(ga[..., :, None, :], gb[..., None, :, :])
    h = h + geometric_product(ga[..., None, :, :], gb[..., :, None, :])
    if ha is not None:
        h = h + geometric_product(ha, vb[..., None, None, :])
    if hb is not None:
        h = h + geometric_product(va[..., None, None, :], hb)
    return v, g, h


def fueter_variable(k: int, dim: int) -> CliffordField:
    """Hypercomplex variable ``z_k = x_k - x_0 e_k`` with exact derivatives."""
    if not 1 <= k <= dim:
        raise ValueError(f"z_{k} needs 1 <= k <= n = {dim}")
    size = 1 << dim

    def jet(x):
        v, g, _ = _fueter_jet(k, dim, x)
        batch = x.shape[:-1]
        return (v, np.broadcast_to(g, batch + g.shape),
                np.broadcast_to(np.zeros((dim + 1, dim + 1, size)), batch + (dim + 1, dim + 1, size)))

    return CliffordField(
        dim=dim,
        func=lambda x: jet(x)[0],
        grad=lambda x: jet(x)[1].copy(),
        hess=lambda x: jet(x)[2].copy(),
        name=f"z{k}",
        jet=jet,
    )


@dataclass(frozen=True)
class _FueterProduct:
    ks: tuple[int, ...]
    dim: int
    orders: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        # every distinct ordering of a multiset occurs equally often among all m! permutations
        object.__setattr__(self, "orders", tuple(sorted(set(itertools.permutations(self.ks)))))

    def jet(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        batch = x.shape[:-1]
        n1, size = self.dim + 1, 1 << self.dim
        factors = {k: _fueter_jet(k, self.dim, x) for k in set(self.ks)}
        total = None
        for order in self.orders:
            acc = factors[order[0]]
            for k in order[1:]:
                acc = _jet_mul(acc, factors[k])
            v, g, h = acc
            if h is None:
                h = np.zeros((n1, n1, size))
            acc = (v, g, h)
            total = acc if total is None else tuple(t + a for t, a in zip(total, acc))
        scale = 1.0 / len(self.orders)
        v, g, h = (t * scale for t in total)
        return (v, np.broadcast_to(g, batch + (n1, size)),
                np.broadcast_to(h, batch + (n1, n1, size)))


def fueter_product(ks: Sequence[int], dim: int) -> CliffordField:
    """Symmetrised product ``(1/m!) sum_sigma z_{k_sigma(1)} ... z_{k_sigma(m)}``.

    First and second derivatives come from the product rule applied factor by
    factor.  Monogenicity is not assumed anywhere; check it with
    :func:`monogenicity_check`.
    """
    ks = tuple(int(k) for k in ks)
    if not 1 <= len(ks) <= 4:
        raise ValueError("Fueter products are supported for 1 to 4 factors")
    for k in ks:
        if not 1 <= k <= dim:
            raise ValueError(f"index {k} out of range 1..{dim}")
    prod = _FueterProduct(ks, dim)
    return CliffordField(
        dim=dim,
        func=lambda x: prod.jet(x)[0],
        grad=lambda x: prod.jet(x)[1],
        hess=lambda x: prod.jet(x)[2],
        name="".join(f"z{k}" for k in ks),
        jet=prod.jet,
    )


def scalar_field(dim: int, func, grad=None, hess=None, name: str = "scalar") -> CliffordField:
    """Lift real-valued vectorised callables to a Clifford field (scalar blade only)."""
    size = 1 << dim

    def lift(fn):
        if fn is None:
            return None

        def lifted(x):
            v = np.asarray(fn(x), dtype=float)
            out = np.zeros(v.shape + (size,))
            out[..., 0] = v
            return out
        return lifted

    return CliffordField(dim, lift(func), lift(grad), lift(hess), name=name)


def coordinate_field(i: int, dim: int) -> CliffordField:
    """The scalar field ``x -> x_i``."""
    if not 0 <= i <= dim:
        raise ValueError(f"coordinate x_{i} out of range")
    e = np.eye(dim + 1)[i]
    return scalar_field(
        dim,
        lambda x: x[..., i],
        lambda x: np.broadcast_to(e, x.shape).copy(),
        lambda x: np.zeros(x.shape + (dim + 1,)),
        name=f"x{i}",
    )


def abs2_field(dim: int) -> CliffordField:
    """``|x|^2 = x conj(x)`` as a scalar field."""
    return scalar_field(
        dim,
        lambda x: np.sum(x * x, axis=-1),
        lambda x: 2.0 * x,
        lambda x: np.broadcast_to(2.0 * np.eye(dim + 1), x.shape[:-1] + (dim + 1, dim + 1)).copy(),
        name="abs2",
    )


def constant_field(value: Multivector) -> CliffordField:
    n = value.dim
    c = value.coeffs
    return CliffordField(
        dim=n,
        func=lambda x: np.broadcast_to(c, x.shape[:-1] + c.shape).copy(),
        grad=lambda x: np.zeros(x.shape[:-1] + (n + 1,) + c.shape),
        hess=lambda x: np.zeros(x.shape[:-1] + (n + 1, n + 1) + c.shape),
        name="const",
    )


def embed_points(x) -> Multivector:
    x = np.asarray(x, dtype=float)
    return Multivector(len(x) - 1, embed_paravector(x, len(x) - 1))


# ---------------------------------------------------------------------------
# Checks


@dataclass(frozen=True)
class MonogenicityReport:
    max_residual: float
    sample_points: int
    step: float
    tol: float
    method: str
    side: str = "left"

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "sample_points": self.sample_points,
            "step": self.step,
            "tol": self.tol,
            "method": self.method,
            "side": self.side,
            "passed": self.passed,
        }


def monogenicity_check(f: CliffordField, points, h: float = DEFAULT_STEP, tol: float = 1e-6,
                       side: str = "left", method: str = "fd",
                       chunk: int = 4096) -> MonogenicityReport:
    """Largest coefficient norm of ``D f`` over the sample points.

    Chunks are reduced in a fixed order, so the result does not depend on how
    the work is split.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("monogenicity check needs at least one sample point")
    worst = 0.0
    for start in range(0, len(pts), chunk):
        r = cr_values(f, pts[start:start + chunk], h, side, method)
        worst = max(worst, float(np.max(np.linalg.norm(r, axis=-1))))
    return MonogenicityReport(worst, len(pts), h, tol, _resolve_method(f, method), side)


def uniform_sphere(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """Uniform directions on S^{d-1} via normalised Gaussian vectors."""
    g = rng.standard_normal((count, d))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


@dataclass(frozen=True)
class MeanValueResult:
    sphere_avg: Multivector
    center_val: Multivector
    gap: float
    stderr: float

    def __iter__(self):
        # unpacks as (sphere_avg, center_val, gap)
        return iter((self.sphere_avg, self.center_val, self.gap))


def mean_value_check(f: CliffordField, center, radius: float, n_quad: int,
                     rng_seed: int = 0) -> MeanValueResult:
    """Monte Carlo sphere average of ``f`` against its centre value.

    ``stderr`` is the Euclidean norm of the componentwise standard errors.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_quad < 1:
        raise ValueError("need at least one quadrature point")
    c = np.asarray(center, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=[int(rng_seed) & (2**64 - 1), 0x6D76]))
    pts = c + radius * uniform_sphere(rng, n_quad, f.dim + 1)
    vals = f.values(pts)
    avg = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n_quad) if n_quad > 1 else np.zeros_like(avg)
    centre_val = f.values(c)
    return MeanValueResult(
        Multivector(f.dim, avg),
        Multivector(f.dim, centre_val),
        float(np.linalg.norm(avg - centre_val)),
        float(np.linalg.norm(se)),
    )


# ---------------------------------------------------------------------------
# Registry


@dataclass(frozen=True)
class Fixture:
    name: str
    build: Callable[[int], CliffordField]
    monogenic: bool
    harmonic: bool
    min_dim: int
    provenance: str


REGISTRY: dict[str, Fixture] = {}


def register(fx: Fixture) -> None:
    REGISTRY[fx.name] = fx


for _k in (1, 2, 3):
    register(Fixture(f"z{_k}", lambda n, k=_k: fueter_variable(k, n), True, True, _k,
                     f"hypercomplex variable z_{_k} = x_{_k} - x_0 e_{_k}"))
register(Fixture("z1z1", lambda n: fueter_product([1, 1], n), True, True, 1,
                 "symmetrised Fueter product z1 z1"))
register(Fixture("z1z2", lambda n: fueter_product([1, 2], n), True, True, 2,
                 "symmetrised Fueter product (z1 z2 + z2 z1)/2"))
register(Fixture("z1z2z3", lambda n: fueter_product([1, 2, 3], n), True, True, 3,
                 "symmetrised Fueter product of z1, z2, z3"))
register(Fixture("const", lambda n: constant_field(Multivector.scalar(n, 1.0)), True, True, 1,
                 "constant 1"))
register(Fixture("x0", lambda n: coordinate_field(0, n), False, True, 1,
                 "scalar coordinate x_0 (D x_0 = 1)"))
register(Fixture("x1", lambda n: coordinate_field(1, n), False, True, 1,
                 "scalar coordinate x_1 (harmonic, D x_1 = e_1)"))
register(Fixture("abs2", abs2_field, False, False, 1,
                 "|x|^2 = x conj(x) (Laplacian 2(n+1))"))


def get_fixture(name: str, dim: int, registry: dict[str, Fixture] | None = None) -> CliffordField:
    reg = REGISTRY if registry is None else registry
    if name not in reg:
        raise KeyError(f"unknown fixture {name!r}; known: {sorted(reg)}")
    fx = reg[name]
    if dim < fx.min_dim:
        raise ValueError(f"fixture {name} needs n >= {fx.min_dim}")
    return fx.build(dim)
