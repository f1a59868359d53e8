"""Monte Carlo Dirichlet solver and the hitting experiments behind it.

Harmonic measure is sampled by walk-on-spheres (exact in distribution up to
the final ``eps`` shell).  The cone and hyperplane experiments need hitting
*times*, so they run time-stepped Brownian paths instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .fields import CliffordField, uniform_sphere
from .montecarlo import BLOCK_SIZE, MCEstimate, Moments, ScalarEstimate, map_blocks, substream

DEFAULT_MAX_STEPS = 100_000


class NonTerminationError(RuntimeError):
    """A walk exceeded its step budget."""


class NotInteriorError(ValueError):
    pass


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ValueError(f"points need {d} components, got {x.shape[-1]}")
    return x


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def ambient_dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def bounded(self) -> bool:
        return True

    def dist(self, x) -> np.ndarray:
        """Signed distance to the sphere, positive inside."""
        x = _as_points(x, self.ambient_dim)
        return self.radius - np.linalg.norm(x - np.asarray(self.center), axis=-1)

    def project(self, x) -> np.ndarray:
        x = _as_points(x, self.ambient_dim)
        c = np.asarray(self.center)
        v = x - c
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        # the centre is equidistant from every boundary point; pick the x_0 pole
        pole = np.zeros(self.ambient_dim)
        pole[0] = 1.0
        unit = np.where(r > 0, v / np.where(r > 0, r, 1.0), pole)
        return c + self.radius * unit

    def to_dict(self) -> dict:
        return {"shape": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners differ in dimension")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box needs lo < hi in every coordinate")

    @property
    def ambient_dim(self) -> int:
        return len(self.lo)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def bounded(self) -> bool:
        return True

    def dist(self, x) -> np.ndarray:
        x = _as_points(x, self.ambient_dim)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        inner = np.minimum(x - lo, hi - x).min(axis=-1)
        outside = np.linalg.norm(np.maximum(np.maximum(lo - x, x - hi), 0.0), axis=-1)
        return np.where(inner > 0, inner, -outside)

    def project(self, x) -> np.ndarray:
        x = _as_points(x, self.ambient_dim)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        out = np.clip(x, lo, hi)
        inside = np.all((x > lo) & (x < hi), axis=-1)
        if np.any(inside):
            xi = out[inside]
            gaps = np.concatenate([xi - lo, hi - xi], axis=-1)
            face = gaps.argmin(axis=-1)
            d = self.ambient_dim
            rows = np.arange(len(xi))
            coord = face % d
            xi[rows, coord] = np.where(face < d, lo[coord], hi[coord])
            out[inside] = xi
        return out

    def to_dict(self) -> dict:
        return {"shape": "box", "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class HalfSpace:
    """``{x : <normal, x> < offset}`` with a unit normal."""

    normal: tuple[float, ...]
    offset: float = 0.0

    def __post_init__(self):
        nrm = np.asarray(self.normal, dtype=float)
        length = np.linalg.norm(nrm)
        if not length > 0:
            raise ValueError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", tuple(float(v) for v in nrm / length))
        object.__setattr__(self, "offset", float(self.offset) / length)

    @property
    def ambient_dim(self) -> int:
        return len(self.normal)

    @property
    def diameter(self) -> float:
        return math.inf

    @property
    def bounded(self) -> bool:
        return False

    def dist(self, x) -> np.ndarray:
        x = _as_points(x, self.ambient_dim)
        return self.offset - x @ np.asarray(self.normal)

    def project(self, x) -> np.ndarray:
        x = _as_points(x, self.ambient_dim)
        return x + self.dist(x)[..., None] * np.asarray(self.normal)

    def to_dict(self) -> dict:
        return {"shape": "half-space", "normal": list(self.normal), "offset": self.offset}


Domain = Ball | Box | HalfSpace


def domain_from_dict(spec: dict) -> Domain:
    shape = spec.get("shape")
    if shape == "ball":
        return Ball(spec["center"], spec.get("radius", 1.0))
    if shape == "box":
        return Box(spec["lo"], spec["hi"])
    if shape in ("half-space", "halfspace"):
        return HalfSpace(spec["normal"], spec.get("offset", 0.0))
    raise ValueError(f"unknown domain shape {shape!r}")


def default_eps(domain: Domain) -> float:
    return 1e-4 * (domain.diameter if math.isfinite(domain.diameter) else 1.0)


# ---------------------------------------------------------------------------
# Walk-on-spheres


@dataclass(frozen=True)
class WalkResult:
    points: np.ndarray
    steps: np.ndarray
    censored: np.ndarray


def wos_batch(domain: Domain, starts, eps: float, rng: np.random.Generator,
              max_steps: int = DEFAULT_MAX_STEPS) -> WalkResult:
    """Run one walk from each start; walks over budget are flagged as censored."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.array(_as_points(starts, domain.ambient_dim), dtype=float, ndmin=2)
    d0 = domain.dist(x)
    if np.any(d0 <= 0):
        raise NotInteriorError("walk-on-spheres needs interior starting points")
    steps = np.zeros(len(x), dtype=np.int64)
    active = np.flatnonzero(d0 >= eps)
    r = d0[active]
    while active.size:
        if steps[active[0]] >= max_steps:
            break
        x[active] += r[:, None] * uniform_sphere(rng, active.size, domain.ambient_dim)
        steps[active] += 1
        r = domain.dist(x[active])
        keep = r >= eps
        active, r = active[keep], r[keep]
    censored = np.zeros(len(x), dtype=bool)
    censored[active] = True
    return WalkResult(domain.project(x), steps, censored)


def wos_sample(domain: Domain, x, eps: float | None = None, seed: int = 0,
               max_steps: int = DEFAULT_MAX_STEPS) -> tuple[np.ndarray, int]:
    """Exit point of one walk started at ``x`` and its step count."""
    eps = default_eps(domain) if eps is None else eps
    res = wos_batch(domain, np.asarray(x, dtype=float)[None, :], eps,
                    substream(seed, "wos-sample"), max_steps)
    if res.censored[0]:
        raise NonTerminationError(f"walk exceeded {max_steps} steps")
    return res.points[0], int(res.steps[0])


@dataclass(frozen=True)
class BoundaryData:
    """Boundary values ``phi`` and, for validation, a known interior extension."""

    dim: int
    phi: Callable[[np.ndarray], np.ndarray]
    known_extension: CliffordField | None = None
    name: str = "phi"

    @classmethod
    def from_field(cls, f: CliffordField) -> BoundaryData:
        return cls(f.dim, f.values, f, f.name)

    def values(self, y: np.ndarray) -> np.ndarray:
        v = np.asarray(self.phi(y), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{self.name}: non-finite boundary values")
        return v


@dataclass(frozen=True)
class DirichletEstimate:
    point: tuple[float, ...]
    value: MCEstimate
    n_walks: int
    eps_shell: float
    mean_steps: float
    censored_fraction: float = 0.0

    def to_dict(self) -> dict:
        out = {
            "point": list(self.point),
            "value": self.value.to_dict(),
            "n_walks": self.n_walks,
            "eps_shell": self.eps_shell,
            "mean_steps": self.mean_steps,
        }
        if self.censored_fraction:
            out["censored_fraction"] = self.censored_fraction
        return out


def solve_dirichlet(domain: Domain, data: BoundaryData, points, n_walks: int,
                    eps: float | None = None, seed: int = 0, threads: int | None = None,
                    max_steps: int = DEFAULT_MAX_STEPS, censor: bool | None = None,
                    block_size: int = BLOCK_SIZE) -> list[DirichletEstimate]:
    """Mean of ``phi(B(tau))`` over ``n_walks`` walks from each point.

    On unbounded domains walks that run out of budget count as ``tau = inf``
    and contribute zero; their share is reported.  Walks depend only on the
    seed, the point index and the block, so the estimator is affine in
    ``phi`` for a fixed seed.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[None, :]
    if points.size == 0 or len(points) == 0:
        raise ValueError("need at least one evaluation point")
    if int(n_walks) < 1:
        raise ValueError("n_walks must be >= 1")
    if data.dim + 1 != domain.ambient_dim:
        raise ValueError("boundary data and domain disagree on dimension")
    eps = default_eps(domain) if eps is None else float(eps)
    censor = (not domain.bounded) if censor is None else censor
    if np.any(domain.dist(points) <= 0):
        raise NotInteriorError("all evaluation points must be interior")
    out = []
    for p, x in enumerate(points):

        def work(b, s, e, p=p, x=x):
            rng = substream(seed, ("wos", p), b)
            res = wos_batch(domain, np.broadcast_to(x, (e - s, len(x))), eps, rng, max_steps)
            if res.censored.any() and not censor:
                raise NonTerminationError(f"walk from point {p} exceeded {max_steps} steps")
            vals = data.values(res.points)
            vals[res.censored] = 0.0
            return Moments.of(vals), int(res.steps.sum()), int(res.censored.sum())

        parts = map_blocks(work, int(n_walks), threads, block_size)
        mom = Moments.combine(m for m, _, _ in parts)
        steps = sum(s for _, s, _ in parts)
        cens = sum(c for _, _, c in parts)
        out.append(DirichletEstimate(tuple(float(v) for v in x), MCEstimate.from_moments(mom, data.dim),
                                     int(n_walks), eps, steps / n_walks, cens / n_walks))
    return out


def convergence_table(domain: Domain, data: BoundaryData, point, n_walks_list: Sequence[int],
                      eps: float | None = None, seed: int = 0, threads: int | None = None) -> list[dict]:
    """Estimates at one point for increasing ``n_walks`` (CSV rows)."""
    rows = []
    for n in n_walks_list:
        est = solve_dirichlet(domain, data, [point], n, eps, seed, threads)[0]
        rows.append({"n_walks": int(n), "estimate": [float(v) for v in est.value.mean.coeffs],
                     "stderr": [float(v) for v in est.value.stderr.coeffs]})
    return rows


def convergence_csv(rows: Sequence[dict]) -> str:
    size = len(rows[0]["estimate"])
    head = ["n_walks"] + [f"est_{i}" for i in range(size)] + [f"stderr_{i}" for i in range(size)]
    lines = [",".join(head)]
    for r in rows:
        lines.append(",".join([str(r["n_walks"])] + [repr(v) for v in r["estimate"] + r["stderr"]]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cone hitting


def cone_distance(y: np.ndarray, axis: np.ndarray, half_angle: float) -> np.ndarray:
    """Euclidean distance from ``y`` (relative to the apex) to the closed cone."""
    r = np.linalg.norm(y, axis=-1)
    cos = np.divide(y @ axis, r, out=np.ones_like(r), where=r > 0)
    theta = np.arccos(np.clip(cos, -1.0, 1.0))
    gap = theta - half_angle
    return np.where(gap <= 0, 0.0, np.where(gap >= math.pi / 2, r, r * np.sin(gap)))


def planar_cone_closed_form(alpha: float, radius_ratio: float, terms: int = 200) -> float:
    """Exit probability through the arc of the planar wedge complementary to the cone.

    The start sits on the bisector opposite the cone axis at ``r / h = radius_ratio``.
    """
    beta = 2.0 * math.pi - alpha
    theta = beta / 2.0
    total = 0.0
    for m in range(1, 2 * terms, 2):
        total += 4.0 / (m * math.pi) * radius_ratio ** (m * math.pi / beta) * math.sin(m * math.pi * theta / beta)
    return total


@dataclass(frozen=True)
class ConeEstimate:
    k: int
    probability: float
    stderr: float
    n_walks: int
    start_radius: float
    mean_steps: float
    closed_form: float | None = None

    def to_dict(self) -> dict:
        out = {"k": self.k, "probability": self.probability, "stderr": self.stderr,
               "n_walks": self.n_walks, "start_radius": self.start_radius, "mean_steps": self.mean_steps}
        if self.closed_form is not None:
            out["closed_form"] = self.closed_form
        return out


def cone_hitting_probability(alpha: float, h: float, k: int, n_walks: int, seed: int = 0,
                             dim: int = 1, start_fraction: float = 0.5,
                             start_angle: float | None = None, dt_max: float = 1e-3,
                             dt_min: float = 1e-8, max_steps: int = 1_000_000,
                             threads: int | None = None,
                             block_size: int = BLOCK_SIZE) -> ConeEstimate:
    """``P{ |B - z| reaches h before B enters the cone C_z(alpha) }``.

    The cone has its apex at ``z = 0``, axis ``e_0`` and full opening angle
    ``alpha``.  Walks start at distance ``start_fraction * 2**-k * h`` from
    the apex, by default on the ray opposite the axis (``start_angle`` is the
    angle from the axis, in the ``(x_0, x_1)`` plane).  Steps are Euler
    Gaussian increments with ``dt = clip((0.2 delta)**2, dt_min, dt_max)``,
    ``delta`` being the distance to the nearer of the two targets.
    """
    if not 0 < alpha < 2 * math.pi:
        raise ValueError("cone opening angle must lie in (0, 2*pi)")
    if int(k) < 1:
        raise ValueError("k must be >= 1")
    if not h > 0 or not 0 < start_fraction < 1:
        raise ValueError("need h > 0 and 0 < start_fraction < 1")
    d = dim + 1
    axis = np.zeros(d)
    axis[0] = 1.0
    half = alpha / 2.0
    r0 = start_fraction * 2.0 ** (-int(k)) * h
    phi = math.pi if start_angle is None else float(start_angle)
    start = np.zeros(d)
    start[0] = r0 * math.cos(phi)
    start[1] = r0 * math.sin(phi)

    def work(b, s, e):
        rng = substream(seed, ("cone", k), b)
        x = np.broadcast_to(start, (e - s, d)).copy()
        hit_sphere = np.zeros(e - s, dtype=bool)
        steps = np.zeros(e - s, dtype=np.int64)
        active = np.arange(e - s)
        for _ in range(max_steps):
            y = x[active]
            to_cone = cone_distance(y, axis, half)
            to_sphere = h - np.linalg.norm(y, axis=-1)
            done_c = to_cone <= 0
            done_s = to_sphere <= 0
            hit_sphere[active[done_s & ~done_c]] = True
            keep = ~(done_c | done_s)
            active = active[keep]
            if not active.size:
                break
            delta = np.minimum(to_cone[keep], to_sphere[keep])
            dt = np.clip((0.2 * delta) ** 2, dt_min, dt_max)
            x[active] += np.sqrt(dt)[:, None] * rng.standard_normal((active.size, d))
            steps[active] += 1
        else:
            raise NonTerminationError(f"cone walks exceeded {max_steps} steps")
        return int(hit_sphere.sum()), int(steps.sum())

    parts = map_blocks(work, int(n_walks), threads, block_size)
    hits = sum(p[0] for p in parts)
    est = ScalarEstimate.of_bernoulli(hits, int(n_walks))
    closed = None
    if dim == 1 and start_angle is None:
        closed = planar_cone_closed_form(alpha, r0 / h)
    return ConeEstimate(int(k), est.value, est.stderr, int(n_walks), r0,
                        sum(p[1] for p in parts) / n_walks, closed)


# ---------------------------------------------------------------------------
# Hyperplane survival


def survival_closed_form(d: float, t: float) -> float:
    """``P{max_{s<=t} W_s < d} = 2 Phi(d / sqrt(t)) - 1`` for a standard scalar BM."""
    return float(2.0 * ndtr(d / math.sqrt(t)) - 1.0)


@dataclass(frozen=True)
class SurvivalRow:
    t: float
    probability: float
    stderr: float
    closed_form: float

    def to_dict(self) -> dict:
        return {"t": self.t, "probability": self.probability, "stderr": self.stderr,
                "closed_form": self.closed_form}


def liouville_experiment(d: float, t_grid: Sequence[float], n_walks: int, seed: int = 0,
                         dim: int = 1, dt: float = 0.05, threads: int | None = None,
                         block_size: int = BLOCK_SIZE) -> list[SurvivalRow]:
    """Survival ``P{tau(H) > t}`` for the hyperplane ``H = {<e_0, x> = d}``.

    Full ``(n+1)``-dimensional paths start at the origin.  Between grid times
    each path survives with the Brownian-bridge probability
    ``1 - exp(-2 a b / dt)``, where ``a`` and ``b`` are the endpoint distances
    to ``H``; weighting by these factors removes the discrete-monitoring bias.
    """
    if not d > 0:
        raise ValueError("hyperplane distance must be positive")
    t_grid = [float(t) for t in t_grid]
    if not t_grid or t_grid[0] <= 0 or any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("t_grid must be positive and strictly increasing")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = [0.0]
    for t in t_grid:
        m = max(1, math.ceil((t - grid[-1]) / dt - 1e-9))
        grid.extend(np.linspace(grid[-1], t, m + 1)[1:].tolist())
    grid = np.asarray(grid)
    dts = np.diff(grid)
    report_idx = np.searchsorted(grid, t_grid)
    n1 = dim + 1

    def work(b, s, e):
        rng = substream(seed, "liouville", b)
        m = e - s
        x = np.zeros((m, n1))
        weight = np.ones(m)
        out = np.empty((m, len(t_grid)))
        col = 0
        for i, step in enumerate(dts):
            a = d - x[:, 0]
            x += math.sqrt(step) * rng.standard_normal((m, n1))
            bdist = d - x[:, 0]
            crossed = bdist <= 0
            weight = np.where(crossed, 0.0, weight * -np.expm1(-2.0 * a * np.maximum(bdist, 0.0) / step))
            while col < len(t_grid) and report_idx[col] == i + 1:
                out[:, col] = weight
                col += 1
        return Moments.of(out)

    mom = Moments.combine(map_blocks(work, int(n_walks), threads, block_size))
    return [SurvivalRow(t, float(mom.mean[i]), float(mom.stderr[i]), survival_closed_form(d, t))
            for i, t in enumerate(t_grid)]


__all__ = [
    "Ball", "Box", "HalfSpace", "Domain", "domain_from_dict", "default_eps",
    "NonTerminationError", "NotInteriorError", "WalkResult", "wos_batch", "wos_sample",
    "BoundaryData", "DirichletEstimate", "solve_dirichlet", "convergence_table", "convergence_csv",
    "cone_distance", "planar_cone_closed_form", "ConeEstimate", "cone_hitting_probability",
    "survival_closed_form", "SurvivalRow", "liouville_experiment",
]
