"""Para-vector Brownian motion and path-level martingale diagnostics.

Paths live on a uniform time grid.  States are stored as para-vector
components ``(..., n+1)``; a Clifford-valued process built from a path (for
example ``B^2 - t``) is an array of coefficients ``(..., 2**n)``.  The
filtration at grid time ``t_k`` is the path prefix ``states[..., :k+1, :]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .algebra import conjugate_coeffs, embed_paravector, geometric_product
from .montecarlo import Moments, map_blocks, substream

BM_STREAM = "bm"


@dataclass(frozen=True)
class PathConfig:
    dim: int
    start: tuple[float, ...]
    t_max: float
    n_steps: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if self.dim < 1:
            raise ValueError("dimension n must be >= 1")
        if len(self.start) != self.dim + 1:
            raise ValueError(f"start needs {self.dim + 1} components, got {len(self.start)}")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if int(self.n_steps) < 1:
            raise ValueError("n_steps must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def dt(self) -> float:
        return self.t_max / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_steps + 1)


@dataclass(frozen=True)
class ProcessPath:
    """One trajectory; ``states[k]`` is the state at ``times[k]``.

    When the semimartingale decomposition is known it is carried along:
    ``states = states[0] + martingale_part + fv_part``.
    """

    times: np.ndarray
    states: np.ndarray
    martingale_part: np.ndarray | None = None
    fv_part: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.states, dtype=float)
        if t.ndim != 1 or len(t) < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if x.shape[0] != len(t):
            raise ValueError("states and times disagree in length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        for name in ("martingale_part", "fv_part"):
            part = getattr(self, name)
            if part is not None:
                part = np.asarray(part, dtype=float)
                if part.shape != x.shape:
                    raise ValueError(f"{name} must match the shape of states")
                object.__setattr__(self, name, part)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return self.states.shape[-1] - 1

    @property
    def has_decomposition(self) -> bool:
        return self.martingale_part is not None and self.fv_part is not None

    def to_csv(self, handle=None) -> str | None:
        """Write ``t, x_0, ..., x_n`` rows; returns the text when no handle is given."""
        out = io.StringIO() if handle is None else handle
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{i}" for i in range(self.states.shape[-1])])
        for t, row in zip(self.times, self.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return out.getvalue() if handle is None else None


@dataclass(frozen=True)
class PathEnsemble:
    """Independent paths on a shared grid; ``states`` has shape ``(paths, steps+1, n+1)``."""

    times: np.ndarray
    states: np.ndarray
    martingale_part: np.ndarray | None = None
    fv_part: np.ndarray | None = None

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[-1] - 1

    def path(self, i: int) -> ProcessPath:
        return ProcessPath(
            self.times,
            self.states[i],
            None if self.martingale_part is None else self.martingale_part[i],
            None if self.fv_part is None else self.fv_part[i],
        )

    @classmethod
    def concat(cls, parts: Sequence[PathEnsemble]) -> PathEnsemble:
        def cat(name):
            arrs = [getattr(p, name) for p in parts]
            return None if any(a is None for a in arrs) else np.concatenate(arrs)
        return cls(parts[0].times, cat("states"), cat("martingale_part"), cat("fv_part"))


@dataclass(frozen=True)
class StoppedPath:
    path: ProcessPath
    stop_index: int
    stop_reason: str  # "boundary-hit" or "time-exhausted"

    @property
    def stop_time(self) -> float:
        return float(self.path.times[self.stop_index])


def _bm_block(config: PathConfig, n_paths: int, block: int, stream) -> PathEnsemble:
    rng = substream(config.seed, stream, block)
    d = config.dim + 1
    incr = rng.standard_normal((n_paths, config.n_steps, d)) * math.sqrt(config.dt)
    mart = np.zeros((n_paths, config.n_steps + 1, d))
    np.cumsum(incr, axis=1, out=mart[:, 1:, :])
    states = mart + np.asarray(config.start)
    return PathEnsemble(config.times(), states, mart, np.zeros_like(mart))


def sample_bm(config: PathConfig) -> ProcessPath:
    """One Clifford Brownian path: ``n+1`` independent N(0, dt) increments per step."""
    return _bm_block(config, 1, 0, BM_STREAM).path(0)


def sample_ensemble(config: PathConfig, n_paths: int, threads: int | None = None,
                    block_size: int = 4096, stream=BM_STREAM) -> PathEnsemble:
    """``n_paths`` independent paths; path ``i`` lives in block ``i // block_size``.

    Path 0 coincides with :func:`sample_bm` for the same config.
    """
    parts = map_blocks(lambda b, s, e: _bm_block(config, e - s, b, stream), n_paths, threads,
                       block_size)
    return PathEnsemble.concat(parts)


def reduce_ensemble(config: PathConfig, n_paths: int, stat: Callable[[PathEnsemble], np.ndarray],
                    threads: int | None = None, block_size: int = 4096,
                    stream=BM_STREAM) -> Moments:
    """Moments of a per-path statistic without holding the whole ensemble in memory.

    ``stat`` maps a block of paths to an array of shape ``(paths, ...)``.
    """
    def work(b, s, e):
        return Moments.of(stat(_bm_block(config, e - s, b, stream)))
    return Moments.combine(map_blocks(work, n_paths, threads, block_size))


# ---------------------------------------------------------------------------
# Clifford-valued processes built from a path


ProcessFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def bm_process(times: np.ndarray, states: np.ndarray) -> np.ndarray:
    """The Brownian motion itself, embedded in Cl(n)."""
    return embed_paravector(states, states.shape[-1] - 1)


def bm_square_minus_t(times: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``B(t)^2 - t`` with the square taken as a Clifford product."""
    b = bm_process(times, states)
    out = geometric_product(b, b)
    out[..., 0] -= times
    return out


def bm_square_compensated(times: np.ndarray, states: np.ndarray) -> np.ndarray:
    """``B(t)^2 - (1 - n) t``: for para-vector increments E[dB dB] = (1 - n) dt."""
    n = states.shape[-1] - 1
    b = bm_process(times, states)
    out = geometric_product(b, b)
    out[..., 0] -= (1 - n) * times
    return out


def drifted(direction: int = 1, rate: float = 1.0) -> ProcessFn:
    """``B(t) + rate * t * e_direction`` (a control that is not a martingale)."""
    def process(times, states):
        out = bm_process(times, states)
        blade = 0 if direction == 0 else 1 << (direction - 1)
        out[..., blade] += rate * times
        return out
    process.__name__ = f"drifted_e{direction}"
    return process


# ---------------------------------------------------------------------------
# Martingale test


Functional = Callable[[np.ndarray], np.ndarray]


def _g_one(prefix):
    return np.ones(prefix.shape[0])


def _g_sc(prefix):
    return prefix[:, -1, 0]


def _g_norm(prefix):
    return np.sqrt(np.sum(prefix[:, -1, :] ** 2, axis=-1))


def _g_sign(prefix):
    return np.sign(prefix[:, -1, 0])


DEFAULT_FUNCTIONALS: dict[str, Functional] = {
    "one": _g_one,
    "sc": _g_sc,
    "para_norm": _g_norm,
    "sign_sc": _g_sign,
}


def grid_index(times: np.ndarray, t: float) -> int:
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not on the path grid")
    return k


@dataclass(frozen=True)
class MartingaleEntry:
    functional: str
    component: int
    mean: float
    stderr: float

    @property
    def passed(self) -> bool:
        return abs(self.mean) <= 3.0 * self.stderr


@dataclass(frozen=True)
class MartingaleReport:
    s: float
    t: float
    n_paths: int
    process: str
    entries: tuple[MartingaleEntry, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[MartingaleEntry]:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "t": self.t,
            "n_paths": self.n_paths,
            "process": self.process,
            "passed": self.passed,
            "entries": [
                {"functional": e.functional, "component": e.component, "mean": e.mean,
                 "stderr": e.stderr, "passed": e.passed}
                for e in self.entries
            ],
        }


def martingale_test(paths: PathEnsemble, s: float, t: float,
                    test_functionals: dict[str, Functional] | None = None,
                    process: ProcessFn = bm_process, block_size: int = 4096) -> MartingaleReport:
    """Orthogonality test of ``E[X(t) | F_s] = X(s)``.

    For each functional ``g`` of the path prefix up to ``s`` and each Clifford
    component, estimates ``E[(X(t) - X(s)) g]`` and its standard error; the
    entry passes when the mean is within three standard errors of zero.
    """
    if len(paths) == 0:
        raise ValueError("martingale test needs a nonempty ensemble")
    if not 0 <= s < t:
        raise ValueError("need 0 <= s < t")
    times = paths.times
    ks, kt = grid_index(times, s), grid_index(times, t)
    funcs = DEFAULT_FUNCTIONALS if test_functionals is None else test_functionals

    moments: dict[str, list[Moments]] = {name: [] for name in funcs}
    for start in range(0, len(paths), block_size):
        block = paths.states[start:start + block_size]
        xs = process(times[ks], block[:, ks, :])
        xt = process(times[kt], block[:, kt, :])
        delta = xt - xs
        prefix = block[:, : ks + 1, :]
        prefix.flags.writeable = False
        for name, g in funcs.items():
            moments[name].append(Moments.of(delta * np.asarray(g(prefix))[:, None]))

    entries = []
    for name in funcs:
        mom = Moments.combine(moments[name])
        for c, (m, se) in enumerate(zip(mom.mean, mom.stderr)):
            entries.append(MartingaleEntry(name, c, float(m), float(se)))
    return MartingaleReport(float(s), float(t), len(paths), getattr(process, "__name__", "process"),
                            tuple(entries))


# ---------------------------------------------------------------------------
# Path functionals


def quadratic_covariation(path: ProcessPath | PathEnsemble, i: int, j: int) -> np.ndarray:
    """Running sum of ``dX_i dX_j`` at every grid time (first entry 0)."""
    x = path.states
    d = x.shape[-1]
    if not (0 <= i < d and 0 <= j < d):
        raise IndexError(f"component indices must lie in 0..{d - 1}")
    if x.shape[-2] < 2:
        raise ValueError("need at least two grid points")
    dx = np.diff(x, axis=-2)
    out = np.zeros(x.shape[:-1])
    np.cumsum(dx[..., i] * dx[..., j], axis=-1, out=out[..., 1:])
    return out


def reflect_path(path: ProcessPath, stop_index: int) -> ProcessPath:
    """``B*(t) = B(t)`` up to the stop time and ``2 B(T) - B(t)`` after it."""
    if not 0 <= stop_index <= path.n_steps:
        raise IndexError(f"stop index {stop_index} outside 0..{path.n_steps}")
    states = path.states.copy()
    states[stop_index + 1:] = 2.0 * states[stop_index] - states[stop_index + 1:]
    mart = states - states[0]
    return ProcessPath(path.times, states, mart, np.zeros_like(mart))


def _region_mask(region_test, states: np.ndarray) -> np.ndarray:
    mask = np.asarray(region_test(states))
    if mask.shape != states.shape[:-1]:
        mask = np.array([bool(region_test(s)) for s in states.reshape(-1, states.shape[-1])])
        mask = mask.reshape(states.shape[:-1])
    return mask.astype(bool)


def first_hit(path: ProcessPath, region_test) -> StoppedPath:
    """First grid index whose state satisfies ``region_test``.

    ``region_test`` receives an array of states ``(..., n+1)`` and returns a
    boolean array of the leading shape (a per-point predicate also works).
    """
    mask = _region_mask(region_test, path.states)
    hits = np.flatnonzero(mask)
    if hits.size:
        return StoppedPath(path, int(hits[0]), "boundary-hit")
    return StoppedPath(path, path.n_steps, "time-exhausted")


def first_hit_indices(paths: PathEnsemble, region_test) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`first_hit`: ``(stop_index, hit)`` arrays over the ensemble."""
    mask = _region_mask(region_test, paths.states)
    hit = mask.any(axis=1)
    idx = np.where(hit, mask.argmax(axis=1), paths.states.shape[1] - 1)
    return idx, hit


def mart_norm_estimate(paths, t_max: float | None = None) -> float:
    """``sqrt(E[sup_{t <= T} ||M(t)||^2])`` with the coefficient Euclidean norm.

    ``paths`` is a :class:`PathEnsemble`, a list of :class:`ProcessPath`, or an
    array ``(paths, steps+1, components)``.  The norm is real-valued by
    construction; the Clifford-valued inner product is never used.
    """
    if isinstance(paths, PathEnsemble):
        x, times = paths.states, paths.times
    elif isinstance(paths, (list, tuple)):
        if not paths:
            raise ValueError("empty ensemble")
        x, times = np.stack([p.states for p in paths]), paths[0].times
    else:
        x, times = np.asarray(paths, dtype=float), None
    if x.shape[0] == 0:
        raise ValueError("empty ensemble")
    if t_max is not None:
        if times is None:
            raise ValueError("t_max needs a time grid")
        x = x[:, : int(np.searchsorted(times, t_max, side="right"))]
    sq = np.max(np.sum(x * x, axis=-1), axis=-1)
    return float(math.sqrt(Moments.of(sq).mean))


def ensemble_component_report(samples: np.ndarray, labels: Sequence[str] | None = None) -> dict:
    """JSON-ready per-component mean/stderr/count."""
    mom = Moments.of(samples.reshape(len(samples), -1))
    labels = labels or [f"c{i}" for i in range(len(mom.mean))]
    return {
        lab: {"mean": float(m), "stderr": float(se), "count": mom.count}
        for lab, m, se in zip(labels, mom.mean, mom.stderr)
    }


def with_seed(config: PathConfig, seed: int) -> PathConfig:
    return replace(config, seed=seed)


def paravector_norm_squared(states: np.ndarray) -> np.ndarray:
    """``sc(x conj(x))`` evaluated through the algebra, for cross-checks."""
    n = states.shape[-1] - 1
    x = embed_paravector(states, n)
    return geometric_product(x, conjugate_coeffs(x))[..., 0]
