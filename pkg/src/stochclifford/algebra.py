"""Real Clifford algebra Cl(n) with e_j^2 = -1.

Basis blades are encoded as bitmasks: bit ``k-1`` set means the generator
``e_k`` is a factor, and ``0`` is the scalar blade.  A multivector stores its
``2**n`` real coefficients in blade order, so ``coeffs[0b011]`` is the
``e_1 e_2`` coefficient.

All products go through :func:`geometric_product`, which works on plain
arrays of shape ``(..., 2**n)`` so the same kernel serves single values and
whole Monte Carlo ensembles.
"""

from __future__ import annotations

import itertools
import json
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 16
_TABLE_DIM = 10


class AlgebraError(ValueError):
    """Invalid blade index, dimension or operand combination."""


def _check_dim(n: int) -> None:
    if not 1 <= n <= MAX_DIM:
        raise AlgebraError(f"dimension {n} outside supported range 1..{MAX_DIM}")


def grade(bits: int) -> int:
    return int(bits).bit_count()


def _swap_parity(a: int, b: np.ndarray) -> np.ndarray:
    # number of (i in a, j in b) with i > j, i.e. transpositions to sort a+b
    swaps = np.zeros(b.shape, dtype=np.int64)
    a >>= 1
    while a:
        swaps += np.bitwise_count(a & b)
        a >>= 1
    return swaps


def _sign_row(a: int, n: int) -> np.ndarray:
    b = np.arange(1 << n, dtype=np.int64)
    parity = _swap_parity(a, b) + np.bitwise_count(a & b)
    return np.where(parity & 1, -1.0, 1.0)


@lru_cache(maxsize=None)
def sign_table(n: int) -> np.ndarray:
    """Signs of ``e_A e_B`` for all blade pairs, shape ``(2**n, 2**n)``."""
    _check_dim(n)
    if n > _TABLE_DIM:
        raise AlgebraError(f"sign table for n={n} is too large; use blade_product")
    table = np.stack([_sign_row(a, n) for a in range(1 << n)])
    table.flags.writeable = False
    return table


def blade_product(a: int, b: int, n: int) -> tuple[int, int]:
    """Product of two basis blades.

    Returns ``(sign, a ^ b)`` with ``e_a e_b = sign * e_{a^b}``.  The sign
    counts the transpositions needed to bring the concatenated generator
    list into increasing order plus one factor of -1 per shared generator.
    """
    _check_dim(n)
    limit = 1 << n
    if not (0 <= a < limit and 0 <= b < limit):
        raise AlgebraError(f"blade index out of range for n={n}: {a}, {b}")
    swaps = 0
    t = a >> 1
    while t:
        swaps += (t & b).bit_count()
        t >>= 1
    parity = swaps + (a & b).bit_count()
    return (-1 if parity & 1 else 1), a ^ b


def blade_product_bruteforce(a: int, b: int, n: int) -> tuple[int, int]:
    """Reference blade product by explicit bubble sort of generator indices.

    Independent of the bitmask arithmetic in :func:`blade_product`; used as
    the oracle in self-tests.
    """
    limit = 1 << n
    if not (0 <= a < limit and 0 <= b < limit):
        raise AlgebraError(f"blade index out of range for n={n}: {a}, {b}")
    factors = [k + 1 for k in range(n) if a >> k & 1] + [k + 1 for k in range(n) if b >> k & 1]
    sign = 1
    for end in range(len(factors) - 1, 0, -1):
        for i in range(end):
            if factors[i] > factors[i + 1]:
                factors[i], factors[i + 1] = factors[i + 1], factors[i]
                sign = -sign
    out: list[int] = []
    for k in factors:
        if out and out[-1] == k:
            out.pop()
            sign = -sign  # e_k e_k = -1
        else:
            out.append(k)
    bits = 0
    for k in out:
        bits |= 1 << (k - 1)
    return sign, bits


def dim_from_size(size: int) -> int:
    n = int(size).bit_length() - 1
    if n < 1 or 1 << n != size:
        raise AlgebraError(f"coefficient length {size} is not 2**n with n >= 1")
    return n


_MATMUL_DIM = 4


@lru_cache(maxsize=None)
def _gather_tables(n: int) -> tuple[np.ndarray, np.ndarray]:
    # (x y)_c = sum_a x_a sign(a, a^c) y_{a^c}
    size = 1 << n
    perm = np.arange(size)[None, :] ^ np.arange(size)[:, None]
    signs = np.array([_sign_row(a, n)[perm[a]] for a in range(size)])
    perm.flags.writeable = False
    signs.flags.writeable = False
    return perm, signs


@lru_cache(maxsize=None)
def _structure_tensor(n: int) -> np.ndarray:
    # M[a, b*size + c] = sign(a, b) if a^b == c, so that (x y) = y @ (x @ M)
    size = 1 << n
    m = np.zeros((size, size, size))
    for a in range(size):
        m[a, np.arange(size), np.arange(size) ^ a] = _sign_row(a, n)
    m = m.reshape(size, size * size)
    m.flags.writeable = False
    return m


def geometric_product(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Clifford product of coefficient arrays, broadcasting over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    size = x.shape[-1]
    if y.shape[-1] != size:
        raise AlgebraError(f"dimension mismatch: {size} vs {y.shape[-1]} coefficients")
    n = dim_from_size(size)
    out_shape = np.broadcast_shapes(x.shape, y.shape)
    if n <= _MATMUL_DIM:
        xb = np.broadcast_to(x, out_shape).reshape(-1, size)
        yb = np.broadcast_to(y, out_shape).reshape(-1, 1, size)
        left = (xb @ _structure_tensor(n)).reshape(-1, size, size)
        return np.matmul(yb, left).reshape(out_shape)
    out = np.zeros(out_shape)
    if n <= _TABLE_DIM:
        perm, signs = _gather_tables(n)
        rows = ((a, perm[a], signs[a]) for a in range(size))
    else:
        idx = np.arange(size)
        rows = ((a, idx ^ a, _sign_row(a, n)[idx ^ a]) for a in range(size))
    for a, p, sg in rows:
        xa = x[..., a : a + 1]
        if x.ndim == 1 and xa[0] == 0.0:
            continue
        out += xa * sg * y[..., p]
    return out


@lru_cache(maxsize=None)
def _conj_signs(n: int) -> np.ndarray:
    g = np.bitwise_count(np.arange(1 << n)).astype(np.int64)
    signs = np.where((g * (g + 1) // 2) % 2, -1.0, 1.0)
    signs.flags.writeable = False
    return signs


def conjugate_coeffs(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x * _conj_signs(dim_from_size(x.shape[-1]))


def vector_blades(n: int) -> np.ndarray:
    """Blade indices of e_0 = 1, e_1, ..., e_n."""
    return np.array([0] + [1 << k for k in range(n)])


def embed_paravector(comps: np.ndarray, n: int) -> np.ndarray:
    """Map ``(..., n+1)`` para-vector components to ``(..., 2**n)`` coefficients."""
    comps = np.asarray(comps, dtype=float)
    if comps.shape[-1] != n + 1:
        raise AlgebraError(f"para-vector in Cl({n}) needs {n + 1} components, got {comps.shape[-1]}")
    out = np.zeros(comps.shape[:-1] + (1 << n,))
    out[..., vector_blades(n)] = comps
    return out


def left_unit_product(k: int, x: np.ndarray) -> np.ndarray:
    """``e_k x`` for coefficient arrays (``k = 0`` is the identity)."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        return x.copy()
    n = dim_from_size(x.shape[-1])
    a = 1 << (k - 1)
    out = np.empty_like(x)
    out[..., np.arange(1 << n) ^ a] = x * _sign_row(a, n)
    return out


@lru_cache(maxsize=None)
def _right_signs(a: int, n: int) -> np.ndarray:
    signs = np.array([blade_product(i, a, n)[0] for i in range(1 << n)], dtype=float)
    signs.flags.writeable = False
    return signs


def right_unit_product(x: np.ndarray, k: int) -> np.ndarray:
    """``x e_k`` for coefficient arrays (``k = 0`` is the identity)."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        return x.copy()
    n = dim_from_size(x.shape[-1])
    a = 1 << (k - 1)
    out = np.empty_like(x)
    out[..., np.arange(1 << n) ^ a] = x * _right_signs(a, n)
    return out


class Multivector:
    """Immutable element of Cl(n).

    Supports ``+``, ``-``, scalar multiplication and the Clifford product via
    ``*`` (or :func:`mv_mul`).
    """

    __slots__ = ("dim", "coeffs")

    def __init__(self, dim: int, coeffs: Iterable[float] | np.ndarray):
        _check_dim(dim)
        arr = np.array(coeffs, dtype=float)
        if arr.shape != (1 << dim,):
            raise AlgebraError(f"Cl({dim}) needs {1 << dim} coefficients, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise AlgebraError("multivector coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "coeffs", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    @classmethod
    def zero(cls, dim: int) -> Multivector:
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: float = 1.0) -> Multivector:
        c = np.zeros(1 << dim)
        c[0] = value
        return cls(dim, c)

    @classmethod
    def blade(cls, dim: int, bits: int, value: float = 1.0) -> Multivector:
        if not 0 <= bits < 1 << dim:
            raise AlgebraError(f"blade {bits} invalid for n={dim}")
        c = np.zeros(1 << dim)
        c[bits] = value
        return cls(dim, c)

    @classmethod
    def basis(cls, dim: int, k: int) -> Multivector:
        """Generator ``e_k``; ``k = 0`` gives the unit scalar."""
        if not 0 <= k <= dim:
            raise AlgebraError(f"generator e_{k} invalid for n={dim}")
        return cls.blade(dim, 0 if k == 0 else 1 << (k - 1))

    @classmethod
    def from_paravector(cls, comps: Sequence[float] | np.ndarray, dim: int | None = None) -> Multivector:
        comps = np.asarray(comps, dtype=float)
        n = len(comps) - 1 if dim is None else dim
        return cls(n, embed_paravector(comps, n))

    def _coerce(self, other) -> np.ndarray | None:
        if isinstance(other, Multivector):
            if other.dim != self.dim:
                raise AlgebraError(f"dimension mismatch: Cl({self.dim}) vs Cl({other.dim})")
            return other.coeffs
        if isinstance(other, (int, float, np.floating, np.integer)):
            c = np.zeros(1 << self.dim)
            c[0] = float(other)
            return c
        return None

    def __add__(self, other):
        c = self._coerce(other)
        return NotImplemented if c is None else Multivector(self.dim, self.coeffs + c)

    __radd__ = __add__

    def __sub__(self, other):
        c = self._coerce(other)
        return NotImplemented if c is None else Multivector(self.dim, self.coeffs - c)

    def __rsub__(self, other):
        c = self._coerce(other)
        return NotImplemented if c is None else Multivector(self.dim, c - self.coeffs)

    def __neg__(self):
        return Multivector(self.dim, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return mv_mul(self, other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.dim, self.coeffs * float(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.dim, self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Multivector(self.dim, self.coeffs / float(other))
        return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.dim, self.coeffs.tobytes()))

    def __getitem__(self, bits: int) -> float:
        return float(self.coeffs[bits])

    def conj(self) -> Multivector:
        return conjugate(self)

    def grade_part(self, g: int) -> Multivector:
        mask = np.bitwise_count(np.arange(1 << self.dim)) == g
        return Multivector(self.dim, np.where(mask, self.coeffs, 0.0))

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector."""
        return float(np.linalg.norm(self.coeffs))

    def paravector(self) -> np.ndarray:
        """Components ``(x_0, ..., x_n)``; other blades are ignored."""
        return self.coeffs[vector_blades(self.dim)].copy()

    def is_paravector(self, atol: float = 0.0) -> bool:
        rest = np.delete(self.coeffs, vector_blades(self.dim))
        return bool(np.all(np.abs(rest) <= atol))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "coeffs": {str(i): float(v) for i, v in enumerate(self.coeffs) if v != 0.0},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> Multivector:
        dim = int(data["dim"])
        _check_dim(dim)
        c = np.zeros(1 << dim)
        for key, value in data.get("coeffs", {}).items():
            bits = int(key)
            if not 0 <= bits < 1 << dim:
                raise AlgebraError(f"blade {bits} invalid for n={dim}")
            c[bits] = float(value)
        return cls(dim, c)

    @classmethod
    def from_json(cls, text: str) -> Multivector:
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        terms = []
        for bits, v in enumerate(self.coeffs):
            if v == 0.0:
                continue
            name = "".join(f"e{k + 1}" for k in range(self.dim) if bits >> k & 1) or "1"
            terms.append(f"{v:+g}*{name}")
        return f"Multivector(Cl({self.dim}): {' '.join(terms) or '0'})"


class ParaVector:
    """Point ``x_0 + sum_k x_k e_k`` of R^{n+1} seen inside Cl(n)."""

    __slots__ = ("comps",)

    def __init__(self, comps: Iterable[float] | np.ndarray):
        arr = np.array(comps, dtype=float)
        if arr.ndim != 1 or len(arr) < 2:
            raise AlgebraError("para-vector needs at least two components (n >= 1)")
        arr.flags.writeable = False
        object.__setattr__(self, "comps", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ParaVector is immutable")

    @property
    def dim(self) -> int:
        return len(self.comps) - 1

    def to_multivector(self) -> Multivector:
        return Multivector.from_paravector(self.comps)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.comps, dtype=dtype)

    def __repr__(self):
        return f"ParaVector({list(self.comps)})"


def mv_mul(x: Multivector, y: Multivector) -> Multivector:
    if x.dim != y.dim:
        raise AlgebraError(f"dimension mismatch: Cl({x.dim}) vs Cl({y.dim})")
    return Multivector(x.dim, geometric_product(x.coeffs, y.coeffs))


def conjugate(x: Multivector) -> Multivector:
    """Clifford conjugation: fixes 1, negates each e_k, reverses products."""
    return Multivector(x.dim, conjugate_coeffs(x.coeffs))


def sc(x: Multivector) -> float:
    return float(x.coeffs[0])


def vec(x: Multivector) -> Multivector:
    return x.grade_part(1)


def _para_comps(x) -> np.ndarray:
    if isinstance(x, Multivector):
        return x.paravector()
    return np.asarray(x, dtype=float)


def para_norm(x) -> float:
    """Euclidean norm ``sqrt(sum x_k^2)`` of a para-vector."""
    return float(np.sqrt(np.sum(_para_comps(x) ** 2)))


def clifford_inner_product(f_samples: Sequence[Multivector], g_samples: Sequence[Multivector],
                           weights: Sequence[float]) -> Multivector:
    """Quadrature form of the Clifford-valued inner product ``sum_i w_i conj(f_i) g_i``."""
    if not (len(f_samples) == len(g_samples) == len(weights)):
        raise AlgebraError(
            f"length mismatch: {len(f_samples)} f, {len(g_samples)} g, {len(weights)} weights")
    if len(f_samples) == 0:
        raise AlgebraError("inner product needs at least one sample")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise AlgebraError("quadrature weights must be nonnegative")
    dim = f_samples[0].dim
    if any(s.dim != dim for s in itertools.chain(f_samples, g_samples)):
        raise AlgebraError("all samples must live in the same algebra")
    f = np.stack([s.coeffs for s in f_samples])
    g = np.stack([s.coeffs for s in g_samples])
    terms = geometric_product(conjugate_coeffs(f), g)
    return Multivector(dim, np.einsum("i,ij->j", w, terms))
