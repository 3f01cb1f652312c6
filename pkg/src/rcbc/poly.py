"""Multivariate polynomials, polynomial matrices and monomial bases.

Exponent vectors are plain tuples of non-negative ints.  Coefficients are
doubles.  Everything here is immutable once constructed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

Exponent = Tuple[int, ...]


def monomials_upto(n_vars: int, max_degree: int, min_degree: int = 0) -> List[Exponent]:
    """All exponent vectors with ``min_degree <= |alpha| <= max_degree``.

    Graded-lex order: total degree ascending, then lexicographically
    descending within a degree (x1 > x2 > ... ; x1^2 > x1x2 > x1x3 > x2^2 ...).
    """
    out: List[Exponent] = []
    for d in range(min_degree, max_degree + 1):
        block = []
        for combo in itertools.combinations_with_replacement(range(n_vars), d):
            e = [0] * n_vars
            for i in combo:
                e[i] += 1
            block.append(tuple(e))
        block.sort(reverse=True)
        out.extend(block)
    return out


def eval_monomials(exps: Sequence[Exponent], x: np.ndarray) -> np.ndarray:
    """Evaluate monomials at one point (1-D x) or a batch (rows of 2-D x)."""
    e = np.asarray(exps, dtype=np.int64).reshape(len(exps), -1)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.prod(x[None, :] ** e, axis=1)
    return np.prod(x[:, None, :] ** e[None, :, :], axis=2)


@dataclass(frozen=True)
class MonomialDict:
    """Ordered monomial basis; the order is whatever ``entries`` says."""

    n_vars: int
    entries: Tuple[Exponent, ...]

    def __post_init__(self):
        ents = tuple(tuple(int(a) for a in e) for e in self.entries)
        object.__setattr__(self, "entries", ents)
        if len(set(ents)) != len(ents):
            raise ValueError("duplicate monomials in dictionary")
        for e in ents:
            if len(e) != self.n_vars or min(e, default=0) < 0:
                raise ValueError(f"bad exponent vector {e} for n_vars={self.n_vars}")

    @property
    def includes_constant(self) -> bool:
        return (0,) * self.n_vars in self.entries

    @property
    def max_degree(self) -> int:
        return max((sum(e) for e in self.entries), default=0)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return eval_monomials(self.entries, x)

    def exponent_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=np.int64).reshape(len(self), self.n_vars)

    def to_list(self) -> List[List[int]]:
        return [list(e) for e in self.entries]


def build_dict(n_vars: int, max_degree: int, include_constant: bool = False) -> MonomialDict:
    if n_vars < 1 or max_degree < 1:
        raise ValueError("n_vars and max_degree must be >= 1")
    lo = 0 if include_constant else 1
    return MonomialDict(n_vars, tuple(monomials_upto(n_vars, max_degree, lo)))


class Polynomial:
    """Sparse polynomial: exponent tuple -> coefficient (zeros never stored)."""

    __slots__ = ("n_vars", "_terms")

    def __init__(self, n_vars: int, terms: Mapping[Exponent, float] | None = None):
        self.n_vars = n_vars
        clean: Dict[Exponent, float] = {}
        for e, c in (terms or {}).items():
            e = tuple(int(a) for a in e)
            if len(e) != n_vars:
                raise ValueError(f"exponent {e} has wrong length for n_vars={n_vars}")
            c = float(c)
            if c != 0.0:
                clean[e] = clean.get(e, 0.0) + c
                if clean[e] == 0.0:
                    del clean[e]
        self._terms = clean

    @classmethod
    def constant(cls, n_vars: int, c: float) -> "Polynomial":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def monomial(cls, exp: Exponent, c: float = 1.0) -> "Polynomial":
        return cls(len(exp), {tuple(exp): c})

    @property
    def terms(self) -> Dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, exp: Exponent) -> float:
        return self._terms.get(tuple(exp), 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=0)

    def _check(self, other: "Polynomial"):
        if other.n_vars != self.n_vars:
            raise ValueError("polynomials live in different variable counts")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n_vars, other)
        self._check(other)
        t = dict(self._terms)
        for e, c in other._terms.items():
            t[e] = t.get(e, 0.0) + c
        return Polynomial(self.n_vars, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Polynomial(self.n_vars, {e: c * other for e, c in self._terms.items()})
        self._check(other)
        t: Dict[Exponent, float] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0.0) + c1 * c2
        return Polynomial(self.n_vars, t)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, Polynomial)
            and other.n_vars == self.n_vars
            and other._terms == self._terms
        )

    def __hash__(self):
        return hash((self.n_vars, frozenset(self._terms.items())))

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if not self._terms:
            return 0.0 if x.ndim == 1 else np.zeros(x.shape[0])
        exps = list(self._terms)
        coefs = np.array([self._terms[e] for e in exps])
        return eval_monomials(exps, x) @ coefs

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in sorted(self._terms.items(), key=lambda kv: (sum(kv[0]), [-a for a in kv[0]])):
            mono = "*".join(
                f"x{i + 1}" + (f"^{a}" if a > 1 else "") for i, a in enumerate(e) if a
            )
            parts.append(f"{c:+.6g}" + (f"*{mono}" if mono else ""))
        return " ".join(parts)


@dataclass(frozen=True)
class PolyMatrix:
    """Rectangular grid of polynomials."""

    n_vars: int
    entries: Tuple[Tuple[Polynomial, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        object.__setattr__(self, "entries", rows)
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("PolyMatrix must be rectangular")
        for r in rows:
            for p in r:
                if p.n_vars != self.n_vars:
                    raise ValueError("entry has wrong variable count")

    @property
    def shape(self) -> Tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    @classmethod
    def zeros(cls, n_vars: int, rows: int, cols: int) -> "PolyMatrix":
        z = Polynomial(n_vars)
        return cls(n_vars, tuple(tuple(z for _ in range(cols)) for _ in range(rows)))

    @classmethod
    def from_constant(cls, n_vars: int, mat) -> "PolyMatrix":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        return cls(
            n_vars,
            tuple(tuple(Polynomial.constant(n_vars, v) for v in row) for row in mat),
        )

    @classmethod
    def identity(cls, n_vars: int, size: int) -> "PolyMatrix":
        return cls.from_constant(n_vars, np.eye(size))

    @classmethod
    def from_coeffs(cls, n_vars: int, coeffs: Mapping[Exponent, np.ndarray]) -> "PolyMatrix":
        """Build from ``{exponent: constant matrix}`` (all the same shape)."""
        shape = None
        for c in coeffs.values():
            shape = np.shape(c)
            break
        if shape is None:
            raise ValueError("need at least one coefficient matrix")
        grid = [[{} for _ in range(shape[1])] for _ in range(shape[0])]
        for e, c in coeffs.items():
            c = np.asarray(c, dtype=float)
            for i, j in zip(*np.nonzero(c)):
                grid[i][j][tuple(e)] = c[i, j]
        return cls(n_vars, tuple(tuple(Polynomial(n_vars, t) for t in row) for row in grid))

    def __getitem__(self, ij) -> Polynomial:
        i, j = ij
        return self.entries[i][j]

    def _check(self, other: "PolyMatrix"):
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        self._check(other)
        return PolyMatrix(
            self.n_vars,
            tuple(tuple(a + b for a, b in zip(r1, r2)) for r1, r2 in zip(self.entries, other.entries)),
        )

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c: float) -> "PolyMatrix":
        return PolyMatrix(self.n_vars, tuple(tuple(p * c for p in r) for r in self.entries))

    def __matmul__(self, other) -> "PolyMatrix":
        if not isinstance(other, PolyMatrix):
            other = PolyMatrix.from_constant(self.n_vars, other)
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = Polynomial(self.n_vars)
                for k in range(self.cols):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if not a.is_zero() and not b.is_zero():
                        acc = acc + a * b
                row.append(acc)
            out.append(tuple(row))
        return PolyMatrix(self.n_vars, tuple(out))

    def __rmatmul__(self, other) -> "PolyMatrix":
        return PolyMatrix.from_constant(self.n_vars, other) @ self

    @property
    def T(self) -> "PolyMatrix":
        return PolyMatrix(self.n_vars, tuple(zip(*self.entries)))

    def is_symmetric(self) -> bool:
        r, c = self.shape
        return r == c and all(self[i, j] == self[j, i] for i in range(r) for j in range(i))

    def degree(self) -> int:
        return max((p.degree() for r in self.entries for p in r), default=0)

    def exponents(self) -> List[Exponent]:
        s = {e for r in self.entries for p in r for e, _ in p.items()}
        return sorted(s, key=lambda e: (sum(e), [-a for a in e]))

    def coeffs(self) -> Dict[Exponent, np.ndarray]:
        """``{exponent: constant matrix}`` expansion."""
        out: Dict[Exponent, np.ndarray] = {}
        for i, r in enumerate(self.entries):
            for j, p in enumerate(r):
                for e, c in p.items():
                    if e not in out:
                        out[e] = np.zeros(self.shape)
                    out[e][i, j] = c
        return out

    def evaluate(self, x) -> np.ndarray:
        """Value at one point ``(rows, cols)`` or a batch ``(N, rows, cols)``."""
        x = np.asarray(x, dtype=float)
        cf = self.coeffs()
        if not cf:
            shape = self.shape if x.ndim == 1 else (x.shape[0],) + self.shape
            return np.zeros(shape)
        exps = list(cf)
        stack = np.stack([cf[e] for e in exps])
        mono = eval_monomials(exps, x)
        return np.tensordot(mono, stack, axes=(-1, 0))

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """(exponents[k, n], coefficients[k, rows, cols]) for compiled kernels."""
        cf = self.coeffs()
        if not cf:
            return np.zeros((1, self.n_vars), dtype=np.int64), np.zeros((1,) + self.shape)
        exps = list(cf)
        return np.asarray(exps, dtype=np.int64), np.stack([cf[e] for e in exps])

    def allclose(self, other: "PolyMatrix", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        self._check(other)
        a, b = self.coeffs(), other.coeffs()
        scale = max([np.max(np.abs(v)) for v in a.values()] + [np.max(np.abs(v)) for v in b.values()] + [0.0])
        for e in set(a) | set(b):
            d = a.get(e, 0.0) - b.get(e, 0.0)
            if np.max(np.abs(d)) > atol + rtol * scale:
                return False
        return True

    def to_json(self):
        return [[[[list(e), c] for e, c in p.items()] for p in r] for r in self.entries]

    @classmethod
    def from_json(cls, n_vars: int, data) -> "PolyMatrix":
        return cls(
            n_vars,
            tuple(tuple(Polynomial(n_vars, {tuple(e): c for e, c in p}) for p in r) for r in data),
        )


def monomial_vector(d: MonomialDict) -> PolyMatrix:
    """The column vector M(x) of a dictionary as a PolyMatrix."""
    return PolyMatrix(d.n_vars, tuple((Polynomial.monomial(e),) for e in d.entries))


def factor_C(d: MonomialDict) -> PolyMatrix:
    """C(x) with C(x) x == M(x).

    Each monomial x^a goes to column j = first variable with a_j >= 1 and
    contributes x^(a - e_j) there.
    """
    if d.includes_constant:
        raise ValueError("dictionary contains the constant monomial; M(0) != 0")
    n = d.n_vars
    grid = [[Polynomial(n) for _ in range(n)] for _ in d.entries]
    for r, e in enumerate(d.entries):
        j = next(i for i, a in enumerate(e) if a >= 1)
        rest = list(e)
        rest[j] -= 1
        grid[r][j] = Polynomial.monomial(tuple(rest))
    return PolyMatrix(n, tuple(tuple(row) for row in grid))


@dataclass(frozen=True)
class GramBasis:
    """Basis for a Gram representation.

    Scalar SOS: ``monomials`` only, ``aux_dim == 0``.  Matrix SOS: the basis
    element ``k`` is ``y_{aux[k]} * x^{monomials[k]}`` with ``aux_dim`` aux
    variables; ordered aux-major.
    """

    n_vars: int
    monomials: Tuple[Exponent, ...]
    aux_dim: int = 0
    aux: Tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.monomials)

    @property
    def half(self) -> Tuple[Exponent, ...]:
        """Distinct x-monomials used per aux index."""
        if self.aux_dim == 0:
            return self.monomials
        k = len(self.monomials) // self.aux_dim
        return self.monomials[:k]


def gram_basis_scalar(n_vars: int, degree: int) -> GramBasis:
    if degree % 2:
        raise ValueError("scalar SOS degree must be even")
    return GramBasis(n_vars, tuple(monomials_upto(n_vars, degree // 2)))


def gram_basis_matrix(block_dim: int, n_vars: int, entry_degree: int) -> GramBasis:
    if block_dim < 1:
        raise ValueError("block_dim must be >= 1")
    half = monomials_upto(n_vars, math.ceil(entry_degree / 2))
    monos = tuple(m for _ in range(block_dim) for m in half)
    aux = tuple(i for i in range(block_dim) for _ in half)
    return GramBasis(n_vars, monos, block_dim, aux)


def gram_product_index(half: Sequence[Exponent]) -> Dict[Exponent, List[Tuple[int, int]]]:
    """Map each product exponent m_k + m_l to the (k, l) pairs producing it."""
    out: Dict[Exponent, List[Tuple[int, int]]] = {}
    for k, a in enumerate(half):
        for l, b in enumerate(half):
            e = tuple(p + q for p, q in zip(a, b))
            out.setdefault(e, []).append((k, l))
    return out


def gram_form(G: np.ndarray, basis: GramBasis) -> PolyMatrix:
    """Polynomial (matrix) represented by Gram matrix G over ``basis``.

    Scalar: returns a 1x1 PolyMatrix b^T G b.  Matrix: returns N(x) with
    y^T N(x) y == (y (x) m)^T G (y (x) m).
    """
    n = basis.n_vars
    half = basis.half
    prods = gram_product_index(half)
    dim = basis.aux_dim or 1
    h = len(half)
    G = np.asarray(G, dtype=float)
    grid = []
    for a in range(dim):
        row = []
        for b in range(dim):
            blk = G[a * h:(a + 1) * h, b * h:(b + 1) * h]
            terms = {}
            for e, pairs in prods.items():
                terms[e] = sum(blk[k, l] for k, l in pairs)
            row.append(Polynomial(n, terms))
        grid.append(tuple(row))
    return PolyMatrix(n, tuple(grid))


def binom(n: int, k: int) -> int:
    return math.comb(n, k)


def iter_exponents(polys: Iterable[Polynomial]):
    for p in polys:
        for e, _ in p.items():
            yield e
