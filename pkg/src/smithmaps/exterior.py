"""Exterior algebra over a finite-dimensional oriented inner product space.

Forms and multivectors are stored densely: one real coefficient per strictly
increasing multi-index, ordered colexicographically.  Indices are 0-based in
code; the 1-based notation ``e^{12}`` used in docstrings means ``e^0 ^ e^1``.

Conventions (see docs/conventions.md):

* ``e^I(v_1, ..., v_k) = det(v_{i_a}^{(b)})`` -- determinant convention, so
  ``|e^{12}| = 1`` and decomposable unit forms have comass one.
* interior product is contraction in the first slot:
  ``(v _| a)(x_2, ..., x_k) = a(v, x_2, ..., x_k)``; it is the adjoint of
  ``v_flat ^ (.)`` for the induced inner product.
* Hodge star is defined by ``a ^ *b = <a, b> vol`` with
  ``vol = orientation * sqrt(det g) e^{1...n}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb, factorial, sqrt

import numpy as np

MAX_DIM = 16


class ExteriorError(ValueError):
    """Base class for exterior-algebra contract violations."""


class DimensionError(ExteriorError):
    pass


class DegreeError(ExteriorError):
    pass


class RankError(ExteriorError):
    """Raised by :func:`hadamard_check` when the source is larger than the target.

    The (still meaningful) report is attached as ``.result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# ---------------------------------------------------------------------------
# multi-index tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Strictly increasing k-subsets of range(n) in colexicographic order."""
    if k < 0 or k > n:
        return ()
    subsets = list(combinations(range(n), k))
    subsets.sort(key=lambda s: tuple(reversed(s)))
    return tuple(subsets)


@lru_cache(maxsize=None)
def index_lookup(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {idx: r for r, idx in enumerate(multi_indices(n, k))}


@lru_cache(maxsize=None)
def _index_array(n: int, k: int) -> np.ndarray:
    idx = multi_indices(n, k)
    if k == 0:
        return np.zeros((1, 0), dtype=int)
    return np.array(idx, dtype=int).reshape(len(idx), k)


def perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq``; 0 if it has repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@lru_cache(maxsize=None)
def _wedge_table(n: int, p: int, q: int):
    look = index_lookup(n, p + q)
    src_a, src_b, dst, sgn = [], [], [], []
    for ia, I in enumerate(multi_indices(n, p)):
        sI = set(I)
        for ib, J in enumerate(multi_indices(n, q)):
            if sI.intersection(J):
                continue
            merged = I + J
            src_a.append(ia)
            src_b.append(ib)
            dst.append(look[tuple(sorted(merged))])
            sgn.append(perm_sign(merged))
    return (np.array(src_a, dtype=int), np.array(src_b, dtype=int),
            np.array(dst, dtype=int), np.array(sgn, dtype=float))


@lru_cache(maxsize=None)
def _interior_table(n: int, k: int):
    # (v _| a)_J = sum_i v^i * sign * a_{i u J}
    look = index_lookup(n, k)
    rows, cols, src, sgn = [], [], [], []
    for jr, J in enumerate(multi_indices(n, k - 1)):
        for i in range(n):
            if i in J:
                continue
            before = sum(1 for j in J if j < i)
            rows.append(jr)
            cols.append(i)
            src.append(look[tuple(sorted(J + (i,)))])
            sgn.append(-1.0 if before % 2 else 1.0)
    return (np.array(rows, dtype=int), np.array(cols, dtype=int),
            np.array(src, dtype=int), np.array(sgn, dtype=float))


@lru_cache(maxsize=None)
def _complement_table(n: int, k: int):
    """For each k-index I: rank of its complement and sgn(I, I^c)."""
    look = index_lookup(n, n - k)
    ranks, signs = [], []
    for I in multi_indices(n, k):
        comp = tuple(i for i in range(n) if i not in I)
        ranks.append(look[comp])
        signs.append(perm_sign(I + comp))
    return np.array(ranks, dtype=int), np.array(signs, dtype=float)


def compound(A: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: entry (I, J) is the minor det A[I, J].

    Rows are k-subsets of the rows of A, columns k-subsets of its columns,
    both in colexicographic order.  This is the matrix of ``Lambda^k A``.
    Leading axes of ``A`` are treated as a batch.
    """
    A = np.asarray(A, dtype=float)
    *batch, m, n = A.shape
    rI = _index_array(m, k)
    cJ = _index_array(n, k)
    if k == 0:
        return np.ones((*batch, 1, 1))
    if len(rI) == 0 or len(cJ) == 0:
        return np.zeros((*batch, len(rI), len(cJ)))
    if k == 1:
        return A.copy()
    # Laplace expansion along the last column of each minor, building
    # Lambda^j A from Lambda^(j-1) A
    flat_A = A.reshape(*batch, m * n)
    C = flat_A
    width = n
    for j in range(2, k + 1):
        rows, drop, signs = _row_expansion(m, j)
        last, rest = _column_split(n, j)
        new = 0.0
        for t in range(j):
            a_idx = (rows[:, t, None] * n + last[None, :]).ravel()
            c_idx = (drop[:, t, None] * width + rest[None, :]).ravel()
            new = new + signs[t] * (np.take(flat_A, a_idx, axis=-1) * np.take(C, c_idx, axis=-1))
        C = new
        width = len(last)
    return C.reshape(*batch, len(rI), len(cJ))


@lru_cache(maxsize=None)
def _row_expansion(m: int, k: int):
    """For each k-subset I: its entries, the ranks of I minus each entry, and the cofactor signs."""
    I = _index_array(m, k)
    look = index_lookup(m, k - 1)
    drop = np.array([[look[tuple(np.delete(row, t))] for t in range(k)] for row in I], dtype=int)
    signs = np.array([(-1.0) ** (t + k - 1) for t in range(k)])
    return I, drop, signs


@lru_cache(maxsize=None)
def _column_split(n: int, k: int):
    """For each k-subset J: its last entry and the rank of the remaining (k-1)-subset."""
    J = _index_array(n, k)
    look = index_lookup(n, k - 1)
    return J[:, -1].copy(), np.array([look[tuple(row[:-1])] for row in J], dtype=int)


# ---------------------------------------------------------------------------
# spaces, forms and multivectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExtSpace:
    """Oriented inner product space ``(R^n, metric)``."""

    dim: int
    metric: np.ndarray | None = None
    orientation: int = 1

    def __post_init__(self):
        if not (1 <= self.dim <= MAX_DIM):
            raise DimensionError(f"dimension must be in [1, {MAX_DIM}], got {self.dim}")
        if self.orientation not in (1, -1):
            raise ExteriorError("orientation must be +1 or -1")
        g = np.eye(self.dim) if self.metric is None else np.array(self.metric, dtype=float)
        if g.shape != (self.dim, self.dim):
            raise DimensionError(f"metric shape {g.shape} does not match dim {self.dim}")
        if not np.allclose(g, g.T, atol=1e-12, rtol=0):
            raise ExteriorError("metric is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise ExteriorError("metric is not positive definite") from exc
        g.setflags(write=False)
        object.__setattr__(self, "metric", g)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_cache", {})

    @classmethod
    def euclidean(cls, n: int, orientation: int = 1) -> "ExtSpace":
        return cls(n, None, orientation)

    @property
    def is_euclidean(self) -> bool:
        return self._memo("euclid", lambda: bool(np.array_equal(self.metric, np.eye(self.dim))))

    def _memo(self, key, fn):
        cache = self._cache
        if key not in cache:
            cache[key] = fn()
        return cache[key]

    @property
    def inverse_metric(self) -> np.ndarray:
        return self._memo("ginv", lambda: np.linalg.inv(self.metric))

    @property
    def volume_factor(self) -> float:
        """sqrt(det g)."""
        return self._memo("sqrtdet", lambda: float(np.prod(np.diag(self._chol))))

    def orthonormal_frame(self) -> np.ndarray:
        """Columns form a positively oriented g-orthonormal basis."""
        def build():
            E = np.linalg.inv(self._chol).T  # E^T g E = I, det E > 0
            if self.orientation < 0:
                E = E.copy()
                E[:, 0] *= -1
            return E
        return self._memo("frame", build)

    def form_gram(self, k: int) -> np.ndarray:
        """Gram matrix <e^I, e^J> = det(g^{-1}[I, J]) on k-forms."""
        return self._memo(("fgram", k), lambda: np.eye(comb(self.dim, k)) if self.is_euclidean
                          else compound(self.inverse_metric, k))

    def vector_gram(self, k: int) -> np.ndarray:
        """Gram matrix <e_I, e_J> = det(g[I, J]) on k-vectors."""
        return self._memo(("vgram", k), lambda: np.eye(comb(self.dim, k)) if self.is_euclidean
                          else compound(self.metric, k))

    def same_as(self, other: "ExtSpace") -> bool:
        return (self is other or (self.dim == other.dim and self.orientation == other.orientation
                                  and np.array_equal(self.metric, other.metric)))

    def vol(self) -> "KForm":
        return KForm(self, self.dim, np.array([self.orientation * self.volume_factor]))

    def unit_top_vector(self) -> "KVector":
        """The positively oriented unit n-vector."""
        return KVector(self, self.dim, np.array([self.orientation / self.volume_factor]))

    def basis_form(self, *indices: int, coeff: float = 1.0) -> "KForm":
        """``coeff * e^{i_1} ^ ... ^ e^{i_k}`` from 0-based (unsorted) indices."""
        return _basis(KForm, self, indices, coeff)

    def basis_vector(self, *indices: int, coeff: float = 1.0) -> "KVector":
        return _basis(KVector, self, indices, coeff)


def _basis(cls, space, indices, coeff):
    k = len(indices)
    out = np.zeros(comb(space.dim, k))
    s = perm_sign(indices)
    if s == 0:
        return cls(space, k, out)
    if any(i < 0 or i >= space.dim for i in indices):
        raise DimensionError(f"index out of range for dim {space.dim}: {indices}")
    out[index_lookup(space.dim, k)[tuple(sorted(indices))]] = s * coeff
    return cls(space, k, out)


@dataclass(frozen=True, eq=False)
class _Graded:
    space: ExtSpace
    degree: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.space.dim
        if not (0 <= self.degree <= n):
            raise DegreeError(f"degree {self.degree} outside [0, {n}]")
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape != (comb(n, self.degree),):
            raise DimensionError(f"expected {comb(n, self.degree)} coefficients, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, space: ExtSpace, degree: int):
        return cls(space, degree, np.zeros(comb(space.dim, degree)))

    def _check(self, other):
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if not self.space.same_as(other.space):
            raise DimensionError("operands live on different spaces")
        if self.degree != other.degree:
            raise DegreeError(f"degree mismatch: {self.degree} vs {other.degree}")

    def _new(self, coeffs):
        return type(self)(self.space, self.degree, coeffs)

    def __add__(self, other):
        self._check(other)
        return self._new(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check(other)
        return self._new(self.coeffs - other.coeffs)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __mul__(self, c):
        return self._new(float(c) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._new(self.coeffs / float(c))

    def indices(self):
        return multi_indices(self.space.dim, self.degree)

    def terms(self, tol: float = 0.0):
        """(0-based index tuple, coefficient) pairs with |coeff| > tol."""
        return [(I, float(c)) for I, c in zip(self.indices(), self.coeffs) if abs(c) > tol]

    def coeff(self, *indices: int) -> float:
        s = perm_sign(indices)
        if s == 0:
            return 0.0
        return s * float(self.coeffs[index_lookup(self.space.dim, self.degree)[tuple(sorted(indices))]])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def allclose(self, other, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.max(np.abs(self.coeffs - other.coeffs), initial=0.0) <= atol)

    def to_tensor(self) -> np.ndarray:
        """Fully antisymmetric n^k array with T[I] = coefficient for sorted I."""
        n, k = self.space.dim, self.degree
        T = np.zeros((n,) * k)
        if k == 0:
            return np.array(self.coeffs[0])
        perms = _perm_table(k)
        for I, c in zip(self.indices(), self.coeffs):
            if c == 0.0:
                continue
            for perm, s in perms:
                T[tuple(I[p] for p in perm)] = s * c
        return T

    @classmethod
    def from_tensor(cls, space: ExtSpace, T: np.ndarray):
        """Inverse of :meth:`to_tensor`, reading sorted entries (antisymmetrizes)."""
        T = np.asarray(T, dtype=float)
        k = T.ndim
        if k == 0:
            return cls(space, 0, np.array([float(T)]))
        perms = _perm_table(k)
        idx = _index_array(space.dim, k)
        acc = np.zeros(len(idx))
        for perm, s in perms:
            acc += s * T[tuple(idx[:, p] for p in perm)]
        return cls(space, k, acc / factorial(k))


@lru_cache(maxsize=None)
def _perm_table(k: int):
    from itertools import permutations
    return tuple((p, perm_sign(p)) for p in permutations(range(k)))


class KForm(_Graded):
    """Alternating k-linear form, coefficients on the dual basis e^I."""

    def __call__(self, *vectors) -> float:
        return evaluate(self, vectors)

    def inner(self, other: "KForm") -> float:
        self._check(other)
        return float(self.coeffs @ self.space.form_gram(self.degree) @ other.coeffs)

    def norm(self) -> float:
        return sqrt(max(self.inner(self), 0.0))

    def raise_index(self) -> "KVector":
        """Metric identification Lambda^k V* -> Lambda^k V."""
        return KVector(self.space, self.degree, self.space.form_gram(self.degree) @ self.coeffs)

    def pullback(self, A: np.ndarray, source: ExtSpace) -> "KForm":
        """``A^* a`` for a linear map ``A: source -> self.space`` given as a matrix."""
        A = np.asarray(A, dtype=float)
        if A.shape != (self.space.dim, source.dim):
            raise DimensionError(f"map shape {A.shape} incompatible with {self.space.dim}x{source.dim}")
        if self.degree > source.dim:
            raise DegreeError("pullback degree exceeds source dimension")
        return KForm(source, self.degree, compound(A, self.degree).T @ self.coeffs)


class KVector(_Graded):
    """Element of Lambda^k V, coefficients on e_I."""

    def inner(self, other: "KVector") -> float:
        self._check(other)
        return float(self.coeffs @ self.space.vector_gram(self.degree) @ other.coeffs)

    def norm(self) -> float:
        return sqrt(max(self.inner(self), 0.0))

    def lower_index(self) -> KForm:
        return KForm(self.space, self.degree, self.space.vector_gram(self.degree) @ self.coeffs)

    @classmethod
    def from_vectors(cls, space: ExtSpace, vectors) -> "KVector":
        """v_1 ^ ... ^ v_k from a list of coordinate vectors."""
        V = np.column_stack([np.asarray(v, dtype=float) for v in vectors]) if len(vectors) else np.zeros((space.dim, 0))
        k = V.shape[1]
        return cls(space, k, compound(V, k)[:, 0] if k else np.ones(1))


def evaluate(a: KForm, vectors) -> float:
    """a(v_1, ..., v_k) = sum_I a_I det(V[I, :])."""
    vectors = list(vectors)
    if len(vectors) != a.degree:
        raise DegreeError(f"{a.degree}-form evaluated on {len(vectors)} vectors")
    if a.degree == 0:
        return float(a.coeffs[0])
    V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    if V.shape[0] != a.space.dim:
        raise DimensionError("vector dimension mismatch")
    return float(compound(V, a.degree)[:, 0] @ a.coeffs)


def evaluate_frame(a: KForm, V: np.ndarray) -> float:
    """Evaluate on the columns of an n x k matrix."""
    V = np.asarray(V, dtype=float)
    if a.degree == 0:
        return float(a.coeffs[0])
    return float(compound(V, a.degree)[:, 0] @ a.coeffs)


def pair(a: KForm, w: KVector) -> float:
    """Natural pairing a(w), no metric involved."""
    if a.degree != w.degree or a.space.dim != w.space.dim:
        raise DegreeError("pairing degree/dimension mismatch")
    return float(a.coeffs @ w.coeffs)


def flat(space: ExtSpace, v) -> KForm:
    """Vector -> 1-form via the metric."""
    return KForm(space, 1, space.metric @ np.asarray(v, dtype=float))


def sharp(a: KForm) -> np.ndarray:
    if a.degree != 1:
        raise DegreeError("sharp applies to 1-forms")
    return a.space.inverse_metric @ a.coeffs


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def wedge(a: _Graded, b: _Graded):
    """Exterior product; forms with forms or multivectors with multivectors."""
    if type(a) is not type(b):
        raise TypeError("wedge operands must both be forms or both be multivectors")
    if not a.space.same_as(b.space):
        raise DimensionError("wedge of elements on different spaces")
    n, p, q = a.space.dim, a.degree, b.degree
    if p + q > n:
        raise DegreeError(f"degree overflow: {p} + {q} > {n}")
    ia, ib, dst, sgn = _wedge_table(n, p, q)
    out = np.zeros(comb(n, p + q))
    np.add.at(out, dst, sgn * a.coeffs[ia] * b.coeffs[ib])
    return type(a)(a.space, p + q, out)


def wedge_all(*items):
    out = items[0]
    for b in items[1:]:
        out = wedge(out, b)
    return out


def hodge_star(a: _Graded):
    """Hodge star, characterised by ``a ^ *b = <a, b> vol``.

    Multivectors are starred through the metric identification.
    """
    if isinstance(a, KVector):
        return hodge_star(a.lower_index()).raise_index()
    sp, n, k = a.space, a.space.dim, a.degree
    ranks, signs = _complement_table(n, k)
    dual = sp.form_gram(k) @ a.coeffs  # <e^I, a>
    out = np.zeros(comb(n, n - k))
    out[ranks] = sp.orientation * sp.volume_factor * signs * dual
    return KForm(sp, n - k, out)


def interior(v, a: _Graded):
    """Contraction of a vector into the first slot of a form.

    For a multivector ``a`` the vector is first lowered to a covector, giving the
    adjoint of ``v ^ (.)`` on multivectors.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(a, KVector):
        return interior(v, a.lower_index()).raise_index()
    if a.degree == 0:
        raise DegreeError("interior product of a 0-form")
    n, k = a.space.dim, a.degree
    if v.shape != (n,):
        raise DimensionError(f"vector of shape {v.shape} on {n}-dimensional space")
    rows, cols, src, sgn = _interior_table(n, k)
    out = np.zeros(comb(n, k - 1))
    np.add.at(out, rows, sgn * v[cols] * a.coeffs[src])
    return KForm(a.space, k - 1, out)


def derivation(a: _Graded, A: np.ndarray):
    """Derivation extension of an endomorphism to k-forms or k-vectors.

    Forms: ``(D_A a)(x_1..x_k) = sum_m a(x_1, .., A x_m, .., x_k)``.
    Vectors: ``D_A(v_1 ^ .. ^ v_k) = sum_m v_1 ^ .. ^ A v_m ^ .. ^ v_k``.
    """
    A = np.asarray(A, dtype=float)
    k = a.degree
    if k == 0:
        return type(a).zero(a.space, 0)
    T = a.to_tensor()
    out = np.zeros_like(T)
    M = A if isinstance(a, KVector) else A.T
    for m in range(k):
        out += np.moveaxis(np.tensordot(M, T, axes=([1], [m])), 0, m)
    return type(a).from_tensor(a.space, out)


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearMap:
    """Linear map between inner product spaces, matrix of shape (n2, n1)."""

    matrix: np.ndarray
    source: ExtSpace
    target: ExtSpace

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.shape != (self.target.dim, self.source.dim):
            raise DimensionError(f"matrix shape {A.shape} != ({self.target.dim}, {self.source.dim})")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @classmethod
    def euclidean(cls, matrix) -> "LinearMap":
        A = np.asarray(matrix, dtype=float)
        return cls(A, ExtSpace(A.shape[1]), ExtSpace(A.shape[0]))

    def __call__(self, v):
        return self.matrix @ np.asarray(v, dtype=float)

    def compose(self, other: "LinearMap") -> "LinearMap":
        """self o other."""
        return LinearMap(self.matrix @ other.matrix, other.source, self.target)

    def pullback_metric(self) -> np.ndarray:
        """A^* g_2 as a matrix on the source."""
        return self.matrix.T @ self.target.metric @ self.matrix

    def norm_sq(self) -> float:
        """|A|^2 = tr_{g_1}(A^* g_2)."""
        return float(np.trace(self.source.inverse_metric @ self.pullback_metric()))


def lambda_k(A: LinearMap | np.ndarray, k: int) -> np.ndarray:
    """Matrix of Lambda^k A : Lambda^k V_1 -> Lambda^k V_2 on coordinate bases.

    Returns the C(n2,k) x C(n1,k) matrix of k x k minors (all zero when
    k exceeds either dimension).
    """
    M = A.matrix if isinstance(A, LinearMap) else np.asarray(A, dtype=float)
    n2, n1 = M.shape
    if k < 0:
        raise DegreeError("negative degree")
    if k > min(n1, n2):
        return np.zeros((comb(n2, k), comb(n1, k)))
    return compound(M, k)


def push_vector(A: LinearMap | np.ndarray, w: KVector, target: ExtSpace) -> KVector:
    """(Lambda^k A)(w)."""
    return KVector(target, w.degree, lambda_k(A, w.degree) @ w.coeffs)


@dataclass(frozen=True)
class HadamardResult:
    lhs: float
    rhs: float
    conformal_defect: float
    gap: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12 * max(1.0, self.rhs)


def hadamard_check(A: LinearMap | np.ndarray) -> HadamardResult:
    """Compare |Lambda^{n1} A| with |A|^{n1} / sqrt(n1)^{n1}.

    ``conformal_defect`` is the spectral norm of ``A^* g2 - (|A|^2/n1) g1``
    measured in a g1-orthonormal frame.  Raises :class:`RankError` (with the
    report attached) when n1 > n2.
    """
    if not isinstance(A, LinearMap):
        A = LinearMap.euclidean(A)
    n1, n2 = A.source.dim, A.target.dim
    E = A.source.orthonormal_frame()
    pulled = E.T @ A.pullback_metric() @ E
    pulled = 0.5 * (pulled + pulled.T)
    norm_sq = float(np.trace(pulled))
    rhs = norm_sq ** (n1 / 2) / n1 ** (n1 / 2)
    defect = float(np.linalg.norm(pulled - (norm_sq / n1) * np.eye(n1), 2))
    if n1 > n2:
        result = HadamardResult(0.0, rhs, defect, rhs)
        raise RankError(f"source dimension {n1} exceeds target dimension {n2}", result)
    lhs = sqrt(max(np.linalg.det(pulled), 0.0))
    return HadamardResult(lhs, rhs, defect, rhs - lhs)


@dataclass(frozen=True)
class HadamardBatch:
    lhs: np.ndarray
    rhs: np.ndarray
    conformal_defect: np.ndarray
    gap: np.ndarray


def hadamard_batch(A: np.ndarray) -> HadamardBatch:
    """:func:`hadamard_check` for a stack ``A[N, n2, n1]`` of Euclidean matrices, n1 <= n2."""
    A = np.asarray(A, dtype=float)
    N, n2, n1 = A.shape
    if n1 > n2:
        raise RankError(f"source dimension {n1} exceeds target dimension {n2}")
    P = np.einsum("nia,nib->nab", A, A)
    tr = np.trace(P, axis1=1, axis2=2)
    rhs = tr ** (n1 / 2) / n1 ** (n1 / 2)
    lhs = np.sqrt(np.maximum(np.linalg.det(P), 0.0))
    D = P - (tr / n1)[:, None, None] * np.eye(n1)
    defect = np.linalg.norm(D, 2, axis=(1, 2))
    return HadamardBatch(lhs, rhs, defect, rhs - lhs)
