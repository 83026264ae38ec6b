"""Chart-level Riemannian geometry: metrics, map jets, splittings and derivatives.

Everything is local to a single chart.  Fields are given by evaluator
callables and differentiated by central differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Callable

import numpy as np

from .exterior import (
    DimensionError,
    ExtSpace,
    KForm,
    KVector,
    _index_array,
    compound,
    derivation,
    interior,
    wedge,
)


class GeometryError(ValueError):
    pass


def _central(fn, x, h, richardson=False):
    """Central-difference partials of ``fn`` at ``x``; result has leading axis i."""
    x = np.asarray(x, dtype=float)

    def once(step):
        out = []
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = step
            out.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * step))
        return np.stack(out)

    d = once(h)
    if richardson:
        d2 = once(h / 2)
        d = (4 * d2 - d) / 3
    return d


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


class MetricField:
    """A metric on a chart, given as ``x -> symmetric positive matrix``."""

    def __init__(self, fn: Callable | None = None, dim: int | None = None,
                 constant=None, h_fd: float = 1e-4, richardson: bool = False):
        if constant is not None:
            constant = np.array(constant, dtype=float)
            dim = constant.shape[0]
        elif fn is None or dim is None:
            raise GeometryError("give either a constant matrix or (fn, dim)")
        self.fn = fn
        self.dim = int(dim)
        self.constant = constant
        self.h_fd = h_fd
        self.richardson = richardson

    @classmethod
    def euclidean(cls, n: int) -> "MetricField":
        return cls(constant=np.eye(n))

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def __call__(self, x) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        g = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise DimensionError(f"metric evaluator returned shape {g.shape}")
        return g

    def derivative(self, x) -> np.ndarray:
        """``dg[l, i, j] = d_l g_ij``."""
        if self.constant is not None:
            return np.zeros((self.dim,) * 3)
        return _central(self, x, self.h_fd, self.richardson)

    def space(self, x, orientation: int = 1) -> ExtSpace:
        return ExtSpace(self.dim, self(x), orientation)

    def scaled(self, f: Callable) -> "MetricField":
        """The metric ``f(x)^2 g``."""
        return MetricField(lambda x: f(x) ** 2 * self(x), self.dim, h_fd=self.h_fd,
                           richardson=self.richardson)


def _metric_at(g, x, dim=None) -> np.ndarray:
    if isinstance(g, MetricField):
        return g(x)
    if g is None:
        return np.eye(dim)
    return np.asarray(g, dtype=float)


@dataclass(frozen=True)
class MapJet:
    """Value, Jacobian and optional second derivatives of a map at a point.

    ``J[a, i] = d_i u^a``; ``H[a, i, j] = d_i d_j u^a``.
    """

    x: np.ndarray
    u: np.ndarray
    J: np.ndarray
    H: np.ndarray | None = None

    def __post_init__(self):
        for name in ("x", "u", "J"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.J.shape != (self.u.size, self.x.size):
            raise DimensionError(f"Jacobian shape {self.J.shape} does not match "
                                 f"({self.u.size}, {self.x.size})")
        if self.H is not None:
            H = np.asarray(self.H, dtype=float)
            if H.shape != (self.u.size, self.x.size, self.x.size):
                raise DimensionError(f"second-derivative shape {H.shape} is wrong")
            object.__setattr__(self, "H", H)

    @property
    def n1(self) -> int:
        return self.x.size

    @property
    def n2(self) -> int:
        return self.u.size

    @classmethod
    def linear(cls, J, x=None) -> "MapJet":
        J = np.asarray(J, dtype=float)
        x = np.zeros(J.shape[1]) if x is None else np.asarray(x, dtype=float)
        return cls(x, J @ x, J, np.zeros((J.shape[0], J.shape[1], J.shape[1])))


def _jac(J):
    return J.J if isinstance(J, MapJet) else np.asarray(J, dtype=float)


class MapField:
    """A smooth map between charts given by evaluators.

    ``value(x)`` is required; ``jacobian`` and ``hessian`` fall back to central
    differences when omitted.
    """

    def __init__(self, n1: int, n2: int, value: Callable, jacobian: Callable | None = None,
                 hessian: Callable | None = None, h_fd: float = 1e-4, h_fd2: float = 1e-3):
        self.n1, self.n2 = int(n1), int(n2)
        self.value = value
        self._jacobian = jacobian
        self._hessian = hessian
        self.h_fd = h_fd
        self.h_fd2 = h_fd2

    @classmethod
    def linear(cls, A, b=None) -> "MapField":
        A = np.array(A, dtype=float)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        n2, n1 = A.shape
        return cls(n1, n2, lambda x: A @ np.asarray(x) + b, lambda x: A,
                   lambda x: np.zeros((n2, n1, n1)))

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(x), dtype=float)
        return _central(self.value, x, self.h_fd).T

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._hessian is not None:
            return np.asarray(self._hessian(x), dtype=float)
        d = _central(self.jacobian, x, self.h_fd2)  # d[j, a, i]
        H = np.transpose(d, (1, 2, 0))
        return 0.5 * (H + np.swapaxes(H, 1, 2))

    def jet(self, x, second: bool = False) -> MapJet:
        x = np.asarray(x, dtype=float)
        return MapJet(x, np.asarray(self.value(x), dtype=float), self.jacobian(x),
                      self.hessian(x) if second else None)

    def compose(self, inner: "MapField") -> "MapField":
        """``self o inner``."""
        return MapField(
            inner.n1, self.n2,
            lambda x: self.value(inner.value(x)),
            lambda x: self.jacobian(inner.value(x)) @ inner.jacobian(x),
            h_fd=self.h_fd, h_fd2=self.h_fd2,
        )


class FormField:
    """A k-form on a chart: ``x -> coefficient array`` (or KForm)."""

    def __init__(self, dim: int, degree: int, fn: Callable | None = None, constant=None,
                 h_fd: float = 1e-4, richardson: bool = False):
        self.dim, self.degree = int(dim), int(degree)
        if constant is not None:
            c = constant.coeffs if isinstance(constant, KForm) else np.asarray(constant, dtype=float)
            if c.shape != (comb(self.dim, self.degree),):
                raise DimensionError("constant coefficients have the wrong length")
            constant = c
        elif fn is None:
            raise GeometryError("give either constant coefficients or an evaluator")
        self.fn = fn
        self.constant = constant
        self.h_fd = h_fd
        self.richardson = richardson

    @classmethod
    def from_form(cls, a: KForm) -> "FormField":
        return cls(a.space.dim, a.degree, constant=a.coeffs)

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def coeffs(self, x) -> np.ndarray:
        if self.constant is not None:
            return self.constant
        c = self.fn(np.asarray(x, dtype=float))
        c = c.coeffs if isinstance(c, KForm) else np.asarray(c, dtype=float)
        if c.shape != (comb(self.dim, self.degree),):
            raise DimensionError("form evaluator returned the wrong number of coefficients")
        return c

    def at(self, x, metric=None, orientation: int = 1) -> KForm:
        g = _metric_at(metric, x, self.dim)
        return KForm(ExtSpace(self.dim, g, orientation), self.degree, self.coeffs(x))

    def coeff_derivative(self, x) -> np.ndarray:
        """``dc[j, I] = d_j alpha_I``."""
        if self.constant is not None:
            return np.zeros((self.dim, self.constant.size))
        return _central(self.coeffs, x, self.h_fd, self.richardson)


# ---------------------------------------------------------------------------
# pointwise metric quantities
# ---------------------------------------------------------------------------


def christoffel(g: MetricField, x) -> np.ndarray:
    """``Gamma[k, i, j]`` of the Levi-Civita connection at ``x``."""
    if g.is_constant:
        return np.zeros((g.dim,) * 3)
    gx = g(x)
    try:
        np.linalg.cholesky(gx)
    except np.linalg.LinAlgError as exc:
        raise GeometryError("metric is not positive definite") from exc
    dg = g.derivative(x)  # dg[l, i, j]
    # lowered symbols Gamma_{l i j} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    gam = np.einsum("kl,lij->kij", np.linalg.inv(gx), low)
    return 0.5 * (gam + np.swapaxes(gam, 1, 2))


def pullback_metric(J, h) -> np.ndarray:
    """``(u^* h)_ij = h_ab d_i u^a d_j u^b``; ``h`` is the target metric at u(x)."""
    A = _jac(J)
    if isinstance(h, MetricField):
        if not isinstance(J, MapJet):
            raise GeometryError("a metric field needs a MapJet to locate u(x)")
        h = h(J.u)
    h = _metric_at(h, None, A.shape[0])
    P = A.T @ h @ A
    return 0.5 * (P + P.T)


def du_norm_sq(J, g, h) -> float:
    """``|du|^2 = tr_g(u^* h)``."""
    A = _jac(J)
    x = J.x if isinstance(J, MapJet) else None
    gx = _metric_at(g, x, A.shape[1])
    return float(np.trace(np.linalg.solve(gx, pullback_metric(J, h))))


def du_norm_sq_frame(J, g, h) -> float:
    """``sum_i h(du e_i, du e_i)`` over a g-orthonormal frame."""
    A = _jac(J)
    x = J.x if isinstance(J, MapJet) else None
    E = ExtSpace(A.shape[1], _metric_at(g, x, A.shape[1])).orthonormal_frame()
    P = pullback_metric(J, h)
    return float(np.einsum("ia,ij,ja->", E, P, E))


# ---------------------------------------------------------------------------
# vertical / horizontal splitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitFrame:
    """g-orthonormal frame adapted to ker du and its orthogonal complement.

    ``status`` is ``"regular"`` (maximal rank), ``"degenerate"`` (0 < rank <
    maximal) or ``"critical"`` (du = 0).
    """

    vertical: np.ndarray
    horizontal: np.ndarray
    metric: np.ndarray
    status: str = "regular"
    orientation: int = 1
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def dim(self) -> int:
        return self.metric.shape[0]

    @property
    def rank(self) -> int:
        return self.horizontal.shape[1]

    @property
    def n_vertical(self) -> int:
        return self.vertical.shape[1]

    @property
    def frame(self) -> np.ndarray:
        return np.column_stack([self.vertical, self.horizontal])

    @property
    def space(self) -> ExtSpace:
        return ExtSpace(self.dim, self.metric, self.orientation)

    def vertical_part(self, v) -> np.ndarray:
        V = self.vertical
        return V @ (V.T @ self.metric @ np.asarray(v, dtype=float))

    def horizontal_part(self, v) -> np.ndarray:
        H = self.horizontal
        return H @ (H.T @ self.metric @ np.asarray(v, dtype=float))

    def horizontal_projector(self) -> np.ndarray:
        return self.horizontal @ self.horizontal.T @ self.metric

    @classmethod
    def coordinate(cls, n: int, vertical, orientation: int = 1) -> "SplitFrame":
        """Split of Euclidean R^n with the given coordinate axes vertical."""
        vertical = list(vertical)
        horizontal = [i for i in range(n) if i not in vertical]
        I = np.eye(n)
        V, H = I[:, vertical], I[:, horizontal]
        if vertical and np.linalg.det(np.column_stack([V, H])) * orientation < 0:
            V = V.copy()
            V[:, 0] *= -1
        return cls(V, H, np.eye(n), "regular", orientation)


def horizontal_split(J, g=None, h=None, rank_tol: float = 1e-8, orientation: int = 1,
                     target_orientation: int = 1) -> SplitFrame:
    """Split the source tangent space at a point into ker du and its complement.

    The horizontal frame is ordered so that du maps it to a positively oriented
    basis of the target (when du is onto); the vertical frame is then oriented
    so that vertical ^ horizontal is positive for the source orientation.
    """
    A = _jac(J)
    n2, n1 = A.shape
    x = J.x if isinstance(J, MapJet) else None
    gx = _metric_at(g, x, n1)
    if isinstance(h, MetricField):
        hx = h(J.u)
    else:
        hx = _metric_at(h, None, n2)
    E = ExtSpace(n1, gx).orthonormal_frame()
    L = np.linalg.cholesky(hx)
    M = L.T @ A @ E
    _, s, Wt = np.linalg.svd(M)
    W = Wt.T
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return SplitFrame(E.copy(), np.zeros((n1, 0)), gx, "critical", orientation, s)
    r = int(np.sum(s > rank_tol * smax))
    status = "regular" if r == min(n1, n2) else "degenerate"
    H = E @ W[:, :r]
    V = E @ W[:, r:]
    # re-orthogonalize each block against the metric
    H = _reorthonormalize(H, gx)
    V = _reorthonormalize(V - H @ (H.T @ gx @ V), gx) if V.shape[1] else V
    if r == n2 and np.linalg.det(A @ H) * target_orientation < 0:
        H[:, 0] *= -1
    if V.shape[1] and np.linalg.det(np.column_stack([V, H])) * orientation < 0:
        V[:, 0] *= -1
    return SplitFrame(V, H, gx, status, orientation, s)


def _reorthonormalize(F, g):
    """Modified Gram-Schmidt in the g inner product, two passes."""
    F = np.array(F, dtype=float)
    for _ in range(2):
        for j in range(F.shape[1]):
            for i in range(j):
                F[:, j] -= (F[:, i] @ g @ F[:, j]) * F[:, i]
            F[:, j] /= np.sqrt(F[:, j] @ g @ F[:, j])
    return F


# ---------------------------------------------------------------------------
# (p, q) types
# ---------------------------------------------------------------------------


def _type_of(n_vert: int, n: int, k: int) -> np.ndarray:
    return (_index_array(n, k) < n_vert).sum(axis=1) if k else np.zeros(1, dtype=int)


def type_decompose(a, split: SplitFrame) -> dict:
    """Components ``{(p, q): a^(p,q)}`` with p vertical and q horizontal slots."""
    B = split.frame
    n, k, nv = B.shape[0], a.degree, split.n_vertical
    Binv = np.linalg.inv(B)
    if isinstance(a, KForm):
        c = compound(B, k).T @ a.coeffs
        back = compound(Binv, k).T
    elif isinstance(a, KVector):
        c = compound(Binv, k) @ a.coeffs
        back = compound(B, k)
    else:
        raise TypeError("expected a KForm or KVector")
    p_of = _type_of(nv, n, k)
    out = {}
    for p in range(max(0, k - (n - nv)), min(k, nv) + 1):
        mask = p_of == p
        out[(p, k - p)] = type(a)(a.space, k, back @ np.where(mask, c, 0.0))
    return out


def type_component(a, split: SplitFrame, p: int, q: int):
    comps = type_decompose(a, split)
    return comps.get((p, q), type(a).zero(a.space, a.degree))


def off_type_size(a, split: SplitFrame, p: int, q: int) -> float:
    """Largest coefficient of ``a`` outside type (p, q)."""
    comps = type_decompose(a, split)
    return max((c.max_abs() for t, c in comps.items() if t != (p, q)), default=0.0)


def pure_type(a, split: SplitFrame, tol: float = 1e-12):
    """The (p, q) label of ``a`` if it is of pure type within ``tol``, else None."""
    comps = type_decompose(a, split)
    big = [t for t, c in comps.items() if c.max_abs() > tol]
    if not big:
        return "zero"
    return big[0] if len(big) == 1 else None


@dataclass(frozen=True)
class InteriorTypeResult:
    labels: dict
    defect: float


def interior_type_check(v, a: KForm, split: SplitFrame) -> InteriorTypeResult:
    """Contract with the vertical and horizontal parts of ``v`` component by component.

    For every component a^(p,q): v_vert _| a^(p,q) must be of type (p-1, q) and
    v_hor _| a^(p,q) of type (p, q-1).  ``defect`` is the largest off-type
    coefficient encountered.
    """
    vv, vh = split.vertical_part(v), split.horizontal_part(v)
    defect = 0.0
    labels = {}
    for (p, q), comp in type_decompose(a, split).items():
        if a.degree == 0:
            break
        iv, ih = interior(vv, comp), interior(vh, comp)
        if p > 0:
            defect = max(defect, off_type_size(iv, split, p - 1, q))
        else:
            defect = max(defect, iv.max_abs())
        if q > 0:
            defect = max(defect, off_type_size(ih, split, p, q - 1))
        else:
            defect = max(defect, ih.max_abs())
        labels[(p, q)] = {"vertical": (p - 1, q), "horizontal": (p, q - 1)}
    return InteriorTypeResult(labels, defect)


# ---------------------------------------------------------------------------
# covariant derivatives and divergences
# ---------------------------------------------------------------------------


def covariant_derivative_form(alpha: FormField, g: MetricField, V, x) -> KForm:
    """``nabla_V alpha`` at ``x``."""
    x = np.asarray(x, dtype=float)
    V = np.asarray(V, dtype=float)
    a = alpha.at(x, g)
    dc = alpha.coeff_derivative(x)
    gam = christoffel(g, x)
    GV = np.einsum("j,lji->li", V, gam)
    return KForm(a.space, a.degree, V @ dc) - derivation(a, GV)


def exterior_derivative(alpha: FormField, x) -> KForm:
    """``d alpha`` at ``x`` by central differences (metric independent)."""
    n, k = alpha.dim, alpha.degree
    sp = ExtSpace(n)
    if k == n:
        return KForm.zero(sp, n) if n else KForm.zero(sp, 0)
    dc = alpha.coeff_derivative(x)
    out = KForm.zero(sp, k + 1)
    for j in range(n):
        out = out + wedge(sp.basis_form(j), KForm(sp, k, dc[j]))
    return out


def is_closed(alpha: FormField, points, tol: float = 1e-6) -> tuple[bool, float]:
    """Finite-difference closedness check over sample points."""
    if alpha.is_constant or alpha.degree == alpha.dim:
        return True, 0.0
    worst = max(exterior_derivative(alpha, x).max_abs() for x in points)
    return worst <= tol, float(worst)


def divergence_mixed(B: Callable, u: MapField, g1: MetricField, g2: MetricField, x,
                     h_fd: float = 1e-4) -> np.ndarray:
    """Divergence of a section ``B[a, j]`` of T*M1 (x) u^*TM2 at ``x``.

    ``(Div B)^a = g1^{ij} (d_i B^a_j - Gamma^l_ij B^a_l + Gt^a_bc(u) d_i u^b B^c_j)``.
    """
    x = np.asarray(x, dtype=float)
    Bx = np.asarray(B(x), dtype=float)
    dB = _central(B, x, h_fd)  # dB[i, a, j]
    gam1 = christoffel(g1, x)
    ux = np.asarray(u.value(x), dtype=float)
    gam2 = _christoffel_at(g2, ux)
    J = u.jacobian(x)
    ginv = np.linalg.inv(g1(x))
    term = (np.einsum("iaj->aij", dB)
            - np.einsum("lij,al->aij", gam1, Bx)
            + np.einsum("abc,bi,cj->aij", gam2, J, Bx))
    return np.einsum("ij,aij->a", ginv, term)


def _christoffel_at(g: MetricField, y):
    return christoffel(g, y)


def _push_slots(T, J, q):
    """Apply J to the last q (contravariant) slots of T."""
    out = T
    for m in range(q):
        axis = out.ndim - q + m
        out = np.moveaxis(np.tensordot(J, out, axes=([1], [axis])), 0, axis)
    return out


def _tensor_divergence(P: Callable, g: MetricField, x, q: int, h_fd: float) -> np.ndarray:
    """``(Div P)^{t..} = g^{ij} nabla_i P_j^{t..}`` for P in T*M (x) (TM)^q."""
    Px = np.asarray(P(x), dtype=float)
    dP = _central(P, x, h_fd)  # dP[i, j, t...]
    gam = christoffel(g, x)
    nab = dP - np.einsum("lij,l...->ij...", gam, Px)
    for m in range(q):
        axis = 2 + m
        # + Gamma^{t_m}_{i l} P_j^{..l..}
        moved = np.tensordot(gam, Px, axes=([2], [1 + m]))  # (t, i, j, rest...)
        moved = np.moveaxis(moved, 0, axis)  # (i, j, ..t.., )
        nab = nab + moved
    return np.einsum("ij,ij...->...", np.linalg.inv(g(x)), nab)


def skew_defect(Px: np.ndarray, g: np.ndarray) -> float:
    """How far ``P_j^{t..}`` is from totally skew once all indices are lowered."""
    q = Px.ndim - 1
    low = Px
    for m in range(q):
        low = np.moveaxis(np.tensordot(g, low, axes=([1], [1 + m])), 0, 1 + m)
    from itertools import permutations
    from .exterior import perm_sign
    worst = 0.0
    for perm in permutations(range(q + 1)):
        worst = max(worst, float(np.max(np.abs(low - perm_sign(perm) * np.transpose(low, perm)))))
    return worst


@dataclass(frozen=True)
class CommuteResult:
    lhs: np.ndarray
    rhs: np.ndarray
    defect: float


def div_lambda_commute_check(P: Callable, u: MapField, q: int, g1: MetricField,
                             g2: MetricField, x, h_fd: float = 1e-3,
                             skew_tol: float = 1e-10) -> CommuteResult:
    """Compare ``Div(Lambda^q(du) P)`` with ``Lambda^q(du)(Div P)`` at ``x``.

    ``P(x)`` returns an array ``P[j, t_1, .., t_q]`` (one covector slot, q vector
    slots) that must be totally skew after lowering indices.
    """
    x = np.asarray(x, dtype=float)
    Px = np.asarray(P(x), dtype=float)
    if Px.shape != (g1.dim,) * (q + 1):
        raise DimensionError(f"P has shape {Px.shape}, expected {(g1.dim,) * (q + 1)}")
    sd = skew_defect(Px, g1(x))
    if sd > skew_tol * max(1.0, float(np.max(np.abs(Px)))):
        raise GeometryError(f"P is not totally skew (defect {sd:.3e})")

    def A(y):
        return _push_slots(np.asarray(P(y), dtype=float), u.jacobian(y), q)

    Ax = A(x)
    dA = _central(A, x, h_fd)  # (i, j, v...)
    gam1 = christoffel(g1, x)
    ux = np.asarray(u.value(x), dtype=float)
    gam2 = christoffel(g2, ux)
    J = u.jacobian(x)
    nab = dA - np.einsum("lij,l...->ij...", gam1, Ax)
    conn = np.einsum("abc,bi->aic", gam2, J)  # Gt^a_bc d_i u^b
    for m in range(q):
        moved = np.tensordot(conn, Ax, axes=([2], [1 + m]))  # (v, i, j, rest)
        nab = nab + np.moveaxis(moved, 0, 2 + m)
    lhs = np.einsum("ij,ij...->...", np.linalg.inv(g1(x)), nab)
    rhs = _push_slots(_tensor_divergence(P, g1, x, q, h_fd), J, q)
    return CommuteResult(lhs, rhs, float(np.max(np.abs(lhs - rhs), initial=0.0)))


def interior_field(beta: FormField, g: MetricField) -> Callable:
    """The field ``P = . _| beta`` as ``P[j, t..] = beta_{j s..} g^{s t}..``."""
    q = beta.degree - 1

    def P(x):
        T = beta.at(x, g).to_tensor()
        ginv = np.linalg.inv(g(x))
        for m in range(q):
            T = np.moveaxis(np.tensordot(ginv, T, axes=([1], [1 + m])), 0, 1 + m)
        return T

    return P


# ---------------------------------------------------------------------------
# jet files
# ---------------------------------------------------------------------------


def load_jets(path) -> tuple[dict, list[MapJet]]:
    """Read a JSON-lines jet batch whose first line is the header ``{n1, n2}``."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise GeometryError("empty jet file")
    try:
        header = json.loads(lines[0])
        n1, n2 = int(header["n1"]), int(header["n2"])
    except (ValueError, KeyError, TypeError) as exc:
        raise GeometryError(f"bad jet file header: {exc}") from exc
    jets = []
    for lineno, ln in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(ln)
            jet = MapJet(rec["x"], rec["u"], rec["J"], rec.get("H"))
        except (ValueError, KeyError, TypeError) as exc:
            raise GeometryError(f"line {lineno}: {exc}") from exc
        if jet.n1 != n1 or jet.n2 != n2:
            raise DimensionError(f"line {lineno}: jet is {jet.n1}->{jet.n2}, header says {n1}->{n2}")
        jets.append(jet)
    return header, jets


def dump_jets(path, jets, header: dict | None = None) -> None:
    jets = list(jets)
    head = dict(header or {})
    if jets:
        head.setdefault("n1", jets[0].n1)
        head.setdefault("n2", jets[0].n2)
    rows = [json.dumps(head, sort_keys=True)]
    for j in jets:
        rec = {"x": j.x.tolist(), "u": j.u.tolist(), "J": j.J.tolist()}
        if j.H is not None:
            rec["H"] = j.H.tolist()
        rows.append(json.dumps(rec))
    Path(path).write_text("\n".join(rows) + "\n")
