"""Standard calibration forms, comass estimation and the P_alpha operator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb, factorial
from pathlib import Path

import numpy as np

from .exterior import (
    DegreeError,
    DimensionError,
    ExtSpace,
    KForm,
    KVector,
    _index_array,
    evaluate_frame,
    hodge_star,
    index_lookup,
    interior,
    wedge,
)


class CalibrationError(ValueError):
    pass


class PreconditionError(CalibrationError):
    """An input does not satisfy the hypotheses of the check being run."""


# 1-based structure constants.  phi_0 follows Bryant's sign convention; the
# remaining standard forms are derived from it (see docs/conventions.md).
DEFAULT_CONVENTIONS = {
    "associative": [
        [1, 2, 3, 1], [1, 4, 5, 1], [1, 6, 7, 1], [2, 4, 6, 1],
        [2, 5, 7, -1], [3, 4, 7, -1], [3, 5, 6, -1],
    ],
}

STANDARD_NAMES = (
    "kaehler", "kaehler-power", "special-lagrangian",
    "associative", "coassociative", "cayley",
)


@dataclass(frozen=True)
class CalibrationForm:
    form: KForm
    name: str = "custom"
    comass_certificate: float | None = None
    comass_tol: float | None = None

    @property
    def degree(self) -> int:
        return self.form.degree

    @property
    def dim(self) -> int:
        return self.form.space.dim


def _as_form(alpha) -> KForm:
    return alpha.form if isinstance(alpha, CalibrationForm) else alpha


def _table_form(space: ExtSpace, rows) -> KForm:
    out = KForm.zero(space, len(rows[0]) - 1)
    for *idx, c in rows:
        out = out + space.basis_form(*[i - 1 for i in idx], coeff=float(c))
    return out


def kaehler_form(space: ExtSpace) -> KForm:
    """omega = e^{12} + e^{34} + ... ."""
    n = space.dim
    if n % 2:
        raise CalibrationError(f"Kaehler form needs even dimension, got {n}")
    out = KForm.zero(space, 2)
    for j in range(n // 2):
        out = out + space.basis_form(2 * j, 2 * j + 1)
    return out


def kaehler_power(space: ExtSpace, p: int) -> KForm:
    """omega^p / p!."""
    omega = kaehler_form(space)
    if not 1 <= p <= space.dim // 2:
        raise CalibrationError(f"power {p} out of range for dimension {space.dim}")
    out = omega
    for _ in range(p - 1):
        out = wedge(out, omega)
    return out / factorial(p)


def special_lagrangian_form(space: ExtSpace) -> KForm:
    """Re(dz_1 ^ ... ^ dz_m) with z_j = x_{2j-1} + i x_{2j}."""
    n = space.dim
    if n % 2:
        raise CalibrationError(f"special Lagrangian form needs even dimension, got {n}")
    re, im = space.basis_form(0), space.basis_form(1)
    for j in range(1, n // 2):
        c, d = space.basis_form(2 * j), space.basis_form(2 * j + 1)
        re, im = wedge(re, c) - wedge(im, d), wedge(re, d) + wedge(im, c)
    return re


def associative_form(space: ExtSpace, conventions=None) -> KForm:
    if space.dim != 7:
        raise CalibrationError("associative form lives on R^7")
    table = (conventions or DEFAULT_CONVENTIONS)["associative"]
    return _table_form(space, table)


def cayley_form(space: ExtSpace, conventions=None) -> KForm:
    """Phi_0 = e^1 ^ phi_0 + psi_0, with R^7 occupying coordinates 2..8."""
    if space.dim != 8:
        raise CalibrationError("Cayley form lives on R^8")
    R7 = ExtSpace(7)
    phi = associative_form(R7, conventions)
    psi = hodge_star(phi)
    shift = np.zeros((7, 8))
    shift[:, 1:] = np.eye(7)
    # pull back along the coordinate projection R^8 -> R^7 dropping x_1
    phi8, psi8 = phi.pullback(shift, ExtSpace(8)), psi.pullback(shift, ExtSpace(8))
    phi8 = KForm(space, 3, phi8.coeffs)
    psi8 = KForm(space, 4, psi8.coeffs)
    return wedge(space.basis_form(0), phi8) + psi8


def standard_form(name: str, n: int, power: int = 2, conventions=None,
                  space: ExtSpace | None = None) -> CalibrationForm:
    """One of the standard calibrations on Euclidean R^n.

    ``conventions`` overrides the associative structure-constant table (used to
    inject deliberately broken tables in negative controls).
    """
    sp = space or ExtSpace(n)
    if sp.dim != n:
        raise DimensionError("space dimension does not match n")
    if name == "kaehler":
        form = kaehler_form(sp)
    elif name == "kaehler-power":
        form = kaehler_power(sp, power)
    elif name == "special-lagrangian":
        form = special_lagrangian_form(sp)
    elif name == "associative":
        form = associative_form(sp, conventions)
    elif name == "coassociative":
        if n != 7:
            raise CalibrationError("coassociative form lives on R^7")
        form = hodge_star(associative_form(sp, conventions))
    elif name == "cayley":
        form = cayley_form(sp, conventions)
    else:
        raise CalibrationError(f"unknown calibration {name!r} on R^{n}")
    return CalibrationForm(form, name)


def load_form_json(source) -> CalibrationForm:
    """Read ``{dim, degree, terms: [{indices: [...], coeff}]}`` (1-based indices)."""
    if isinstance(source, dict):
        doc = source
    else:
        doc = json.loads(Path(source).read_text())
    try:
        n, k, terms = int(doc["dim"]), int(doc["degree"]), doc["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CalibrationError(f"malformed form document: {exc}") from exc
    sp = ExtSpace(n)
    look = index_lookup(n, k)
    coeffs = np.zeros(comb(n, k))
    seen = set()
    for t in terms:
        idx = tuple(int(i) for i in t["indices"])
        if len(idx) != k:
            raise CalibrationError(f"term {idx} has wrong degree")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise CalibrationError(f"indices {idx} are not strictly increasing")
        if idx[0] < 1 or idx[-1] > n:
            raise CalibrationError(f"indices {idx} out of range 1..{n}")
        if idx in seen:
            raise CalibrationError(f"duplicate term {idx}")
        seen.add(idx)
        coeffs[look[tuple(i - 1 for i in idx)]] = float(t["coeff"])
    return CalibrationForm(KForm(sp, k, coeffs), doc.get("name", "custom"))


def form_to_json(alpha, name: str | None = None) -> dict:
    a = _as_form(alpha)
    return {
        "dim": a.space.dim,
        "degree": a.degree,
        "name": name or getattr(alpha, "name", "custom"),
        "terms": [{"indices": [i + 1 for i in I], "coeff": c} for I, c in a.terms()],
    }


# ---------------------------------------------------------------------------
# comass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComassResult:
    value: float
    frame: np.ndarray  # n x k, orthonormal for the form's metric
    restarts: int
    converged: int
    tol: float
    frames: np.ndarray | None = None  # (restarts, n, k) final frame of every restart
    values: np.ndarray | None = None  # alpha on each of those frames

    @property
    def is_calibration(self) -> bool:
        return self.value <= 1.0 + self.tol


def _cofactor_tables(n: int, k: int):
    rI = _index_array(n, k)
    onehot = np.zeros((len(rI), k, n))
    for c, I in enumerate(rI):
        onehot[c, np.arange(k), I] = 1.0
    keep = [[b for b in range(k) if b != a] for a in range(k)]
    signs = np.array([[(-1.0) ** (a + j) for j in range(k)] for a in range(k)])
    return rI, onehot, np.array(keep, dtype=int).reshape(k, k - 1), signs


def _batch_value(coeffs, Y, rI):
    return np.linalg.det(Y[:, rI, :]) @ coeffs


def _batch_value_grad(coeffs, Y, tables):
    """alpha(Y) and its Euclidean gradient for a batch of n x k frames."""
    rI, onehot, keep, signs = tables
    k = Y.shape[2]
    sub = Y[:, rI, :]  # (B, C, k, k): rows I, all columns
    vals = np.linalg.det(sub) @ coeffs
    if k == 1:
        grad = np.einsum("c,car->r", coeffs, onehot)[None, :, None] * np.ones_like(Y)
        return vals, grad
    # cofactor[a, j] = (-1)^{a+j} det(sub without row a and column j)
    minors = sub[:, :, keep[:, None, :, None], keep[None, :, None, :]]  # (B,C,k,k,k-1,k-1)
    cof = signs * np.linalg.det(minors)
    grad = np.einsum("c,bcaj,car->brj", coeffs, cof, onehot)
    return vals, grad


_STEP_LADDER = np.array([0.25, 0.5, 1.0, 2.0, 4.0])


def _qr_retract(Y):
    Q, R = np.linalg.qr(Y)
    d = np.sign(np.diagonal(R, axis1=1, axis2=2))
    d[d == 0] = 1.0
    return Q * d[:, None, :]


def _riemannian_grad(coeffs, Y, tables):
    f, G = _batch_value_grad(coeffs, Y, tables)
    sym = np.einsum("bij,bik->bjk", Y, G)
    sym = 0.5 * (sym + np.swapaxes(sym, 1, 2))
    return f, G - Y @ sym


def _polish(coeffs, Y, tables, iters: int):
    """Drive the Riemannian gradient to zero near a maximum.

    Close to a maximum the value is flat to rounding, so candidate steps are
    ranked by gradient norm instead; this pins the frame down to ~1e-14
    rather than the ~1e-8 that value comparisons can resolve.
    """
    B, n, k = Y.shape
    _, rg = _riemannian_grad(coeffs, Y, tables)
    gn = np.sqrt(np.einsum("bij,bij->b", rg, rg))
    for _ in range(iters):
        cand = Y[:, None] + _STEP_LADDER[None, :, None, None] * rg[:, None]
        cand = _qr_retract(cand.reshape(-1, n, k))
        _, crg = _riemannian_grad(coeffs, cand, tables)
        cgn = np.sqrt(np.einsum("bij,bij->b", crg, crg)).reshape(B, -1)
        pick = np.argmin(cgn, axis=1)
        better = cgn[np.arange(B), pick] < gn
        if not better.any():
            break
        cand = cand.reshape(B, -1, n, k)
        crg = crg.reshape(B, -1, n, k)
        Y[better] = cand[better, pick[better]]
        rg[better] = crg[better, pick[better]]
        gn[better] = cgn[better, pick[better]]
    return Y


def comass_estimate(alpha, restarts: int = 200, tol: float = 1e-6, seed: int | None = 0,
                    max_iter: int = 2000, grad_tol: float = 1e-10,
                    rng: np.random.Generator | None = None, polish_iter: int = 60) -> ComassResult:
    """Multistart projected-gradient ascent of alpha over orthonormal k-frames.

    The returned value is alpha evaluated on an explicitly orthonormal frame,
    hence a certified lower bound on the comass; that it equals the comass is
    only as good as the multistart search.
    """
    a = _as_form(alpha)
    k, n = a.degree, a.space.dim
    if k < 1:
        raise DegreeError("comass of a 0-form is not defined here")
    if restarts < 1:
        raise CalibrationError("restarts must be positive")
    rng = rng or np.random.default_rng(seed)
    E = a.space.orthonormal_frame()
    a_flat = a.pullback(E, ExtSpace(n)) if not a.space.is_euclidean else a
    coeffs = a_flat.coeffs
    if not np.any(coeffs):
        frame = E @ np.eye(n)[:, :k]
        return ComassResult(0.0, frame, restarts, restarts, tol)
    tables = _cofactor_tables(n, k)
    Y = _qr_retract(rng.standard_normal((restarts, n, k)))
    f, G = _batch_value_grad(coeffs, Y, tables)
    step = np.full(restarts, 0.5)
    done = np.zeros(restarts, dtype=bool)
    for _ in range(max_iter):
        sym = np.einsum("bij,bik->bjk", Y, G)
        sym = 0.5 * (sym + np.swapaxes(sym, 1, 2))
        rgrad = G - Y @ sym
        gnorm = np.sqrt(np.einsum("bij,bij->b", rgrad, rgrad))
        done |= gnorm < grad_tol
        active = ~done
        if not active.any():
            break
        # try a small ladder of step lengths at once and keep the best one
        idx = np.nonzero(active)[0]
        ts = step[idx, None] * _STEP_LADDER[None, :]
        cand = Y[idx, None] + ts[:, :, None, None] * rgrad[idx, None]
        cand = _qr_retract(cand.reshape(-1, n, k)).reshape(len(idx), len(_STEP_LADDER), n, k)
        fc = _batch_value(coeffs, cand.reshape(-1, n, k), tables[0])
        fc = fc.reshape(len(idx), -1)
        pick = np.argmax(fc, axis=1)
        fbest = fc[np.arange(len(idx)), pick]
        up = fbest > f[idx]
        good = idx[up]
        Y[good] = cand[up, pick[up]]
        step[good] = ts[up, pick[up]]
        stuck = idx[~up]
        step[stuck] /= 16.0
        done[stuck[step[stuck] < 1e-14]] = True
        f, G = _batch_value_grad(coeffs, Y, tables)
    Y = _polish(coeffs, Y, tables, polish_iter)
    f = _batch_value(coeffs, Y, tables[0])
    best = int(np.argmax(f))
    Yb = _qr_retract(Y[best:best + 1])[0]
    frame = E @ Yb
    value = evaluate_frame(a, frame)
    Yall = _qr_retract(Y)
    frames = np.einsum("ij,bjk->bik", E, Yall)
    return ComassResult(value, frame, restarts, int(done.sum()), tol, frames,
                        _batch_value(coeffs, Yall, tables[0]))


# ---------------------------------------------------------------------------
# calibrated planes
# ---------------------------------------------------------------------------


def _orthonormality_defect(space: ExtSpace, F: np.ndarray) -> float:
    F = np.asarray(F, dtype=float)
    gram = F.T @ space.metric @ F
    return float(np.max(np.abs(gram - np.eye(F.shape[1])), initial=0.0))


@dataclass(frozen=True)
class PlaneCheck:
    value: float
    calibrated: bool


def is_calibrated_plane(alpha, F, tol: float = 1e-8) -> PlaneCheck:
    """alpha(F) and whether it equals 1 within ``tol``; F columns orthonormal."""
    a = _as_form(alpha)
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape != (a.space.dim, a.degree):
        raise DimensionError(f"frame shape {F.shape} does not match ({a.space.dim}, {a.degree})")
    if _orthonormality_defect(a.space, F) > 1e-10:
        raise PreconditionError("frame is not orthonormal")
    value = evaluate_frame(a, F)
    return PlaneCheck(value, abs(value - 1.0) <= tol)


def first_cousin_check(alpha, F, w, calibration_tol: float = 1e-10) -> float:
    """alpha(e_1, ..., e_{k-1}, w) for a calibrated frame and w orthogonal to it.

    ``w`` is projected onto the orthogonal complement of span(F) and rescaled to
    its original length before evaluation.
    """
    a = _as_form(alpha)
    F = np.asarray(F, dtype=float)
    chk = is_calibrated_plane(a, F, calibration_tol)
    if not chk.calibrated:
        raise PreconditionError(f"frame is not calibrated (alpha(F) = {chk.value!r})")
    w = np.asarray(w, dtype=float)
    length = np.sqrt(w @ a.space.metric @ w)
    if length == 0.0:
        return 0.0
    w = w - F @ (F.T @ a.space.metric @ w)
    new_len = np.sqrt(w @ a.space.metric @ w)
    if new_len == 0.0:
        raise PreconditionError("w lies in the calibrated plane")
    w = w * (length / new_len)
    return evaluate_frame(a, np.column_stack([F[:, :-1], w]))


# ---------------------------------------------------------------------------
# P_alpha
# ---------------------------------------------------------------------------


def p_alpha(alpha, w: KVector) -> np.ndarray:
    """Vector P_alpha(w) with <P_alpha(w), v> = alpha(w ^ v)."""
    a = _as_form(alpha)
    if w.degree != a.degree - 1:
        raise DegreeError(f"P_alpha of a {a.degree}-form takes (k-1)-vectors, got degree {w.degree}")
    sp = a.space
    cov = np.array([a.coeffs @ wedge(w, sp.basis_vector(b)).coeffs for b in range(sp.dim)])
    return sp.inverse_metric @ cov


def p_alpha_matrix(alpha) -> np.ndarray:
    """Matrix of P_alpha : Lambda^{k-1} V -> V on the coordinate basis e_I."""
    a = _as_form(alpha)
    sp = a.space
    basis = [KVector(sp, a.degree - 1, e) for e in np.eye(comb(sp.dim, a.degree - 1))]
    return np.column_stack([p_alpha(a, w) for w in basis]) if basis else np.zeros((sp.dim, 0))


def p_alpha_adjoint(alpha, v) -> KVector:
    """(-1)^{k-1} (v _| alpha), raised to a (k-1)-vector."""
    a = _as_form(alpha)
    if a.degree < 1:
        raise DegreeError("adjoint needs k >= 1")
    return ((-1) ** (a.degree - 1)) * interior(v, a).raise_index()


def pp_top_check(alpha, split, type_tol: float = 1e-10) -> float:
    """Operator-norm defect of P_alpha P_alpha^T - |alpha|^2 pi_horizontal.

    ``alpha`` must be of type (0, k) for ``split`` (no vertical slots).
    """
    from .geometry import type_decompose

    a = _as_form(alpha)
    sp = a.space
    comps = type_decompose(a, split)
    k = a.degree
    off = max((c.max_abs() for (p, q), c in comps.items() if (p, q) != (0, k)), default=0.0)
    if off > type_tol:
        raise PreconditionError(f"form is not of type (0,{k}); off-type size {off:.3e}")
    n = sp.dim
    M = np.column_stack([p_alpha(a, p_alpha_adjoint(a, e)) for e in np.eye(n)])
    H = split.horizontal
    proj = H @ H.T @ sp.metric
    E = sp.orthonormal_frame()
    D = np.linalg.solve(E, (M - a.inner(a) * proj) @ E)
    return float(np.linalg.norm(D, 2))
