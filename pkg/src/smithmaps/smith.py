"""Smith immersions and submersions: residuals, inequalities, energy and tension."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import comb
from typing import Callable, Sequence

import numpy as np

from .calibration import p_alpha_matrix
from .exterior import (
    DegreeError,
    DimensionError,
    ExtSpace,
    KForm,
    KVector,
    compound,
    evaluate_frame,
    hodge_star,
    interior,
    wedge,
)
from .geometry import (
    FormField,
    MapField,
    MetricField,
    SplitFrame,
    covariant_derivative_form,
    divergence_mixed,
    horizontal_split,
    is_closed,
    type_decompose,
)

IMMERSION = "immersion"
SUBMERSION = "submersion"

DEFAULT_TOL_FORM = 1e-8
DEFAULT_TOL_CONF = 1e-6
DEFAULT_COUPLING = 10.0


class SmithError(ValueError):
    pass


class PreconditionError(SmithError):
    pass


@dataclass
class SmithProblem:
    """A map together with the metrics and calibration it is tested against.

    Immersion: ``u: (L^k, g) -> (M^n, h)``, ``alpha`` a k-form field on M.
    Submersion: ``u: (M^n, h) -> (L^k, g)``, ``alpha`` an (n-k)-form field on M.
    ``source_metric``/``target_metric`` are always the metrics of the map's
    source and target charts.
    """

    direction: str
    map: MapField
    source_metric: MetricField
    target_metric: MetricField
    calibration: FormField
    source_orientation: int = 1
    target_orientation: int = 1
    name: str = "problem"
    domain: Sequence[tuple[float, float]] | None = None
    periodic: bool = False
    varying_axes: Sequence[int] | None = None
    calibration_name: str = "custom"

    def __post_init__(self):
        if self.direction not in (IMMERSION, SUBMERSION):
            raise SmithError(f"unknown direction {self.direction!r}")
        n1, n2 = self.map.n1, self.map.n2
        if self.source_metric.dim != n1 or self.target_metric.dim != n2:
            raise DimensionError("metric dimensions do not match the map")
        if self.direction == IMMERSION:
            if n1 > n2:
                raise DimensionError("an immersion needs source dim <= target dim")
            if self.calibration.dim != n2 or self.calibration.degree != n1:
                raise DegreeError(f"immersion of a {n1}-manifold needs a {n1}-form on R^{n2}")
        else:
            if n2 > n1:
                raise DimensionError("a submersion needs target dim <= source dim")
            if self.calibration.dim != n1 or self.calibration.degree != n1 - n2:
                raise DegreeError(f"submersion onto a {n2}-manifold needs an {n1 - n2}-form on R^{n1}")

    @property
    def k(self) -> int:
        return self.map.n1 if self.direction == IMMERSION else self.map.n2

    @property
    def n(self) -> int:
        return self.map.n2 if self.direction == IMMERSION else self.map.n1

    def with_map(self, new_map: MapField, **kw) -> "SmithProblem":
        return replace(self, map=new_map, **kw)


@dataclass
class ResidualReport:
    point: list
    direction: str
    lam: float
    residual_form: float
    residual_conformal: float
    inequality_slack: float
    alt_residual: float
    status: str
    verdict: str
    tol_form: float
    tol_conf: float
    coupling_ok: bool = True
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "point": [float(v) for v in self.point],
            "direction": self.direction,
            "lambda": float(self.lam),
            "residual_form": float(self.residual_form),
            "residual_conformal": float(self.residual_conformal),
            "inequality_slack": float(self.inequality_slack),
            "alt_residual": float(self.alt_residual),
            "status": self.status,
            "verdict": self.verdict,
            "tol_form": self.tol_form,
            "tol_conf": self.tol_conf,
            "coupling_ok": bool(self.coupling_ok),
        }
        if self.extras:
            d["extras"] = {k: float(v) if isinstance(v, (float, np.floating)) else v
                           for k, v in self.extras.items()}
        return d


def _verdict(status, res_form, res_conf, tol_form, tol_conf):
    if status == "critical":
        return "critical"
    return "smith" if (res_form <= tol_form and res_conf <= tol_conf) else "not_smith"


# ---------------------------------------------------------------------------
# pointwise quantities on batches of Jacobians (constant metrics and form)
# ---------------------------------------------------------------------------


def dilation(J, g=None, h=None, k: int | None = None) -> float:
    """``lambda = |du| / sqrt(k)``; k defaults to min(n1, n2)."""
    from .geometry import du_norm_sq

    A = J.J if hasattr(J, "J") else np.asarray(J, dtype=float)
    k = k or min(A.shape)
    return float(np.sqrt(du_norm_sq(J, g, h) / k))


@dataclass
class BatchResult:
    lam: np.ndarray
    residual_form: np.ndarray
    residual_conformal: np.ndarray
    slack: np.ndarray
    alt: np.ndarray
    status: list
    value: np.ndarray


def _singular_values(A, left_chol, right_frame):
    M = left_chol.T @ A @ right_frame
    return np.linalg.svd(M, compute_uv=False), M


def immersion_batch(A, g, h, alpha: KForm, orientation: int = 1, rank_tol: float = 1e-8,
                    with_alt: bool = True) -> BatchResult:
    """Immersion residuals for Jacobians ``A[N, n, k]`` at points sharing g, h, alpha."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    N, n, k = A.shape
    if alpha.degree != k or alpha.space.dim != n:
        raise DegreeError(f"need a {k}-form on R^{n}")
    src = ExtSpace(k, np.asarray(g, dtype=float), orientation)
    E = src.orthonormal_frame()
    Lh = np.linalg.cholesky(np.asarray(h, dtype=float))
    s, _ = _singular_values(A, Lh, E)
    nsq = np.sum(s ** 2, axis=1)
    lam = np.sqrt(nsq / k)
    value = compound(A @ E, k)[:, :, 0] @ alpha.coeffs
    slack = lam ** k - value
    sp = np.zeros((N, k))
    sp[:, :s.shape[1]] = s
    conf = np.max(np.abs(sp ** 2 - lam[:, None] ** 2), axis=1)
    smax = s[:, 0]
    rank = np.sum(s > rank_tol * smax[:, None], axis=1)
    status = ["critical" if m == 0.0 else ("regular" if r == k else "degenerate")
              for m, r in zip(smax, rank)]
    alt = np.zeros(N)
    if with_alt:
        alt = _alt_immersion(A, src, Lh, E, alpha, lam)
    crit = smax == 0.0
    for arr in (slack, conf, alt):
        arr[crit] = 0.0
    return BatchResult(lam, np.abs(slack), conf, slack, alt, status, value)


def _star_matrix(space: ExtSpace, degree: int) -> np.ndarray:
    """Matrix of the Hodge star on ``degree``-vectors."""
    cols = [hodge_star(KVector(space, degree, e)).coeffs for e in np.eye(comb(space.dim, degree))]
    return np.column_stack(cols)


def _alt_immersion(A, src, Lh, E, alpha, lam):
    N, n, k = A.shape
    P = p_alpha_matrix(alpha)  # n x C(n, k-1)
    S = _star_matrix(src, 1)  # C(k, k-1) x k
    sign = (-1.0) ** (k - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(lam > 0, lam ** (k - 2.0), 0.0)
    D = P @ compound(A, k - 1) @ S - sign * scale[:, None, None] * A
    M = Lh.T @ D @ E
    return np.linalg.norm(M, 2, axis=(1, 2))


def _top_wedge_vector(alpha: KForm, k: int) -> np.ndarray:
    """w_J with (alpha ^ beta) = (sum_J w_J beta_J) e^{1..n} for k-forms beta."""
    sp = alpha.space
    return np.array([wedge(alpha, KForm(sp, k, e)).coeffs[0] for e in np.eye(comb(sp.dim, k))])


def submersion_batch(A, h, g, alpha: KForm, orientation: int = 1, target_orientation: int = 1,
                     rank_tol: float = 1e-8, with_alt: bool = True) -> BatchResult:
    """Submersion residuals for Jacobians ``A[N, k, n]`` sharing h (source), g (target), alpha."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 2:
        A = A[None]
    N, k, n = A.shape
    if alpha.degree != n - k or alpha.space.dim != n:
        raise DegreeError(f"need an {n - k}-form on R^{n}")
    src = ExtSpace(n, np.asarray(h, dtype=float), orientation)
    E = src.orthonormal_frame()
    g = np.asarray(g, dtype=float)
    Lg = np.linalg.cholesky(g)
    s, _ = _singular_values(A, Lg, E)
    nsq = np.sum(s ** 2, axis=1)
    lam = np.sqrt(nsq / k)
    vol_scale = target_orientation * np.sqrt(np.linalg.det(g))
    pulled = vol_scale * compound(A, k)[:, 0, :]  # coefficients of u^* vol_L
    value = (pulled @ _top_wedge_vector(alpha, k)) * np.linalg.det(E)
    slack = lam ** k - value
    smax = s[:, 0]
    with np.errstate(invalid="ignore"):
        horiz = s > rank_tol * smax[:, None]
    rank = horiz.sum(axis=1)
    conf = np.max(np.where(horiz, np.abs(s ** 2 - lam[:, None] ** 2), 0.0), axis=1)
    status = ["critical" if m == 0.0 else ("regular" if r == k else "degenerate")
              for m, r in zip(smax, rank)]
    alt = np.zeros(N)
    if with_alt:
        alt = _alt_submersion(A, src, g, Lg, E, alpha, lam, target_orientation)
    crit = smax == 0.0
    for arr in (slack, conf, alt):
        arr[crit] = 0.0
    return BatchResult(lam, np.abs(slack), conf, slack, alt, status, value)


def _alt_submersion(A, src, g, Lg, E, alpha, lam, target_orientation):
    N, k, n = A.shape
    star_a = hodge_star(alpha)
    K = np.column_stack([interior(e, star_a).raise_index().coeffs for e in np.eye(n)])
    tgt = ExtSpace(k, g, target_orientation)
    S = _star_matrix(tgt, k - 1)  # k x C(k, k-1)
    sign = (-1.0) ** (k - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(lam > 0, lam ** (k - 2.0), 0.0)
    D = S @ compound(A, k - 1) @ K - sign * scale[:, None, None] * A
    M = Lg.T @ D @ E
    return np.linalg.norm(M, 2, axis=(1, 2))


# ---------------------------------------------------------------------------
# single-point submersion diagnostics that need the split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubmersionEquivalences:
    """The quantities appearing in the equivalent forms of the submersion equation."""

    split: SplitFrame
    form_defect: float           # |(alpha ^ u*vol_L - lam^k vol_M)(unit n-vector)|
    pair_volume_defect: float    # |u*vol_L - lam^k (*alpha)^(0,k)|
    conformal_defect: float      # |u*g - lam^2 h^(0,2)|
    star_alpha_on_horizontal: float  # (*alpha)(oriented horizontal frame)
    alpha_on_vertical: float     # alpha(oriented vertical frame)
    one_sided_slack: float       # u*vol_L(H) - lam^k (*alpha)^(0,k)(H)
    mixed_star_alpha: float      # |(*alpha)^(1,k-1)|

    def equivalence_conditions(self, tol: float) -> tuple[bool, bool, bool]:
        return (self.pair_volume_defect <= tol,
                abs(self.star_alpha_on_horizontal - 1.0) <= tol,
                abs(self.alpha_on_vertical - 1.0) <= tol)


def submersion_equivalences(A, h, g, alpha: KForm, orientation: int = 1,
                            target_orientation: int = 1, rank_tol: float = 1e-8) -> SubmersionEquivalences:
    A = np.asarray(A, dtype=float)
    k, n = A.shape
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    sp = ExtSpace(n, h, orientation)
    split = horizontal_split(A, h, g, rank_tol, orientation, target_orientation)
    lam = np.sqrt(np.trace(np.linalg.solve(h, A.T @ g @ A)) / k)
    vol_L = ExtSpace(k, g, target_orientation).vol()
    pulled = vol_L.pullback(A, sp)
    top = wedge(alpha, pulled)
    form_defect = abs(evaluate_frame(top - lam ** k * sp.vol(), sp.orthonormal_frame()))
    star_a = hodge_star(alpha)
    if split.status == "critical":
        zero = 0.0
        return SubmersionEquivalences(split, form_defect, zero, zero, 0.0, 0.0, 0.0, 0.0)
    comps = type_decompose(star_a, split)
    top_part = comps.get((0, k), KForm.zero(sp, k))
    mixed = comps.get((1, k - 1), KForm.zero(sp, k))
    pair = (pulled - lam ** k * top_part).norm()
    H, V = split.horizontal, split.vertical
    B = split.frame
    target = np.zeros((n, n))
    r = split.rank
    target[n - r:, n - r:] = np.eye(r)
    conf = float(np.linalg.norm(B.T @ A.T @ g @ A @ B - lam ** 2 * target, 2))
    if split.status == "regular":
        on_h = evaluate_frame(star_a, H)
        on_v = evaluate_frame(alpha, V) if V.shape[1] else float(alpha.coeffs[0])
        one_sided = evaluate_frame(pulled, H) - lam ** k * evaluate_frame(top_part, H)
    else:
        on_h = on_v = 0.0
        one_sided = 0.0
    return SubmersionEquivalences(split, form_defect, pair, conf, on_h, on_v, one_sided,
                                  mixed.norm())


# ---------------------------------------------------------------------------
# problem-level checks
# ---------------------------------------------------------------------------


def _pointwise_data(prob: SmithProblem, x):
    x = np.asarray(x, dtype=float)
    jet = prob.map.jet(x)
    g_src = prob.source_metric(x)
    g_tgt = prob.target_metric(jet.u)
    if prob.direction == IMMERSION:
        alpha = prob.calibration.at(jet.u, g_tgt, prob.target_orientation)
    else:
        alpha = prob.calibration.at(x, g_src, prob.source_orientation)
    return jet, g_src, g_tgt, alpha


def _report(prob, x, res: BatchResult, i, tol_form, tol_conf, coupling, extras=None):
    status = res.status[i]
    rf, rc = float(res.residual_form[i]), float(res.residual_conformal[i])
    verdict = _verdict(status, rf, rc, tol_form, tol_conf)
    coupling_ok = not (rf <= tol_form and rc > coupling * tol_form and status != "critical")
    return ResidualReport(
        point=list(np.asarray(x, dtype=float)), direction=prob.direction,
        lam=float(res.lam[i]), residual_form=rf, residual_conformal=rc,
        inequality_slack=float(res.slack[i]), alt_residual=float(res.alt[i]),
        status=status, verdict=verdict, tol_form=tol_form, tol_conf=tol_conf,
        coupling_ok=coupling_ok, extras=extras or {},
    )


def immersion_residual(prob: SmithProblem, x, tol_form: float = DEFAULT_TOL_FORM,
                       tol_conf: float = DEFAULT_TOL_CONF,
                       coupling: float = DEFAULT_COUPLING) -> ResidualReport:
    if prob.direction != IMMERSION:
        raise SmithError("problem is not an immersion")
    jet, g, h, alpha = _pointwise_data(prob, x)
    res = immersion_batch(jet.J, g, h, alpha, prob.source_orientation)
    return _report(prob, x, res, 0, tol_form, tol_conf, coupling)


def submersion_residual(prob: SmithProblem, x, tol_form: float = DEFAULT_TOL_FORM,
                        tol_conf: float = DEFAULT_TOL_CONF,
                        coupling: float = DEFAULT_COUPLING) -> ResidualReport:
    if prob.direction != SUBMERSION:
        raise SmithError("problem is not a submersion")
    jet, h, g, alpha = _pointwise_data(prob, x)
    res = submersion_batch(jet.J, h, g, alpha, prob.source_orientation, prob.target_orientation)
    eq = submersion_equivalences(jet.J, h, g, alpha, prob.source_orientation,
                                 prob.target_orientation)
    extras = {
        "pair_volume_defect": eq.pair_volume_defect,
        "star_alpha_on_horizontal": eq.star_alpha_on_horizontal,
        "alpha_on_vertical": eq.alpha_on_vertical,
        "one_sided_slack": eq.one_sided_slack,
    }
    return _report(prob, x, res, 0, tol_form, tol_conf, coupling, extras)


def residual(prob: SmithProblem, x, **kw) -> ResidualReport:
    if prob.direction == IMMERSION:
        return immersion_residual(prob, x, **kw)
    return submersion_residual(prob, x, **kw)


def alt_immersion_residual(prob: SmithProblem, x) -> float:
    return immersion_residual(prob, x).alt_residual


def alt_submersion_residual(prob: SmithProblem, x) -> float:
    return submersion_residual(prob, x).alt_residual


def _constant_data(prob: SmithProblem) -> bool:
    return (prob.source_metric.is_constant and prob.target_metric.is_constant
            and prob.calibration.is_constant)


def check_points(prob: SmithProblem, points, tol_form: float = DEFAULT_TOL_FORM,
                 tol_conf: float = DEFAULT_TOL_CONF, coupling: float = DEFAULT_COUPLING,
                 batch_jacobian: Callable | None = None) -> list[ResidualReport]:
    """Residual reports at many points; vectorized when all data are constant."""
    points = np.asarray(points, dtype=float)
    if _constant_data(prob) and prob.direction == IMMERSION:
        J = batch_jacobian(points) if batch_jacobian else np.stack([prob.map.jacobian(p) for p in points])
        x0 = points[0]
        _, g, h, alpha = _pointwise_data(prob, x0)
        res = immersion_batch(J, g, h, alpha, prob.source_orientation)
        return [_report(prob, p, res, i, tol_form, tol_conf, coupling) for i, p in enumerate(points)]
    if _constant_data(prob):
        J = batch_jacobian(points) if batch_jacobian else np.stack([prob.map.jacobian(p) for p in points])
        _, h, g, alpha = _pointwise_data(prob, points[0])
        res = submersion_batch(J, h, g, alpha, prob.source_orientation, prob.target_orientation)
        return [_report(prob, p, res, i, tol_form, tol_conf, coupling) for i, p in enumerate(points)]
    return [residual(prob, p, tol_form=tol_form, tol_conf=tol_conf, coupling=coupling) for p in points]


def check_jets(direction: str, jets, alpha: KForm, g=None, h=None,
               tol_form: float = DEFAULT_TOL_FORM, tol_conf: float = DEFAULT_TOL_CONF,
               coupling: float = DEFAULT_COUPLING) -> list[ResidualReport]:
    """Residual reports for raw jets; ``g``/``h`` are the source/target metrics (default flat)."""
    if not jets:
        return []
    n2, n1 = jets[0].J.shape
    g = np.eye(n1) if g is None else np.asarray(g, dtype=float)
    h = np.eye(n2) if h is None else np.asarray(h, dtype=float)
    J = np.stack([j.J for j in jets])
    if direction == IMMERSION:
        res = immersion_batch(J, g, h, alpha)
    elif direction == SUBMERSION:
        res = submersion_batch(J, g, h, alpha)
    else:
        raise SmithError(f"unknown direction {direction!r}")
    out = []
    for i, jet in enumerate(jets):
        status = res.status[i]
        rf, rc = float(res.residual_form[i]), float(res.residual_conformal[i])
        out.append(ResidualReport(
            point=list(jet.x), direction=direction, lam=float(res.lam[i]), residual_form=rf,
            residual_conformal=rc, inequality_slack=float(res.slack[i]),
            alt_residual=float(res.alt[i]), status=status,
            verdict=_verdict(status, rf, rc, tol_form, tol_conf), tol_form=tol_form,
            tol_conf=tol_conf,
            coupling_ok=not (rf <= tol_form and rc > coupling * tol_form and status != "critical")))
    return out


def summary(reports: Sequence[ResidualReport], expect: str = "smith") -> dict:
    """Summary object; ``expect`` is the verdict every non-critical point should reach."""
    if not reports:
        return {"max_residual_form": 0.0, "max_residual_conformal": 0.0, "min_slack": 0.0,
                "max_slack": 0.0, "max_alt_residual": 0.0, "points": 0, "critical_points": 0,
                "degenerate_points": 0, "verdict": "pass"}
    rf = max(r.residual_form for r in reports)
    rc = max(r.residual_conformal for r in reports)
    slack = min(r.inequality_slack for r in reports)
    alt = max(r.alt_residual for r in reports)
    ok = all(r.verdict in (expect, "critical") for r in reports)
    return {
        "max_residual_form": rf,
        "max_residual_conformal": rc,
        "min_slack": slack,
        "max_slack": max(r.inequality_slack for r in reports),
        "max_alt_residual": alt,
        "points": len(reports),
        "critical_points": sum(r.status == "critical" for r in reports),
        "degenerate_points": sum(r.status == "degenerate" for r in reports),
        "verdict": "pass" if ok else "fail",
    }


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyResult:
    energy: float
    lower_bound: float
    gap: float
    quadrature_error: float
    grid: tuple


def _grid_points(prob: SmithProblem, N: int, centre=None):
    dom = np.asarray(prob.domain, dtype=float)
    n1 = prob.map.n1
    axes = list(range(n1)) if prob.varying_axes is None else list(prob.varying_axes)
    base = dom[:, 0] if centre is None else np.asarray(centre, dtype=float)
    coords = []
    for i in range(n1):
        if i in axes:
            lo, hi = dom[i]
            coords.append(lo + (hi - lo) * np.arange(N) / N)
        else:
            coords.append(np.array([base[i]]))
    grid = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, n1)
    volume = float(np.prod(dom[:, 1] - dom[:, 0]))
    return grid, volume, tuple(len(c) for c in coords)


def _densities(prob: SmithProblem, X, batch_jacobian=None):
    """Energy and lower-bound densities w.r.t. coordinate measure at points X."""
    k = prob.k
    if _constant_data(prob):
        J = batch_jacobian(X) if batch_jacobian else np.stack([prob.map.jacobian(x) for x in X])
        _, g_src, g_tgt, alpha = _pointwise_data(prob, X[0])
        if prob.direction == IMMERSION:
            res = immersion_batch(J, g_src, g_tgt, alpha, prob.source_orientation, with_alt=False)
        else:
            res = submersion_batch(J, g_src, g_tgt, alpha, prob.source_orientation,
                                   prob.target_orientation, with_alt=False)
        vol = np.sqrt(np.linalg.det(g_src))
        return res.lam ** k * vol, res.value * vol
    e, b = [], []
    for x in X:
        jet, g_src, g_tgt, alpha = _pointwise_data(prob, x)
        if prob.direction == IMMERSION:
            res = immersion_batch(jet.J, g_src, g_tgt, alpha, prob.source_orientation, with_alt=False)
        else:
            res = submersion_batch(jet.J, g_src, g_tgt, alpha, prob.source_orientation,
                                   prob.target_orientation, with_alt=False)
        vol = np.sqrt(np.linalg.det(g_src))
        e.append(res.lam[0] ** k * vol)
        b.append(res.value[0] * vol)
    return np.array(e), np.array(b)


def k_energy(prob: SmithProblem, N: int = 64, batch_jacobian: Callable | None = None,
             check_closed: bool = True) -> EnergyResult:
    """k-energy and its topological lower bound by the periodic trapezoid rule.

    ``(1/sqrt(k)^k) |du|^k = lambda^k``, so the energy density is lambda^k times
    the Riemannian volume density.  Axes outside ``prob.varying_axes`` are
    ones along which the integrand is invariant and are sampled once.
    """
    if not prob.periodic or prob.domain is None:
        raise SmithError("energy bound needs a periodic (closed) domain; the integral "
                         "of the calibration is not topological on an open chart")
    if check_closed and not prob.calibration.is_constant:
        pts, _, _ = _grid_points(prob, 4)
        where = pts if prob.direction == SUBMERSION else [prob.map.value(p) for p in pts]
        ok, worst = is_closed(prob.calibration, where)
        if not ok:
            raise SmithError(f"calibration is not closed (|d alpha| ~ {worst:.2e})")

    def quad(M):
        X, volume, shape = _grid_points(prob, M)
        e, b = _densities(prob, X, batch_jacobian)
        return volume * e.mean(), volume * b.mean(), shape

    E, Bd, shape = quad(N)
    E2, B2, _ = quad(max(N // 2, 1))
    err = abs((E - Bd) - (E2 - B2))
    return EnergyResult(float(E), float(Bd), float(E - Bd), float(err), shape)


# ---------------------------------------------------------------------------
# tension
# ---------------------------------------------------------------------------


def tension_field(prob: SmithProblem) -> Callable:
    """``B(x) = |du|^{k-2} du`` as an n2 x n1 array."""
    k = prob.k

    def B(x):
        J = prob.map.jacobian(x)
        g = prob.source_metric(x)
        h = prob.target_metric(prob.map.value(x))
        nsq = float(np.trace(np.linalg.solve(g, J.T @ h @ J)))
        return (nsq ** ((k - 2) / 2.0) if nsq > 0 else (1.0 if k == 2 else 0.0)) * J

    return B


def k_tension(prob: SmithProblem, x, h_fd: float = 1e-3) -> np.ndarray:
    """``tau_k(u) = Div(|du|^{k-2} du)`` at x, a vector in T_{u(x)}M2."""
    return divergence_mixed(tension_field(prob), prob.map, prob.source_metric,
                            prob.target_metric, x, h_fd)


def tension_norm(prob: SmithProblem, x, h_fd: float = 1e-3) -> float:
    tau = k_tension(prob, x, h_fd)
    h = prob.target_metric(prob.map.value(x))
    return float(np.sqrt(tau @ h @ tau))


def smooth_bump(x, centre, radius):
    """Product bump ``prod exp(1 - 1/(1 - t_i^2))`` supported in a box."""
    t = (np.asarray(x, dtype=float) - centre) / radius
    inside = np.all(np.abs(t) < 1, axis=-1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vals = np.prod(np.exp(1.0 - 1.0 / (1.0 - np.minimum(t ** 2, 1.0 - 1e-300))), axis=-1)
    return np.where(inside, vals, 0.0)


@dataclass(frozen=True)
class VariationComparison:
    energy_derivative: float
    tension_pairing: float
    defect: float


def variation_check(prob: SmithProblem, direction, centre, radius, N: int = 48,
                    dt: float = 1e-4, h_fd: float = 1e-3) -> VariationComparison:
    """Compare dE_k[phi] with -(k / sqrt(k)^k) * int <tau_k, phi> vol.

    ``phi = bump * direction`` is supported in the box ``centre +- radius``.
    Requires a flat (constant) target metric so that variations are linear.
    """
    if not prob.target_metric.is_constant:
        raise SmithError("variation oracle needs a constant target metric")
    k = prob.k
    centre = np.asarray(centre, dtype=float)
    radius = np.asarray(radius, dtype=float) * np.ones_like(centre)
    d = np.asarray(direction, dtype=float)
    h = prob.target_metric(None)
    n1 = prob.map.n1
    # midpoint grid over the support box
    coords = [centre[i] - radius[i] + 2 * radius[i] * (np.arange(N) + 0.5) / N for i in range(n1)]
    X = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, n1)
    cell = float(np.prod(2 * radius / N))

    eps = 1e-6
    bump_grad = np.stack([(smooth_bump(X + eps * e, centre, radius)
                           - smooth_bump(X - eps * e, centre, radius)) / (2 * eps)
                          for e in np.eye(n1)], axis=-1)  # (points, n1)
    J0 = np.stack([prob.map.jacobian(x) for x in X])
    G = np.stack([prob.source_metric(x) for x in X])
    Ginv = np.linalg.inv(G)
    vol = np.sqrt(np.linalg.det(G))

    def energy(t):
        J = J0 + t * d[None, :, None] * bump_grad[:, None, :]
        nsq = np.einsum("pij,pai,ab,pbj->p", Ginv, J, h, J)
        return float(np.sum((nsq / k) ** (k / 2.0) * vol)) * cell

    dE = (energy(dt) - energy(-dt)) / (2 * dt)
    pairing = 0.0
    for x in X:
        b = smooth_bump(x, centre, radius)
        if b == 0.0:
            continue
        tau = k_tension(prob, x, h_fd)
        pairing += float(tau @ h @ d) * b * np.sqrt(np.linalg.det(prob.source_metric(x)))
    pairing *= cell
    predicted = -(k / np.sqrt(k) ** k) * pairing
    return VariationComparison(float(dE), float(predicted), abs(dE - predicted))


# ---------------------------------------------------------------------------
# conformal invariance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalComparison:
    before: ResidualReport
    after: ResidualReport
    factor: float
    lam_defect: float
    form_defect: float
    conformal_defect: float

    @property
    def verdict_preserved(self) -> bool:
        return self.before.verdict == self.after.verdict


def conformal_invariance_check(prob: SmithProblem, f: Callable, x,
                               tol_form: float = DEFAULT_TOL_FORM,
                               tol_conf: float = DEFAULT_TOL_CONF) -> ConformalComparison:
    """Rescale the domain metric and compare the reports.

    Immersion: g -> f^2 g.  Submersion: h -> h^(2,0) + f^2 h^(0,2), the split
    taken at each evaluation point.  Residuals are compared after undoing the
    predicted scalings (forms by f^k, the conformal defect by f^2).
    """
    x = np.asarray(x, dtype=float)
    fx = float(f(x))
    if not fx > 0:
        raise SmithError("scaling function must be positive")
    before = residual(prob, x, tol_form=tol_form, tol_conf=tol_conf)
    if prob.direction == IMMERSION:
        metric = prob.source_metric.scaled(f)
    else:
        base = prob.source_metric

        def scaled(y):
            hy = base(y)
            J = prob.map.jacobian(y)
            split = horizontal_split(J, hy, prob.target_metric(prob.map.value(y)))
            H = split.horizontal
            proj = hy @ H @ H.T @ hy
            return hy + (float(f(y)) ** 2 - 1.0) * proj

        metric = MetricField(scaled, base.dim, h_fd=base.h_fd)
    new = replace(prob, source_metric=metric)
    after = residual(new, x, tol_form=tol_form, tol_conf=tol_conf)
    k = prob.k
    return ConformalComparison(
        before, after, fx,
        lam_defect=abs(after.lam - before.lam / fx),
        form_defect=abs(fx ** k * after.residual_form - before.residual_form),
        conformal_defect=abs(fx ** 2 * after.residual_conformal - before.residual_conformal),
    )


# ---------------------------------------------------------------------------
# covariant derivative of the calibration along Smith maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NablaCheck:
    value: float
    mixed_star_alpha: float = 0.0


def pullback_nabla_check(prob: SmithProblem, V, x, tol: float = 1e-8) -> NablaCheck:
    """Immersion: |u^*(nabla_V alpha)| on the unit k-vector at x.

    Submersion: the size of (*alpha)^(1,k-1) and |(nabla_V alpha)(vertical frame)|.
    The point must be Smith within ``tol``.
    """
    rep = residual(prob, x, tol_form=tol, tol_conf=max(tol, np.sqrt(tol)))
    if rep.status == "critical":
        return NablaCheck(0.0, 0.0)
    if rep.verdict != "smith":
        raise PreconditionError(f"map is not Smith at {list(x)} (residual {rep.residual_form:.3e})")
    jet, g_src, g_tgt, alpha = _pointwise_data(prob, x)
    if prob.direction == IMMERSION:
        nab = covariant_derivative_form(prob.calibration, prob.target_metric, V, jet.u)
        E = ExtSpace(prob.k, g_src, prob.source_orientation).orthonormal_frame()
        return NablaCheck(abs(evaluate_frame(nab, jet.J @ E)))
    eq = submersion_equivalences(jet.J, g_src, g_tgt, alpha, prob.source_orientation,
                                 prob.target_orientation)
    nab = covariant_derivative_form(prob.calibration, prob.source_metric, V, x)
    Vf = eq.split.vertical
    val = abs(evaluate_frame(nab, Vf)) if Vf.shape[1] else abs(nab.coeffs[0])
    return NablaCheck(val, eq.mixed_star_alpha)
