"""Concrete verification targets: flat torus models and warped fibrations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calibration import standard_form
from .exterior import ExtSpace, KForm, compound, hadamard_check, hodge_star
from .geometry import FormField, MapField, MetricField, horizontal_split, type_decompose
from .smith import (IMMERSION, SUBMERSION, SmithProblem, immersion_batch, submersion_batch,
                    submersion_equivalences)

TWO_PI = 2.0 * np.pi


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------------------
# flat torus models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlatModel:
    """A linear map between flat tori plus ``eps * sin(x[axis])`` in one component.

    ``sample_axes`` are the k source axes spanned by the residual and energy
    grids; the integrand and residuals are invariant along the other axes.
    """

    name: str
    direction: str
    linear: tuple            # rows of the n2 x n1 matrix
    calibration: str
    calibration_dim: int
    perturb_component: int
    perturb_axis: int
    sample_axes: tuple
    description: str = ""
    power: int = 2

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.linear, dtype=float)

    @property
    def n1(self) -> int:
        return self.matrix.shape[1]

    @property
    def n2(self) -> int:
        return self.matrix.shape[0]

    @property
    def k(self) -> int:
        return self.n1 if self.direction == IMMERSION else self.n2

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "direction": self.direction,
            "source_dim": self.n1,
            "target_dim": self.n2,
            "k": self.k,
            "calibration": self.calibration,
            "calibration_dim": self.calibration_dim,
            "perturbation": f"u[{self.perturb_component + 1}] += eps*sin(x[{self.perturb_axis + 1}])",
            "description": self.description,
        }

    def map_field(self, eps: float = 0.0) -> MapField:
        A = self.matrix
        c, a = self.perturb_component, self.perturb_axis
        n2, n1 = A.shape

        def value(x):
            x = np.asarray(x, dtype=float)
            y = x @ A.T
            y = np.array(y, dtype=float)
            y[..., c] = y[..., c] + eps * np.sin(x[..., a])
            return y

        def jacobian(x):
            x = np.asarray(x, dtype=float)
            J = np.broadcast_to(A, x.shape[:-1] + A.shape).copy()
            J[..., c, a] += eps * np.cos(x[..., a])
            return J

        def hessian(x):
            H = np.zeros((n2, n1, n1))
            H[c, a, a] = -eps * np.sin(np.asarray(x, dtype=float)[a])
            return H

        return MapField(n1, n2, value, jacobian, hessian)

    def problem(self, eps: float = 0.0) -> SmithProblem:
        cal = standard_form(self.calibration, self.calibration_dim, power=self.power).form
        return SmithProblem(
            direction=self.direction,
            map=self.map_field(eps),
            source_metric=MetricField.euclidean(self.n1),
            target_metric=MetricField.euclidean(self.n2),
            calibration=FormField.from_form(cal),
            name=self.name if eps == 0 else f"{self.name}[eps={eps:g}]",
            domain=[(0.0, TWO_PI)] * self.n1,
            periodic=True,
            varying_axes=self.sample_axes,
            calibration_name=self.calibration,
        )

    def batch_jacobian(self, eps: float = 0.0) -> Callable:
        return self.map_field(eps).jacobian

    def grid(self, N: int) -> np.ndarray:
        """N points along each sample axis, other coordinates at 0."""
        coords = [TWO_PI * np.arange(N) / N if i in self.sample_axes else np.zeros(1)
                  for i in range(self.n1)]
        return np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1).reshape(-1, self.n1)


    def grid_chunks(self, N: int, chunk: int = 8192):
        """The points of :meth:`grid` in blocks of at most ``chunk``, without building the full grid."""
        axes = list(self.sample_axes)
        total = N ** len(axes)
        for start in range(0, total, chunk):
            idx = np.unravel_index(np.arange(start, min(start + chunk, total)), (N,) * len(axes))
            X = np.zeros((idx[0].size, self.n1))
            for ax, i in zip(axes, idx):
                X[:, ax] = TWO_PI * i / N
            yield X

    def grid_residuals(self, eps: float, N: int, chunk: int = 8192) -> dict:
        """Worst residuals and slack extremes over the N^k sample grid."""
        cal = standard_form(self.calibration, self.calibration_dim, power=self.power).form
        jac = self.batch_jacobian(eps)
        out = {"points": 0, "max_residual_form": 0.0, "max_residual_conformal": 0.0,
               "max_alt_residual": 0.0, "min_slack": np.inf, "max_slack": -np.inf}
        for X in self.grid_chunks(N, chunk):
            J = jac(X)
            if self.direction == IMMERSION:
                res = immersion_batch(J, np.eye(self.n1), np.eye(self.n2), cal)
            else:
                res = submersion_batch(J, np.eye(self.n1), np.eye(self.n2), cal)
            out["points"] += len(X)
            out["max_residual_form"] = max(out["max_residual_form"], float(res.residual_form.max()))
            out["max_residual_conformal"] = max(out["max_residual_conformal"],
                                                float(res.residual_conformal.max()))
            out["max_alt_residual"] = max(out["max_alt_residual"], float(res.alt.max()))
            out["min_slack"] = min(out["min_slack"], float(res.slack.min()))
            out["max_slack"] = max(out["max_slack"], float(res.slack.max()))
        return out


def _rows(n2, n1, ones):
    A = np.zeros((n2, n1))
    for r, c in ones:
        A[r, c] = 1.0
    return tuple(tuple(row) for row in A)


FLAT_MODELS = {
    m.name: m
    for m in [
        FlatModel("complex-line-T4", IMMERSION, _rows(4, 2, [(0, 0), (1, 1)]), "kaehler", 4,
                  perturb_component=2, perturb_axis=0, sample_axes=(0, 1),
                  description="complex coordinate line T^2 -> T^4, Kaehler form"),
        FlatModel("slag-plane-T6", IMMERSION, _rows(6, 3, [(0, 0), (2, 1), (4, 2)]),
                  "special-lagrangian", 6, perturb_component=1, perturb_axis=0,
                  sample_axes=(0, 1, 2),
                  description="real 3-plane x1,x3,x5 in C^3, Re of holomorphic volume form"),
        FlatModel("associative-T7", IMMERSION, _rows(7, 3, [(0, 0), (1, 1), (2, 2)]),
                  "associative", 7, perturb_component=3, perturb_axis=0, sample_axes=(0, 1, 2),
                  description="associative 3-plane x1,x2,x3 in R^7"),
        FlatModel("coassoc-fibration-T7", SUBMERSION, _rows(3, 7, [(0, 0), (1, 1), (2, 2)]),
                  "coassociative", 7, perturb_component=0, perturb_axis=3, sample_axes=(3, 4, 5),
                  description="projection T^7 -> T^3 with coassociative fibres x4..x7"),
        FlatModel("cayley-fibration-T8", SUBMERSION, _rows(4, 8, [(0, 4), (1, 5), (2, 6), (3, 7)]),
                  "cayley", 8, perturb_component=0, perturb_axis=0, sample_axes=(0, 1, 2, 3),
                  description="projection T^8 -> T^4 onto x5..x8, Cayley fibres x1..x4"),
        FlatModel("kaehler-fibration-T4", SUBMERSION, _rows(2, 4, [(0, 2), (1, 3)]), "kaehler", 4,
                  perturb_component=0, perturb_axis=0, sample_axes=(0, 1),
                  description="projection T^4 -> T^2 onto x3,x4, complex fibres x1,x2"),
        FlatModel("identity-T2", IMMERSION, _rows(2, 2, [(0, 0), (1, 1)]), "kaehler", 2,
                  perturb_component=0, perturb_axis=1, sample_axes=(0, 1),
                  description="identity T^2 -> T^2, area form"),
        FlatModel("projection-T4", SUBMERSION, _rows(2, 4, [(0, 0), (1, 1)]), "kaehler", 4,
                  perturb_component=0, perturb_axis=2, sample_axes=(2, 3),
                  description="projection T^4 -> T^2 onto x1,x2; fibres x3,x4"),
    ]
}

# The energy grid spans every sample axis when k <= 3.  For k = 4 the
# integrand depends on the perturbed axis only, so only that axis is sampled.
ENERGY_FULL_GRID_MAX_K = 3


def flat_model(name: str) -> FlatModel:
    try:
        return FLAT_MODELS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; known: {sorted(FLAT_MODELS)}") from None


def energy_problem(model: FlatModel, eps: float = 0.0) -> SmithProblem:
    prob = model.problem(eps)
    if model.k > ENERGY_FULL_GRID_MAX_K:
        prob.varying_axes = (model.perturb_axis,)
    return prob


def manifest() -> dict:
    return {
        "flat_models": [FLAT_MODELS[k].manifest() for k in sorted(FLAT_MODELS)],
        "warped_models": [
            {"name": "bryant-salamon-g2-s3", "k": 3, "n": 7, "calibration": "psi = *phi",
             "parameters": ["kappa", "c0", "c1"]},
            {"name": "bryant-salamon-asd", "k": 4, "n": 7, "calibration": "phi",
             "parameters": ["w(r)", "v(r)"]},
            {"name": "bryant-salamon-spin7", "k": 4, "n": 8, "calibration": "Phi",
             "parameters": ["w(r)", "v(r)"]},
        ],
        "curved_models": sorted(CURVED_MODELS),
    }


# ---------------------------------------------------------------------------
# conformal reparametrizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalMap:
    name: str
    value: Callable
    jacobian: Callable
    domain_points: Callable  # rng-free sample points in the chart


def identity_map(k: int) -> ConformalMap:
    return ConformalMap("identity", lambda x: np.asarray(x, dtype=float), lambda x: np.eye(k),
                        lambda: _box_points(k, 0.2, 1.0, 6))


def scaling_map(k: int, c: float = 2.0) -> ConformalMap:
    return ConformalMap(f"scale-{c:g}", lambda x: c * np.asarray(x, dtype=float),
                        lambda x: c * np.eye(k), lambda: _box_points(k, 0.2, 1.0, 6))


def complex_square() -> ConformalMap:
    """z -> z^2 on the annulus 1/2 < |z| < 2."""

    def value(x):
        a, b = x
        return np.array([a * a - b * b, 2 * a * b])

    def jac(x):
        a, b = x
        return np.array([[2 * a, -2 * b], [2 * b, 2 * a]])

    def pts():
        r = np.linspace(0.6, 1.9, 8)
        t = np.linspace(0.0, TWO_PI, 12, endpoint=False)
        R, T = np.meshgrid(r, t, indexing="ij")
        return np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)

    return ConformalMap("complex-square", value, jac, pts)


def _box_points(k, lo, hi, N):
    c = np.linspace(lo, hi, N)
    return np.stack(np.meshgrid(*[c] * k, indexing="ij"), axis=-1).reshape(-1, k)


def conformal_diffeo_compose(model: FlatModel, phi: ConformalMap, tol: float = 1e-10) -> SmithProblem:
    """``u o phi`` for an immersion model and a conformal orientation-preserving chart map."""
    if model.direction != IMMERSION:
        raise ModelError("composition with a conformal map needs an immersion model")
    for x in phi.domain_points():
        D = phi.jacobian(x)
        res = hadamard_check(D)
        scale = max(1.0, float(np.sum(D * D)))
        if res.conformal_defect > tol * scale or np.linalg.det(D) <= 0:
            raise ModelError(f"{phi.name} is not conformal and orientation preserving at {x}")
    base = model.map_field(0.0)
    inner = MapField(model.n1, model.n1, phi.value, phi.jacobian)
    prob = model.problem(0.0)
    prob.map = base.compose(inner)
    prob.name = f"{model.name}o{phi.name}"
    prob.periodic = False
    prob.domain = None
    return prob


# ---------------------------------------------------------------------------
# curved-chart Smith maps
# ---------------------------------------------------------------------------


def stereographic_sphere_line() -> SmithProblem:
    """Round S^2 in the (theta, phi) chart onto the complex line C x 0 in R^4.

    ``(theta, phi) -> tan(theta/2) (cos phi, sin phi, 0, 0)``, a conformal
    orientation-preserving map, hence Smith for the Kaehler form.
    """

    def value(x):
        th, ph = x
        rho = np.tan(th / 2)
        return np.array([rho * np.cos(ph), rho * np.sin(ph), 0.0, 0.0])

    def jac(x):
        th, ph = x
        rho = np.tan(th / 2)
        drho = 0.5 / np.cos(th / 2) ** 2
        return np.array([[drho * np.cos(ph), -rho * np.sin(ph)],
                         [drho * np.sin(ph), rho * np.cos(ph)],
                         [0.0, 0.0], [0.0, 0.0]])

    g = MetricField(lambda x: np.diag([1.0, np.sin(x[0]) ** 2]), 2)
    return SmithProblem(IMMERSION, MapField(2, 4, value, jac), g, MetricField.euclidean(4),
                        FormField.from_form(standard_form("kaehler", 4).form),
                        name="sphere-stereographic-line", calibration_name="kaehler")


def round_s3_associative() -> SmithProblem:
    """Stereographic chart of the round S^3 mapped identically onto the associative 3-plane."""

    def g(x):
        return 4.0 / (1.0 + x @ x) ** 2 * np.eye(3)

    A = np.zeros((7, 3))
    A[:3, :3] = np.eye(3)
    return SmithProblem(IMMERSION, MapField.linear(A), MetricField(g, 3), MetricField.euclidean(7),
                        FormField.from_form(standard_form("associative", 7).form),
                        name="round-s3-associative", calibration_name="associative")


def scaled_kaehler_projection(f: Callable | None = None) -> SmithProblem:
    """Projection R^4 -> R^2 onto x1, x2 with the horizontal block of the metric scaled by f(u)^2."""
    f = f or (lambda y: 1.0 + 0.3 * np.sin(y[0]) * np.cos(y[1]))

    def h(x):
        s = f(x[:2]) ** 2
        return np.diag([s, s, 1.0, 1.0])

    A = np.eye(4)[:2]
    alpha = ExtSpace(4).basis_form(2, 3)
    return SmithProblem(SUBMERSION, MapField.linear(A), MetricField(h, 4), MetricField.euclidean(2),
                        FormField.from_form(alpha), name="scaled-projection-R4",
                        calibration_name="custom")


def scaled_coassociative_projection(f: Callable | None = None) -> SmithProblem:
    """Projection R^7 -> R^3 with horizontal metric scaled by f(u)^2 >= 1.

    With f >= 1 the coassociative form keeps comass one for the rescaled metric.
    """
    f = f or (lambda y: 1.3 + 0.3 * np.sin(y[0]) * np.cos(y[1] - y[2]))

    def h(x):
        s = f(x[:3]) ** 2
        return np.diag([s, s, s, 1.0, 1.0, 1.0, 1.0])

    A = np.eye(7)[:3]
    return SmithProblem(SUBMERSION, MapField.linear(A), MetricField(h, 7), MetricField.euclidean(3),
                        FormField.from_form(standard_form("coassociative", 7).form),
                        name="scaled-coassociative-R7", calibration_name="coassociative")


CURVED_MODELS = {
    "sphere-stereographic-line": (stereographic_sphere_line, np.array([[1.0, 0.3], [0.7, 2.0], [2.2, -1.0]])),
    "round-s3-associative": (round_s3_associative, np.array([[0.1, 0.2, -0.3], [0.8, -0.4, 0.5], [-1.2, 0.3, 0.9]])),
    "scaled-projection-R4": (scaled_kaehler_projection, np.array([[0.3, 0.4, 0.1, 0.2], [1.1, -0.7, 0.5, 0.0], [2.0, 1.0, -1.0, 0.3]])),
    "scaled-coassociative-R7": (scaled_coassociative_projection, np.array([[0.2, 0.5, -0.3, 0.1, 0.2, 0.3, 0.4], [1.0, -1.0, 0.7, 0.0, 0.0, 0.0, 0.0]])),
}


def curved_model(name: str) -> tuple[SmithProblem, np.ndarray]:
    try:
        build, pts = CURVED_MODELS[name]
    except KeyError:
        raise ModelError(f"unknown curved model {name!r}") from None
    return build(), pts


# ---------------------------------------------------------------------------
# warped fibrations (Bryant-Salamon structural models)
# ---------------------------------------------------------------------------


@dataclass
class WarpedFibration:
    """Pointwise model of a cohomogeneity-one fibration in an adapted coframe.

    Coordinates on the tangent space are ordered vertical-then-horizontal when
    ``vertical_first`` (else horizontal first).  The orthonormal coframe is
    ``(v * fibre, w * base)``; the calibration is the standard form written in
    that coframe, and the projection has differential ``[0 | I_k]``.
    """

    name: str
    k: int
    fibre_dim: int
    w: Callable
    v: Callable
    calibration: str          # name of the standard form written in the coframe
    alpha_is_star: bool       # the Smith calibration is the Hodge dual of that form
    vertical_first: bool
    lam_formula: Callable
    components: dict = field(default_factory=dict)  # (p, q) -> r -> |coefficient|

    @property
    def n(self) -> int:
        return self.k + self.fibre_dim

    def _slices(self):
        nv, k = self.fibre_dim, self.k
        if self.vertical_first:
            return np.arange(nv), np.arange(nv, nv + k)
        return np.arange(k, k + nv), np.arange(k)

    def coframe(self, r: float) -> np.ndarray:
        w, v = float(self.w(r)), float(self.v(r))
        if w <= 0 or v <= 0:
            raise ModelError(f"warping functions must be positive (w={w}, v={v} at r={r})")
        vert, hor = self._slices()
        d = np.zeros(self.n)
        d[vert], d[hor] = v, w
        return np.diag(d)

    def metric(self, r: float) -> np.ndarray:
        T = self.coframe(r)
        return T.T @ T

    def differential(self) -> np.ndarray:
        _, hor = self._slices()
        return np.eye(self.n)[hor]

    def structure_form(self, r: float) -> KForm:
        sp = ExtSpace(self.n, self.metric(r))
        base = standard_form(self.calibration, self.n).form
        return KForm(sp, base.degree, compound(self.coframe(r), base.degree).T @ base.coeffs)

    def calibration_form(self, r: float) -> KForm:
        form = self.structure_form(r)
        return hodge_star(form) if self.alpha_is_star else form

    def lam(self, r: float) -> float:
        return 1.0 / float(self.w(r))

    def verify(self, r: float) -> dict:
        """Defects of the identities that make the projection a Smith submersion at radius r."""
        h = self.metric(r)
        du = self.differential()
        g = np.eye(self.k)
        k = self.k
        alpha = self.calibration_form(r)
        star_alpha = hodge_star(alpha)
        split = horizontal_split(du, h, g)
        lam = float(np.sqrt(np.trace(np.linalg.solve(h, du.T @ du)) / k))
        sp = alpha.space
        # u*g = lam^2 h^(0,2)
        H = split.horizontal
        h02 = h @ H @ H.T @ h
        conf = float(np.max(np.abs(du.T @ g @ du - lam ** 2 * h02)))
        # u*vol_L = lam^k (*alpha)^(0,k)
        comps = type_decompose(star_alpha, split)
        pulled = ExtSpace(k).vol().pullback(du, sp)
        vol_defect = float(np.max(np.abs(pulled.coeffs - lam ** k * comps[(0, k)].coeffs)))
        batch = submersion_batch(du, h, g, alpha)
        eq = submersion_equivalences(du, h, g, alpha)
        out = {
            "r": r,
            "lam": lam,
            "lam_formula_defect": abs(lam - float(self.lam_formula(r))),
            "conformal_defect": conf,
            "volume_defect": vol_defect,
            "residual_form": float(batch.residual_form[0]),
            "residual_conformal": float(batch.residual_conformal[0]),
            "alt_residual": float(batch.alt[0]),
            "pair_volume_defect": eq.pair_volume_defect,
        }
        # coefficient size of each declared (p, q) block of the structure form
        form_comps = type_decompose(self.structure_form(r), split)
        worst = 0.0
        for (p, q), coef in self.components.items():
            block = form_comps.get((p, q))
            size = np.max(np.abs(block.coeffs)) if block is not None else 0.0
            worst = max(worst, abs(size - float(coef(r))))
        declared = set(self.components)
        stray = max((c.max_abs() for t, c in form_comps.items() if t not in declared), default=0.0)
        out["component_defect"] = worst
        out["undeclared_component"] = float(stray)
        return out


def g2_induced_metric(phi: KForm) -> np.ndarray:
    """Metric determined by a positive 3-form: B_ij vol = (1/6) i_i phi ^ i_j phi ^ phi."""
    from .exterior import interior, wedge

    n = phi.space.dim
    flat = KForm(ExtSpace(n), 3, phi.coeffs)
    I = np.eye(n)
    hooks = [interior(I[i], flat) for i in range(n)]
    B = np.array([[wedge(wedge(hooks[i], hooks[j]), flat).coeffs[0] / 6.0 for j in range(n)]
                  for i in range(n)])
    det = np.linalg.det(B)
    return B / (np.sign(det) * abs(det) ** (1.0 / 9.0))


def _check_positive(**params):
    for key, val in params.items():
        if not val > 0:
            raise ModelError(f"parameter {key} must be positive, got {val}")


def bryant_salamon_g2_s3(kappa: float = 1.0, c0: float = 1.0, c1: float = 1.0) -> WarpedFibration:
    """Spinor bundle of S^3: base coframe weight (3k(c0+c1 r^2))^(1/3), fibre weight from AB^2 = 4c1."""
    _check_positive(kappa=kappa, c0=c0, c1=c1)

    def w(r):
        return (3 * kappa) ** (1 / 3) * (c0 + c1 * r * r) ** (1 / 3)

    def v(r):
        return 2.0 * (c1 ** 3 / (3 * kappa)) ** (1 / 6) * (c0 + c1 * r * r) ** (-1 / 6)

    return WarpedFibration(
        "bryant-salamon-g2-s3", k=3, fibre_dim=4, w=w, v=v, calibration="associative",
        alpha_is_star=True, vertical_first=False,
        lam_formula=lambda r: (3 * kappa) ** (-1 / 3) * (c0 + c1 * r * r) ** (-1 / 3),
        components={(0, 3): lambda r: 3 * kappa * (c0 + c1 * r * r),
                    (2, 1): lambda r: 4 * c1},
    )


def bryant_salamon_asd(w: Callable, v: Callable) -> WarpedFibration:
    """Anti-self-dual 2-forms over a 4-manifold: calibration phi, psi^(0,4) = w^4 vol_X."""
    return WarpedFibration(
        "bryant-salamon-asd", k=4, fibre_dim=3, w=w, v=v, calibration="associative",
        alpha_is_star=False, vertical_first=True,
        lam_formula=lambda r: 1.0 / w(r),
        components={(3, 0): lambda r: v(r) ** 3, (1, 2): lambda r: w(r) ** 2 * v(r)},
    )


def bryant_salamon_spin7(w: Callable, v: Callable) -> WarpedFibration:
    """Negative spinors over S^4: Phi = w^4 vol + w^2 v^2 beta + v^4 vol_V."""
    return WarpedFibration(
        "bryant-salamon-spin7", k=4, fibre_dim=4, w=w, v=v, calibration="cayley",
        alpha_is_star=False, vertical_first=True,
        lam_formula=lambda r: 1.0 / w(r),
        components={(4, 0): lambda r: v(r) ** 4, (2, 2): lambda r: w(r) ** 2 * v(r) ** 2,
                    (0, 4): lambda r: w(r) ** 4},
    )


def psi_top_coefficient(model: WarpedFibration, r: float) -> float:
    """Coefficient of (*alpha)^(0,k) on the coordinate base volume element."""
    alpha = model.calibration_form(r)
    split = horizontal_split(model.differential(), model.metric(r), np.eye(model.k))
    top = type_decompose(hodge_star(alpha), split)[(0, model.k)]
    _, hor = model._slices()
    from .exterior import index_lookup

    return float(top.coeffs[index_lookup(model.n, model.k)[tuple(int(i) for i in hor)]])


def verify_warped(model: WarpedFibration, rs: Sequence[float]) -> dict:
    rows = [model.verify(float(r)) for r in rs]
    keys = [k for k in rows[0] if k not in ("r", "lam")]
    return {"model": model.name, "samples": len(rows),
            **{f"max_{k}": max(row[k] for row in rows) for k in keys}}
