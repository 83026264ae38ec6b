import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smithmaps.exterior import DimensionError, ExtSpace, KForm, evaluate_frame
from smithmaps.geometry import (
    FormField,
    GeometryError,
    MapField,
    MapJet,
    MetricField,
    SplitFrame,
    christoffel,
    div_lambda_commute_check,
    divergence_mixed,
    du_norm_sq,
    du_norm_sq_frame,
    dump_jets,
    exterior_derivative,
    horizontal_split,
    interior_field,
    is_closed,
    load_jets,
    pullback_metric,
    pure_type,
    skew_defect,
    type_decompose,
)


def polar():
    return MetricField(lambda x: np.diag([1.0, x[0] ** 2]), 2, h_fd=1e-5)


def sphere():
    return MetricField(lambda x: np.diag([1.0, np.sin(x[0]) ** 2]), 2, h_fd=1e-5)


# -- metrics and Christoffel symbols -------------------------------------------


def test_christoffel_polar():
    G = christoffel(polar(), [2.0, 0.3])
    expect = np.zeros((2, 2, 2))
    expect[0, 1, 1] = -2.0
    expect[1, 0, 1] = expect[1, 1, 0] = 0.5
    assert np.allclose(G, expect, atol=1e-8)


def test_christoffel_sphere():
    th = 0.7
    G = christoffel(sphere(), [th, 1.1])
    assert G[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th), abs=1e-8)
    assert G[1, 0, 1] == pytest.approx(np.cos(th) / np.sin(th), abs=1e-8)
    assert G[0, 0, 0] == pytest.approx(0.0, abs=1e-9)


def test_christoffel_constant_is_zero():
    assert not christoffel(MetricField(constant=np.diag([1.0, 2.0])), [0, 0]).any()


def test_metric_field_validation():
    with pytest.raises(GeometryError):
        MetricField()
    bad = MetricField(lambda x: np.eye(3), 2)
    with pytest.raises(DimensionError):
        bad([0.0, 0.0])


def test_scaled_metric():
    g = sphere().scaled(lambda x: 3.0)
    assert np.allclose(g([0.5, 0.0]), 9 * np.diag([1.0, np.sin(0.5) ** 2]))


def test_pullback_and_norms():
    J = np.array([[1.0, 2.0], [0.0, 1.0], [3.0, 0.0]])
    h = np.diag([1.0, 2.0, 0.5])
    P = pullback_metric(J, h)
    assert np.allclose(P, J.T @ h @ J)
    g = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert du_norm_sq(J, g, h) == pytest.approx(du_norm_sq_frame(J, g, h))
    assert du_norm_sq(J, None, None) == pytest.approx(np.sum(J ** 2))


# -- splitting -------------------------------------------------------------------


def test_coordinate_split():
    s = SplitFrame.coordinate(4, [2, 3])
    assert s.rank == 2 and s.n_vertical == 2
    assert np.linalg.det(s.frame) > 0


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 4), extra=st.integers(0, 4), seed=st.integers(0, 2**31))
def test_horizontal_split_properties(k, extra, seed):
    rng = np.random.default_rng(seed)
    n = k + extra
    A = rng.standard_normal((k, n))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    h = (Q * rng.uniform(0.5, 2, n)) @ Q.T
    g = np.diag(rng.uniform(0.5, 2, k))
    s = horizontal_split(A, h, g)
    B = s.frame
    assert s.status == "regular"
    assert np.allclose(B.T @ h @ B, np.eye(n), atol=1e-10)
    assert np.allclose(A @ s.vertical, 0.0, atol=1e-10)
    assert np.linalg.det(A @ s.horizontal) > 0
    if extra:  # with no fibre the map alone fixes the orientation
        assert np.linalg.det(B) > 0


def test_split_statuses():
    assert horizontal_split(np.zeros((2, 3))).status == "critical"
    assert horizontal_split(np.array([[1.0, 0, 0], [2.0, 0, 0]])).status == "degenerate"


def test_projectors():
    s = SplitFrame.coordinate(3, [0])
    v = np.array([1.0, 2.0, 3.0])
    assert np.allclose(s.vertical_part(v), [1, 0, 0])
    assert np.allclose(s.horizontal_part(v), [0, 2, 3])
    assert np.allclose(s.horizontal_projector() @ v, [0, 2, 3])


# -- types -------------------------------------------------------------------


def test_type_labels():
    s = SplitFrame.coordinate(4, [0, 1])
    sp = ExtSpace(4)
    assert pure_type(sp.basis_form(0, 1), s) == (2, 0)
    assert pure_type(sp.basis_form(2, 3), s) == (0, 2)
    assert pure_type(sp.basis_form(0, 3), s) == (1, 1)
    assert pure_type(sp.basis_form(0, 1) + sp.basis_form(2, 3), s) is None
    assert pure_type(KForm.zero(sp, 2), s) == "zero"


@settings(max_examples=30, deadline=None)
@given(k=st.integers(0, 5), seed=st.integers(0, 2**31))
def test_type_decomposition_sums_back(k, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 5))
    s = horizontal_split(A)
    from math import comb
    a = KForm(ExtSpace(5), k, rng.standard_normal(comb(5, k)))
    comps = type_decompose(a, s)
    total = KForm.zero(a.space, k)
    for c in comps.values():
        total = total + c
    assert total.allclose(a, atol=1e-12)
    # components are mutually orthogonal
    vals = list(comps.values())
    for i in range(len(vals)):
        for j in range(i):
            assert abs(vals[i].inner(vals[j])) < 1e-10


# -- derivatives of fields -----------------------------------------------------


def test_exterior_derivative_example():
    # alpha = x1 dx2  ->  d alpha = dx1 ^ dx2
    field = FormField(2, 1, lambda x: np.array([0.0, x[0]]))
    d = exterior_derivative(field, [0.3, -0.2])
    assert d.coeffs == pytest.approx([1.0], abs=1e-8)
    assert not is_closed(field, [[0.0, 0.0]])[0]


def test_closed_field():
    # d(x1 x2) = x2 dx1 + x1 dx2 is closed
    field = FormField(2, 1, lambda x: np.array([x[1], x[0]]))
    ok, worst = is_closed(field, [[0.1, 0.2], [1.0, -1.0]])
    assert ok and worst < 1e-8


def test_divergence_of_harmonic_map():
    # z -> z^2 is harmonic; Delta(x^2) = 2
    u = MapField(2, 2, lambda x: np.array([x[0] ** 2 - x[1] ** 2, 2 * x[0] * x[1]]))
    e = MetricField.euclidean(2)
    tau = divergence_mixed(u.jacobian, u, e, e, [0.4, 0.3], h_fd=1e-4)
    assert np.allclose(tau, 0.0, atol=1e-6)
    v = MapField(2, 1, lambda x: np.array([x[0] ** 2]))
    assert divergence_mixed(v.jacobian, v, e, MetricField.euclidean(1), [0.4, 0.3])[0] == pytest.approx(2.0, abs=1e-6)


def test_divergence_identity_on_sphere_vanishes():
    # the identity map is harmonic for any metric
    u = MapField.linear(np.eye(2))
    g = sphere()
    tau = divergence_mixed(u.jacobian, u, g, g, [0.9, 0.4], h_fd=1e-4)
    assert np.allclose(tau, 0.0, atol=1e-6)


def test_commute_check_identity_on_curved_metric():
    g = sphere()
    beta = FormField(2, 2, lambda x: np.array([np.sin(x[0])]))  # the area form
    P = interior_field(beta, g)
    res = div_lambda_commute_check(P, MapField.linear(np.eye(2)), 1, g, g, [0.8, 0.2])
    assert res.defect < 1e-6


def test_commute_check_rejects_non_skew():
    P = lambda x: np.array([[1.0, 2.0], [0.0, 1.0]])  # noqa: E731
    e = MetricField.euclidean(2)
    with pytest.raises(GeometryError):
        div_lambda_commute_check(P, MapField.linear(np.eye(2)), 1, e, e, [0.0, 0.0])
    assert skew_defect(np.array([[0.0, 1.0], [-1.0, 0.0]]), np.eye(2)) == 0.0


# -- jets ----------------------------------------------------------------------


def test_jet_shape_validation():
    with pytest.raises(DimensionError):
        MapJet([0.0, 0.0], [0.0], np.zeros((2, 2)))


def test_jet_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    jets = [MapJet(rng.standard_normal(3), rng.standard_normal(2), rng.standard_normal((2, 3)))
            for _ in range(4)]
    p = tmp_path / "jets.jsonl"
    dump_jets(p, jets, {"note": "x"})
    header, back = load_jets(p)
    assert header["n1"] == 3 and header["n2"] == 2 and header["note"] == "x"
    assert all(np.array_equal(a.J, b.J) for a, b in zip(jets, back))


def test_jet_file_errors(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text("")
    with pytest.raises(GeometryError):
        load_jets(p)
    p.write_text(json.dumps({"n1": 2}) + "\n")
    with pytest.raises(GeometryError):
        load_jets(p)
    p.write_text(json.dumps({"n1": 2, "n2": 1}) + "\n"
                 + json.dumps({"x": [0, 0, 0], "u": [0], "J": [[1, 0, 0]]}) + "\n")
    with pytest.raises(DimensionError):
        load_jets(p)


def test_map_field_compose_and_fd_jacobian():
    f = MapField(2, 2, lambda x: np.array([np.sin(x[0]), x[0] * x[1]]))
    A = MapField.linear(np.array([[1.0, 1.0]]))
    c = A.compose(f)
    x = np.array([0.3, 0.5])
    assert np.allclose(c.jacobian(x), [[np.cos(0.3) + 0.5, 0.3]], atol=1e-6)
    H = f.hessian(x)
    assert H[0, 0, 0] == pytest.approx(-np.sin(0.3), abs=1e-4)
    assert H[1, 0, 1] == pytest.approx(1.0, abs=1e-4)


def test_form_field_at_uses_metric():
    ff = FormField.from_form(ExtSpace(2).basis_form(0, 1))
    a = ff.at([0, 0], np.diag([4.0, 1.0]))
    assert evaluate_frame(a, a.space.orthonormal_frame()) == pytest.approx(0.5)
