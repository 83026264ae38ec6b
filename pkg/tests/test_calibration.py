import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smithmaps.calibration import (
    CalibrationError,
    PreconditionError,
    comass_estimate,
    first_cousin_check,
    form_to_json,
    is_calibrated_plane,
    load_form_json,
    p_alpha,
    p_alpha_adjoint,
    p_alpha_matrix,
    pp_top_check,
    standard_form,
)
from smithmaps.exterior import ExtSpace, KForm, KVector, evaluate_frame, hodge_star
from smithmaps.geometry import SplitFrame, horizontal_split


def form_from_terms(n, terms):
    """Independent builder: 1-based index tuples with coefficients."""
    sp = ExtSpace(n)
    out = KForm.zero(sp, len(terms[0][0]))
    for idx, c in terms:
        out = out + sp.basis_form(*[i - 1 for i in idx], coeff=c)
    return out


PHI0 = [((1, 2, 3), 1), ((1, 4, 5), 1), ((1, 6, 7), 1), ((2, 4, 6), 1),
        ((2, 5, 7), -1), ((3, 4, 7), -1), ((3, 5, 6), -1)]
PSI0 = [((4, 5, 6, 7), 1), ((2, 3, 6, 7), 1), ((2, 3, 4, 5), 1), ((1, 3, 5, 7), 1),
        ((1, 3, 4, 6), -1), ((1, 2, 5, 6), -1), ((1, 2, 4, 7), -1)]
RE_UPSILON = [((1, 3, 5), 1), ((1, 4, 6), -1), ((2, 3, 6), -1), ((2, 4, 5), -1)]

ALL = [("kaehler", 4), ("kaehler", 6), ("kaehler-power", 6), ("kaehler-power", 8),
       ("special-lagrangian", 6), ("associative", 7), ("coassociative", 7), ("cayley", 8)]


# -- standard forms against hand-written tables -------------------------------


def test_associative_table():
    assert standard_form("associative", 7).form.allclose(form_from_terms(7, PHI0))


def test_coassociative_is_star_phi():
    psi = standard_form("coassociative", 7).form
    assert psi.allclose(form_from_terms(7, PSI0), atol=1e-14)


def test_special_lagrangian_table():
    assert standard_form("special-lagrangian", 6).form.allclose(form_from_terms(6, RE_UPSILON))


def test_kaehler_power_has_unit_terms():
    w2 = standard_form("kaehler-power", 8).form
    assert sorted(np.round(c, 12) for _, c in w2.terms()) == [1.0] * 6


def test_cayley_structure():
    Phi = standard_form("cayley", 8).form
    assert Phi.coeff(0, 1, 2, 3) == pytest.approx(1.0)
    assert Phi.coeff(4, 5, 6, 7) == pytest.approx(1.0)
    assert len(Phi.terms(1e-12)) == 14
    assert hodge_star(Phi).allclose(Phi, atol=1e-13)


@pytest.mark.parametrize("name,n,norm_sq", [("associative", 7, 7), ("coassociative", 7, 7),
                                            ("cayley", 8, 14), ("special-lagrangian", 6, 4)])
def test_form_norms(name, n, norm_sq):
    assert standard_form(name, n).form.inner(standard_form(name, n).form) == pytest.approx(norm_sq)


def test_unknown_and_bad_dimension():
    with pytest.raises(CalibrationError):
        standard_form("hyperkaehler", 8)
    with pytest.raises(CalibrationError):
        standard_form("kaehler", 5)
    with pytest.raises(CalibrationError):
        standard_form("associative", 8)


# -- comass ------------------------------------------------------------------


def test_comass_decomposable_unit():
    assert comass_estimate(ExtSpace(4).basis_form(0, 1), restarts=20).value == pytest.approx(1.0, abs=1e-12)


def test_comass_homogeneity():
    a = ExtSpace(4).basis_form(0, 1)
    for c in (0.5, 2.0, 10.0):
        assert comass_estimate(c * a, restarts=20).value == pytest.approx(c, abs=1e-8)


@pytest.mark.parametrize("name,n", ALL)
def test_standard_comass_is_one(name, n):
    res = comass_estimate(standard_form(name, n).form, restarts=40, seed=3)
    assert res.value == pytest.approx(1.0, abs=1e-6)
    assert res.is_calibration
    F = res.frame
    assert np.allclose(F.T @ F, np.eye(F.shape[1]), atol=1e-12)


def test_comass_non_calibration():
    # e12 + e34 + e13 has comass > 1
    sp = ExtSpace(4)
    a = sp.basis_form(0, 1) + sp.basis_form(2, 3) + sp.basis_form(0, 2)
    res = comass_estimate(a, restarts=30)
    assert res.value > 1.1
    assert not res.is_calibration


def test_comass_metric_scaling():
    # e^12 on (R^2, 4 I) has comass 1/4
    a = KForm(ExtSpace(2, 4 * np.eye(2)), 2, np.ones(1))
    assert comass_estimate(a, restarts=5).value == pytest.approx(0.25)


def test_comass_deterministic_for_seed():
    a = standard_form("associative", 7).form
    r1, r2 = comass_estimate(a, restarts=10, seed=5), comass_estimate(a, restarts=10, seed=5)
    assert r1.value == r2.value
    assert np.array_equal(r1.frame, r2.frame)


def test_comass_restarts_must_be_positive():
    with pytest.raises(CalibrationError):
        comass_estimate(ExtSpace(2).basis_form(0, 1), restarts=0)


@settings(max_examples=40, deadline=None)
@given(idx=st.integers(0, len(ALL) - 1), seed=st.integers(0, 2**31))
def test_calibration_bounded_on_random_frames(idx, seed):
    name, n = ALL[idx]
    a = standard_form(name, n).form
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, a.degree)))
    assert evaluate_frame(a, Q) <= 1.0 + 1e-12


# -- calibrated planes ---------------------------------------------------------


def test_calibrated_plane_examples():
    phi = standard_form("associative", 7).form
    I = np.eye(7)
    assert is_calibrated_plane(phi, I[:, [0, 1, 2]]).calibrated
    chk = is_calibrated_plane(phi, I[:, [1, 0, 2]])
    assert chk.value == pytest.approx(-1.0) and not chk.calibrated
    omega = standard_form("kaehler", 4).form
    assert is_calibrated_plane(omega, np.eye(4)[:, [0, 2]]).value == 0.0


def test_calibrated_plane_needs_orthonormal_frame():
    with pytest.raises(PreconditionError):
        is_calibrated_plane(standard_form("kaehler", 4).form, 2 * np.eye(4)[:, :2])


def test_first_cousin_examples():
    phi = standard_form("associative", 7).form
    I = np.eye(7)
    assert first_cousin_check(phi, I[:, :3], I[:, 3]) == pytest.approx(0.0, abs=1e-15)
    assert first_cousin_check(phi, I[:, :3], np.zeros(7)) == 0.0
    w2 = standard_form("kaehler-power", 6).form
    assert first_cousin_check(w2, np.eye(6)[:, :4], np.eye(6)[:, 4]) == pytest.approx(0.0, abs=1e-15)


def test_first_cousin_projects_w():
    phi = standard_form("associative", 7).form
    I = np.eye(7)
    w = I[:, 4] + 3 * I[:, 0]  # component along the plane is removed
    assert first_cousin_check(phi, I[:, :3], w) == pytest.approx(0.0, abs=1e-15)


def test_first_cousin_requires_calibrated_frame():
    phi = standard_form("associative", 7).form
    with pytest.raises(PreconditionError):
        first_cousin_check(phi, np.eye(7)[:, [0, 1, 3]], np.eye(7)[:, 6])
    with pytest.raises(PreconditionError):
        first_cousin_check(phi, np.eye(7)[:, :3], np.eye(7)[:, 0])


def test_first_cousin_on_optimizer_frames():
    a = standard_form("cayley", 8).form
    res = comass_estimate(a, restarts=10, seed=1)
    for F, v in zip(res.frames, res.values):
        if abs(v - 1) > 1e-12:
            continue
        Q, _ = np.linalg.qr(np.column_stack([F, np.eye(8)]))
        for w in Q[:, 4:].T:
            assert abs(first_cousin_check(a, F, w)) <= 1e-9


# -- P_alpha -------------------------------------------------------------------


def test_p_alpha_examples():
    phi = standard_form("associative", 7).form
    sp = phi.space
    assert np.allclose(p_alpha(phi, sp.basis_vector(0, 1)), np.eye(7)[2])
    omega = standard_form("kaehler", 4).form
    assert np.allclose(p_alpha(omega, omega.space.basis_vector(0)), np.eye(4)[1])
    assert not p_alpha(omega, KVector.zero(omega.space, 1)).any()


def test_p_alpha_adjoint_example():
    omega = standard_form("kaehler", 4).form
    adj = p_alpha_adjoint(omega, np.eye(4)[1])
    assert np.allclose(adj.coeffs, np.eye(4)[0])


def test_p_alpha_matrix_columns():
    phi = standard_form("associative", 7).form
    M = p_alpha_matrix(phi)
    assert M.shape == (7, 21)
    # each basis bivector e_i ^ e_j maps to a unit vector (phi is a cross product)
    assert np.allclose(np.linalg.norm(M, axis=0), 1.0)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 7), data=st.data())
def test_p_alpha_adjointness(n, data):
    k = data.draw(st.integers(1, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    sp = ExtSpace(n, (Q * rng.uniform(0.5, 2, n)) @ Q.T)
    from math import comb
    a = KForm(sp, k, rng.standard_normal(comb(n, k)))
    w = KVector(sp, k - 1, rng.standard_normal(comb(n, k - 1)))
    v = rng.standard_normal(n)
    lhs = p_alpha(a, w) @ sp.metric @ v
    assert lhs == pytest.approx(w.inner(p_alpha_adjoint(a, v)), abs=1e-11)


def test_pp_top_projection_example():
    split = SplitFrame.coordinate(4, vertical=[2, 3])
    a = ExtSpace(4).basis_form(0, 1)
    assert pp_top_check(a, split) == pytest.approx(0.0, abs=1e-15)
    assert pp_top_check(3.0 * a, split) == pytest.approx(0.0, abs=1e-13)
    assert pp_top_check(KForm.zero(a.space, 2), split) == 0.0


def test_pp_top_rejects_mixed_type():
    split = SplitFrame.coordinate(4, vertical=[2, 3])
    with pytest.raises(PreconditionError):
        pp_top_check(ExtSpace(4).basis_form(0, 2), split)


def test_pp_top_with_metric():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((3, 6))
    h = np.diag(rng.uniform(0.5, 2, 6))
    split = horizontal_split(A, h, np.eye(3))
    a = ExtSpace(3).vol().pullback(A, ExtSpace(6, h))
    assert pp_top_check(a, split) <= 1e-10 * (1 + a.norm() ** 2)


# -- JSON forms ----------------------------------------------------------------


def test_json_round_trip(tmp_path):
    phi = standard_form("associative", 7).form
    doc = form_to_json(phi, "phi")
    p = tmp_path / "phi.json"
    p.write_text(json.dumps(doc))
    back = load_form_json(p)
    assert back.form.allclose(phi)
    assert back.name == "phi"


@pytest.mark.parametrize("terms", [
    [{"indices": [1, 2], "coeff": 1}, {"indices": [1, 2], "coeff": 2}],
    [{"indices": [2, 1], "coeff": 1}],
    [{"indices": [1, 5], "coeff": 1}],
    [{"indices": [1], "coeff": 1}],
])
def test_json_rejects_bad_terms(terms):
    with pytest.raises(CalibrationError):
        load_form_json({"dim": 4, "degree": 2, "terms": terms})


def test_json_rejects_missing_fields():
    with pytest.raises(CalibrationError):
        load_form_json({"dim": 4, "terms": []})
