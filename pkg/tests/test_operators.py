"""Operator values at known solutions, negative controls and cross-identities."""

import numpy as np
import pytest

from sprayform.expr import EvalDomainError, ScalarModel, SprayModel
from sprayform.geometry import (
    TangentPoint,
    curvature_at,
    projective_deform,
    spray_vector,
)
from sprayform.operators import (
    curvature_obstruction,
    ddJ,
    euler_lagrange_form,
    extended_rapcsak_form,
    hessian_metric,
    homogeneity_residuals,
    projective_factor,
    rapcsak_form,
    solution_audit,
)

from conftest import (
    DEFORMED_FLAT3,
    EUCLID2,
    EUCLID3,
    FLAT2,
    FLAT3,
    SPHERE,
    SPHERE_NORM,
    cloud,
)

PERTURBED = ScalarModel.from_string(
    2, "sqrt(y1^2+y2^2) + x1*y1^2/sqrt(y1^2+y2^2)", 1.0)
LINEAR_F = ScalarModel.from_string(2, "y1", 1.0)


def test_ddJ_closed_vertical_gradient():
    # F = y1: d_J F = dx^1, a closed form, so dd_J F = 0
    F = LINEAR_F
    p = TangentPoint([0.2, -0.1], [1.0, 0.7])
    assert np.abs(ddJ(F, p)).max() == 0.0


def test_ddJ_euclidean_hand_hessian():
    p = TangentPoint([0.0, 0.0], [3.0, 4.0])
    omega = ddJ(EUCLID2, p)
    want = np.array([[16.0, -12.0], [-12.0, 9.0]]) / 125.0
    assert np.abs(omega[2:, :2] - want).max() < 1e-14
    assert np.abs(omega[:2, :2]).max() == 0.0  # no x-dependence
    assert np.abs(omega + omega.T).max() == 0.0  # skew by construction


def test_rapcsak_flat_euclidean_zero():
    for p in cloud("flat2", 20, seed=83):
        r = rapcsak_form(FLAT2, EUCLID2, p)
        assert np.abs(r.horizontal).max() < 1e-10
        assert np.abs(r.vertical).max() < 1e-10
        assert r.contraction_gap < 1e-10


def test_rapcsak_sphere_pair_zero():
    for p in cloud("sphere", 20, seed=89):
        r = rapcsak_form(SPHERE, SPHERE_NORM, p)
        scale = 1 + np.abs(spray_vector(SPHERE, p)).max()
        assert np.abs(r.horizontal).max() < 1e-9 * scale
        assert np.abs(r.vertical).max() < 1e-9 * scale


def test_rapcsak_negative_control():
    wrong = SprayModel.from_strings(2, ["y2^2", "0"])
    F = ScalarModel.from_string(2, "sqrt(y1^2+2*y2^2)", 1.0)
    worst = 0.0
    for p in cloud("flat2", 20, seed=97):
        worst = max(worst, np.abs(rapcsak_form(wrong, F, p).horizontal).max())
    assert worst > 1e-3


def test_homogeneity_residuals_euclidean_exact():
    for p in cloud("flat2", 10, seed=101):
        h = homogeneity_residuals(EUCLID2, p)
        assert abs(h.value) < 1e-12
        assert np.abs(h.dx).max() < 1e-12
        assert np.abs(h.dy).max() < 1e-12


def test_homogeneity_residuals_wrong_degree():
    F = ScalarModel.from_string(2, "y1^2", 1.0)
    p = TangentPoint([0.0, 0.0], [1.3, 0.4])
    h = homogeneity_residuals(F, p)
    assert h.value == pytest.approx(1.3 ** 2, rel=1e-12)


def test_homogeneity_residuals_affine_candidate():
    # F = y1 + x1*y2 is 1-homogeneous: C F - F = 0 although P_S may not vanish
    F = ScalarModel.from_string(2, "y1 + x1*y2", 1.0)
    for p in cloud("flat2", 10, seed=103):
        h = homogeneity_residuals(F, p)
        assert h.worst < 1e-12


def test_extended_rapcsak_flat_euclidean_zero():
    for p in cloud("flat2", 10, seed=107):
        ext = extended_rapcsak_form(FLAT2, EUCLID2, p)
        assert ext.shape == (1,)
        assert np.abs(ext).max() < 1e-10


def test_extended_rapcsak_closed_form_zero():
    for p in cloud("sphere", 10, seed=109):
        assert np.abs(extended_rapcsak_form(SPHERE, LINEAR_F, p)).max() == 0.0


def test_containment_identity():
    """i_S Omega(hX) = (1/2) i_Gamma Omega(S, hX) for any F, spray, point."""
    from sprayform.geometry import connection_at

    cases = [(FLAT2, PERTURBED, "flat2"), (SPHERE, SPHERE_NORM, "sphere"),
             (SPHERE, EUCLID2, "sphere")]
    for m, F, box in cases:
        for p in cloud(box, 10, seed=113):
            omega = ddJ(F, p)
            conn = connection_at(m, p)
            igo = conn.gamma.T @ omega + omega @ conn.gamma
            S = spray_vector(m, p)
            for a in range(2 * m.n):
                hX = conn.horizontal[:, a]
                lhs = float(S @ omega @ hX)
                rhs = 0.5 * float(S @ igo @ hX)
                assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_curvature_obstruction_empty_in_dim2():
    for p in cloud("sphere", 5, seed=127):
        assert curvature_obstruction(SPHERE, SPHERE_NORM, p).size == 0


def test_curvature_obstruction_flat3_zero():
    for p in cloud("deformed_flat3", 5, seed=131):
        obs = curvature_obstruction(FLAT3, EUCLID3, p)
        assert obs.shape == (1,)
        assert np.abs(obs).max() == 0.0


def test_curvature_obstruction_isotropic_deformed():
    for p in cloud("deformed_flat3", 20, seed=137):
        obs = curvature_obstruction(DEFORMED_FLAT3, EUCLID3, p)
        assert np.abs(obs).max() < 1e-8


def test_curvature_obstruction_two_routes_agree():
    candidates = [EUCLID3, ScalarModel.from_string(3, "y3 + 0.2*y1", 1.0)]
    for F in candidates:
        for p in cloud("deformed_flat3", 10, seed=139):
            a = curvature_obstruction(DEFORMED_FLAT3, F, p)
            b = curvature_obstruction(DEFORMED_FLAT3, F, p, use_reconstructed=True)
            scale = 1 + np.abs(curvature_at(DEFORMED_FLAT3, p).R).max()
            assert np.abs(a - b).max() < 1e-8 * scale


def test_euler_lagrange_flat_energy_zero():
    E = ScalarModel.from_string(2, "0.5*(y1^2+y2^2)", 2.0)
    for p in cloud("flat2", 10, seed=149):
        assert np.abs(euler_lagrange_form(FLAT2, E, p)).max() < 1e-12


def test_euler_lagrange_sphere_energy_zero():
    E = ScalarModel.from_string(2, "0.5*(y1^2 + sin(x1)^2*y2^2)", 2.0)
    for p in cloud("sphere", 20, seed=151):
        scale = 1 + np.abs(spray_vector(SPHERE, p)).max()
        assert np.abs(euler_lagrange_form(SPHERE, E, p)).max() < 1e-9 * scale


def test_euler_lagrange_negative_control():
    E = ScalarModel.from_string(2, "0.5*(y1^2+y2^2)", 2.0)
    wrong = SprayModel.from_strings(2, ["y1^2+y2^2", "0"])
    worst = 0.0
    for p in cloud("flat2", 10, seed=157):
        worst = max(worst, np.abs(euler_lagrange_form(wrong, E, p)).max())
    assert worst > 1e-3


def test_hessian_euclidean_identity():
    p = TangentPoint([0.1, 0.7], [3.0, 4.0])
    rep = hessian_metric(EUCLID2, p)
    assert np.abs(rep.g - np.eye(2)).max() < 1e-12
    assert rep.min_eigenvalue == pytest.approx(1.0, rel=1e-12)
    assert rep.positive_definite


def test_hessian_sphere_at_equator():
    p = TangentPoint([np.pi / 2, 0.3], [0.8, -0.6])
    rep = hessian_metric(SPHERE_NORM, p)
    assert np.abs(rep.g - np.eye(2)).max() < 1e-12


def test_hessian_degenerate_candidate():
    p = TangentPoint([0.0, 0.0], [1.0, 0.3])
    rep = hessian_metric(LINEAR_F, p)
    assert rep.verdict == "degenerate"
    assert rep.min_eigenvalue == pytest.approx(0.0, abs=1e-12)
    assert not rep.positive_definite


def test_hessian_rejects_nonpositive_candidate():
    F = ScalarModel.from_string(2, "y1", 1.0)
    with pytest.raises(EvalDomainError):
        hessian_metric(F, TangentPoint([0.0, 0.0], [-1.0, 0.0]))


def test_projective_factor_flat_euclidean_zero():
    for p in cloud("flat2", 10, seed=163):
        assert projective_factor(FLAT2, EUCLID2, p) == pytest.approx(0.0, abs=1e-14)


def test_projective_factor_roundtrip():
    """Recover P from the deformed spray; the deformation formula closes."""
    P = ScalarModel.from_string(3, "sqrt(y1^2+y2^2+y3^2)", 1.0)
    deformed = projective_deform(FLAT3, P)
    for p in cloud("deformed_flat3", 10, seed=167):
        # seen from the deformed spray, the factor back to the flat one is -|y|
        fac, gap = projective_factor(deformed, EUCLID3, p, deformed=FLAT3)
        assert fac == pytest.approx(-np.linalg.norm(p.y), rel=1e-10)
        assert gap < 1e-9 * (1 + np.linalg.norm(p.y) ** 2)


def test_projective_factor_recovered_is_one_homogeneous():
    """S F is 2-homogeneous, so (S F)/(2F) passes the Euler test."""
    deformed = projective_deform(FLAT3,
                                 ScalarModel.from_string(3, "sqrt(y1^2+y2^2+y3^2)", 1.0))
    for p in cloud("deformed_flat3", 10, seed=173):
        base = projective_factor(deformed, EUCLID3, p)
        lam = 1.7
        scaled = TangentPoint(p.x, lam * p.y)
        assert projective_factor(deformed, EUCLID3, scaled) == pytest.approx(
            lam * base, rel=1e-9, abs=1e-12)


def test_solution_audit_flat_euclidean_passes():
    audit = solution_audit(FLAT2, EUCLID2, cloud("flat2", 200, seed=179))
    assert audit.passed and audit.order2 and audit.liftable_p1 and audit.liftable_p2
    assert audit.max_rapcsak < 1e-10
    assert not audit.failures


def test_solution_audit_sphere_pair_passes():
    audit = solution_audit(SPHERE, SPHERE_NORM, cloud("sphere", 200, seed=181))
    assert audit.passed and audit.order2
    assert audit.min_hessian_eigenvalue > 0.0


def test_solution_audit_negative_control_fails_rapcsak():
    audit = solution_audit(FLAT2, PERTURBED, cloud("flat2", 60, seed=191))
    assert not audit.pass_rapcsak
    assert audit.max_rapcsak > 1e-3


def test_solution_audit_containment_flag_direction():
    """pass(P_Gamma) implies pass(P_S) on every audited pair."""
    pairs = [
        (FLAT2, EUCLID2, "flat2"),
        (SPHERE, SPHERE_NORM, "sphere"),
        (FLAT2, PERTURBED, "flat2"),
        (SPHERE, EUCLID2, "sphere"),
    ]
    for m, F, box in pairs:
        audit = solution_audit(m, F, cloud(box, 40, seed=193))
        if audit.pass_extended and audit.pass_homogeneity:
            assert audit.pass_rapcsak


def test_rapcsak_projective_invariance():
    """P_S residual of a 1-homogeneous F is unchanged under deformation."""
    P = ScalarModel.from_string(2, "sqrt(y1^2+y2^2)", 1.0)
    deformed = projective_deform(FLAT2, P)
    for F in (EUCLID2, PERTURBED):
        for p in cloud("flat2", 15, seed=197):
            base = np.abs(rapcsak_form(FLAT2, F, p).horizontal).max()
            moved = np.abs(rapcsak_form(deformed, F, p).horizontal).max()
            assert moved == pytest.approx(base, rel=1e-8, abs=1e-9)


def test_audit_records_domain_failures():
    F = ScalarModel.from_string(2, "sqrt(y1^2+y2^2)/x1", 1.0)
    pts = cloud("flat2", 30, seed=199)  # x-box straddles x1 = 0
    audit = solution_audit(FLAT2, F, pts)
    assert audit.samples == 30
    # sqrt(...)/x1 is negative for x1 < 0, so the Hessian guard trips there
    assert audit.failures