"""Metrizability operators and their obstruction forms, evaluated pointwise.

The second-order system tested here couples the Rapcsak equation
i_S dd_J F = 0 with the 1-homogeneity condition C F - F = 0.  Two closed-form
obstructions govern whether a pointwise solution lifts order by order: the
connection form i_Gamma dd_J F (first stage) and the curvature form
i_R dd_J F (second stage).  ``solution_audit`` bundles the whole battery over
a sample cloud, together with the Hessian positivity that a Finsler candidate
must satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import EvalDomainError, ScalarModel, SprayModel, eval_jet
from .geometry import (
    TangentPoint,
    adapted_frame_at,
    connection_at,
    curvature_at,
    spray_vector,
)
from .jets import Jet3


def _partials(jet: Jet3, n: int):
    """First and second partials of a scalar on TM, split into x/y blocks."""
    nv = 2 * n

    def d1(a):
        alpha = [0] * nv
        alpha[a] = 1
        return jet.partial(alpha)

    def d2(a, b):
        alpha = [0] * nv
        alpha[a] += 1
        alpha[b] += 1
        return jet.partial(alpha)

    Fx = np.array([d1(i) for i in range(n)])
    Fy = np.array([d1(n + i) for i in range(n)])
    Fxy = np.array([[d2(i, n + j) for j in range(n)] for i in range(n)])
    Fyy = np.array([[d2(n + i, n + j) for j in range(n)] for i in range(n)])
    return Fx, Fy, Fxy, Fyy


def ddJ(F: ScalarModel, p: TangentPoint) -> np.ndarray:
    """The 2-form d(d_J F) as a skew 2n x 2n matrix.

    d_J F = (dF/dy^i) dx^i, so the (x,x) block is the curl of the fiber
    gradient in the base directions, the (y,x) block is the fiber Hessian and
    the (y,y) block vanishes.
    """
    n = p.n
    jet = eval_jet(F.expr, p)
    _, _, Fxy, Fyy = _partials(jet, n)
    omega = np.zeros((2 * n, 2 * n))
    xx = Fxy - Fxy.T  # Omega(dx^i, dx^j) = F_{x^i y^j} - F_{x^j y^i}
    omega[:n, :n] = xx
    omega[n:, :n] = Fyy  # Omega(dy^i, dx^j) = F_{y^i y^j}
    omega[:n, n:] = -Fyy.T
    return omega


@dataclass
class RapcsakValue:
    """i_S dd_J F at a point: semi-basic part, vertical part, path cross-check.

    ``horizontal`` follows the Euler-Lagrange-style expansion
    y^j F_{x^j y^i} + f^j F_{y^j y^i} - F_{x^i}; ``contraction_gap`` is the
    difference against the matrix contraction dd_J F(S, dx^i), which equals
    the x-gradient of (CF - F) and vanishes for 1-homogeneous F.
    """

    horizontal: np.ndarray
    vertical: np.ndarray
    contraction_gap: float


def rapcsak_form(m: SprayModel, F: ScalarModel, p: TangentPoint) -> RapcsakValue:
    n = p.n
    jet = eval_jet(F.expr, p)
    Fx, _, Fxy, Fyy = _partials(jet, n)
    S = spray_vector(m, p)
    horizontal = p.y @ Fxy + S[n:] @ Fyy - Fx
    omega = ddJ(F, p)
    contracted = S @ omega  # (i_S Omega)(e_b) = Omega(S, e_b)
    vertical = contracted[n:]
    gap = float(np.abs(contracted[:n] - horizontal).max())
    return RapcsakValue(horizontal, vertical, gap)


@dataclass
class HomogeneityValue:
    """CF - F with its 2n first-derivative prolongation residuals."""

    value: float
    dx: np.ndarray
    dy: np.ndarray

    @property
    def worst(self) -> float:
        return max(abs(self.value), np.abs(self.dx).max(), np.abs(self.dy).max())


def homogeneity_residuals(F: ScalarModel, p: TangentPoint) -> HomogeneityValue:
    """Pointwise Euler defect: value and gradient of y^i F_{y^i} - F."""
    n = p.n
    jet = eval_jet(F.expr, p)
    Fx, Fy, Fxy, Fyy = _partials(jet, n)
    value = float(p.y @ Fy - jet.value)
    dx = Fxy @ p.y - Fx  # d/dx^i (CF - F) = y^j F_{x^i y^j} - F_{x^i}
    dy = Fyy @ p.y  # d/dy^i (CF - F) = y^j F_{y^i y^j}
    return HomogeneityValue(value, dx, dy)


def extended_rapcsak_form(m: SprayModel, F: ScalarModel, p: TangentPoint,
                          check_tol: float = 1e-9) -> np.ndarray:
    """Independent components of i_Gamma dd_J F in the adapted frame.

    For skew Omega and Gamma^2 = Id the mixed (horizontal, vertical)
    components cancel and the vertical-vertical block of dd_J F is zero, so
    the n(n-1)/2 horizontal-horizontal values carry everything; the expected
    vanishing of the rest is asserted.
    """
    n = p.n
    conn = connection_at(m, p)
    omega = ddJ(F, p)
    igo = conn.gamma.T @ omega + omega @ conn.gamma  # (i_G O)(u,v) = O(Gu,v)+O(u,Gv)
    frame = adapted_frame_at(m, p, conn)
    full = frame.matrix.T @ igo @ frame.matrix
    scale = 1.0 + np.abs(full).max()
    mixed = np.abs(full[:n, n:]).max()
    vertical = np.abs(full[n:, n:]).max()
    if max(mixed, vertical) > check_tol * scale:
        raise RuntimeError(
            f"i_Gamma dd_J F has non-horizontal components: {max(mixed, vertical):.3e}")
    comps = []
    for i in range(n):
        for j in range(i + 1, n):
            comps.append(full[i, j])
    return np.array(comps)


def curvature_obstruction(m: SprayModel, F: ScalarModel, p: TangentPoint,
                          use_reconstructed: bool = False) -> np.ndarray:
    """i_R dd_J F on horizontal frame triples: the binom(n,3) lift obstructions.

    Empty (identically zero) for n <= 2, where the space of semi-basic
    3-forms is trivial.  With ``use_reconstructed`` the curvature entering the
    contraction is rebuilt from (1/3)[J, Phi] instead of the Nijenhuis
    torsion, giving an independent evaluation path.
    """
    n = p.n
    if n <= 2:
        return np.zeros(0)
    data = curvature_at(m, p)
    R = data.R_reconstructed if use_reconstructed else data.R
    omega = ddJ(F, p)
    frame = adapted_frame_at(m, p)
    H = frame.horizontal  # columns h_1..h_n
    comps = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                comps.append(
                    _contract_iR(omega, R, H[:, i], H[:, j], H[:, k], n))
    return np.array(comps)


def _vertical_value(R, u, v, n):
    """R(u, v) as a 2n-vector; semi-basic, so only x-components of u, v act."""
    w = np.zeros(2 * n)
    w[n:] = np.einsum("ijk,j,k->i", R, u[:n], v[:n])
    return w


def _contract_iR(omega, R, X, Y, Z, n):
    return float(
        _vertical_value(R, X, Y, n) @ omega @ Z
        + _vertical_value(R, Y, Z, n) @ omega @ X
        + _vertical_value(R, Z, X, n) @ omega @ Y
    )


def euler_lagrange_form(m: SprayModel, E: ScalarModel, p: TangentPoint,
                        check_tol: float = 1e-10) -> np.ndarray:
    """omega_E = i_S dd_J E + d(C E) - dE, returned as its n dx-components.

    Assembled exactly from the stated pieces, with two structural checks: the
    dy-components cancel identically (semi-basic), and the dx-components
    match the coordinate Euler-Lagrange expansion.
    """
    n = p.n
    jet = eval_jet(E.expr, p)
    Ex, Ey, Exy, Eyy = _partials(jet, n)
    S = spray_vector(m, p)
    f = S[n:]
    omega = ddJ(E, p)
    contracted = S @ omega
    # d(CE): CE = y^j E_{y^j}; gradient blocks
    dCE_x = Exy @ p.y
    dCE_y = Ey + Eyy @ p.y
    full = contracted + np.concatenate([dCE_x - Ex, dCE_y - Ey])
    scale = 1.0 + np.abs(full).max() + np.abs(Ey).max()
    if np.abs(full[n:]).max() > check_tol * scale:
        raise RuntimeError(
            f"Euler-Lagrange form not semi-basic: {np.abs(full[n:]).max():.3e}")
    coordinate = p.y @ Exy + f @ Eyy - Ex
    if np.abs(full[:n] - coordinate).max() > check_tol * scale:
        raise RuntimeError("Euler-Lagrange form disagrees with coordinate expansion")
    return full[:n]


@dataclass
class HessianReport:
    g: np.ndarray
    min_eigenvalue: float
    verdict: str  # positive-definite | degenerate | indefinite

    @property
    def positive_definite(self) -> bool:
        return self.verdict == "positive-definite"


def hessian_metric(F: ScalarModel, p: TangentPoint, tol: float = 1e-10) -> HessianReport:
    """Fiber Hessian of the energy E = F^2/2 with its minimum eigenvalue."""
    n = p.n
    jet = eval_jet(F.expr, p)
    if jet.value <= 0.0:
        raise EvalDomainError("Finsler candidate is non-positive at the sample",
                              "F")
    energy = jet * jet * 0.5
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            alpha = [0] * (2 * n)
            alpha[n + i] += 1
            alpha[n + j] += 1
            g[i, j] = g[j, i] = energy.partial(alpha)
    min_eig = float(np.linalg.eigvalsh(g)[0])
    scale = tol * (1.0 + np.abs(g).max())
    if min_eig > scale:
        verdict = "positive-definite"
    elif min_eig >= -scale:
        verdict = "degenerate"
    else:
        verdict = "indefinite"
    return HessianReport(g, min_eig, verdict)


def projective_factor(m: SprayModel, F: ScalarModel, p: TangentPoint,
                      deformed: SprayModel | None = None):
    """P = (S F)/(2 F); optionally the consistency gap |f~ - (f - 2 P y)|.

    Returns the factor alone, or a (factor, gap) pair when the projectively
    deformed spray is supplied.
    """
    n = p.n
    jet = eval_jet(F.expr, p)
    if jet.value <= 0.0:
        raise EvalDomainError("projective factor needs F > 0 at the sample", "F")
    Fx, Fy, _, _ = _partials(jet, n)
    S = spray_vector(m, p)
    SF = float(S[:n] @ Fx + S[n:] @ Fy)
    P = SF / (2.0 * jet.value)
    if deformed is None:
        return P
    f_def = spray_vector(deformed, p)[n:]
    gap = float(np.abs(f_def - (S[n:] - 2.0 * P * p.y)).max())
    return P, gap


# -- aggregate audit ---------------------------------------------------------


@dataclass
class SampleFailure:
    index: int
    message: str


@dataclass
class SolutionAudit:
    """Per-sample residuals and verdicts for one (spray, candidate) pair.

    ``order2`` demands the operator value and the first derivatives of the
    homogeneity defect vanish; ``liftable_p1`` adds the connection
    obstruction, ``liftable_p2`` the curvature obstruction.  ``per_sample``
    keeps the raw residual of every operator at every evaluated sample, in
    sample order, so reports are reproducible and auditable.
    """

    samples: int
    tol: float
    max_rapcsak: float = 0.0
    max_homogeneity: float = 0.0
    max_extended: float = 0.0
    max_curvature_obstruction: float = 0.0
    min_hessian_eigenvalue: float = float("inf")
    hessian_ok: bool = True
    pass_rapcsak: bool = True
    pass_homogeneity: bool = True
    pass_extended: bool = True
    pass_curvature_obstruction: bool = True
    failures: list = field(default_factory=list)
    per_sample: dict = field(default_factory=lambda: {
        "rapcsak": [], "homogeneity": [], "extended": [],
        "curvature_obstruction": [], "hessian_min_eigenvalue": []})

    @property
    def order2(self) -> bool:
        return self.pass_rapcsak and self.pass_homogeneity

    @property
    def liftable_p1(self) -> bool:
        return self.order2 and self.pass_extended

    @property
    def liftable_p2(self) -> bool:
        return self.order2 and self.pass_curvature_obstruction

    @property
    def passed(self) -> bool:
        return self.order2 and self.hessian_ok


def solution_audit(m: SprayModel, F: ScalarModel, samples,
                   tol: float = 1e-8) -> SolutionAudit:
    """Evaluate the full operator battery at every sample.

    Per-sample residuals are compared against ``tol`` times a local scale
    1 + |F| + the largest derivative magnitude in play, so sprays of wildly
    different coefficient sizes are audited on equal footing.  Samples where
    evaluation leaves the expression domain are recorded, not fatal.
    """
    audit = SolutionAudit(samples=len(samples), tol=tol)
    for idx, p in enumerate(samples):
        try:
            jet = eval_jet(F.expr, p)
            fjets = [eval_jet(e, p) for e in m.f]
            scale = 1.0 + abs(jet.value) + float(max(
                np.abs(jet.coeffs).max(), max(np.abs(g.coeffs).max() for g in fjets)))
            limit = tol * scale

            rap = rapcsak_form(m, F, p)
            r_rap = float(max(np.abs(rap.horizontal).max(), np.abs(rap.vertical).max()))
            hom = homogeneity_residuals(F, p)
            r_hom = float(hom.worst)
            ext = extended_rapcsak_form(m, F, p)
            r_ext = float(np.abs(ext).max()) if ext.size else 0.0
            obs = curvature_obstruction(m, F, p)
            r_obs = float(np.abs(obs).max()) if obs.size else 0.0
            hess = hessian_metric(F, p)
        except (EvalDomainError, ZeroDivisionError) as exc:
            audit.failures.append(SampleFailure(idx, str(exc)))
            continue

        audit.per_sample["rapcsak"].append(r_rap)
        audit.per_sample["homogeneity"].append(r_hom)
        audit.per_sample["extended"].append(r_ext)
        audit.per_sample["curvature_obstruction"].append(r_obs)
        audit.per_sample["hessian_min_eigenvalue"].append(hess.min_eigenvalue)
        audit.max_rapcsak = max(audit.max_rapcsak, r_rap)
        audit.max_homogeneity = max(audit.max_homogeneity, r_hom)
        audit.max_extended = max(audit.max_extended, r_ext)
        audit.max_curvature_obstruction = max(audit.max_curvature_obstruction, r_obs)
        audit.min_hessian_eigenvalue = min(audit.min_hessian_eigenvalue,
                                           hess.min_eigenvalue)
        audit.pass_rapcsak &= r_rap <= limit
        audit.pass_homogeneity &= r_hom <= limit
        audit.pass_extended &= r_ext <= limit
        audit.pass_curvature_obstruction &= r_obs <= limit
        audit.hessian_ok &= hess.positive_definite
    return audit
