"""Normal-speed laws of the flow and the level-set speed kernel.

All speeds use the convention that a positive value moves the surface
inward along the outer normal, so a sphere with speed G/H > 0 shrinks.
The eigenvalue arguments follow the ordering lambda1 >= lambda2 wherever
an order matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SpeedUndefinedError(ArithmeticError):
    """The harmonic mean curvature is undefined (H <= 0 or |grad u| ~ 0)."""


@dataclass
class FlowParams:
    """Full run configuration of the solver and its monitors.

    epsilon      regularization strength in the speed G/H + epsilon*H
    delta1       switch width of the modified speed (0 < delta1 < 1)
    eta          time offset of the shifted monotone quantity q_eta
    dt_safety    fraction of the explicit stability bound actually used
    area_floor   absolute extinction threshold; if None it is set to
                 area_floor_frac * mu0 when a run starts
    """

    epsilon: float = 0.0
    delta1: float = 0.2
    eta: float = 0.1
    dt_safety: float = 0.4
    area_floor: float | None = None
    area_floor_frac: float = 1e-4
    # grid / chart layout
    y_match_frac: float = 0.15
    tip_nodes: int = 33
    tip_cover_nodes: int = 6
    regrid_distortion: float = 0.10
    # tolerances
    dt_min_frac: float = 1e-12
    grid_tol: float = 1e-9
    quad_tol: float = 5e-3
    mono_slack_frac: float = 1e-6

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 < self.delta1 < 1.0:
            raise ValueError("delta1 out of (0,1)")
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError("dt_safety out of (0,1]")
        if self.tip_nodes < 9:
            raise ValueError("tip_nodes must be >= 9")
        if not 0.0 < self.regrid_distortion < 0.5:
            raise ValueError("regrid_distortion out of (0,0.5)")


# ----------------------------------------------------------------------
# scalar speed laws (vectorized over numpy inputs)
# ----------------------------------------------------------------------

def kappa(lambda1, lambda2):
    """Harmonic mean curvature G/H = lambda1*lambda2/(lambda1+lambda2)."""
    l1 = np.asarray(lambda1, dtype=float)
    l2 = np.asarray(lambda2, dtype=float)
    H = l1 + l2
    if np.any(H <= 0.0):
        raise SpeedUndefinedError("speed undefined: H <= 0")
    out = l1 * l2 / H
    return float(out) if out.ndim == 0 else out


def kappa_eps(lambda1, lambda2, epsilon):
    """Regularized speed G/H + epsilon*H."""
    l1 = np.asarray(lambda1, dtype=float)
    l2 = np.asarray(lambda2, dtype=float)
    out = np.asarray(kappa(l1, l2)) + epsilon * (l1 + l2)
    return float(out) if out.ndim == 0 else out


def attach_speed(field, epsilon):
    """Return a copy of a CurvatureField with the speed entries filled in.

    The geometric role order of the field's lambda1/lambda2 does not
    matter here: the speed law is symmetric.
    """
    from dataclasses import replace
    with np.errstate(invalid="ignore"):
        speed = field.G / field.H + epsilon * field.H
    return replace(field, speed=speed)


def modified_speed(lambda1, lambda2, delta1):
    """Switched speed used by the level-set formulation.

    For mu = lambda2/lambda1 >= -delta1 this is plain G/H; otherwise
    lambda2/(1-delta1).  Both branches agree at mu = -delta1, so the
    speed is continuous across the switch.  Requires lambda1 >= lambda2
    and lambda1 > 0.
    """
    l1 = np.asarray(lambda1, dtype=float)
    l2 = np.asarray(lambda2, dtype=float)
    if np.any(l2 > l1):
        raise ValueError("modified_speed expects lambda1 >= lambda2")
    if np.any(l1 <= 0.0):
        raise SpeedUndefinedError("not mean convex at scale: lambda1 <= 0")
    mu = l2 / l1
    on_kappa = mu >= -delta1
    out = np.where(on_kappa, l1 * l2 / np.where(on_kappa, l1 + l2, 1.0),
                   l2 / (1.0 - delta1))
    return float(out) if out.ndim == 0 else out


# ----------------------------------------------------------------------
# level-set speed F1(t, p, X)
# ----------------------------------------------------------------------

_GRAD_FLOOR = 1e-12


def shape_operator_eigenvalues(p, X):
    """Principal curvatures of the level set {u = const} from (grad u, D^2 u).

    Restricts X/|p| to the plane orthogonal to p and diagonalizes the
    resulting 2x2 block; returns (lambda1, lambda2) with lambda1 >= lambda2.
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    norm = float(np.linalg.norm(p))
    if norm < _GRAD_FLOOR:
        raise SpeedUndefinedError("gradient degenerate: |p| ~ 0")
    ph = p / norm
    # orthonormal basis of the tangent plane
    pick = np.zeros(3)
    pick[int(np.argmin(np.abs(ph)))] = 1.0
    e1 = np.cross(ph, pick)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(ph, e1)
    basis = np.stack([e1, e2], axis=1)
    block = basis.T @ X @ basis / norm
    lam = np.linalg.eigvalsh(0.5 * (block + block.T))
    return float(lam[1]), float(lam[0])


def levelset_speed_F1(p, X, delta1):
    """Level-set speed -|p| * modified_speed(lambda1, lambda2, delta1).

    With u increasing outward and the surface moving inward at the
    modified speed, the level-set equation reads u_t + F1 = 0, so F1 is
    negative on a shrinking sphere.
    """
    p = np.asarray(p, dtype=float)
    norm = float(np.linalg.norm(p))
    if norm < _GRAD_FLOOR:
        raise SpeedUndefinedError("gradient degenerate: |p| ~ 0")
    l1, l2 = shape_operator_eigenvalues(p, X)
    return -norm * float(modified_speed(l1, l2, delta1))


def levelset_speed_F1_tracedet(p, X):
    """First-branch F1 through traces and determinants, no eigen solve.

    Writing P = I - phat phat^T, the mean curvature of the level set is
    trace(P X)/|p| and the Gauss curvature det(P X P + phat phat^T)/|p|^2,
    so F1 = -|p| G/H = -det(P X P + phat phat^T)/trace(P X).  Used as the
    independent cross-check of the eigenvalue route on the branch where
    the modified speed equals G/H.
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    norm = float(np.linalg.norm(p))
    if norm < _GRAD_FLOOR:
        raise SpeedUndefinedError("gradient degenerate: |p| ~ 0")
    ph = p / norm
    P = np.eye(3) - np.outer(ph, ph)
    trace = float(np.trace(P @ X))
    if trace <= 0.0:
        raise SpeedUndefinedError("speed undefined: H <= 0")
    det = float(np.linalg.det(P @ X @ P + np.outer(ph, ph)))
    return -det / trace
