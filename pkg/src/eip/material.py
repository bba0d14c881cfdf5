"""Fixed corotated hyperelasticity.

Energy density  psi(F) = mu * sum_i (sigma_i - 1)^2 + lambda / 2 * (J - 1)^2
First Piola-Kirchhoff stress  P = 2 mu (F - R) + lambda (J - 1) J F^-T

with F = R S the polar decomposition, sigma_i the singular values of F and
J = det F.  All functions accept a single 3x3 matrix or a stack (..., 3, 3).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InversionError(ValueError):
    """det(F) <= 0: the element is inverted or degenerate."""


@dataclass(frozen=True)
class MaterialParams:
    E: float = 3.0
    nu: float = 0.25
    mu: float = field(init=False)
    lam: float = field(init=False)

    def __post_init__(self):
        mu, lam = lame_parameters(self.E, self.nu)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)


def lame_parameters(E: float, nu: float) -> tuple[float, float]:
    if not E > 0:
        raise ValueError(f"Young's modulus must be positive, got E={E}")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got nu={nu}")
    mu = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    return mu, lam


def youngs_from_lame(mu: float, lam: float) -> tuple[float, float]:
    """Inverse of :func:`lame_parameters`."""
    E = mu * (3 * lam + 2 * mu) / (lam + mu)
    nu = lam / (2 * (lam + mu))
    return E, nu


def _check_det(F: np.ndarray) -> np.ndarray:
    J = np.linalg.det(F)
    if np.any(~(J > 0)):
        raise InversionError(f"det(F) must be positive, got min {np.min(J):.6g}")
    return J


def polar_decompose(F):
    """Return (R, S, sigma) with F = R S, R a proper rotation, sigma descending.

    Computed from the SVD F = U diag(sigma) V^T.  When det(U) or det(V) is
    negative the last singular column of both is flipped so each is a proper
    rotation; with det(F) > 0 this never changes the sign of sigma.
    """
    F = np.asarray(F, dtype=np.float64)
    _check_det(F)
    U, sigma, Vt = np.linalg.svd(F)
    flip = np.linalg.det(U) < 0
    if np.any(flip):
        U = U.copy()
        Vt = Vt.copy()
        U[..., :, 2] = np.where(flip[..., None], -U[..., :, 2], U[..., :, 2])
        Vt[..., 2, :] = np.where(flip[..., None], -Vt[..., 2, :], Vt[..., 2, :])
    R = U @ Vt
    S = np.swapaxes(Vt, -1, -2) @ (sigma[..., :, None] * Vt)
    return R, S, sigma


def energy_density(F, params: MaterialParams):
    F = np.asarray(F, dtype=np.float64)
    _, _, sigma = polar_decompose(F)
    J = np.linalg.det(F)
    return params.mu * np.sum((sigma - 1.0) ** 2, axis=-1) + 0.5 * params.lam * (J - 1.0) ** 2


def cofactor(F):
    """J F^-T, written out so it stays finite as J -> 0."""
    F = np.asarray(F, dtype=np.float64)
    c = np.empty_like(F)
    for i in range(3):
        i1, i2 = (i + 1) % 3, (i + 2) % 3
        for j in range(3):
            j1, j2 = (j + 1) % 3, (j + 2) % 3
            c[..., i, j] = F[..., i1, j1] * F[..., i2, j2] - F[..., i1, j2] * F[..., i2, j1]
    return c


def pk1_stress(F, params: MaterialParams):
    F = np.asarray(F, dtype=np.float64)
    R, _, _ = polar_decompose(F)
    J = np.linalg.det(F)
    return 2 * params.mu * (F - R) + (params.lam * (J - 1.0))[..., None, None] * cofactor(F)


def deformation_state(F) -> dict:
    R, S, sigma = polar_decompose(F)
    return {"F": np.asarray(F, dtype=float), "J": float(np.linalg.det(F)), "sigma": sigma, "R": R, "S": S}
