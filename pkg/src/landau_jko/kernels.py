"""Collision-kernel math: projection matrix, kernel matrix A(z), pairwise terms.

The kernel family is A(z) = c_gamma * |z|^(gamma+2) * P(z), where P(z) is the
orthogonal projection onto the plane perpendicular to z.  Everything here is a
stateless double-precision function of its arguments; the batched torch
versions used in training live in :mod:`landau_jko.losses`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KernelSpec",
    "default_min_dist",
    "projection",
    "collision_matrix",
    "pair_quadratic",
    "pair_logdet_rate",
]


def default_min_dist(gamma: float) -> float:
    """Singularity guard radius: pairs closer than this contribute zero.

    For gamma >= -2 the kernel terms extend continuously by zero at z = 0, so
    only exactly coincident points need guarding.  For gamma < -2 (Coulomb
    range) |z|^(gamma+2) diverges and a small positive radius is used.
    """
    return 1e-10 if gamma < -2 else 0.0


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the collision kernel A(z) = c_gamma |z|^(gamma+2) P(z).

    gamma = 0 is the Maxwellian case; gamma = -3 with dim = 3 is Coulomb.
    """

    dim: int
    gamma: float
    c_gamma: float
    min_dist: float = field(default=-1.0)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not (-self.dim - 1 < self.gamma <= 1):
            raise ValueError(
                f"gamma must lie in (-dim-1, 1], got {self.gamma} for dim {self.dim}"
            )
        if self.c_gamma <= 0:
            raise ValueError(f"c_gamma must be > 0, got {self.c_gamma}")
        if self.min_dist < 0:
            object.__setattr__(self, "min_dist", default_min_dist(self.gamma))


def projection(z: np.ndarray) -> np.ndarray:
    """Projection P(z) = I - z z^T / |z|^2 onto the hyperplane orthogonal to z.

    Raises ValueError for the zero vector, where the projection is undefined.
    """
    z = np.asarray(z, dtype=np.float64)
    r2 = float(z @ z)
    if r2 == 0.0:
        raise ValueError("undefined projection: zero vector input")
    return np.eye(z.size) - np.outer(z, z) / r2


def collision_matrix(z: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix A(z) = c_gamma |z|^(gamma+2) P(z).

    Returns the zero matrix for |z| <= min_dist (self-interaction convention);
    otherwise a symmetric PSD matrix with z in its null space.
    """
    z = np.asarray(z, dtype=np.float64)
    r = float(np.linalg.norm(z))
    if r <= spec.min_dist:
        return np.zeros((spec.dim, spec.dim))
    return spec.c_gamma * r ** (spec.gamma + 2) * projection(z)


def pair_quadratic(
    v_i: np.ndarray,
    v_j: np.ndarray,
    u_i: np.ndarray,
    u_j: np.ndarray,
    spec: KernelSpec,
) -> float:
    """Quadratic pair term 0.5 (u_i - u_j)^T A(v_i - v_j) (u_i - u_j).

    Nonnegative; vanishes when u_i = u_j or u_i - u_j is parallel to v_i - v_j.
    """
    z = np.asarray(v_i, dtype=np.float64) - np.asarray(v_j, dtype=np.float64)
    w = np.asarray(u_i, dtype=np.float64) - np.asarray(u_j, dtype=np.float64)
    r2 = float(z @ z)
    if r2 <= spec.min_dist**2 or r2 == 0.0:
        return 0.0
    # 0.5 w^T A w = 0.5 c r^gamma (r^2 |w|^2 - (z.w)^2)
    zw = float(z @ w)
    val = 0.5 * spec.c_gamma * r2 ** (spec.gamma / 2) * (r2 * float(w @ w) - zw * zw)
    return max(val, 0.0)


def pair_logdet_rate(
    v_i: np.ndarray,
    v_j: np.ndarray,
    u_i: np.ndarray,
    u_j: np.ndarray,
    grad_u_i: np.ndarray,
    spec: KernelSpec,
) -> float:
    """Pairwise log-determinant rate

        h_ij = A(v_i - v_j) : grad_u_i
               - (dim-1) c_gamma |v_i - v_j|^gamma (v_i - v_j) . (u_i - u_j),

    where grad_u_i has entries [du_a/dv_b] at v_i and ``:`` is the Frobenius
    inner product.  Returns 0 when |v_i - v_j| <= min_dist.
    """
    z = np.asarray(v_i, dtype=np.float64) - np.asarray(v_j, dtype=np.float64)
    w = np.asarray(u_i, dtype=np.float64) - np.asarray(u_j, dtype=np.float64)
    g = np.asarray(grad_u_i, dtype=np.float64)
    r2 = float(z @ z)
    if r2 <= spec.min_dist**2 or r2 == 0.0:
        return 0.0
    rg = r2 ** (spec.gamma / 2)
    # A : G = c r^gamma (r^2 tr G - z^T G z)
    frob = spec.c_gamma * rg * (r2 * float(np.trace(g)) - float(z @ g @ z))
    drift = (spec.dim - 1) * spec.c_gamma * rg * float(z @ w)
    return frob - drift
