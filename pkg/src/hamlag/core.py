"""Pointwise linear algebra of compatible triples (omega, J, g).

Matrices act on column vectors: ``omega(u, v) = u @ W @ v`` and
``g(u, v) = u @ G @ v``.  Every batched helper accepts arrays with arbitrary
leading dimensions ``(..., D, D)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HamlagError

DEFAULT_TOL = 1e-10


def standard_omega(dim: int) -> np.ndarray:
    """Darboux form ``dx1^dx2 + dx3^dx4 + ...`` on R^dim (pairs interleaved)."""
    if dim < 2 or dim % 2:
        raise DimensionError(f"symplectic dimension must be even and >= 2, got {dim}")
    W = np.zeros((dim, dim))
    for j in range(0, dim, 2):
        W[j, j + 1] = 1.0
        W[j + 1, j] = -1.0
    return W


@dataclass(frozen=True)
class SymplecticForm:
    matrix: np.ndarray

    def __post_init__(self):
        W = np.array(self.matrix, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] % 2:
            raise DimensionError(f"omega must be an even square matrix, got shape {W.shape}")
        if np.max(np.abs(W + W.T)) > 1e-12:
            raise ValueError("omega is not antisymmetric")
        if abs(np.linalg.det(W)) <= 1e-12:
            raise ValueError("omega is degenerate")
        W.setflags(write=False)
        object.__setattr__(self, "matrix", W)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def standard(cls, dim: int) -> "SymplecticForm":
        return cls(standard_omega(dim))


@dataclass(frozen=True)
class MetricForm:
    matrix: np.ndarray

    def __post_init__(self):
        G = np.array(self.matrix, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] % 2:
            raise DimensionError(f"metric must be an even square matrix, got shape {G.shape}")
        if np.max(np.abs(G - G.T)) > 1e-12 * max(1.0, np.max(np.abs(G))):
            raise ValueError("metric is not symmetric")
        if np.linalg.eigvalsh(G)[0] <= 0:
            raise ValueError("metric is not positive definite")
        G.setflags(write=False)
        object.__setattr__(self, "matrix", G)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class CompatibleTriple:
    omega: SymplecticForm
    J: np.ndarray
    g: MetricForm


@dataclass(frozen=True)
class PolarFactors:
    """``A = P J = J P`` with ``P`` g-positive and ``J`` g-orthogonal."""

    A: np.ndarray
    P: np.ndarray
    J: np.ndarray


@dataclass(frozen=True)
class TripleReport:
    complex_structure: float  # max |J J + I|
    compatibility: float  # max |omega - g(J., .)|
    orthogonality: float  # max |g(J., J.) - g|

    @property
    def max_violation(self) -> float:
        return max(self.complex_structure, self.compatibility, self.orthogonality)

    def ok(self, tol: float = DEFAULT_TOL) -> bool:
        return self.max_violation < tol


def _check_dims(omega: SymplecticForm, g: MetricForm) -> None:
    if omega.dim != g.dim:
        raise DimensionError(f"omega is {omega.dim}-dimensional but g is {g.dim}-dimensional")


def skew_tensor(W: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Batched ``A`` with ``g(A u, v) = omega(u, v)``, i.e. ``A = -G^{-1} W``."""
    return -np.linalg.solve(G, np.broadcast_to(W, np.shape(G)))


def polar_factors(W: np.ndarray, G: np.ndarray):
    """Batched g-polar decomposition of ``A_g``.

    Works in a g-orthonormal frame (``G = L L^T``), where the g-adjoint is the
    plain transpose, and takes the square root of ``A A^*`` through ``eigh``.
    Returns ``(A, P, J)`` with leading dimensions matching ``G``.
    """
    G = np.asarray(G, dtype=float)
    A = skew_tensor(W, G)
    L = np.linalg.cholesky(G)
    Lt = np.swapaxes(L, -1, -2)
    # A~ = L^T A L^{-T}
    At = Lt @ A @ np.linalg.inv(Lt)
    At = 0.5 * (At - np.swapaxes(At, -1, -2))
    lam, V = np.linalg.eigh(At @ np.swapaxes(At, -1, -2))
    if np.any(lam <= 0):
        raise HamlagError("polar decomposition failed: A_g is singular")
    Vt = np.swapaxes(V, -1, -2)
    sq = np.sqrt(lam)
    Pt = (V * sq[..., None, :]) @ Vt
    Pt_inv = (V / sq[..., None, :]) @ Vt
    Jt = Pt_inv @ At
    Lt_inv = np.linalg.inv(Lt)
    P = Lt_inv @ Pt @ Lt
    J = Lt_inv @ Jt @ Lt
    return A, P, J


def retracted_metric(W: np.ndarray, G: np.ndarray):
    """Batched ``(J_g, r(g))`` with ``r(g) = omega(., J_g .)``."""
    _, P, J = polar_factors(W, G)
    R = np.asarray(G) @ P
    R = 0.5 * (R + np.swapaxes(R, -1, -2))
    return J, R


def tensor_A(omega: SymplecticForm, g: MetricForm) -> np.ndarray:
    """The g-skew endomorphism ``A`` representing omega through g."""
    _check_dims(omega, g)
    return skew_tensor(omega.matrix, g.matrix)


def polar_retraction(omega: SymplecticForm, g: MetricForm) -> tuple[PolarFactors, MetricForm]:
    """Retract ``g`` onto the cone of omega-compatible metrics.

    Returns the polar factors of ``A_g`` together with the retracted metric
    ``r(g) = g(P_g ., .) = omega(., J_g .)``.  ``r`` fixes every metric that is
    already compatible with omega.
    """
    _check_dims(omega, g)
    A, P, J = polar_factors(omega.matrix, g.matrix)
    R = g.matrix @ P
    return PolarFactors(A=A, P=P, J=J), MetricForm(0.5 * (R + R.T))


def triple_from_metric(omega: SymplecticForm, g: MetricForm) -> CompatibleTriple:
    """Compatible triple ``(omega, J_g, r(g))`` produced by the retraction."""
    factors, r = polar_retraction(omega, g)
    return CompatibleTriple(omega=omega, J=factors.J, g=r)


def check_triple(t: CompatibleTriple) -> TripleReport:
    W, J, G = t.omega.matrix, np.asarray(t.J, dtype=float), t.g.matrix
    eye = np.eye(W.shape[0])
    return TripleReport(
        complex_structure=float(np.max(np.abs(J @ J + eye))),
        compatibility=float(np.max(np.abs(W - J.T @ G))),
        orthogonality=float(np.max(np.abs(J.T @ G @ J - G))),
    )
