"""Euler-Lagrange residual, Jacobi operators, spectra and verdicts.

Functions on the Lagrangian are represented by coefficients in the real
Fourier basis of the representation (no constant mode).  Operators are dense
Galerkin matrices ``M_ij = int phi_i L(phi_j) dvol`` paired with the Gram
matrix of the induced L2 product on dvol-mean-zero functions, so generalized
eigenvalues of ``(M, Gram)`` are eigenvalues of ``L`` on that quotient.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .ambient import AmbientModel, GroupActionData, christoffel_from_derivatives
from .errors import NonMinimalError
from .lagrangian import (
    GridOps,
    InducedGeometry,
    LagrangianRep,
    _basis_matrix,
    chart_points,
    divergence,
    fourier_basis,
    geometry_kernel,
    graph_arrays,
    induced_geometry,
    potential_jets,
    tangent_frame,
)
from .spectral import SpectralField

COMPLEX_STEP = 1e-20
KERNEL_TOL = 1e-7
ANGLE_TOL = 1e-6
RANK_TOL = 1e-8
STATIONARY_TOL = 1e-8
MINIMAL_TOL = 1e-8
FULL_EIGEN_LIMIT = 1500
LOW_EIGEN_COUNT = 48
CHUNK_POINTS = 40000

NONDEGENERATE = "G-nondegenerate"
DEGENERATE = "G-degenerate"
INCONCLUSIVE = "inconclusive"


@lru_cache(maxsize=8)
def _basis_gradients(d: int, N: int, M: int) -> np.ndarray:
    """``dPhi[i, p, a] = d_a phi_i`` on the ``M^d`` grid."""
    basis = fourier_basis(d, N)
    eye = np.eye(basis.size)
    out = np.stack(
        [basis.evaluate(basis.derivative(eye, tuple(int(i == a) for i in range(d))), M).reshape(basis.size, -1)
         for a in range(d)],
        axis=-1,
    )
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Hodge operators for the induced metric


class HodgeOps:
    """grad, div, Laplacian and codifferential for an induced metric.

    Functions are arrays ``(B, P)`` or ``(P,)``; 1-forms and vector fields
    carry a trailing component axis (covariant resp. contravariant).  The
    Laplacian is the nonnegative one, ``Delta f = delta d f = -div grad f``.
    """

    def __init__(self, geo: InducedGeometry):
        self.geo = geo
        self.ops = geo.ops
        self.sqrtg = geo.volume_density
        self.ginv = geo.metric_inv

    @staticmethod
    def _batch(f, extra: int):
        f = np.asarray(f)
        if f.ndim == 1 + extra:
            return f[None], True
        return f, False

    def d(self, f):
        f, single = self._batch(f, 0)
        out = self.ops.grad(f)
        return out[0] if single else out

    def sharp(self, alpha):
        return (self.ginv @ alpha[..., None])[..., 0]

    def flat(self, V):
        return (self.geo.metric @ V[..., None])[..., 0]

    def grad(self, f):
        return self.sharp(self.d(f))

    def div(self, V):
        V, single = self._batch(V, 1)
        out = divergence(self.ops, self.sqrtg, V)
        return out[0] if single else out

    def codifferential(self, alpha):
        return -self.div(self.sharp(alpha))

    def laplacian(self, f):
        return self.codifferential(self.d(f))

    def inner(self, f, g):
        return self.geo.integrate(f * g)

    def inner1(self, alpha, beta):
        return self.geo.integrate(np.einsum("...pa,pab,...pb->...p", alpha, self.ginv, beta))


# ---------------------------------------------------------------------------
# residual and its exact linearization


def el_residual(rep: LagrangianRep, t: float = 0.0, geo: InducedGeometry | None = None) -> SpectralField:
    """``delta sigma_H`` on the padded grid; zero exactly at Hamiltonian-stationary reps.

    The volume gradient in the L2(dvol) pairing is ``-delta sigma_H``:
    ``dVol(delta h) = -int (delta sigma_H) delta h dvol``.
    """
    geo = geo or induced_geometry(rep, t)
    return geo.field(HodgeOps(geo).codifferential(geo.beta))


def truncated_sup(rep: LagrangianRep, values: np.ndarray) -> float:
    """Sup norm of the basis projection of padded-grid values."""
    M = rep.grid_size
    coeffs = rep.basis.project(np.asarray(values).reshape((M,) * rep.d))
    return float(np.max(np.abs(rep.basis.evaluate(coeffs, M))))


def residual_norm(rep: LagrangianRep, t: float = 0.0) -> float:
    return truncated_sup(rep, el_residual(rep, t).values)


def _chunk_slices(n: int, P: int):
    step = max(1, CHUNK_POINTS // P)
    for lo in range(0, n, step):
        yield slice(lo, min(lo + step, n))


def _galerkin(dPhi: np.ndarray, geo: dict, weight: float) -> np.ndarray:
    """``int phi_i (-delta sigma_H) dvol`` by parts: ``-sum d_a phi_i sqrt(g) g^ab beta_b``."""
    V = geo["sqrtg"][..., None] * (geo["gamma_inv"] @ geo["beta"][..., None])[..., 0]
    A = dPhi.reshape(dPhi.shape[0], -1)
    V = V.reshape(V.shape[0], -1)
    out = np.ascontiguousarray(V.real) @ A.T
    if np.iscomplexobj(V):
        out = out + 1j * (np.ascontiguousarray(V.imag) @ A.T)
    return -out * weight


def residual_vector(rep: LagrangianRep, t: float = 0.0) -> np.ndarray:
    """Coefficient gradient of the volume, ``r_i = dVol/dh_i``."""
    ops = GridOps(rep.d, rep.grid_size)
    p, dp, ddp = graph_arrays(rep, rep.h[None], ops)
    x = chart_points(p, ops)
    rep.ambient.check_points(x)
    xa, xab = tangent_frame(dp, ddp)
    geo = geometry_kernel(xa, xab, rep.ambient.metric(x, t), rep.ambient.christoffel(x, t), rep.ambient.omega)
    dPhi = _basis_gradients(rep.d, rep.cutoff, ops.M)
    return _galerkin(dPhi, geo, ops.weight)[0]


def _contract_first(v: np.ndarray, T: np.ndarray) -> np.ndarray:
    """``sum_j v[b, p, j] T[p, j, ...]`` as one batched matmul."""
    P, d = T.shape[:2]
    out = v[:, :, None, :] @ T.reshape(P, d, -1)
    return out.reshape(v.shape[:2] + T.shape[2:])


def _jet_components(d: int) -> list[tuple[int, ...]]:
    """Derivative multi-indices ``(j,)``, ``(a, j)``, ``(a, b, j)`` of the potential jet."""
    return [
        idx
        for order in (1, 2, 3)
        for idx in itertools.product(range(d), repeat=order)
    ]


class Linearization:
    """Exact linearization of the residual at a representation.

    The densitized volume gradient ``sqrt(g) g^ab beta_b`` at a grid point is
    a function of the potential's first three derivatives there, so its
    derivative is a pointwise linear map ``L[m, p, a]`` from jet components
    ``m`` to vector components ``a``.  ``L`` is obtained by one complex step
    per jet component; Jacobian columns and products then reduce to spectral
    derivatives and matrix products.
    """

    def __init__(self, rep: LagrangianRep, t: float = 0.0):
        self.rep = rep
        self.t = t
        model = rep.ambient
        d = rep.d
        ops = GridOps(d, rep.grid_size)
        self.ops = ops
        p0, dp0, ddp0 = graph_arrays(rep, rep.h[None], ops)
        x = chart_points(p0, ops)[0]
        model.check_points(x)
        G, dG = model.metric_derivatives(x, t)
        Gam = christoffel_from_derivatives(G, dG)
        dG_p = dG[:, :d]
        dGam_p = model.christoffel_derivative(x, t, coords=range(d))
        comps = _jet_components(d)
        self.components = comps
        m = len(comps)
        eps = COMPLEX_STEP
        dh = np.zeros((m, ops.P, d))
        ddh = np.zeros((m, ops.P, d, d))
        dddh = np.zeros((m, ops.P, d, d, d))
        for k, idx in enumerate(comps):
            (dh, ddh, dddh)[len(idx) - 1][(k, slice(None)) + idx] = 1.0
        dp = dp0 + 1j * eps * ddh
        ddp = ddp0 + 1j * eps * dddh
        Gc = G + 1j * eps * _contract_first(dh, dG_p)
        Gamc = Gam + 1j * eps * _contract_first(dh, dGam_p)
        xa, xab = tangent_frame(dp, ddp)
        geo = geometry_kernel(xa, xab, Gc, Gamc, model.omega, check=False)
        V = geo["sqrtg"][..., None] * (geo["gamma_inv"] @ geo["beta"][..., None])[..., 0]
        self.L = np.ascontiguousarray(V.imag / eps)  # (m, P, a)

    def _grouped(self):
        """Jet components merged over permutations (partials commute)."""
        groups: dict[tuple[int, ...], np.ndarray] = {}
        for k, idx in enumerate(self.components):
            key = tuple(sorted(idx))
            groups[key] = groups.get(key, 0.0) + self.L[k]
        return groups

    def _basis_jet(self, coeffs: np.ndarray, idx: tuple[int, ...]) -> np.ndarray:
        """Grid values of the mixed partial ``d_idx`` of functions with coefficient rows."""
        alpha = tuple(idx.count(a) for a in range(self.rep.d))
        basis = self.rep.basis
        vals = basis.evaluate(basis.derivative(coeffs, alpha), self.ops.M)
        return vals.reshape(coeffs.shape[0], self.ops.P)

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Jacobian-vector products for coefficient rows ``(k, n)``."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        V = 0.0
        for key, Lk in self._grouped().items():
            V = V + self._basis_jet(coeffs, key)[..., None] * Lk
        dPhi = _basis_gradients(self.rep.d, self.rep.cutoff, self.ops.M)
        return _galerkin_dense(dPhi, V, self.ops.weight)

    def matrix(self) -> np.ndarray:
        rep, ops = self.rep, self.ops
        grid = (ops.M,) * rep.d
        out = np.zeros((rep.basis.size, rep.basis.size))
        for key, Lk in self._grouped().items():
            Q = rep.basis.weighted_gram(np.moveaxis(Lk, -1, 0).reshape((rep.d,) + grid))
            for a in range(rep.d):
                out -= _permuted(Q[a], rep, (a,), key)
        return out * ops.weight


def _permuted(Q: np.ndarray, rep: LagrangianRep, left: tuple, right: tuple) -> np.ndarray:
    """``sum_p d_left phi_i w d_right phi_j`` from ``Q = sum_p phi_i w phi_j``."""
    pl, sl = _derivative_permutation(rep.d, rep.cutoff, left)
    pr, sr = _derivative_permutation(rep.d, rep.cutoff, right)
    return sl[:, None] * Q[np.ix_(pl, pr)] * sr[None, :]


@lru_cache(maxsize=64)
def _derivative_permutation(d: int, N: int, idx: tuple[int, ...]):
    """``d_idx phi_i = scale_i * phi_{perm_i}``: derivatives permute the basis up to scaling."""
    basis = fourier_basis(d, N)
    alpha = tuple(idx.count(a) for a in range(d))
    D = basis.derivative(np.eye(basis.size), alpha)
    perm = np.argmax(np.abs(D), axis=1)
    return perm, D[np.arange(basis.size), perm]


def _galerkin_dense(dPhi: np.ndarray, V: np.ndarray, weight: float) -> np.ndarray:
    A = dPhi.reshape(dPhi.shape[0], -1)
    return -(np.ascontiguousarray(V.reshape(V.shape[0], -1)) @ A.T) * weight


def residual_jacobian(rep: LagrangianRep, t: float = 0.0) -> np.ndarray:
    """Exact derivative of :func:`residual_vector` (the Hessian of the volume)."""
    return Linearization(rep, t).matrix()


# ---------------------------------------------------------------------------
# Jacobi operators


def gram_matrix(geo: InducedGeometry) -> np.ndarray:
    """Induced L2 Gram matrix of the dvol-mean-zero projections of the basis."""
    rep = geo.rep
    wd = geo.volume_density * geo.ops.weight
    grid = wd.reshape((geo.ops.M,) * rep.d)
    m = rep.basis.project(grid) * geo.ops.P
    G = rep.basis.weighted_gram(grid) - np.outer(m, m) / np.sum(wd)
    return 0.5 * (G + G.T)


@dataclass(frozen=True, eq=False)
class JacobiOperator:
    """Dense operator on the mean-zero Fourier basis with its Gram matrix."""

    matrix: np.ndarray
    gram: np.ndarray
    form: str  # full | ke | hessian
    t: float
    rep: LagrangianRep
    stationary: bool = True

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def symmetry_error(self) -> float:
        """``max |M - M^T|`` relative to ``max |M|``."""
        scale = max(float(np.max(np.abs(self.matrix))), 1e-300)
        return float(np.max(np.abs(self.matrix - self.matrix.T))) / scale

    @property
    def full_spectrum(self) -> bool:
        return self.size <= FULL_EIGEN_LIMIT

    @cached_property
    def _eigen(self):
        sym = 0.5 * (self.matrix + self.matrix.T)
        if self.full_spectrum:
            return scipy.linalg.eigh(sym, self.gram)
        # large bases: only the low end of the spectrum is needed for kernels
        return scipy.linalg.eigh(sym, self.gram, subset_by_index=[0, LOW_EIGEN_COUNT - 1])

    @cached_property
    def scale(self) -> float:
        """Largest eigenvalue magnitude."""
        if self.full_spectrum:
            lam = self.eigenvalues
            return float(np.max(np.abs(lam))) if lam.size else 0.0
        sym = 0.5 * (self.matrix + self.matrix.T)
        L = scipy.linalg.cholesky(self.gram, lower=True)
        reduced = scipy.linalg.solve_triangular(L, sym, lower=True)
        reduced = scipy.linalg.solve_triangular(L, reduced.T, lower=True)
        reduced = 0.5 * (reduced + reduced.T)
        v0 = np.ones(self.size) / np.sqrt(self.size)
        top = scipy.sparse.linalg.eigsh(reduced, k=1, which="LM", v0=v0, return_eigenvectors=False)
        return float(max(np.abs(top[0]), np.max(np.abs(self.eigenvalues))))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        if "_eigen" in self.__dict__ or not self.full_spectrum:
            return self._eigen[0]
        # eigenvectors are only needed by some callers, values alone are cheaper
        sym = 0.5 * (self.matrix + self.matrix.T)
        return scipy.linalg.eigh(sym, self.gram, eigvals_only=True)

    @property
    def eigenvectors(self) -> np.ndarray:
        """Gram-orthonormal eigenvectors as columns."""
        return self._eigen[1]

    def quadratic_form(self, coeffs) -> float:
        c = np.asarray(coeffs, dtype=float)
        return float(c @ self.matrix @ c)

    def apply(self, coeffs) -> np.ndarray:
        """Coefficients of ``L f`` in the Gram-dual sense: solves ``Gram y = M c``."""
        return np.linalg.solve(self.gram, self.matrix @ np.asarray(coeffs, dtype=float))


def _check_stationary(rep: LagrangianRep, t: float, geo: InducedGeometry) -> bool:
    res = truncated_sup(rep, el_residual(rep, t, geo).values)
    if res > STATIONARY_TOL:
        warnings.warn(
            f"Jacobi operator assembled at a non-stationary Lagrangian (residual {res:.3g})",
            RuntimeWarning,
            stacklevel=3,
        )
        return False
    return True


def _assemble(geo: InducedGeometry, apply) -> np.ndarray:
    rep = geo.rep
    Phi = _basis_matrix(rep.d, rep.cutoff, geo.ops.M)
    wd = geo.volume_density * geo.ops.weight
    n = Phi.shape[0]
    M = np.empty((n, n))
    for sl in _chunk_slices(n, geo.ops.P):
        M[:, sl] = (Phi * wd) @ apply(Phi[sl]).T
    return M


class JacobiCoefficients:
    """Pointwise coefficients of the Jacobi operator at one induced geometry.

    For a function ``f`` with gradient components ``v^a`` the 1-forms
    ``sigma_{Ric^perp(J grad f)}`` and ``sigma_{B(JH, grad f)}`` are
    ``v^a R[p, a, c]`` and ``v^a S[p, a, c]``; ``u`` holds the components of
    the tangent field ``JH``.
    """

    def __init__(self, geo: InducedGeometry, ricci: np.ndarray):
        self.geo = geo
        self.hodge = HodgeOps(geo)
        xa, G, J, W = geo.tangents, geo.G, geo.J, geo.rep.ambient.omega
        sigma_rows = xa @ W.T  # sigma_X(x_c) = X . (W x_c)
        ric_up = np.linalg.solve(G, ricci)  # Ric as an endomorphism
        Jx = xa @ np.swapaxes(J, -1, -2)  # rows J x_a
        RJx = np.swapaxes(Jx @ np.swapaxes(ric_up, -1, -2), 0, 1)  # (a, P, D)
        Y = np.swapaxes(geo.normal_part(RJx), 0, 1)  # (P, a, D)
        self.R = Y @ np.swapaxes(sigma_rows, -1, -2)
        JH = (J @ geo.mean_curvature[..., None])[..., 0]
        self.u = geo.tangent_components(JH)
        Bu = np.sum(self.u[:, :, None, None] * geo.second_fundamental, axis=1)  # B(JH, x_b), (P, b, D)
        self.S = Bu @ np.swapaxes(sigma_rows, -1, -2)

    def terms(self, f: np.ndarray) -> dict:
        """The four terms applied to functions ``f (B, P)``.

        ``Delta^2 f``, ``delta sigma_{Ric^perp(J grad f)}``,
        ``-2 delta sigma_{B(JH, grad f)}`` and ``-JH(JH(f))``.
        """
        hodge, u = self.hodge, self.u
        df = hodge.d(f)
        gradf = hodge.sharp(df)

        def along(form):
            return np.sum(gradf[..., :, None] * form, axis=-2)

        JHf = np.sum(u * df, axis=-1)
        return {
            "bilaplacian": hodge.laplacian(hodge.laplacian(f)),
            "ricci": hodge.codifferential(along(self.R)),
            "second_fundamental": -2.0 * hodge.codifferential(along(self.S)),
            "mean_curvature": -np.sum(u * hodge.d(JHf), axis=-1),
        }

    def apply(self, f: np.ndarray) -> np.ndarray:
        hodge, u = self.hodge, self.u
        df = hodge.d(f)
        gradf = hodge.sharp(df)
        form = np.sum(gradf[..., :, None] * (self.R - 2.0 * self.S), axis=-2)
        JHf = np.sum(u * df, axis=-1)
        return hodge.laplacian(hodge.laplacian(f)) + hodge.codifferential(form) - np.sum(u * hodge.d(JHf), axis=-1)


def jacobi_terms(geo: InducedGeometry, ricci: np.ndarray, f: np.ndarray) -> dict:
    """The four terms of the Jacobi operator applied to functions ``f (B, P)``."""
    return JacobiCoefficients(geo, ricci).terms(f)


def jacobi_full(rep: LagrangianRep, t: float = 0.0) -> JacobiOperator:
    """Galerkin matrix of the full Jacobi operator, assembled columnwise."""
    geo = induced_geometry(rep, t)
    stationary = _check_stationary(rep, t, geo)
    coeffs = JacobiCoefficients(geo, rep.ambient.ricci(geo.points, t))
    return JacobiOperator(_assemble(geo, coeffs.apply), gram_matrix(geo), "full", t, rep, stationary)


def einstein_constant(model: AmbientModel, t: float = 0.0) -> float | None:
    """Einstein constant of ``g_t`` when the family keeps it Einstein, else ``None``."""
    kind = model.family.kind
    if kind == "constant":
        return model.kappa
    if kind == "homothety":
        k = model.family.params["kappa"]
        return 0.0 if model.kind == "flat" else model.kappa / (1.0 - 2.0 * k * t)
    return None


def jacobi_ke_minimal(rep: LagrangianRep, kappa: float, t: float = 0.0) -> JacobiOperator:
    """Shortcut ``Delta(Delta - kappa)`` valid for minimal Lagrangians in KE ambients."""
    geo = induced_geometry(rep, t)
    Hmax = float(np.max(geo.mean_curvature_norm()))
    if Hmax > MINIMAL_TOL:
        raise NonMinimalError(f"the shortcut needs a minimal Lagrangian, but max |H| = {Hmax:.3g}")
    hodge = HodgeOps(geo)

    def apply(f):
        lf = hodge.laplacian(f)
        return hodge.laplacian(lf - kappa * f)

    return JacobiOperator(_assemble(geo, apply), gram_matrix(geo), "ke", t, rep, True)


def hessian_operator(rep: LagrangianRep, t: float = 0.0, geo: InducedGeometry | None = None) -> JacobiOperator:
    """Second variation of the volume from the exact linearization of the residual.

    Agrees with :func:`jacobi_full` for compatible (Kaehler) families and stays
    exact when ``g_t`` is not compatible with omega.
    """
    geo = geo or induced_geometry(rep, t)
    stationary = truncated_sup(rep, el_residual(rep, t, geo).values) <= STATIONARY_TOL
    return JacobiOperator(residual_jacobian(rep, t), gram_matrix(geo), "hessian", t, rep, stationary)


# ---------------------------------------------------------------------------
# kernel candidates and verdicts


@dataclass(frozen=True, eq=False)
class KernelCandidates:
    """Mean-zero restrictions of the moment-map components to the Lagrangian."""

    fields: tuple  # SpectralField per generator
    coeffs: np.ndarray  # (k, n) basis coefficients per generator
    span: np.ndarray  # (rank, n) independent combinations
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.span.shape[0]


def kernel_candidates(
    rep: LagrangianRep,
    action: GroupActionData | None = None,
    geo: InducedGeometry | None = None,
    t: float = 0.0,
) -> KernelCandidates:
    geo = geo or induced_geometry(rep, t)
    action = action or rep.ambient.action
    mu = action.moment(geo.points)  # (P, k)
    wd = geo.volume_density * geo.ops.weight
    vals = mu.T - (mu.T @ wd)[:, None] / np.sum(wd)  # (k, P), dvol-mean zero
    U, s, _ = np.linalg.svd(vals * np.sqrt(wd), full_matrices=False)
    rank = int(np.sum(s > RANK_TOL))
    M = geo.ops.M
    grid = lambda v: v.reshape((M,) * rep.d)  # noqa: E731
    coeffs = np.array([rep.basis.project(grid(v)) for v in vals]).reshape(len(vals), rep.basis.size)
    span = U[:, :rank].T @ coeffs
    return KernelCandidates(
        fields=tuple(geo.field(v) for v in vals),
        coeffs=coeffs,
        span=span,
        singular_values=s,
    )


@dataclass(frozen=True)
class NondegeneracyVerdict:
    kernel_dim: int
    candidate_dim: int
    verdict: str
    angles: tuple
    kernel_gap: float  # smallest |eigenvalue| outside the kernel
    eigenvalue_scale: float

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "kernel_dim": self.kernel_dim,
            "candidate_dim": self.candidate_dim,
            "principal_angles": [float(a) for a in self.angles],
            "kernel_gap": float(self.kernel_gap),
            "eigenvalue_scale": float(self.eigenvalue_scale),
        }


def numeric_kernel(op: JacobiOperator, kernel_tol: float = KERNEL_TOL):
    lam = op.eigenvalues
    scale = op.scale
    mask = np.abs(lam) < kernel_tol * scale
    return mask, scale


def nondegeneracy(
    op: JacobiOperator,
    candidates: KernelCandidates,
    kernel_tol: float = KERNEL_TOL,
    angle_tol: float = ANGLE_TOL,
) -> NondegeneracyVerdict:
    cdim = candidates.rank
    if cdim and op.full_spectrum:
        op.eigenvectors  # one decomposition serves both values and vectors
    mask, scale = numeric_kernel(op, kernel_tol)
    lam = op.eigenvalues
    kdim = int(np.sum(mask))
    gap = float(np.min(np.abs(lam[~mask]))) if np.any(~mask) else 0.0
    angles: tuple = ()
    if kdim and cdim:
        Lt = np.linalg.cholesky(op.gram).T  # Gram = L L^T, Euclidean coordinates y = L^T x
        angles = tuple(scipy.linalg.subspace_angles(Lt @ op.eigenvectors[:, mask], Lt @ candidates.span.T))
    if kdim == cdim and (not angles or max(angles) < angle_tol):
        verdict = NONDEGENERATE
    elif kdim > cdim:
        verdict = DEGENERATE
    else:
        verdict = INCONCLUSIVE
    return NondegeneracyVerdict(kdim, cdim, verdict, angles, gap, scale)


def stability_criterion(lambda1: float, kappa: float) -> str:
    """Hamiltonian stability of a minimal Lagrangian in a KE manifold: ``lambda1 >= kappa``."""
    if not lambda1 > 0:
        raise ValueError(f"the first Laplace eigenvalue must be positive, got {lambda1}")
    return "stable" if lambda1 >= kappa else "unstable"


def laplace_spectrum(rep: LagrangianRep, t: float = 0.0) -> np.ndarray:
    """Eigenvalues of the nonnegative Laplacian on dvol-mean-zero functions."""
    geo = induced_geometry(rep, t)
    return scipy.linalg.eigh(laplace_matrix(geo), gram_matrix(geo), eigvals_only=True)


def laplace_matrix(geo: InducedGeometry) -> np.ndarray:
    """Stiffness matrix ``int g(grad phi_i, grad phi_j) dvol``."""
    rep = geo.rep
    wd = geo.volume_density * geo.ops.weight
    weights = (geo.metric_inv * wd[:, None, None]).reshape((geo.ops.M,) * rep.d + (rep.d, rep.d))
    S = np.zeros((rep.basis.size, rep.basis.size))
    for a in range(rep.d):
        for b in range(rep.d):
            Q = rep.basis.weighted_gram(weights[..., a, b])
            S += _permuted(Q, rep, (a,), (b,))
    return 0.5 * (S + S.T)


def first_eigenvalue(rep: LagrangianRep, t: float = 0.0) -> float:
    return float(laplace_spectrum(rep, t)[0])


# ---------------------------------------------------------------------------
# export


def spectrum_csv(eigenvalues) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "eigenvalue"])
    for i, v in enumerate(eigenvalues):
        writer.writerow([i, repr(float(v))])
    return buf.getvalue()


def verdict_json(verdict: NondegeneracyVerdict, **extra) -> str:
    data = verdict.to_dict()
    data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
