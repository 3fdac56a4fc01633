"""Lagrangian tori as graphs of closed 1-forms in exact Darboux charts.

A representation is ``p(theta) = level + eta + grad h(theta)`` over the flat
torus ``T^d`` in chart coordinates ``(p, theta)``: ``eta`` is the harmonic part
(the leaf label in first cohomology) and ``h`` a mean-zero potential.  Because
the 1-form ``eta + dh`` is closed, the graph is Lagrangian by construction.

Geometry is computed pointwise on the 3/2-padded grid; arrays carry a leading
batch axis ``B`` and a flattened grid axis ``P`` so that many potentials (or
complex-step perturbations of one) can be pushed through at once.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .ambient import AmbientModel
from .errors import ChartError, DimensionError, GeometryError
from .spectral import RealFourierBasis, SpectralField, deriv, grid_points, padded_size

DEFAULT_CUTOFF = {1: 32, 2: 16}
CONDITION_LIMIT = 1e8


@lru_cache(maxsize=None)
def fourier_basis(d: int, N: int) -> RealFourierBasis:
    return RealFourierBasis(d, N)


@lru_cache(maxsize=None)
def _basis_matrix(d: int, N: int, M: int) -> np.ndarray:
    Phi = fourier_basis(d, N).matrix(M)
    Phi.setflags(write=False)
    return Phi


class GridOps:
    """Spectral derivatives for arrays laid out as ``(B, P, *components)``."""

    def __init__(self, d: int, M: int):
        self.d = d
        self.M = M
        self.P = M**d
        self.weight = (2 * np.pi / M) ** d
        self.theta = np.stack([g.ravel() for g in grid_points(M, d)], axis=-1)

    def partial(self, f: np.ndarray, a: int, order: int = 1) -> np.ndarray:
        alpha = tuple(order if i == a else 0 for i in range(self.d))
        x = np.moveaxis(f, 1, -1)
        x = x.reshape(x.shape[:-1] + (self.M,) * self.d)
        y = deriv(x, self.d, alpha)
        y = y.reshape(y.shape[: y.ndim - self.d] + (self.P,))
        return np.ascontiguousarray(np.moveaxis(y, -1, 1))

    def grad(self, f: np.ndarray) -> np.ndarray:
        return np.stack([self.partial(f, a) for a in range(self.d)], axis=-1)

    def integrate(self, f: np.ndarray, density: np.ndarray) -> np.ndarray:
        return np.sum(f * density, axis=1) * self.weight


@dataclass(frozen=True)
class LagrangianRep:
    """Immutable Lagrangian torus ``p = level + eta + grad h``.

    ``base_point`` holds the radii ``r_j`` (flat C^n, ``level_j = r_j^2 / 2``)
    or the latitude ``z0`` (S^2, ``level = z0``).  ``h`` holds coefficients in
    :class:`RealFourierBasis` ``(d, cutoff)``.
    """

    ambient: AmbientModel
    base_point: np.ndarray
    harmonic_part: np.ndarray
    h: np.ndarray
    cutoff: int

    def __post_init__(self):
        d = self.ambient.d
        for name in ("base_point", "harmonic_part"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (d,):
                raise DimensionError(f"{name} must have length {d}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        h = np.array(self.h, dtype=float)
        if h.shape != (fourier_basis(d, self.cutoff).size,):
            raise DimensionError(f"h must have {fourier_basis(d, self.cutoff).size} coefficients")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def standard(cls, ambient: AmbientModel, base_point, harmonic_part=None, h=None, cutoff=None):
        d = ambient.d
        N = cutoff or DEFAULT_CUTOFF[d]
        eta = np.zeros(d) if harmonic_part is None else harmonic_part
        coeffs = np.zeros(fourier_basis(d, N).size) if h is None else h
        return cls(ambient, np.atleast_1d(np.asarray(base_point, dtype=float)), eta, coeffs, N)

    @property
    def d(self) -> int:
        return self.ambient.d

    @property
    def basis(self) -> RealFourierBasis:
        return fourier_basis(self.d, self.cutoff)

    @property
    def level(self) -> np.ndarray:
        if self.ambient.kind == "flat":
            return 0.5 * self.base_point**2
        return self.base_point.copy()

    @property
    def potential(self) -> SpectralField:
        return SpectralField.from_coeffs(self.basis, self.h)

    @property
    def grid_size(self) -> int:
        return padded_size(self.cutoff)

    def with_h(self, h) -> "LagrangianRep":
        return replace(self, h=np.asarray(h, dtype=float))

    def with_eta(self, eta) -> "LagrangianRep":
        return replace(self, harmonic_part=np.asarray(eta, dtype=float))

    def with_ambient(self, ambient: AmbientModel) -> "LagrangianRep":
        return replace(self, ambient=ambient)

    def to_dict(self) -> dict:
        modes = []
        for (k, kind), c in zip(self.basis.labels(), self.h):
            if c != 0.0:
                if modes and modes[-1]["k"] == list(k):
                    modes[-1][kind] = float(c)
                else:
                    modes.append({"k": list(k), kind: float(c)})
        return {
            "base_point": self.base_point.tolist(),
            "harmonic_part": self.harmonic_part.tolist(),
            "cutoff": self.cutoff,
            "h": modes,
        }

    @classmethod
    def from_dict(cls, ambient: AmbientModel, data: dict, cutoff: int | None = None) -> "LagrangianRep":
        N = cutoff or data.get("cutoff") or DEFAULT_CUTOFF[ambient.d]
        basis = fourier_basis(ambient.d, N)
        index = {lab: i for i, lab in enumerate(basis.labels())}
        coeffs = np.zeros(basis.size)
        h = data.get("h", "zero")
        if h != "zero":
            for entry in h:
                k = tuple(int(c) for c in entry["k"])
                if tuple(-c for c in k) > k:  # store on the canonical half-lattice
                    k = tuple(-c for c in k)
                    entry = {"cos": entry.get("cos", 0.0), "sin": -entry.get("sin", 0.0)}
                for kind in ("cos", "sin"):
                    if kind in entry:
                        if (k, kind) not in index:
                            raise ValueError(f"mode {k} exceeds cutoff {N}")
                        coeffs[index[(k, kind)]] += float(entry[kind])
        return cls.standard(ambient, data["base_point"], data.get("harmonic_part"), coeffs, N)


# ---------------------------------------------------------------------------
# graph data and the shared geometry kernel


def potential_jets(basis: RealFourierBasis, coeffs: np.ndarray, ops: GridOps):
    """First, second and third partials of a batch of potentials ``(B, n)``.

    Returns ``dh (B,P,j)``, ``ddh (B,P,a,j) = d_a d_j h`` and ``dddh (B,P,a,b,j)``.
    """
    d = ops.d
    hv = basis.evaluate(coeffs, ops.M).reshape(coeffs.shape[0], ops.P)
    dh = ops.grad(hv)
    ddh = np.stack([ops.partial(dh, a) for a in range(d)], axis=2)
    dddh = np.stack([np.stack([ops.partial(ddh[:, :, a], b) for b in range(d)], axis=2) for a in range(d)], axis=2)
    return dh, ddh, dddh


def graph_arrays(rep: LagrangianRep, coeffs: np.ndarray, ops: GridOps):
    """``p``, its first and second partials for a batch of potentials ``(B, n)``.

    ``coeffs`` may be complex (complex-step channel).  Returns ``p (B,P,d)``,
    ``dp (B,P,a,j) = d_a p_j`` and ``ddp (B,P,a,b,j)``.
    """
    dh, ddh, dddh = potential_jets(rep.basis, coeffs, ops)
    return rep.level + rep.harmonic_part + dh, ddh, dddh


def chart_points(p: np.ndarray, ops: GridOps) -> np.ndarray:
    theta = np.broadcast_to(ops.theta, p.shape[:-1] + (ops.d,))
    return np.concatenate([p, theta.astype(p.dtype)], axis=-1)


def tangent_frame(dp: np.ndarray, ddp: np.ndarray):
    """Coordinate tangents ``x_a`` and second partials ``x_ab`` of the graph."""
    d = dp.shape[-1]
    lead = dp.shape[:2]
    xa = np.zeros(lead + (d, 2 * d), dtype=dp.dtype)
    xa[..., :d] = dp
    xa[..., d:] = np.eye(d)
    xab = np.zeros(lead + (d, d, 2 * d), dtype=ddp.dtype)
    xab[..., :d] = ddp
    return xa, xab


def geometry_kernel(xa, xab, G, Gam, W, check: bool = True) -> dict:
    """Induced metric, second fundamental form, mean curvature and normals.

    All operations are complex-analytic so the kernel can be linearized by a
    complex step.  ``beta`` is the 1-form with ``<beta, s_X> = g(H, X)`` for
    every variation ``X`` (``s_X`` its contracted 1-form); for compatible
    triples it coincides with ``sigma_H``.
    """
    xaT = np.swapaxes(xa, -1, -2)
    Gx = xa @ G  # (.., d, D) lowered tangents (G symmetric)
    gamma = Gx @ xaT
    if check:
        cond = np.linalg.cond(np.real(gamma))
        if not np.all(np.isfinite(cond)) or np.max(cond) > CONDITION_LIMIT:
            raise GeometryError(f"induced metric is degenerate (condition number {np.max(cond):.3g})")
    gamma_inv = np.linalg.inv(gamma)
    sqrtg = np.sqrt(np.linalg.det(gamma))
    # Gamma^k(x_a, x_b) as (.., k, a, b), then reordered to (.., a, b, k)
    GamX = xa[..., None, :, :] @ (Gam @ xaT[..., None, :, :])
    nabla = xab + np.moveaxis(GamX, -3, -1)
    # tangential part: x_c gamma^{cd} g(x_d, v)
    coef = nabla @ np.swapaxes(gamma_inv @ Gx, -1, -2)[..., None, :, :]
    B = nabla - coef @ xa[..., None, :, :]
    H = np.sum(gamma_inv[..., None] * B, axis=(-3, -2))
    # normals N_b with omega(N_b, x_a) = delta_ab
    v = np.swapaxes(np.linalg.solve(G, W.T @ xaT), -1, -2)  # (.., c, D)
    K = v @ W @ xaT
    Nb = np.linalg.solve(K, v)
    beta = (gamma @ (Nb @ (G @ H[..., None])))[..., 0]
    return {
        "gamma": gamma,
        "gamma_inv": gamma_inv,
        "sqrtg": sqrtg,
        "B": B,
        "H": H,
        "normals": Nb,
        "beta": beta,
    }


def divergence(ops: GridOps, sqrtg, V) -> np.ndarray:
    """``(1/sqrt g) d_a (sqrt g V^a)`` for a tangent field given by components."""
    acc = 0
    for a in range(ops.d):
        acc = acc + ops.partial(sqrtg * V[..., a], a)
    return acc / sqrtg


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class Embedding:
    points: np.ndarray  # (P, D) chart coordinates on the padded grid
    M: int
    d: int

    def grid(self, comp: int) -> np.ndarray:
        return self.points[:, comp].reshape((self.M,) * self.d)


def realize(rep: LagrangianRep, M: int | None = None) -> Embedding:
    """Chart coordinates of the graph on a uniform grid (padded grid by default)."""
    ops = GridOps(rep.d, M or rep.grid_size)
    p, _, _ = graph_arrays(rep, rep.h[None], ops)
    x = chart_points(p, ops)[0]
    try:
        rep.ambient.check_points(x)
    except ChartError as exc:
        raise ChartError(f"Lagrangian leaves the chart: {exc}") from exc
    return Embedding(points=x, M=ops.M, d=rep.d)


@dataclass(frozen=True)
class InducedGeometry:
    """Pointwise induced geometry on the padded grid (flattened, ``P`` points)."""

    rep: LagrangianRep
    t: float
    ops: GridOps
    points: np.ndarray  # (P, D)
    tangents: np.ndarray  # (P, d, D)
    G: np.ndarray  # (P, D, D) ambient metric g_t
    J: np.ndarray  # (P, D, D) polar complex structure J_t
    metric: np.ndarray  # (P, d, d)
    metric_inv: np.ndarray
    volume_density: np.ndarray  # (P,)
    second_fundamental: np.ndarray  # (P, d, d, D)
    mean_curvature: np.ndarray  # (P, D)
    normals: np.ndarray  # (P, d, D) with omega(N_b, x_a) = delta_ab
    beta: np.ndarray  # (P, d)

    @property
    def d(self) -> int:
        return self.rep.d

    def field(self, values: np.ndarray) -> SpectralField:
        return SpectralField(np.asarray(values).reshape((self.ops.M,) * self.d), self.d)

    @property
    def S_tensor(self) -> np.ndarray:
        """``S(x_a, x_b, x_c) = g(J B(x_a, x_b), x_c)``, shape ``(P, d, d, d)``."""
        JB = np.einsum("pij,pabj->pabi", self.J, self.second_fundamental)
        return np.einsum("pabi,pij,pcj->pabc", JB, self.G, self.tangents)

    def mean_curvature_norm(self) -> np.ndarray:
        H = self.mean_curvature
        return np.sqrt(np.einsum("pi,pij,pj->p", H, self.G, H))

    def tangent_components(self, V: np.ndarray) -> np.ndarray:
        """Components ``c^a`` of the tangential part of ambient vectors ``V (..., P, D)``."""
        low = np.einsum("...pi,pij,paj->...pa", V, self.G, self.tangents)
        return np.einsum("pab,...pb->...pa", self.metric_inv, low)

    def normal_part(self, V: np.ndarray) -> np.ndarray:
        c = self.tangent_components(V)
        return V - np.einsum("...pa,pai->...pi", c, self.tangents)

    def integrate(self, f: np.ndarray) -> np.ndarray:
        return np.sum(f * self.volume_density, axis=-1) * self.ops.weight


def induced_geometry(rep: LagrangianRep, t: float = 0.0) -> InducedGeometry:
    model = rep.ambient
    ops = GridOps(rep.d, rep.grid_size)
    p, dp, ddp = graph_arrays(rep, rep.h[None], ops)
    x = chart_points(p, ops)
    try:
        model.check_points(x)
    except ChartError as exc:
        raise ChartError(f"Lagrangian leaves the chart: {exc}") from exc
    G = model.metric(x, t)
    Gam = model.christoffel(x, t)
    xa, xab = tangent_frame(dp, ddp)
    geo = geometry_kernel(xa, xab, G, Gam, model.omega)
    J = model.complex_structure(x[0], t)
    return InducedGeometry(
        rep=rep,
        t=t,
        ops=ops,
        points=x[0],
        tangents=xa[0],
        G=G[0],
        J=J,
        metric=geo["gamma"][0],
        metric_inv=geo["gamma_inv"][0],
        volume_density=geo["sqrtg"][0],
        second_fundamental=geo["B"][0],
        mean_curvature=geo["H"][0],
        normals=geo["normals"][0],
        beta=geo["beta"][0],
    )


def sigma_form(X: np.ndarray, rep_or_geometry) -> np.ndarray:
    """Components ``omega(X, x_a)`` of the pulled-back contraction ``x^*(i_X omega)``.

    ``X`` holds ambient vectors on the padded grid, shape ``(..., P, D)``.
    """
    geo = rep_or_geometry if isinstance(rep_or_geometry, InducedGeometry) else induced_geometry(rep_or_geometry)
    return np.einsum("...pi,ij,paj->...pa", X, geo.rep.ambient.omega, geo.tangents)


def volume(rep: LagrangianRep, t: float = 0.0) -> float:
    geo = induced_geometry(rep, t)
    return float(geo.integrate(np.ones_like(geo.volume_density)))
