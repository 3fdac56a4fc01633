"""Chart-level ambient manifolds: flat C^n in action-angle coordinates and
the round (or warped) 2-sphere in cylindrical coordinates.

Chart coordinates are ordered ``(p_1..p_d, theta_1..theta_d)`` with
``omega = sum_j dp_j ^ dtheta_j``; ``p`` is the action ``I_j = |z_j|^2 / 2``
on C^n and the height ``z`` on S^2.  Every evaluator is vectorized over
leading axes of ``points`` (shape ``(..., 2d)``).

Rotation fields are oriented so that ``d<mu, X> = omega(X*, .)`` holds with
``mu_j = I_j`` (resp. ``mu = z``): the generator of the j-th circle factor is
``-d/dtheta_j``, the symplectic gradient of ``I_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import MetricForm, polar_factors
from .errors import ChartError, DimensionError, HamlagError

CHART_EPS = 1e-3
COMPLEX_STEP = 1e-20

# central-difference weights (offsets -m..m, step excluded)
_D1_ORDER4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def darboux_omega(d: int) -> np.ndarray:
    W = np.zeros((2 * d, 2 * d))
    W[:d, d:] = np.eye(d)
    W[d:, :d] = -np.eye(d)
    return W


def fd_partials(fun: Callable, points: np.ndarray, step: float, weights: np.ndarray, coords=None) -> np.ndarray:
    """Central differences of ``fun`` along chart coordinates (all by default).

    Returns an array of shape ``points.shape[:-1] + (len(coords),) + out_shape``
    where the inserted axis indexes the coordinate being differentiated.
    """
    points = np.asarray(points, dtype=float)
    D = points.shape[-1]
    m = len(weights) // 2
    parts = []
    for ax in range(D) if coords is None else coords:
        acc = None
        for j, w in enumerate(weights):
            if w == 0.0:
                continue
            shifted = points.copy()
            shifted[..., ax] += (j - m) * step
            val = w * fun(shifted)
            acc = val if acc is None else acc + val
        parts.append(acc / step)
    lead = points.ndim - 1
    return np.stack(parts, axis=lead)


def complex_step_partials(fun: Callable, points: np.ndarray) -> np.ndarray:
    """Exact first partials of a complex-analytic ``fun`` along every coordinate.

    Same layout as :func:`fd_partials`.
    """
    points = np.asarray(points, dtype=float)
    parts = []
    for ax in range(points.shape[-1]):
        shifted = points.astype(complex)
        shifted[..., ax] += 1j * COMPLEX_STEP
        parts.append(np.imag(fun(shifted)) / COMPLEX_STEP)
    return np.stack(parts, axis=points.ndim - 1)


def christoffel_from_derivatives(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """``Gamma[..., i, j, k] = Gamma^i_{jk}`` from ``dG[..., l, a, b] = d_l G_ab``."""
    T = (
        np.einsum("...jlk->...ljk", dG)
        + np.einsum("...klj->...ljk", dG)
        - dG
    )
    return 0.5 * np.einsum("...il,...ljk->...ijk", np.linalg.inv(G), T)


def ricci_from_christoffel(Gam: np.ndarray, dGam: np.ndarray) -> np.ndarray:
    """Ricci tensor from Christoffel symbols and ``dGam[..., m, i, j, k] = d_m Gamma^i_jk``."""
    R = (
        np.einsum("...iijk->...jk", dGam)
        - np.einsum("...kiij->...jk", dGam)
        + np.einsum("...iip,...pjk->...jk", Gam, Gam)
        - np.einsum("...ikp,...pij->...jk", Gam, Gam)
    )
    return 0.5 * (R + np.swapaxes(R, -1, -2))


@dataclass(frozen=True)
class WarpProfile:
    """Rotationally symmetric profile ``f(z; t)``; metric ``dz^2/f^2 + f^2 dphi^2``.

    ``round`` is the unit sphere for all ``t``; ``bulge`` is
    ``sqrt(1 - z^2) (1 + a t z^2)``.  Every such metric has area form
    ``dz ^ dphi`` and so is compatible with omega.
    """

    name: str = "round"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.name not in ("round", "bulge"):
            raise ValueError(f"unknown warp profile {self.name!r}")

    def f(self, z, t):
        s = np.sqrt(1.0 - z * z)
        if self.name == "round":
            return s
        return s * (1.0 + self.amplitude * t * z * z)

    def df(self, z, t):
        s = np.sqrt(1.0 - z * z)
        if self.name == "round":
            return -z / s
        a = self.amplitude * t
        return -z / s * (1.0 + a * z * z) + s * 2.0 * a * z

    def check(self, t: float) -> None:
        if self.name == "bulge" and 1.0 + min(0.0, self.amplitude * t) <= 0:
            raise ValueError(f"warp profile is not positive at t={t}")


@dataclass(frozen=True)
class MetricFamily:
    kind: str  # constant | cheeger | homothety | warped
    evaluator: Callable[[np.ndarray, float], np.ndarray]
    params: dict = field(default_factory=dict)
    t_range: tuple[float, float] = (-np.inf, np.inf)

    def __call__(self, points, t: float = 0.0) -> np.ndarray:
        lo, hi = self.t_range
        if not lo <= t <= hi:
            raise ValueError(f"t={t} outside the range {self.t_range} of the {self.kind} family")
        points = np.asarray(points)
        if not np.iscomplexobj(points):
            points = points.astype(float)
        return self.evaluator(points, t)


@dataclass(frozen=True)
class GroupActionData:
    name: str
    group_dim: int
    Q: np.ndarray
    moment: Callable[[np.ndarray], np.ndarray]  # (..., k)
    generators: Callable[[np.ndarray], np.ndarray]  # (..., k, D), rows are X_i*

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.shape != (self.group_dim, self.group_dim):
            raise DimensionError(f"Q must be {self.group_dim}x{self.group_dim}")
        if np.max(np.abs(Q - Q.T)) > 1e-12 or np.linalg.eigvalsh(Q)[0] <= 0:
            raise ValueError("Q must be symmetric positive definite")
        object.__setattr__(self, "Q", Q)


@dataclass(frozen=True)
class CurvatureData:
    ricci: Callable[[np.ndarray, float], np.ndarray]
    christoffel: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class AmbientModel:
    kind: str  # flat | sphere
    d: int
    omega: np.ndarray
    base_metric: Callable[[np.ndarray], np.ndarray]
    family: MetricFamily
    action: GroupActionData
    actions: dict
    kappa: float  # Einstein constant of the base metric
    eps: float = CHART_EPS
    fd_step: float = 1e-4

    @property
    def dim(self) -> int:
        return 2 * self.d

    # -- chart ---------------------------------------------------------
    def boundary_distance(self, points) -> np.ndarray:
        p = np.real(np.asarray(points))[..., : self.d]
        if self.kind == "flat":
            return np.min(p, axis=-1)
        return 1.0 - np.abs(p[..., 0])

    def check_points(self, points) -> None:
        dist = self.boundary_distance(points)
        if not np.all(np.isfinite(dist)) or np.min(dist) < self.eps:
            raise ChartError(
                f"point within {self.eps} of the {self.kind} chart boundary "
                f"(closest distance {np.min(dist):.3g})"
            )

    def _step(self, points, step) -> float:
        return float(min(step, 0.2 * np.min(self.boundary_distance(points))))

    # -- metric and curvature -----------------------------------------
    def metric(self, points, t: float = 0.0) -> np.ndarray:
        return self.family(points, t)

    def metric_derivatives(self, points, t: float = 0.0):
        """``(G, dG)`` with ``dG[..., l, a, b] = d_l G_ab`` (complex step, exact)."""
        points = np.asarray(points, dtype=float)
        dG = complex_step_partials(lambda q: self.metric(q, t), points)
        return self.metric(points, t), dG

    def christoffel(self, points, t: float = 0.0) -> np.ndarray:
        G, dG = self.metric_derivatives(points, t)
        return christoffel_from_derivatives(G, dG)

    def christoffel_derivative(self, points, t: float = 0.0, coords=None) -> np.ndarray:
        """``dGam[..., m, i, j, k] = d_m Gamma^i_jk`` by fourth-order differences of Gamma.

        ``coords`` restricts ``m`` to a subset of chart coordinates.
        """
        points = np.asarray(points, dtype=float)
        h = self._step(points, self.fd_step)
        return fd_partials(lambda q: self.christoffel(q, t), points, h, _D1_ORDER4, coords)

    def ricci(self, points, t: float = 0.0) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        self.check_points(points)
        if self.family.kind in ("constant", "homothety"):
            # Ric is scale invariant, so homotheties keep the base Ricci tensor
            if self.kind == "flat":
                return np.zeros(points.shape + (self.dim,))
            return self.kappa * self.base_metric(points)
        return self.ricci_numeric(points, t)

    def ricci_numeric(self, points, t: float = 0.0) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return ricci_from_christoffel(self.christoffel(points, t), self.christoffel_derivative(points, t))

    def curvature(self) -> CurvatureData:
        return CurvatureData(ricci=self.ricci, christoffel=self.christoffel)

    def complex_structure(self, points, t: float = 0.0) -> np.ndarray:
        """``J_t`` from the polar retraction of ``g_t`` against omega."""
        _, _, J = polar_factors(self.omega, self.metric(points, t))
        return J

    # -- group action --------------------------------------------------
    def moment(self, points) -> np.ndarray:
        return self.action.moment(np.asarray(points, dtype=float))

    def generators(self, points) -> np.ndarray:
        return self.action.generators(np.asarray(points, dtype=float))

    def with_family(self, family: MetricFamily) -> "AmbientModel":
        return replace(self, family=family)

    def with_action(self, name: str, Q=None) -> "AmbientModel":
        if name not in self.actions:
            raise ValueError(f"{self.kind} model has no action {name!r}; choose from {sorted(self.actions)}")
        action = self.actions[name]
        if Q is not None:
            action = replace(action, Q=np.asarray(Q, dtype=float))
        return replace(self, action=action)


# ---------------------------------------------------------------------------
# flat C^n


def _flat_metric(d: int):
    def g(points):
        I = points[..., :d]
        diag = np.concatenate([1.0 / (2.0 * I), 2.0 * I], axis=-1)
        return diag[..., :, None] * np.eye(2 * d)

    return g


def _torus_action(d: int) -> GroupActionData:
    def moment(points):
        return points[..., :d].copy()

    def generators(points):
        X = np.zeros(points.shape[:-1] + (d, 2 * d), dtype=points.dtype)
        for j in range(d):
            X[..., j, d + j] = -1.0
        return X

    return GroupActionData("torus", d, np.eye(d), moment, generators)


def make_flat_cn(n: int) -> AmbientModel:
    """C^n (n = 1, 2) in action-angle coordinates with the T^n rotation action."""
    if n not in (1, 2):
        raise DimensionError(f"flat C^n is supported for n in (1, 2), got {n}")
    g0 = _flat_metric(n)
    action = _torus_action(n)
    return AmbientModel(
        kind="flat",
        d=n,
        omega=darboux_omega(n),
        base_metric=g0,
        family=MetricFamily("constant", lambda pts, t: g0(pts)),
        action=action,
        actions={"torus": action},
        kappa=0.0,
    )


# ---------------------------------------------------------------------------
# S^2


def _round_metric(points):
    z = points[..., 0]
    s2 = 1.0 - z * z
    out = np.zeros(points.shape[:-1] + (2, 2), dtype=points.dtype)
    out[..., 0, 0] = 1.0 / s2
    out[..., 1, 1] = s2
    return out


def _so2_action() -> GroupActionData:
    def moment(points):
        return points[..., :1].copy()

    def generators(points):
        X = np.zeros(points.shape[:-1] + (1, 2), dtype=points.dtype)
        X[..., 0, 1] = -1.0
        return X

    return GroupActionData("so2", 1, np.eye(1), moment, generators)


def _so3_action() -> GroupActionData:
    """Rotations about the x, y, z axes; moments are the coordinate functions."""

    def moment(points):
        z, phi = points[..., 0], points[..., 1]
        s = np.sqrt(1.0 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)

    def generators(points):
        # X = (d_phi mu, -d_z mu) is the symplectic gradient for omega = dz^dphi
        z, phi = points[..., 0], points[..., 1]
        s = np.sqrt(1.0 - z * z)
        c, sn = np.cos(phi), np.sin(phi)
        X = np.zeros(points.shape[:-1] + (3, 2), dtype=points.dtype)
        X[..., 0, 0] = -s * sn
        X[..., 0, 1] = z * c / s
        X[..., 1, 0] = s * c
        X[..., 1, 1] = z * sn / s
        X[..., 2, 1] = -1.0
        return X

    return GroupActionData("so3", 3, np.eye(3), moment, generators)


def warped_family(profile: WarpProfile, t_range=(0.0, np.inf)) -> MetricFamily:
    def evaluator(points, t):
        profile.check(t)
        z = points[..., 0]
        f = profile.f(z, t)
        if np.any(~(np.real(f) > 0)):
            raise ValueError("warp profile is not positive on the sampled points")
        out = np.zeros(points.shape[:-1] + (2, 2), dtype=points.dtype)
        out[..., 0, 0] = 1.0 / (f * f)
        out[..., 1, 1] = f * f
        return out

    return MetricFamily("warped", evaluator, {"profile": profile}, t_range)


def make_sphere(profile: WarpProfile | None = None, group: str = "so2") -> AmbientModel:
    """Unit S^2 minus the poles in cylindrical coordinates ``(z, phi)``.

    With ``profile=None`` the metric family is the constant round metric,
    otherwise the warped family of ``profile``.
    """
    actions = {"so2": _so2_action(), "so3": _so3_action()}
    family = MetricFamily("constant", lambda pts, t: _round_metric(pts))
    if profile is not None:
        family = warped_family(profile)
    return AmbientModel(
        kind="sphere",
        d=1,
        omega=darboux_omega(1),
        base_metric=_round_metric,
        family=family,
        action=actions[group],
        actions=actions,
        kappa=1.0,
    )


# ---------------------------------------------------------------------------
# metric families built on a model


def cheeger_batch(G0: np.ndarray, E: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """Cheeger-deformed metric from base metric ``G0`` and action fields ``E``.

    ``E[..., i, :]`` is the action field of the i-th basis vector of the Lie
    algebra.  ``P0`` solves ``Q(P0 X, Y) = g0(X*, Y*)``; on each Q-orthonormal
    eigenvector ``xi`` of ``P0`` with eigenvalue ``lam`` the vertical vector
    ``v = xi*`` is scaled by ``1 / (1 + t lam)``, horizontal vectors are left
    alone, and ``g_t = g0(C_t ., .)``.
    """
    if t < 0:
        raise ValueError("Cheeger deformation needs t >= 0")
    S = E @ G0 @ np.swapaxes(E, -1, -2)
    L = np.linalg.cholesky(Q)
    Linv = np.linalg.inv(L)
    lam, Y = np.linalg.eigh(Linv @ S @ Linv.T)
    xi = Linv.T @ Y  # columns are Q-orthonormal eigenvectors of P0
    V = np.swapaxes(E, -1, -2) @ xi  # (..., D, k) vertical eigenvectors
    GV = G0 @ V
    lam = np.clip(lam, 0.0, None)
    # (1 - 1/(1+t lam)) / lam written so isotropy directions (lam = 0, v = 0) drop out
    w = t / (1.0 + t * lam)
    Gt = G0 - np.einsum("...ak,...k,...bk->...ab", GV, w, GV)
    return 0.5 * (Gt + np.swapaxes(Gt, -1, -2))


def cheeger_submersion(G0: np.ndarray, E: np.ndarray, Q: np.ndarray, t: float) -> np.ndarray:
    """Closed form ``g_t = g0 - t g0 E^T (Q + t E g0 E^T)^{-1} E g0``.

    This is the quotient metric of ``g0 + Q/t`` on ``M x G``; it agrees with
    :func:`cheeger_batch` and, unlike it, is complex-analytic in the point.
    """
    if t < 0:
        raise ValueError("Cheeger deformation needs t >= 0")
    Et = np.swapaxes(E, -1, -2)
    GE = G0 @ Et
    S = E @ GE
    K = np.linalg.solve(Q + t * S, np.swapaxes(GE, -1, -2))
    Gt = G0 - t * GE @ K
    return 0.5 * (Gt + np.swapaxes(Gt, -1, -2))


def cheeger_family(model: AmbientModel, Q=None, t_range=(0.0, np.inf)) -> MetricFamily:
    Qm = model.action.Q if Q is None else np.asarray(Q, dtype=float)
    if np.linalg.eigvalsh(Qm)[0] <= 0:
        raise ValueError("degenerate bi-invariant metric Q")
    action, g0 = model.action, model.base_metric

    def evaluator(points, t):
        return cheeger_submersion(g0(points), action.generators(points), Qm, t)

    return MetricFamily("cheeger", evaluator, {"Q": Qm, "group": action.name}, t_range)


def homothety_family(model: AmbientModel, kappa: float | None = None) -> MetricFamily:
    """``g_t = (1 - 2 kappa t) g0``: the Kaehler-Ricci flow of an Einstein metric."""
    k = model.kappa if kappa is None else float(kappa)
    g0 = model.base_metric
    hi = np.inf if k <= 0 else 1.0 / (2.0 * k)

    def evaluator(points, t):
        c = 1.0 - 2.0 * k * t
        if c <= 0:
            raise ValueError(f"homothety factor 1 - 2 kappa t = {c} is not positive")
        return c * g0(points)

    return MetricFamily("homothety", evaluator, {"kappa": k}, (-np.inf, hi))


def cheeger_metric(model: AmbientModel, t: float, point) -> MetricForm:
    """Cheeger deformation of the model's base metric at a single point."""
    if t < 0:
        raise ValueError("Cheeger deformation needs t >= 0")
    point = np.asarray(point, dtype=float)
    if point.shape != (model.dim,):
        raise DimensionError(f"expected a point of length {model.dim}")
    model.check_points(point)
    try:
        G = cheeger_batch(model.base_metric(point), model.generators(point), model.action.Q, t)
    except np.linalg.LinAlgError as exc:
        raise HamlagError(f"Cheeger deformation failed: {exc}") from exc
    return MetricForm(G)


def ricci_tensor(model: AmbientModel, t: float, point) -> np.ndarray:
    return model.ricci(np.asarray(point, dtype=float), t)
