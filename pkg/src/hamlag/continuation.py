"""Path following of stationary Lagrangians in ``t`` and along leaves.

Each corrector is a bordered Newton iteration on the Galerkin residual.  The
directions a symmetry group moves the Lagrangian along are removed by
orthogonality constraints (a gauge slice); a Hessian that is singular on the
complement of those constraints is reported as degeneracy.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.optimize

from .ambient import AmbientModel
from .errors import ChartError, ConvergenceError, DegeneracyError, GeometryError
from .lagrangian import LagrangianRep, induced_geometry, volume
from .spectral import SpectralField
from .variational import (
    DEGENERATE,
    KERNEL_TOL,
    Linearization,
    el_residual,
    gram_matrix,
    hessian_operator,
    kernel_candidates,
    nondegeneracy,
    numeric_kernel,
    residual_vector,
    truncated_sup,
)

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
MAX_ITER = 8
MULTIPLIER_TOL = 1e-8
DT_MAX = 0.05
DETA_MAX = 0.02

COMPLETED = "completed"
DEGENERACY = "degeneracy_detected"
CHART_EXIT = "chart_exit"
NO_CONVERGENCE = "no_convergence"
TERMINATIONS = (COMPLETED, DEGENERACY, CHART_EXIT, NO_CONVERGENCE)


@dataclass(frozen=True, eq=False)
class ContinuationState:
    """Immutable snapshot of a (possibly converged) point on a path."""

    rep: LagrangianRep
    t: float
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual: float = math.nan
    kernel_gap: float = math.nan
    iterations: int = 0

    @property
    def eta(self) -> np.ndarray:
        return self.rep.harmonic_part

    @property
    def h(self) -> SpectralField:
        return self.rep.potential

    @property
    def h_norm(self) -> float:
        """Flat L2 norm of the potential (the basis is orthonormal)."""
        return float(np.linalg.norm(self.rep.h))


@dataclass(frozen=True)
class StepRecord:
    t: float
    eta: tuple
    volume: float
    residual: float
    kernel_gap: float
    verdict: str
    kernel_dim: int
    candidate_dim: int
    iterations: int
    h_norm: float
    multiplier_norm: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "eta": list(self.eta),
            "volume": self.volume,
            "residual": self.residual,
            "kernel_gap": self.kernel_gap,
            "verdict": self.verdict,
            "kernel_dim": self.kernel_dim,
            "candidate_dim": self.candidate_dim,
            "iterations": self.iterations,
            "h_norm": self.h_norm,
            "multiplier_norm": self.multiplier_norm,
        }


@dataclass(frozen=True, eq=False)
class PathResult:
    states: tuple
    records: tuple
    termination: str
    gauge: str  # moment | frozen
    initial_verdict: str
    message: str = ""

    @property
    def completed(self) -> bool:
        return self.termination == COMPLETED

    def to_dict(self) -> dict:
        return {
            "termination": self.termination,
            "message": self.message,
            "gauge": self.gauge,
            "initial_verdict": self.initial_verdict,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        d = len(self.states[0].eta) if self.states else 0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["step", "t"] + [f"eta_{i + 1}" for i in range(d)]
                        + ["volume", "residual", "kernel_gap", "verdict"])
        for i, r in enumerate(self.records):
            writer.writerow([i + 1, repr(r.t)] + [repr(e) for e in r.eta]
                            + [repr(r.volume), repr(r.residual), repr(r.kernel_gap), r.verdict])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# corrector


def gauge_constraints(rep: LagrangianRep, t: float, geo=None) -> np.ndarray:
    """Independent moment-map candidates at ``rep`` as coefficient rows ``(k, n)``."""
    return kernel_candidates(rep, geo=geo, t=t).span


def _reflect(qr: np.ndarray, tau: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``Q^T X Q`` for the orthogonal factor stored as Householder reflectors."""
    lwork = 64 * X.shape[0]
    Y, _, info = scipy.linalg.lapack.dormqr("L", "T", qr, tau, X, lwork)
    Y, _, info2 = scipy.linalg.lapack.dormqr("R", "N", qr, tau, Y, lwork)
    if info or info2:
        raise RuntimeError("Householder application failed")
    return Y


def _complement_check(M: np.ndarray, gram: np.ndarray, C: np.ndarray, kernel_tol: float) -> float:
    """Smallest |eigenvalue| of ``M`` on the complement of ``C``, relative to the largest."""
    k = C.shape[1]
    if k:
        # conjugate by the Householder reflectors of C without forming Q
        (qr, tau), _ = scipy.linalg.qr(C, mode="raw")
        M, gram = (_reflect(qr, tau, X)[k:, k:] for X in (M, gram))
    lam = scipy.linalg.eigh(0.5 * (M + M.T), 0.5 * (gram + gram.T), eigvals_only=True)
    scale = float(np.max(np.abs(lam)))
    smallest = float(np.min(np.abs(lam)))
    if smallest < kernel_tol * scale:
        raise DegeneracyError(
            f"Hessian singular beyond the {C.shape[1]} gauge constraint(s): "
            f"|lambda|_min = {smallest:.3g}, scale {scale:.3g}"
        )
    return smallest


def newton_solve(
    state: ContinuationState,
    constraints: np.ndarray | None = None,
    tol: float = NEWTON_TOL,
    max_iter: int = MAX_ITER,
    kernel_tol: float = KERNEL_TOL,
) -> ContinuationState:
    """Bordered Newton corrector at fixed ``t`` and harmonic part.

    Solves ``[Jac, C; C^T, 0] [dh; lam] = [-r; -C^T h]`` with ``C = Gram K`` and
    ``K`` the constraint coefficients (moment-map candidates unless given), so
    every iterate lies exactly on the gauge slice.  At least one linear solve
    is made, so a singular bordered system is always detected.
    """
    rep, t = state.rep, float(state.t)
    residual = truncated_sup(rep, el_residual(rep, t).values)
    if not np.isfinite(residual):
        raise ConvergenceError("initial residual is not finite")
    lam = np.zeros(0)
    for it in range(max_iter + 1):
        if it and residual < tol:
            return ContinuationState(rep, t, lam, residual, state.kernel_gap, it)
        if it == max_iter:
            raise ConvergenceError(f"no convergence in {max_iter} Newton iterations (residual {residual:.3g})")
        geo = induced_geometry(rep, t)
        K = gauge_constraints(rep, t, geo) if constraints is None else np.asarray(constraints, dtype=float)
        K = K.reshape(-1, rep.basis.size)
        gram = gram_matrix(geo)
        Jac = Linearization(rep, t).matrix()
        C = gram @ K.T
        _complement_check(Jac, gram, C, kernel_tol)
        k = C.shape[1]
        A = np.block([[Jac, C], [C.T, np.zeros((k, k))]])
        rhs = np.concatenate([-residual_vector(rep, t), -(C.T @ rep.h)])
        sol = np.linalg.solve(A, rhs)
        dh, lam = sol[: rep.basis.size], sol[rep.basis.size:]
        rep = rep.with_h(rep.h + dh)
        residual = truncated_sup(rep, el_residual(rep, t).values)
        log.debug("newton it=%d |dh|=%.3g residual=%.3g", it + 1, np.linalg.norm(dh), residual)
        if not np.isfinite(residual):
            raise ConvergenceError("residual became non-finite")
    raise AssertionError("unreachable")


def step_verdict(rep: LagrangianRep, t: float, kernel_tol: float = KERNEL_TOL):
    geo = induced_geometry(rep, t)
    op = hessian_operator(rep, t, geo)
    return nondegeneracy(op, kernel_candidates(rep, geo=geo, t=t), kernel_tol), op


def frozen_gauge(rep: LagrangianRep, t: float, kernel_tol: float = KERNEL_TOL, op=None) -> np.ndarray:
    """Numeric Hessian kernel at ``rep`` as constraint rows (Gram-orthonormal)."""
    op = op or hessian_operator(rep, t)
    mask, _ = numeric_kernel(op, kernel_tol)
    return op.eigenvectors[:, mask].T.copy()


# ---------------------------------------------------------------------------
# predictor-corrector runs


def _run(state0, targets, make_rep_t, order, kernel_tol, tol=NEWTON_TOL):
    """Shared driver: ``targets`` are per-step parameters, ``make_rep_t`` maps
    (previous converged rep, target) to a predicted (rep, t)."""
    rep0 = state0.rep
    try:
        verdict0, op0 = step_verdict(rep0, state0.t, kernel_tol)
    except (ChartError, GeometryError) as exc:
        return PathResult((state0,), (), CHART_EXIT, "moment", "unknown", str(exc))
    gauge, constraints = "moment", None
    if verdict0.verdict == DEGENERATE:
        gauge, constraints = "frozen", frozen_gauge(rep0, state0.t, kernel_tol, op0)
        log.info("degenerate start: frozen gauge with %d constraint(s)", constraints.shape[0])
    states, records = [state0], []
    termination, message = COMPLETED, ""
    prev_h = None
    for target in targets:
        cur = states[-1]
        try:
            rep, t = make_rep_t(cur.rep, target)
            if order == 1 and prev_h is not None:
                rep = rep.with_h(2.0 * cur.rep.h - prev_h)
            new = newton_solve(ContinuationState(rep, t), constraints, tol=tol, kernel_tol=kernel_tol)
            verdict, _ = step_verdict(new.rep, t, kernel_tol)
            vol = volume(new.rep, t)
        except (ChartError, GeometryError) as exc:
            termination, message = CHART_EXIT, str(exc)
            break
        except DegeneracyError as exc:
            termination, message = DEGENERACY, str(exc)
            break
        except ConvergenceError as exc:
            termination, message = NO_CONVERGENCE, str(exc)
            break
        new = replace(new, kernel_gap=verdict.kernel_gap)
        prev_h = cur.rep.h
        states.append(new)
        records.append(
            StepRecord(
                t=float(t),
                eta=tuple(float(e) for e in new.eta),
                volume=float(vol),
                residual=float(new.residual),
                kernel_gap=float(verdict.kernel_gap),
                verdict=verdict.verdict,
                kernel_dim=verdict.kernel_dim,
                candidate_dim=verdict.candidate_dim,
                iterations=new.iterations,
                h_norm=new.h_norm,
                multiplier_norm=float(np.max(np.abs(new.multipliers), initial=0.0)),
            )
        )
        log.info("step %d t=%.6g residual=%.3g verdict=%s", len(records), t, new.residual, verdict.verdict)
    return PathResult(tuple(states), tuple(records), termination, gauge, verdict0.verdict, message)


def _step_count(span: float, steps: int, cap: float) -> int:
    if steps < 1:
        raise ValueError("steps must be positive")
    return max(steps, math.ceil(span / cap - 1e-12))


def continue_in_t(
    state0: ContinuationState,
    t_max: float,
    steps: int,
    order: int = 0,
    kernel_tol: float = KERNEL_TOL,
    tol: float = NEWTON_TOL,
) -> PathResult:
    """Uniform steps from ``state0.t`` to ``t_max`` (refined so ``|dt| <= DT_MAX``)."""
    n = _step_count(abs(t_max - state0.t), steps, DT_MAX)
    ts = [state0.t + (t_max - state0.t) * (i + 1) / n for i in range(n)]
    return _run(state0, ts, lambda rep, t: (rep, float(t)), order, kernel_tol, tol)


def continue_in_leaf(
    state0: ContinuationState,
    eta_target,
    steps: int,
    order: int = 0,
    kernel_tol: float = KERNEL_TOL,
    tol: float = NEWTON_TOL,
) -> PathResult:
    """Step the harmonic part linearly to ``eta_target`` at fixed ``t`` (``|d eta| <= DETA_MAX``)."""
    eta0 = np.asarray(state0.eta, dtype=float)
    target = np.asarray(eta_target, dtype=float).reshape(eta0.shape)
    n = _step_count(float(np.max(np.abs(target - eta0), initial=0.0)), steps, DETA_MAX)
    etas = [eta0 + (target - eta0) * (i + 1) / n for i in range(n)]
    t = float(state0.t)
    return _run(state0, etas, lambda rep, eta: (rep.with_eta(eta), t), order, kernel_tol, tol)


def local_uniqueness(
    state: ContinuationState,
    constraints: np.ndarray | None = None,
    amplitude: float = 1e-3,
    seed: int = 0,
) -> float:
    """Perturb off the gauge slice's tangent directions, re-solve, return the h-distance."""
    rep = state.rep
    K = gauge_constraints(rep, state.t) if constraints is None else np.asarray(constraints, dtype=float)
    K = K.reshape(-1, rep.basis.size)
    gram = gram_matrix(induced_geometry(rep, state.t))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(rep.basis.size) / (1.0 + rep.basis.laplacian_symbol) ** 2
    if K.shape[0]:
        C = gram @ K.T
        v -= K.T @ np.linalg.solve(C.T @ K.T, C.T @ v)
    v *= amplitude / np.max(np.abs(rep.basis.evaluate(v, rep.grid_size)))
    solved = newton_solve(ContinuationState(rep.with_h(rep.h + v), state.t), K)
    return float(np.linalg.norm(solved.rep.h - rep.h))


# ---------------------------------------------------------------------------
# independent oracle on rotationally symmetric spheres


@dataclass(frozen=True)
class OracleCircle:
    z: float
    kappa_g: float
    samples: np.ndarray  # (M, 2) chart points (z, phi)


def latitude_curvature(model: AmbientModel, t: float, z):
    """Signed geodesic curvature of the latitude ``z`` (positive bending towards ``+z``).

    For ``a(z) dz^2 + b(z) dphi^2`` it is ``-b'(z) / (2 b sqrt(a))``; the warp
    profile and the homothety factor give it in closed form.
    """
    z = np.asarray(z, dtype=float)
    fam = model.family
    if model.kind != "sphere":
        raise ValueError("latitude circles live on the sphere model")
    if fam.kind == "warped":
        prof = fam.params["profile"]
        prof.check(t)
        return -prof.df(z, t)
    if fam.kind == "constant":
        return z / np.sqrt(1.0 - z * z)
    if fam.kind == "homothety":
        c = 1.0 - 2.0 * fam.params["kappa"] * t
        if c <= 0:
            raise ValueError("homothety factor is not positive")
        return z / np.sqrt(1.0 - z * z) / np.sqrt(c)
    raise ValueError(f"{fam.kind} family is not rotationally symmetric in closed form")


def shooting_oracle_s2(
    model: AmbientModel,
    t: float,
    kappa_g: float,
    hint: float | None = None,
    eps: float | None = None,
    samples: int = 64,
) -> OracleCircle:
    """Latitude circle of signed geodesic curvature ``kappa_g``, found by bisection in ``z``."""
    eps = model.eps if eps is None else eps
    zs = np.linspace(-1.0 + eps, 1.0 - eps, 4001)
    vals = latitude_curvature(model, t, zs) - kappa_g
    brackets = [i for i in range(len(zs) - 1) if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0]
    if not brackets:
        raise ValueError(f"no latitude with geodesic curvature {kappa_g} in (-1+{eps}, 1-{eps})")
    ref = 0.0 if hint is None else hint
    i = min(brackets, key=lambda j: abs(0.5 * (zs[j] + zs[j + 1]) - ref))
    if vals[i] == 0.0:
        z = float(zs[i])
    else:
        fun = lambda x: float(latitude_curvature(model, t, x)) - kappa_g  # noqa: E731
        z = scipy.optimize.bisect(fun, zs[i], zs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    phi = 2 * np.pi * np.arange(samples) / samples
    pts = np.stack([np.full(samples, z), phi], axis=-1)
    return OracleCircle(float(z), float(kappa_g), pts)


def tracked_curvature(rep: LagrangianRep, t: float) -> tuple[float, float]:
    """Mean signed geodesic curvature and mean height of a curve on the sphere model."""
    geo = induced_geometry(rep, t)
    H = geo.mean_curvature  # (P, 2) chart components
    norm = geo.mean_curvature_norm()
    sign = np.sign(H[:, 0])
    kg = float(np.mean(sign * norm))
    z = float(np.mean(geo.points[:, 0]))
    return kg, z
