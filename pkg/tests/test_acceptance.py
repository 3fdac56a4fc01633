"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture."""

from __future__ import annotations

import time

import numpy as np
import pytest
import scipy.linalg

from hamlag.ambient import WarpProfile, cheeger_family, cheeger_metric, make_flat_cn, make_sphere
from hamlag.continuation import (
    COMPLETED,
    ContinuationState,
    continue_in_leaf,
    continue_in_t,
    frozen_gauge,
    local_uniqueness,
    newton_solve,
    shooting_oracle_s2,
    tracked_curvature,
)
from hamlag.core import MetricForm, SymplecticForm, check_triple, triple_from_metric
from hamlag.lagrangian import LagrangianRep, realize, volume
from hamlag.variational import (
    DEGENERATE,
    NONDEGENERATE,
    el_residual,
    hessian_operator,
    jacobi_full,
    jacobi_ke_minimal,
    kernel_candidates,
    nondegeneracy,
    residual_vector,
    truncated_sup,
)

from conftest import low_mode_direction, random_spd


def report(capsys, number: int, title: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}: {detail}")
    assert ok, detail


def test_criterion_1_retraction(capsys):
    rng = np.random.default_rng(1)
    worst = 0.0
    start = time.perf_counter()
    for dim in (2, 4, 6):
        omega = SymplecticForm.standard(dim)
        for _ in range(100):
            triple = triple_from_metric(omega, MetricForm(random_spd(rng, dim, 0.1)))
            again = triple_from_metric(omega, triple.g)
            worst = max(
                worst,
                check_triple(triple).max_violation,
                float(np.max(np.abs(again.g.matrix - triple.g.matrix))),
            )
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 1.0
    report(capsys, 1, "retraction suite", ok, f"max violation {worst:.2e}, {elapsed:.3f} s")


def test_criterion_2_cheeger_law(capsys):
    rng = np.random.default_rng(2)
    worst_v = worst_h = 0.0
    for model in (make_sphere(group="so2"), make_flat_cn(2)):
        d = model.d
        for t in (0.1, 0.5, 1.0):
            for _ in range(50):
                if model.kind == "flat":
                    p = rng.uniform(0.2, 3.0, d)
                else:
                    p = rng.uniform(-0.95, 0.95, 1)
                x = np.concatenate([p, rng.uniform(0, 2 * np.pi, d)])
                G0, E, Q = model.base_metric(x), model.generators(x), model.action.Q
                Gt = cheeger_metric(model, t, x).matrix
                lam, xi = scipy.linalg.eigh(E @ G0 @ E.T, Q)
                V = E.T @ xi
                for i in range(len(lam)):
                    ratio = (V[:, i] @ Gt @ V[:, i]) / (V[:, i] @ G0 @ V[:, i])
                    worst_v = max(worst_v, abs(ratio - 1 / (1 + t * lam[i])))
                Hb = scipy.linalg.null_space(V.T @ G0)
                worst_h = max(worst_h, float(np.max(np.abs(Hb.T @ (Gt - G0) @ Hb))))
                # mixed terms vanish as well
                worst_h = max(worst_h, float(np.max(np.abs(Hb.T @ Gt @ V))))
    ok = worst_v < 1e-10 and worst_h < 1e-10
    report(capsys, 2, "Cheeger law", ok, f"vertical {worst_v:.2e}, horizontal {worst_h:.2e}")


def test_criterion_3_stationarity_closed_forms(capsys):
    cases = [
        (LagrangianRep.standard(make_flat_cn(1), [1.0], cutoff=32), 2 * np.pi),
        (LagrangianRep.standard(make_flat_cn(1), [1.5], cutoff=32), 3 * np.pi),
        (LagrangianRep.standard(make_flat_cn(2), [1.0, 2.0], cutoff=32), 8 * np.pi**2),
        (LagrangianRep.standard(make_sphere(), [0.5], cutoff=32), np.pi * np.sqrt(3)),
    ]
    res = max(truncated_sup(rep, el_residual(rep).values) for rep, _ in cases)
    vol = max(abs(volume(rep) - exact) for rep, exact in cases)
    ok = res < 1e-10 and vol < 1e-10
    report(capsys, 3, "stationarity closed forms", ok, f"max residual {res:.2e}, max volume error {vol:.2e}")


def test_criterion_4_variations(capsys):
    rng = np.random.default_rng(4)
    flat2 = make_flat_cn(2)
    first = 0.0
    bases = [
        (LagrangianRep.standard(make_flat_cn(1), [1.0]), 0.0),
        (LagrangianRep.standard(make_sphere(), [0.3]), 0.0),
        (LagrangianRep.standard(flat2, [1.0, 2.0], cutoff=8), 0.0),
        (LagrangianRep.standard(make_sphere(WarpProfile("bulge")), [0.3]), 0.2),
    ]
    for rep, t in bases:
        h = np.zeros(rep.basis.size)
        h[:6] = 0.01 * rng.standard_normal(6)
        rep = rep.with_h(h)
        for _ in range(3):
            v = low_mode_direction(rep, rng)
            s = 1e-4
            fd = (volume(rep.with_h(h + s * v), t) - volume(rep.with_h(h - s * v), t)) / (2 * s)
            exact = residual_vector(rep, t) @ v
            first = max(first, abs(fd - exact) / abs(exact))
    second = 0.0
    stationary = [
        LagrangianRep.standard(make_flat_cn(1), [1.0]),
        LagrangianRep.standard(make_sphere(), [0.0]),
        LagrangianRep.standard(make_sphere(), [0.5]),
        LagrangianRep.standard(flat2, [1.0, 2.0], cutoff=8),
    ]
    s = 1e-3
    for rep in stationary:
        op = jacobi_full(rep)
        v0 = volume(rep)
        for _ in range(5):
            v = low_mode_direction(rep, rng)
            fd = (volume(rep.with_h(s * v)) - 2 * v0 + volume(rep.with_h(-s * v))) / s**2
            q = op.quadratic_form(v)
            second = max(second, abs(fd - q) / abs(q))
    ok = first < 1e-6 and second < 1e-3
    report(capsys, 4, "first/second variation", ok, f"first rel {first:.2e}, second rel {second:.2e} (20 directions)")


def test_criterion_5_spectral_truth(capsys):
    rep = LagrangianRep.standard(make_sphere(group="so3"), [0.0])
    full = jacobi_full(rep)
    ke = jacobi_ke_minimal(rep, 1.0)
    k = np.arange(1, 9)
    expected = np.repeat(k**2 * (k**2 - 1.0), 2)
    eig = float(np.max(np.abs(full.eigenvalues[:16] - expected)))
    kdim = nondegeneracy(full, kernel_candidates(rep)).kernel_dim
    diff = float(np.max(np.abs(full.matrix - ke.matrix)))
    ok = eig < 1e-8 and kdim == 2 and diff < 1e-8
    report(capsys, 5, "spectral truth", ok, f"eigenvalue error {eig:.2e}, kernel_dim {kdim}, full vs KE {diff:.2e}")


@pytest.mark.slow
def test_criterion_6_verdicts(capsys):
    sphere = make_sphere(group="so3")
    expected = {"equator/so3": NONDEGENERATE, "equator/so2": DEGENERATE, "circle/T1": DEGENERATE, "torus/T2": DEGENERATE}
    got = {}
    for N in (16, 32):
        eq = LagrangianRep.standard(sphere, [0.0], cutoff=N)
        op = jacobi_full(eq)
        got[("equator/so3", N)] = nondegeneracy(op, kernel_candidates(eq)).verdict
        got[("equator/so2", N)] = nondegeneracy(op, kernel_candidates(eq, sphere.actions["so2"])).verdict
        circle = LagrangianRep.standard(make_flat_cn(1), [1.0], cutoff=N)
        got[("circle/T1", N)] = nondegeneracy(jacobi_full(circle), kernel_candidates(circle)).verdict
        torus = LagrangianRep.standard(make_flat_cn(2), [1.0, 2.0], cutoff=N)
        got[("torus/T2", N)] = nondegeneracy(hessian_operator(torus), kernel_candidates(torus)).verdict
    ok = all(got[(name, N)] == v for (name, v) in expected.items() for N in (16, 32))
    detail = ", ".join(f"{name}@N={N} {v}" for (name, N), v in sorted(got.items()))
    report(capsys, 6, "nondegeneracy verdicts", ok, detail)


@pytest.mark.slow
def test_criterion_7a_cheeger_torus_run(capsys):
    flat2 = make_flat_cn(2)
    rep = LagrangianRep.standard(flat2.with_family(cheeger_family(flat2)), [1.0, 2.0])
    start = time.perf_counter()
    result = continue_in_t(ContinuationState(rep, 0.0), 0.5, 10)
    elapsed = time.perf_counter() - start
    res = max(r.residual for r in result.records)
    hn = max(r.h_norm for r in result.records)
    ok = result.termination == COMPLETED and len(result.records) == 10 and res < 1e-10 and hn < 1e-9 and elapsed < 30
    report(capsys, 7, "(a) torus under Cheeger family", ok,
           f"{result.termination}, {len(result.records)} steps, residual {res:.2e}, |h| {hn:.2e}, {elapsed:.1f} s")


def test_criterion_7b_leaf_run(capsys):
    rep = LagrangianRep.standard(make_flat_cn(1), [1.0], cutoff=32)
    start = time.perf_counter()
    result = continue_in_leaf(ContinuationState(rep, 0.0), [0.1], 5)
    elapsed = time.perf_counter() - start
    worst = 0.0
    for state in result.states[1:]:
        radius = np.sqrt(2 * realize(state.rep).points[:, 0])
        exact = np.sqrt(2 * (0.5 + state.eta[0]))
        worst = max(worst, float(np.max(np.abs(radius - exact))), state.h_norm)
    ok = result.termination == COMPLETED and worst < 1e-10 and elapsed < 30
    report(capsys, 7, "(b) leaf run on C", ok, f"max radius error {worst:.2e}, {elapsed:.2f} s")


def test_criterion_7c_warped_oracle(capsys):
    model = make_sphere(WarpProfile("bulge", 1.0))
    rep = LagrangianRep.standard(model, [0.5], cutoff=32)
    start = time.perf_counter()
    result = continue_in_t(ContinuationState(rep, 0.0), 0.2, 4)
    elapsed = time.perf_counter() - start
    worst = 0.0
    for state in result.states[1:]:
        kg, z = tracked_curvature(state.rep, state.t)
        worst = max(worst, abs(shooting_oracle_s2(model, state.t, kg, hint=z).z - z))
    ok = result.termination == COMPLETED and worst < 1e-7 and elapsed < 30
    report(capsys, 7, "(c) warped sphere vs shooting oracle", ok, f"max |z* - z| {worst:.2e}, {elapsed:.2f} s")


def test_criterion_8_local_uniqueness(capsys):
    eq = LagrangianRep.standard(make_sphere(group="so3"), [0.0])
    state = newton_solve(ContinuationState(eq, 0.0))
    worst = max(local_uniqueness(state, seed=s) for s in range(5))
    circle = LagrangianRep.standard(make_flat_cn(1), [1.0])
    K = frozen_gauge(circle, 0.0)
    worst = max(worst, local_uniqueness(ContinuationState(circle, 0.0), K, seed=7))
    warped = LagrangianRep.standard(make_sphere(WarpProfile("bulge")), [0.5])
    end = continue_in_t(ContinuationState(warped, 0.0), 0.2, 4).states[-1]
    worst = max(worst, local_uniqueness(end, frozen_gauge(warped, 0.0), seed=3))
    report(capsys, 8, "local uniqueness modulo gauge", worst < 1e-8, f"max h-distance {worst:.2e}")
