"""Command-line front end: ``hamlag {verify,spectrum,stability,continue}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import continuation as cont
from .errors import (
    ChartError,
    ConvergenceError,
    DegeneracyError,
    GeometryError,
    HamlagError,
    NonMinimalError,
)
from .lagrangian import induced_geometry, volume
from .scenario import Scenario, ScenarioError, load_scenario
from .variational import (
    ANGLE_TOL,
    KERNEL_TOL,
    NONDEGENERATE,
    el_residual,
    einstein_constant,
    first_eigenvalue,
    hessian_operator,
    jacobi_full,
    jacobi_ke_minimal,
    kernel_candidates,
    nondegeneracy,
    spectrum_csv,
    stability_criterion,
    truncated_sup,
    verdict_json,
)

log = logging.getLogger("hamlag")

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_SCHEMA = 2
EXIT_CHART = 3
EXIT_PRECONDITION = 4
EXIT_NUMERIC = 5

VERIFY_TOL = 1e-10
TERMINATION_EXIT = {
    cont.COMPLETED: EXIT_OK,
    cont.DEGENERACY: EXIT_NEGATIVE,
    cont.CHART_EXIT: EXIT_CHART,
    cont.NO_CONVERGENCE: EXIT_NUMERIC,
}


class PreconditionError(HamlagError):
    pass


@dataclass
class RunReport:
    command: str
    scenario_hash: str
    exit_code: int = EXIT_OK
    seconds: float = 0.0
    outputs: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        # wall time is left out so identical runs write identical files
        return {
            "command": self.command,
            "scenario_hash": self.scenario_hash,
            "exit_code": self.exit_code,
            "outputs": sorted(self.outputs),
            "verdicts": self.verdicts,
            "message": self.message,
        }


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Writer:
    def __init__(self, out: Path | None, report: RunReport):
        self.out = out
        self.report = report

    def write(self, name: str, text: str) -> None:
        if self.out is None:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.report.outputs.append(name)


def _tol(args, scenario: Scenario, key: str, default: float) -> float:
    if args.tol is not None:
        return float(args.tol)
    return float(scenario.numerics.get(key, default))


# ---------------------------------------------------------------------------
# workflows


def cmd_verify(scenario: Scenario, args, report: RunReport, out: _Writer) -> int:
    rep = scenario.build_rep(args.cutoff)
    t = float(scenario.run.get("t", 0.0))
    geo = induced_geometry(rep, t)
    residual = truncated_sup(rep, el_residual(rep, t, geo).values)
    vol = volume(rep, t)
    # omega restricted to the tangent frame vanishes for a Lagrangian graph
    omega_tan = np.einsum("pai,ij,pbj->pab", geo.tangents, rep.ambient.omega, geo.tangents)
    exactness = float(np.max(np.abs(omega_tan)))
    tol = _tol(args, scenario, "tol", VERIFY_TOL)
    ok = residual < tol
    data = {
        "residual": residual,
        "volume": vol,
        "lagrangian_defect": exactness,
        "threshold": tol,
        "stationary": bool(ok),
        "t": t,
    }
    print(f"residual  {residual:.6e}")
    print(f"volume    {vol:.15g}")
    print(f"omega|L   {exactness:.3e}")
    print("stationary" if ok else "not stationary")
    out.write("verify.json", _dump(data))
    report.verdicts["stationary"] = bool(ok)
    return EXIT_OK if ok else EXIT_NEGATIVE


def _operator(scenario: Scenario, rep, t: float, jacobi: str):
    if jacobi == "ke":
        kappa = einstein_constant(rep.ambient, t)
        if kappa is None:
            raise PreconditionError(f"the {rep.ambient.family.kind} family is not Kaehler-Einstein")
        return jacobi_ke_minimal(rep, kappa, t)
    if rep.ambient.family.kind == "cheeger":
        # the Cheeger metrics are not compatible with omega; use the exact Hessian
        return hessian_operator(rep, t)
    return jacobi_full(rep, t)


def cmd_spectrum(scenario: Scenario, args, report: RunReport, out: _Writer) -> int:
    rep = scenario.build_rep(args.cutoff)
    run = scenario.run
    t = float(run.get("t", 0.0))
    jacobi = args.jacobi or run.get("jacobi", "full")
    op = _operator(scenario, rep, t, jacobi)
    kernel_tol = float(scenario.numerics.get("kernel_tol", KERNEL_TOL))
    angle_tol = _tol(args, scenario, "angle_tol", ANGLE_TOL)
    cands = kernel_candidates(rep, t=t)
    verdict = nondegeneracy(op, cands, kernel_tol, angle_tol)
    out.write("spectrum.csv", spectrum_csv(op.eigenvalues))
    out.write("verdict.json", verdict_json(verdict, operator=op.form, t=t, group=rep.ambient.action.name))
    print(f"operator      {op.form}")
    print(f"kernel_dim    {verdict.kernel_dim}")
    print(f"candidate_dim {verdict.candidate_dim}")
    print(f"verdict       {verdict.verdict}")
    report.verdicts.update({"nondegeneracy": verdict.verdict, "kernel_dim": verdict.kernel_dim})
    return EXIT_OK if verdict.verdict == NONDEGENERATE else EXIT_NEGATIVE


def cmd_stability(scenario: Scenario, args, report: RunReport, out: _Writer) -> int:
    run = scenario.run
    t = float(run.get("t", 0.0))
    lam = run.get("lambda1", "from-spectrum")
    source = "user"
    if lam == "from-spectrum":
        lam = first_eigenvalue(scenario.build_rep(args.cutoff), t)
        source = "spectrum"
    kappa = run.get("kappa")
    if kappa is None:
        kappa = einstein_constant(scenario.build_model(), t)
        if kappa is None:
            raise PreconditionError("no Einstein constant: give run.kappa")
    try:
        verdict = stability_criterion(float(lam), float(kappa))
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc
    print(f"lambda1 {float(lam):.12g} ({source})")
    print(f"kappa   {float(kappa):.12g}")
    print(verdict)
    out.write("stability.json", _dump({"lambda1": float(lam), "lambda1_source": source,
                                       "kappa": float(kappa), "verdict": verdict}))
    report.verdicts["stability"] = verdict
    return EXIT_OK if verdict == "stable" else EXIT_NEGATIVE


def cmd_continue(scenario: Scenario, args, report: RunReport, out: _Writer) -> int:
    run = scenario.run
    if ("t_max" in run) == ("eta_target" in run):
        raise PreconditionError("continue needs exactly one of run.t_max and run.eta_target")
    rep = scenario.build_rep(args.cutoff)
    t0 = float(run.get("t", 0.0))
    newton_tol = _tol(args, scenario, "newton_tol", cont.NEWTON_TOL)
    residual = truncated_sup(rep, el_residual(rep, t0).values)
    if residual >= newton_tol:
        raise PreconditionError(f"the start is not stationary (residual {residual:.3g})")
    state0 = cont.ContinuationState(rep, t0, residual=residual)
    kernel_tol = float(scenario.numerics.get("kernel_tol", KERNEL_TOL))
    steps, order = int(run.get("steps", 10)), int(run.get("order", 0))
    if "t_max" in run:
        result = cont.continue_in_t(state0, float(run["t_max"]), steps, order, kernel_tol, newton_tol)
    else:
        result = cont.continue_in_leaf(state0, run["eta_target"], steps, order, kernel_tol, newton_tol)
    out.write("path.json", result.to_json())
    out.write("path.csv", result.to_csv())
    print(f"termination {result.termination} ({len(result.records)} steps, gauge {result.gauge})")
    if result.message:
        print(result.message)
    report.verdicts.update({
        "termination": result.termination,
        "initial_verdict": result.initial_verdict,
        "step_verdicts": [r.verdict for r in result.records],
    })
    return TERMINATION_EXIT[result.termination]


HELP = {
    "verify": "residual, volume and Lagrangian check of the scenario's Lagrangian",
    "spectrum": "Jacobi spectrum, kernel dimension and nondegeneracy verdict",
    "stability": "Hamiltonian stability from lambda1 and the Einstein constant",
    "continue": "follow the stationary Lagrangian in t or along its leaf",
}

COMMANDS = {
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "stability": cmd_stability,
    "continue": cmd_continue,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamlag", description="Hamiltonian stationary Lagrangian tori and circles")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", type=Path, default=None, help="directory for output files")
        p.add_argument("--tol", type=float, default=None, help="override the command's main tolerance")
        p.add_argument("--cutoff", type=int, default=None, help="override the Fourier cutoff N")
        p.add_argument("--jacobi", choices=("full", "ke"), default=None, help="Jacobi operator form")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("HAMLAG_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(argv=None) -> tuple[int, RunReport | None]:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA, None
    report = RunReport(args.command, scenario.hash)
    writer = _Writer(args.out, report)
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](scenario, args, report, writer)
    except ScenarioError as exc:
        code, report.message = EXIT_SCHEMA, str(exc)
    except (ChartError, GeometryError) as exc:
        code, report.message = EXIT_CHART, str(exc)
    except (PreconditionError, NonMinimalError) as exc:
        code, report.message = EXIT_PRECONDITION, str(exc)
    except (ConvergenceError, DegeneracyError, np.linalg.LinAlgError) as exc:
        code, report.message = EXIT_NUMERIC, str(exc)
    except ValueError as exc:  # out-of-range family parameters and similar
        code, report.message = EXIT_PRECONDITION, str(exc)
    report.seconds = time.perf_counter() - start
    report.exit_code = code
    if report.message:
        print(f"error: {report.message}", file=sys.stderr)
    writer.write("report.json", _dump(report.to_dict()))
    log.info("%s finished in %.2f s with exit code %d", args.command, report.seconds, code)
    return code, report


def main(argv=None) -> int:
    _configure_logging()
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
