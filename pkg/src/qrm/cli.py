"""Command-line entry point: ``qrm <command> [options]``.

Exit codes: 0 on success, 1 on invalid input, 2 when a solver fails. Errors
are reported as a JSON object ``{"error": {...}}`` on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import jsonio
from .casestudies import curve, curve_csv, default_mu_grid, ejm_basis, ejm_povm
from .conic import DEFAULT_SDP_TOL, SolverFailure
from .pguess import (
    ClassicalStrategy,
    certify_pc_below_one,
    eval_classical_strategy,
    eval_quantum_strategy,
    perfect_quantum_construction,
    pguess_pm_classical,
    pguess_pure_povm,
)
from .pmsim import depolarize, extract_pm_decomposition, pm_visibility
from .qobj import InvalidInput, validate

COMMANDS = ("ejm", "pmsim", "pguess", "qrng-curve", "certify-theorem4", "selftest")
TOL_ENV = "QRM_SOLVER_TOL"


@dataclass
class RunConfig:
    command: str
    theta: float | None = None
    mu_grid: list[float] | None = None
    tol: float = DEFAULT_SDP_TOL
    input_path: Path | None = None
    output_path: Path | None = None
    format: str = "json"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidInput(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise InvalidInput("tol must be positive")
        if self.format not in ("json", "csv"):
            raise InvalidInput(f"unknown format {self.format!r}")
        if self.format == "csv" and self.command != "qrng-curve":
            raise InvalidInput("csv output is only available for qrng-curve")
        if self.command == "pguess" and self.input_path is None:
            raise InvalidInput("pguess needs --in")
        if self.command == "pmsim" and self.input_path is None and self.theta is None:
            raise InvalidInput("pmsim needs --in or --theta")


def parse_mu_grid(text: str) -> list[float]:
    try:
        a, b, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise InvalidInput(f"--mu-grid expects a:b:step, got {text!r}") from exc
    if step <= 0 or b < a:
        raise InvalidInput("--mu-grid needs a <= b and step > 0")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [round(a + k * step, 12) for k in range(n)]


def _read_json(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------- commands


def cmd_ejm(cfg: RunConfig) -> dict:
    theta = 0.0 if cfg.theta is None else cfg.theta
    return {
        "theta": theta,
        "basis": [jsonio.matrix_to_json(v) for v in ejm_basis(theta)],
        "povm": jsonio.povm_to_json(ejm_povm(theta)),
    }


def cmd_pmsim(cfg: RunConfig) -> dict:
    if cfg.input_path is not None:
        obj = _read_json(cfg.input_path)
        povm = jsonio.povm_from_json(obj.get("povm", obj))
    else:
        povm = ejm_povm(cfg.theta)
    validate(povm).raise_if_failed()
    vis = pm_visibility(povm, cfg.tol)
    decomp = extract_pm_decomposition(vis)
    out = jsonio.visibility_to_json(vis, decomp)
    out["depolarized_povm"] = jsonio.povm_to_json(depolarize(povm, vis.t_star))
    return out


def cmd_pguess(cfg: RunConfig) -> dict:
    obj = _read_json(cfg.input_path)
    for key in ("state", "povm"):
        if key not in obj:
            raise InvalidInput(f"pguess input needs {key!r}")
    state = jsonio.state_from_json(obj["state"])
    povm = jsonio.povm_from_json(obj["povm"])
    validate(state).raise_if_failed()
    validate(povm).raise_if_failed()
    if povm.dim != state.dim:
        raise InvalidInput("state and POVM dimensions differ")

    if "strategy" in obj:
        s = jsonio.strategy_from_json(obj["strategy"])
        if isinstance(s, ClassicalStrategy):
            report = eval_classical_strategy(s, state, povm)
        else:
            report = eval_quantum_strategy(s, state, povm)
        return jsonio.report_to_json(report, route="strategy")
    if povm.is_projective():
        return jsonio.report_to_json(pguess_pm_classical(state, povm, cfg.tol), route="projective")
    if state.is_pure():
        return jsonio.report_to_json(pguess_pure_povm(state.vector(), povm, cfg.tol), route="pure_state")
    raise InvalidInput(
        "no exact method for a mixed state with a non-projective POVM; supply a strategy to get a lower bound"
    )


def cmd_qrng_curve(cfg: RunConfig) -> dict | str:
    rows = curve(cfg.mu_grid if cfg.mu_grid is not None else default_mu_grid(), cfg.tol)
    if cfg.format == "csv":
        return curve_csv(rows)
    return {"rows": [{"mu": r.mu, "f_mu": r.f_mu, "pguess_q": r.pguess_q} for r in rows]}


def cmd_certify_theorem4(cfg: RunConfig) -> dict:
    theta = 0.0 if cfg.theta is None else cfg.theta
    state, povm, strategy = perfect_quantum_construction(ejm_basis(theta))
    quantum = eval_quantum_strategy(strategy, state, povm)
    cert = certify_pc_below_one(povm)
    separated = cert.verdict == "certified" and abs(quantum.value - 1.0) <= 1e-6
    return {
        "theta": theta,
        "quantum_value": jsonio._num(quantum.value),
        "quantum_residuals": {k: jsonio._num(v) for k, v in sorted(quantum.residuals.items())},
        "classical": jsonio.certificate_to_json(cert),
        "classical_below_one": cert.verdict == "certified",
        "verdict": "separation" if separated else "inconclusive",
    }


def cmd_selftest(cfg: RunConfig) -> dict:
    from .selftest import run_selftest

    return run_selftest(cfg.tol)


HANDLERS = {
    "ejm": cmd_ejm,
    "pmsim": cmd_pmsim,
    "pguess": cmd_pguess,
    "qrng-curve": cmd_qrng_curve,
    "certify-theorem4": cmd_certify_theorem4,
    "selftest": cmd_selftest,
}


def _error(code: int, exc: Exception) -> dict:
    err = {"code": code, "type": type(exc).__name__, "message": str(exc)}
    if hasattr(exc, "violated"):
        err["violated"] = {k: float(v) for k, v in exc.violated.items()}
    return {"error": err}


def _emit(payload, cfg: RunConfig | None, stream) -> None:
    text = payload if isinstance(payload, str) else jsonio.dumps(payload)
    if cfg is not None and cfg.output_path is not None:
        Path(cfg.output_path).write_text(text)
    else:
        stream.write(text)


def run(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        payload = HANDLERS[cfg.command](cfg)
    except SolverFailure as exc:
        _emit(_error(2, exc), None, stream)
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        _emit(_error(1, exc), None, stream)
        return 1
    _emit(payload, cfg, stream)
    if cfg.command == "selftest" and not payload["passed"]:
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qrm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--theta", type=float, help="angle of the entangled basis family (rad)")
    ap.add_argument("--mu-grid", help="detector efficiency grid a:b:step")
    ap.add_argument("--tol", type=float, help=f"solver tolerance (default {DEFAULT_SDP_TOL}, env {TOL_ENV})")
    ap.add_argument("--in", dest="input_path", type=Path)
    ap.add_argument("--out", dest="output_path", type=Path)
    ap.add_argument("--format", choices=("json", "csv"))
    return ap


def config_from_args(argv=None, environ=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    environ = os.environ if environ is None else environ
    tol = args.tol
    if tol is None:
        try:
            tol = float(environ.get(TOL_ENV, DEFAULT_SDP_TOL))
        except ValueError as exc:
            raise InvalidInput(f"{TOL_ENV} is not a number") from exc
    fmt = args.format or ("csv" if args.command == "qrng-curve" else "json")
    return RunConfig(
        command=args.command,
        theta=args.theta,
        mu_grid=parse_mu_grid(args.mu_grid) if args.mu_grid else None,
        tol=tol,
        input_path=args.input_path,
        output_path=args.output_path,
        format=fmt,
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except InvalidInput as exc:
        _emit(_error(1, exc), None, sys.stdout)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
