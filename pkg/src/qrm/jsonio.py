"""JSON encoding of matrices, quantum objects, strategies and reports.

Complex matrices are ``{"dim": [r, c], "re": [[...]], "im": [[...]]}``;
vectors are single-column matrices.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .pguess import Branch, Certificate, ClassicalStrategy, GuessReport, QuantumStrategy
from .pmsim import VisibilityResult
from .qobj import InvalidInput, Povm, ProjImpl, QState

MATRIX_SCHEMA = {
    "type": "object",
    "required": ["dim", "re", "im"],
    "properties": {
        "dim": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "re": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "im": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

POVM_SCHEMA = {
    "type": "object",
    "required": ["dim", "effects"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "effects": {"type": "array", "items": MATRIX_SCHEMA, "minItems": 1},
        "labels": {"type": "array"},
    },
}

STATE_SCHEMA = {
    "type": "object",
    "required": ["dim"],
    "properties": {"dim": {"type": "integer", "minimum": 1}, "rho": MATRIX_SCHEMA, "vector": MATRIX_SCHEMA},
    "anyOf": [{"required": ["rho"]}, {"required": ["vector"]}],
}

IMPL_SCHEMA = {
    "type": "object",
    "required": ["system_dim", "ancilla_dim", "projectors", "ancilla_state"],
    "properties": {
        "system_dim": {"type": "integer"},
        "ancilla_dim": {"type": "integer"},
        "projectors": {"type": "array", "items": MATRIX_SCHEMA},
        "ancilla_state": MATRIX_SCHEMA,
    },
}

STRATEGY_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "oneOf": [
        {
            "properties": {
                "kind": {"const": "classical"},
                "branches": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["weight", "state", "povm"],
                        "properties": {"weight": {"type": "number"}, "state": MATRIX_SCHEMA, "povm": POVM_SCHEMA},
                    },
                },
            },
            "required": ["branches"],
        },
        {
            "properties": {
                "kind": {"const": "quantum"},
                "impl": IMPL_SCHEMA,
                "psi": MATRIX_SCHEMA,
                "eve_povm": POVM_SCHEMA,
            },
            "required": ["impl", "psi", "eve_povm"],
        },
    ],
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["value", "kind", "residuals"],
    "properties": {
        "value": {"type": "number", "minimum": 0, "maximum": 1.000001},
        "kind": {"enum": ["exact_sdp", "strategy_lower_bound", "certificate"]},
        "residuals": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}

VISIBILITY_SCHEMA = {
    "type": "object",
    "required": ["t_star", "pairs"],
    "properties": {
        "t_star": {"type": "number", "minimum": 0, "maximum": 1},
        "pairs": {"type": "array", "items": {"type": "object", "required": ["pair", "p", "n_plus", "n_minus"]}},
        "dual_certificate": {"type": ["object", "null"]},
        "decomposition": {"type": ["array", "null"]},
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error"],
    "properties": {
        "error": {"type": "object", "required": ["code", "type", "message"]},
    },
}


def _num(x: float) -> float:
    x = float(x)
    return 0.0 if x == 0.0 else x  # no negative zero in the output


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        m = m[:, None]
    return {
        "dim": [int(m.shape[0]), int(m.shape[1])],
        "re": [[_num(v) for v in row] for row in m.real],
        "im": [[_num(v) for v in row] for row in m.imag],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        r, c = obj["dim"]
        re = np.asarray(obj["re"], dtype=float).reshape(r, c)
        im = np.asarray(obj.get("im", np.zeros((r, c))), dtype=float).reshape(r, c)
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidInput(f"malformed matrix: {exc}") from exc
    return re + 1j * im


def vector_from_json(obj: dict) -> np.ndarray:
    m = matrix_from_json(obj)
    if 1 not in m.shape:
        raise InvalidInput("expected a single-column matrix for a vector")
    return m.ravel()


def povm_to_json(m: Povm) -> dict:
    labels = [lab if isinstance(lab, (str, int)) else str(lab) for lab in m.labels]
    return {"dim": m.dim, "effects": [matrix_to_json(e) for e in m.effects], "labels": labels}


def povm_from_json(obj: dict) -> Povm:
    try:
        effects = tuple(matrix_from_json(e) for e in obj["effects"])
    except KeyError as exc:
        raise InvalidInput("POVM needs 'effects'") from exc
    m = Povm(effects, tuple(obj.get("labels") or ()))
    if "dim" in obj and int(obj["dim"]) != m.dim:
        raise InvalidInput("POVM 'dim' does not match its effects")
    return m


def state_to_json(s: QState) -> dict:
    return {"dim": s.dim, "rho": matrix_to_json(s.rho)}


def state_from_json(obj: dict) -> QState:
    if "rho" in obj:
        s = QState(matrix_from_json(obj["rho"]))
    elif "vector" in obj:
        s = QState.pure(vector_from_json(obj["vector"]))
    else:
        raise InvalidInput("state needs 'rho' or 'vector'")
    if "dim" in obj and int(obj["dim"]) != s.dim:
        raise InvalidInput("state 'dim' does not match its matrix")
    return s


def impl_to_json(impl: ProjImpl) -> dict:
    return {
        "system_dim": impl.system_dim,
        "ancilla_dim": impl.ancilla_dim,
        "projectors": [matrix_to_json(p) for p in impl.projectors],
        "ancilla_state": matrix_to_json(impl.ancilla_state),
    }


def impl_from_json(obj: dict) -> ProjImpl:
    return ProjImpl(
        int(obj["system_dim"]),
        int(obj["ancilla_dim"]),
        tuple(matrix_from_json(p) for p in obj["projectors"]),
        matrix_from_json(obj["ancilla_state"]),
    )


def _label_index(povm: Povm, guess) -> int | None:
    if guess is None:
        return None
    if guess in povm.labels:
        return povm.labels.index(guess)
    if isinstance(guess, int) and 0 <= guess < len(povm):
        return guess
    raise InvalidInput(f"unknown outcome label {guess!r}")


def strategy_to_json(s) -> dict:
    if isinstance(s, ClassicalStrategy):
        return {
            "kind": "classical",
            "branches": [
                {
                    "weight": _num(b.weight),
                    "state": matrix_to_json(b.state),
                    "povm": povm_to_json(b.povm),
                    "guess": None if b.guess is None else b.povm.labels[b.guess],
                }
                for b in s.branches
            ],
        }
    if isinstance(s, QuantumStrategy):
        return {
            "kind": "quantum",
            "impl": impl_to_json(s.impl),
            "psi": matrix_to_json(s.psi),
            "eve_povm": povm_to_json(s.eve_povm),
        }
    raise TypeError(type(s).__name__)


def strategy_from_json(obj: dict):
    kind = obj.get("kind")
    if kind == "classical":
        branches = []
        for b in obj["branches"]:
            povm = povm_from_json(b["povm"])
            branches.append(Branch(float(b["weight"]), vector_from_json(b["state"]), povm, _label_index(povm, b.get("guess"))))
        return ClassicalStrategy(branches)
    if kind == "quantum":
        return QuantumStrategy(impl_from_json(obj["impl"]), vector_from_json(obj["psi"]), povm_from_json(obj["eve_povm"]))
    raise InvalidInput(f"unknown strategy kind {kind!r}")


def report_to_json(r: GuessReport, route: str | None = None) -> dict:
    out: dict[str, Any] = {
        "value": _num(r.value),
        "kind": r.kind,
        "residuals": {k: _num(v) for k, v in sorted(r.residuals.items())},
    }
    if route:
        out["route"] = route
    if isinstance(r.witness, (ClassicalStrategy, QuantumStrategy)):
        out["witness"] = strategy_to_json(r.witness)
    elif isinstance(r.witness, Povm):
        out["witness"] = {"eve_povm": povm_to_json(r.witness)}
    return out


def certificate_summary(cert: dict | None) -> dict | None:
    if not cert:
        return None
    check = cert.get("check", {})
    return {
        "kind": cert.get("kind"),
        "valid": bool(check.get("valid", False)),
        "stationarity": _num(check.get("stationarity", np.nan)),
        "objective": _num(check.get("objective", np.nan)),
    }


def visibility_to_json(v: VisibilityResult, decomposition=None) -> dict:
    return {
        "t_star": _num(v.t_star),
        "pairs": [
            {"pair": [i, j], "p": _num(p), "n_plus": matrix_to_json(a), "n_minus": matrix_to_json(b)}
            for (i, j), (p, a, b) in sorted(v.pairs.items())
        ],
        "dual_certificate": certificate_summary(v.dual_certificate),
        "decomposition": None
        if decomposition is None
        else [{"weight": _num(w), "povm": povm_to_json(pm)} for w, pm in decomposition],
    }


def certificate_to_json(c: Certificate) -> dict:
    return {
        "verdict": c.verdict,
        "t_star": _num(c.t_star),
        "margin": _num(c.margin),
        "infeasibility": certificate_summary(c.infeasibility),
        "reason": c.reason,
    }


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
