"""Experiment runner: one JSON config in, a report and trace tables out.

    opseq run <config.json> [--out DIR] [--jobs K]
    opseq validate <config.json>
    opseq suite <dir> [--out DIR] [--jobs K]

Exit codes: 0 ok, 1 input error, 2 ``expect`` mismatch.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import asymptotics as asy
from . import distances as dst
from . import spectral as spc
from .operators import (
    composition_matrix,
    hankel_matrix,
    operator_norm,
    toeplitz_matrix,
)
from .symbols import BlaschkeSpec, TrigSymbol, sup_norm_grid

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH = 0, 1, 2

DEFAULTS = {"N": 256, "n_max": 64, "tol": 1e-6, "seed": 0x5EED}
EXTRA_DEFAULTS = {"window_w": 8, "k": 2, "n_iter": 4096, "circle_grid": 256,
                  "threshold": dst.SIGMA_U_THRESHOLD, "expect_tol": 1e-9}

# The named result each kind exercises, carried into every report.
STATEMENTS = {
    "toeplitz_asymptotics": "Brown-Halmos identity: T is Toeplitz iff S* T S = T; "
                            "S*^n T S^n windows of a Toeplitz matrix are invariant",
    "feintuch_decompose": "Feintuch decomposition T = T0 + K with T0 Toeplitz and K compact; "
                          "A^n T B^n converges in norm iff T = T0 + K with A T0 B = T0; "
                          "windows of products of trigonometric Toeplitz operators stabilize",
    "ess_norm": "essential norm ||T + K(H)|| equals lim ||A^n T B^n|| (||S*^n T S^n|| for the shift); "
                "compact operators vanish along the sequence; T compact iff the limit is 0",
    "nehari": "Nehari formula dist(phi, H^inf) = ||H_phi||",
    "hsc_distance": "dist(phi, conj(z)^n H^inf) decreases to dist(phi, H^inf + C); "
                    "distance to an increasing union of subspaces is the limit of distances",
    "hartman_sarason": "||f(S_theta)|| = dist(conj(theta) f, H^inf) and "
                       "lim ||S_theta^n f(S_theta)|| = dist(conj(theta) f, H^inf + C)",
    "sigma_u": "sigma(S_theta) on the circle is Sigma_u(theta) = {xi : liminf |theta(z)| = 0 as z -> xi}",
    "composition_dichotomy": "Cesaro means (1/n) sum S*^i C_phi S^i converge in norm iff C_phi is compact "
                             "or the identity; Cesaro norm convergence iff T = T0 + Q",
    "peripheral_sup": "lim ||T^n p(T)|| = sup |p| over sigma(T) on the unit circle "
                      "(diagonal and shift instances)",
    "normal_cesaro": "mean ergodic splitting X = ker(T - I) + closure of (T - I)X; "
                     "(1/n) sum N^i x -> P({1}) x; N^n x converges iff P(sigma_N(x) on T minus {1}) x = 0; "
                     "bounded orbits have local spectrum in the closed disk; "
                     "Katznelson-Tzafriri increments vanish when sigma_N(x) on T is within {1}; "
                     "multiplication operator Nf = zf on atomic discretizations",
    "tauberian": "Tauberian step: ||T^{n+1}x - T^n x|| -> 0 plus Cesaro convergence gives convergence "
                 "to the same element; half-plane spectral hypothesis on A, B checked as a certificate",
    "averaged_power": "S = (I + T + ... + T^{k-1})/k: S^n x converges to the Cesaro limit",
    "gap_check": "||K + T0|| >= ||K||/2 for A T0 B = T0, and the constant 1/2 is attained",
}
KINDS = tuple(STATEMENTS)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# -- schema ------------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_DIM = {"type": "integer", "minimum": 1}
_PAIR = {"type": "array", "prefixItems": [_NUM, _NUM], "minItems": 2, "maxItems": 2}
_SYMBOL = {
    "type": "object",
    "required": ["coeffs"],
    "properties": {
        "coeffs": {"type": "array", "items": {
            "type": "array", "prefixItems": [{"type": "integer"}, _NUM, _NUM],
            "minItems": 3, "maxItems": 3}},
        "tail_bound": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}
_THETA = {
    "type": "object", "required": ["zeros"],
    "properties": {"zeros": {"type": "array", "items": _PAIR, "minItems": 1}},
    "additionalProperties": False,
}
_ATOMS = {"type": "array", "minItems": 1, "items": {
    "type": "array", "prefixItems": [_NUM, _NUM, {"type": "number", "minimum": 0}],
    "minItems": 3, "maxItems": 3}}
_VECTOR = {"type": "array", "minItems": 1, "items": _PAIR}


def _one_key(name, schema):
    return {"type": "object", "required": [name], "properties": {name: schema},
            "additionalProperties": False}


_OPERATOR_DEFS = {
    "operator": {"oneOf": [
        _one_key("toeplitz", _SYMBOL),
        _one_key("hankel", _SYMBOL),
        _one_key("composition", _SYMBOL),
        _one_key("identity", _PAIR),
        _one_key("entries", {"type": "array", "items": {
            "type": "array", "prefixItems": [{"type": "integer", "minimum": 0},
                                             {"type": "integer", "minimum": 0}, _NUM, _NUM],
            "minItems": 4, "maxItems": 4}}),
        _one_key("sum", {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/operator"}}),
        _one_key("product", {"type": "array", "minItems": 1, "items": {"$ref": "#/$defs/operator"}}),
    ]},
}
_OP = {"$ref": "#/$defs/operator"}


def _params(required, **props):
    return {"type": "object", "required": list(required), "properties": props,
            "additionalProperties": False}


_COMMON = {"N": _DIM, "n_max": _DIM, "tol": _POS, "seed": {"type": "integer", "minimum": 0}}

PARAM_SCHEMAS = {
    "toeplitz_asymptotics": _params(["symbol"], symbol=_SYMBOL, window_w=_DIM, **_COMMON),
    "feintuch_decompose": _params(["operator"], operator=_OP, toeplitz_symbol=_SYMBOL,
                                  window_w=_DIM, **_COMMON),
    "ess_norm": _params(["operator"], operator=_OP, oracle_symbol=_SYMBOL, **_COMMON),
    "nehari": _params(["symbol"], symbol=_SYMBOL, **_COMMON),
    "hsc_distance": _params(["symbol"], symbol=_SYMBOL, **_COMMON),
    "hartman_sarason": _params(["theta", "f"], theta=_THETA, f=_SYMBOL, **_COMMON),
    "sigma_u": _params(["theta"], theta=_THETA, circle_grid=_DIM, radial_levels=_DIM,
                       threshold=_POS, **_COMMON),
    "composition_dichotomy": _params(["symbol"], symbol=_SYMBOL, window_w=_DIM, **_COMMON),
    "peripheral_sup": _params(["p"], p=_SYMBOL, diagonal=_VECTOR, shift={"type": "boolean"},
                              grid=_DIM, **_COMMON),
    "normal_cesaro": _params(["atoms", "x"], atoms=_ATOMS, x=_VECTOR, **_COMMON),
    "tauberian": _params(["atoms", "x"], atoms=_ATOMS, x=_VECTOR, b_atoms=_VECTOR,
                         window_w=_DIM, **_COMMON),
    "averaged_power": _params(["atoms", "x", "k"], atoms=_ATOMS, x=_VECTOR,
                              k={"type": "integer", "minimum": 2}, n_iter=_DIM, **_COMMON),
    "gap_check": _params(["K", "T0"], K=_OP, T0=_OP, A=_OP, B=_OP, **_COMMON),
}

_EXPECT_VALUE = {"oneOf": [
    {"type": ["string", "boolean", "null", "number", "array"]},
    {"type": "object", "minProperties": 1, "additionalProperties": False, "properties": {
        "value": {}, "tol": _POS, "min": _NUM, "max": _NUM}},
]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["kind", "params"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "params": {"type": "object"},
        "output_dir": {"type": "string"},
        "expect": {"type": "object", "additionalProperties": _EXPECT_VALUE},
        "description": {"type": "string"},
    },
    "additionalProperties": False,
}


def _pointer(prefix, path) -> str:
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return prefix + "".join("/" + p for p in parts) or "/"


def _schema_errors(schema, instance, prefix="") -> list[str]:
    v = jsonschema.Draft202012Validator(schema)
    out = []
    for e in sorted(v.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path))):
        out.append(f"{_pointer(prefix, e.absolute_path) or '/'}: {e.message}")
    return out


def validate_config(obj) -> list[str]:
    """Schema errors as 'json/pointer: message' strings; empty when valid."""
    errs = _schema_errors(CONFIG_SCHEMA, obj)
    if errs:
        return errs
    schema = dict(PARAM_SCHEMAS[obj["kind"]])
    schema["$defs"] = _OPERATOR_DEFS
    return _schema_errors(schema, obj["params"], "/params")


@dataclass
class ExperimentConfig:
    kind: str
    params: dict
    output_dir: Optional[str] = None
    expect: dict = field(default_factory=dict)
    name: str = "experiment"
    digest: str = ""

    @classmethod
    def from_dict(cls, obj, name="experiment", digest="") -> "ExperimentConfig":
        errs = validate_config(obj)
        if errs:
            raise ConfigError(errs)
        return cls(obj["kind"], obj["params"], obj.get("output_dir"), obj.get("expect", {}), name, digest)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError([f"/: cannot read {path}: {e.strerror}"])
    try:
        obj = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError([f"/: invalid JSON: {e}"])
    return ExperimentConfig.from_dict(obj, path.stem, hashlib.sha256(raw).hexdigest())


# -- building inputs --------------------------------------------------------------

def _symbol(obj) -> TrigSymbol:
    return TrigSymbol.from_json(obj)


def _cvec(rows) -> np.ndarray:
    return np.array([complex(re, im) for re, im in rows])


def _atoms(rows) -> spc.MeasureAtoms:
    return spc.MeasureAtoms.from_json(rows)


def _operator_reach(spec) -> int:
    """Largest |Fourier index| of any Toeplitz/Hankel factor: the pad that makes products exact."""
    (key, val), = spec.items()
    if key in ("toeplitz", "hankel", "composition"):
        s = _symbol(val)
        return 0 if s.is_zero else max(abs(s.min_index), abs(s.max_index))
    if key in ("sum", "product"):
        return max(_operator_reach(v) for v in val)
    if key == "entries":
        return max((max(i, j) + 1 for i, j, _, _ in val), default=0)
    return 0


def build_operator(spec, dim: int) -> np.ndarray:
    """Dense dim x dim matrix of an operator spec; products are formed at a padded size and cropped."""
    (key, val), = spec.items()
    if key == "toeplitz":
        return toeplitz_matrix(_symbol(val), dim).entries
    if key == "hankel":
        return hankel_matrix(_symbol(val), dim).entries
    if key == "composition":
        return composition_matrix(_symbol(val), dim).entries
    if key == "identity":
        return complex(*val) * np.eye(dim, dtype=complex)
    if key == "entries":
        out = np.zeros((dim, dim), dtype=complex)
        for i, j, re, im in val:
            if i >= dim or j >= dim:
                raise ValueError(f"entry ({i}, {j}) outside dimension {dim}")
            out[i, j] += complex(re, im)
        return out
    if key == "sum":
        return sum(build_operator(v, dim) for v in val)
    if key == "product":
        pad = dim + len(val) * _operator_reach(spec)
        out = np.eye(pad, dtype=complex)
        for v in val:
            out = out @ build_operator(v, pad)
        return out[:dim, :dim].copy()
    raise ValueError(f"unknown operator key {key!r}")


def resolve_params(cfg: ExperimentConfig) -> dict:
    """Params with the central defaults filled in (only for keys the kind accepts)."""
    allowed = PARAM_SCHEMAS[cfg.kind]["properties"]
    out = dict(cfg.params)
    for k, v in {**DEFAULTS, **EXTRA_DEFAULTS}.items():
        if k in allowed and k not in out:
            out[k] = v
    return out


# -- experiment kinds -------------------------------------------------------------

def _trace_table(power: asy.SequenceTrace, cesaro: Optional[asy.SequenceTrace] = None):
    # cesaro_norm on row n is ||C_{n+1}||, the mean of X_0..X_n
    cn = {} if cesaro is None else {s.n - 1: s.norm for s in cesaro.steps}
    rows = [(s.n, s.norm, s.increment, cn.get(s.n), int(power.truncation_warning)) for s in power.steps]
    return (["n", "norm", "increment", "cesaro_norm", "truncation_warning"], rows)


def _distance_table(pairs):
    rows, prev = [], None
    for n, d in pairs:
        rows.append((n, d, 0.0 if prev is None else max(0.0, d - prev)))
        prev = d
    return (["n", "dist", "violation"], rows)


def _big_entries(M, cap=32, eps=1e-12):
    idx = np.argwhere(np.abs(M) > eps)[:cap]
    return [[int(i), int(j), M[i, j].real, M[i, j].imag] for i, j in idx]


def _stabilizes_from(trace: asy.SequenceTrace) -> Optional[int]:
    inc = trace.increments
    zero = [i for i in range(1, len(inc)) if np.all(inc[i:] == 0.0)]
    return trace.steps[zero[0] - 1].n if zero else None


def _run_toeplitz_asymptotics(p):
    phi, N, n_max = _symbol(p["symbol"]), p["N"], p["n_max"]
    big = toeplitz_matrix(phi, N + n_max)
    trace = asy.window_sequence(big, N, n_max)
    ref = toeplitz_matrix(phi, N).entries
    dev = max(float(np.abs(big.entries[n:n + N, n:n + N] - ref).max()) for n in range(n_max + 1))
    verdict = asy.detect_convergence(trace, p["tol"], p["window_w"])
    return {
        "status": verdict.status,
        "window_max_deviation": dev,
        "fixed_point_residual": asy.shift_fixed_point_residual(ref),
        "verdict": verdict.to_json(),
    }, {"trace": _trace_table(trace)}


def _run_feintuch(p):
    N, n_max = p["N"], p["n_max"]
    pad = 2 * _operator_reach(p["operator"]) + 1
    big = build_operator(p["operator"], N + n_max + pad)
    trace = asy.window_sequence(big, N, n_max)
    verdict = asy.detect_convergence(trace, p["tol"], p["window_w"])
    res = {"status": verdict.status, "verdict": verdict.to_json(),
           "stabilizes_from": _stabilizes_from(trace)}
    if verdict.converged:
        dec = asy.asymptotic_decomposition(trace, big, verdict=verdict)
        res.update(dec.to_json())
        res["K_entries"] = _big_entries(dec.K)
        res["reconstruction_residual"] = float(np.abs(dec.T0 + dec.K - big[:N, :N]).max())
        if "toeplitz_symbol" in p:
            ref = toeplitz_matrix(_symbol(p["toeplitz_symbol"]), N).entries
            res["T0_residual"] = float(np.abs(dec.T0 - ref).max())
    return res, {"trace": _trace_table(trace)}


def _run_ess_norm(p):
    N, n_max = p["N"], p["n_max"]
    pad = _operator_reach(p["operator"]) + 1
    big = build_operator(p["operator"], N + n_max + pad)
    est, trace = asy.ess_norm_estimate(big, N, n_max)
    res = {"estimate": est, **trace.meta}
    if "oracle_symbol" in p:
        oracle = sup_norm_grid(_symbol(p["oracle_symbol"]))
        res.update({"oracle": oracle, "abs_error": abs(est - oracle)})
    return res, {"trace": _trace_table(trace)}


def _run_nehari(p):
    phi = _symbol(p["symbol"])
    order = dst.hankel_order(phi)
    return {"dist": dst.dist_hinf(phi, order), "hankel_dim": order}, {}


def _run_hsc(p):
    limit, trace = dst.dist_hinf_plus_c(_symbol(p["symbol"]), n_max=p["n_max"])
    return {
        "limit_estimate": limit,
        "monotone_violation": trace.monotone_violation,
        "slow_decay": trace.slow_decay,
        "per_n": [d for _, d in trace.per_n],
    }, {"distances": _distance_table(trace.per_n)}


def _run_hartman_sarason(p):
    theta = BlaschkeSpec.from_json(p["theta"])
    rep = dst.hartman_sarason_report(theta, _symbol(p["f"]), n_max=p["n_max"])
    return rep.to_json(), {"distances": _distance_table(list(enumerate(rep.hankel_chain)))}


def _run_sigma_u(p):
    theta = BlaschkeSpec.from_json(p["theta"])
    rep = dst.sigma_u_estimate(theta, p["circle_grid"], p.get("radial_levels"), p["threshold"])
    out = rep.to_json()
    out["n_flagged"] = len(rep.flagged_points)
    return out, {}


def _run_composition(p):
    phi, N, n_max = _symbol(p["symbol"]), p["N"], p["n_max"]
    power = asy.composition_window_sequence(phi, N, n_max, retain=None)
    ces = asy.cesaro_trace(power)
    pv = asy.detect_convergence(power, p["tol"], p["window_w"])
    cv = asy.detect_convergence(ces, p["tol"], p["window_w"])
    res = {
        "status": cv.status,
        "power": pv.to_json(),
        "cesaro": cv.to_json(),
        "persistent_gap": cv.evidence["persistent_gap"],
        "limit_norm": operator_norm(cv.limit) if cv.converged else None,
    }
    return res, {"trace": _trace_table(power, ces)}


def _run_peripheral(p):
    poly = _symbol(p["p"])
    if p.get("shift"):
        rep = dst.shift_peripheral_check(poly, N=p["N"], n_max=min(p["n_max"], 4))
    elif "diagonal" in p:
        rep = dst.peripheral_sup_check(np.diag(_cvec(p["diagonal"])), poly, n_max=p["n_max"])
    else:
        raise ValueError("peripheral_sup needs 'diagonal' or 'shift': true")
    out = rep.to_json()
    out["trace_spread"] = float(max(rep.trace) - min(rep.trace))
    return out, {"trace": (["n", "norm"], list(enumerate(rep.trace)))}


def _run_normal_cesaro(p):
    atoms, x = _atoms(p["atoms"]), _cvec(p["x"])
    mu = spc.mu_from_atoms(atoms, x)
    limit = spc.cesaro_limit_atoms(atoms, x)
    verdict = spc.power_convergence_verdict(atoms, x, tol=min(p["tol"], 1e-12))
    local = spc.local_spectrum_support(atoms, x)
    circle = atoms.on_circle & (mu.weights > 0)
    kt = bool(np.all(atoms.at_one[circle]))
    res = {
        "status": "converged" if verdict.converges else "non_convergent",
        "mu": mu.to_json(),
        "mass": mu.total_mass,
        "norm_squared": spc.vector_norm(atoms, x) ** 2,
        "cesaro_limit": limit,
        "power": verdict.to_json(),
        "local_spectrum": local.to_json(),
        "katznelson_tzafriri": {"applies": kt,
                                "increment_n1000": spc.increment_norm(atoms, x, 1000) if kt else None},
    }
    return res, {}


def _run_tauberian(p):
    atoms, x = _atoms(p["atoms"]), _cvec(p["x"])
    A = np.diag(atoms.locations)
    B = np.diag(_cvec(p["b_atoms"])) if "b_atoms" in p else np.eye(len(atoms), dtype=complex)
    if B.shape != A.shape:
        raise ValueError("b_atoms must match atoms in length")
    T = np.diag(x)
    power = asy.conjugation_sequence(A, T, B, len(atoms), p["n_max"], retain=None)
    ces = asy.cesaro_trace(power)
    rep = asy.tauberian_report(power, ces, p["tol"], p["window_w"], A, B)
    out = rep.to_json()
    out["status"] = "defect" if rep.defect else ("holds" if rep.hypotheses_hold else "hypothesis_fails")
    return out, {"trace": _trace_table(power, ces)}


def _run_averaged_power(p):
    atoms, x = _atoms(p["atoms"]), _cvec(p["x"])
    r = spc.averaged_power_check(atoms, x, p["k"], p["n_iter"])
    S = asy.averaged_operator(np.diag(atoms.locations), p["k"]).entries
    diag_gap = float(np.abs(np.diag(S) - spc.averaging_polynomial(atoms.locations, p["k"])).max())
    return {
        "power_vs_cesaro": r.power_vs_cesaro,
        "power_vs_analytic": r.power_vs_analytic,
        "limit": r.power_limit,
        "analytic_limit": r.analytic_limit,
        "matrix_path_gap": diag_gap,
    }, {}


def _run_gap_check(p):
    N = p["N"]
    K, T0 = build_operator(p["K"], N), build_operator(p["T0"], N)
    A = build_operator(p["A"], N) if "A" in p else None
    B = build_operator(p["B"], N) if "B" in p else None
    return asy.perturbation_gap_check(K, T0, A, B).to_json(), {}


RUNNERS = {
    "toeplitz_asymptotics": _run_toeplitz_asymptotics,
    "feintuch_decompose": _run_feintuch,
    "ess_norm": _run_ess_norm,
    "nehari": _run_nehari,
    "hsc_distance": _run_hsc,
    "hartman_sarason": _run_hartman_sarason,
    "sigma_u": _run_sigma_u,
    "composition_dichotomy": _run_composition,
    "peripheral_sup": _run_peripheral,
    "normal_cesaro": _run_normal_cesaro,
    "tauberian": _run_tauberian,
    "averaged_power": _run_averaged_power,
    "gap_check": _run_gap_check,
}


# -- expectations -----------------------------------------------------------------

def _lookup(obj, dotted: str):
    cur = obj
    for part in dotted.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict):
            cur = cur[part]
        else:
            raise KeyError(dotted)
    return cur


def _close(actual, expected, tol) -> bool:
    if isinstance(expected, list):
        return isinstance(actual, list) and len(actual) == len(expected) and all(
            _close(a, e, tol) for a, e in zip(actual, expected))
    if isinstance(expected, bool) or expected is None or isinstance(expected, str):
        return actual == expected
    if isinstance(actual, bool) or not isinstance(actual, (int, float)):
        return False
    return abs(actual - expected) <= tol


def check_expect(result: dict, expect: dict, default_tol: float) -> list[dict]:
    """One record per expectation: {"key", "expected", "actual", "ok"}."""
    out = []
    for key in sorted(expect):
        spec = expect[key]
        try:
            actual = _lookup(result, key)
        except (KeyError, IndexError, ValueError):
            out.append({"key": key, "expected": spec, "actual": None, "ok": False})
            continue
        if isinstance(spec, dict):
            ok = True
            if "value" in spec:
                ok &= _close(actual, spec["value"], spec.get("tol", default_tol))
            if "min" in spec:
                ok &= isinstance(actual, (int, float)) and actual >= spec["min"]
            if "max" in spec:
                ok &= isinstance(actual, (int, float)) and actual <= spec["max"]
        else:
            ok = _close(actual, spec, default_tol)
        out.append({"key": key, "expected": spec, "actual": actual, "ok": bool(ok)})
    return out


# -- output -----------------------------------------------------------------------

def to_plain(obj):
    """JSON-ready copy: numpy scalars/arrays unwrapped, complex as [re, im], non-finite as null."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_plain(obj.real), to_plain(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    return "" if math.isnan(x) else repr(x)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(results, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(to_plain(results), sort_keys=True, indent=2, allow_nan=False) + "\n"
    header, rows = results
    if fmt == "csv":
        lines = [",".join(header)] + [",".join(_cell(v) for v in r) for r in rows]
    elif fmt == "gnuplot-dat":
        lines = ["# " + " ".join(header)]
        lines += [" ".join(_cell(v) if _cell(v) else "NaN" for v in r) for r in rows]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return "\n".join(lines) + "\n"


def emit_report(results, fmt: str, path) -> Path:
    """Write a report (json) or a (header, rows) table (csv, gnuplot-dat) atomically."""
    path = Path(path)
    try:
        _atomic_write(path, render(results, fmt))
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e
    return path


# -- running ------------------------------------------------------------------------

@dataclass
class RunOutcome:
    name: str
    code: int
    message: str
    files: list[str] = field(default_factory=list)


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunOutcome:
    out = Path(out_dir if out_dir is not None else (cfg.output_dir or Path("out") / cfg.name))
    params = resolve_params(cfg)
    try:
        result, tables = RUNNERS[cfg.kind](params)
    except (ValueError, KeyError) as e:
        return RunOutcome(cfg.name, EXIT_INPUT, f"input error: {e}")
    except RuntimeError as e:
        return RunOutcome(cfg.name, EXIT_INPUT, f"computation failed: {e}")
    result = to_plain(result)
    checks = check_expect(result, cfg.expect, params.get("expect_tol", EXTRA_DEFAULTS["expect_tol"]))
    ok = all(c["ok"] for c in checks)
    report = {
        "kind": cfg.kind,
        "statement": STATEMENTS[cfg.kind],
        "config_sha256": cfg.digest,
        "defaults": {**DEFAULTS, **EXTRA_DEFAULTS},
        "params": params,
        "result": result,
        "expect": checks,
        "outcome": "ok" if ok else "mismatch",
    }
    files = [emit_report(report, "json", out / "report.json")]
    for name, table in sorted(tables.items()):
        files.append(emit_report(table, "csv", out / f"{name}.csv"))
        files.append(emit_report(table, "gnuplot-dat", out / f"{name}.dat"))
    if ok:
        return RunOutcome(cfg.name, EXIT_OK, "ok", [str(f) for f in files])
    bad = ", ".join(f"{c['key']}={c['actual']!r} (expected {c['expected']!r})" for c in checks if not c["ok"])
    return RunOutcome(cfg.name, EXIT_MISMATCH, f"expect mismatch: {bad}", [str(f) for f in files])


def run_path(path, out_dir=None) -> RunOutcome:
    try:
        cfg = load_config(path)
    except ConfigError as e:
        return RunOutcome(Path(path).stem, EXIT_INPUT, "invalid config: " + "; ".join(e.errors))
    try:
        return run_experiment(cfg, out_dir)
    except OSError as e:
        return RunOutcome(cfg.name, EXIT_INPUT, str(e))


def _run_many(jobs_list, jobs: int) -> list[RunOutcome]:
    if jobs <= 1 or len(jobs_list) <= 1:
        return [run_path(p, o) for p, o in jobs_list]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(run_path, *zip(*jobs_list)))


def _report(outcomes, stream) -> int:
    for o in outcomes:
        tag = {EXIT_OK: "PASS", EXIT_MISMATCH: "FAIL", EXIT_INPUT: "ERROR"}[o.code]
        print(f"{tag} {o.name}: {o.message}", file=stream)
    codes = {o.code for o in outcomes}
    # an input error outranks a mismatch: something could not be evaluated at all
    for code in (EXIT_INPUT, EXIT_MISMATCH):
        if code in codes:
            return code
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="opseq", description="Operator-sequence experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one or more configs")
    r.add_argument("configs", nargs="+")
    r.add_argument("--out", default=None, help="output directory (per config when several)")
    r.add_argument("--jobs", type=int, default=1)
    v = sub.add_parser("validate", help="schema-check a config")
    v.add_argument("config")
    s = sub.add_parser("suite", help="run every *.json config in a directory")
    s.add_argument("dir")
    s.add_argument("--out", default=None)
    s.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)

    if args.cmd == "validate":
        try:
            cfg = load_config(args.config)
        except ConfigError as e:
            for msg in e.errors:
                print(msg, file=sys.stderr)
            return EXIT_INPUT
        print(f"valid: {cfg.kind}")
        return EXIT_OK

    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    if args.cmd == "run":
        paths = args.configs
        if args.out is None:
            outs = [None] * len(paths)
        elif len(paths) == 1:
            outs = [args.out]
        else:
            outs = [str(Path(args.out) / Path(p).stem) for p in paths]
        return _report(_run_many(list(zip(paths, outs)), args.jobs), sys.stdout)

    d = Path(args.dir)
    if not d.is_dir():
        print(f"not a directory: {d}", file=sys.stderr)
        return EXIT_INPUT
    paths = sorted(str(p) for p in d.glob("*.json"))
    base = Path(args.out) if args.out else d / "out"
    outcomes = _run_many([(p, str(base / Path(p).stem)) for p in paths], args.jobs)
    code = _report(outcomes, sys.stdout)
    n_ok = sum(o.code == EXIT_OK for o in outcomes)
    print(f"{n_ok}/{len(outcomes)} passed")
    return code


if __name__ == "__main__":
    sys.exit(main())
