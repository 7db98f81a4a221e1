"""Operator sequences X_n = A^n T B^n and their Cesaro means.

Two evaluation paths:

* ``window_sequence`` realizes S*^n T S^n exactly as the shifted principal block
  T[n:n+N, n:n+N] of a larger stored matrix. Use it for the shift pair; powers of
  a truncated shift are nilpotent and give wrong answers.
* ``conjugation_sequence`` iterates X -> A X B at a padded dimension for general
  (A, B) and reports the leading block, with a heuristic truncation flag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import OperatorMatrix, as_array, composition_matrix, operator_norm, top_singular_pair

DEFAULT_TOL = 1e-6
DEFAULT_WINDOW = 8
NONCONV_FACTOR = 10.0
NONCONV_QUOTA = 0.8
DEFAULT_RETAIN = 64
CERT_TOL = 1e-10

CONVERGED = "converged"
NON_CONVERGENT = "non_convergent"
INDETERMINATE = "indeterminate"


@dataclass
class Step:
    n: int
    matrix: Optional[np.ndarray]
    norm: float
    increment: float  # ||X_n - X_{n-1}||; nan for the first step


@dataclass
class SequenceTrace:
    kind: str  # "power" | "cesaro"
    steps: list[Step] = field(default_factory=list)
    window_dim: int = 0
    padding: int = 0
    truncation_warning: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def norms(self) -> np.ndarray:
        return np.array([s.norm for s in self.steps])

    @property
    def increments(self) -> np.ndarray:
        return np.array([s.increment for s in self.steps])

    @property
    def fully_retained(self) -> bool:
        return all(s.matrix is not None for s in self.steps)

    def matrix(self, n: int) -> Optional[np.ndarray]:
        for s in self.steps:
            if s.n == n:
                return s.matrix
        raise KeyError(n)

    def rows(self):
        return [(s.n, s.norm, s.increment) for s in self.steps]


class _Recorder:
    """Appends steps, computes norms with warm starts, enforces the retention cap."""

    def __init__(self, trace: SequenceTrace, retain: Optional[int]):
        self.trace = trace
        self.retain = retain
        self.prev: Optional[np.ndarray] = None
        self.v = None

    def push(self, n: int, X: np.ndarray):
        X = np.array(X, dtype=complex)
        X.flags.writeable = False
        nrm, self.v = _norm_pair(X, self.v)
        inc = float("nan") if self.prev is None else _norm(X - self.prev)
        self.trace.steps.append(Step(n, X, nrm, inc))
        self.prev = X
        if self.retain is not None:
            kept = [s for s in self.trace.steps if s.matrix is not None]
            for s in kept[: max(0, len(kept) - self.retain)]:
                s.matrix = None


def _norm(X) -> float:
    return operator_norm(X)


def _norm_pair(X, start):
    if not np.any(X):
        return 0.0, start
    sigma, v = top_singular_pair(X, start=start)
    return sigma, v


# -- sequence builders -----------------------------------------------------------

def window_sequence(T_big, N: int, n_max: int, retain: Optional[int] = DEFAULT_RETAIN,
                    rows: Optional[int] = None) -> SequenceTrace:
    """Windows W_n = T_big[n:n+R, n:n+N], n = 0..n_max, with R = ``rows`` (default N).

    With R = N this is the leading N x N block of S*^n T S^n. A taller window
    (R > N) is the exact R x N block of S*^n T S^n P_N, which keeps operators
    that push mass downward (composition maps) from leaving the block once n >= N.
    """
    A = as_array(T_big)
    R = N if rows is None else int(rows)
    if R < N:
        raise ValueError("rows must be >= N")
    if A.shape[0] < R + n_max:
        raise ValueError(f"T_big has dim {A.shape[0]} < rows + n_max = {R + n_max}")
    trace = SequenceTrace("power", window_dim=N, padding=A.shape[0] - R - n_max,
                          meta={"path": "window", "rows": R})
    rec = _Recorder(trace, retain)
    for n in range(n_max + 1):
        rec.push(n, A[n:n + R, n:n + N])
    return trace


def composition_window_sequence(phi, N: int, n_max: int,
                                retain: Optional[int] = None) -> SequenceTrace:
    """Tall windows of S*^n C_phi S^n restricted to the first N inputs.

    Column k of C_phi holds the coefficients of phi^k, which may sit far below row k
    (phi = z^2 sends e_k to e_{2k}), so R = n_max + 2N rows are kept; this is exact
    whenever phi^k has no coefficients past 2k, i.e. deg phi <= 2, and otherwise
    exact up to the stored rows.
    """
    R = n_max + 2 * N
    C = composition_matrix(phi, R + n_max)
    return window_sequence(C, N, n_max, retain=retain, rows=R)


def _coupling_norm(A: np.ndarray, B: np.ndarray, N: int) -> float:
    """Size of the entries that feed the leading block from outside it."""
    if A.shape[0] == N:
        return 0.0
    return max(float(np.abs(A[:N, N:]).max()), float(np.abs(B[N:, :N]).max()))


def conjugation_sequence(A, T, B, N: int, n_max: int,
                         retain: Optional[int] = DEFAULT_RETAIN) -> SequenceTrace:
    """Padded iteration X_{n+1} = A X_n B at the common dim M, leading N x N block reported."""
    A, T, B = as_array(A), as_array(T), as_array(B)
    M = T.shape[0]
    if A.shape != (M, M) or B.shape != (M, M):
        raise ValueError("A, T, B must share one square dimension")
    if N > M or n_max < 1:
        raise ValueError("need N <= M and n_max >= 1")
    coupling = _coupling_norm(A, B, N)
    trace = SequenceTrace("power", window_dim=N, padding=M - N,
                          truncation_warning=coupling > 1e-8,
                          meta={"path": "padded", "coupling": coupling})
    rec = _Recorder(trace, retain)
    X = T.copy()
    for n in range(n_max + 1):
        rec.push(n, X[:N, :N])
        if n < n_max:
            X = A @ X @ B
    return trace


def cesaro_trace(t: SequenceTrace) -> SequenceTrace:
    """C_n = (1/n) sum_{i<n} X_i for n = 1..len(t), via C_n = ((n-1) C_{n-1} + X_{n-1}) / n."""
    if t.kind != "power":
        raise ValueError("Cesaro means are taken of a power trace")
    if not t.fully_retained:
        raise ValueError("Cesaro means need every matrix retained (use retain=None)")
    out = SequenceTrace("cesaro", window_dim=t.window_dim, padding=t.padding,
                        truncation_warning=t.truncation_warning, meta=dict(t.meta))
    rec = _Recorder(out, None)
    C = np.zeros_like(t.steps[0].matrix)
    for k, s in enumerate(t.steps, start=1):
        C = ((k - 1) * C + s.matrix) / k
        rec.push(k, C)
    return out


# -- convergence ---------------------------------------------------------------

@dataclass
class ConvergenceVerdict:
    status: str
    limit: Optional[np.ndarray]
    tol: float
    evidence: dict

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def to_json(self) -> dict:
        return {"status": self.status, "tol": self.tol, "evidence": self.evidence}


def _accelerated(t: SequenceTrace) -> list[tuple[int, np.ndarray]]:
    """Cesaro sequence with the 1/n transient removed: (n C_n - m C_m)/(n - m), m = n // 2.

    This is the mean of X_i over m <= i < n; it has the same limit as C_n whenever
    C_n converges, without the O(1/n) lag that a summable transient leaves in C_n.
    """
    by_n = {s.n: s.matrix for s in t.steps}
    out = []
    for s in t.steps:
        n, m = s.n, s.n // 2
        if n < 2:
            continue
        out.append((n, (n * by_n[n] - m * by_n[m]) / (n - m)))
    return out


def detect_convergence(t: SequenceTrace, tol: float = DEFAULT_TOL, window_w: int = DEFAULT_WINDOW,
                       accelerate: bool = True) -> ConvergenceVerdict:
    """Decide convergence in operator norm from the tail of a trace.

    converged: all pairwise deviations among the last ``window_w`` terms are <= tol.
    non_convergent: increments >= 10 tol on at least 80% of the last ``window_w`` steps.
    Otherwise indeterminate. Cesaro traces are judged on the accelerated means
    (see ``_accelerated``) unless ``accelerate`` is False.
    """
    if len(t.steps) < 2 * window_w:
        raise ValueError(f"need at least {2 * window_w} steps, have {len(t.steps)}")
    if t.kind == "cesaro" and accelerate:
        seq = _accelerated(t)
    else:
        seq = [(s.n, s.matrix) for s in t.steps]
    tail = seq[-window_w:]
    if any(X is None for _, X in tail):
        raise ValueError("the decision window needs retained matrices")
    mats = [X for _, X in tail]
    devs = [_norm(mats[i] - mats[j]) for i in range(len(mats)) for j in range(i + 1, len(mats))]
    max_dev = max(devs) if devs else 0.0
    prev = seq[-window_w - 1][1]
    incs = []
    for X in mats:
        incs.append(_norm(X - prev) if prev is not None else float("nan"))
        prev = X
    by_n = dict(seq)
    gaps = []
    for n, X in tail:
        Y = by_n.get(n // 2)
        if Y is not None:
            gaps.append(_norm(X - Y))
    evidence = {
        "window": [n for n, _ in tail],
        "max_pairwise_deviation": max_dev,
        "increments": incs,
        "persistent_gap": min(gaps) if len(gaps) == len(tail) else None,
        "accelerated": t.kind == "cesaro" and accelerate,
    }
    if max_dev <= tol:
        return ConvergenceVerdict(CONVERGED, mats[-1], tol, evidence)
    big = sum(1 for x in incs if x >= NONCONV_FACTOR * tol)
    if big >= NONCONV_QUOTA * window_w:
        return ConvergenceVerdict(NON_CONVERGENT, None, tol, evidence)
    return ConvergenceVerdict(INDETERMINATE, None, tol, evidence)


# -- decomposition and essential norm ------------------------------------------

@dataclass
class DecompositionResult:
    T0: np.ndarray
    K: np.ndarray
    fixed_point_residual: float
    compactness_score: float

    def to_json(self) -> dict:
        return {
            "fixed_point_residual": self.fixed_point_residual,
            "compactness_score": self.compactness_score,
            "norm_T0": _norm(self.T0),
            "norm_K": _norm(self.K),
        }


def shift_fixed_point_residual(T0) -> float:
    """||S* T0 S - T0|| on the common (N-1) x (N-1) block: zero iff T0 is Toeplitz."""
    T0 = as_array(T0)
    return _norm(T0[1:, 1:] - T0[:-1, :-1])


def asymptotic_decomposition(t: SequenceTrace, T, A=None, B=None,
                             verdict: Optional[ConvergenceVerdict] = None) -> DecompositionResult:
    """Split T = T0 + K with T0 the limit of the trace (A T0 B = T0) and K = T - T0.

    A = B = None means the shift pair, checked through window invariance.
    """
    if verdict is None:
        verdict = detect_convergence(t)
    if not verdict.converged:
        raise ValueError(f"sequence is {verdict.status}; no decomposition")
    N = t.window_dim
    T0 = np.array(verdict.limit)
    K = as_array(T)[:N, :N] - T0
    if A is None and B is None:
        resid = shift_fixed_point_residual(T0)
    else:
        Aa, Ba = as_array(A)[:N, :N], as_array(B)[:N, :N]
        resid = _norm(Aa @ T0 @ Ba - T0)
    h = N // 2
    return DecompositionResult(T0, K, resid, _norm(K[h:, h:]))


def ess_norm_estimate(T_big, N: int, n_max: int, retain: Optional[int] = 2) -> tuple[float, SequenceTrace]:
    """Estimate ||T + K(H)|| as the limit of the window norms ||S*^n T S^n||."""
    trace = window_sequence(T_big, N, n_max, retain=retain)
    norms = trace.norms
    q = max(1, len(norms) // 4)
    tail = norms[-q:]
    trace.meta.update({
        "tail_mean": float(tail.mean()),
        "tail_spread": float(tail.max() - tail.min()),
        "monotone": bool(np.all(np.diff(norms) <= 1e-12)),
    })
    return float(norms[-1]), trace


# -- Tauberian and averaging checks ---------------------------------------------

def spectral_region_certificate(A, B) -> Optional[str]:
    """For triangular A, B: which of the half-plane quadrant hypotheses holds, if any.

    D+ = {Re z >= 1, Im z >= 0}, D- = {Re z >= 1, Im z <= 0}; returns "A in D+, B in D-",
    "A in D-, B in D+", or None.
    """
    A, B = as_array(A), as_array(B)
    for M in (A, B):
        if not (np.allclose(np.tril(M, -1), 0) or np.allclose(np.triu(M, 1), 0)):
            raise ValueError("spectral certificate needs triangular (or diagonal) operators")
    sa, sb = np.diag(A), np.diag(B)

    def inside(s, sign):
        return bool(np.all(s.real >= 1) and np.all(sign * s.imag >= 0))

    if inside(sa, 1) and inside(sb, -1):
        return "A in D+, B in D-"
    if inside(sa, -1) and inside(sb, 1):
        return "A in D-, B in D+"
    return None


@dataclass
class TauberianReport:
    increments_vanish: bool
    cesaro_converged: bool
    power_converged: bool
    same_limit: Optional[bool]
    limit_gap: Optional[float]
    spectral_certificate: Optional[str] = None

    @property
    def hypotheses_hold(self) -> bool:
        return self.increments_vanish and self.cesaro_converged

    @property
    def conclusion_holds(self) -> bool:
        return self.power_converged and bool(self.same_limit)

    @property
    def defect(self) -> bool:
        # hypotheses true but conclusion false can only be an implementation fault
        return self.hypotheses_hold and not self.conclusion_holds

    def to_json(self) -> dict:
        return {
            "increments_vanish": self.increments_vanish,
            "cesaro_converged": self.cesaro_converged,
            "power_converged": self.power_converged,
            "same_limit": self.same_limit,
            "limit_gap": self.limit_gap,
            "hypotheses_hold": self.hypotheses_hold,
            "conclusion_holds": self.conclusion_holds if self.hypotheses_hold else None,
            "defect": self.defect,
            "spectral_certificate": self.spectral_certificate,
        }


def tauberian_report(power: SequenceTrace, cesaro: SequenceTrace, tol: float = DEFAULT_TOL,
                     window_w: int = DEFAULT_WINDOW, A=None, B=None) -> TauberianReport:
    incs = power.increments[-window_w:]
    vanish = bool(np.all(incs <= tol))
    pv = detect_convergence(power, tol, window_w)
    cv = detect_convergence(cesaro, tol, window_w)
    gap = None
    same = None
    if pv.converged and cv.converged:
        gap = _norm(pv.limit - cv.limit)
        same = gap <= tol
    cert = spectral_region_certificate(A, B) if A is not None and B is not None else None
    return TauberianReport(vanish, cv.converged, pv.converged, same, gap, cert)


def averaged_operator(T, k: int) -> OperatorMatrix:
    """(I + T + ... + T^{k-1}) / k."""
    if k < 2:
        raise ValueError("k must be >= 2")
    A = as_array(T)
    acc = np.eye(A.shape[0], dtype=complex)
    P = np.eye(A.shape[0], dtype=complex)
    for _ in range(k - 1):
        P = P @ A
        acc = acc + P
    src = T if isinstance(T, OperatorMatrix) else OperatorMatrix(A)
    return src.with_entries(acc / k, meta=f"average_k{k}")


@dataclass
class GapReport:
    status: str  # "holds" | "violated" | "vacuous"
    ratio: Optional[float]
    norm_sum: float
    norm_K: float
    certificate_residual: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def perturbation_gap_check(K, T0, A=None, B=None, tol: float = 1e-9) -> GapReport:
    """Check ||K + T0|| >= ||K|| / 2 for T0 with A T0 B = T0.

    A = B = None certifies T0 against the shift pair (Toeplitz structure).
    """
    K, T0 = as_array(K), as_array(T0)
    if A is None and B is None:
        resid = shift_fixed_point_residual(T0)
    else:
        resid = _norm(as_array(A) @ T0 @ as_array(B) - T0)
    if resid > CERT_TOL:
        raise ValueError(f"T0 is not a fixed point: residual {resid:.3g}")
    nk = _norm(K)
    ns = _norm(K + T0)
    if nk == 0.0:
        return GapReport("vacuous", None, ns, nk, resid)
    ratio = ns / nk
    return GapReport("holds" if ratio >= 0.5 - tol else "violated", ratio, ns, nk, resid)
