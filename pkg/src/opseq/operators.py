"""Finite matrices for the concrete operators: Toeplitz, Hankel, composition,
model-space compressions, rank-one and diagonal normal operators.

Index conventions (rows i, columns j, both from 0):

* Toeplitz ``T_phi``:   entry ``phi_hat(i - j)``
* Hankel ``H_phi``:     entry ``phi_hat(-(i + j + 1))``
* composition ``C_phi``: column k holds the Taylor coefficients of ``phi**k``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .symbols import (
    BlaschkeSpec,
    TrigSymbol,
    _majorant_tail,
    required_order,
    sup_norm_grid,
    truncated_mul,
)

SEED = 0x5EED
DEFAULT_REL_TOL = 1e-10
DEFAULT_MAX_ITER = 5000
MODEL_TAIL_TOL = 1e-12

HARDY = "hardy_truncation"
MODEL = "model_space"
ATOMIC = "atomic"


@dataclass(frozen=True)
class OperatorMatrix:
    entries: np.ndarray
    basis_tag: str = HARDY
    basis: Any = None
    meta: str = ""

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator matrix has non-finite entries")
        if self.basis_tag == MODEL and self.basis is not None and self.basis.degree != a.shape[0]:
            raise ValueError("model-space matrix dimension must equal deg(theta)")
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def with_entries(self, entries, meta: str | None = None) -> "OperatorMatrix":
        return OperatorMatrix(entries, self.basis_tag, self.basis, self.meta if meta is None else meta)

    def to_json(self) -> dict:
        flat = self.entries.ravel()
        return {
            "dim": self.dim,
            "basis_tag": self.basis_tag,
            "meta": self.meta,
            "entries": [[float(v.real), float(v.imag)] for v in flat],
        }

    @classmethod
    def from_json(cls, obj) -> "OperatorMatrix":
        n = int(obj["dim"])
        vals = np.array([complex(re, im) for re, im in obj["entries"]]).reshape(n, n)
        return cls(vals, obj.get("basis_tag", HARDY), None, obj.get("meta", ""))

    def to_csv(self) -> str:
        """Row-major dump: one matrix row per line, ``re,im`` pairs."""
        lines = []
        for row in self.entries:
            lines.append(",".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
        return "\n".join(lines) + "\n"


def as_array(T) -> np.ndarray:
    if isinstance(T, OperatorMatrix):
        return T.entries
    return np.asarray(T, dtype=complex)


# -- builders -------------------------------------------------------------------

def toeplitz_matrix(phi: TrigSymbol, N: int) -> OperatorMatrix:
    if N < 1:
        raise ValueError("N must be >= 1")
    col = phi.coef_range(0, N)
    row = phi.coef_range(0, -N, -1)
    return OperatorMatrix(sla.toeplitz(col, row), HARDY, meta="toeplitz")


def hankel_matrix(phi: TrigSymbol, N: int) -> OperatorMatrix:
    if N < 1:
        raise ValueError("N must be >= 1")
    # entry (i, j) = phi_hat(-(i + j + 1)); i + j runs over 0 .. 2N - 2
    anti = phi.coef_range(-1, -2 * N, -1)
    return OperatorMatrix(sla.hankel(anti[:N], anti[N - 1:]), HARDY, meta="hankel")


def composition_matrix(phi: TrigSymbol, N: int) -> OperatorMatrix:
    """Matrix of f -> f o phi on the first N Taylor coefficients (phi an analytic polynomial)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not phi.is_analytic:
        raise ValueError("composition symbol must be analytic")
    if sup_norm_grid(phi, max(64, 8 * (phi.max_index + 1))) > 1 + 1e-12 or abs(phi.coef(0)) >= 1:
        raise ValueError("composition symbol is not certified as a self-map of the disk")
    taylor = phi.coef_range(0, N)
    out = np.zeros((N, N), dtype=complex)
    power = np.zeros(N, dtype=complex)
    power[0] = 1.0
    for k in range(N):
        out[:, k] = power
        power = truncated_mul(power, taylor, N)
    return OperatorMatrix(out, HARDY, meta="composition")


def shift_matrix(N: int) -> OperatorMatrix:
    """Leading N x N block of the unilateral shift (nilpotent at finite size)."""
    return OperatorMatrix(np.eye(N, k=-1), HARDY, meta="shift")


def rank_one_matrix(x, y) -> OperatorMatrix:
    """x (x) y : v -> <v, y> x."""
    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    if x.size != y.size:
        raise ValueError("rank-one factors must have equal length")
    return OperatorMatrix(np.outer(x, np.conj(y)), HARDY, meta="rank_one")


def basis_vector(N: int, k: int = 0) -> np.ndarray:
    e = np.zeros(N, dtype=complex)
    e[k] = 1.0
    return e


def diagonal_from_atoms(atoms) -> OperatorMatrix:
    z = np.asarray(atoms.locations, dtype=complex)
    if z.size < 1:
        raise ValueError("need at least one atom")
    return OperatorMatrix(np.diag(z), ATOMIC, atoms, meta="multiplication")


# -- model spaces ----------------------------------------------------------------

@dataclass(frozen=True)
class ModelBasis:
    """Takenaka-Malmquist basis of the model space for a finite Blaschke product.

    Column j of ``coeff_matrix`` holds Taylor coefficients 0..M of
    sqrt(1-|a_j|^2)/(1 - conj(a_j) z) * prod_{i<j} b_{a_i}(z), rotated so that its
    first nonzero coefficient is real positive.
    """

    theta: BlaschkeSpec
    coeff_matrix: np.ndarray
    ortho_residual: float
    tail_bound: float = 0.0

    @property
    def degree(self) -> int:
        return self.theta.degree

    @property
    def order(self) -> int:
        return self.coeff_matrix.shape[0] - 1


def tm_basis(theta: BlaschkeSpec, M: int | None = None, tail_tol: float = MODEL_TAIL_TOL) -> ModelBasis:
    d = theta.degree
    if d < 1:
        raise ValueError("model space needs a Blaschke product of degree >= 1")
    r = theta.radius
    need = required_order(r, d - 1, tail_tol, kernel=True)
    if M is None:
        M = max(need, d)
    if M < d:
        raise ValueError(f"M={M} below degree {d}")
    tail = _majorant_tail(r, d - 1, M, kernel=True) * math.sqrt(1 - r * r)
    if tail > tail_tol:
        raise ValueError(f"tail {tail:.3g} exceeds {tail_tol:g} at M={M}; need M >= {need}")
    L = M + 1
    k = np.arange(L)
    V = np.zeros((L, d), dtype=complex)
    prefix = np.zeros(L, dtype=complex)
    prefix[0] = 1.0
    for j, a in enumerate(theta.zeros):
        kern = math.sqrt(1 - abs(a) ** 2) * np.conj(a) ** k
        col = truncated_mul(prefix, kern, L)
        lead = col[np.flatnonzero(np.abs(col) > 1e-300)[0]]
        V[:, j] = col * (abs(lead) / lead)
        fac = np.empty(L, dtype=complex)
        fac[0] = a
        fac[1:] = (abs(a) ** 2 - 1) * np.conj(a) ** k[:-1]
        prefix = truncated_mul(prefix, fac, L)
    gram = V.conj().T @ V
    resid = float(np.abs(gram - np.eye(d)).max())
    V.flags.writeable = False
    return ModelBasis(theta, V, resid, tail)


def model_compression(basis: ModelBasis, f: TrigSymbol) -> OperatorMatrix:
    """f(S_theta) = P_theta T_f restricted to the model space, in the TM basis."""
    if not f.is_analytic:
        raise ValueError("model compression needs an analytic symbol f")
    V = basis.coeff_matrix
    L = V.shape[0]
    taylor = f.coef_range(0, L)
    TfV = np.stack([truncated_mul(V[:, j], taylor, L) for j in range(V.shape[1])], axis=1)
    return OperatorMatrix(V.conj().T @ TfV, MODEL, basis.theta, meta="model_compression")


# -- norm kernel -----------------------------------------------------------------

class NormConvergenceError(RuntimeError):
    def __init__(self, estimate: float, residual: float, iterations: int):
        super().__init__(
            f"operator norm not certified after {iterations} iterations: "
            f"estimate {estimate!r}, relative residual {residual:.3g}"
        )
        self.estimate = estimate
        self.residual = residual
        self.iterations = iterations


def _start_vector(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _initial(n, seed, start):
    if start is None:
        return _start_vector(n, seed)
    v = np.asarray(start, dtype=complex).ravel()
    nv = np.linalg.norm(v)
    if v.size != n or nv == 0 or not np.isfinite(nv):
        return _start_vector(n, seed)
    return v / nv


def _power_norm(A, rel_tol, max_iter, seed, start=None):
    AH = A.conj().T.copy()
    v = _initial(A.shape[1], seed, start)
    lam, resid = 0.0, float("inf")
    for it in range(1, max_iter + 1):
        w = AH @ (A @ v)
        lam = float(np.vdot(v, w).real)
        if lam <= 0.0:
            return 0.0, v, it
        resid = float(np.linalg.norm(w - lam * v)) / lam
        if resid <= rel_tol:
            return math.sqrt(lam), v, it
        v = w / np.linalg.norm(w)
    raise NormConvergenceError(math.sqrt(max(lam, 0.0)), resid, max_iter)


def _lanczos_norm(A, rel_tol, max_iter, seed, start=None):
    n = A.shape[1]
    AH = A.conj().T.copy()
    kmax = min(n, max_iter)
    Q = np.zeros((kmax + 1, n), dtype=complex)  # Lanczos vectors as rows
    Q[0] = _initial(n, seed, start)
    alpha = np.zeros(kmax)
    beta = np.zeros(kmax)
    lam, resid, s = 0.0, float("inf"), np.ones(1)
    for j in range(kmax):
        w = AH @ (A @ Q[j])
        if j > 0:
            w -= beta[j - 1] * Q[j - 1]
        alpha[j] = np.vdot(Q[j], w).real
        w -= alpha[j] * Q[j]
        basis = Q[: j + 1]
        for _ in range(2):
            w -= np.conj(basis @ np.conj(w)) @ basis
        beta[j] = np.linalg.norm(w)
        if j == 0:
            lam, s = alpha[0], np.ones(1)
        else:
            vals, vecs = sla.eigh_tridiagonal(
                alpha[: j + 1], beta[:j], select="i", select_range=(j, j)
            )
            lam, s = vals[0], vecs[:, 0]
        scale = max(lam, np.finfo(float).tiny)
        resid = abs(beta[j] * s[-1]) / scale
        invariant = beta[j] <= 1e-14 * max(abs(alpha[: j + 1]).max(), np.finfo(float).tiny)
        if lam > 0 and (resid <= rel_tol or invariant):
            return math.sqrt(lam), s @ Q[: j + 1], j + 1
        if invariant:
            break
        Q[j + 1] = w / beta[j]
    if kmax == n or lam <= 0:
        # Krylov space exhausted: Ritz values are exact
        return math.sqrt(max(lam, 0.0)), s @ Q[: s.size], kmax
    raise NormConvergenceError(math.sqrt(lam), resid, kmax)


def _bandwidth(A) -> int:
    rows, cols = np.nonzero(A)
    return int(np.abs(rows - cols).max()) if rows.size else 0


def _banded_norm(A, rel_tol):
    """Top eigenpair of the banded Gram matrix by LAPACK, then the same residual test."""
    As = sp.csr_matrix(A)
    G = (As.conj().T @ As).tocsr()
    n = G.shape[0]
    bw = max((k for k in range(n) if G.diagonal(k).any()), default=0)
    band = np.zeros((bw + 1, n), dtype=complex)
    for k in range(bw + 1):
        band[bw - k, k:] = G.diagonal(k)
    vals, vecs = sla.eig_banded(band, select="i", select_range=(n - 1, n - 1))
    lam, v = float(vals[0]), vecs[:, 0]
    if lam <= 0:
        return None
    resid = float(np.linalg.norm(G @ v - lam * v)) / lam
    if resid > rel_tol:
        return None
    return math.sqrt(lam), v


BANDED_MIN_DIM = 256
BANDED_MAX_WIDTH = 16
DENSE_MAX_DIM = 48


def _dense_norm(A, rel_tol):
    """Small inputs: LAPACK SVD, then the same residual test on the top pair."""
    _, s, vh = np.linalg.svd(A)
    sigma, v = float(s[0]), vh[0].conj()
    lam = sigma * sigma
    if lam == 0.0:
        return sigma, v  # subnormal entries only
    resid = float(np.linalg.norm(A.conj().T @ (A @ v) - lam * v)) / lam
    if resid > rel_tol:
        return None
    return sigma, v


def top_singular_pair(
    T,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = SEED,
    method: str = "auto",
    start=None,
) -> tuple[float, np.ndarray]:
    """(sigma_max, right singular vector); ``start`` warm-starts the iteration.

    ``method``: "power", "lanczos", "dense", or "auto" (dense SVD for small inputs,
    banded LAPACK path for large banded inputs, Lanczos otherwise). Every path
    applies the same residual test.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    if method not in ("power", "lanczos", "dense", "auto"):
        raise ValueError(f"unknown method {method!r}")
    A = as_array(T)
    if A.size == 0 or not np.any(A):
        return 0.0, np.zeros(A.shape[1] if A.ndim == 2 else 0, dtype=complex)
    if method == "power":
        sigma, v, _ = _power_norm(A, rel_tol, max_iter, seed, start)
        return sigma, v
    if method == "dense" or (method == "auto" and min(A.shape) <= DENSE_MAX_DIM):
        found = _dense_norm(A, rel_tol)
        if found is not None:
            return found
        if method == "dense":
            sigma, v, _ = _lanczos_norm(A, rel_tol, max_iter, seed, start)
            return sigma, v
    if (
        method == "auto"
        and start is None
        and min(A.shape) >= BANDED_MIN_DIM
        and _bandwidth(A) <= BANDED_MAX_WIDTH
    ):
        found = _banded_norm(A, rel_tol)
        if found is not None:
            return found
    sigma, v, _ = _lanczos_norm(A, rel_tol, max_iter, seed, start)
    return sigma, v


def operator_norm(
    T,
    rel_tol: float = DEFAULT_REL_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = SEED,
    method: str = "auto",
    start=None,
) -> float:
    """Largest singular value of T.

    Iterates on T*T from a seeded start vector and stops once the Rayleigh-quotient
    residual ||T*T v - lam v|| / lam drops below ``rel_tol``. ``method="power"``
    is the plain power iteration; Lanczos works in the Krylov span of the same
    iterates (fully reorthogonalized) and certifies clustered spectra that plain
    power iteration cannot resolve within ``max_iter``.
    Raises NormConvergenceError carrying the best estimate otherwise.
    """
    return top_singular_pair(T, rel_tol, max_iter, seed, method, start)[0]
