"""Best-approximation distances from Hankel norms.

dist(phi, H^inf) = ||H_phi||, and dist(phi, conj(z)^n H^inf) = dist(z^n phi, H^inf);
the latter decreases in n to dist(phi, H^inf + C).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import (
    as_array,
    hankel_matrix,
    model_compression,
    operator_norm,
    tm_basis,
    top_singular_pair,
)
from .symbols import (
    DEFAULT_BLASCHKE_ORDER,
    BlaschkeSpec,
    TrigSymbol,
    blaschke_symbol,
    monomial,
    required_order,
    symbol_conj_reflect,
    symbol_mul,
    symbol_rotate,
    sup_norm_grid,
)

MONOTONE_TOL = 1e-10
THETA_TAIL_TOL = 1e-15
SIGMA_U_THRESHOLD = 1e-3
SLOW_DECAY_FLAT = 1e-3
SLOW_DECAY_FLOOR = 1e-2


def hankel_order(phi: TrigSymbol) -> int:
    """Smallest N for which the N x N Hankel block holds every negative coefficient."""
    if phi.is_zero or phi.min_index >= 0:
        return 1
    return -phi.min_index


def dist_hinf(phi: TrigSymbol, N: Optional[int] = None) -> float:
    """dist(phi, H^inf) as the norm of the Hankel block (exact once N covers the negative support)."""
    if N is None:
        N = hankel_order(phi)
    return operator_norm(hankel_matrix(phi, N))


@dataclass
class DistanceTrace:
    symbol: TrigSymbol
    per_n: list[tuple[int, float]] = field(default_factory=list)
    limit_estimate: float = 0.0
    monotone_violation: float = 0.0
    slow_decay: bool = False

    def rows(self):
        # violation column: how far this value rose above its predecessor
        out, prev = [], None
        for n, d in self.per_n:
            out.append((n, d, 0.0 if prev is None else max(0.0, d - prev)))
            prev = d
        return out


def dist_hinf_plus_c(phi: TrigSymbol, N: Optional[int] = None, n_max: int = 16) -> tuple[float, DistanceTrace]:
    """lim_n dist(z^n phi, H^inf), traced for n = 0..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if N is None:
        N = hankel_order(phi)
    vals = []
    v = None
    for n in range(n_max + 1):
        H = hankel_matrix(symbol_rotate(phi, n), N).entries
        if np.any(H):
            d, v = top_singular_pair(H, start=v)
        else:
            d = 0.0
        vals.append((n, d))
    ds = np.array([d for _, d in vals])
    violation = float(max(0.0, np.max(np.diff(ds)))) if ds.size > 1 else 0.0
    last3 = ds[-3:]
    slow = bool(last3.max() - last3.min() < SLOW_DECAY_FLAT and last3.min() > SLOW_DECAY_FLOOR)
    trace = DistanceTrace(phi, vals, float(ds[-1]), violation, slow)
    return trace.limit_estimate, trace


def theta_bar_f(theta: BlaschkeSpec, f: TrigSymbol, order: Optional[int] = None) -> TrigSymbol:
    """conj(theta) * f on the circle; ``order`` defaults to the smallest certified
    truncation with tail below 1e-15 (capped at the global default order)."""
    if order is None:
        need = required_order(theta.radius, theta.degree, THETA_TAIL_TOL)
        order = max(theta.degree, min(need, DEFAULT_BLASCHKE_ORDER))
    return symbol_mul(symbol_conj_reflect(blaschke_symbol(theta, order)), f)


@dataclass
class HartmanSarasonReport:
    model_norm: float  # ||f(S_theta)||
    nehari_norm: float  # dist(conj(theta) f, H^inf)
    model_chain: list[float]  # ||S_theta^n f(S_theta)||
    hankel_chain: list[float]  # dist(z^n conj(theta) f, H^inf)
    limit_estimate: float
    max_discrepancy: float
    monotone_violation: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def hartman_sarason_report(theta: BlaschkeSpec, f: TrigSymbol, N: Optional[int] = None,
                           n_max: int = 16, order: Optional[int] = None) -> HartmanSarasonReport:
    """Cross-check the model-operator path against the Hankel path, step by step."""
    basis = tm_basis(theta)
    F = model_compression(basis, f).entries
    S = model_compression(basis, monomial(1)).entries
    model_chain = []
    P = F.copy()
    for n in range(n_max + 1):
        model_chain.append(operator_norm(P))
        P = S @ P
    symbol = theta_bar_f(theta, f, order)
    _, dtrace = dist_hinf_plus_c(symbol, N, n_max)
    hankel_chain = [d for _, d in dtrace.per_n]
    disc = float(np.max(np.abs(np.array(model_chain) - np.array(hankel_chain))))
    return HartmanSarasonReport(
        model_norm=model_chain[0],
        nehari_norm=hankel_chain[0],
        model_chain=model_chain,
        hankel_chain=hankel_chain,
        limit_estimate=dtrace.limit_estimate,
        max_discrepancy=disc,
        monotone_violation=dtrace.monotone_violation,
    )


# -- boundary spectrum -------------------------------------------------------------

@dataclass
class SigmaUReport:
    theta: BlaschkeSpec
    flagged_points: list[complex]
    radial_profile: np.ndarray  # |theta(r_m xi)|, shape (grid, levels)
    radii: np.ndarray
    threshold: float
    start_level: int

    def to_json(self) -> dict:
        return {
            "theta": self.theta.to_json(),
            "flagged_points": [[p.real, p.imag] for p in self.flagged_points],
            "radii": self.radii.tolist(),
            "threshold": self.threshold,
            "start_level": self.start_level,
            "radial_min": self.radial_profile[:, self.start_level - 1:].min(axis=1).tolist(),
        }


def sigma_u_estimate(theta: BlaschkeSpec, circle_grid: int = 256, radial_levels: Optional[int] = None,
                     threshold: float = SIGMA_U_THRESHOLD) -> SigmaUReport:
    """Boundary points where |theta| gets small along the radius.

    Samples r_m = 1 - 2^-m and flags xi when min_{m >= m0} |theta(r_m xi)| < threshold,
    with m0 = ceil(log2 degree) + 4. A heuristic: it separates accumulating zero
    sets from finite products of moderate degree, nothing more.
    """
    d = max(theta.degree, 1)
    m0 = math.ceil(math.log2(d)) + 4
    levels = radial_levels if radial_levels is not None else m0 + 16
    if levels < m0:
        raise ValueError(f"need at least {m0} radial levels")
    xi = np.exp(2j * np.pi * np.arange(circle_grid) / circle_grid)
    radii = 1.0 - 2.0 ** -np.arange(1, levels + 1)
    profile = np.abs(theta(xi[:, None] * radii[None, :]))
    tail_min = profile[:, m0 - 1:].min(axis=1)
    flagged = [complex(x) for x, v in zip(xi, tail_min) if v < threshold]
    return SigmaUReport(theta, flagged, profile, radii, threshold, m0)


# -- peripheral spectrum -------------------------------------------------------------

@dataclass
class PeripheralReport:
    trace: list[float]  # ||T^n p(T)||
    peripheral_sup: float
    peripheral_points: list[complex]
    discrepancy: float

    def to_json(self) -> dict:
        return {
            "trace": self.trace,
            "peripheral_sup": self.peripheral_sup,
            "peripheral_points": [[p.real, p.imag] for p in self.peripheral_points],
            "discrepancy": self.discrepancy,
        }


def _poly_of_matrix(p: TrigSymbol, T: np.ndarray) -> np.ndarray:
    out = np.zeros_like(T)
    P = np.eye(T.shape[0], dtype=complex)
    for k in range(p.max_index + 1):
        c = p.coef(k)
        if c:
            out = out + c * P
        P = P @ T
    return out


def peripheral_sup_check(T, p: TrigSymbol, n_max: int = 32, unit_tol: float = 1e-12) -> PeripheralReport:
    """Compare lim ||T^n p(T)|| with max |p| over the unimodular part of the spectrum.

    T must be triangular (spectrum = diagonal); use ``shift_peripheral_check`` for the shift.
    """
    if not p.is_analytic:
        raise ValueError("p must be an analytic polynomial")
    A = as_array(T)
    if not (np.allclose(np.tril(A, -1), 0) or np.allclose(np.triu(A, 1), 0)):
        raise ValueError("spectrum not readable: T must be triangular")
    spec = np.diag(A)
    periph = [complex(z) for z in spec if abs(abs(z) - 1) <= unit_tol]
    sup = max((abs(p(z)) for z in periph), default=0.0)
    Q = _poly_of_matrix(p, A)
    vals = []
    X = Q
    for _ in range(n_max + 1):
        vals.append(operator_norm(X))
        X = A @ X
    return PeripheralReport(vals, float(sup), periph, float(abs(vals[-1] - sup)))


def shift_peripheral_check(p: TrigSymbol, N: int = 2048, n_max: int = 4, grid: int = 8192) -> PeripheralReport:
    """Shift case: S^n p(S) restricted to the first N basis vectors, stored exactly as
    an (N + deg p + n) x N block; sigma(S) on the circle is the whole circle."""
    if not p.is_analytic:
        raise ValueError("p must be an analytic polynomial")
    deg = p.max_index
    vals = []
    v = None
    for n in range(n_max + 1):
        rows = N + deg + n
        block = np.zeros((rows, N), dtype=complex)
        for k in range(deg + 1):
            c = p.coef(k)
            if c:
                idx = np.arange(N)
                block[idx + k + n, idx] = c
        s, v = top_singular_pair(block, start=v)
        vals.append(s)
    sup = sup_norm_grid(p, grid)
    return PeripheralReport(vals, sup, [], float(abs(vals[-1] - sup)))
