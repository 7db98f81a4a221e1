"""Atomic spectral measures for diagonal normal operators.

A normal operator is modelled as multiplication by z on L^2 of an atomic measure
sum_j w_j delta_{z_j}; a vector is its list of values x_j at the atoms, with
||x||^2 = sum_j w_j |x_j|^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

AT_ONE_TOL = 1e-14
UNIT_TOL = 1e-12
CHECK_STEPS = 10_000


@dataclass(frozen=True)
class MeasureAtoms:
    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.locations, dtype=complex)).copy()
        w = np.atleast_1d(np.asarray(self.weights, dtype=float)).copy()
        if z.shape != w.shape:
            raise ValueError("locations and weights must align")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(z)):
            raise ValueError("weights must be finite and nonnegative")
        z.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "locations", z)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, locations) -> "MeasureAtoms":
        z = np.atleast_1d(np.asarray(locations, dtype=complex))
        return cls(z, np.ones(z.size))

    def __len__(self) -> int:
        return self.locations.size

    @property
    def closed_support(self) -> list[complex]:
        return [complex(z) for z, w in zip(self.locations, self.weights) if w > 0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def at_one(self) -> np.ndarray:
        return np.abs(self.locations - 1) <= AT_ONE_TOL

    @property
    def on_circle(self) -> np.ndarray:
        return np.abs(np.abs(self.locations) - 1) <= UNIT_TOL

    def to_json(self) -> list:
        return [[z.real, z.imag, float(w)] for z, w in zip(self.locations, self.weights)]

    @classmethod
    def from_json(cls, rows) -> "MeasureAtoms":
        return cls([complex(re, im) for re, im, _ in rows], [w for _, _, w in rows])


def _vector(atoms: MeasureAtoms, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    if x.shape != atoms.locations.shape:
        raise ValueError("vector must have one value per atom")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def _check_contraction(atoms: MeasureAtoms):
    if np.any(np.abs(atoms.locations) > 1 + UNIT_TOL):
        raise ValueError("atoms outside the closed unit disk: not a contraction")


def _merged(atoms: MeasureAtoms) -> MeasureAtoms:
    """Atoms within AT_ONE_TOL of 1 moved onto 1."""
    return MeasureAtoms(np.where(atoms.at_one, 1.0 + 0j, atoms.locations), atoms.weights)


def vector_norm(atoms: MeasureAtoms, x) -> float:
    x = _vector(atoms, x)
    return math.sqrt(float(np.sum(atoms.weights * np.abs(x) ** 2)))


def mu_from_atoms(atoms: MeasureAtoms, x) -> MeasureAtoms:
    """The scalar spectral measure of x: weight w_j |x_j|^2 at z_j."""
    x = _vector(atoms, x)
    return MeasureAtoms(atoms.locations, atoms.weights * np.abs(x) ** 2)


def explicit_cesaro(atoms: MeasureAtoms, x, n: int) -> np.ndarray:
    """(1/n) sum_{i<n} N^i x by direct iteration."""
    x = _vector(atoms, x)
    acc = np.zeros_like(x)
    v = x.copy()
    for _ in range(n):
        acc += v
        v = atoms.locations * v
    return acc / n


def cesaro_limit_atoms(atoms: MeasureAtoms, x, n_check: int = CHECK_STEPS) -> np.ndarray:
    """P({1}) x: the Cesaro limit, keeping the values at atoms that sit at 1.

    Cross-checked against the explicit average at ``n_check`` steps; a mismatch
    beyond the a-priori bound sum |x_j| 2 / (n |1 - z_j|) raises.
    """
    x = _vector(atoms, x)
    _check_contraction(atoms)
    one = atoms.at_one
    limit = np.where(one, x, 0)
    if n_check:
        avg = explicit_cesaro(_merged(atoms), x, n_check)
        gap = np.abs(avg - limit)
        bound = np.where(one, 1e-12 * (1 + np.abs(x)),
                         2 * np.abs(x) / (n_check * np.maximum(np.abs(1 - atoms.locations), 1e-300)) + 1e-12)
        if np.any(gap > bound):
            raise RuntimeError("explicit Cesaro average disagrees with P({1})x")
    return limit


@dataclass
class PowerVerdict:
    converges: bool
    limit: Optional[np.ndarray]
    boundary_weight: float  # mu_x(circle minus {1})
    iteration_gap: float  # ||N^n x - limit|| at the end of the explicit run
    iterations: int
    merged_at_one: int = 0  # atoms within AT_ONE_TOL of 1 but not equal to it

    def to_json(self) -> dict:
        return {
            "status": "converged" if self.converges else "non_convergent",
            "converges": self.converges,
            "limit": None if self.limit is None else [[v.real, v.imag] for v in self.limit],
            "boundary_weight": self.boundary_weight,
            "iteration_gap": self.iteration_gap,
            "iterations": self.iterations,
            "merged_at_one": self.merged_at_one,
        }


def power_convergence_verdict(atoms: MeasureAtoms, x, tol: float = 1e-12,
                              n_check: int = CHECK_STEPS) -> PowerVerdict:
    """{N^n x} converges iff mu_x puts no mass on the circle away from 1; the limit is P({1}) x."""
    x = _vector(atoms, x)
    _check_contraction(atoms)
    mu = mu_from_atoms(atoms, x)
    off = atoms.on_circle & ~atoms.at_one
    boundary = float(mu.weights[off].sum())
    converges = boundary <= tol
    limit = np.where(atoms.at_one, x, 0) if converges else None
    # explicit iteration, early exit on a Cauchy step below tol/10
    z = _merged(atoms).locations
    v = x.copy()
    steps = 0
    for steps in range(1, n_check + 1):
        nxt = z * v
        step = vector_norm(atoms, nxt - v)
        v = nxt
        if step <= tol / 10:
            break
    ref = np.where(atoms.at_one, x, 0)
    gap = vector_norm(atoms, v - ref)
    merged = int(np.sum(atoms.at_one & (atoms.locations != 1)))
    return PowerVerdict(converges, limit, boundary, gap, steps, merged)


@dataclass
class LocalSpectrum:
    support: list[complex]
    orbit_bounded: bool
    log_growth: float  # max_n log(||N^n x|| / ||x||) over the checked range
    lemma_consistent: bool  # bounded orbit => support in the closed disk

    def to_json(self) -> dict:
        return {
            "support": [[z.real, z.imag] for z in self.support],
            "orbit_bounded": self.orbit_bounded,
            "log_growth": self.log_growth,
            "lemma_consistent": self.lemma_consistent,
        }


def orbit_log_norms(atoms: MeasureAtoms, x, n_max: int = 1000) -> np.ndarray:
    """log ||N^n x|| for n = 0..n_max, computed in log space (no overflow)."""
    mu = mu_from_atoms(atoms, x)
    keep = mu.weights > 0
    if not np.any(keep):
        return np.full(n_max + 1, -np.inf)
    logw = np.log(mu.weights[keep])
    logr = np.log(np.maximum(np.abs(atoms.locations[keep]), 1e-300))
    n = np.arange(n_max + 1)[:, None]
    terms = logw[None, :] + 2 * n * logr[None, :]
    top = terms.max(axis=1)
    return 0.5 * (top + np.log(np.exp(terms - top[:, None]).sum(axis=1)))


def local_spectrum_support(atoms: MeasureAtoms, x, tol: float = 0.0, n_max: int = 1000) -> LocalSpectrum:
    """supp mu_x, plus the check that a bounded orbit keeps it inside the closed disk."""
    mu = mu_from_atoms(atoms, x)
    support = [complex(z) for z, w in zip(mu.locations, mu.weights) if w > tol]
    if not support:
        return LocalSpectrum([], True, 0.0, True)
    logs = orbit_log_norms(atoms, x, n_max)
    growth = float(np.max(logs - logs[0]))
    bounded = growth <= math.log1p(1e-9)
    inside = all(abs(z) <= 1 + UNIT_TOL for z in support)
    if bounded and not inside:
        raise AssertionError("bounded orbit with local spectrum outside the closed disk")
    return LocalSpectrum(support, bounded, growth, (not bounded) or inside)


def increment_norm(atoms: MeasureAtoms, x, n: int) -> float:
    """||N^{n+1} x - N^n x||."""
    mu = mu_from_atoms(atoms, x)
    z = atoms.locations
    return math.sqrt(float(np.sum(mu.weights * np.abs(z) ** (2 * n) * np.abs(z - 1) ** 2)))


def averaging_polynomial(z, k: int):
    """(1 + z + ... + z^{k-1}) / k."""
    z = np.asarray(z, dtype=complex)
    return sum(z ** j for j in range(k)) / k


@dataclass
class AveragedPowerResult:
    power_limit: np.ndarray  # S^n x at the last step
    cesaro_limit: np.ndarray  # mean of S^i x over n/2 <= i < n
    analytic_limit: np.ndarray  # values at atoms at 1 kept, the rest killed
    power_vs_cesaro: float
    power_vs_analytic: float


def averaged_power_check(atoms: MeasureAtoms, x, k: int, n: int = 4096) -> AveragedPowerResult:
    """S = (I + N + ... + N^{k-1})/k: compare S^n x with its Cesaro limit and with P({1}) x."""
    x = _vector(atoms, x)
    _check_contraction(atoms)
    s = averaging_polynomial(atoms.locations, k)
    s = np.where(atoms.at_one, 1.0 + 0j, s)
    v = x.copy()
    tail = np.zeros_like(x)
    m = n // 2
    for i in range(n):
        if i >= m:
            tail += v
        v = s * v
    cesaro = tail / (n - m)
    analytic = np.where(atoms.at_one, x, 0)
    return AveragedPowerResult(
        v, cesaro, analytic,
        vector_norm(atoms, v - cesaro),
        vector_norm(atoms, v - analytic),
    )
