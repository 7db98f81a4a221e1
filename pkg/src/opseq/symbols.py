"""Fourier-coefficient algebra for functions on the unit circle.

A symbol is stored as a dense coefficient block ``values`` starting at
integer index ``offset``, so ``values[j]`` is the coefficient of ``z**(offset + j)``.
Convention: ``c_k = int phi(e^{it}) e^{-ikt} dm(t)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_BLASCHKE_ORDER = 1024
DEFAULT_GRID = 8192
TAIL_WARN = 1e-12


@dataclass(frozen=True)
class TrigSymbol:
    """Finitely supported Fourier series plus a certified l1 bound on what was dropped."""

    offset: int
    values: np.ndarray
    tail_bound: float = 0.0
    order: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex).ravel()
        if not np.all(np.isfinite(vals)):
            raise ValueError("symbol coefficients must be finite")
        if self.tail_bound < 0 or not math.isfinite(self.tail_bound):
            raise ValueError("tail_bound must be a finite nonnegative number")
        nz = np.flatnonzero(vals)
        if nz.size == 0:
            offset, vals = 0, np.zeros(0, dtype=complex)
        else:
            offset = self.offset + int(nz[0])
            vals = vals[nz[0]: nz[-1] + 1].copy()
        vals.flags.writeable = False
        object.__setattr__(self, "offset", int(offset))
        object.__setattr__(self, "values", vals)
        span = max(abs(offset), abs(offset + vals.size - 1)) if vals.size else 0
        object.__setattr__(self, "order", max(int(self.order), span))

    # -- views -------------------------------------------------------------
    @property
    def truncation_order(self) -> int:
        return self.order

    @property
    def is_zero(self) -> bool:
        return self.values.size == 0

    @property
    def min_index(self) -> int:
        return self.offset

    @property
    def max_index(self) -> int:
        return self.offset + self.values.size - 1

    @property
    def coeffs(self) -> dict[int, complex]:
        return {self.offset + j: complex(v) for j, v in enumerate(self.values) if v != 0}

    @property
    def is_analytic(self) -> bool:
        return self.is_zero or self.offset >= 0

    def coef(self, k: int) -> complex:
        j = k - self.offset
        if 0 <= j < self.values.size:
            return complex(self.values[j])
        return 0j

    def coef_range(self, start: int, stop: int, step: int = 1) -> np.ndarray:
        """Coefficients for indices ``range(start, stop, step)`` (zeros outside the support)."""
        idx = np.arange(start, stop, step) - self.offset
        out = np.zeros(idx.size, dtype=complex)
        ok = (idx >= 0) & (idx < self.values.size)
        out[ok] = self.values[idx[ok]]
        return out

    def __call__(self, z):
        """Evaluate on points of the circle (or, for analytic symbols, the closed disk)."""
        z = np.asarray(z, dtype=complex)
        if self.is_zero:
            return np.zeros_like(z)
        poly = np.polynomial.polynomial.polyval(z, self.values)
        return poly * z ** self.offset

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "coeffs": [[k, v.real, v.imag] for k, v in sorted(self.coeffs.items())],
            "tail_bound": self.tail_bound,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TrigSymbol":
        entries = [(int(k), complex(re, im)) for k, re, im in obj.get("coeffs", [])]
        sym = trig_from_coeffs(entries)
        tail = float(obj.get("tail_bound", 0.0))
        if tail:
            sym = TrigSymbol(sym.offset, sym.values, tail, sym.order)
        return sym


@dataclass(frozen=True)
class BlaschkeSpec:
    zeros: tuple = field(default_factory=tuple)

    def __post_init__(self):
        zs = tuple(complex(a) for a in self.zeros)
        for a in zs:
            if not abs(a) < 1:
                raise ValueError(f"Blaschke zero {a} is not inside the open unit disk")
        object.__setattr__(self, "zeros", zs)

    @property
    def degree(self) -> int:
        return len(self.zeros)

    @property
    def radius(self) -> float:
        return max((abs(a) for a in self.zeros), default=0.0)

    def __call__(self, z):
        """Exact evaluation from the zeros (no truncation)."""
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for a in self.zeros:
            out = out * (a - z) / (1 - np.conj(a) * z)
        return out

    def to_json(self) -> dict:
        return {"zeros": [[a.real, a.imag] for a in self.zeros]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "BlaschkeSpec":
        return cls(tuple(complex(re, im) for re, im in obj["zeros"]))


def trig_from_coeffs(entries: Iterable[tuple[int, complex]] | Mapping[int, complex]) -> TrigSymbol:
    if isinstance(entries, Mapping):
        entries = entries.items()
    entries = [(int(k), complex(v)) for k, v in entries]
    ks = [k for k, _ in entries]
    if len(set(ks)) != len(ks):
        raise ValueError("duplicate coefficient index")
    if not entries:
        return TrigSymbol(0, np.zeros(0, dtype=complex))
    lo, hi = min(ks), max(ks)
    vals = np.zeros(hi - lo + 1, dtype=complex)
    for k, v in entries:
        vals[k - lo] = v
    return TrigSymbol(lo, vals)


def monomial(n: int, c: complex = 1.0) -> TrigSymbol:
    return trig_from_coeffs([(n, c)])


def constant(c: complex) -> TrigSymbol:
    return trig_from_coeffs([(0, c)])


# -- Blaschke expansions -------------------------------------------------------

def _factor_coeffs(a: complex, order: int) -> np.ndarray:
    # (a - z)/(1 - conj(a) z) = a + sum_{k>=1} conj(a)^{k-1} (|a|^2 - 1) z^k
    c = np.empty(order + 1, dtype=complex)
    c[0] = a
    if order >= 1:
        c[1:] = (abs(a) ** 2 - 1) * np.conj(a) ** np.arange(order)
    return c


def _majorant_tail(r: float, n_factors: int, order: int, kernel: bool = False) -> float:
    """Certified bound on sum_{k>order} |c_k| for a product of ``n_factors`` factors
    with zeros in |a| <= r (optionally times the kernel 1/(1 - conj(a) z)).

    Every coefficient is dominated by the nonnegative series
    g(z) = r + (1 - r^2) z / (1 - r z), so Cauchy's estimate at any s in (1, 1/r)
    bounds the tail by G(s) s^{-(order+1)} / (1 - 1/s).
    """
    if r == 0.0:
        # factors are -z; polynomial of degree n_factors (+ constant kernel)
        return 0.0 if order >= n_factors else float("inf")
    best = float("inf")
    s_max = min(1.0 / r, 1e100)  # any s in (1, 1/r) is valid; cap keeps tiny r finite
    for frac in np.linspace(0.02, 0.98, 49):
        s = 1.0 + frac * (s_max - 1.0)
        g = r + (1 - r * r) * s / (1 - r * s)
        log_bound = n_factors * math.log(g) - (order + 1) * math.log(s) - math.log1p(-1.0 / s)
        if kernel:
            log_bound -= math.log1p(-r * s)
        best = min(best, log_bound)
    return math.exp(best) if best < 700 else float("inf")


def blaschke_tail_bound(spec: BlaschkeSpec, order: int) -> float:
    return _majorant_tail(spec.radius, spec.degree, order)


def required_order(r: float, n_factors: int, tol: float, kernel: bool = False) -> int:
    """Smallest truncation order whose majorant tail is below ``tol``."""
    lo, hi = n_factors, max(n_factors, 16)
    while _majorant_tail(r, n_factors, hi, kernel) > tol:
        hi *= 2
        if hi > 1 << 24:
            raise ValueError("tail tolerance unreachable")
    while lo < hi:
        mid = (lo + hi) // 2
        if _majorant_tail(r, n_factors, mid, kernel) <= tol:
            hi = mid
        else:
            lo = mid + 1
    return lo


def truncated_mul(a: np.ndarray, b: np.ndarray, length: int) -> np.ndarray:
    """Taylor coefficients of a*b up to ``length`` terms."""
    out = np.convolve(a[:length], b[:length])[:length]
    if out.size < length:
        out = np.concatenate([out, np.zeros(length - out.size, dtype=complex)])
    return out


def blaschke_symbol(spec: BlaschkeSpec, order: int = DEFAULT_BLASCHKE_ORDER) -> TrigSymbol:
    """Taylor coefficients of prod_j (a_j - z)/(1 - conj(a_j) z) up to ``z**order``."""
    if order < spec.degree:
        raise ValueError(f"order {order} below Blaschke degree {spec.degree}")
    coeffs = np.zeros(order + 1, dtype=complex)
    coeffs[0] = 1.0
    for a in spec.zeros:
        coeffs = truncated_mul(coeffs, _factor_coeffs(a, order), order + 1)
    tail = blaschke_tail_bound(spec, order)
    if tail > TAIL_WARN:
        warnings.warn(
            f"Blaschke truncation at order {order} leaves tail bound {tail:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return TrigSymbol(0, coeffs, tail, order)


# -- algebra -------------------------------------------------------------------

def symbol_mul(a: TrigSymbol, b: TrigSymbol) -> TrigSymbol:
    if a.is_zero or b.is_zero:
        return TrigSymbol(0, np.zeros(0, dtype=complex), 0.0)
    vals = np.convolve(a.values, b.values)
    l1a, l1b = float(np.abs(a.values).sum()), float(np.abs(b.values).sum())
    tail = a.tail_bound * (l1b + b.tail_bound) + b.tail_bound * l1a
    return TrigSymbol(a.offset + b.offset, vals, tail, a.order + b.order)


def symbol_add(a: TrigSymbol, b: TrigSymbol, beta: complex = 1.0) -> TrigSymbol:
    """a + beta * b."""
    if b.is_zero:
        return a
    if a.is_zero:
        return TrigSymbol(b.offset, beta * b.values, abs(beta) * b.tail_bound, b.order)
    lo = min(a.min_index, b.min_index)
    hi = max(a.max_index, b.max_index)
    vals = a.coef_range(lo, hi + 1) + beta * b.coef_range(lo, hi + 1)
    return TrigSymbol(lo, vals, a.tail_bound + abs(beta) * b.tail_bound, max(a.order, b.order))


def symbol_conj_reflect(a: TrigSymbol) -> TrigSymbol:
    """The boundary function conj(phi): coefficient conj(c_k) moves to index -k."""
    if a.is_zero:
        return a
    return TrigSymbol(-a.max_index, np.conj(a.values[::-1]), a.tail_bound, a.order)


def symbol_rotate(a: TrigSymbol, n: int) -> TrigSymbol:
    """Multiplication by z**n."""
    if a.is_zero:
        return a
    return TrigSymbol(a.offset + n, a.values, a.tail_bound, a.order + abs(n))


def sup_norm_grid(a: TrigSymbol, grid_size: int = DEFAULT_GRID) -> float:
    """max |phi| over the G-th roots of unity.

    A lower bound for the sup norm; its gap is a grid-resolution effect of order
    (span / G)^2 for smooth symbols. The factor z**offset has modulus one, so the
    value depends only on the coefficient block and is invariant under rotation.
    """
    if a.is_zero:
        return 0.0
    span = a.values.size - 1
    if grid_size < max(4 * span, 4):
        raise ValueError(f"grid size {grid_size} too small for index span {span}")
    vals = np.fft.ifft(a.values, n=grid_size) * grid_size
    return float(np.abs(vals).max())


def negative_part(a: TrigSymbol) -> TrigSymbol:
    """Coefficients with index < 0 (the part a Hankel matrix sees)."""
    if a.is_zero or a.min_index >= 0:
        return TrigSymbol(0, np.zeros(0, dtype=complex))
    return TrigSymbol(a.min_index, a.coef_range(a.min_index, 0), a.tail_bound, a.order)


def as_symbol(obj) -> TrigSymbol:
    if isinstance(obj, TrigSymbol):
        return obj
    if isinstance(obj, Mapping):
        if "coeffs" in obj:
            return TrigSymbol.from_json(obj)
        return trig_from_coeffs(obj)
    if isinstance(obj, Sequence):
        return trig_from_coeffs(obj)
    if np.isscalar(obj):
        return constant(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a symbol")
