"""Rational filters, pole decompositions, and phase factorization.

An FIR tap vector ``h`` is read as the transfer function ``sum_k h_k z^{-k}``.
A channel is *strictly minimum-phase* (MP) when every root lies strictly
inside the unit circle, *strictly non-minimum-phase* (NMP) when every root
lies strictly outside, and *mixed* otherwise.  Strictly MP channels have a
stable causal all-pole inverse; anything else needs an FIR correction and a
decision delay.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .signal_core import as_complex_seq, least_squares, polynomial_roots

RING_TOL = 1e-6
POLE_SEPARATION_TOL = 1e-6
POLE_JITTER = 1e-5


class UnitCircleRootError(ValueError):
    """A root fell inside the forbidden ring around the unit circle."""


class RepeatedPoleError(ValueError):
    """Pole decomposition requested for a denominator with clustered roots."""


class Phase(enum.Enum):
    STRICTLY_MP = "strictly_mp"
    STRICTLY_NMP = "strictly_nmp"
    MIXED = "mixed"


@dataclass(frozen=True)
class RationalFilter:
    """Rational transfer function b(z)/a(z) in powers of z^{-1}, with a[0] = 1."""

    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", as_complex_seq(self.b, "b"))
        object.__setattr__(self, "a", as_complex_seq(self.a, "a"))
        if self.a[0] != 1.0 + 0.0j:
            raise ValueError("denominator must be monic in z^0 (a[0] = 1)")

    @classmethod
    def fir(cls, taps) -> "RationalFilter":
        return cls(b=np.asarray(taps), a=np.ones(1))


@dataclass(frozen=True)
class PoleSet:
    """Parallel one-pole decomposition ``sum_k c_k / (1 - p_k z^{-1})``."""

    poles: np.ndarray
    residues: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.poles, dtype=np.complex128).ravel()
        c = np.asarray(self.residues, dtype=np.complex128).ravel()
        if p.size != c.size:
            raise ValueError("poles and residues must have equal length")
        object.__setattr__(self, "poles", p)
        object.__setattr__(self, "residues", c)

    @property
    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles) < 1.0))

    def impulse_response(self, n: int) -> np.ndarray:
        out = np.zeros(n, dtype=np.complex128)
        steps = np.arange(n)
        for p, c in zip(self.poles, self.residues):
            out += c * p**steps
        return out


@dataclass(frozen=True)
class PhaseFactorization:
    """``h = mp_factor * nmp_factor`` with the overall gain carried by the MP part."""

    mp_factor: np.ndarray
    nmp_factor: np.ndarray
    classification: Phase


def impulse_response(f: RationalFilter, n: int) -> np.ndarray:
    """First ``n`` samples of the filter's unit-sample response (direct recursion)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    impulse = np.zeros(n, dtype=np.complex128)
    impulse[0] = 1.0
    return scipy.signal.lfilter(f.b, f.a, impulse)


def perturb_clustered_poles(
    poles: np.ndarray,
    min_separation: float = POLE_SEPARATION_TOL,
    jitter: float = POLE_JITTER,
) -> np.ndarray:
    """Split pole clusters by a deterministic radial jitter.

    Poles closer than ``min_separation`` to an already-kept pole are pushed
    radially outward in multiples of ``jitter``; ordering is made stable by
    sorting on (real, imag) first.
    """
    p = np.asarray(poles, dtype=np.complex128).ravel()
    order = np.lexsort((p.imag, p.real))
    adjusted = p[order].copy()
    for i in range(1, adjusted.size):
        bump = 1
        while np.min(np.abs(adjusted[:i] - adjusted[i])) <= min_separation:
            base = p[order][i]
            direction = base / abs(base) if abs(base) > 0 else 1.0
            adjusted[i] = base + direction * bump * jitter
            bump += 1
    out = np.empty_like(adjusted)
    out[order] = adjusted
    return out


def _residues_simple(poles: np.ndarray) -> np.ndarray:
    """Residues of ``1 / prod_k (1 - p_k z^{-1})`` at simple nonzero poles."""
    k = poles.size
    res = np.empty(k, dtype=np.complex128)
    for i in range(k):
        others = np.delete(poles, i)
        res[i] = 1.0 / np.prod(1.0 - others / poles[i])
    return res


def partial_fractions(a, min_separation: float = POLE_SEPARATION_TOL) -> PoleSet:
    """Decompose the all-pole filter ``1/A(z)`` into parallel one-pole sections.

    Requires simple poles; raises :class:`RepeatedPoleError` when any two
    roots of ``A`` are within ``min_separation`` of each other (callers may
    use :func:`perturb_clustered_poles` and rebuild the denominator).
    """
    av = as_complex_seq(a, "a")
    if av[0] != 1.0 + 0.0j:
        raise ValueError("denominator must be monic in z^0 (a[0] = 1)")
    poles = polynomial_roots(av)
    if poles.size > 1:
        diffs = np.abs(poles[:, None] - poles[None, :])
        np.fill_diagonal(diffs, np.inf)
        if diffs.min() <= min_separation:
            raise RepeatedPoleError(
                f"pole pair closer than {min_separation}: perturb before decomposing"
            )
    return PoleSet(poles=poles, residues=_residues_simple(poles))


def factorize_by_phase(h, ring_tol: float = RING_TOL) -> PhaseFactorization:
    """Split FIR taps into minimum-phase and non-minimum-phase factors.

    Roots strictly inside the unit circle go to ``mp_factor`` (which also
    carries the overall gain); roots strictly outside go to ``nmp_factor``,
    monic in z^0.  A root with ``1 - ring_tol < |z| < 1 + ring_tol`` raises
    :class:`UnitCircleRootError` since the dichotomy is undefined there.
    """
    hv = as_complex_seq(h, "h")
    if abs(hv[0]) == 0.0:
        raise ValueError("h[0] = 0: strip leading zeros (pure delay) first")
    trimmed = np.trim_zeros(hv, "b")
    if trimmed.size == 1:
        return PhaseFactorization(
            mp_factor=trimmed.copy(),
            nmp_factor=np.ones(1, dtype=np.complex128),
            classification=Phase.STRICTLY_MP,
        )
    roots = polynomial_roots(trimmed)
    mags = np.abs(roots)
    if np.any((mags > 1.0 - ring_tol) & (mags < 1.0 + ring_tol)):
        raise UnitCircleRootError("root within the unit-circle tolerance ring")
    inside = roots[mags < 1.0]
    outside = roots[mags >= 1.0]
    # poly() coefficients double as z^{-1}-polynomial coefficients of
    # prod (1 - r z^{-1}); an empty root list yields [1].
    mp = hv[0] * np.atleast_1d(np.poly(inside)).astype(np.complex128)
    nmp = np.atleast_1d(np.poly(outside)).astype(np.complex128)
    if outside.size == 0:
        classification = Phase.STRICTLY_MP
    elif inside.size == 0:
        classification = Phase.STRICTLY_NMP
    else:
        classification = Phase.MIXED
    return PhaseFactorization(mp_factor=mp, nmp_factor=nmp, classification=classification)


def stable_inverse_approx(h, l_ff: int, n: int):
    """Approximate stable inverse of mixed-phase taps: one-pole bank plus FIR.

    The pole bank is pinned to the roots of the minimum-phase factor (all
    strictly inside the unit circle); the ``l_ff`` FIR taps and the pole
    residues are fitted jointly by least squares against a delayed unit
    sample over an ``n``-sample horizon.  Non-minimum-phase content forces a
    decision delay: the fit targets index ``len(h) + l_ff - 2``, the largest
    the ``l_ff``-tap FIR part can reach, and larger ``l_ff`` buys both more
    delay and a longer anticausal truncation, so the residual is
    non-increasing in ``l_ff``.  Strictly MP inputs need no delay at all (the
    pole bank alone inverts them exactly), so they are fitted at delay 0.

    Returns ``(PoleSet, fir_taps, delay)``.
    """
    hv = as_complex_seq(h, "h")
    if l_ff < 1:
        raise ValueError("l_ff must be >= 1")
    fact = factorize_by_phase(hv)
    length = np.trim_zeros(hv, "b").size
    if fact.classification is Phase.STRICTLY_MP:
        delay = 0
    else:
        delay = length + l_ff - 2
    if n <= delay + length:
        raise ValueError(f"horizon n = {n} too short for delay {delay}")

    mp_roots = polynomial_roots(fact.mp_factor) if fact.mp_factor.size > 1 else np.zeros(0, complex)
    h_pad = np.zeros(n, dtype=np.complex128)
    h_pad[: hv.size] = hv
    columns = []
    for p in mp_roots:
        columns.append(scipy.signal.lfilter([1.0 + 0.0j], [1.0, -p], h_pad))
    for i in range(l_ff):
        columns.append(np.roll(h_pad, i) * (np.arange(n) >= i))
    a = np.column_stack(columns)
    target = np.zeros(n, dtype=np.complex128)
    target[delay] = 1.0
    sol = least_squares(a, target)
    residues = sol[: mp_roots.size]
    fir = sol[mp_roots.size :]
    return PoleSet(poles=mp_roots, residues=residues), fir, delay
