"""Sine eigenbasis on [0, pi] and the diagonal operator family.

All fields live in the orthonormal basis w_n(x) = sqrt(2/pi) sin(nx).
The operators of the explicit example instance are diagonal in that
basis and are applied as per-mode multipliers; the fractional power is
taken of the negated generator, whose spectrum is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, PropertyFailure

_BASIS_NORM = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class SpectralField:
    """Coefficients (u_n)_{n=1..N} w.r.t. the orthonormal sine basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise DomainError("coeffs must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise DomainError("coeffs must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def mode_count(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        """L2[0, pi] norm via Parseval."""
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        return SpectralField(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    @staticmethod
    def zero(mode_count: int) -> "SpectralField":
        return SpectralField(np.zeros(mode_count))

    @staticmethod
    def unit(mode_count: int, n: int) -> "SpectralField":
        """The basis field w_n."""
        c = np.zeros(mode_count)
        c[n - 1] = 1.0
        return SpectralField(c)


@dataclass(frozen=True)
class OperatorKind:
    """Tagged diagonal operator: one of L, E, M, L_inv, M_inv, Q(t), A, A_pow(q)."""

    tag: str
    t: float | None = None
    q: float | None = None

    _TAGS = ("L", "E", "M", "L_inv", "M_inv", "Q", "A", "A_pow")

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise DomainError(f"unknown operator tag {self.tag!r}")
        if self.tag == "Q":
            if self.t is None or self.t < 0.0:
                raise DomainError("Q requires t >= 0")
        elif self.tag == "A_pow":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise DomainError("A_pow requires 0 < q < 1")


def operator_symbol(kind: OperatorKind, n: np.ndarray) -> np.ndarray:
    """Per-mode multiplier of the diagonal operator on modes n."""
    n = np.asarray(n, dtype=float)
    nsq = n * n
    tag = kind.tag
    if tag == "L":
        return 1.0 + nsq
    if tag == "E":
        return -nsq
    if tag == "L_inv":
        return 1.0 / (1.0 + nsq)
    if tag == "M_inv":
        return -nsq
    if tag == "M":
        return -1.0 / nsq
    if tag == "Q":
        return np.exp(-nsq * kind.t / (1.0 + nsq))
    if tag == "A":
        return -nsq / (1.0 + nsq)
    if tag == "A_pow":
        # fractional power of the negated generator -A, whose symbol
        # n^2/(1+n^2) is positive
        return (nsq / (1.0 + nsq)) ** kind.q
    raise DomainError(f"unknown operator tag {tag!r}")


def apply_operator(kind: OperatorKind, u: SpectralField) -> SpectralField:
    n = np.arange(1, u.mode_count + 1)
    return SpectralField(operator_symbol(kind, n) * u.coeffs)


def norm_q(u: SpectralField, q: float) -> float:
    """Interpolation norm ||u||_q = ||(-A)^q u||."""
    return apply_operator(OperatorKind("A_pow", q=q), u).norm()


def project(f, mode_count: int, n_points: int | None = None) -> SpectralField:
    """First N sine coefficients of a callable f on [0, pi].

    Composite Simpson quadrature; the grid has at least 8N intervals
    (more for small N so that low-mode projections stay at 1e-8).
    """
    if mode_count < 1:
        raise DomainError(f"mode_count must be >= 1, got {mode_count}")
    n_int = n_points if n_points is not None else max(8 * mode_count, 1024)
    if n_int % 2:
        n_int += 1
    x = np.linspace(0.0, math.pi, n_int + 1)
    fx = np.asarray([f(xi) for xi in x], dtype=float)
    n = np.arange(1, mode_count + 1)
    integrand = fx[None, :] * _BASIS_NORM * np.sin(np.outer(n, x))
    coeffs = simpson(integrand, x=x, axis=1)
    return SpectralField(coeffs)


def collocation_grid(n_x: int) -> np.ndarray:
    """Interior nodes x_j = j pi/(n_x+1), exact for the discrete sine basis."""
    j = np.arange(1, n_x + 1)
    return j * math.pi / (n_x + 1)


def default_collocation_size(mode_count: int) -> int:
    return 4 * mode_count


def field_to_grid(u: SpectralField, n_x: int | None = None) -> np.ndarray:
    """Evaluate the field at the collocation nodes."""
    n_x = n_x if n_x is not None else default_collocation_size(u.mode_count)
    x = collocation_grid(n_x)
    n = np.arange(1, u.mode_count + 1)
    return (_BASIS_NORM * np.sin(np.outer(x, n))) @ u.coeffs


def grid_to_field(values: np.ndarray, mode_count: int) -> SpectralField:
    """Project collocation values back to N modes.

    Uses the exact discrete orthogonality of sin(n x_j) on the interior
    grid, so fields with at most n_x modes round-trip to rounding error.
    """
    values = np.asarray(values, dtype=float)
    n_x = values.size
    if mode_count > n_x:
        raise DomainError("mode_count exceeds collocation resolution")
    x = collocation_grid(n_x)
    n = np.arange(1, mode_count + 1)
    weights = math.pi / (n_x + 1)
    return SpectralField(weights * (_BASIS_NORM * np.sin(np.outer(n, x))) @ values)


def apply_Bi(i: int, u: SpectralField, n_x: int | None = None,
             r_max: int = 2) -> np.ndarray:
    """i-th spatial derivative of the field on the collocation grid.

    Spectral differentiation is exact: sine modes map to cosine modes for
    odd i with multiplier n^i and alternating sign per parity.
    """
    if i < 1 or i > r_max:
        raise DomainError(f"derivative order {i} outside 1..{r_max}")
    n_x = n_x if n_x is not None else default_collocation_size(u.mode_count)
    x = collocation_grid(n_x)
    n = np.arange(1, u.mode_count + 1)
    scaled = u.coeffs * n.astype(float) ** i
    phase = i % 4
    if phase == 0:
        basis = np.sin(np.outer(x, n))
    elif phase == 1:
        basis = np.cos(np.outer(x, n))
    elif phase == 2:
        basis = -np.sin(np.outer(x, n))
    else:
        basis = -np.cos(np.outer(x, n))
    return (_BASIS_NORM * basis) @ scaled


@dataclass(frozen=True)
class BoundConstants:
    """Measured operator norms over the retained modes."""

    C1: float       # ||L^-1||
    C2: float       # ||M_inv|| restricted to the retained modes
    M0: float       # sup_t ||Q(t)||
    Mq: float       # envelope constant for ||A^q Q(t)|| <= Mq t^-q
    q: float

    def __post_init__(self):
        for name in ("C1", "C2", "M0", "Mq"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {v}")


def measure_bounds(mode_count: int, t_samples, q: float = 0.25) -> BoundConstants:
    """Measure C1, C2, M0 and fit the A^q Q(t) envelope constant.

    Asserts the semigroup contraction ||Q(t)|| <= 1 at every sampled t.
    The envelope sample grid includes the per-mode maximizers t = q/lambda_n,
    where t^q ||A^q Q(t)|| attains its supremum, so the fitted Mq is the
    tight constant for the retained modes.
    """
    if mode_count < 4:
        raise DomainError(f"mode_count must be >= 4, got {mode_count}")
    t_samples = np.asarray(list(t_samples), dtype=float)
    if t_samples.size == 0:
        raise DomainError("t_samples must be nonempty")

    n = np.arange(1, mode_count + 1)
    lam = n * n / (1.0 + n * n)
    c1 = float(np.max(1.0 / (1.0 + n * n)))
    c2 = float(np.max(n * n))

    m0 = 1.0  # attained at t = 0
    for t in t_samples:
        qsym = np.exp(-lam * t)
        if np.max(qsym) > 1.0 + 1e-14:
            bad = int(n[np.argmax(qsym)])
            raise PropertyFailure(
                f"||Q({t})|| = {np.max(qsym)} exceeds 1", clause="Q-contraction",
                t=float(t), mode=bad)
        m0 = max(m0, float(np.max(qsym)))

    fit_ts = np.concatenate([t_samples[t_samples > 0.0], q / lam])
    mq = 0.0
    for t in fit_ts:
        mq = max(mq, float(np.max(lam ** q * np.exp(-lam * t))) * t ** q)
    return BoundConstants(C1=c1, C2=c2, M0=m0, Mq=mq, q=q)
