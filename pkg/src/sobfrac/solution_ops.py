"""Mild-solution operators realized as theta-quadratures per spectral mode.

For each mode n with generator symbol -lambda_n = -n^2/(1+n^2), the two
operators reduce to scalar multipliers

    s(t, n) = 1/(1+n^2) * int zeta_a(th) exp(-lambda_n t^a th) dth
    t(t, n) = a/(1+n^2) * int th zeta_a(th) exp(-lambda_n t^a th) dth

which a Mittag-Leffler series evaluates independently (E_a and E_{a,a}
of -lambda_n t^a, divided by 1+n^2).  At alpha = 1 the density collapses
to a Dirac delta and the multipliers come straight from the semigroup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PropertyFailure
from .spectral import BoundConstants, SpectralField, measure_bounds
from .specfun import FracOrder, QuadratureRule, gamma, theta_quadrature

_DEFAULT_NODES = 200


@dataclass
class SolutionOperatorCache:
    """Per-(time, mode) multipliers for the two solution operators.

    Multiplier rows are memoized by time value; the solver reuses one
    cache across every Picard sweep on its fixed grid.  After
    construction the cache is only appended to (memoization), never
    mutated, so concurrent readers are safe.
    """

    order: FracOrder
    mode_count: int
    rule: QuadratureRule | None = None
    node_count: int = _DEFAULT_NODES
    _lam: np.ndarray = field(init=False, repr=False)
    _linv: np.ndarray = field(init=False, repr=False)
    _wz: np.ndarray = field(init=False, repr=False)
    _wzt: np.ndarray = field(init=False, repr=False)
    _memo: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if self.mode_count < 1:
            raise DomainError(f"mode_count must be >= 1, got {self.mode_count}")
        alpha = self.order.alpha
        n = np.arange(1, self.mode_count + 1, dtype=float)
        self._lam = n * n / (1.0 + n * n)
        self._linv = 1.0 / (1.0 + n * n)
        if alpha < 1.0:
            if self.rule is None:
                self.rule = theta_quadrature(alpha, self.node_count)
            wz = self.rule.weights * self.rule.density_values
            self._wz = wz
            self._wzt = wz * self.rule.nodes
        else:
            # delta limit: theta integration is bypassed entirely
            self._wz = np.empty(0)
            self._wzt = np.empty(0)

    def multiplier_rows(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(s_row, t_row) over all modes at time t."""
        if t < 0.0:
            raise DomainError(f"t must be nonnegative, got {t}")
        key = float(t)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        alpha = self.order.alpha
        if alpha >= 1.0:
            decay = np.exp(-self._lam * key)
            s_row = self._linv * decay
            t_row = self._linv * decay
        else:
            expo = np.exp(-np.outer(self._lam * key ** alpha, self.rule.nodes))
            s_row = self._linv * (expo @ self._wz)
            t_row = alpha * self._linv * (expo @ self._wzt)
        s_row.setflags(write=False)
        t_row.setflags(write=False)
        self._memo[key] = (s_row, t_row)
        return s_row, t_row


def s_multiplier(cache: SolutionOperatorCache, t: float, n: int) -> float:
    _check_mode(cache, n)
    return float(cache.multiplier_rows(t)[0][n - 1])


def t_multiplier(cache: SolutionOperatorCache, t: float, n: int) -> float:
    _check_mode(cache, n)
    return float(cache.multiplier_rows(t)[1][n - 1])


def _check_mode(cache, n):
    if not 1 <= n <= cache.mode_count:
        raise DomainError(f"mode {n} outside 1..{cache.mode_count}")


def apply_S(cache: SolutionOperatorCache, t: float, u: SpectralField) -> SpectralField:
    if u.mode_count > cache.mode_count:
        raise DomainError("field has more modes than the cache")
    return SpectralField(cache.multiplier_rows(t)[0][: u.mode_count] * u.coeffs)


def apply_T(cache: SolutionOperatorCache, t: float, u: SpectralField) -> SpectralField:
    if u.mode_count > cache.mode_count:
        raise DomainError("field has more modes than the cache")
    return SpectralField(cache.multiplier_rows(t)[1][: u.mode_count] * u.coeffs)


def verify_operator_bounds(cache: SolutionOperatorCache, t_samples, trials: int = 200,
                        seed: int = 0, raise_on_failure: bool = True) -> dict:
    """Empirical check of the boundedness/continuity/envelope claims.

    (a) ||S u|| <= C1 M0 ||u|| and ||T u|| <= C1 M0 / Gamma(alpha) ||u||
        on random fields, plus the same bounds in the q-norm;
    (b) multiplier continuity in t against the exact Lipschitz envelope
        lambda_n |t2^a - t1^a| / (Gamma(1+a) (1+n^2));
    (d) ||A^q T(t)|| t^(q a) stays below a C1 Mq Gamma(2-q)/Gamma(1+a(1-q))
        with the measured Mq.

    Returns a report with worst-case margins per clause; raises
    PropertyFailure on the first violated clause unless told not to.
    """
    t_samples = sorted(float(t) for t in t_samples)
    if not t_samples:
        raise DomainError("t_samples must be nonempty")
    alpha = cache.order.alpha
    q = cache.order.q
    n_modes = cache.mode_count
    bounds = measure_bounds(max(n_modes, 4), [t for t in t_samples if t > 0] or [1.0], q=q)
    rng = np.random.default_rng(seed)
    slack = 1.0 + 1e-9

    report = {"C1": bounds.C1, "M0": bounds.M0, "Mq": bounds.Mq, "q": q,
              "clauses": {}}

    # (a) boundedness
    s_cap = bounds.C1 * bounds.M0
    t_cap = bounds.C1 * bounds.M0 / gamma(alpha)
    worst_a = 0.0
    for t in t_samples:
        for _ in range(max(1, trials // max(1, len(t_samples)))):
            u = SpectralField(rng.standard_normal(n_modes))
            nu = u.norm()
            ratios = (apply_S(cache, t, u).norm() / (s_cap * nu),
                      apply_T(cache, t, u).norm() / (t_cap * nu))
            worst_a = max(worst_a, *ratios)
    report["clauses"]["a_bounded"] = {"worst_ratio": worst_a, "passed": worst_a <= slack}

    # (e) same bounds in the q-norm: multipliers are diagonal, so the
    # scaled coefficients obey the identical per-mode inequality
    worst_e = 0.0
    from .spectral import norm_q
    for t in t_samples[:: max(1, len(t_samples) // 4)]:
        u = SpectralField(rng.standard_normal(n_modes))
        nq = norm_q(u, q)
        worst_e = max(worst_e,
                      norm_q(apply_S(cache, t, u), q) / (s_cap * nq),
                      norm_q(apply_T(cache, t, u), q) / (t_cap * nq))
    report["clauses"]["e_bounded_q"] = {"worst_ratio": worst_e, "passed": worst_e <= slack}

    # (b) strong continuity via the Mittag-Leffler Lipschitz envelope
    worst_b = 0.0
    lam = cache._lam
    linv = cache._linv
    for t1, t2 in zip(t_samples[:-1], t_samples[1:]):
        s1, tt1 = cache.multiplier_rows(t1)
        s2, tt2 = cache.multiplier_rows(t2)
        envelope = lam * abs(t2 ** alpha - t1 ** alpha) / gamma(1.0 + alpha) * linv
        gap = np.abs(s2 - s1)
        ratio = float(np.max(gap / (envelope * 1.05 + 1e-8)))
        worst_b = max(worst_b, ratio)
        if not np.all(np.abs(tt2 - tt1) < 1.0):
            raise PropertyFailure("T multiplier jump", clause="b", t=t2)
    report["clauses"]["b_continuity"] = {"worst_ratio": worst_b, "passed": worst_b <= 1.0}

    # (d) the t^{-q alpha} envelope for ||A^q T(t)||
    cap_d = (alpha * bounds.C1 * bounds.Mq * gamma(2.0 - q)
             / gamma(1.0 + alpha * (1.0 - q)))
    worst_d = 0.0
    for t in np.geomspace(1e-3, max(t_samples) if max(t_samples) > 0 else 1.0, 40):
        t_row = cache.multiplier_rows(float(t))[1]
        measured = float(np.max(lam ** q * t_row)) * t ** (q * alpha)
        worst_d = max(worst_d, measured / cap_d)
    report["clauses"]["d_envelope"] = {"worst_ratio": worst_d, "passed": worst_d <= slack}

    report["passed"] = all(c["passed"] for c in report["clauses"].values())
    if raise_on_failure and not report["passed"]:
        bad = [k for k, c in report["clauses"].items() if not c["passed"]]
        raise PropertyFailure(f"operator bound clauses failed: {bad}",
                              clause=",".join(bad), report=report)
    return report
