"""Sensitivity law, admissibility conditions and the Lebesgue-exponent calculus.

All routines accept ``n`` of any size even though the solver only runs in one
and two dimensions.  ``math.inf`` stands for the exponent ``infinity``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

INF = math.inf
CLAMP_MARGIN = 1e-3
# relative slack for the two exact identities, (iii) and (iv)
IDENTITY_RTOL = 1e-12


class InadmissibleError(ValueError):
    """Parameters violate one of the standing admissibility inequalities."""


class ExponentConsistencyError(RuntimeError):
    """A constructed exponent selection fails one of its own defining properties."""


@dataclass(frozen=True)
class Sensitivity:
    """``f(xi) = k_f (1 + xi)^(-alpha)``.

    ``k_f = 0`` is accepted as the decoupled control (pure heat flow for u).
    """

    k_f: float
    alpha: float

    def __post_init__(self):
        if not (self.k_f >= 0 and math.isfinite(self.k_f)):
            raise ValueError(f"k_f must be a finite nonnegative number, got {self.k_f}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def __call__(self, xi):
        return self.k_f * (1.0 + xi) ** (-self.alpha)


def f_eval(sens: Sensitivity, xi: float) -> float:
    if xi < 0:
        raise ValueError(f"xi must be nonnegative, got {xi}")
    return float(sens(xi))


def alpha_threshold(n: int) -> float:
    """Lower bound on alpha for global solvability: 0 when n = 1, (n-2)/(2(n-1)) otherwise."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n == 1:
        return 0.0
    return (n - 2) / (2 * (n - 1))


def alpha_clamp(alpha: float) -> float:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return min(alpha, 0.5 - CLAMP_MARGIN)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    @property
    def is_empty(self) -> bool:
        if self.lower < self.upper:
            return False
        return not (self.lower == self.upper and self.lower_closed and self.upper_closed)

    def __contains__(self, x: float) -> bool:
        above = x >= self.lower if self.lower_closed else x > self.lower
        below = x <= self.upper if self.upper_closed else x < self.upper
        return above and below

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_closed": self.lower_closed,
            "upper_closed": self.upper_closed,
        }

    def __str__(self) -> str:
        lb = "[" if self.lower_closed else "("
        ub = "]" if self.upper_closed else ")"
        return f"{lb}{self.lower:g}, {self.upper:g}{ub}"


def _check_alpha(n: int, alpha: float) -> None:
    thr = alpha_threshold(n)
    if not alpha > thr:
        raise InadmissibleError(f"alpha = {alpha} must exceed the threshold {thr:g} for n = {n}")


def admissible_q_interval(n: int, alpha: float) -> Interval:
    """Range of the signal's Sobolev exponent q."""
    _check_alpha(n, alpha)
    lower = max(1.0, (1.0 - 2.0 * alpha) * n)
    upper = INF if n == 1 else n / (n - 1)
    iv = Interval(lower, upper)
    if iv.is_empty:
        raise InadmissibleError(f"empty q interval {iv} for n = {n}, alpha = {alpha}")
    return iv


def _check_q(n: int, alpha: float, q: float) -> None:
    iv = admissible_q_interval(n, alpha)
    if q not in iv:
        raise InadmissibleError(f"q = {q} outside the admissible interval {iv} (need max(1, (1-2a)n) < q < n/(n-1))")


def admissible_r_interval(n: int, alpha: float, q: float) -> Interval:
    """Range of r for which the exponent selection works, using the clamped alpha."""
    _check_q(n, alpha, q)
    a = alpha_clamp(alpha)
    lower = q / (q - 1.0 + 2.0 * a)
    if n <= 2:
        iv = Interval(lower, INF, upper_closed=(n == 1))
    else:
        iv = Interval(lower, n / (n - 2))
    if iv.is_empty:
        raise InadmissibleError(f"empty r interval {iv} for n = {n}, alpha = {alpha}, q = {q}")
    return iv


def sobolev_conjugate(q: float, n: int, order: int = 1) -> float:
    """Exponent ``q*`` with ``1/q* = 1/q - order/n``; infinity when that is not positive."""
    if q < 1 or n < 1:
        raise ValueError(f"need q >= 1 and n >= 1, got q={q}, n={n}")
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    inv = 1.0 / q - order / n
    return 1.0 / inv if inv > 0 else INF


@dataclass(frozen=True)
class ExponentSelection:
    n: int
    alpha: float
    alpha_eff: float
    q: float
    r: float
    delta1: float
    delta2: float
    delta3: float
    s1: float
    s2: float
    s: float
    theta: float
    gamma: float

    def as_dict(self) -> dict:
        return asdict(self)


def _inv(x: float) -> float:
    return 0.0 if x == INF else 1.0 / x


def choose_delta3(delta1: float, delta2: float, n: int) -> float:
    """Slack ``delta3`` with ``delta3 < min(delta1, delta2)`` and ``delta1 + delta2 - delta3 > 1/n``.

    Half the smaller slack is used when it keeps the second inequality; otherwise
    half of the excess ``delta1 + delta2 - 1/n``.
    """
    d3 = 0.5 * min(delta1, delta2)
    if delta1 + delta2 - d3 > 1.0 / n:
        return d3
    return 0.5 * (delta1 + delta2 - 1.0 / n)


def select_exponents(n: int, alpha: float, q: float, r: float) -> ExponentSelection:
    """Exponents ``s, s1, s2``, slack ``delta1..3``, interpolation weight ``theta`` and ``gamma``."""
    iv = admissible_r_interval(n, alpha, q)
    if r not in iv:
        raise InadmissibleError(f"r = {r} outside the admissible interval {iv}")
    a = alpha_clamp(alpha)
    delta1 = 1.0 / n - (1.0 - 2.0 * a) / q
    delta2 = 1.0 - _inv(r)
    if not delta1 + delta2 > 1.0 / n:
        raise InadmissibleError(f"delta1 + delta2 = {delta1 + delta2} must exceed 1/n")
    delta3 = choose_delta3(delta1, delta2, n)
    s1 = 1.0 / (_inv(r) + delta3)
    s2 = q / (1.0 - 2.0 * a)
    s = s1 * s2 / (s1 + s2)
    theta = (s1 - 1.0) / ((1.0 - _inv(r)) * s1)
    sel = ExponentSelection(n, alpha, a, q, r, delta1, delta2, delta3, s1, s2, s, theta, r)
    report = verify_exponent_properties(sel)
    if not all(report.values()):
        bad = [k for k, ok in report.items() if not ok]
        raise ExponentConsistencyError(f"exponent selection violates {bad} for n={n}, alpha={alpha}, q={q}, r={r}")
    return sel


def verify_exponent_properties(sel: ExponentSelection) -> dict[str, bool]:
    """Evaluate the five defining inequalities plus the construction side conditions."""
    n, a, q, r = sel.n, sel.alpha_eff, sel.q, sel.r
    s, s1, s2 = sel.s, sel.s1, sel.s2
    prod = s2 * (1.0 - 2.0 * a)
    return {
        "i": 1.0 / s - _inv(r) < 1.0 / n,
        "ii": s < s1 < r,
        "iii": 0.0 < prod <= q * (1.0 + IDENTITY_RTOL),
        "iv": math.isclose(1.0 / s, 1.0 / s1 + 1.0 / s2, rel_tol=IDENTITY_RTOL),
        "v": 1.0 - 1.0 / s1 < 2.0 / n,
        "exponents_gt_1": s > 1 and s1 > 1 and s2 > 1,
        "theta_in_unit": 0.0 < sel.theta < 1.0,
        "delta3_slack": 0.0 < sel.delta3 < min(sel.delta1, sel.delta2)
        and sel.delta1 + sel.delta2 - sel.delta3 > 1.0 / n,
    }


def select_gamma(n: int, alpha: float, q: float, r: float) -> float:
    """Exponent governing the L^r decay rate near t = 0.

    Equal to ``r`` inside the admissible r range.  Below it the L^r norm is
    dominated by a larger admissible exponent (the interval midpoint, or
    ``lower + 1`` when unbounded); ``r = 1`` is the conserved mass.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if r == 1:
        return 1.0
    iv = admissible_r_interval(n, alpha, q)
    if r in iv:
        return r
    if r > iv.lower:
        raise InadmissibleError(f"r = {r} lies above the admissible interval {iv}")
    return iv.lower + 1.0 if iv.upper == INF else 0.5 * (iv.lower + iv.upper)


def lr_decay_exponent(n: int, gamma: float) -> float:
    """Predicted power of t in the L^r smoothing bound, ``-(n/2)(1 - 1/gamma)``."""
    return -0.5 * n * (1.0 - _inv(gamma))


def taxis_exponent(n: int, r: float) -> float:
    return 1.0 - 0.5 * n * (1.0 - _inv(r))


def signal_exponent(n: int, q: float) -> float:
    """Slowest power in the Duhamel estimate for ``||v(t) - v0||_{W^{1,q}}``."""
    return 0.5 - 0.5 * n * (1.0 - 1.0 / q)


def describe(n: int, alpha: float, q: float | None = None, r: float | None = None) -> dict:
    """Admissibility summary used by the ``params`` command; raises on violations."""
    out: dict = {"n": n, "alpha": alpha, "alpha_threshold": alpha_threshold(n)}
    _check_alpha(n, alpha)
    a = alpha_clamp(alpha)
    out["alpha_eff"] = a
    out["alpha_clamped"] = a != alpha
    out["q_interval"] = admissible_q_interval(n, alpha).as_dict()
    if q is not None:
        out["q"] = q
        out["r_interval"] = admissible_r_interval(n, alpha, q).as_dict()
        out["sobolev_conjugate_1"] = sobolev_conjugate(q, n, 1)
        out["sobolev_conjugate_2"] = sobolev_conjugate(q, n, 2)
        if r is not None:
            sel = select_exponents(n, alpha, q, r)
            out["selection"] = sel.as_dict()
            out["properties"] = verify_exponent_properties(sel)
            out["lr_decay_exponent"] = lr_decay_exponent(n, sel.gamma)
    elif r is not None:
        raise InadmissibleError("r requires q")
    return out


def _interior(rng, iv: Interval, span: float) -> float:
    """Uniform draw strictly inside ``iv``; unbounded intervals are cut at ``lower + span``."""
    upper = iv.lower + span if iv.upper == INF else iv.upper
    u = rng.uniform(0.01, 0.99)
    return iv.lower + u * (upper - iv.lower)


def sample_admissible(rng, n: int | None = None) -> tuple[int, float, float, float]:
    """Random ``(n, alpha, q, r)`` drawn inside the admissibility intervals.

    ``n`` is uniform on 1..5 unless given; alpha ranges over (threshold, 1)
    so the clamp is exercised too.
    """
    if n is None:
        n = int(rng.integers(1, 6))
    thr = alpha_threshold(n)
    alpha = thr + rng.uniform(0.01, 0.99) * (1.0 - thr)
    q = _interior(rng, admissible_q_interval(n, alpha), 4.0)
    r = _interior(rng, admissible_r_interval(n, alpha, q), 10.0)
    return n, alpha, q, r
