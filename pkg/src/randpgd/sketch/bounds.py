"""Sample sizes from chi-squared concentration and F-distribution diagnostics."""

from __future__ import annotations

import math

__all__ = [
    "sample_size",
    "chi2_tail_bound",
    "reg_inc_beta",
    "f_cdf",
    "f_effectivity_bound",
    "table1",
    "TABLE1_DELTAS",
    "TABLE1_W",
    "TABLE1_CARDINALITIES",
]

SQRT_E = math.sqrt(math.e)
TABLE1_DELTAS = (1e-2, 1e-4)
TABLE1_W = (2.0, 4.0, 10.0)
TABLE1_CARDINALITIES = (1, 10**3, 10**6, 10**9)


def _log_count(n):
    if n < 1:
        raise ValueError("cardinality must be at least 1")
    return math.log(n)  # exact for Python ints of any size


def sample_size(delta, w, cardinality, mode="absolute", m_max=None):
    """Smallest admissible number ``K`` of Gaussian vectors.

    Parameters
    ----------
    delta : float
        Failure probability in (0, 1).
    w : float
        Effectivity factor; ``w > sqrt(e)`` (absolute) or ``w > e`` (relative).
    cardinality : int
        ``#M`` (absolute) or ``#P`` (relative).
    mode : {"absolute", "relative"}
    m_max : int, optional
        Maximal greedy rank; multiplies the relative-mode union bound.

    Returns
    -------
    int
        ``max(3, ceil(formula))`` with formula
        ``(log #M + log 1/delta) / log(w / sqrt(e))`` (absolute) or
        ``(2 log(2 #P m_max) + 2 log 1/delta) / log(w / e)`` (relative).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta={delta} must lie in (0, 1)")
    if mode == "absolute":
        if not w > SQRT_E:
            raise ValueError(f"absolute mode needs w > sqrt(e), got w={w}")
        k = (_log_count(cardinality) - math.log(delta)) / math.log(w / SQRT_E)
    elif mode == "relative":
        if not w > math.e:
            raise ValueError(f"relative mode needs w > e, got w={w}")
        count = 2 * int(cardinality) * (int(m_max) if m_max is not None else 1)
        k = (2.0 * _log_count(count) - 2.0 * math.log(delta)) / math.log(w / math.e)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return max(3, math.ceil(k - 1e-12 * abs(k)))


def chi2_tail_bound(w, k):
    """``(sqrt(e) / w)^K``: bound on ``P(not K/w^2 <= Q <= K w^2)``, ``Q ~ chi2(K)``."""
    if not w > SQRT_E:
        raise ValueError(f"need w > sqrt(e), got {w}")
    if k < 3:
        raise ValueError(f"need K >= 3, got {k}")
    return (SQRT_E / w) ** k


def table1():
    """Rows ``(delta, w, #M, K)`` of the minimal sample sizes for finite sets."""
    return [
        (d, w, m, sample_size(d, w, m))
        for d in TABLE1_DELTAS
        for w in TABLE1_W
        for m in TABLE1_CARDINALITIES
    ]


_FPMIN = 1e-300
_EPS = 1e-16
_MAX_ITER = 200


def _betacf(x, a, b):
    """Continued fraction of the incomplete beta function (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x={x} outside [0, 1]")
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if x == 0.0 or x == 1.0:
        return float(x)
    if a == b and x == 0.5:
        return 0.5
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def f_cdf(x, k):
    """CDF of the F-distribution with ``(K, K)`` degrees of freedom."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    if k < 1:
        raise ValueError("K must be at least 1")
    if math.isinf(x):
        return 1.0
    return reg_inc_beta(x / (1.0 + x), k / 2.0, k / 2.0)


def f_effectivity_bound(w, k, cardinality):
    """``1 - #P (I_{1/(1+w^2)}(K/2, K/2) + 1 - I_{w^2/(1+w^2)}(K/2, K/2))``.

    Lower bound on the probability that all ``#P`` relative effectivities lie
    in ``[1/w, w]`` when the solution and the error are Sigma-orthogonal.
    """
    if not w > 1.0:
        raise ValueError(f"need w > 1, got {w}")
    if cardinality == 0:
        return 1.0
    w2 = float(w) ** 2
    h = k / 2.0
    low = reg_inc_beta(1.0 / (1.0 + w2), h, h)
    high = reg_inc_beta(w2 / (1.0 + w2), h, h)
    return 1.0 - cardinality * (low + 1.0 - high)
