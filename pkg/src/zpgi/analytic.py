"""Closed-form joint photon statistics of two thermal-light channels.

Two photon-counting detectors observing partially correlated thermal
(circular-Gaussian) light register, per time bin, photon numbers (m, n)
whose joint probability generating function is rational:

    M(x, y) = 1 / (A - B*x - B*y + C*x*y)

with

    beta = (1 - mu) * nbar**2
    A = 1 + 2*nbar + beta
    B = nbar + beta
    C = beta

where ``nbar`` is the mean detected photon number per bin on each channel
and ``mu = |g1|**2`` is the squared normalized field correlation between
the two detection events (1 for fully coherent pairs, 0 for independent
channels).  Matching coefficients in ``M * (A - Bx - By + Cxy) = 1`` gives
the exact two-index recurrence

    A*P[m,n] = B*P[m-1,n] + B*P[m,n-1] - C*P[m-1,n-1],   P[0,0] = 1/A

(out-of-range terms are zero), which this module uses instead of symbolic
differentiation of M: it is O(m*n), has no factorials, and is exact in
exact arithmetic.

Useful closed forms handled separately:

* single-channel marginal (Bose-Einstein):  P_m = nbar**m / (1+nbar)**(m+1)
* one channel dark:                         P_m0 = B**m / A**(m+1)
* normalized correlation of m photons against an empty bin:

    g2_m0 = (1+nbar)**(m+2) * (1 + (1-mu)*nbar)**m / A**(m+1)

* Gaussian-spectrum time dependence, with a peak-height coefficient
  ``v`` in [0, 1] absorbing instrumental washout:

    mu(tau) = v * exp(-(sigma*tau)**2)

All functions are pure and safe to call from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PhotonStatsParams",
    "JointPmnTable",
    "bose_einstein_pm",
    "p_mn",
    "p_m0_closed",
    "g2_m0",
    "g2_m0_tau",
    "g2_10_tau",
    "pmn_table",
    "mu_of_tau",
    "marginal_tail_bound",
    "truncation_order",
]


@dataclass(frozen=True)
class PhotonStatsParams:
    """Inputs for the closed-form statistics.

    Attributes
    ----------
    nbar : float
        Mean detected photons per bin on each channel (= <I>*T), >= 0.
    mu : float
        Squared first-order coherence between the two detection events,
        in [0, 1].
    sigma : float
        Spectral standard deviation (rad/s, or 1/frame in grid units) of
        the Gaussian spectrum; only enters the tau-dependent functions.
    v : float
        Fitted peak-height coefficient in [0, 1] multiplying
        exp(-(sigma*tau)**2); 1 in pure analytic mode.
    central_freq : float
        Central angular frequency of the spectrum.  Informational only: it
        cancels out of mu and never enters a formula here.
    """

    nbar: float
    mu: float = 1.0
    sigma: float = 1.0
    v: float = 1.0
    central_freq: float = 0.0

    def __post_init__(self):
        if self.nbar < 0:
            raise ValueError(f"nbar must be >= 0, got {self.nbar}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must be in [0, 1], got {self.mu}")
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"v must be in [0, 1], got {self.v}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def _abc(nbar: float, mu: float) -> tuple[float, float, float]:
    beta = (1.0 - mu) * nbar * nbar
    return 1.0 + 2.0 * nbar + beta, nbar + beta, beta


def bose_einstein_pm(m: int, nbar: float) -> float:
    """P(m photons) for single-mode thermal light, nbar**m/(1+nbar)**(m+1)."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if nbar < 0:
        raise ValueError(f"nbar must be >= 0, got {nbar}")
    if nbar == 0.0:
        return 1.0 if m == 0 else 0.0
    ratio = nbar / (1.0 + nbar)
    return ratio**m / (1.0 + nbar)


def p_mn(m: int, n: int, params: PhotonStatsParams) -> float:
    """Joint probability P(m, n) via the exact generating-function recurrence.

    Symmetric in (m, n); equals ``p_m0_closed`` for n = 0 and factorizes
    into Bose-Einstein marginals for mu = 0.
    """
    if m < 0 or n < 0:
        raise ValueError(f"m, n must be >= 0, got ({m}, {n})")
    a, b, c = _abc(params.nbar, params.mu)
    # row-by-row over a single buffer of length n+1
    row = np.zeros(n + 1)
    row[0] = 1.0 / a
    for j in range(1, n + 1):
        row[j] = b * row[j - 1] / a
    for _ in range(m):
        prev = row.copy()
        row[0] = b * prev[0] / a
        for j in range(1, n + 1):
            row[j] = (b * prev[j] + b * row[j - 1] - c * prev[j - 1]) / a
    return max(float(row[n]), 0.0)


def p_m0_closed(m: int, params: PhotonStatsParams) -> float:
    """P(m, 0) in closed form: B**m / A**(m+1)."""
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    a, b, _ = _abc(params.nbar, params.mu)
    return (b / a) ** m / a


def g2_m0(m: int, params: PhotonStatsParams) -> float:
    """Normalized correlation g2 of m photons on channel 1 vs zero on channel 2.

    Equals P_m0 / (P_m * P_0) = (1+nbar)**(m+2) * (1+(1-mu)*nbar)**m / A**(m+1).
    Defined as 1 at nbar = 0 by continuity (both channels deterministic vacuum).
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    nbar, mu = params.nbar, params.mu
    if nbar == 0.0:
        return 1.0
    a, _, _ = _abc(nbar, mu)
    # factored form: per-m base is <= 1, so no overflow for any m
    base = (1.0 + nbar) * (1.0 + (1.0 - mu) * nbar) / a
    return base**m * (1.0 + nbar) ** 2 / a


def mu_of_tau(tau: float, params: PhotonStatsParams) -> float:
    """Gaussian-spectrum coherence mu(tau) = v * exp(-(sigma*tau)**2)."""
    return params.v * math.exp(-((params.sigma * tau) ** 2))


def g2_m0_tau(m: int, tau: float, params: PhotonStatsParams) -> float:
    """g2_m0 at time lag tau, with mu(tau) = v * exp(-(sigma*tau)**2)."""
    return g2_m0(m, replace(params, mu=mu_of_tau(tau, params)))


def g2_10_tau(tau: float, params: PhotonStatsParams) -> float:
    """Temporal correlation of one photon vs an empty bin, g2_10(tau)."""
    return g2_m0_tau(1, tau, params)


def marginal_tail_bound(nbar: float, order: int) -> float:
    """Upper bound on the probability mass with m > order (or n > order).

    The single-channel marginal is exactly Bose-Einstein, so the mass of
    any row/column block beyond ``order`` is bounded by the geometric tail
    (nbar/(1+nbar))**(order+1).
    """
    if nbar == 0.0:
        return 0.0
    return (nbar / (1.0 + nbar)) ** (order + 1)


def truncation_order(nbar: float, tol: float) -> int:
    """Smallest order whose marginal tail bound is below ``tol``."""
    if nbar == 0.0:
        return 0
    r = nbar / (1.0 + nbar)
    return max(0, math.ceil(math.log(tol) / math.log(r) - 1.0))


@dataclass(frozen=True)
class JointPmnTable:
    """Dense table of P(m, n) for 0 <= m, n <= mmax."""

    pmn: np.ndarray
    mmax: int
    params: PhotonStatsParams

    def row_sums(self) -> np.ndarray:
        return self.pmn.sum(axis=1)

    def total(self) -> float:
        return float(self.pmn.sum())

    def tail_bound(self) -> float:
        """Bound on the probability mass outside the table (union of axes)."""
        return 2.0 * marginal_tail_bound(self.params.nbar, self.mmax)


def pmn_table(params: PhotonStatsParams, mmax: int) -> JointPmnTable:
    """Build the (mmax+1) x (mmax+1) table of joint probabilities.

    Entries that underflow double precision clamp at 0.
    """
    if mmax < 0:
        raise ValueError(f"mmax must be >= 0, got {mmax}")
    a, b, c = _abc(params.nbar, params.mu)
    size = mmax + 1
    t = np.zeros((size, size))
    t[0, 0] = 1.0 / a
    for j in range(1, size):
        t[0, j] = b * t[0, j - 1] / a
    for i in range(1, size):
        t[i, 0] = b * t[i - 1, 0] / a
        for j in range(1, size):
            t[i, j] = (b * t[i - 1, j] + b * t[i, j - 1] - c * t[i - 1, j - 1]) / a
    np.maximum(t, 0.0, out=t)
    return JointPmnTable(pmn=t, mmax=mmax, params=params)
