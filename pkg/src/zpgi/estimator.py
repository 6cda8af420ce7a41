"""Empirical joint photon-number statistics from two count series.

The central object is a mergeable joint histogram N[m, n] of per-bin count
pairs at a fixed lag, from which the normalized correlation

    g2_hat(m, n) = N[m, n] * N / (N[m, .] * N[., n])

is estimated together with a standard error.  For independently sampled
bins the delta method on the multinomial (N_mn, N_m., N_.n, N) gives

    Var(ln g2_hat) ~= (1/N) * (1/p_mn - 1/p_m - 1/p_n + 2*p_mn/(p_m*p_n) - 1)

with the plug-in estimates p_mn = N_mn/N etc. (derivation in
docs/math_notes.md).  When bins are serially correlated (bin width below
the source coherence time) the multinomial error is optimistic;
:func:`correlation_curve` then supports leave-one-block-out jackknife
errors over blocks much longer than the coherence time.

Histograms are exact integer tallies and merge by entrywise addition, so
chunked/parallel tallying reduces deterministically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .detect import CountSeries

__all__ = [
    "JointHistogram",
    "CurvePoint",
    "CorrelationCurve",
    "InsufficientEventsError",
    "tally_joint",
    "g2_hat",
    "correlation_curve",
    "traditional_g2",
    "write_curve_csv",
    "read_curve_csv",
]

DEFAULT_CAP = 16


class InsufficientEventsError(RuntimeError):
    """A marginal needed by the estimator holds no events."""

    def __init__(self, message: str, axis: str | None = None, index: int | None = None):
        super().__init__(message)
        self.axis = axis
        self.index = index


@dataclass(frozen=True)
class JointHistogram:
    """Tally of joint count outcomes at one lag.

    ``counts`` has shape (cap+2, cap+2); index cap+1 on either axis is the
    overflow bucket for counts above the cap.  Overflow rows/columns
    contribute to totals and marginals but cannot be estimated per-(m, n).
    """

    counts: np.ndarray
    cap: int
    lag: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        k = self.cap + 2
        if c.shape != (k, k):
            raise ValueError(f"counts shape {c.shape} != ({k}, {k}) for cap {self.cap}")
        if c.size and c.min() < 0:
            raise ValueError("histogram counts must be >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n_total(self) -> int:
        return int(self.counts.sum())

    def marginal_m(self, m: int) -> int:
        return int(self.counts[m, :].sum())

    def marginal_n(self, n: int) -> int:
        return int(self.counts[:, n].sum())

    def overflow(self) -> int:
        """Tallies with either channel above the cap."""
        k = self.cap + 1
        return int(self.counts[k, :].sum() + self.counts[:, k].sum() - self.counts[k, k])

    def merge(self, other: "JointHistogram") -> "JointHistogram":
        if other.cap != self.cap or other.lag != self.lag:
            raise ValueError("can only merge histograms with equal cap and lag")
        return JointHistogram(counts=self.counts + other.counts, cap=self.cap, lag=self.lag)

    def __add__(self, other: "JointHistogram") -> "JointHistogram":
        return self.merge(other)


def _overlap(s1: CountSeries, s2: CountSeries, lag: int) -> tuple[np.ndarray, np.ndarray]:
    if s1.bin_width != s2.bin_width:
        raise ValueError(f"bin widths differ: {s1.bin_width} vs {s2.bin_width}")
    start = max(0, -lag)
    stop = min(len(s1), len(s2) - lag)
    if stop - start < 1:
        raise ValueError(f"no overlap between series at lag {lag}")
    return s1.counts[start:stop], s2.counts[start + lag : stop + lag]


def tally_joint(s1: CountSeries, s2: CountSeries, lag: int = 0, cap: int = DEFAULT_CAP) -> JointHistogram:
    """Tally pairs (s1[i], s2[i+lag]) over the overlapping index range."""
    if cap < 0:
        raise ValueError("cap must be >= 0")
    a, b = _overlap(s1, s2, lag)
    k = cap + 2
    am = np.minimum(a, cap + 1)
    bm = np.minimum(b, cap + 1)
    flat = np.bincount(am * k + bm, minlength=k * k)
    return JointHistogram(counts=flat.reshape(k, k), cap=cap, lag=lag)


def _g2_from_counts(n_mn: float, n_m: float, n_n: float, n: float) -> tuple[float, float]:
    g = n_mn * n / (n_m * n_n)
    # delta-method variance of ln(g); the 1/p_mn term uses max(N_mn, 1)
    # so an empty joint cell reports the scale of a single event
    p = max(n_mn, 1.0) / n
    a = n_m / n
    b = n_n / n
    var_ln = (1.0 / p - 1.0 / a - 1.0 / b + 2.0 * (n_mn / n) / (a * b) - 1.0) / n
    se = (g if g > 0 else n / (n_m * n_n)) * math.sqrt(max(var_ln, 0.0))
    return g, se


def g2_hat(hist: JointHistogram, m: int, n: int) -> tuple[float, float]:
    """Estimate g2_mn = P_mn/(P_m P_n) with its multinomial standard error.

    Raises :class:`InsufficientEventsError` when a marginal is empty, naming
    the starved axis and index.
    """
    if not (0 <= m <= hist.cap and 0 <= n <= hist.cap):
        raise ValueError(f"(m, n) = ({m}, {n}) outside histogram cap {hist.cap}")
    n_m = hist.marginal_m(m)
    n_n = hist.marginal_n(n)
    if n_m == 0:
        raise InsufficientEventsError(f"no bins with channel-1 count {m}", axis="m", index=m)
    if n_n == 0:
        raise InsufficientEventsError(f"no bins with channel-2 count {n}", axis="n", index=n)
    return _g2_from_counts(float(hist.counts[m, n]), float(n_m), float(n_n), float(hist.n_total))


@dataclass(frozen=True)
class CurvePoint:
    lag: int
    g2: float  # NaN when starved
    stderr: float
    events: int  # N_mn at this lag
    starved: bool = False


@dataclass(frozen=True)
class CorrelationCurve:
    m: int
    n: int
    points: tuple[CurvePoint, ...]

    def lags(self) -> np.ndarray:
        return np.array([p.lag for p in self.points])

    def values(self) -> np.ndarray:
        return np.array([p.g2 for p in self.points])

    def stderrs(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points])


def _jackknife_g2(s1, s2, lag, m, n, cap, block_bins) -> tuple[float, float, int] | None:
    """Full-sample g2 with leave-one-block-out jackknife standard error."""
    a, b = _overlap(s1, s2, lag)
    nbins = len(a)
    nblocks = nbins // block_bins
    if nblocks < 8:
        raise ValueError(
            f"only {nblocks} jackknife blocks of {block_bins} bins at lag {lag}; need >= 8"
        )
    usable = nblocks * block_bins
    k = cap + 2
    am = np.minimum(a[:usable], cap + 1).reshape(nblocks, block_bins)
    bm = np.minimum(b[:usable], cap + 1).reshape(nblocks, block_bins)
    # per-block sufficient statistics
    blk_mn = ((am == m) & (bm == n)).sum(axis=1).astype(np.float64)
    blk_m = (am == m).sum(axis=1).astype(np.float64)
    blk_n = (bm == n).sum(axis=1).astype(np.float64)
    tot_mn, tot_m, tot_n = blk_mn.sum(), blk_m.sum(), blk_n.sum()
    if tot_m == 0:
        raise InsufficientEventsError(f"no bins with channel-1 count {m}", axis="m", index=m)
    if tot_n == 0:
        raise InsufficientEventsError(f"no bins with channel-2 count {n}", axis="n", index=n)
    g_full = tot_mn * usable / (tot_m * tot_n)
    loo_m = tot_m - blk_m
    loo_n = tot_n - blk_n
    ok = (loo_m > 0) & (loo_n > 0)
    if not ok.all():
        # some block removal empties a marginal: fall back to multinomial error
        _, se = _g2_from_counts(tot_mn, tot_m, tot_n, float(usable))
        return g_full, se, int(tot_mn)
    loo = (tot_mn - blk_mn) * (usable - block_bins) / (loo_m * loo_n)
    se = math.sqrt((nblocks - 1) / nblocks * float(np.sum((loo - loo.mean()) ** 2)))
    return g_full, se, int(tot_mn)


def correlation_curve(
    s1: CountSeries,
    s2: CountSeries,
    m: int,
    n: int,
    lags,
    cap: int = DEFAULT_CAP,
    block_bins: int | None = None,
) -> CorrelationCurve:
    """g2_mn(lag) over a list of lags.

    ``block_bins`` selects jackknife errors over blocks of that many bins,
    which is required for honest errors when bins are serially correlated
    (choose blocks of at least ~50 coherence times).  With the default
    ``None`` the multinomial delta-method error is used (valid for
    independently sampled bins).

    A starved lag is reported in place with ``starved=True`` and NaN value,
    never dropped.
    """
    pts = []
    for lag in sorted(int(v) for v in lags):
        try:
            if block_bins is None:
                h = tally_joint(s1, s2, lag, cap=cap)
                g, se = g2_hat(h, m, n)
                ev = int(h.counts[m, n])
            else:
                g, se, ev = _jackknife_g2(s1, s2, lag, m, n, cap, int(block_bins))
            pts.append(CurvePoint(lag=lag, g2=g, stderr=se, events=ev))
        except InsufficientEventsError:
            pts.append(CurvePoint(lag=lag, g2=float("nan"), stderr=float("nan"), events=0, starved=True))
    return CorrelationCurve(m=m, n=n, points=tuple(pts))


def traditional_g2(s1: CountSeries, s2: CountSeries, lag: int = 0) -> tuple[float, float]:
    """Intensity-style correlation <n1*n2>/(<n1><n2>) over bins, with error.

    The standard error comes from the delta method on the sample moments,
    using empirical (co)variances of (n1*n2, n1, n2).
    """
    a, b = _overlap(s1, s2, lag)
    n = len(a)
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    mx, my = x.mean(), y.mean()
    if mx == 0.0:
        raise InsufficientEventsError("channel 1 has no counts", axis="m", index=None)
    if my == 0.0:
        raise InsufficientEventsError("channel 2 has no counts", axis="n", index=None)
    z = x * y
    mz = z.mean()
    g = mz / (mx * my)
    if mz == 0.0:
        # no coincidences at all: error scale of one coincidence
        return 0.0, 1.0 / (mx * my * n)
    cov = np.cov(np.stack([z, x, y]), bias=True)
    var_ln = (
        cov[0, 0] / mz**2
        + cov[1, 1] / mx**2
        + cov[2, 2] / my**2
        - 2.0 * cov[0, 1] / (mz * mx)
        - 2.0 * cov[0, 2] / (mz * my)
        + 2.0 * cov[1, 2] / (mx * my)
    ) / n
    return float(g), float(g * math.sqrt(max(var_ln, 0.0)))


# ---------------------------------------------------------------------------
# curve CSV
# ---------------------------------------------------------------------------


def write_curve_csv(path, curve: CorrelationCurve) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lag", "m", "n", "g2", "stderr", "events"])
        for p in curve.points:
            w.writerow([p.lag, curve.m, curve.n, repr(p.g2), repr(p.stderr), p.events])


def read_curve_csv(path) -> CorrelationCurve:
    pts = []
    m = n = None
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["lag", "m", "n", "g2", "stderr", "events"]:
            raise ValueError(f"{path}: expected header lag,m,n,g2,stderr,events")
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                lag, rm, rn, g2v, se, ev = row
                lag, rm, rn, ev = int(lag), int(rm), int(rn), int(ev)
                g2v, se = float(g2v), float(se)
            except ValueError as e:
                raise ValueError(f"{path}: line {lineno}: malformed row {row!r}") from e
            if m is None:
                m, n = rm, rn
            elif (rm, rn) != (m, n):
                raise ValueError(f"{path}: line {lineno}: mixed (m, n) indices in one curve")
            pts.append(
                CurvePoint(lag=lag, g2=g2v, stderr=se, events=ev, starved=not math.isfinite(g2v))
            )
    if m is None:
        raise ValueError(f"{path}: empty curve")
    return CorrelationCurve(m=m, n=n, points=tuple(pts))
