"""Photodetection: intensity traces to photon-count time series.

Semiclassical detection: given the instantaneous intensity, the count in a
bin of width T frames is Poisson with mean ``eta * Ibar * T`` where Ibar is
the bin-averaged intensity (so the per-bin mean is eta times the summed
intensity of the bin's frames).  This reproduces thermal counting statistics
exactly: with bins at or below the coherence time the marginal is
Bose-Einstein, far above it the counts approach Poisson.

The two arms of the experiment are a scanning point detector (reference)
and a bucket detector that integrates everything an object mask transmits.
Their scale factors ``eta_ref`` / ``eta_bucket`` are independent knobs: the
bucket collects many speckles, so it usually must be attenuated into the
regime where empty bins remain common.

File interfaces: two-channel count CSV (``bin_index,count_ch1,count_ch2``),
timestamp CSV (``channel,timestamp_ns``) binned on ingestion, and PGM
object masks normalized to [0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import _rng
from .fieldgen import FieldStack
from .pgm import read_pgm

__all__ = [
    "ObjectMask",
    "DetectorConfig",
    "CountSeries",
    "CsvFormatError",
    "point_intensity",
    "bucket_intensity",
    "sample_counts",
    "rebin",
    "letter_t_mask",
    "write_counts_csv",
    "read_counts_csv",
    "read_timestamps_csv",
]


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectMask:
    """Transmittance map in [0, 1]; values outside are clamped."""

    values: np.ndarray

    def __post_init__(self):
        v = np.clip(np.asarray(self.values, dtype=np.float64), 0.0, 1.0)
        if v.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_pgm(cls, path) -> "ObjectMask":
        return cls(values=read_pgm(path))

    def n_transmitting(self, threshold: float = 0.5) -> int:
        return int(np.count_nonzero(self.values >= threshold))


def letter_t_mask(ny: int, nx: int, stroke_px: int | None = None) -> ObjectMask:
    """Built-in test object: a letter "T" centered on the grid."""
    if stroke_px is None:
        stroke_px = max(2, nx // 10)
    v = np.zeros((ny, nx))
    top = ny // 6
    bar_w = (2 * nx) // 3
    x0 = (nx - bar_w) // 2
    v[top : top + stroke_px, x0 : x0 + bar_w] = 1.0
    xc = (nx - stroke_px) // 2
    v[top : ny - top, xc : xc + stroke_px] = 1.0
    return ObjectMask(values=v)


@dataclass(frozen=True)
class DetectorConfig:
    """Per-arm detection settings.

    ``eta_ref``/``eta_bucket`` scale intensity to detected photons per frame;
    ``bin_width`` is T in frame intervals (one frame is the intensity
    resolution quantum, so T < 1 is disallowed); ``dark_rate`` adds a Poisson
    dark contribution per frame (off by default).
    """

    eta_ref: float
    eta_bucket: float
    bin_width: int = 1
    seed: int = 0
    dark_rate: float = 0.0

    def __post_init__(self):
        if self.eta_ref < 0 or self.eta_bucket < 0:
            raise ValueError("eta_ref and eta_bucket must be >= 0")
        if int(self.bin_width) != self.bin_width or self.bin_width < 1:
            raise ValueError(f"bin_width must be an integer >= 1 frame, got {self.bin_width}")
        if self.dark_rate < 0:
            raise ValueError("dark_rate must be >= 0")


@dataclass(frozen=True)
class CountSeries:
    """Non-negative integer counts, one per time bin, for one channel."""

    counts: np.ndarray
    channel: str = "ch"
    bin_width: int = 1

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1:
            raise ValueError("counts must be 1-D")
        if c.size and c.min() < 0:
            raise ValueError("counts must be >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def __len__(self) -> int:
        return len(self.counts)

    def mean(self) -> float:
        return float(self.counts.mean()) if len(self.counts) else 0.0


def point_intensity(stack: FieldStack, pixel: tuple[int, int]) -> np.ndarray:
    """Intensity trace |E(pixel, t)|**2, one value per frame."""
    py, px = pixel
    ny, nx = stack.config.ny, stack.config.nx
    if not (0 <= py < ny and 0 <= px < nx):
        raise ValueError(f"pixel {pixel} outside {ny}x{nx} grid")
    return np.abs(stack.field[:, py, px]) ** 2


def bucket_intensity(stack: FieldStack, mask: ObjectMask) -> np.ndarray:
    """Mask-weighted intensity summed over the grid, one value per frame."""
    if mask.shape != (stack.config.ny, stack.config.nx):
        raise ValueError(f"mask shape {mask.shape} != grid {(stack.config.ny, stack.config.nx)}")
    intensity = np.abs(stack.field) ** 2
    return np.einsum("tyx,yx->t", intensity, mask.values)


def sample_counts(
    trace: np.ndarray,
    eta: float,
    bin_width: int = 1,
    seed: int = 0,
    channel: str = "ch",
    dark_rate: float = 0.0,
) -> CountSeries:
    """Poisson counts per bin with mean eta * (summed bin intensity) + dark.

    Deterministic in ``seed``; trailing frames that do not fill a bin are
    dropped.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    bin_width = int(bin_width)
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    trace = np.asarray(trace, dtype=np.float64)
    nbins = len(trace) // bin_width
    lam = eta * trace[: nbins * bin_width].reshape(nbins, bin_width).sum(axis=1)
    lam += dark_rate * bin_width
    rng = _rng.generator(seed, "sample-counts")
    counts = rng.poisson(lam) if nbins else np.zeros(0, dtype=np.int64)
    return CountSeries(counts=counts, channel=channel, bin_width=bin_width)


def rebin(series: CountSeries, k: int) -> CountSeries:
    """Merge k consecutive bins; conserves counts up to the dropped remainder."""
    k = int(k)
    if k < 1:
        raise ValueError(f"rebin factor must be >= 1, got {k}")
    if k == 1:
        return series
    n = len(series.counts) // k
    merged = series.counts[: n * k].reshape(n, k).sum(axis=1)
    return CountSeries(counts=merged, channel=series.channel, bin_width=series.bin_width * k)


# ---------------------------------------------------------------------------
# file interfaces
# ---------------------------------------------------------------------------


def write_counts_csv(path, ch1: CountSeries, ch2: CountSeries) -> None:
    if len(ch1) != len(ch2):
        raise ValueError(f"channel lengths differ: {len(ch1)} vs {len(ch2)}")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_index", "count_ch1", "count_ch2"])
        for i, (a, b) in enumerate(zip(ch1.counts.tolist(), ch2.counts.tolist())):
            w.writerow([i, a, b])


def read_counts_csv(path, bin_width: int = 1) -> tuple[CountSeries, CountSeries]:
    """Read a two-channel count CSV written by :func:`write_counts_csv`."""
    c1: list[int] = []
    c2: list[int] = []
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["bin_index", "count_ch1", "count_ch2"]:
            raise CsvFormatError(f"{path}: expected header bin_index,count_ch1,count_ch2")
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                _, a, b = row
                ia, ib = int(a), int(b)
            except ValueError as e:
                raise CsvFormatError(f"{path}: line {lineno}: malformed row {row!r}") from e
            if ia < 0 or ib < 0:
                raise CsvFormatError(f"{path}: line {lineno}: negative count")
            c1.append(ia)
            c2.append(ib)
    return (
        CountSeries(counts=np.array(c1, dtype=np.int64), channel="ch1", bin_width=bin_width),
        CountSeries(counts=np.array(c2, dtype=np.int64), channel="ch2", bin_width=bin_width),
    )


def read_timestamps_csv(path, bin_width_ns: int) -> dict[str, CountSeries]:
    """Bin a ``channel,timestamp_ns`` event list into per-channel counts.

    All channels share one bin grid starting at t = 0 and ending at the
    latest event, so the returned series are mutually aligned.
    """
    if bin_width_ns <= 0:
        raise ValueError("bin_width_ns must be > 0")
    chans: dict[str, list[int]] = {}
    with open(path, newline="") as f:
        rd = csv.reader(f)
        header = next(rd, None)
        if header is None or [h.strip() for h in header] != ["channel", "timestamp_ns"]:
            raise CsvFormatError(f"{path}: expected header channel,timestamp_ns")
        for lineno, row in enumerate(rd, start=2):
            if not row:
                continue
            try:
                ch, ts = row
                t = int(ts)
            except ValueError as e:
                raise CsvFormatError(f"{path}: line {lineno}: malformed row {row!r}") from e
            if t < 0:
                raise CsvFormatError(f"{path}: line {lineno}: negative timestamp")
            chans.setdefault(ch.strip(), []).append(t)
    if not chans:
        raise CsvFormatError(f"{path}: no events")
    t_max = max(max(v) for v in chans.values())
    nbins = t_max // bin_width_ns + 1
    out = {}
    for ch, ts in sorted(chans.items()):
        idx = np.asarray(ts, dtype=np.int64) // bin_width_ns
        counts = np.bincount(idx, minlength=nbins).astype(np.int64)
        out[ch] = CountSeries(counts=counts, channel=ch, bin_width=1)
    return out
